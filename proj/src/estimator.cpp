#include "fembem/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "fembem/bem.hpp"
#include "fembem/errors.hpp"

namespace fembem {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kC2 = 0.88152;  // P0 trace approximation constant in 2D

Vec nodal_trace(const Mesh2D& mesh, const BoundaryMesh& bm, const Vec& u, const Vec& g_D) {
    Vec t(static_cast<Eigen::Index>(bm.size()));
    for (std::size_t i = 0; i < bm.size(); ++i) {
        int v = bm.node_vertex[i];
        if (v < 0 || v >= static_cast<int>(mesh.vertices.size())) throw GeometryError("boundary node without mesh vertex");
        t(i) = u(v) - g_D(i);
    }
    return t;
}

std::vector<BoundaryPoint> facet_points(std::size_t nseg, const std::vector<double>& s) {
    std::vector<BoundaryPoint> pts;
    pts.reserve(nseg * s.size());
    for (std::size_t i = 0; i < nseg; ++i)
        for (double si : s) pts.push_back({static_cast<int>(i), si});
    return pts;
}

// Point on triangle t for reference coordinates, with vertex `first` mapped to (0,0).
struct TriMap {
    Vec2 a, b, c;
    double jac;
    int first;
    Vec2 operator()(const Vec2& xi) const { return a + xi.x() * (b - a) + xi.y() * (c - a); }
    // P1 value from the unrotated vertex values.
    double p1(const Mesh2D& mesh, int t, const Vec& u, const Vec2& xi) const {
        const auto& T = mesh.triangles[t];
        const double l[3] = {1.0 - xi.x() - xi.y(), xi.x(), xi.y()};
        double v = 0.0;
        for (int i = 0; i < 3; ++i) v += u(T[(first + i) % 3]) * l[i];
        return v;
    }
};

TriMap tri_map(const Mesh2D& mesh, int t, int first) {
    const auto& T = mesh.triangles[t];
    TriMap m;
    m.a = mesh.vertices[T[first]];
    m.b = mesh.vertices[T[(first + 1) % 3]];
    m.c = mesh.vertices[T[(first + 2) % 3]];
    m.jac = 2.0 * triangle_area(mesh, t);
    m.first = first;
    return m;
}

// Reference rule for triangle t: Duffy toward the singular vertex if t touches it.
std::pair<QuadRule, int> element_rule(const Mesh2D& mesh, int t, const std::optional<Vec2>& singular,
                                      const QuadRule& regular, const QuadRule& duffy) {
    if (singular) {
        const auto& T = mesh.triangles[t];
        for (int i = 0; i < 3; ++i)
            if ((mesh.vertices[T[i]] - *singular).norm() < 1e-12) return {duffy, i};
    }
    return {regular, 0};
}

// Exterior traces of u_l^ext on a (possibly subdivided) copy of Gamma, plus the residuals.
struct TraceSamples {
    std::vector<Vec2> x, n;
    std::vector<double> w;           // physical weights
    std::vector<double> u_l;         // gamma_0 u_l
    std::vector<double> g0, g1;      // gamma_0, gamma_1 of u_l^ext
    std::vector<double> phi_res, g_res;  // Phi and G
};

TraceSamples trace_samples(const TransmissionProblem& problem, const BoundaryMesh& bmesh,
                           const CoupledSolution& sol, const ErrorQuadrature& q) {
    const int m = std::max(1, q.data_subdivisions);
    const BoundaryMesh src = subdivide(bmesh, m);
    const int nseg = static_cast<int>(bmesh.size());
    const int ns = static_cast<int>(src.size());
    Vec t(ns), phi(ns), ul(ns);
    for (int i = 0; i < nseg; ++i) {
        double ua = sol.u(bmesh.node_vertex[i]);
        double ub = sol.u(bmesh.node_vertex[bmesh.next(i)]);
        for (int j = 0; j < m; ++j) {
            double s = static_cast<double>(j) / m;
            int k = i * m + j;
            ul(k) = (1.0 - s) * ua + s * ub;
            t(k) = ul(k) - problem.g_D(src.points[k]);
            phi(k) = sol.phi(i);
        }
    }
    const QuadRule rule = graded_segment_rule(q.boundary_points, q.boundary_levels, 0.15);
    std::vector<double> s;
    for (const auto& p : rule.points) s.push_back(p.x());
    const auto pts = facet_points(static_cast<std::size_t>(ns), s);
    const Mat vals = boundary_layer_values(src, t, phi, pts);
    TraceSamples out;
    const std::size_t np = pts.size();
    out.x.resize(np);
    out.n.resize(np);
    out.w.resize(np);
    out.u_l.resize(np);
    out.g0.resize(np);
    out.g1.resize(np);
    out.phi_res.resize(np);
    out.g_res.resize(np);
    for (std::size_t p = 0; p < np; ++p) {
        const int k = pts[p].seg;
        const double sp = pts[p].s;
        const Vec2 x = src.point(k, sp);
        const Vec2 nrm = src.normal(k);
        const double tk = (1.0 - sp) * t(k) + sp * t(src.next(k));
        out.x[p] = x;
        out.n[p] = nrm;
        out.w[p] = rule.weights[p % rule.size()] * src.length(k);
        out.u_l[p] = (1.0 - sp) * ul(k) + sp * ul(src.next(k));
        out.g0[p] = vals(p, 3) + tk - vals(p, 0);
        out.g1[p] = -vals(p, 5) - vals(p, 2) + 0.5 * phi(k);
        out.phi_res[p] = problem.g_N(x, nrm) - vals(p, 5) - vals(p, 2) + 0.5 * phi(k);
        out.g_res[p] = vals(p, 3) - vals(p, 0);
    }
    return out;
}

const ExactSolution& require_exact(const TransmissionProblem& problem) {
    if (!problem.exact) throw UnsupportedError("problem '" + problem.id + "' has no exact solution");
    return *problem.exact;
}

}  // namespace

std::string to_string(Variant v) { return v == Variant::Strip ? "strip" : "interior"; }

Variant parse_variant(const std::string& name) {
    if (name == "strip") return Variant::Strip;
    if (name == "interior") return Variant::Interior;
    throw ConfigError("unknown algorithm '" + name + "' (expected strip or interior)");
}

BoundaryResiduals compute_residuals(const TransmissionProblem& problem, const Mesh2D& mesh, const CouplingData& data,
                                    const CoupledSolution& sol, const QuadRule& facet_rule) {
    const BoundaryMesh& bm = data.bmesh;
    const auto& ops = data.ops;
    const int n = static_cast<int>(bm.size());
    BoundaryResiduals r;
    r.t = nodal_trace(mesh, bm, sol.u, data.g_D);
    const Vec& phi = sol.phi;
    if (phi.size() != n) throw InternalError("compute_residuals: density size mismatch");

    // Exact hat moments of Phi. W part by parts: int_F (W t) zeta = -[V(t') zeta]_F + int_F V(t') zeta'.
    const Vec dt = ops.D * r.t;
    const Vec vdt_nodes = boundary_node_values(bm, r.t, dt).col(0);
    const Vec vdt = ops.V * dt;
    r.phi_moments.resize(n, 2);
    r.phi_mean.resize(n);
    for (int F = 0; F < n; ++F) {
        const double L = ops.lengths(F);
        double mw0 = vdt_nodes(F) - vdt(F) / L;
        double mw1 = -vdt_nodes(bm.next(F)) + vdt(F) / L;
        double mk0 = 0.0, mk1 = 0.0;
        for (int E = 0; E < n; ++E) {
            mk0 += phi(E) * ops.Kloc[0](E, F);
            mk1 += phi(E) * ops.Kloc[1](E, F);
        }
        double half = 0.25 * phi(F) * L;
        r.phi_moments(F, 0) = data.g_N(F, 0) - mw0 - mk0 + half;
        r.phi_moments(F, 1) = data.g_N(F, 1) - mw1 - mk1 + half;
        r.phi_mean(F) = (r.phi_moments(F, 0) + r.phi_moments(F, 1)) / L;
    }

    const Mat nodes = boundary_node_values(bm, r.t, phi);
    r.jg = nodes.col(1) - nodes.col(0);

    for (std::size_t q = 0; q < facet_rule.size(); ++q) {
        r.qs.push_back(facet_rule.points[q].x());
        r.qw.push_back(facet_rule.weights[q]);
    }
    const int nq = static_cast<int>(r.qs.size());
    const Mat vals = boundary_layer_values(bm, r.t, phi, facet_points(bm.size(), r.qs));
    r.phi_q.resize(n, nq);
    r.dg_q.resize(n, nq);
    for (int F = 0; F < n; ++F) {
        for (int q = 0; q < nq; ++q) {
            const int p = F * nq + q;
            const Vec2 x = bm.point(F, r.qs[q]);
            r.phi_q(F, q) = problem.g_N(x, bm.normal(F)) - vals(p, 5) - vals(p, 2) + 0.5 * phi(F);
            r.dg_q(F, q) = vals(p, 4) - vals(p, 1);
        }
    }
    return r;
}

FluxInputs build_flux_inputs(const Mesh2D& mesh, const MeshTopology& topo, const BoundaryMesh& bm,
                             const BoundaryResiduals& res) {
    FluxInputs in;
    in.per_vertex.resize(mesh.vertices.size());
    const int n = static_cast<int>(bm.size());
    double scale = 0.0, dev = 0.0;
    for (int F = 0; F < n; ++F) {
        const int a = bm.node_vertex[F], b = bm.node_vertex[bm.next(F)];
        const int e = topo.find_edge(a, b);
        if (e < 0 || !topo.is_boundary_edge(e)) throw GeometryError("boundary segment is not a boundary edge of the mesh");
        in.gamma_edges.push_back(e);
        in.facet_means.push_back(res.phi_mean(F));
        in.per_vertex[a].push_back({e, res.phi_moments(F, 0)});
        in.per_vertex[b].push_back({e, res.phi_moments(F, 1)});
        const double L = bm.length(F);
        scale = std::max(scale, std::abs(res.phi_mean(F)));
        dev = std::max(dev, std::abs((res.phi_moments(F, 0) + res.phi_moments(F, 1)) / L - res.phi_mean(F)));
    }
    if (dev > 1e-9 * std::max(scale, 1e-300) && dev > 0.0)
        throw InternalError("flux inputs: hat moments do not sum to Q Phi");
    return in;
}

FluxResult equilibrated_flux(const TransmissionProblem& problem, const Mesh2D& mesh, const MeshTopology& topo,
                             const CouplingData& data, const CoupledSolution& sol, const BoundaryResiduals& res,
                             bool strict) {
    const int nt = static_cast<int>(mesh.triangles.size());
    const FluxInputs in = build_flux_inputs(mesh, topo, data.bmesh, res);
    FluxResult out;
    out.mean_f.resize(nt);
    for (int t = 0; t < nt; ++t)
        out.mean_f[t] = (data.loads[t][0] + data.loads[t][1] + data.loads[t][2]) / triangle_area(mesh, t);

    std::vector<LocalFlux> locals;
    locals.reserve(mesh.vertices.size());
    for (int z = 0; z < static_cast<int>(mesh.vertices.size()); ++z)
        locals.push_back(local_equilibrated_flux(mesh, topo, z, sol.u, problem.diffusion, data.loads, in.per_vertex[z]));
    out.sigma = sum_local_fluxes(mesh, topo, locals, out.mean_f, in.gamma_edges, in.facet_means, strict, &out.check);

    const QuadRule rule = gauss_rule(2, Element::Triangle);
    const bool lin = problem.diffusion.linear;
    Mat2 ainv = Mat2::Identity();
    if (lin) ainv = problem.diffusion.matrix.inverse();
    out.eta_int.resize(nt);
    if (lin) out.eta_int_a.resize(nt);
    for (int t = 0; t < nt; ++t) {
        const BdmElement el = bdm_element(mesh, topo, t);
        const Vec2 flux = problem.diffusion.apply(p1_gradient(mesh, t, sol.u));
        double s = 0.0, sa = 0.0;
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Vec2& xi = rule.points[q];
            Eigen::Vector3d lam(1.0 - xi.x() - xi.y(), xi.x(), xi.y());
            const Vec2 d = flux - bdm_eval(el, out.sigma, lam);
            const double w = rule.weights[q] * 2.0 * el.area;
            s += w * d.squaredNorm();
            sa += w * d.dot(ainv * d);
        }
        out.eta_int[t] = std::sqrt(s);
        if (lin) out.eta_int_a[t] = std::sqrt(std::max(0.0, sa));
    }
    return out;
}

XiWeights xi_weights(const Mesh2D& mesh, const MeshTopology& topo, const std::vector<char>& gamma_vertex, int k) {
    XiWeights xw;
    const int nv = static_cast<int>(mesh.vertices.size());
    for (int v = 0; v < nv; ++v)
        if (gamma_vertex[v]) xw.seeds.push_back(v);
    if (xw.seeds.size() < 3) throw PreconditionError("xi_weights: a closed boundary needs at least 3 nodes");
    std::vector<double> sum(nv, 0.0), raw_sum(nv, 0.0);
    for (int z : xw.seeds) {
        Patch p = k_patch(mesh, topo, z, k);
        std::vector<int> nodes;
        for (int v : p.vertices) {
            if (!gamma_vertex[v]) continue;
            bool inside = true;
            for (int t : topo.vertex_triangles[v])
                if (!std::binary_search(p.triangles.begin(), p.triangles.end(), t)) inside = false;
            if (inside) nodes.push_back(v);
        }
        if (nodes.empty()) throw InternalError("xi_weights: empty node set at vertex " + std::to_string(z));
        std::vector<std::pair<int, double>> w;
        for (int v : nodes) {
            w.emplace_back(v, 1.0 / static_cast<double>(nodes.size()));
            raw_sum[v] += w.back().second;
        }
        xw.raw.push_back(w);
        xw.patches.push_back(std::move(p));
    }
    xw.weights = xw.raw;
    for (auto& w : xw.weights)
        for (auto& [v, val] : w) val /= raw_sum[v];
    for (const auto& w : xw.weights)
        for (const auto& [v, val] : w) sum[v] += val;
    for (int z : xw.seeds) xw.partition_error = std::max(xw.partition_error, std::abs(sum[z] - 1.0));
    return xw;
}

PotentialResult aux_potential(const Mesh2D& mesh, const MeshTopology& topo, const std::vector<char>& gamma_edge,
                              const std::vector<char>& gamma_vertex, const Vec& jg, int k) {
    const int nv = static_cast<int>(mesh.vertices.size());
    for (std::size_t e = 0; e < topo.edges.size(); ++e)
        if (gamma_edge[e] && !topo.is_boundary_edge(static_cast<int>(e)))
            throw GeometryError("aux_potential: Gamma edge inside the region mesh");
    const XiWeights xw = xi_weights(mesh, topo, gamma_vertex, k);
    PotentialResult out;
    out.partition_error = xw.partition_error;
    out.w.degree = 2;
    out.w.values = Vec::Zero(num_dofs(mesh, topo, 2));
    Vec xi = Vec::Zero(nv);
    for (std::size_t i = 0; i < xw.seeds.size(); ++i) {
        for (const auto& [v, val] : xw.weights[i]) xi(v) = val;
        PatchPotential pp = local_patch_potential(mesh, topo, xw.patches[i], gamma_edge, xi, jg, 2);
        for (std::size_t j = 0; j < pp.dofs.size(); ++j) out.w.values(pp.dofs[j]) += pp.values(j);
        out.interior_residual = std::max(out.interior_residual, pp.interior_residual);
        for (const auto& [v, val] : xw.weights[i]) xi(v) = 0.0;
    }
    out.eta_ext = element_gradient_norms(mesh, topo, out.w);
    double scale = 0.0, dev = 0.0;
    for (int v = 0; v < nv; ++v) {
        if (!gamma_vertex[v]) continue;
        scale = std::max(scale, std::abs(jg(v)));
        dev = std::max(dev, std::abs(out.w.values(v) - jg(v)));
    }
    out.trace_error = scale > 0.0 ? dev / scale : dev;
    return out;
}

FacetOscillation facet_oscillations(const BoundaryMesh& bm, const BoundaryResiduals& res) {
    const int n = static_cast<int>(bm.size());
    FacetOscillation o;
    o.dirichlet.resize(n);
    o.neumann.resize(n);
    for (int F = 0; F < n; ++F) {
        const double L = bm.length(F);
        const double djg = (res.jg(bm.next(F)) - res.jg(F)) / L;
        double d = 0.0, m = 0.0;
        for (std::size_t q = 0; q < res.qs.size(); ++q) {
            const double w = res.qw[q] * L;
            d += w * std::pow(res.dg_q(F, static_cast<Eigen::Index>(q)) - djg, 2);
            m += w * std::pow(res.phi_q(F, static_cast<Eigen::Index>(q)) - res.phi_mean(F), 2);
        }
        o.dirichlet[F] = std::sqrt(d);
        o.neumann[F] = std::sqrt(m);
    }
    return o;
}

std::vector<double> trace_constants(const Mesh2D& mesh, const BoundaryMesh& bm) {
    std::vector<double> c(bm.size());
    for (std::size_t F = 0; F < bm.size(); ++F) {
        const int T = bm.parent[F];
        if (T < 0) throw GeometryError("boundary facet without parent triangle");
        const double hT = triangle_diameter(mesh, T), hF = bm.length(static_cast<int>(F));
        c[F] = kC2 * std::sqrt(hT * hT * hF / (hF * triangle_area(mesh, T)));
    }
    return c;
}

std::vector<double> oscillation_omega(const Mesh2D& mesh, const ScalarField& f, const std::vector<double>& mean_f) {
    const QuadRule rule = gauss_rule(4, Element::Triangle);
    std::vector<double> out(mesh.triangles.size());
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const TriMap m = tri_map(mesh, t, 0);
        double s = 0.0;
        for (std::size_t q = 0; q < rule.size(); ++q) s += rule.weights[q] * m.jac * std::pow(f(m(rule.points[q])) - mean_f[t], 2);
        out[t] = triangle_diameter(mesh, t) * std::sqrt(s);
    }
    return out;
}

EstimatorReport total_estimator(const EstimatorParts& p, Variant variant) {
    const std::size_t n = p.eta_int.size();
    for (const auto* v : {&p.eta_ext, &p.osc_omega, &p.osc_d, &p.osc_n})
        if (v->size() != n) throw InternalError("total_estimator: indicator arrays differ in size");
    EstimatorReport r;
    r.variant = variant;
    r.region = p.region;
    r.eta_int = p.eta_int;
    r.eta_ext = p.eta_ext;
    r.osc_omega = p.osc_omega;
    r.osc_d = p.osc_d;
    r.osc_n = p.osc_n;
    r.eta2.resize(n);
    double s_int = 0, s_ext = 0, s_om = 0, s_d = 0, s_n = 0, s = 0;
    for (std::size_t i = 0; i < n; ++i) {
        r.element.push_back(static_cast<int>(i));
        const double a = p.eta_int[i] * p.eta_int[i], b = p.eta_ext[i] * p.eta_ext[i];
        const double c = p.osc_omega[i] * p.osc_omega[i], d = p.osc_d[i] * p.osc_d[i];
        const double e = p.osc_n[i] * p.osc_n[i];
        r.eta2[i] = a + b + c + d + e;
        s_int += a;
        s_ext += b;
        s_om += c;
        s_d += d;
        s_n += e;
        s += r.eta2[i];
    }
    r.total = std::sqrt(s);
    r.t_int = std::sqrt(s_int);
    r.t_ext = std::sqrt(s_ext);
    r.t_osc_omega = std::sqrt(s_om);
    r.t_osc_d = std::sqrt(s_d);
    r.t_osc_n = std::sqrt(s_n);
    r.c_mon = p.c_mon;
    r.c_n = p.c_n;
    r.c_d = 1.0;
    r.c_ps_ratio = 1.0;
    const double im = 1.0 / std::sqrt(p.c_mon);
    r.c_rel = std::sqrt(5.0) * std::max({im, r.c_ps_ratio, r.c_d, im / kPi, r.c_n * im});
    r.bound = p.bound;
    return r;
}

void write_report_csv(const EstimatorReport& r, std::ostream& os) {
    std::ostringstream s;
    s << std::setprecision(10) << std::scientific;
    s << "element,region,eta_int,eta_ext,osc_omega,osc_d,osc_n\n";
    for (std::size_t i = 0; i < r.eta2.size(); ++i) {
        s << r.element[i] << ',' << (r.region.empty() || r.region[i] == Region::Interior ? "interior" : "strip") << ','
          << r.eta_int[i] << ',' << r.eta_ext[i] << ',' << r.osc_omega[i] << ',' << r.osc_d[i] << ',' << r.osc_n[i]
          << '\n';
    }
    s << "total," << to_string(r.variant) << ',' << r.t_int << ',' << r.t_ext << ',' << r.t_osc_omega << ','
      << r.t_osc_d << ',' << r.t_osc_n << '\n';
    os << s.str();
}

double EnergyError::total() const { return std::sqrt(std::max(0.0, interior + exterior)); }

EnergyError energy_error(const TransmissionProblem& problem, const Mesh2D& mesh, const BoundaryMesh& bmesh,
                         const CoupledSolution& sol, const ErrorQuadrature& q) {
    const ExactSolution& ex = require_exact(problem);
    const QuadRule regular = gauss_rule(q.triangle_order, Element::Triangle);
    const QuadRule duffy = duffy_rule(q.duffy_points);
    EnergyError e;
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const Vec2 gl = p1_gradient(mesh, t, sol.u);
        const Vec2 al = problem.diffusion.apply(gl);
        auto [rule, first] = element_rule(mesh, t, ex.singular_point, regular, duffy);
        const TriMap m = tri_map(mesh, t, first);
        for (std::size_t k = 0; k < rule.size(); ++k) {
            const Vec2 g = ex.grad_u(m(rule.points[k]));
            e.interior += rule.weights[k] * m.jac * (problem.diffusion.apply(g) - al).dot(g - gl);
        }
    }
    const TraceSamples s = trace_samples(problem, bmesh, sol, q);
    for (std::size_t p = 0; p < s.x.size(); ++p) {
        const double e0 = ex.u_ext(s.x[p]) - s.g0[p];
        const double e1 = ex.grad_u_ext(s.x[p]).dot(s.n[p]) - s.g1[p];
        e.exterior -= s.w[p] * e1 * e0;
    }
    return e;
}

double error_identity_rhs(const TransmissionProblem& problem, const Mesh2D& mesh, const BoundaryMesh& bmesh,
                          const CoupledSolution& sol, bool shift, const ErrorQuadrature& q) {
    const ExactSolution& ex = require_exact(problem);
    const QuadRule regular = gauss_rule(q.triangle_order, Element::Triangle);
    const QuadRule duffy = duffy_rule(q.duffy_points);
    const int nt = static_cast<int>(mesh.triangles.size());

    // Mean shift c = <u - u_l, 1> / |Omega|.
    double c = 0.0;
    if (shift) {
        double area = 0.0, integral = 0.0;
        for (int t = 0; t < nt; ++t) {
            auto [rule, first] = element_rule(mesh, t, ex.singular_point, regular, duffy);
            const TriMap m = tri_map(mesh, t, first);
            for (std::size_t k = 0; k < rule.size(); ++k) {
                const Vec2& xi = rule.points[k];
                integral += rule.weights[k] * m.jac * (ex.u(m(xi)) - m.p1(mesh, t, sol.u, xi));
            }
            area += triangle_area(mesh, t);
        }
        c = integral / area;
    }

    double rhs = 0.0;
    for (int t = 0; t < nt; ++t) {
        const Vec2 gl = p1_gradient(mesh, t, sol.u);
        const Vec2 al = problem.diffusion.apply(gl);
        auto [rule, first] = element_rule(mesh, t, ex.singular_point, regular, duffy);
        const TriMap m = tri_map(mesh, t, first);
        for (std::size_t k = 0; k < rule.size(); ++k) {
            const Vec2& xi = rule.points[k];
            const Vec2 x = m(xi);
            const double e = ex.u(x) - m.p1(mesh, t, sol.u, xi) - c;
            const Vec2 de = ex.grad_u(x) - gl;
            rhs += rule.weights[k] * m.jac * (problem.f(x) * e - al.dot(de));
        }
    }
    const TraceSamples s = trace_samples(problem, bmesh, sol, q);
    for (std::size_t p = 0; p < s.x.size(); ++p) {
        const double e = ex.u(s.x[p]) - s.u_l[p] - c;
        const double psi = ex.grad_u_ext(s.x[p]).dot(s.n[p]) - s.g1[p];
        // (K - 1/2) 1 = -1, so the shifted trace changes G by -c.
        rhs += s.w[p] * (s.phi_res[p] * e + psi * (s.g_res[p] - c));
    }
    return rhs;
}

}  // namespace fembem
