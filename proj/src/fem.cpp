#include "fembem/fem.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "fembem/errors.hpp"

namespace fembem {

namespace {

using Grad3 = Eigen::Matrix<double, 2, 3>;

Vec2 rot(const Vec2& v) { return Vec2(-v.y(), v.x()); }

Vec2 ref_to_world(const Mesh2D& mesh, int t, const Vec2& xi) {
    const auto& T = mesh.triangles[t];
    const Vec2& a = mesh.vertices[T[0]];
    return a + xi.x() * (mesh.vertices[T[1]] - a) + xi.y() * (mesh.vertices[T[2]] - a);
}

Eigen::Vector3d ref_lambda(const Vec2& xi) { return Eigen::Vector3d(1.0 - xi.x() - xi.y(), xi.x(), xi.y()); }

int local_index(const std::array<int, 3>& T, int v) {
    for (int i = 0; i < 3; ++i)
        if (T[i] == v) return i;
    return -1;
}

void require_area(const Mesh2D& mesh, int t) {
    if (!(triangle_area(mesh, t) > 0.0))
        throw StructuralError("degenerate triangle " + std::to_string(t) + " in assembly");
}

}  // namespace

DiffusionOp DiffusionOp::constant(const Mat2& A, double c_mon, double c_lip) {
    DiffusionOp d;
    d.linear = true;
    d.matrix = A;
    d.c_mon = c_mon;
    d.c_lip = c_lip;
    return d;
}

DiffusionOp DiffusionOp::radial(std::function<double(double)> mu, std::function<double(double)> dmu, double c_mon,
                                double c_lip) {
    DiffusionOp d;
    d.linear = false;
    d.mu = std::move(mu);
    d.dmu = std::move(dmu);
    d.c_mon = c_mon;
    d.c_lip = c_lip;
    return d;
}

Vec2 DiffusionOp::apply(const Vec2& g) const {
    if (linear) return matrix * g;
    return mu(g.norm()) * g;
}

Mat2 DiffusionOp::jacobian(const Vec2& g) const {
    if (linear) return matrix;
    double t = g.norm();
    Mat2 J = mu(t) * Mat2::Identity();
    // d/dg [mu(|g|) g] = mu I + mu'(|g|) g g^T / |g|
    if (t > 0.0) J += dmu(t) / t * g * g.transpose();
    return J;
}

Mat2 DiffusionOp::frozen(const Vec2& g) const {
    if (linear) return matrix;
    return mu(g.norm()) * Mat2::Identity();
}

int num_dofs(const Mesh2D& mesh, const MeshTopology& topo, int degree) {
    if (degree == 1) return static_cast<int>(mesh.vertices.size());
    if (degree == 2) return static_cast<int>(mesh.vertices.size() + topo.edges.size());
    throw ConfigError("unsupported Lagrange degree " + std::to_string(degree));
}

std::array<int, 6> element_dofs(const Mesh2D& mesh, const MeshTopology& topo, int t, int degree) {
    const auto& T = mesh.triangles[t];
    std::array<int, 6> d{T[0], T[1], T[2], -1, -1, -1};
    if (degree == 2) {
        const int nv = static_cast<int>(mesh.vertices.size());
        for (int i = 0; i < 3; ++i) d[3 + i] = nv + topo.triangle_edges[t][i];
    }
    return d;
}

Eigen::Matrix<double, 6, 1> local_basis_values(const Eigen::Vector3d& l, int degree) {
    Eigen::Matrix<double, 6, 1> v = Eigen::Matrix<double, 6, 1>::Zero();
    if (degree == 1) {
        v.head<3>() = l;
        return v;
    }
    for (int i = 0; i < 3; ++i) {
        v(i) = l(i) * (2.0 * l(i) - 1.0);
        v(3 + i) = 4.0 * l((i + 1) % 3) * l((i + 2) % 3);
    }
    return v;
}

Eigen::Matrix<double, 2, 6> local_basis_gradients(const Grad3& G, const Eigen::Vector3d& l, int degree) {
    Eigen::Matrix<double, 2, 6> g = Eigen::Matrix<double, 2, 6>::Zero();
    if (degree == 1) {
        g.leftCols<3>() = G;
        return g;
    }
    for (int i = 0; i < 3; ++i) {
        int a = (i + 1) % 3, b = (i + 2) % 3;
        g.col(i) = (4.0 * l(i) - 1.0) * G.col(i);
        g.col(3 + i) = 4.0 * (l(a) * G.col(b) + l(b) * G.col(a));
    }
    return g;
}

Mat element_stiffness(const Mesh2D& mesh, int t, int degree, const Mat2& C) {
    require_area(mesh, t);
    const double area = triangle_area(mesh, t);
    const Grad3 G = barycentric_gradients(mesh, t);
    if (degree == 1) return area * G.transpose() * C * G;
    const int n = 6;
    Mat K = Mat::Zero(n, n);
    QuadRule rule = gauss_rule(2, Element::Triangle);
    for (std::size_t q = 0; q < rule.size(); ++q) {
        auto B = local_basis_gradients(G, ref_lambda(rule.points[q]), 2);
        K += (2.0 * area * rule.weights[q]) * B.transpose() * C * B;
    }
    return K;
}

SpMat assemble_stiffness(const Mesh2D& mesh, int degree, const DiffusionOp& diffusion, const FemFunction* lin) {
    return assemble_stiffness(mesh, build_topology(mesh), degree, diffusion, lin);
}

SpMat assemble_stiffness(const Mesh2D& mesh, const MeshTopology& topo, int degree, const DiffusionOp& diffusion,
                         const FemFunction* lin) {
    if (!diffusion.linear && lin == nullptr)
        throw ConfigError("assemble_stiffness: nonlinear diffusion needs a linearization point");
    if (lin && lin->values.size() != static_cast<Eigen::Index>(mesh.vertices.size()))
        throw ConfigError("assemble_stiffness: linearization point must be P1 on the mesh");
    const int n = num_dofs(mesh, topo, degree);
    const int nloc = degree == 1 ? 3 : 6;
    std::vector<Triplet> trip;
    trip.reserve(mesh.triangles.size() * nloc * nloc);
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        Mat2 C = diffusion.linear ? diffusion.matrix : diffusion.frozen(p1_gradient(mesh, t, lin->values));
        Mat Ke = element_stiffness(mesh, t, degree, C);
        auto d = element_dofs(mesh, topo, t, degree);
        for (int i = 0; i < nloc; ++i)
            for (int j = 0; j < nloc; ++j) trip.emplace_back(d[i], d[j], Ke(i, j));
    }
    SpMat A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

std::vector<std::array<double, 3>> element_loads(const Mesh2D& mesh, const ScalarField& f) {
    QuadRule rule = gauss_rule(4, Element::Triangle);
    std::vector<std::array<double, 3>> out(mesh.triangles.size());
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const double area = triangle_area(mesh, t);
        std::array<double, 3> v{0.0, 0.0, 0.0};
        for (std::size_t q = 0; q < rule.size(); ++q) {
            double w = 2.0 * area * rule.weights[q] * f(ref_to_world(mesh, t, rule.points[q]));
            Eigen::Vector3d l = ref_lambda(rule.points[q]);
            for (int i = 0; i < 3; ++i) v[i] += w * l(i);
        }
        out[t] = v;
    }
    return out;
}

Vec assemble_load(const Mesh2D& mesh, const std::vector<std::array<double, 3>>& loads) {
    Vec b = Vec::Zero(static_cast<Eigen::Index>(mesh.vertices.size()));
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
        for (int i = 0; i < 3; ++i) b(mesh.triangles[t][i]) += loads[t][i];
    return b;
}

Vec assemble_load(const Mesh2D& mesh, int degree, const ScalarField& f) {
    if (degree == 1) return assemble_load(mesh, element_loads(mesh, f));
    MeshTopology topo = build_topology(mesh);
    Vec b = Vec::Zero(num_dofs(mesh, topo, degree));
    QuadRule rule = gauss_rule(4, Element::Triangle);
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const double area = triangle_area(mesh, t);
        auto d = element_dofs(mesh, topo, t, degree);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            double w = 2.0 * area * rule.weights[q] * f(ref_to_world(mesh, t, rule.points[q]));
            auto phi = local_basis_values(ref_lambda(rule.points[q]), degree);
            for (int i = 0; i < 6; ++i) b(d[i]) += w * phi(i);
        }
    }
    return b;
}

Vec2 p1_gradient(const Mesh2D& mesh, int t, const Vec& u) {
    const auto& T = mesh.triangles[t];
    return barycentric_gradients(mesh, t) * Eigen::Vector3d(u(T[0]), u(T[1]), u(T[2]));
}

Vec assemble_operator(const Mesh2D& mesh, const DiffusionOp& diffusion, const Vec& u) {
    Vec r = Vec::Zero(u.size());
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        Grad3 G = barycentric_gradients(mesh, t);
        Vec2 flux = diffusion.apply(G * Eigen::Vector3d(u(mesh.triangles[t][0]), u(mesh.triangles[t][1]),
                                                        u(mesh.triangles[t][2])));
        Eigen::Vector3d loc = triangle_area(mesh, t) * G.transpose() * flux;
        for (int i = 0; i < 3; ++i) r(mesh.triangles[t][i]) += loc(i);
    }
    return r;
}

SpMat assemble_jacobian(const Mesh2D& mesh, const DiffusionOp& diffusion, const Vec& u) {
    std::vector<Triplet> trip;
    trip.reserve(mesh.triangles.size() * 9);
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        Grad3 G = barycentric_gradients(mesh, t);
        Mat2 J = diffusion.jacobian(p1_gradient(mesh, t, u));
        Eigen::Matrix3d Ke = triangle_area(mesh, t) * G.transpose() * J * G;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) trip.emplace_back(mesh.triangles[t][i], mesh.triangles[t][j], Ke(i, j));
    }
    SpMat A(u.size(), u.size());
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

// ---------------------------------------------------------------------------- BDM1

Eigen::Matrix<double, 6, 6> BdmElement::mass() const {
    Eigen::Matrix<double, 6, 6> M;
    for (int k = 0; k < 6; ++k)
        for (int l = 0; l < 6; ++l)
            M(k, l) = area * (vertex[k] == vertex[l] ? 2.0 : 1.0) / 12.0 * dir[k].dot(dir[l]);
    return M;
}

BdmElement bdm_element(const Mesh2D& mesh, const MeshTopology& topo, int t) {
    require_area(mesh, t);
    BdmElement el;
    el.area = triangle_area(mesh, t);
    el.grad_lambda = barycentric_gradients(mesh, t);
    const auto& T = mesh.triangles[t];
    for (int i = 0; i < 3; ++i) {
        int e = topo.triangle_edges[t][i];
        const Edge& E = topo.edges[e];
        Vec2 tan = (mesh.vertices[E[1]] - mesh.vertices[E[0]]).normalized();
        Vec2 n(tan.y(), -tan.x());
        for (int s = 0; s < 2; ++s) {
            int k = 2 * i + s;
            int j = local_index(T, E[s]);
            int l = local_index(T, E[1 - s]);
            Vec2 r = rot(el.grad_lambda.col(l));
            el.edge[k] = e;
            el.endpoint[k] = s;
            el.vertex[k] = j;
            el.dir[k] = r / r.dot(n);
            el.div[k] = el.grad_lambda.col(j).dot(el.dir[k]);
        }
    }
    return el;
}

Vec2 bdm_eval(const BdmElement& el, const BdmField& field, const Eigen::Vector3d& lambda) {
    Vec2 v = Vec2::Zero();
    for (int k = 0; k < 6; ++k) v += field.coeffs(el.edge[k], el.endpoint[k]) * lambda(el.vertex[k]) * el.dir[k];
    return v;
}

double bdm_divergence(const BdmElement& el, const BdmField& field) {
    double d = 0.0;
    for (int k = 0; k < 6; ++k) d += field.coeffs(el.edge[k], el.endpoint[k]) * el.div[k];
    return d;
}

int boundary_edge_sign(const Mesh2D& mesh, const MeshTopology& topo, int e) {
    const Edge& E = topo.edges[e];
    int t = topo.edge_triangles[e][0];
    int c = -1;
    for (int v : mesh.triangles[t])
        if (v != E[0] && v != E[1]) c = v;
    Vec2 tan = mesh.vertices[E[1]] - mesh.vertices[E[0]];
    Vec2 n(tan.y(), -tan.x());
    return n.dot(mesh.vertices[c] - mesh.vertices[E[0]]) < 0.0 ? 1 : -1;
}

LocalFlux local_equilibrated_flux(const Mesh2D& mesh, const MeshTopology& topo, int z, const Vec& u,
                                  const DiffusionOp& diffusion, const std::vector<std::array<double, 3>>& loads,
                                  const std::vector<FacetMoment>& moments) {
    LocalFlux out;
    out.vertex = z;
    out.triangles = topo.vertex_triangles[z];
    std::sort(out.triangles.begin(), out.triangles.end());
    const int nt = static_cast<int>(out.triangles.size());

    // Patch edges: free ones (interior, containing z) and fixed ones with prescribed trace.
    std::vector<int> edges;
    for (int t : out.triangles)
        for (int e : topo.triangle_edges[t]) edges.push_back(e);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    const int ne = static_cast<int>(edges.size());
    std::vector<int> free_index(ne, -1);
    std::vector<double> fixed(ne, 0.0);
    int nfree = 0;
    for (int i = 0; i < ne; ++i) {
        int e = edges[i];
        bool has_z = topo.edges[e][0] == z || topo.edges[e][1] == z;
        if (has_z && !topo.is_boundary_edge(e)) free_index[i] = nfree++;
    }
    for (const FacetMoment& m : moments) {
        auto it = std::lower_bound(edges.begin(), edges.end(), m.edge);
        if (it == edges.end() || *it != m.edge || !topo.is_boundary_edge(m.edge))
            throw EstimatorError("local flux at vertex " + std::to_string(z) + ": moment on a non-patch facet");
        const Edge& E = topo.edges[m.edge];
        double len = (mesh.vertices[E[1]] - mesh.vertices[E[0]]).norm();
        fixed[it - edges.begin()] = boundary_edge_sign(mesh, topo, m.edge) * m.moment / len;
    }
    auto slot = [&](int e) { return static_cast<int>(std::lower_bound(edges.begin(), edges.end(), e) - edges.begin()); };

    const int n = 2 * nfree;
    Mat A = Mat::Zero(n, n), B = Mat::Zero(nt, n);
    Vec f1 = Vec::Zero(n), g = Vec::Zero(nt);
    Mat C(nt, nt);
    Vec areas(nt);
    std::vector<BdmElement> els;
    els.reserve(nt);
    for (int r = 0; r < nt; ++r) {
        const int t = out.triangles[r];
        BdmElement el = bdm_element(mesh, topo, t);
        const int zl = local_index(mesh.triangles[t], z);
        const Vec2 flux = diffusion.apply(p1_gradient(mesh, t, u));
        const auto M = el.mass();
        std::array<int, 6> idx;
        std::array<double, 6> val;
        for (int k = 0; k < 6; ++k) {
            int s = slot(el.edge[k]);
            idx[k] = free_index[s] < 0 ? -1 : 2 * free_index[s] + el.endpoint[k];
            val[k] = free_index[s] < 0 ? fixed[s] : 0.0;
        }
        for (int k = 0; k < 6; ++k) {
            double divk = el.area * el.div[k];
            if (idx[k] < 0) {
                g(r) -= divk * val[k];
                for (int l = 0; l < 6; ++l)
                    if (idx[l] >= 0) f1(idx[l]) -= M(l, k) * val[k];
                continue;
            }
            B(r, idx[k]) += divk;
            f1(idx[k]) += flux.dot(el.dir[k]) * el.area * (el.vertex[k] == zl ? 2.0 : 1.0) / 12.0;
            for (int l = 0; l < 6; ++l)
                if (idx[l] >= 0) A(idx[k], idx[l]) += M(k, l);
        }
        g(r) += el.area * el.grad_lambda.col(zl).dot(flux) - loads[t][zl];
        areas(r) = el.area;
        els.push_back(el);
    }
    // Balanced form: multiplier rows scaled by h = |patch|^(1/2) and the stabilization by
    // kappa = 1/|patch|^2, so all blocks are O(h^2). sigma does not depend on either choice;
    // p is mapped back to the unscaled stabilization below.
    const double omega = areas.sum();
    const double h = std::sqrt(omega), kappa = 1.0 / (omega * omega);
    C = (h * h * kappa) * (areas * areas.transpose());
    SaddleSolution sol;
    try {
        sol = solve_saddle_dense(A, h * B, f1, h * g, C);
    } catch (const SolverError&) {
        throw EstimatorError("local flux problem singular at vertex " + std::to_string(z));
    }
    // p_kappa = h * multiplier; the unscaled one differs by a constant with <p,1> = kappa <p_kappa,1>
    out.p = h * sol.multiplier;
    const double pm = out.p.dot(areas);
    out.p.array() += (kappa - 1.0) * pm / omega;
    out.edges = edges;
    out.coeffs = Mat::Zero(ne, 2);
    for (int i = 0; i < ne; ++i) {
        if (free_index[i] >= 0) {
            out.coeffs(i, 0) = sol.primal(2 * free_index[i]);
            out.coeffs(i, 1) = sol.primal(2 * free_index[i] + 1);
        } else {
            out.coeffs(i, 0) = out.coeffs(i, 1) = fixed[i];
        }
    }
    out.div.resize(nt);
    for (int r = 0; r < nt; ++r) {
        double d = 0.0;
        for (int k = 0; k < 6; ++k) d += out.coeffs(slot(els[r].edge[k]), els[r].endpoint[k]) * els[r].div[k];
        out.div[r] = d;
    }
    return out;
}

namespace {
std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", x);
    return buf;
}
}  // namespace

BdmField sum_local_fluxes(const Mesh2D& mesh, const MeshTopology& topo, const std::vector<LocalFlux>& locals,
                          const std::vector<double>& means_f, const std::vector<int>& gamma_edges,
                          const std::vector<double>& facet_means, bool strict, FluxCheck* check, double tol) {
    const int nt = static_cast<int>(mesh.triangles.size());
    BdmField field;
    field.coeffs = Mat::Zero(static_cast<Eigen::Index>(topo.edges.size()), 2);
    std::vector<double> div_scale(nt, 0.0);
    double pmax = 0.0;
    for (const LocalFlux& lf : locals) {  // fixed order: bit-reproducible
        for (std::size_t i = 0; i < lf.edges.size(); ++i) field.coeffs.row(lf.edges[i]) += lf.coeffs.row(i);
        double pmean = 0.0;
        for (std::size_t r = 0; r < lf.triangles.size(); ++r) {
            div_scale[lf.triangles[r]] += std::abs(lf.div[r]);
            pmean += lf.p(r) * triangle_area(mesh, lf.triangles[r]);
        }
        pmax = std::max(pmax, std::abs(pmean));
    }

    double lo = INFINITY, hi = -INFINITY, scale = 0.0;
    for (int t = 0; t < nt; ++t) {
        double d = bdm_divergence(bdm_element(mesh, topo, t), field) + means_f[t];
        lo = std::min(lo, d);
        hi = std::max(hi, d);
        scale = std::max(scale, div_scale[t] + std::abs(means_f[t]));
    }
    if (!(scale > 0.0)) scale = 1.0;
    FluxCheck c;
    c.divergence_constant = nt > 0 ? 0.5 * (lo + hi) : 0.0;
    c.divergence_deviation = nt > 0 ? 0.5 * (hi - lo) / scale : 0.0;
    c.compatibility = pmax / scale;

    double tscale = 0.0, tdev = 0.0;
    for (std::size_t i = 0; i < gamma_edges.size(); ++i) tscale = std::max(tscale, std::abs(facet_means[i]));
    if (!(tscale > 0.0)) tscale = 1.0;
    for (std::size_t i = 0; i < gamma_edges.size(); ++i) {
        int e = gamma_edges[i];
        int s = boundary_edge_sign(mesh, topo, e);
        for (int j = 0; j < 2; ++j) tdev = std::max(tdev, std::abs(s * field.coeffs(e, j) - facet_means[i]));
    }
    c.trace_deviation = tdev / tscale;
    if (check) *check = c;
    if (c.trace_deviation > tol)
        throw InternalError("equilibrated flux: normal trace differs from Q Phi by " + sci(c.trace_deviation));
    if (strict && c.divergence_deviation > tol)
        throw InternalError("equilibrated flux: div sigma + Qf not constant, deviation " +
                            sci(c.divergence_deviation));
    return field;
}

// ---------------------------------------------------------------------------- potentials

PatchPotential local_patch_potential(const Mesh2D& mesh, const MeshTopology& topo, const Patch& patch,
                                     const std::vector<char>& gamma_edge, const Vec& xi, const Vec& jg, int degree) {
    const int nv = static_cast<int>(mesh.vertices.size());
    const int nloc = degree == 1 ? 3 : 6;
    auto in_patch = [&](int t) { return t >= 0 && std::binary_search(patch.triangles.begin(), patch.triangles.end(), t); };

    PatchPotential out;
    for (int t : patch.triangles) {
        auto d = element_dofs(mesh, topo, t, degree);
        for (int i = 0; i < nloc; ++i) out.dofs.push_back(d[i]);
    }
    std::sort(out.dofs.begin(), out.dofs.end());
    out.dofs.erase(std::unique(out.dofs.begin(), out.dofs.end()), out.dofs.end());
    const int n = static_cast<int>(out.dofs.size());
    auto loc = [&](int dof) { return static_cast<int>(std::lower_bound(out.dofs.begin(), out.dofs.end(), dof) - out.dofs.begin()); };

    // Dirichlet nodes: everything on patch-boundary edges.
    std::vector<char> dir(n, 0), on_gamma(n, 0);
    Vec value = Vec::Zero(n);
    for (int t : patch.triangles) {
        for (int e : topo.triangle_edges[t]) {
            auto et = topo.edge_triangles[e];
            int other = et[0] == t ? et[1] : et[0];
            if (in_patch(other)) continue;
            const Edge& E = topo.edges[e];
            const bool g = gamma_edge[e] != 0;
            int ids[3] = {loc(E[0]), loc(E[1]), degree == 2 ? loc(nv + e) : -1};
            double vals[3] = {xi(E[0]) * jg(E[0]), xi(E[1]) * jg(E[1]),
                              0.25 * (xi(E[0]) + xi(E[1])) * (jg(E[0]) + jg(E[1]))};
            for (int k = 0; k < (degree == 2 ? 3 : 2); ++k) {
                dir[ids[k]] = 1;
                if (g) {
                    on_gamma[ids[k]] = 1;
                    value(ids[k]) = vals[k];
                }
            }
        }
    }

    Mat K = Mat::Zero(n, n);
    for (int t : patch.triangles) {
        Mat Ke = element_stiffness(mesh, t, degree, Mat2::Identity());
        auto d = element_dofs(mesh, topo, t, degree);
        int l[6];
        for (int i = 0; i < nloc; ++i) l[i] = loc(d[i]);
        for (int i = 0; i < nloc; ++i)
            for (int j = 0; j < nloc; ++j) K(l[i], l[j]) += Ke(i, j);
    }
    std::vector<int> fr;
    for (int i = 0; i < n; ++i)
        if (!dir[i]) fr.push_back(i);
    out.values = value;
    if (!fr.empty()) {
        const int m = static_cast<int>(fr.size());
        Mat Kff(m, m);
        Vec rhs = Vec::Zero(m);
        for (int a = 0; a < m; ++a) {
            for (int b = 0; b < m; ++b) Kff(a, b) = K(fr[a], fr[b]);
            for (int j = 0; j < n; ++j)
                if (dir[j]) rhs(a) -= K(fr[a], j) * value(j);
        }
        Eigen::LLT<Mat> llt(Kff);
        if (llt.info() != Eigen::Success) throw EstimatorError("patch potential: singular patch system at vertex " +
                                                               std::to_string(patch.seed));
        Vec x = llt.solve(rhs);
        for (int a = 0; a < m; ++a) out.values(fr[a]) = x(a);
        Vec res = K * out.values;
        for (int a = 0; a < m; ++a) out.interior_residual = std::max(out.interior_residual, std::abs(res(fr[a])));
    }
    return out;
}

std::vector<double> element_gradient_norms(const Mesh2D& mesh, const MeshTopology& topo, const FemFunction& w) {
    const int nloc = w.degree == 1 ? 3 : 6;
    std::vector<double> out(mesh.triangles.size());
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        Mat Ke = element_stiffness(mesh, t, w.degree, Mat2::Identity());
        auto d = element_dofs(mesh, topo, t, w.degree);
        Vec c(nloc);
        for (int i = 0; i < nloc; ++i) c(i) = w.values(d[i]);
        out[t] = std::sqrt(std::max(0.0, c.dot(Ke * c)));
    }
    return out;
}

}  // namespace fembem
