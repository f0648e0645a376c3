#include "fembem/adaptivity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "fembem/errors.hpp"

namespace fembem {

namespace {

constexpr double kPi = 3.14159265358979323846;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<int> sorted_order(const std::vector<double>& eta2) {
    std::vector<int> idx(eta2.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return eta2[a] > eta2[b]; });
    return idx;
}

double sum_sq(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

std::vector<int> inverse_map(const std::vector<int>& map, std::size_t n) {
    std::vector<int> inv(n, -1);
    for (std::size_t i = 0; i < map.size(); ++i) inv[map[i]] = static_cast<int>(i);
    return inv;
}

// Gamma flags and J G on the region mesh used for the potential.
struct PotentialInput {
    const Mesh2D* mesh = nullptr;
    MeshTopology topo;
    std::vector<char> gamma_edge, gamma_vertex;
    Vec jg;
    std::vector<int> to_full;  // region triangle -> full triangle
};

}  // namespace

std::vector<int> dorfler_mark(const std::vector<double>& eta2, double theta) {
    if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("dorfler_mark: theta must lie in (0,1]");
    for (double v : eta2)
        if (!(v >= 0.0)) throw ConfigError("dorfler_mark: indicators must be nonnegative");
    const std::vector<int> order = sorted_order(eta2);
    double total = 0.0;
    for (int i : order) total += eta2[i];
    std::vector<int> marked;
    if (!(total > 0.0)) return marked;
    const double goal = theta * total;
    double acc = 0.0;
    for (int i : order) {
        if (acc >= goal) break;
        marked.push_back(i);
        acc += eta2[i];
    }
    return marked;
}

bool dorfler_minimal(const std::vector<double>& eta2, const std::vector<int>& marked, double theta) {
    const std::vector<int> order = sorted_order(eta2);
    double total = 0.0;
    for (int i : order) total += eta2[i];
    if (!(total > 0.0)) return marked.empty();
    if (marked.empty()) return false;
    double acc = 0.0, smallest = INFINITY;
    for (int i : marked) {
        acc += eta2[i];
        smallest = std::min(smallest, eta2[i]);
    }
    return acc >= theta * total && acc - smallest < theta * total;
}

std::vector<int> strip_marking_filter(const std::vector<int>& marked, const Mesh2D& mesh) {
    std::vector<int> out;
    for (int t : marked)
        if (t >= 0 && t < static_cast<int>(mesh.triangles.size())) out.push_back(t);
    return out;
}

void validate(const AdaptiveConfig& c) {
    if (!(c.theta > 0.0 && c.theta <= 1.0)) throw ConfigError("theta must lie in (0,1]");
    if (c.k < 1) throw ConfigError("patch size k must be >= 1");
    if (!(c.eps >= 0.0)) throw ConfigError("eps must be nonnegative");
    if (c.max_elements < 1) throw ConfigError("max-elements must be positive");
    if (c.max_steps < 1) throw ConfigError("max-steps must be positive");
}

StepResult run_step(const TransmissionProblem& problem, const Mesh2D& mesh, const AdaptiveConfig& config,
                    const std::optional<Vec>& initial_guess) {
    const bool strip = config.variant == Variant::Strip;
    if (strip && mesh.count(Region::Strip) == 0) throw ConfigError("strip variant needs a mesh with strip triangles");
    if (!strip && mesh.count(Region::Strip) != 0) throw ConfigError("interior variant needs a mesh of Omega only");

    StepResult r;
    auto t0 = Clock::now();
    r.interior = submesh(mesh, Region::Interior);
    const Mesh2D& im = r.interior.mesh;
    r.data = prepare_coupling(problem, im);
    SolverOptions opt;
    opt.method = config.nonlinear;
    if (initial_guess && !problem.diffusion.linear) {
        if (initial_guess->size() != static_cast<Eigen::Index>(mesh.vertices.size()))
            throw ConfigError("run_step: initial guess does not match the mesh");
        Vec u(static_cast<Eigen::Index>(im.vertices.size()));
        for (std::size_t i = 0; i < r.interior.vertex_map.size(); ++i) u(i) = (*initial_guess)(r.interior.vertex_map[i]);
        opt.initial = u;
    }
    r.solution = solve_coupling(problem, im, r.data, config.coupling, opt);
    r.t_solve = seconds_since(t0);

    t0 = Clock::now();
    const BoundaryMesh& bm = r.data.bmesh;
    const int nb = static_cast<int>(bm.size());
    const MeshTopology itopo = build_topology(im);
    r.residuals = compute_residuals(problem, im, r.data, r.solution);
    r.flux = equilibrated_flux(problem, im, itopo, r.data, r.solution, r.residuals,
                               config.coupling == CouplingKind::Symmetric);
    const FacetOscillation fo = facet_oscillations(bm, r.residuals);
    const std::vector<double> osc_om = oscillation_omega(im, problem.f, r.flux.mean_f);
    const std::vector<double> cn = trace_constants(im, bm);

    // Region mesh for the potential.
    const MeshTopology ftopo = build_topology(mesh);
    SubMesh strip_mesh;
    PotentialInput pin;
    if (strip) {
        strip_mesh = submesh(mesh, Region::Strip);
        pin.mesh = &strip_mesh.mesh;
        pin.to_full = strip_mesh.triangle_map;
    } else {
        pin.mesh = &im;
        pin.to_full = r.interior.triangle_map;
    }
    const Mesh2D& pm = *pin.mesh;
    pin.topo = build_topology(pm);
    const int pnv = static_cast<int>(pm.vertices.size());
    pin.gamma_edge.assign(pin.topo.edges.size(), 0);
    pin.gamma_vertex.assign(pnv, 0);
    const std::vector<int> pmap = strip ? strip_mesh.vertex_map : r.interior.vertex_map;
    for (std::size_t e = 0; e < pin.topo.edges.size(); ++e) {
        bool g;
        if (strip) {
            const int fe = ftopo.find_edge(pmap[pin.topo.edges[e][0]], pmap[pin.topo.edges[e][1]]);
            const auto tt = ftopo.edge_triangles[fe];
            g = tt[1] >= 0 && mesh.region[tt[0]] != mesh.region[tt[1]];
        } else {
            g = pin.topo.is_boundary_edge(static_cast<int>(e));
        }
        if (g) {
            pin.gamma_edge[e] = 1;
            pin.gamma_vertex[pin.topo.edges[e][0]] = 1;
            pin.gamma_vertex[pin.topo.edges[e][1]] = 1;
        }
    }
    const std::vector<int> full_to_p = inverse_map(pmap, mesh.vertices.size());
    pin.jg = Vec::Zero(pnv);
    int matched = 0;
    for (int i = 0; i < nb; ++i) {
        const int fv = r.interior.vertex_map[bm.node_vertex[i]];
        const int pv = full_to_p[fv];
        const int pv2 = full_to_p[r.interior.vertex_map[bm.node_vertex[bm.next(i)]]];
        if (pv < 0 || pv2 < 0 || !pin.gamma_vertex[pv]) throw GeometryError("strip trace mesh does not match Gamma");
        const int pe = pin.topo.find_edge(pv, pv2);
        if (pe < 0 || !pin.gamma_edge[pe]) throw GeometryError("strip trace mesh does not match Gamma");
        pin.jg(pv) = r.residuals.jg(i);
        ++matched;
    }
    const int ngamma = static_cast<int>(std::count(pin.gamma_edge.begin(), pin.gamma_edge.end(), 1));
    if (matched != ngamma) throw GeometryError("strip trace mesh has extra Gamma edges");
    r.potential = aux_potential(pm, pin.topo, pin.gamma_edge, pin.gamma_vertex, pin.jg, config.k);

    // Indicators on the full mesh.
    const int nt = static_cast<int>(mesh.triangles.size());
    EstimatorParts parts;
    parts.eta_int.assign(nt, 0.0);
    parts.eta_ext.assign(nt, 0.0);
    parts.osc_omega.assign(nt, 0.0);
    parts.osc_d.assign(nt, 0.0);
    parts.osc_n.assign(nt, 0.0);
    parts.region = mesh.region;
    for (std::size_t i = 0; i < im.triangles.size(); ++i) {
        const int T = r.interior.triangle_map[i];
        parts.eta_int[T] = r.flux.eta_int[i];
        parts.osc_omega[T] = osc_om[i];
    }
    for (std::size_t i = 0; i < pm.triangles.size(); ++i) parts.eta_ext[pin.to_full[i]] = r.potential.eta_ext[i];
    std::vector<double> sd(nt, 0.0), sn(nt, 0.0);
    double bd = 0.0, bn = 0.0;
    for (int F = 0; F < nb; ++F) {
        const double d2 = fo.dirichlet[F] * fo.dirichlet[F], n2 = fo.neumann[F] * fo.neumann[F];
        const double hF = bm.length(F);
        bd += hF * d2;
        bn += cn[F] * cn[F] * hF * n2;
        const int T = r.interior.triangle_map[bm.parent[F]];
        sd[T] += d2;
        sn[T] += n2;
        if (strip) {
            const int fe = ftopo.find_edge(r.interior.vertex_map[bm.node_vertex[F]],
                                           r.interior.vertex_map[bm.node_vertex[bm.next(F)]]);
            const auto tt = ftopo.edge_triangles[fe];
            const int S = tt[0] == T ? tt[1] : tt[0];
            if (S < 0) throw GeometryError("Gamma facet without strip neighbour");
            sd[S] += d2;
            sn[S] += n2;
        }
    }
    const double factor = strip ? 0.5 : 1.0;
    for (int T = 0; T < nt; ++T) {
        if (sd[T] == 0.0 && sn[T] == 0.0) continue;
        const double sh = std::sqrt(triangle_diameter(mesh, T));
        parts.osc_d[T] = factor * sh * std::sqrt(sd[T]);
        parts.osc_n[T] = factor * sh * std::sqrt(sn[T]);
    }
    parts.c_mon = problem.diffusion.c_mon;
    parts.c_n = cn.empty() ? 0.0 : *std::max_element(cn.begin(), cn.end());

    const double im_ = 1.0 / std::sqrt(problem.diffusion.c_mon);
    const double rest = std::sqrt(sum_sq(r.potential.eta_ext)) + std::sqrt(bd) + im_ / kPi * std::sqrt(sum_sq(osc_om)) +
                        im_ * std::sqrt(bn);
    r.bound = im_ * std::sqrt(sum_sq(r.flux.eta_int)) + rest;
    r.bound_linear = r.flux.eta_int_a.empty() ? r.bound : std::sqrt(sum_sq(r.flux.eta_int_a)) + rest;
    parts.bound = r.bound;
    r.report = total_estimator(parts, config.variant);
    r.t_estimate = seconds_since(t0);

    if (config.compute_error && problem.exact) {
        t0 = Clock::now();
        r.error = energy_error(problem, im, bm, r.solution, config.error_quadrature);
        r.t_error = seconds_since(t0);
    }
    return r;
}

namespace {

StepRecord make_record(int level, const Mesh2D& mesh, const StepResult& r) {
    StepRecord s;
    s.level = level;
    s.n_interior = static_cast<int>(r.interior.mesh.triangles.size());
    s.n_total = static_cast<int>(mesh.triangles.size());
    s.n_boundary = static_cast<int>(r.data.bmesh.size());
    s.eta = r.report.total;
    s.eta_int = r.report.t_int;
    s.eta_ext = r.report.t_ext;
    s.osc_omega = r.report.t_osc_omega;
    s.osc_d = r.report.t_osc_d;
    s.osc_n = r.report.t_osc_n;
    s.c_rel = r.report.c_rel;
    s.c_n = r.report.c_n;
    s.bound = r.bound;
    s.bound_linear = r.bound_linear;
    if (r.error) {
        s.error = r.error->total();
        s.error_int = std::sqrt(std::max(0.0, r.error->interior));
        s.error_ext = std::sqrt(std::max(0.0, r.error->exterior));
    }
    s.iterations = r.solution.iterations;
    s.residual = r.solution.residual;
    s.div_deviation = r.flux.check.divergence_deviation;
    s.trace_deviation = r.flux.check.trace_deviation;
    s.compatibility = r.flux.check.compatibility;
    s.potential_trace = r.potential.trace_error;
    s.potential_residual = r.potential.interior_residual;
    s.xi_partition = r.potential.partition_error;
    s.shape_regularity = shape_regularity(mesh);
    s.t_solve = r.t_solve;
    s.t_estimate = r.t_estimate;
    s.t_error = r.t_error;
    return s;
}

void write_outputs(const AdaptiveConfig& config, const ConvergenceHistory& h) {
    if (config.output_dir.empty()) return;
    std::filesystem::create_directories(config.output_dir);
    std::ofstream hist(std::filesystem::path(config.output_dir) / "history.csv");
    write_history_csv(h, hist);
    std::ofstream tim(std::filesystem::path(config.output_dir) / "timings.csv");
    write_timings_csv(h, tim);
}

}  // namespace

ConvergenceHistory run_algorithm(const AdaptiveConfig& config, const TransmissionProblem& problem,
                                 const Mesh2D& initial_mesh) {
    validate(config);
    check_conforming(initial_mesh);
    ConvergenceHistory h;
    Mesh2D mesh = initial_mesh;
    std::optional<Vec> guess;
    if (!config.output_dir.empty()) std::filesystem::create_directories(config.output_dir);
    auto fail = [&](const std::string& what) {
        h.final_mesh = mesh;
        h.stop_reason = "error: " + what;
        write_outputs(config, h);
        return AdaptiveError(what, h);
    };

    for (int level = 0;; ++level) {
        StepResult r;
        try {
            r = run_step(problem, mesh, config, guess);
        } catch (const Error& e) {
            throw fail(e.what());
        }
        StepRecord rec = make_record(level, mesh, r);
        for (const auto& w : r.solution.warnings)
            if (std::find(h.warnings.begin(), h.warnings.end(), w) == h.warnings.end()) h.warnings.push_back(w);
        if (!config.output_dir.empty()) {
            const std::filesystem::path dir(config.output_dir);
            if (config.write_indicators) {
                std::ofstream os(dir / ("indicators_" + std::to_string(level) + ".csv"));
                write_report_csv(r.report, os);
            }
            if (config.dump_meshes) {
                std::ofstream os(dir / ("mesh_" + std::to_string(level) + ".txt"));
                write_mesh(mesh, os);
            }
        }

        std::string stop;
        if (rec.eta < config.eps) stop = "tolerance reached";
        else if (level + 1 >= config.max_steps) stop = "step limit";

        std::vector<int> marked;
        if (stop.empty()) {
            marked = dorfler_mark(r.report.eta2, config.theta);
            if (config.variant == Variant::Strip) marked = strip_marking_filter(marked, mesh);
            rec.marked = static_cast<int>(marked.size());
            rec.dorfler_minimal = dorfler_minimal(r.report.eta2, marked, config.theta);
            if (!rec.dorfler_minimal) {
                h.steps.push_back(rec);
                throw fail("Doerfler marking is not minimal");
            }
            if (marked.empty()) stop = "all indicators vanish";
        }
        if (!stop.empty()) {
            h.steps.push_back(rec);
            h.stop_reason = stop;
            break;
        }

        auto t0 = Clock::now();
        Mesh2D next;
        try {
            next = refine_nvb(mesh, marked);
            check_conforming(next);
        } catch (const Error& e) {
            h.steps.push_back(rec);
            throw fail(e.what());
        }
        rec.t_refine = seconds_since(t0);
        h.steps.push_back(rec);
        if (static_cast<int>(next.count(Region::Interior)) > config.max_elements) {
            h.stop_reason = "element cap";
            break;
        }
        if (!problem.diffusion.linear) {
            Vec full = Vec::Zero(static_cast<Eigen::Index>(mesh.vertices.size()));
            for (std::size_t i = 0; i < r.interior.vertex_map.size(); ++i)
                full(r.interior.vertex_map[i]) = r.solution.u(static_cast<Eigen::Index>(i));
            guess = prolongate(next, full);
        }
        mesh = std::move(next);
    }
    h.final_mesh = mesh;
    write_outputs(config, h);
    return h;
}

void write_history_csv(const ConvergenceHistory& h, std::ostream& os) {
    std::ostringstream s;
    s << std::setprecision(10) << std::scientific;
    s << "level,n_interior,n_total,n_boundary,eta,eta_int,eta_ext,osc_omega,osc_d,osc_n,c_rel,c_n,bound,"
         "bound_linear,error,error_int,error_ext,effectivity,iterations,residual,div_deviation,trace_deviation,"
         "compatibility,potential_trace,xi_partition,shape_regularity,marked,dorfler_minimal\n";
    for (const StepRecord& r : h.steps) {
        s << r.level << ',' << r.n_interior << ',' << r.n_total << ',' << r.n_boundary << ',' << r.eta << ','
          << r.eta_int << ',' << r.eta_ext << ',' << r.osc_omega << ',' << r.osc_d << ',' << r.osc_n << ','
          << r.c_rel << ',' << r.c_n << ',' << r.bound << ',' << r.bound_linear << ',' << r.error << ','
          << r.error_int << ',' << r.error_ext << ',' << r.effectivity() << ',' << r.iterations << ','
          << r.residual << ',' << r.div_deviation << ',' << r.trace_deviation << ',' << r.compatibility << ','
          << r.potential_trace << ',' << r.xi_partition << ',' << r.shape_regularity << ',' << r.marked << ','
          << (r.dorfler_minimal ? 1 : 0) << '\n';
    }
    os << s.str();
}

void write_timings_csv(const ConvergenceHistory& h, std::ostream& os) {
    std::ostringstream s;
    s << std::setprecision(6) << std::fixed;
    s << "level,n_interior,t_solve,t_estimate,t_error,t_refine\n";
    for (const StepRecord& r : h.steps)
        s << r.level << ',' << r.n_interior << ',' << r.t_solve << ',' << r.t_estimate << ',' << r.t_error << ','
          << r.t_refine << '\n';
    os << s.str();
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y, double span) {
    if (x.size() != y.size() || x.empty()) throw ConfigError("loglog_slope: bad input");
    const double xmax = *std::max_element(x.begin(), x.end());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < xmax / span || !(y[i] > 0.0)) continue;
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    const double den = n * sxx - sx * sx;
    if (n < 2 || !(std::abs(den) > 0.0)) throw ConfigError("loglog_slope: fewer than two usable points");
    return (n * sxy - sx * sy) / den;
}

}  // namespace fembem
