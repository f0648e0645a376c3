#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fembem/coupling.hpp"
#include "fembem/errors.hpp"
#include "fembem/estimator.hpp"
#include "fembem/mesh.hpp"

namespace fembem {

// Sort descending (ties by index) and take the shortest prefix with sum >= theta * total.
// Returns the marked indices in that order; empty if every indicator is zero.
std::vector<int> dorfler_mark(const std::vector<double>& eta2, double theta);
// True if `marked` satisfies the criterion and dropping its smallest entry breaks it.
bool dorfler_minimal(const std::vector<double>& eta2, const std::vector<int>& marked, double theta);

// Strip variant: keep marked triangles that lie in Omega or in the strip. Far-field
// triangles carry zero indicators and are never selected by dorfler_mark anyway.
std::vector<int> strip_marking_filter(const std::vector<int>& marked, const Mesh2D& mesh);

struct AdaptiveConfig {
    double theta = 0.4;
    double eps = 0.0;
    int max_elements = 100000;  // cap on interior triangles
    int max_steps = 200;
    int k = 2;
    CouplingKind coupling = CouplingKind::Symmetric;
    Variant variant = Variant::Interior;
    NonlinearMethod nonlinear = NonlinearMethod::Auto;
    bool compute_error = true;  // only when the problem has an exact solution
    ErrorQuadrature error_quadrature{2, 6, 2, 10, 12};
    std::string output_dir;  // empty: no per-step files
    bool dump_meshes = false;
    bool write_indicators = true;
};
void validate(const AdaptiveConfig& config);

// Everything computed on one mesh.
struct StepResult {
    SubMesh interior;             // Omega part (identity maps for the interior variant)
    CouplingData data;
    CoupledSolution solution;
    BoundaryResiduals residuals;
    FluxResult flux;
    PotentialResult potential;
    EstimatorReport report;       // per triangle of the full mesh
    double bound = 0.0;           // literal functional upper bound
    double bound_linear = 0.0;    // same with the A^-1 norm of the flux term (linear A, else = bound)
    std::optional<EnergyError> error;
    double t_solve = 0.0, t_estimate = 0.0, t_error = 0.0;
};

// Runs solve + estimate on `mesh` (Omega only for the interior variant, Omega + strip otherwise).
StepResult run_step(const TransmissionProblem& problem, const Mesh2D& mesh, const AdaptiveConfig& config,
                    const std::optional<Vec>& initial_guess = std::nullopt);

struct StepRecord {
    int level = 0;
    int n_interior = 0, n_total = 0, n_boundary = 0;
    double eta = 0, eta_int = 0, eta_ext = 0, osc_omega = 0, osc_d = 0, osc_n = 0;
    double c_rel = 0, c_n = 0, bound = 0, bound_linear = 0;
    double error = std::numeric_limits<double>::quiet_NaN();
    double error_int = std::numeric_limits<double>::quiet_NaN();
    double error_ext = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    double residual = 0;
    double div_deviation = 0, trace_deviation = 0, compatibility = 0;
    double potential_trace = 0, potential_residual = 0, xi_partition = 0;
    double shape_regularity = 0;
    int marked = 0;
    bool dorfler_minimal = true;
    double t_solve = 0, t_estimate = 0, t_error = 0, t_refine = 0;
    double effectivity() const { return eta / error; }
};

struct ConvergenceHistory {
    std::vector<StepRecord> steps;
    std::vector<std::string> warnings;
    Mesh2D final_mesh;
    std::string stop_reason;
};

// Adaptive loop: solve, estimate, mark, refine until eta < eps or the element cap.
// A stage error aborts the loop; the history so far is kept in the thrown AdaptiveError.
ConvergenceHistory run_algorithm(const AdaptiveConfig& config, const TransmissionProblem& problem,
                                 const Mesh2D& initial_mesh);

struct AdaptiveError : Error {
    ConvergenceHistory history;
    AdaptiveError(const std::string& what, ConvergenceHistory h) : Error(what), history(std::move(h)) {}
};

// history.csv has no timings so identical runs give identical bytes; timings.csv has them.
void write_history_csv(const ConvergenceHistory& h, std::ostream& os);
void write_timings_csv(const ConvergenceHistory& h, std::ostream& os);

// Least-squares slope of log y against log x over points with x >= max(x) / span.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y, double span = 10.0);

}  // namespace fembem
