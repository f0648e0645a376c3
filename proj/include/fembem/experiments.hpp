#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fembem/adaptivity.hpp"
#include "fembem/coupling.hpp"
#include "fembem/mesh.hpp"

namespace fembem {

// square_linear, lshape_linear, zshape_nonlinear
TransmissionProblem build_problem(const std::string& id);
std::vector<std::string> problem_ids();

// True if x lies in the closed domain of problem `id`.
bool in_domain(const std::string& id, const Vec2& x);

// Omega only for the interior variant; Omega plus the strip (-1/2,1/2)^2 \ Omega otherwise.
Mesh2D build_initial_mesh(const std::string& id, Variant variant);

struct Compatibility {
    double f_integral = 0.0;    // <f, 1>_Omega
    double gn_integral = 0.0;   // <g_N, 1>_Gamma
    double total() const { return f_integral + gn_integral; }
    bool log_regime = false;    // total nonzero relative to the data scale: u^ext grows like log|x|
};
Compatibility compatibility_report(const TransmissionProblem& problem, const Mesh2D& mesh);

struct ExperimentSpec {
    std::string problem = "square_linear";
    AdaptiveConfig config;
    unsigned seed = 0;
};

// Full driver: parses argv, runs, writes outputs, prints a summary. Returns the exit status.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

void print_summary(const ConvergenceHistory& h, std::ostream& os);

}  // namespace fembem
