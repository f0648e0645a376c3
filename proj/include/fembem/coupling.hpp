#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fembem/bem.hpp"
#include "fembem/fem.hpp"
#include "fembem/mesh.hpp"

namespace fembem {

enum class CouplingKind { Symmetric, JohnsonNedelec, BielakMacCamy };
std::string to_string(CouplingKind kind);
CouplingKind parse_coupling(const std::string& name);  // symmetric | jn | bm

using BoundaryField = std::function<double(const Vec2& x, const Vec2& normal)>;
using VectorField = std::function<Vec2(const Vec2&)>;

struct ExactSolution {
    ScalarField u, u_ext;
    VectorField grad_u, grad_u_ext;
    // Point where grad u is singular (reentrant corner); triangles touching it get a Duffy rule.
    std::optional<Vec2> singular_point;
};

struct TransmissionProblem {
    std::string id;
    DiffusionOp diffusion;
    ScalarField f;
    ScalarField g_D;
    BoundaryField g_N;  // evaluated with the exterior normal of the facet
    std::optional<ExactSolution> exact;
};

// Facet moments int_F g zeta_side with the graded facet rule used for all boundary data
// (row per segment, column = side: 0 start, 1 end).
Mat boundary_data_moments(const BoundaryMesh& bmesh, const BoundaryField& g);
QuadRule boundary_data_rule();

// Everything on one interior mesh that does not depend on the coupling kind.
struct CouplingData {
    BoundaryMesh bmesh;
    BoundaryOperatorSet ops;
    std::vector<std::array<double, 3>> loads;  // element_loads of f
    Vec g_D;                                    // nodal values on bmesh
    Mat g_N;                                    // boundary_data_moments of g_N
};
CouplingData prepare_coupling(const TransmissionProblem& problem, const Mesh2D& mesh);

// Block form for any coupling:
//   A(u) + P [Wb u_B + Cp x] = load + P rhs_b
//          Bd u_B + V x      = rhs_x
// with P the injection of boundary-node values into vertex values and x the density
// unknown (phi for symmetric/JN, the indirect density for BM).
struct BlockSystem {
    CouplingKind kind = CouplingKind::Symmetric;
    Mat Wb, Cp, Bd, V;
    Vec load, rhs_b, rhs_x;
    std::vector<int> boundary_vertex;
};
BlockSystem assemble_symmetric(const TransmissionProblem& problem, const Mesh2D& mesh, const CouplingData& data);
BlockSystem assemble_johnson_nedelec(const TransmissionProblem& problem, const Mesh2D& mesh, const CouplingData& data);
BlockSystem assemble_bielak_maccamy(const TransmissionProblem& problem, const Mesh2D& mesh, const CouplingData& data);
BlockSystem assemble_block(CouplingKind kind, const TransmissionProblem& problem, const Mesh2D& mesh,
                           const CouplingData& data);

// Dense full matrix (linear diffusion only), unknowns (u, x). For tests and dumps.
Mat dense_matrix(const BlockSystem& sys, const Mesh2D& mesh, const DiffusionOp& diffusion);
// Max-norm residual of the block equations relative to the right-hand side scale.
double block_residual(const BlockSystem& sys, const Mesh2D& mesh, const DiffusionOp& diffusion, const Vec& u,
                      const Vec& x);

enum class NonlinearMethod { Auto, Zarantonello, Newton };
std::string to_string(NonlinearMethod m);
NonlinearMethod parse_nonlinear(const std::string& name);  // auto | zarantonello | newton

struct SolverOptions {
    NonlinearMethod method = NonlinearMethod::Auto;  // Zarantonello for symmetric, Newton otherwise
    double tol = 1e-12;                              // relative update norm
    int max_iter = 5000;
    std::optional<Vec> initial;                      // P1 start for nonlinear iterations
};

struct CoupledSolution {
    CouplingKind kind = CouplingKind::Symmetric;
    Vec u;        // P1 on the interior mesh
    Vec phi;      // physical density gamma_1 u^ext as P0 on the boundary mesh
    Vec density;  // the coupling's own density unknown
    int iterations = 0;
    double update_norm = 0.0;
    double residual = 0.0;
    std::vector<double> contraction;  // observed energy-norm ratios of successive updates
    std::vector<std::string> warnings;
};

CoupledSolution solve_coupling(const TransmissionProblem& problem, const Mesh2D& mesh, const CouplingData& data,
                               CouplingKind kind, const SolverOptions& options = {});

// P0 projection of (K' - 1/2) psi.
Vec bm_physical_density(const BoundaryOperatorSet& ops, const Vec& psi);

// New vertex values as the mean of the parent edge endpoints.
Vec prolongate(const Mesh2D& fine, const Vec& coarse_values);

}  // namespace fembem
