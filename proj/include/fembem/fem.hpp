#pragma once

#include <array>
#include <functional>
#include <vector>

#include "fembem/mesh.hpp"
#include "fembem/numerics.hpp"

namespace fembem {

using ScalarField = std::function<double(const Vec2&)>;

// Diffusion map A : R^2 -> R^2. Either a constant symmetric matrix or the radial
// form A(x) = mu(|x|) x.
struct DiffusionOp {
    bool linear = true;
    Mat2 matrix = Mat2::Identity();
    std::function<double(double)> mu;    // radial form only
    std::function<double(double)> dmu;   // mu'
    double c_mon = 1.0;
    double c_lip = 1.0;

    static DiffusionOp constant(const Mat2& A, double c_mon, double c_lip);
    static DiffusionOp radial(std::function<double(double)> mu, std::function<double(double)> dmu,
                              double c_mon, double c_lip);

    Vec2 apply(const Vec2& g) const;
    Mat2 jacobian(const Vec2& g) const;
    // Coefficient frozen at gradient g (Picard matrix): A itself when linear, mu(|g|) I otherwise.
    Mat2 frozen(const Vec2& g) const;
};

// Lagrange function of degree 1 or 2. P2 dofs: vertices first, then one per edge
// in MeshTopology edge order.
struct FemFunction {
    int degree = 1;
    Vec values;
};

int num_dofs(const Mesh2D& mesh, const MeshTopology& topo, int degree);
// Global dofs of triangle t: 3 vertices, then (P2) the edges opposite local vertices 0,1,2.
std::array<int, 6> element_dofs(const Mesh2D& mesh, const MeshTopology& topo, int t, int degree);

// Gradients of the local basis at barycentric point lambda (columns follow element_dofs).
Eigen::Matrix<double, 2, 6> local_basis_gradients(const Eigen::Matrix<double, 2, 3>& grad_lambda,
                                                  const Eigen::Vector3d& lambda, int degree);
Eigen::Matrix<double, 6, 1> local_basis_values(const Eigen::Vector3d& lambda, int degree);

// Element stiffness for a constant coefficient matrix.
Mat element_stiffness(const Mesh2D& mesh, int t, int degree, const Mat2& coefficient);

// Linear A: the stiffness of A. Nonlinear A: the frozen-coefficient matrix at `linearization`
// (P1 values), which is required then.
SpMat assemble_stiffness(const Mesh2D& mesh, int degree, const DiffusionOp& diffusion,
                         const FemFunction* linearization = nullptr);
SpMat assemble_stiffness(const Mesh2D& mesh, const MeshTopology& topo, int degree, const DiffusionOp& diffusion,
                         const FemFunction* linearization = nullptr);

// int_T f lambda_i per element with the order-4 triangle rule. Shared by the global load
// and the local flux problems so both see identical numbers.
std::vector<std::array<double, 3>> element_loads(const Mesh2D& mesh, const ScalarField& f);
Vec assemble_load(const Mesh2D& mesh, int degree, const ScalarField& f);
Vec assemble_load(const Mesh2D& mesh, const std::vector<std::array<double, 3>>& loads);

// P1 nonlinear residual <A grad u, grad zeta_i> and its Jacobian.
Vec assemble_operator(const Mesh2D& mesh, const DiffusionOp& diffusion, const Vec& u);
SpMat assemble_jacobian(const Mesh2D& mesh, const DiffusionOp& diffusion, const Vec& u);

Vec2 p1_gradient(const Mesh2D& mesh, int t, const Vec& u);

// BDM1 field. Row e holds the normal-trace values at the two endpoints (lo, hi) of
// edge e, normal to the right of lo -> hi.
struct BdmField {
    Mat coeffs;  // ne x 2
};

// Local basis of BDM1 on one triangle: psi_k = lambda_{vertex[k]} * dir[k].
struct BdmElement {
    std::array<int, 6> edge{};      // global edge
    std::array<int, 6> endpoint{};  // 0 = lo, 1 = hi
    std::array<int, 6> vertex{};    // local vertex j with psi_k . n_E = lambda_j on E
    std::array<Vec2, 6> dir;
    std::array<double, 6> div{};
    double area = 0.0;
    Eigen::Matrix<double, 2, 3> grad_lambda;
    Eigen::Matrix<double, 6, 6> mass() const;
};
BdmElement bdm_element(const Mesh2D& mesh, const MeshTopology& topo, int t);

Vec2 bdm_eval(const BdmElement& el, const BdmField& field, const Eigen::Vector3d& lambda);
double bdm_divergence(const BdmElement& el, const BdmField& field);

// Solution of one vertex-patch mixed problem.
struct LocalFlux {
    int vertex = -1;
    std::vector<int> edges;   // global edges carrying nonzero coefficients
    Mat coeffs;               // edges.size() x 2
    std::vector<int> triangles;
    Vec p;                    // P0 multiplier per patch triangle
    std::vector<double> div;  // div sigma^z per patch triangle
};

// Boundary datum: integral of zeta_z * Phi over a Gamma edge (global edge index).
struct FacetMoment {
    int edge = -1;
    double moment = 0.0;
};

// +1 if the global normal of boundary edge e is the exterior normal, -1 otherwise.
int boundary_edge_sign(const Mesh2D& mesh, const MeshTopology& topo, int e);

// Mixed problem on the vertex patch of z with the mean stabilization <p,1><q,1>.
// Normal traces on the patch boundary are imposed strongly: moment/|F| on Gamma facets
// that contain z, zero elsewhere. u is P1, loads from element_loads.
LocalFlux local_equilibrated_flux(const Mesh2D& mesh, const MeshTopology& topo, int z, const Vec& u,
                                  const DiffusionOp& diffusion, const std::vector<std::array<double, 3>>& loads,
                                  const std::vector<FacetMoment>& moments);

struct FluxCheck {
    double divergence_constant = 0.0;   // mean of div sigma + Qf
    double divergence_deviation = 0.0;  // max |div sigma + Qf - constant| / scale
    double trace_deviation = 0.0;       // max |sigma.n - Q Phi| / scale on Gamma facets
    double compatibility = 0.0;         // max |<p^z,1>| relative to the divergence scale
};

// Sum of the extended local fields with the constraint checks. `facet_means` holds Q Phi
// (exterior normal) for the Gamma edges listed in `gamma_edges`.
// Throws InternalError if the trace check or, when `strict`, the divergence check fails.
BdmField sum_local_fluxes(const Mesh2D& mesh, const MeshTopology& topo, const std::vector<LocalFlux>& locals,
                          const std::vector<double>& element_means_f, const std::vector<int>& gamma_edges,
                          const std::vector<double>& facet_means, bool strict, FluxCheck* check = nullptr,
                          double tol = 1e-9);

// Discrete harmonic extension on a patch: P`degree` Lagrange on the patch triangles,
// Dirichlet values on patch-boundary edges: xi * jg (product of P1 data) on edges with
// gamma_edge set, zero on the rest. Returns values on the patch dofs in `dofs`.
struct PatchPotential {
    std::vector<int> dofs;  // global dofs (num_dofs numbering)
    Vec values;
    double interior_residual = 0.0;  // max |stiffness residual| at free nodes
};
PatchPotential local_patch_potential(const Mesh2D& mesh, const MeshTopology& topo, const Patch& patch,
                                     const std::vector<char>& gamma_edge, const Vec& xi, const Vec& jg,
                                     int degree = 2);

// Per-element ||grad w||_T for a P2 (or P1) function.
std::vector<double> element_gradient_norms(const Mesh2D& mesh, const MeshTopology& topo, const FemFunction& w);

}  // namespace fembem
