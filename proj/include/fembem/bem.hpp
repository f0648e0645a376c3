#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "fembem/mesh.hpp"
#include "fembem/numerics.hpp"

namespace fembem {

// Fundamental solution G(x) = -(1/2pi) ln|x|, exterior normal, double-layer kernel
// d/dn_y G(x-y). With this convention K~1 = -1 inside, 0 outside, and K1 = -1/2 on
// smooth parts of the boundary.

struct Panel {
    Vec2 a, b, t, n;
    double L = 0.0;

    Panel() = default;
    Panel(const Vec2& a_, const Vec2& b_);
    Vec2 at(double s) const { return a + s * (b - a); }
};

// Closed-form integrals over one straight panel, evaluated at x.
struct PanelValues {
    double S = 0.0;             // int G(x-y) dy
    Vec2 gradS = Vec2::Zero();  // grad_x of S
    double D0 = 0.0, D1 = 0.0;  // int dG/dn_y * (1-s/L), int dG/dn_y * s/L
    Vec2 gradD0 = Vec2::Zero(), gradD1 = Vec2::Zero();
};

// `own` suppresses the double-layer and normal-gradient parts (x on the panel).
PanelValues panel_integrals(const Panel& p, const Vec2& x, bool own, bool gradients);

struct BoundaryOperatorSet {
    Mat V;      // P0 x P0
    Mat K;      // P0 x P1: K(F, j) = <K zeta_j, chi_F>
    Mat Kp;     // P1 x P0: Kp(j, F) = <K' chi_F, zeta_j>
    Mat W;      // P1 x P1
    Mat M;      // P0 x P1 mass: <zeta_j, chi_F>
    Mat D;      // P0 x P1 arclength derivative
    // K split by panel side: Kloc[side](F, E) = <K (zeta_side chi_E), chi_F>, side 0 = start of E.
    std::array<Mat, 2> Kloc;
    Vec lengths;
};

BoundaryOperatorSet assemble_operators(const BoundaryMesh& bmesh, bool with_adjoint = true);

// Pairwise panel integrals used by assembly, exposed for rectangular (coarse x fine) use.
double single_layer_pair(const Panel& F, const Panel& E);
std::array<double, 2> double_layer_pair(const Panel& F, const Panel& E);   // P0 test on F, P1 trial on E
std::array<double, 2> adjoint_pair(const Panel& F, const Panel& E);        // P1 test on F, P0 trial on E

std::vector<Panel> panels(const BoundaryMesh& bmesh);

// Potentials off Gamma.
double eval_single_layer(const BoundaryMesh& bmesh, const Vec& density, const Vec2& x);
double eval_double_layer(const BoundaryMesh& bmesh, const Vec& trace, const Vec2& x);
Vec2 eval_single_layer_gradient(const BoundaryMesh& bmesh, const Vec& density, const Vec2& x);
Vec2 eval_double_layer_gradient(const BoundaryMesh& bmesh, const Vec& trace, const Vec2& x);

enum class Side { Interior, Exterior };

// Discrete Dirichlet-to-Neumann image V^-1 (K +- 1/2 M) g (P0 coefficients).
Vec steklov_apply(const BoundaryOperatorSet& ops, Side which, const Vec& g);

// A point on Gamma in the interior of panel `seg` of the source mesh.
struct BoundaryPoint {
    int seg = 0;
    double s = 0.5;
};

// Boundary values of the layer operators at points strictly inside panels.
// t is P1 (nodal), psi is P0. Columns of the result:
//   0: (V psi)(x)        1: d/ds (V psi)(x)   2: (K' psi)(x)
//   3: ((K - 1/2) t)(x)  4: d/ds ((K - 1/2) t)(x)  5: (W t)(x)
Mat boundary_layer_values(const BoundaryMesh& src, const Vec& t, const Vec& psi,
                          const std::vector<BoundaryPoint>& points);

// Values at the source mesh nodes (continuous limits, valid at corners).
// Columns: 0: (V psi)(z), 1: ((K - 1/2) t)(z).
Mat boundary_node_values(const BoundaryMesh& src, const Vec& t, const Vec& psi);

// Row-major dump in scientific notation.
void write_matrix(const Mat& A, std::ostream& os);

}  // namespace fembem
