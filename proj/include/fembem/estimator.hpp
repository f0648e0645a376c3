#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fembem/coupling.hpp"
#include "fembem/fem.hpp"
#include "fembem/mesh.hpp"

namespace fembem {

enum class Variant { Strip, Interior };
std::string to_string(Variant v);
Variant parse_variant(const std::string& name);  // strip | interior

// Phi = g_N - W t - (K' - 1/2) phi and G = (K - 1/2) t - V phi with t = gamma_0 u - I g_D,
// on the boundary mesh of the interior mesh.
struct BoundaryResiduals {
    Vec t;                   // nodal
    Mat phi_moments;         // nseg x 2: int_F zeta_side Phi
    Vec phi_mean;            // Q Phi per facet
    Vec jg;                  // G at the nodes (= J G)
    std::vector<double> qs;  // facet quadrature parameters in (0,1)
    std::vector<double> qw;  // weights on [0,1]
    Mat phi_q;               // nseg x nq: Phi at the quadrature points
    Mat dg_q;                // nseg x nq: d/ds G at the quadrature points
};

// Facet rule for the pointwise evaluators (Gauss with 8 points by default).
BoundaryResiduals compute_residuals(const TransmissionProblem& problem, const Mesh2D& mesh, const CouplingData& data,
                                    const CoupledSolution& sol, const QuadRule& facet_rule = gauss_legendre(8));

struct FluxInputs {
    std::vector<std::vector<FacetMoment>> per_vertex;  // indexed by mesh vertex
    std::vector<int> gamma_edges;                       // per boundary segment
    std::vector<double> facet_means;                    // Q Phi per boundary segment
};
// Throws InternalError if the per-facet split does not add up to Q Phi.
FluxInputs build_flux_inputs(const Mesh2D& mesh, const MeshTopology& topo, const BoundaryMesh& bmesh,
                             const BoundaryResiduals& res);

struct FluxResult {
    BdmField sigma;
    FluxCheck check;
    std::vector<double> eta_int;    // ||A grad u - sigma||_T
    std::vector<double> eta_int_a;  // ||A grad u - sigma||_{A^-1,T} (linear A only, else empty)
    std::vector<double> mean_f;     // Q f per element
};
FluxResult equilibrated_flux(const TransmissionProblem& problem, const Mesh2D& mesh, const MeshTopology& topo,
                             const CouplingData& data, const CoupledSolution& sol, const BoundaryResiduals& res,
                             bool strict);

// Partition weights on the Gamma nodes of a region mesh. weights[i] lists (vertex, xi) for seed i.
struct XiWeights {
    std::vector<int> seeds;
    std::vector<Patch> patches;
    std::vector<std::vector<std::pair<int, double>>> weights;
    std::vector<std::vector<std::pair<int, double>>> raw;  // before renormalization
    double partition_error = 0.0;                          // max |sum_z xi^z - 1| over Gamma nodes
};
XiWeights xi_weights(const Mesh2D& mesh, const MeshTopology& topo, const std::vector<char>& gamma_vertex, int k);

struct PotentialResult {
    FemFunction w;                 // P2 on the region mesh
    std::vector<double> eta_ext;   // ||grad w||_T per region triangle
    double trace_error = 0.0;      // max_z |w(z) - JG(z)| / max |JG|
    double interior_residual = 0.0;
    double partition_error = 0.0;
};
// jg holds J G per vertex of the region mesh (ignored off Gamma).
PotentialResult aux_potential(const Mesh2D& mesh, const MeshTopology& topo, const std::vector<char>& gamma_edge,
                              const std::vector<char>& gamma_vertex, const Vec& jg, int k);

// Per-facet L2 norms on Gamma: ||d/ds (1 - J) G||_F and ||(1 - Q) Phi||_F.
struct FacetOscillation {
    std::vector<double> dirichlet, neumann;
};
FacetOscillation facet_oscillations(const BoundaryMesh& bmesh, const BoundaryResiduals& res);

// Per-facet C_N = C_2 (h_T^2 |F| / (h_F |T|))^{1/2} with T the interior parent of F.
std::vector<double> trace_constants(const Mesh2D& mesh, const BoundaryMesh& bmesh);

// h_T ||(1 - Q) f||_T per element (order-4 rule; exact zero for constant f).
std::vector<double> oscillation_omega(const Mesh2D& mesh, const ScalarField& f, const std::vector<double>& mean_f);

struct EstimatorReport {
    Variant variant = Variant::Interior;
    std::vector<int> element;  // element id in the estimated mesh
    std::vector<Region> region;
    std::vector<double> eta_int, eta_ext, osc_omega, osc_d, osc_n;
    std::vector<double> eta2;  // per-element squared total
    double total = 0.0;
    double t_int = 0.0, t_ext = 0.0, t_osc_omega = 0.0, t_osc_d = 0.0, t_osc_n = 0.0;
    double c_mon = 1.0, c_n = 0.0, c_d = 1.0, c_ps_ratio = 1.0;
    double c_rel = 0.0;
    double bound = 0.0;  // weighted sum of the functional upper bound
};

struct EstimatorParts {
    std::vector<double> eta_int, eta_ext, osc_omega, osc_d, osc_n;  // already per element of the report mesh
    std::vector<Region> region;
    double c_mon = 1.0, c_n = 0.0;
    double bound = 0.0;
};
EstimatorReport total_estimator(const EstimatorParts& parts, Variant variant);

void write_report_csv(const EstimatorReport& r, std::ostream& os);

struct EnergyError {
    double interior = 0.0;  // ||grad(u - u_l)||_A^2
    double exterior = 0.0;  // ||grad(u^ext - u_l^ext)||^2
    double total() const;   // E
};

// Quadrature controls for error evaluation. data_subdivisions splits each facet for the
// representation of g_D inside u_l^ext.
struct ErrorQuadrature {
    int data_subdivisions = 8;
    int boundary_points = 8;
    int boundary_levels = 4;
    int triangle_order = 10;
    int duffy_points = 12;
};

EnergyError energy_error(const TransmissionProblem& problem, const Mesh2D& mesh, const BoundaryMesh& bmesh,
                         const CoupledSolution& sol, const ErrorQuadrature& q = {});

// Right-hand side F(e, psi) - b((u_l + c, phi_l), (e, psi)) of the error identity with
// e = u - u_l - c and psi = gamma_1 (u^ext - u_l^ext); c is the mean shift when `shift`.
double error_identity_rhs(const TransmissionProblem& problem, const Mesh2D& mesh, const BoundaryMesh& bmesh,
                          const CoupledSolution& sol, bool shift, const ErrorQuadrature& q = {});

}  // namespace fembem
