#include "fembem/coupling.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "fembem/errors.hpp"

namespace fembem {

std::string to_string(CouplingKind kind) {
    switch (kind) {
        case CouplingKind::Symmetric: return "symmetric";
        case CouplingKind::JohnsonNedelec: return "jn";
        case CouplingKind::BielakMacCamy: return "bm";
    }
    return "?";
}

CouplingKind parse_coupling(const std::string& name) {
    if (name == "symmetric" || name == "sym") return CouplingKind::Symmetric;
    if (name == "jn") return CouplingKind::JohnsonNedelec;
    if (name == "bm") return CouplingKind::BielakMacCamy;
    throw ConfigError("unknown coupling '" + name + "' (expected symmetric, jn or bm)");
}

std::string to_string(NonlinearMethod m) {
    switch (m) {
        case NonlinearMethod::Auto: return "auto";
        case NonlinearMethod::Zarantonello: return "zarantonello";
        case NonlinearMethod::Newton: return "newton";
    }
    return "?";
}

NonlinearMethod parse_nonlinear(const std::string& name) {
    if (name == "auto") return NonlinearMethod::Auto;
    if (name == "zarantonello" || name == "picard") return NonlinearMethod::Zarantonello;
    if (name == "newton") return NonlinearMethod::Newton;
    throw ConfigError("unknown nonlinear method '" + name + "'");
}

QuadRule boundary_data_rule() { return graded_segment_rule(8, 10, 0.15); }

Mat boundary_data_moments(const BoundaryMesh& bm, const BoundaryField& g) {
    const int n = static_cast<int>(bm.size());
    const QuadRule rule = boundary_data_rule();
    Mat m = Mat::Zero(n, 2);
    for (int i = 0; i < n; ++i) {
        const double L = bm.length(i);
        const Vec2 nrm = bm.normal(i);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            double s = rule.points[q].x();
            double v = rule.weights[q] * L * g(bm.point(i, s), nrm);
            m(i, 0) += v * (1.0 - s);
            m(i, 1) += v * s;
        }
    }
    return m;
}

CouplingData prepare_coupling(const TransmissionProblem& problem, const Mesh2D& mesh) {
    CouplingData d;
    d.bmesh = boundary_mesh(mesh);
    d.ops = assemble_operators(d.bmesh);
    d.loads = element_loads(mesh, problem.f);
    const int n = static_cast<int>(d.bmesh.size());
    d.g_D.resize(n);
    for (int i = 0; i < n; ++i) d.g_D(i) = problem.g_D(d.bmesh.points[i]);
    d.g_N = boundary_data_moments(d.bmesh, problem.g_N);
    return d;
}

namespace {

Vec nodal_from_moments(const Mat& m) {
    const int n = static_cast<int>(m.rows());
    Vec v(n);
    for (int j = 0; j < n; ++j) v(j) = m(j, 0) + m((j + n - 1) % n, 1);
    return v;
}

BlockSystem base_system(CouplingKind kind, const Mesh2D& mesh, const CouplingData& data) {
    BlockSystem s;
    s.kind = kind;
    s.V = data.ops.V;
    s.load = assemble_load(mesh, data.loads);
    s.boundary_vertex = data.bmesh.node_vertex;
    return s;
}

Vec gather(const Vec& u, const std::vector<int>& idx) {
    Vec b(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) b(i) = u(idx[i]);
    return b;
}

void scatter_add(Vec& u, const std::vector<int>& idx, const Vec& b) {
    for (std::size_t i = 0; i < idx.size(); ++i) u(idx[i]) += b(i);
}

// Sparse A plus a dense block S on the boundary vertices, solved by eliminating the
// interior vertices with a sparse Cholesky factor.
class ReducedSolver {
public:
    ReducedSolver(const SpMat& A, const Mat& S, const std::vector<int>& bverts, bool symmetric)
        : n_(static_cast<int>(A.rows())), bverts_(bverts), symmetric_(symmetric) {
        pos_.assign(n_, -1);
        const int nb = static_cast<int>(bverts.size());
        for (int i = 0; i < nb; ++i) pos_[bverts[i]] = i;
        for (int v = 0; v < n_; ++v)
            if (pos_[v] < 0) interior_.push_back(v);
        const int ni = static_cast<int>(interior_.size());
        std::vector<int> ipos(n_, -1);
        for (int i = 0; i < ni; ++i) ipos[interior_[i]] = i;

        std::vector<Triplet> tii, tib;
        Mat abb = Mat::Zero(nb, nb);
        for (int k = 0; k < A.outerSize(); ++k) {
            for (SpMat::InnerIterator it(A, k); it; ++it) {
                int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
                bool rb = pos_[r] >= 0, cb = pos_[c] >= 0;
                if (!rb && !cb) tii.emplace_back(ipos[r], ipos[c], it.value());
                else if (!rb && cb) tib.emplace_back(ipos[r], pos_[c], it.value());
                else if (rb && cb) abb(pos_[r], pos_[c]) += it.value();
            }
        }
        aii_.resize(ni, ni);
        aii_.setFromTriplets(tii.begin(), tii.end());
        aib_.resize(ni, nb);
        aib_.setFromTriplets(tib.begin(), tib.end());
        // A is structurally symmetric; A_BI = A_IB^T holds for the symmetric stiffness/Jacobian.
        Mat schur = abb + S;
        if (ni > 0) {
            llt_.compute(aii_);
            if (llt_.info() != Eigen::Success) throw SolverError("interior block is not SPD");
            const int chunk = 64;
            for (int c0 = 0; c0 < nb; c0 += chunk) {
                int w = std::min(chunk, nb - c0);
                Mat rhs = Mat(aib_.middleCols(c0, w));
                Mat y = llt_.solve(rhs);
                schur.middleCols(c0, w) -= aib_.transpose() * y;
            }
        }
        if (symmetric_) {
            schur = 0.5 * (schur + schur.transpose()).eval();
            dllt_.compute(schur);
            if (dllt_.info() != Eigen::Success) throw SolverError("boundary Schur complement is not SPD");
        } else {
            dlu_.compute(schur);
            if (!(dlu_.rcond() > 1e-15)) throw SolverError("boundary Schur complement is singular");
        }
    }

    Vec solve(const Vec& rhs) const {
        const int ni = static_cast<int>(interior_.size());
        Vec ri = gather(rhs, interior_), rb = gather(rhs, bverts_);
        Vec yi = ni > 0 ? Vec(llt_.solve(ri)) : Vec();
        if (ni > 0) rb -= aib_.transpose() * yi;
        Vec ub = symmetric_ ? Vec(dllt_.solve(rb)) : Vec(dlu_.solve(rb));
        Vec u = Vec::Zero(n_);
        for (std::size_t i = 0; i < bverts_.size(); ++i) u(bverts_[i]) = ub(i);
        if (ni > 0) {
            Vec ui = llt_.solve(ri - aib_ * ub);
            for (int i = 0; i < ni; ++i) u(interior_[i]) = ui(i);
        }
        return u;
    }

private:
    int n_;
    std::vector<int> bverts_, interior_, pos_;
    bool symmetric_;
    SpMat aii_, aib_;
    Eigen::SimplicialLLT<SpMat> llt_;
    Eigen::LLT<Mat> dllt_;
    Eigen::PartialPivLU<Mat> dlu_;
};

}  // namespace

BlockSystem assemble_symmetric(const TransmissionProblem&, const Mesh2D& mesh, const CouplingData& data) {
    const auto& o = data.ops;
    BlockSystem s = base_system(CouplingKind::Symmetric, mesh, data);
    s.Wb = o.W;
    s.Cp = o.Kp - 0.5 * o.M.transpose();
    s.Bd = 0.5 * o.M - o.K;
    s.rhs_b = nodal_from_moments(data.g_N) + o.W * data.g_D;
    s.rhs_x = s.Bd * data.g_D;
    return s;
}

BlockSystem assemble_johnson_nedelec(const TransmissionProblem& problem, const Mesh2D& mesh, const CouplingData& data) {
    (void)problem;
    const auto& o = data.ops;
    BlockSystem s = base_system(CouplingKind::JohnsonNedelec, mesh, data);
    const int n = static_cast<int>(o.V.rows());
    s.Wb = Mat::Zero(n, n);
    s.Cp = -o.M.transpose();
    s.Bd = 0.5 * o.M - o.K;
    s.rhs_b = nodal_from_moments(data.g_N);
    s.rhs_x = s.Bd * data.g_D;
    return s;
}

BlockSystem assemble_bielak_maccamy(const TransmissionProblem& problem, const Mesh2D& mesh, const CouplingData& data) {
    (void)problem;
    const auto& o = data.ops;
    BlockSystem s = base_system(CouplingKind::BielakMacCamy, mesh, data);
    const int n = static_cast<int>(o.V.rows());
    s.Wb = Mat::Zero(n, n);
    s.Cp = 0.5 * o.M.transpose() - o.Kp;
    s.Bd = -o.M;
    s.rhs_b = nodal_from_moments(data.g_N);
    s.rhs_x = s.Bd * data.g_D;
    return s;
}

BlockSystem assemble_block(CouplingKind kind, const TransmissionProblem& problem, const Mesh2D& mesh,
                           const CouplingData& data) {
    switch (kind) {
        case CouplingKind::Symmetric: return assemble_symmetric(problem, mesh, data);
        case CouplingKind::JohnsonNedelec: return assemble_johnson_nedelec(problem, mesh, data);
        case CouplingKind::BielakMacCamy: return assemble_bielak_maccamy(problem, mesh, data);
    }
    throw InternalError("assemble_block: bad kind");
}

Mat dense_matrix(const BlockSystem& sys, const Mesh2D& mesh, const DiffusionOp& diffusion) {
    if (!diffusion.linear) throw UnsupportedError("dense_matrix: linear diffusion only");
    const int nv = static_cast<int>(mesh.vertices.size());
    const int nb = static_cast<int>(sys.boundary_vertex.size());
    Mat M = Mat::Zero(nv + nb, nv + nb);
    M.topLeftCorner(nv, nv) = Mat(assemble_stiffness(mesh, 1, diffusion));
    const auto& bv = sys.boundary_vertex;
    for (int i = 0; i < nb; ++i) {
        for (int j = 0; j < nb; ++j) {
            M(bv[i], bv[j]) += sys.Wb(i, j);
            M(bv[i], nv + j) += sys.Cp(i, j);
            M(nv + i, bv[j]) += sys.Bd(i, j);
            M(nv + i, nv + j) = sys.V(i, j);
        }
    }
    return M;
}

double block_residual(const BlockSystem& sys, const Mesh2D& mesh, const DiffusionOp& diffusion, const Vec& u,
                      const Vec& x) {
    const auto& bv = sys.boundary_vertex;
    Vec ub = gather(u, bv);
    Vec au = assemble_operator(mesh, diffusion, u);
    Vec rhs_u = sys.load;
    scatter_add(rhs_u, bv, sys.rhs_b);
    Vec ru = au - rhs_u;
    scatter_add(ru, bv, sys.Wb * ub + sys.Cp * x);
    Vec vx = sys.V * x;
    Vec rx = sys.Bd * ub + vx - sys.rhs_x;
    double scale = std::max({rhs_u.lpNorm<Eigen::Infinity>(), sys.rhs_x.lpNorm<Eigen::Infinity>(),
                             au.lpNorm<Eigen::Infinity>(), vx.lpNorm<Eigen::Infinity>()});
    double r = std::max(ru.lpNorm<Eigen::Infinity>(), rx.lpNorm<Eigen::Infinity>());
    return scale > 0.0 ? r / scale : r;
}

Vec bm_physical_density(const BoundaryOperatorSet& ops, const Vec& psi) {
    Mat K00 = ops.Kloc[0] + ops.Kloc[1];
    Vec phi = K00.transpose() * psi;
    for (Eigen::Index i = 0; i < phi.size(); ++i) phi(i) = phi(i) / ops.lengths(i) - 0.5 * psi(i);
    return phi;
}

Vec prolongate(const Mesh2D& fine, const Vec& coarse) {
    const Eigen::Index nc = coarse.size();
    Vec u = Vec::Zero(static_cast<Eigen::Index>(fine.vertices.size()));
    u.head(nc) = coarse;
    for (Eigen::Index v = nc; v < u.size(); ++v) {
        auto p = fine.vertex_parents[v];
        if (p[0] < 0 || p[0] >= v || p[1] >= v) throw StructuralError("prolongate: vertex without earlier parents");
        u(v) = 0.5 * (u(p[0]) + u(p[1]));
    }
    return u;
}

CoupledSolution solve_coupling(const TransmissionProblem& problem, const Mesh2D& mesh, const CouplingData& data,
                               CouplingKind kind, const SolverOptions& opt) {
    const DiffusionOp& diff = problem.diffusion;
    CoupledSolution sol;
    sol.kind = kind;
    if (kind != CouplingKind::Symmetric && diff.c_mon <= 0.25) {
        std::ostringstream os;
        os << to_string(kind) << " coupling with C_mon = " << diff.c_mon
           << " <= 1/4: discrete well-posedness is not guaranteed";
        sol.warnings.push_back(os.str());
    }
    BlockSystem sys = assemble_block(kind, problem, mesh, data);
    const auto& bv = sys.boundary_vertex;
    const int nv = static_cast<int>(mesh.vertices.size());

    Eigen::LLT<Mat> vllt(sys.V);
    if (vllt.info() != Eigen::Success) throw SolverError("single-layer matrix is not SPD");
    Mat S = sys.Wb - sys.Cp * vllt.solve(sys.Bd);
    const bool sym = kind == CouplingKind::Symmetric;
    if (sym) S = 0.5 * (S + S.transpose()).eval();
    Vec rb = sys.rhs_b - sys.Cp * vllt.solve(sys.rhs_x);
    Vec R = sys.load;
    scatter_add(R, bv, rb);

    auto reduced_residual = [&](const Vec& u) {
        Vec r = assemble_operator(mesh, diff, u) - R;
        scatter_add(r, bv, S * gather(u, bv));
        return r;
    };

    Vec u;
    if (diff.linear) {
        ReducedSolver solver(assemble_stiffness(mesh, 1, diff), S, bv, sym);
        u = solver.solve(R);
        sol.iterations = 1;
    } else {
        NonlinearMethod method = opt.method;
        if (method == NonlinearMethod::Auto) method = sym ? NonlinearMethod::Zarantonello : NonlinearMethod::Newton;
        if (method == NonlinearMethod::Zarantonello && !sym)
            throw UnsupportedError("Zarantonello iteration needs the symmetric coupling");
        u = opt.initial ? *opt.initial : Vec::Zero(nv);
        if (u.size() != nv) throw ConfigError("solve_coupling: initial guess has wrong size");
        bool converged = false;
        if (method == NonlinearMethod::Zarantonello) {
            // Riesz map of the norm C_mon |grad v|^2 + <S v, v>, scaled by 1/C_mon.
            DiffusionOp lap = DiffusionOp::constant(Mat2::Identity(), 1.0, 1.0);
            Mat Sc = S / diff.c_mon;
            SpMat L = assemble_stiffness(mesh, 1, lap);
            ReducedSolver solver(L, Sc, bv, true);
            const double delta = diff.c_mon / (diff.c_lip * diff.c_lip);
            double prev = -1.0;
            for (int it = 1; it <= opt.max_iter; ++it) {
                Vec du = solver.solve(reduced_residual(u));
                u -= delta * du;
                sol.iterations = it;
                sol.update_norm = delta * du.norm();
                Vec ldu = L * du;
                scatter_add(ldu, bv, Sc * gather(du, bv));
                double energy = delta * std::sqrt(std::max(0.0, du.dot(ldu)));
                if (prev > 0.0) sol.contraction.push_back(energy / prev);
                prev = energy;
                if (sol.update_norm <= opt.tol * std::max(u.norm(), 1e-300)) {
                    converged = true;
                    break;
                }
            }
            // The linear rate leaves a residual near tol / (1 - rate); the patch-wise flux
            // compatibility needs it at rounding level, so finish with residual-decreasing Newton steps.
            if (converged) {
                Vec r = reduced_residual(u);
                for (int k = 0; k < 4; ++k) {
                    ReducedSolver newton(assemble_jacobian(mesh, diff, u), S, bv, true);
                    Vec trial = u - newton.solve(r);
                    Vec rt = reduced_residual(trial);
                    if (!(rt.norm() < r.norm())) break;
                    u = trial;
                    r = rt;
                }
            }
        } else {
            double rnorm = reduced_residual(u).norm();
            for (int it = 1; it <= opt.max_iter; ++it) {
                Vec r = reduced_residual(u);
                ReducedSolver solver(assemble_jacobian(mesh, diff, u), S, bv, sym);
                Vec du = solver.solve(r);
                double lambda = 1.0;
                Vec trial = u - du;
                double tn = reduced_residual(trial).norm();
                for (int k = 0; k < 20 && tn > rnorm && tn > 0.0; ++k) {
                    lambda *= 0.5;
                    trial = u - lambda * du;
                    tn = reduced_residual(trial).norm();
                }
                u = trial;
                rnorm = tn;
                sol.iterations = it;
                sol.update_norm = lambda * du.norm();
                if (sol.update_norm <= opt.tol * std::max(u.norm(), 1e-300)) {
                    converged = true;
                    break;
                }
            }
        }
        if (!converged) {
            std::ostringstream os;
            os << "nonlinear " << to_string(method) << " iteration did not converge in " << opt.max_iter
               << " steps (last update " << sol.update_norm << ")";
            throw SolverError(os.str());
        }
    }

    Vec x = vllt.solve(sys.rhs_x - sys.Bd * gather(u, bv));
    sol.u = u;
    sol.density = x;
    sol.phi = kind == CouplingKind::BielakMacCamy ? bm_physical_density(data.ops, x) : x;
    sol.residual = block_residual(sys, mesh, diff, u, x);
    if (!(sol.residual < 1e-8)) {
        std::ostringstream os;
        os << "coupled system residual " << sol.residual << " too large";
        throw SolverError(os.str());
    }
    return sol;
}

}  // namespace fembem
