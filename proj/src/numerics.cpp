#include "fembem/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "fembem/errors.hpp"

namespace fembem {

namespace {

// Golub-Welsch on the Legendre Jacobi matrix, mapped to [0,1].
QuadRule compute_gauss_legendre(int n) {
    Mat J = Mat::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        double b = k / std::sqrt(4.0 * k * k - 1.0);
        J(k, k - 1) = b;
        J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(J);
    QuadRule rule;
    rule.order = 2 * n - 1;
    for (int k = 0; k < n; ++k) {
        double x = eig.eigenvalues()(k);
        double v0 = eig.eigenvectors()(0, k);
        rule.points.emplace_back(0.5 * (x + 1.0), 0.0);
        rule.weights.push_back(v0 * v0);  // 2 v0^2 on [-1,1], halved for [0,1]
    }
    // Newton polish of the nodes: the eigen solver is only accurate to a few ulps
    // of the matrix norm, which costs digits near the endpoints for large n.
    for (int k = 0; k < n; ++k) {
        double x = 2.0 * rule.points[k].x() - 1.0;
        double dp = 0.0;
        for (int it = 0; it < 3; ++it) {
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= n; ++j) {
                double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            double pn = n == 0 ? 1.0 : (n == 1 ? x : p1);
            double pm = n == 1 ? 1.0 : p0;
            dp = n * (x * pn - pm) / (x * x - 1.0);
            x -= pn / dp;
        }
        rule.points[k].x() = 0.5 * (x + 1.0);
        rule.weights[k] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

QuadRule triangle_rule(int order) {
    QuadRule r;
    r.order = order;
    if (order <= 1) {
        r.points = {Vec2(1.0 / 3.0, 1.0 / 3.0)};
        r.weights = {0.5};
        r.order = 1;
    } else if (order == 2) {
        r.points = {Vec2(1.0 / 6.0, 1.0 / 6.0), Vec2(2.0 / 3.0, 1.0 / 6.0), Vec2(1.0 / 6.0, 2.0 / 3.0)};
        r.weights = {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
    } else if (order <= 4) {
        // Strang-Fix / Dunavant degree-4 rule
        const double a = 0.445948490915965, wa = 0.223381589678011 / 2.0;
        const double b = 0.091576213509771, wb = 0.109951743655322 / 2.0;
        r.points = {Vec2(a, a), Vec2(1 - 2 * a, a), Vec2(a, 1 - 2 * a),
                    Vec2(b, b), Vec2(1 - 2 * b, b), Vec2(b, 1 - 2 * b)};
        r.weights = {wa, wa, wa, wb, wb, wb};
        r.order = 4;
    } else {
        int n = (order + 2 + 1) / 2;
        QuadRule g = gauss_legendre(n);
        for (std::size_t i = 0; i < g.size(); ++i) {
            double u = g.points[i].x();
            for (std::size_t j = 0; j < g.size(); ++j) {
                double v = g.points[j].x();
                r.points.emplace_back(u, (1.0 - u) * v);
                r.weights.push_back(g.weights[i] * g.weights[j] * (1.0 - u));
            }
        }
    }
    return r;
}

}  // namespace

QuadRule gauss_legendre(int n) {
    if (n < 1 || n > 64) throw ConfigError("gauss_legendre: unsupported point count " + std::to_string(n));
    static std::mutex mtx;
    static std::map<int, QuadRule> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    QuadRule r;
    if (n == 1) {
        r.points = {Vec2(0.5, 0.0)};
        r.weights = {1.0};
        r.order = 1;
    } else {
        r = compute_gauss_legendre(n);
    }
    cache.emplace(n, r);
    return r;
}

QuadRule gauss_rule(int order, Element element) {
    if (order < 1) throw ConfigError("gauss_rule: order must be >= 1");
    if (element == Element::Segment) {
        if (order > 127) throw ConfigError("gauss_rule: unsupported segment order " + std::to_string(order));
        QuadRule r = gauss_legendre((order + 2) / 2);
        return r;
    }
    if (order > 60) throw ConfigError("gauss_rule: unsupported triangle order " + std::to_string(order));
    return triangle_rule(order);
}

QuadRule graded_segment_rule(int n_points, int levels, double ratio) {
    if (levels < 0 || ratio <= 0.0 || ratio >= 0.5) throw ConfigError("graded_segment_rule: bad grading");
    std::vector<double> breaks{0.0};
    for (int l = levels; l >= 1; --l) breaks.push_back(std::pow(ratio, l));
    for (int l = 1; l <= levels; ++l) breaks.push_back(1.0 - std::pow(ratio, l));
    breaks.push_back(1.0);
    QuadRule g = gauss_legendre(n_points);
    QuadRule r;
    r.order = g.order;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        double a = breaks[k], len = breaks[k + 1] - breaks[k];
        for (std::size_t i = 0; i < g.size(); ++i) {
            r.points.emplace_back(a + len * g.points[i].x(), 0.0);
            r.weights.push_back(len * g.weights[i]);
        }
    }
    return r;
}

QuadRule duffy_rule(int n_points) {
    QuadRule g = gauss_legendre(n_points);
    QuadRule r;
    r.order = g.order - 1;
    for (std::size_t i = 0; i < g.size(); ++i) {
        double u = g.points[i].x();
        for (std::size_t j = 0; j < g.size(); ++j) {
            double v = g.points[j].x();
            r.points.emplace_back(u * (1.0 - v), u * v);
            r.weights.push_back(g.weights[i] * g.weights[j] * u);
        }
    }
    return r;
}

Vec solve_spd(const SparseSystem& system, double tol) {
    const SpMat& A = system.A;
    if (A.rows() != A.cols() || A.rows() != system.b.size())
        throw ConfigError("solve_spd: dimension mismatch");
    double bnorm = system.b.norm();
    if (bnorm == 0.0) return Vec::Zero(system.b.size());
    Eigen::SimplicialLLT<SpMat> llt(A);
    if (llt.info() != Eigen::Success) throw SolverError("solve_spd: Cholesky factorization failed (matrix not SPD)");
    Vec x = llt.solve(system.b);
    Vec r = system.b - A * x;
    for (int it = 0; it < 3 && r.norm() > tol * bnorm; ++it) {
        x += llt.solve(r);
        r = system.b - A * x;
    }
    double rel = r.norm() / bnorm;
    if (!(rel <= tol)) {
        std::ostringstream os;
        os << "solve_spd: relative residual " << rel << " above tolerance " << tol;
        throw SolverError(os.str());
    }
    return x;
}

SaddleSolution solve_saddle_dense(const Mat& A, const Mat& B, const Vec& f, const Vec& g, const Mat& C) {
    const Eigen::Index n = A.rows(), m = B.rows();
    if (A.cols() != n || (m > 0 && B.cols() != n) || f.size() != n || g.size() != m)
        throw ConfigError("solve_saddle_dense: dimension mismatch");
    if (C.size() != 0 && (C.rows() != m || C.cols() != m))
        throw ConfigError("solve_saddle_dense: C has wrong size");
    Mat M = Mat::Zero(n + m, n + m);
    M.topLeftCorner(n, n) = A;
    if (m > 0) {
        M.topRightCorner(n, m) = B.transpose();
        M.bottomLeftCorner(m, n) = B;
        if (C.size() != 0) M.bottomRightCorner(m, m) = C;
    }
    Vec rhs(n + m);
    rhs << f, g;
    Eigen::FullPivLU<Mat> lu(M);
    double scale = M.cwiseAbs().maxCoeff();
    lu.setThreshold(1e-13);
    if (scale == 0.0 || !lu.isInvertible()) throw SolverError("solve_saddle_dense: singular block system");
    Vec x = lu.solve(rhs);
    return {x.head(n), x.tail(m)};
}

}  // namespace fembem
