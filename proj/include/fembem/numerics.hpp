#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <utility>
#include <vector>

namespace fembem {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

enum class Element { Segment, Triangle };

// Reference segment is [0,1] (points use the x component), reference triangle
// is conv{(0,0),(1,0),(0,1)}.
struct QuadRule {
    std::vector<Vec2> points;
    std::vector<double> weights;
    int order = 0;

    std::size_t size() const { return weights.size(); }
};

QuadRule gauss_rule(int order, Element element);

// n-point Gauss-Legendre rule on [0,1].
QuadRule gauss_legendre(int n);

// Composite rule on [0,1] graded geometrically toward both endpoints.
// Suited for integrands with logarithmic endpoint singularities.
QuadRule graded_segment_rule(int n_points, int levels, double ratio = 0.15);

// Collapsed tensor rule on the reference triangle with the degenerate edge
// mapped onto vertex (0,0); removes r^-1 type singularities at that vertex.
QuadRule duffy_rule(int n_points);

struct SparseSystem {
    SpMat A;
    Vec b;
};

Vec solve_spd(const SparseSystem& system, double tol = 1e-10);

struct SaddleSolution {
    Vec primal;
    Vec multiplier;
};

// Solves [[A, B^T], [B, C]] (x, y) = (f, g) by full-pivot LU.
// An empty C means the zero block.
SaddleSolution solve_saddle_dense(const Mat& A, const Mat& B, const Vec& f, const Vec& g,
                                  const Mat& C = Mat());

}  // namespace fembem
