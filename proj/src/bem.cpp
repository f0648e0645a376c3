#include "fembem/bem.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "fembem/errors.hpp"

namespace fembem {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInv2Pi = 1.0 / (2.0 * kPi);
constexpr double kInv4Pi = 1.0 / (4.0 * kPi);

double xlog(double c, double r2) { return r2 > 0.0 ? c * std::log(r2) : 0.0; }
double safe_log(double r2) { return r2 > 0.0 ? std::log(r2) : 0.0; }

// Outer rule on [0,1] graded by halving toward s=0 (singular endpoint).
const QuadRule& graded_toward_zero() {
    static const QuadRule rule = [] {
        const int levels = 48;
        QuadRule g = gauss_legendre(8);
        QuadRule r;
        r.order = g.order;
        double hi = 1.0;
        for (int l = 0; l <= levels; ++l) {
            double lo = (l == levels) ? 0.0 : 0.5 * hi;
            for (std::size_t i = 0; i < g.size(); ++i) {
                r.points.emplace_back(lo + (hi - lo) * g.points[i].x(), 0.0);
                r.weights.push_back((hi - lo) * g.weights[i]);
            }
            hi = lo;
        }
        return r;
    }();
    return rule;
}

const QuadRule& gauss8() {
    static const QuadRule rule = gauss_legendre(8);
    return rule;
}

double point_segment_distance(const Vec2& x, const Panel& p) {
    double s = std::clamp((x - p.a).dot(p.t), 0.0, p.L);
    return (x - (p.a + s * p.t)).norm();
}

double panel_distance(const Panel& F, const Panel& E) {
    return std::min({point_segment_distance(F.a, E), point_segment_distance(F.b, E),
                     point_segment_distance(E.a, F), point_segment_distance(E.b, F)});
}

bool same_point(const Vec2& p, const Vec2& q) { return p.x() == q.x() && p.y() == q.y(); }

// Integrates f(s) over [s0,s1] of panel F (parameter in [0,1] of F), bisecting
// while the sub-panel is closer to E than its own length.
template <class Fn>
void integrate_near(const Panel& F, const Panel& E, double s0, double s1, int depth, Fn&& f) {
    Panel sub(F.at(s0), F.at(s1));
    if (depth < 16 && panel_distance(sub, E) < 1.0 * sub.L) {
        double sm = 0.5 * (s0 + s1);
        integrate_near(F, E, s0, sm, depth + 1, f);
        integrate_near(F, E, sm, s1, depth + 1, f);
        return;
    }
    const QuadRule& g = gauss8();
    for (std::size_t i = 0; i < g.size(); ++i) {
        double s = s0 + (s1 - s0) * g.points[i].x();
        f(s, (s1 - s0) * g.weights[i] * F.L);
    }
}

// Calls f(s, w) for an outer rule on F adapted to the source panel E.
// Returns false if F and E are the same panel (caller handles it).
template <class Fn>
bool outer_rule(const Panel& F, const Panel& E, Fn&& f) {
    bool sa = same_point(F.a, E.a) || same_point(F.a, E.b);
    bool sb = same_point(F.b, E.a) || same_point(F.b, E.b);
    if (sa && sb) return false;
    if (sa || sb) {
        const QuadRule& g = graded_toward_zero();
        for (std::size_t i = 0; i < g.size(); ++i) {
            double u = g.points[i].x();
            f(sa ? u : 1.0 - u, g.weights[i] * F.L);
        }
        return true;
    }
    integrate_near(F, E, 0.0, 1.0, 0, f);
    return true;
}

}  // namespace

Panel::Panel(const Vec2& a_, const Vec2& b_) : a(a_), b(b_) {
    Vec2 d = b - a;
    L = d.norm();
    if (!(L > 0.0)) throw GeometryError("degenerate boundary panel");
    t = d / L;
    n = Vec2(t.y(), -t.x());
}

namespace {

// Far from the panel the closed forms cancel (xi theta against eta log(r1/r0) loses
// (r/L)^2 digits). Beyond 30 L the kernel is smooth enough for 4-point Gauss to be exact
// to rounding (error ~ (L / 4r)^8).
PanelValues panel_integrals_far(const Panel& p, const Vec2& x, bool gradients) {
    static const QuadRule g = gauss_legendre(4);
    PanelValues v;
    for (std::size_t q = 0; q < g.size(); ++q) {
        const double s = g.points[q].x(), w = g.weights[q] * p.L;
        const Vec2 r = x - (p.a + s * p.L * p.t);
        const double r2 = r.squaredNorm(), rn = r.dot(p.n);
        const double k = kInv2Pi * rn / r2;
        v.S -= w * kInv4Pi * std::log(r2);
        v.D0 += w * (1.0 - s) * k;
        v.D1 += w * s * k;
        if (gradients) {
            v.gradS -= w * kInv2Pi * r / r2;
            const Vec2 gk = kInv2Pi * (p.n / r2 - 2.0 * rn * r / (r2 * r2));
            v.gradD0 += w * (1.0 - s) * gk;
            v.gradD1 += w * s * gk;
        }
    }
    return v;
}

}  // namespace

PanelValues panel_integrals(const Panel& p, const Vec2& x, bool own, bool gradients) {
    const Vec2 d = x - p.a;
    const double L = p.L;
    if (!own && (x - p.a - 0.5 * L * p.t).squaredNorm() > 900.0 * L * L) return panel_integrals_far(p, x, gradients);
    const double xi = d.dot(p.t);
    const double eta = own ? 0.0 : d.dot(p.n);
    const double r0 = xi * xi + eta * eta;
    const double r1 = (xi - L) * (xi - L) + eta * eta;
    const double theta = own ? 0.0 : std::atan2(eta * L, xi * (xi - L) + eta * eta);
    const double ln0 = safe_log(r0), ln1 = safe_log(r1);

    PanelValues v;
    v.S = -kInv2Pi * (0.5 * xlog(L - xi, r1) + 0.5 * xlog(xi, r0) - L + eta * theta);
    if (!own) {
        const double A0 = theta;
        const double A1 = xi * theta + 0.5 * eta * (ln1 - ln0);
        v.D1 = kInv2Pi * A1 / L;
        v.D0 = kInv2Pi * A0 - v.D1;
    }
    if (gradients) {
        const double dSxi = kInv4Pi * (ln1 - ln0);
        const double dSeta = -kInv2Pi * theta;
        v.gradS = dSxi * p.t + dSeta * p.n;
        if (!own) {
            const double dA0xi = eta / r0 - eta / r1;
            const double dA0eta = -(L - xi) / r1 - xi / r0;
            const double dA1xi = theta - eta * L / r1;
            const double dA1eta = 0.5 * (ln1 - ln0) - L * (L - xi) / r1;
            Vec2 gA0 = dA0xi * p.t + dA0eta * p.n;
            Vec2 gA1 = dA1xi * p.t + dA1eta * p.n;
            v.gradD1 = kInv2Pi * gA1 / L;
            v.gradD0 = kInv2Pi * gA0 - v.gradD1;
        }
    }
    return v;
}

std::vector<Panel> panels(const BoundaryMesh& bmesh) {
    std::vector<Panel> out;
    out.reserve(bmesh.size());
    for (std::size_t i = 0; i < bmesh.size(); ++i) out.emplace_back(bmesh.start(static_cast<int>(i)), bmesh.end(static_cast<int>(i)));
    return out;
}

double single_layer_pair(const Panel& F, const Panel& E) {
    double sum = 0.0;
    bool distinct = outer_rule(F, E, [&](double s, double w) { sum += w * panel_integrals(E, F.at(s), false, false).S; });
    if (!distinct) return F.L * F.L * kInv2Pi * (1.5 - std::log(F.L));
    return sum;
}

std::array<double, 2> double_layer_pair(const Panel& F, const Panel& E) {
    std::array<double, 2> sum{0.0, 0.0};
    outer_rule(F, E, [&](double s, double w) {
        PanelValues v = panel_integrals(E, F.at(s), false, false);
        sum[0] += w * v.D0;
        sum[1] += w * v.D1;
    });
    return sum;
}

std::array<double, 2> adjoint_pair(const Panel& F, const Panel& E) {
    std::array<double, 2> sum{0.0, 0.0};
    outer_rule(F, E, [&](double s, double w) {
        PanelValues v = panel_integrals(E, F.at(s), false, true);
        double k = v.gradS.dot(F.n);
        sum[0] += w * (1.0 - s) * k;
        sum[1] += w * s * k;
    });
    return sum;
}

BoundaryOperatorSet assemble_operators(const BoundaryMesh& bmesh, bool with_adjoint) {
    const int n = static_cast<int>(bmesh.size());
    if (n < 3) throw GeometryError("assemble_operators: boundary needs at least 3 segments");
    if (!(bmesh.diameter() < 1.0))
        throw PreconditionError("assemble_operators: diam(Omega) >= 1, single-layer operator not elliptic");
    std::vector<Panel> P = panels(bmesh);
    BoundaryOperatorSet ops;
    ops.lengths.resize(n);
    for (int i = 0; i < n; ++i) ops.lengths(i) = P[i].L;
    ops.V = Mat::Zero(n, n);
    ops.K = Mat::Zero(n, n);
    ops.Kloc[0] = Mat::Zero(n, n);
    ops.Kloc[1] = Mat::Zero(n, n);
    ops.Kp = Mat::Zero(n, n);
    ops.M = Mat::Zero(n, n);
    ops.D = Mat::Zero(n, n);

    for (int f = 0; f < n; ++f) {
        const Panel& F = P[f];
        for (int e = 0; e < n; ++e) {
            const Panel& E = P[e];
            if (e == f) {
                ops.V(f, e) = F.L * F.L * kInv2Pi * (1.5 - std::log(F.L));
                continue;
            }
            double vs = 0.0, d0 = 0.0, d1 = 0.0, a0 = 0.0, a1 = 0.0;
            outer_rule(F, E, [&](double s, double w) {
                PanelValues v = panel_integrals(E, F.at(s), false, with_adjoint);
                vs += w * v.S;
                d0 += w * v.D0;
                d1 += w * v.D1;
                if (with_adjoint) {
                    double k = v.gradS.dot(F.n);
                    a0 += w * (1.0 - s) * k;
                    a1 += w * s * k;
                }
            });
            ops.V(f, e) = vs;
            ops.Kloc[0](f, e) = d0;
            ops.Kloc[1](f, e) = d1;
            // node f is the start of panel f, node f+1 its end
            ops.Kp(f, e) += a0;
            ops.Kp(bmesh.next(f), e) += a1;
        }
    }
    ops.V = 0.5 * (ops.V + ops.V.transpose()).eval();
    for (int f = 0; f < n; ++f)
        for (int e = 0; e < n; ++e) {
            ops.K(f, e) += ops.Kloc[0](f, e);
            ops.K(f, bmesh.next(e)) += ops.Kloc[1](f, e);
        }
    for (int f = 0; f < n; ++f) {
        ops.M(f, f) += 0.5 * P[f].L;
        ops.M(f, bmesh.next(f)) += 0.5 * P[f].L;
        ops.D(f, f) = -1.0 / P[f].L;
        ops.D(f, bmesh.next(f)) = 1.0 / P[f].L;
    }
    ops.W = ops.D.transpose() * ops.V * ops.D;
    if (!with_adjoint) ops.Kp = ops.K.transpose();
    return ops;
}

double eval_single_layer(const BoundaryMesh& bmesh, const Vec& density, const Vec2& x) {
    if (density.size() != static_cast<Eigen::Index>(bmesh.size())) throw ConfigError("eval_single_layer: size mismatch");
    double sum = 0.0;
    for (std::size_t e = 0; e < bmesh.size(); ++e) {
        if (density(e) == 0.0) continue;
        Panel p(bmesh.start(static_cast<int>(e)), bmesh.end(static_cast<int>(e)));
        sum += density(e) * panel_integrals(p, x, false, false).S;
    }
    return sum;
}

Vec2 eval_single_layer_gradient(const BoundaryMesh& bmesh, const Vec& density, const Vec2& x) {
    Vec2 sum = Vec2::Zero();
    for (std::size_t e = 0; e < bmesh.size(); ++e) {
        Panel p(bmesh.start(static_cast<int>(e)), bmesh.end(static_cast<int>(e)));
        sum += density(e) * panel_integrals(p, x, false, true).gradS;
    }
    return sum;
}

namespace {
void check_off_boundary(const BoundaryMesh& bmesh, const Vec2& x) {
    for (std::size_t e = 0; e < bmesh.size(); ++e) {
        Panel p(bmesh.start(static_cast<int>(e)), bmesh.end(static_cast<int>(e)));
        if (point_segment_distance(x, p) <= 1e-14 * p.L)
            throw DomainError("double-layer potential evaluated on the boundary");
    }
}
}  // namespace

double eval_double_layer(const BoundaryMesh& bmesh, const Vec& trace, const Vec2& x) {
    if (trace.size() != static_cast<Eigen::Index>(bmesh.size())) throw ConfigError("eval_double_layer: size mismatch");
    check_off_boundary(bmesh, x);
    double sum = 0.0;
    for (std::size_t e = 0; e < bmesh.size(); ++e) {
        int i = static_cast<int>(e);
        Panel p(bmesh.start(i), bmesh.end(i));
        PanelValues v = panel_integrals(p, x, false, false);
        sum += trace(i) * v.D0 + trace(bmesh.next(i)) * v.D1;
    }
    return sum;
}

Vec2 eval_double_layer_gradient(const BoundaryMesh& bmesh, const Vec& trace, const Vec2& x) {
    check_off_boundary(bmesh, x);
    Vec2 sum = Vec2::Zero();
    for (std::size_t e = 0; e < bmesh.size(); ++e) {
        int i = static_cast<int>(e);
        Panel p(bmesh.start(i), bmesh.end(i));
        PanelValues v = panel_integrals(p, x, false, true);
        sum += trace(i) * v.gradD0 + trace(bmesh.next(i)) * v.gradD1;
    }
    return sum;
}

Vec steklov_apply(const BoundaryOperatorSet& ops, Side which, const Vec& g) {
    Eigen::LLT<Mat> llt(ops.V);
    if (llt.info() != Eigen::Success) throw SolverError("steklov_apply: V is not positive definite");
    double sign = which == Side::Interior ? 0.5 : -0.5;
    return llt.solve(ops.K * g + sign * (ops.M * g));
}

Mat boundary_layer_values(const BoundaryMesh& src, const Vec& t, const Vec& psi,
                          const std::vector<BoundaryPoint>& points) {
    const int n = static_cast<int>(src.size());
    if (t.size() != n || psi.size() != n) throw ConfigError("boundary_layer_values: size mismatch");
    std::vector<Panel> P = panels(src);
    Vec dt(n);
    for (int e = 0; e < n; ++e) dt(e) = (t(src.next(e)) - t(e)) / P[e].L;
    Mat out = Mat::Zero(static_cast<Eigen::Index>(points.size()), 6);
    for (std::size_t k = 0; k < points.size(); ++k) {
        const int own = points[k].seg;
        const double s = points[k].s;
        if (!(s > 0.0 && s < 1.0))
            throw DomainError("boundary_layer_values: evaluation point on a panel endpoint");
        const Panel& O = P[own];
        const Vec2 x = O.at(s);
        double v = 0.0, dv = 0.0, kp = 0.0, kt = 0.0, dkt = 0.0, dvt = 0.0;
        for (int e = 0; e < n; ++e) {
            const bool is_own = e == own;
            PanelValues pv = panel_integrals(P[e], x, is_own, true);
            const double gs_t = pv.gradS.dot(O.t);
            v += psi(e) * pv.S;
            dv += psi(e) * gs_t;
            dvt += dt(e) * gs_t;
            if (!is_own) {
                kp += psi(e) * pv.gradS.dot(O.n);
                const double t0 = t(e), t1 = t(src.next(e));
                kt += t0 * pv.D0 + t1 * pv.D1;
                dkt += (t0 * pv.gradD0 + t1 * pv.gradD1).dot(O.t);
            }
        }
        const double tx = (1.0 - s) * t(own) + s * t(src.next(own));
        out(k, 0) = v;
        out(k, 1) = dv;
        out(k, 2) = kp;
        out(k, 3) = kt - 0.5 * tx;
        out(k, 4) = dkt - 0.5 * dt(own);
        out(k, 5) = -dvt;
    }
    return out;
}

Mat boundary_node_values(const BoundaryMesh& src, const Vec& t, const Vec& psi) {
    const int n = static_cast<int>(src.size());
    if (t.size() != n || psi.size() != n) throw ConfigError("boundary_node_values: size mismatch");
    std::vector<Panel> P = panels(src);
    Mat out = Mat::Zero(n, 2);
    for (int z = 0; z < n; ++z) {
        const Vec2 x = src.points[z];
        const int before = src.prev(z);
        double v = 0.0, kt = 0.0;
        for (int e = 0; e < n; ++e) {
            const bool incident = e == z || e == before;
            PanelValues pv = panel_integrals(P[e], x, incident, false);
            v += psi(e) * pv.S;
            if (!incident) kt += (t(e) - t(z)) * pv.D0 + (t(src.next(e)) - t(z)) * pv.D1;
        }
        out(z, 0) = v;
        out(z, 1) = kt - t(z);
    }
    return out;
}

void write_matrix(const Mat& A, std::ostream& os) {
    os << std::scientific << std::setprecision(16);
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        for (Eigen::Index j = 0; j < A.cols(); ++j) os << (j ? " " : "") << A(i, j);
        os << '\n';
    }
}

}  // namespace fembem
