#include <doctest.h>

#include <cmath>
#include <random>

#include "fembem/errors.hpp"
#include "fembem/experiments.hpp"
#include "fembem/fem.hpp"
#include "fembem/mesh.hpp"

using namespace fembem;

namespace {

Mesh2D reference_triangle() {
    return make_mesh({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}, {Region::Interior});
}

int find_vertex(const Mesh2D& m, const Vec2& x) {
    for (std::size_t v = 0; v < m.num_vertices(); ++v)
        if ((m.vertices[v] - x).norm() < 1e-14) return static_cast<int>(v);
    return -1;
}

// P1 stiffness built from barycentric gradients, independent of element_stiffness.
Mat oracle_stiffness(const Mesh2D& m, int t, const Mat2& A) {
    auto G = barycentric_gradients(m, t);
    Mat K(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) K(i, j) = triangle_area(m, t) * G.col(i).dot(A * G.col(j));
    return K;
}

// Normal traces (lo, hi) of a vector field at the endpoints of every edge.
BdmField interpolate_bdm(const Mesh2D& m, const MeshTopology& topo, const std::function<Vec2(const Vec2&)>& v) {
    BdmField f;
    f.coeffs = Mat::Zero(static_cast<Eigen::Index>(topo.edges.size()), 2);
    for (std::size_t e = 0; e < topo.edges.size(); ++e) {
        Vec2 a = m.vertices[topo.edges[e][0]], b = m.vertices[topo.edges[e][1]];
        Vec2 t = (b - a).normalized(), n(t.y(), -t.x());
        f.coeffs(static_cast<Eigen::Index>(e), 0) = v(a).dot(n);
        f.coeffs(static_cast<Eigen::Index>(e), 1) = v(b).dot(n);
    }
    return f;
}

}  // namespace

TEST_CASE("element stiffness on the reference triangle") {
    Mesh2D m = reference_triangle();
    Mat K = Mat(assemble_stiffness(m, 1, DiffusionOp::constant(Mat2::Identity(), 1.0, 1.0)));  // global = vertex order
    Mat expected(3, 3);
    expected << 1, -0.5, -0.5, -0.5, 0.5, 0, -0.5, 0, 0.5;
    CHECK((K - expected).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(K.rowwise().sum().cwiseAbs().maxCoeff() < 1e-15);

    Mat2 aniso = Vec2(0.01, 100.0).asDiagonal();
    Mat Ka = element_stiffness(m, 0, 1, aniso);
    CHECK((Ka - oracle_stiffness(m, 0, aniso)).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(Ka.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);

    Mat K2 = element_stiffness(m, 0, 2, Mat2::Identity());
    CHECK(K2.rows() == 6);
    CHECK(K2.rowwise().sum().cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("frozen coefficient of the radial diffusion") {
    DiffusionOp d = build_problem("zshape_nonlinear").diffusion;
    CHECK_FALSE(d.linear);
    CHECK(d.mu(1.0) == doctest::Approx(2.5));
    CHECK((d.frozen(Vec2(1, 0)) - 2.5 * Mat2::Identity()).norm() < 1e-15);

    Mesh2D m = reference_triangle();
    FemFunction lin{1, Vec(3)};
    for (int v = 0; v < 3; ++v) lin.values(v) = m.vertices[v].x();  // gradient (1, 0)
    Mat S = Mat(assemble_stiffness(m, 1, d, &lin));
    Mat I = Mat(assemble_stiffness(m, 1, DiffusionOp::constant(Mat2::Identity(), 1.0, 1.0)));
    CHECK((S - 2.5 * I).cwiseAbs().maxCoeff() < 1e-14);
    CHECK_THROWS(assemble_stiffness(m, 1, d));
}

TEST_CASE("monotonicity and Lipschitz constants by sampling") {
    std::mt19937 rng(1);
    std::normal_distribution<double> nd(0.0, 3.0);
    for (const auto& id : problem_ids()) {
        DiffusionOp d = build_problem(id).diffusion;
        for (int i = 0; i < 1000; ++i) {
            Vec2 x(nd(rng), nd(rng)), y(nd(rng), nd(rng));
            if (i % 10 == 0) y = x + 1e-3 * Vec2(nd(rng), nd(rng));
            Vec2 dx = x - y, dA = d.apply(x) - d.apply(y);
            CHECK(dA.dot(dx) >= d.c_mon * dx.squaredNorm() * (1 - 1e-12));
            CHECK(dA.norm() <= d.c_lip * dx.norm() * (1 + 1e-12));
        }
    }
}

TEST_CASE("Jacobian of the nonlinear operator by finite differences") {
    DiffusionOp d = build_problem("zshape_nonlinear").diffusion;
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> ud(-1, 1);
    for (int i = 0; i < 50; ++i) {
        Vec2 g(ud(rng), ud(rng));
        Mat2 J = d.jacobian(g);
        for (int k = 0; k < 2; ++k) {
            Vec2 e = Vec2::Zero();
            e(k) = 1e-6;
            Vec2 fd = (d.apply(g + e) - d.apply(g - e)) / 2e-6;
            CHECK((fd - J.col(k)).norm() < 1e-5);
        }
    }
    Mesh2D m = build_initial_mesh("zshape_nonlinear", Variant::Interior);
    Vec u(static_cast<Eigen::Index>(m.num_vertices()));
    for (Eigen::Index v = 0; v < u.size(); ++v) u(v) = std::sin(3 * m.vertices[v].x()) + m.vertices[v].y();
    Mat J = Mat(assemble_jacobian(m, d, u));
    CHECK((J - J.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Vec dir = Vec::Random(u.size());
    Vec fd = (assemble_operator(m, d, u + 1e-6 * dir) - assemble_operator(m, d, u - 1e-6 * dir)) / 2e-6;
    CHECK((fd - J * dir).lpNorm<Eigen::Infinity>() < 1e-5);
}

TEST_CASE("load vectors") {
    Mesh2D m = reference_triangle();
    Vec one = assemble_load(m, 1, [](const Vec2&) { return 1.0; });
    for (int i = 0; i < 3; ++i) CHECK(one(i) == doctest::Approx(0.5 / 3.0));
    CHECK(assemble_load(m, 1, [](const Vec2&) { return 0.0; }).norm() == 0.0);
    Vec x = assemble_load(m, 1, [](const Vec2& p) { return p.x(); });
    CHECK(std::abs(x(0) - 1.0 / 24) < 1e-15);
    CHECK(std::abs(x(1) - 1.0 / 12) < 1e-15);
    CHECK(std::abs(x(2) - 1.0 / 24) < 1e-15);
}

TEST_CASE("P2 gradient norms are exact for quadratics") {
    Mesh2D m = build_initial_mesh("square_linear", Variant::Interior);
    MeshTopology topo = build_topology(m);
    FemFunction w{2, Vec(num_dofs(m, topo, 2))};
    const int nv = static_cast<int>(m.num_vertices());
    auto f = [](const Vec2& p) { return p.x() * p.x(); };
    for (int v = 0; v < nv; ++v) w.values(v) = f(m.vertices[v]);
    for (std::size_t e = 0; e < topo.edges.size(); ++e)
        w.values(nv + static_cast<int>(e)) = f(0.5 * (m.vertices[topo.edges[e][0]] + m.vertices[topo.edges[e][1]]));
    double s = 0.0;
    for (double n : element_gradient_norms(m, topo, w)) s += n * n;
    CHECK(std::abs(s - 1.0 / 48.0) < 1e-15);
}

TEST_CASE("BDM1 reproduces linear fields") {
    Mesh2D m = build_initial_mesh("lshape_linear", Variant::Interior);
    MeshTopology topo = build_topology(m);
    auto lin = [](const Vec2& p) { return Vec2(2 * p.x() - p.y() + 0.3, 0.5 * p.x() + 3 * p.y()); };
    BdmField f = interpolate_bdm(m, topo, lin);
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> ud(0, 1);
    for (int t = 0; t < static_cast<int>(m.num_triangles()); ++t) {
        BdmElement el = bdm_element(m, topo, t);
        CHECK(std::abs(bdm_divergence(el, f) - 5.0) < 1e-11);
        double a = ud(rng), b = ud(rng) * (1 - a);
        Eigen::Vector3d l(1 - a - b, a, b);
        Vec2 x = l(0) * m.vertices[m.triangles[t][0]] + l(1) * m.vertices[m.triangles[t][1]] + l(2) * m.vertices[m.triangles[t][2]];
        CHECK((bdm_eval(el, f, l) - lin(x)).norm() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> es(el.mass());
        CHECK(es.eigenvalues()(0) > 0.0);
    }
}

TEST_CASE("local flux: zero data give zero") {
    Mesh2D m = build_initial_mesh("square_linear", Variant::Interior);
    MeshTopology topo = build_topology(m);
    DiffusionOp id = DiffusionOp::constant(Mat2::Identity(), 1.0, 1.0);
    auto loads = element_loads(m, [](const Vec2&) { return 0.0; });
    Vec u = Vec::Zero(static_cast<Eigen::Index>(m.num_vertices()));
    std::vector<LocalFlux> locals;
    for (int z = 0; z < static_cast<int>(m.num_vertices()); ++z) {
        LocalFlux lf = local_equilibrated_flux(m, topo, z, u, id, loads, {});
        CHECK(lf.coeffs.cwiseAbs().maxCoeff() == 0.0);
        CHECK(lf.p.cwiseAbs().maxCoeff() == 0.0);
        locals.push_back(lf);
    }
    std::vector<double> zero(m.num_triangles(), 0.0);
    FluxCheck check;
    BdmField s = sum_local_fluxes(m, topo, locals, zero, {}, {}, true, &check);
    CHECK(s.coeffs.cwiseAbs().maxCoeff() == 0.0);
    CHECK(check.divergence_deviation == 0.0);
}

TEST_CASE("local flux for a linear function at an interior vertex") {
    Mesh2D m = build_initial_mesh("square_linear", Variant::Interior);
    m = refine_nvb(m, {0, 1, 2, 3});
    MeshTopology topo = build_topology(m);
    DiffusionOp id = DiffusionOp::constant(Mat2::Identity(), 1.0, 1.0);
    auto loads = element_loads(m, [](const Vec2&) { return 0.0; });
    Vec u(static_cast<Eigen::Index>(m.num_vertices()));
    Vec2 g(0.7, -1.3);
    for (Eigen::Index v = 0; v < u.size(); ++v) u(v) = g.dot(m.vertices[v]);
    int z = find_vertex(m, Vec2(0, 0));
    REQUIRE(z >= 0);
    LocalFlux lf = local_equilibrated_flux(m, topo, z, u, id, loads, {});
    for (std::size_t r = 0; r < lf.triangles.size(); ++r) {
        int t = lf.triangles[r];
        int zl = 0;
        while (m.triangles[t][zl] != z) ++zl;
        CHECK(std::abs(lf.div[r] - barycentric_gradients(m, t).col(zl).dot(g)) < 1e-12);
    }
    // compatible data: the multiplier has zero mean
    double pm = 0.0;
    for (std::size_t r = 0; r < lf.triangles.size(); ++r) pm += lf.p(r) * triangle_area(m, lf.triangles[r]);
    CHECK(std::abs(pm) < 1e-13);
}

TEST_CASE("local flux is solvable for incompatible data") {
    Mesh2D m = build_initial_mesh("square_linear", Variant::Interior);
    MeshTopology topo = build_topology(m);
    DiffusionOp id = DiffusionOp::constant(Mat2::Identity(), 1.0, 1.0);
    auto loads = element_loads(m, [](const Vec2&) { return 1.0; });
    Vec u = Vec::Zero(static_cast<Eigen::Index>(m.num_vertices()));
    int z = find_vertex(m, Vec2(0, 0));
    LocalFlux lf;
    CHECK_NOTHROW(lf = local_equilibrated_flux(m, topo, z, u, id, loads, {}));
    // div sigma^z = -Q(f zeta_z) - <p,1> on every triangle
    double pm = 0.0;
    for (std::size_t r = 0; r < lf.triangles.size(); ++r) {
        pm += lf.p(r) * triangle_area(m, lf.triangles[r]);
    }
    for (std::size_t r = 0; r < lf.triangles.size(); ++r)
        CHECK(std::abs(lf.div[r] + 1.0 / 3.0 + pm) < 1e-12);
}

TEST_CASE("local flux is scale invariant") {
    // same patch scaled by 1e-4: the traces scale like the gradient, i.e. by 1e4 for u fixed
    Mesh2D m = build_initial_mesh("square_linear", Variant::Interior);
    Mesh2D s = m;
    for (auto& v : s.vertices) v *= 1e-4;
    MeshTopology tm = build_topology(m), ts = build_topology(s);
    DiffusionOp id = DiffusionOp::constant(Mat2::Identity(), 1.0, 1.0);
    Vec u(static_cast<Eigen::Index>(m.num_vertices()));
    for (Eigen::Index v = 0; v < u.size(); ++v) u(v) = std::cos(4 * m.vertices[v].x()) * m.vertices[v].y();
    auto lm = element_loads(m, [](const Vec2&) { return 0.0; });
    int z = find_vertex(m, Vec2(0, 0));
    LocalFlux a = local_equilibrated_flux(m, tm, z, u, id, lm, {});
    LocalFlux b = local_equilibrated_flux(s, ts, z, u, id, lm, {});
    CHECK((1e-4 * b.coeffs - a.coeffs).cwiseAbs().maxCoeff() < 1e-10 * a.coeffs.cwiseAbs().maxCoeff());
}

TEST_CASE("patch potentials") {
    Mesh2D m = build_initial_mesh("square_linear", Variant::Interior);
    m = refine_nvb(m, {0, 5});
    MeshTopology topo = build_topology(m);
    const Eigen::Index nv = static_cast<Eigen::Index>(m.num_vertices());
    int z = find_vertex(m, Vec2(0, 0));
    Patch p = k_patch(m, topo, z, 1);
    std::vector<char> all_edges(topo.edges.size(), 1);

    SUBCASE("zero data") {
        PatchPotential w = local_patch_potential(m, topo, p, all_edges, Vec::Ones(nv), Vec::Zero(nv));
        CHECK(w.values.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("constant data on the whole patch boundary") {
        PatchPotential w = local_patch_potential(m, topo, p, all_edges, Vec::Ones(nv), Vec::Constant(nv, 2.5));
        CHECK((w.values.array() - 2.5).abs().maxCoeff() < 1e-13);
        CHECK(w.interior_residual < 1e-12);
    }
    SUBCASE("single interior node, P1") {
        Vec jg(nv);
        for (Eigen::Index v = 0; v < nv; ++v) jg(v) = m.vertices[v].x() + 2 * m.vertices[v].y() * m.vertices[v].y();
        PatchPotential w = local_patch_potential(m, topo, p, all_edges, Vec::Ones(nv), jg, 1);
        double kzz = 0.0, rhs = 0.0;
        for (int t : p.triangles) {
            Mat K = oracle_stiffness(m, t, Mat2::Identity());
            int zl = 0;
            while (m.triangles[t][zl] != z) ++zl;
            kzz += K(zl, zl);
            for (int j = 0; j < 3; ++j)
                if (j != zl) rhs -= K(zl, j) * jg(m.triangles[t][j]);
        }
        int pos = static_cast<int>(std::lower_bound(w.dofs.begin(), w.dofs.end(), z) - w.dofs.begin());
        CHECK(std::abs(w.values(pos) - rhs / kzz) < 1e-14);
    }
}
