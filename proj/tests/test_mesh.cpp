#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "fembem/errors.hpp"
#include "fembem/experiments.hpp"
#include "fembem/mesh.hpp"

using namespace fembem;

namespace {

Mesh2D two_triangle_square() {
    std::vector<Vec2> v{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    return make_mesh(v, {{0, 1, 2}, {0, 2, 3}}, {Region::Interior, Region::Interior});
}

std::vector<int> all_triangles(const Mesh2D& m) {
    std::vector<int> all(m.num_triangles());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return all;
}

double total_area(const Mesh2D& m) {
    double a = 0.0;
    for (std::size_t t = 0; t < m.num_triangles(); ++t) a += triangle_area(m, static_cast<int>(t));
    return a;
}

using Segment = std::pair<std::pair<double, double>, std::pair<double, double>>;
std::set<Segment> segment_set(const BoundaryMesh& b) {
    std::set<Segment> s;
    for (std::size_t i = 0; i < b.size(); ++i) {
        auto p = std::make_pair(b.start(static_cast<int>(i)).x(), b.start(static_cast<int>(i)).y());
        auto q = std::make_pair(b.end(static_cast<int>(i)).x(), b.end(static_cast<int>(i)).y());
        s.insert(std::minmax(p, q));
    }
    return s;
}

}  // namespace

TEST_CASE("NVB on the two-triangle square") {
    Mesh2D m = two_triangle_square();
    SUBCASE("mark both") {
        Mesh2D r = refine_nvb(m, {0, 1});
        CHECK(r.num_triangles() == 4);
        CHECK_NOTHROW(check_conforming(r));
    }
    SUBCASE("mark one: closure refines the neighbour") {
        Mesh2D r = refine_nvb(m, {0});
        CHECK(r.num_triangles() >= 3);
        CHECK_NOTHROW(check_conforming(r));
    }
    SUBCASE("mark nothing") {
        Mesh2D r = refine_nvb(m, {});
        CHECK(r.num_triangles() == 2);
        CHECK(r.vertices == m.vertices);
        CHECK(r.triangles == m.triangles);
    }
}

TEST_CASE("refinement keeps area, regions and every marked element is bisected") {
    Mesh2D m = build_initial_mesh("lshape_linear", Variant::Strip);
    std::mt19937 rng(3);
    double area = total_area(m);
    double sr0 = shape_regularity(m);
    for (int step = 0; step < 12; ++step) {
        std::vector<int> marked;
        std::uniform_int_distribution<int> pick(0, static_cast<int>(m.num_triangles()) - 1);
        for (int i = 0; i < 5; ++i) marked.push_back(pick(rng));
        std::size_t interior_before = m.count(Region::Interior);
        Mesh2D r = refine_nvb(m, marked);
        CHECK_NOTHROW(check_conforming(r));
        CHECK(std::abs(total_area(r) - area) < 1e-12);
        CHECK(r.num_triangles() >= m.num_triangles() + std::set<int>(marked.begin(), marked.end()).size());
        CHECK(r.count(Region::Interior) >= interior_before);
        // children inherit the parent region: centroid classification stays consistent
        for (std::size_t t = 0; t < r.num_triangles(); ++t) {
            bool inside = in_domain("lshape_linear", triangle_centroid(r, static_cast<int>(t)));
            CHECK((r.region[t] == Region::Interior) == inside);
        }
        // NVB produces only finitely many similarity classes
        CHECK(shape_regularity(r) <= 4.0 * sr0 + 1e-12);
        m = r;
    }
}

TEST_CASE("non-conforming input is a structural error") {
    std::vector<Vec2> v{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}};
    // triangle 0 ignores the midpoint vertex 4 that splits its diagonal
    Mesh2D bad;
    bad.vertices = v;
    bad.triangles = {{0, 1, 2}, {0, 4, 3}, {4, 2, 3}};
    bad.region = {Region::Interior, Region::Interior, Region::Interior};
    bad.generation = {0, 0, 0};
    bad.vertex_parents.assign(5, {-1, -1});
    CHECK_THROWS_AS(check_conforming(bad), StructuralError);
    CHECK_THROWS_AS(refine_nvb(bad, {0}), StructuralError);
}

TEST_CASE("boundary meshes of the initial meshes") {
    Mesh2D sq = build_initial_mesh("square_linear", Variant::Interior);
    CHECK(sq.count(Region::Interior) == 16);
    BoundaryMesh b = boundary_mesh(sq);
    CHECK(b.size() == 8);
    // criss-cross refinement edges are the cell sides, so one sweep halves every boundary edge
    Mesh2D sq1 = refine_nvb(sq, all_triangles(sq));
    CHECK(sq1.num_triangles() == 32);
    CHECK(boundary_mesh(sq1).size() == 16);

    Mesh2D l = build_initial_mesh("lshape_linear", Variant::Interior);
    CHECK(l.count(Region::Interior) == 48);
    BoundaryMesh bl = boundary_mesh(l);
    int corners = 0;
    for (std::size_t i = 0; i < bl.size(); ++i) {
        Vec2 t0 = bl.tangent(bl.prev(static_cast<int>(i))), t1 = bl.tangent(static_cast<int>(i));
        if (std::abs(t0.x() * t1.y() - t0.y() * t1.x()) > 1e-12) ++corners;
    }
    CHECK(corners == 6);

    // closed, counterclockwise, parents contain their facets
    double signed_area = 0.0;
    for (std::size_t i = 0; i < bl.size(); ++i) {
        Vec2 a = bl.start(static_cast<int>(i)), c = bl.end(static_cast<int>(i));
        signed_area += 0.5 * (a.x() * c.y() - a.y() * c.x());
        int T = bl.parent[i];
        REQUIRE(T >= 0);
        int hits = 0;
        for (int k = 0; k < 3; ++k) {
            int vtx = l.triangles[T][k];
            if (vtx == bl.node_vertex[i] || vtx == bl.node_vertex[bl.next(static_cast<int>(i))]) ++hits;
        }
        CHECK(hits == 2);
    }
    CHECK(signed_area == doctest::Approx(48.0 / 256.0).epsilon(1e-12));
}

TEST_CASE("boundary mesh commutes with refinement") {
    Mesh2D m = build_initial_mesh("zshape_nonlinear", Variant::Strip);
    std::mt19937 rng(11);
    for (int step = 0; step < 6; ++step) {
        std::uniform_int_distribution<int> pick(0, static_cast<int>(m.num_triangles()) - 1);
        std::vector<int> marked{pick(rng), pick(rng), pick(rng)};
        Mesh2D r = refine_nvb(m, marked);
        BoundaryMesh coarse = boundary_mesh(m), fine = boundary_mesh(r);
        // every fine segment lies in one coarse segment and the lengths add up
        double lc = 0.0, lf = 0.0;
        for (std::size_t i = 0; i < coarse.size(); ++i) lc += coarse.length(static_cast<int>(i));
        for (std::size_t i = 0; i < fine.size(); ++i) {
            lf += fine.length(static_cast<int>(i));
            Vec2 mid = fine.point(static_cast<int>(i), 0.5);
            bool found = false;
            for (std::size_t j = 0; j < coarse.size() && !found; ++j) {
                Vec2 a = coarse.start(static_cast<int>(j)), c = coarse.end(static_cast<int>(j));
                Vec2 d = c - a;
                double s = (mid - a).dot(d) / d.squaredNorm();
                found = s > 0 && s < 1 && (a + s * d - mid).norm() < 1e-13;
            }
            CHECK(found);
        }
        CHECK(std::abs(lc - lf) < 1e-12);
        // no duplicated segments
        std::set<Segment> fs = segment_set(fine);
        CHECK(fs.size() == fine.size());
        m = r;
    }
}

TEST_CASE("k-patches") {
    Mesh2D sq = build_initial_mesh("square_linear", Variant::Interior);
    MeshTopology topo = build_topology(sq);
    int center = -1, corner = -1;
    for (std::size_t v = 0; v < sq.num_vertices(); ++v) {
        if ((sq.vertices[v] - Vec2(0, 0)).norm() < 1e-14) center = static_cast<int>(v);
        if ((sq.vertices[v] - Vec2(-0.25, -0.25)).norm() < 1e-14) corner = static_cast<int>(v);
    }
    REQUIRE(center >= 0);
    REQUIRE(corner >= 0);

    Patch p1 = k_patch(sq, topo, center, 1);
    CHECK(p1.triangles.size() <= 8);
    for (int t : p1.triangles) {
        const auto& tri = sq.triangles[t];
        CHECK(std::find(tri.begin(), tri.end(), center) != tri.end());
    }
    CHECK(p1.triangles.size() == topo.vertex_triangles[center].size());

    Patch p2 = k_patch(sq, topo, center, 2);
    std::set<int> expected;
    for (int v : p1.vertices)
        for (int t : topo.vertex_triangles[v]) expected.insert(t);
    CHECK(std::set<int>(p2.triangles.begin(), p2.triangles.end()) == expected);
    CHECK(std::includes(p2.triangles.begin(), p2.triangles.end(), p1.triangles.begin(), p1.triangles.end()));

    Patch pc = k_patch(sq, topo, corner, 1);
    CHECK(pc.triangles.size() == topo.vertex_triangles[corner].size());
    CHECK(pc.triangles.size() == 2);
}

TEST_CASE("hat functions") {
    Mesh2D m = build_initial_mesh("lshape_linear", Variant::Interior);
    m = refine_nvb(m, {0, 5, 9});
    for (std::size_t v = 0; v < m.num_vertices(); ++v) {
        CHECK(hat_function_eval(m, static_cast<int>(v), m.vertices[v]) == doctest::Approx(1.0));
        for (std::size_t w = 0; w < m.num_vertices(); ++w)
            if (w != v) CHECK(std::abs(hat_function_eval(m, static_cast<int>(w), m.vertices[v])) < 1e-14);
    }
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
        Vec2 c = triangle_centroid(m, static_cast<int>(t));
        for (int k = 0; k < 3; ++k) CHECK(hat_function_eval(m, m.triangles[t][k], c) == doctest::Approx(1.0 / 3.0));
    }
    CHECK_THROWS_AS(hat_function_eval(m, 0, Vec2(0.4, 0.4)), DomainError);
}

TEST_CASE("hat partition of unity at random points") {
    for (const auto& id : problem_ids()) {
        Mesh2D m = build_initial_mesh(id, Variant::Strip);
        m = refine_nvb(m, {1, 2, 3, 20});
        std::mt19937 rng(5);
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        int tested = 0;
        while (tested < 100) {
            Vec2 x(u(rng), u(rng));
            if (locate(m, x) < 0) continue;
            double s = 0.0;
            for (std::size_t v = 0; v < m.num_vertices(); ++v) {
                double h = 0.0;
                int t = locate(m, x);
                const auto& tri = m.triangles[t];
                if (std::find(tri.begin(), tri.end(), static_cast<int>(v)) != tri.end())
                    h = hat_function_eval(m, static_cast<int>(v), x);
                CHECK(h >= -1e-14);
                CHECK(h <= 1.0 + 1e-14);
                s += h;
            }
            CHECK(std::abs(s - 1.0) <= 1e-12);
            ++tested;
        }
    }
}

TEST_CASE("submesh and mesh dump") {
    Mesh2D m = build_initial_mesh("zshape_nonlinear", Variant::Strip);
    CHECK(m.count(Region::Interior) == 56);
    CHECK(m.num_triangles() == 256);
    SubMesh s = submesh(m, Region::Interior);
    CHECK(s.mesh.num_triangles() == 56);
    for (std::size_t i = 0; i < s.mesh.num_vertices(); ++i)
        CHECK((s.mesh.vertices[i] - m.vertices[s.vertex_map[i]]).norm() == 0.0);
    std::ostringstream os;
    write_mesh(s.mesh, os);
    std::istringstream is(os.str());
    std::string line;
    int lines = 0;
    while (std::getline(is, line)) ++lines;
    CHECK(lines == static_cast<int>(s.mesh.num_vertices() + s.mesh.num_triangles()));
}
