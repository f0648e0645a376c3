#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fembem/errors.hpp"
#include "fembem/experiments.hpp"

using namespace fembem;

namespace {

int cli(std::vector<std::string> args, std::string* out_text = nullptr) {
    args.insert(args.begin(), "fembem_cli");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str();
    return code;
}

double mesh_area(const Mesh2D& m, Region r) {
    double a = 0.0;
    for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t)
        if (m.region[t] == r) a += triangle_area(m, t);
    return a;
}

// -div A(grad u) by central differences of the flux.
double minus_div_flux(const TransmissionProblem& p, const Vec2& x, double h) {
    auto flux = [&](const Vec2& y) { return p.diffusion.apply(p.exact->grad_u(y)); };
    const Vec2 ex(h, 0.0), ey(0.0, h);
    return -((flux(x + ex).x() - flux(x - ex).x()) + (flux(x + ey).y() - flux(x - ey).y())) / (2.0 * h);
}

double laplacian(const ScalarField& u, const Vec2& x, double h) {
    const Vec2 ex(h, 0.0), ey(0.0, h);
    return (u(x + ex) + u(x - ex) + u(x + ey) + u(x - ey) - 4.0 * u(x)) / (h * h);
}

}  // namespace

TEST_CASE("problem registry") {
    CHECK(problem_ids() == std::vector<std::string>{"square_linear", "lshape_linear", "zshape_nonlinear"});
    CHECK_THROWS_AS(build_problem("circle"), ConfigError);
    CHECK_FALSE(build_problem("square_linear").exact.has_value());
    CHECK(build_problem("lshape_linear").exact.has_value());
    CHECK_FALSE(build_problem("zshape_nonlinear").diffusion.linear);
}

TEST_CASE("initial meshes") {
    struct Case {
        std::string id;
        std::size_t interior, total;
        double area;
    };
    for (const Case& c : {Case{"square_linear", 16, 64, 0.25}, Case{"lshape_linear", 48, 256, 48.0 / 256.0},
                          Case{"zshape_nonlinear", 56, 256, 56.0 / 256.0}}) {
        Mesh2D i = build_initial_mesh(c.id, Variant::Interior);
        Mesh2D s = build_initial_mesh(c.id, Variant::Strip);
        CHECK(i.triangles.size() == c.interior);
        CHECK(s.triangles.size() == c.total);
        CHECK(s.count(Region::Interior) == c.interior);
        CHECK(std::abs(mesh_area(i, Region::Interior) - c.area) < 1e-15);
        CHECK(std::abs(mesh_area(s, Region::Strip) - (1.0 - c.area)) < 1e-14);
        check_conforming(i);
        check_conforming(s);
        for (int t = 0; t < static_cast<int>(s.triangles.size()); ++t)
            CHECK(in_domain(c.id, triangle_centroid(s, t)) == (s.region[t] == Region::Interior));
    }
}

TEST_CASE("domain membership") {
    CHECK(in_domain("square_linear", Vec2(0.25, -0.25)));
    CHECK_FALSE(in_domain("square_linear", Vec2(0.26, 0.0)));
    CHECK(in_domain("lshape_linear", Vec2(-0.1, 0.1)));
    CHECK(in_domain("lshape_linear", Vec2(0.1, 0.0)));
    CHECK_FALSE(in_domain("lshape_linear", Vec2(0.1, -0.1)));
    CHECK(in_domain("zshape_nonlinear", Vec2(0.2, 0.1)));
    CHECK(in_domain("zshape_nonlinear", Vec2(0.1, 0.1)));
    CHECK_FALSE(in_domain("zshape_nonlinear", Vec2(0.1, 0.2)));
    CHECK_THROWS_AS(in_domain("circle", Vec2(0, 0)), ConfigError);
}

TEST_CASE("corner solutions") {
    // r^(2/3) sin(2 phi / 3) at r = 1, phi = pi
    TransmissionProblem l = build_problem("lshape_linear");
    CHECK(std::abs(l.exact->u(Vec2(-1.0, 0.0)) - std::sqrt(3.0) / 2.0) < 1e-15);
    // traces vanish on the two edges of the reentrant corner
    CHECK(std::abs(l.exact->u(Vec2(0.0, -0.1))) < 1e-15);
    CHECK(std::abs(l.exact->u(Vec2(0.1, 0.0))) < 1e-15);
    TransmissionProblem z = build_problem("zshape_nonlinear");
    CHECK(std::abs(z.exact->u(Vec2(0.0, 0.1))) < 1e-15);
    CHECK(std::abs(z.exact->u(Vec2(0.1, 0.1))) < 1e-15);
    CHECK(std::abs(z.exact->u_ext(Vec2(0.5, -0.75))) < 1e-15);
}

TEST_CASE("manufactured data match the exact solutions") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-0.25, 0.25);
    for (const std::string id : {"lshape_linear", "zshape_nonlinear"}) {
        TransmissionProblem p = build_problem(id);
        int tested = 0;
        while (tested < 50) {
            Vec2 x(u(rng), u(rng));
            if (!in_domain(id, x) || x.norm() < 0.05) continue;
            // keep the stencil away from the cut of the angle
            if (!in_domain(id, x + Vec2(0.02, 0)) || !in_domain(id, x - Vec2(0.02, 0)) ||
                !in_domain(id, x + Vec2(0, 0.02)) || !in_domain(id, x - Vec2(0, 0.02)))
                continue;
            ++tested;
            const double h = 1e-5;
            CHECK(std::abs(minus_div_flux(p, x, h) - p.f(x)) < 1e-5 * std::max(1.0, std::abs(p.f(x))));
            CHECK(std::abs(laplacian(p.exact->u_ext, x + Vec2(2.0, 2.0), 1e-3)) < 1e-5);
            // gradient by differences
            const Vec2 ex(h, 0.0), ey(0.0, h);
            Vec2 g((p.exact->u(x + ex) - p.exact->u(x - ex)) / (2 * h), (p.exact->u(x + ey) - p.exact->u(x - ey)) / (2 * h));
            CHECK((g - p.exact->grad_u(x)).norm() < 1e-6 * std::max(1.0, g.norm()));
        }
        // jump data on Gamma
        BoundaryMesh b = boundary_mesh(build_initial_mesh(id, Variant::Interior));
        for (int i = 0; i < static_cast<int>(b.size()); ++i) {
            const Vec2 x = b.point(i, 0.3), n = b.normal(i);
            CHECK(std::abs(p.g_D(x) - (p.exact->u(x) - p.exact->u_ext(x))) < 1e-14);
            const double gn = (p.diffusion.apply(p.exact->grad_u(x)) - p.exact->grad_u_ext(x)).dot(n);
            CHECK(std::abs(p.g_N(x, n) - gn) < 1e-12 * std::max(1.0, std::abs(gn)));
        }
    }
}

TEST_CASE("compatibility report") {
    TransmissionProblem s = build_problem("square_linear");
    Compatibility c = compatibility_report(s, build_initial_mesh("square_linear", Variant::Interior));
    CHECK(c.total() == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(c.log_regime);
    for (const std::string id : {"lshape_linear", "zshape_nonlinear"}) {
        Compatibility d = compatibility_report(build_problem(id), build_initial_mesh(id, Variant::Strip));
        CHECK(std::abs(d.total()) < 1e-4);
        CHECK_FALSE(d.log_regime);
    }
}

TEST_CASE("command line driver") {
    std::string text;
    CHECK(cli({"--help"}) == 0);
    CHECK(cli({"--no-such-flag"}) != 0);
    CHECK(cli({"--problem", "circle"}) != 0);
    CHECK(cli({"--theta", "0"}) == 1);
    CHECK(cli({"--problem", "zshape_nonlinear", "--coupling", "jn", "--nonlinear", "zarantonello",
               "--max-steps", "1"}) != 0);
    CHECK(cli({"--problem", "lshape_linear", "--max-elements", "150"}, &text) == 0);
    CHECK(text.find("stopped: element cap") != std::string::npos);
    CHECK(text.find("compatibility") != std::string::npos);
    CHECK(cli({"--problem", "square_linear", "--algorithm", "strip", "--coupling", "jn", "--max-steps", "2"}, &text) == 0);
    CHECK(text.find("stopped: step limit") != std::string::npos);
}
