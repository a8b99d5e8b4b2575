#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "cutmove/cases.hpp"

using namespace cutmove;

namespace {

double ev(const std::string& text, double x = 0.0, double y = 0.0,
          double t = 0.0) {
    return Expression::parse(text).eval(x, y, t);
}

template <class F>
std::optional<ErrorCode> error_code_of(F&& f) {
    try {
        f();
        return std::nullopt;
    } catch (const Error& e) {
        return e.code();
    }
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    REQUIRE(out.good());
    out << content;
}

/// Second-order central first derivatives, fourth-order Laplacian stencil.
/// Evaluates d_t u + w . grad u + u div w - alpha lap u at (p, t).
double fd_strong_residual(const ProblemCase& pc, const Vec2& p, double t) {
    const auto& u = pc.exact;
    const double e1 = 1e-6;  // first derivatives
    const double e2 = 1e-3;  // Laplacian (wide step, fourth-order stencil)
    const double ut = (u(p, t + e1) - u(p, t - e1)) / (2.0 * e1);
    const double ux =
        (u({p.x + e1, p.y}, t) - u({p.x - e1, p.y}, t)) / (2.0 * e1);
    const double uy =
        (u({p.x, p.y + e1}, t) - u({p.x, p.y - e1}, t)) / (2.0 * e1);
    auto lap1d = [&](bool along_x) {
        auto at = [&](double s) {
            return along_x ? u({p.x + s, p.y}, t) : u({p.x, p.y + s}, t);
        };
        return (-at(2.0 * e2) + 16.0 * at(e2) - 30.0 * at(0.0) +
                16.0 * at(-e2) - at(-2.0 * e2)) /
               (12.0 * e2 * e2);
    };
    const double lap = lap1d(true) + lap1d(false);
    const Vec2 w = pc.velocity(p, t);
    return ut + w.x * ux + w.y * uy + u(p, t) * pc.div_velocity(p, t) -
           pc.alpha * lap;
}

Vec2 sample_point(const ProblemCase& pc, std::uint64_t seed, int i) {
    const double fx = 0.45 * hash_unit(seed, i, 0);
    const double fy = 0.45 * hash_unit(seed, i, 1);
    return Vec2{0.5 * (pc.box.xmin + pc.box.xmax) + fx * pc.box.width(),
                0.5 * (pc.box.ymin + pc.box.ymax) + fy * pc.box.height()};
}

}  // namespace

TEST_CASE("expression parsing and evaluation", "[cases]") {
    CHECK(ev("x*x + y*y - 0.25", 0.5, 0.0) == 0.0);
    CHECK(ev("2 + 3*4") == 14.0);
    CHECK(ev("(2 + 3)*4") == 20.0);
    CHECK(ev("2*3^2") == 18.0);
    CHECK(ev("2^3^2") == 512.0);  // right-associative
    CHECK(ev("-x^2", 2.0) == -4.0);
    CHECK(ev("2^-2") == 0.25);
    CHECK(ev("1/4") == 0.25);
    CHECK(ev("7 - 2 - 1") == 4.0);  // left-associative
    CHECK(ev("min(3, t)", 0.0, 0.0, 1.0) == 1.0);
    CHECK(ev("max(abs(-2), 1)") == 2.0);
    CHECK(ev("sqrt(x)", 9.0) == 3.0);
    CHECK(ev("sin(0)") == 0.0);
    CHECK(ev("cos(pi)") == -1.0);
    CHECK(ev("exp(1)") == Catch::Approx(std::exp(1.0)).epsilon(1e-15));
    CHECK(ev(" x + 1 ", 1.0) == 2.0);
    CHECK(ev("1.5e2") == 150.0);
    // Integer powers multiply out: z^2 must match z*z bitwise.
    CHECK(ev("x^2", 0.1) == 0.1 * 0.1);
    CHECK(ev("x^3", 0.7) == 0.7 * 0.7 * 0.7);
}

TEST_CASE("expression parse errors carry positions", "[cases]") {
    const std::vector<std::string> bad = {
        "",      "2 +",   "sin(",  "sin 3", "foo(3)",    "x y",
        "(2",    "2)",    "1.2.3", "2**3",  "x + * y",   "min(1)",
        "sin(1, 2)", "@",
    };
    for (const auto& text : bad) {
        INFO("text: '" << text << "'");
        auto code = error_code_of([&] { ev(text); });
        REQUIRE(code.has_value());
        CHECK(*code == ErrorCode::ParseError);
    }
    // Deep nesting is rejected rather than overflowing the stack.
    std::string deep(5000, '(');
    deep += "1";
    deep.append(5000, ')');
    auto code = error_code_of([&] { ev(deep); });
    REQUIRE(code.has_value());
    CHECK(*code == ErrorCode::ParseError);
}

TEST_CASE("builtin traveling-circle case", "[cases]") {
    const ProblemCase pc = builtin_case("example1_travel");
    CHECK(pc.alpha == 1.0);
    CHECK(pc.final_time == 0.2);
    CHECK(pc.w_inf == 2.0);
    CHECK(pc.base_n == 8);
    CHECK(pc.base_dt == 0.1);
    CHECK(pc.box.xmin == -0.7);
    CHECK(pc.box.xmax == 0.9);

    // The horizontal velocity passes through zero at t = 1/4.
    const Vec2 wquarter = pc.velocity(Vec2{0.3, 0.1}, 0.25);
    CHECK(std::abs(wquarter.x) <= 1e-15);
    CHECK(wquarter.y == 0.0);
    CHECK(pc.div_velocity(Vec2{0.2, 0.2}, 0.13) == 0.0);

    // Center starts at the origin: phi(0, 0) = -1/2, zero on the circle.
    CHECK(pc.levelset(Vec2{0.0, 0.0}, 0.0) == -0.5);
    CHECK(pc.levelset(Vec2{0.5, 0.0}, 0.0) == 0.0);
    CHECK(pc.initial(Vec2{0.0, 0.0}) == 1.0);
    REQUIRE(pc.exact);
    REQUIRE(pc.source);
    CHECK(std::abs(pc.exact(Vec2{0.0, 0.5}, 0.0)) < 1e-30);
}

TEST_CASE("builtin growing and shrinking circle cases", "[cases]") {
    for (const char* name : {"example2_grow", "example2_shrink"}) {
        INFO(name);
        const ProblemCase pc = builtin_case(name);
        const double beta = pc.name == "example2_grow" ? 1.0 : -1.0;
        const double r0 = beta > 0 ? 0.5 : 1.0;
        CHECK(pc.alpha == 0.2);
        CHECK(pc.final_time == Catch::Approx(std::log(2.0)).epsilon(1e-16));
        CHECK(pc.w_inf == 1.0);
        CHECK(pc.base_n == 6);
        for (int i = 0; i < 5; ++i) {
            const Vec2 p = sample_point(pc, 7, i);
            const double t = 0.3 * (i + 1) * pc.final_time / 5.0;
            CHECK(pc.div_velocity(p, t) == 2.0 * beta);
            const Vec2 w = pc.velocity(p, t);
            CHECK(w.x == beta * p.x);
            CHECK(w.y == beta * p.y);
        }
        const double t = 0.37 * pc.final_time;
        const double R = r0 * std::exp(beta * t);
        CHECK(pc.levelset(Vec2{0.0, 0.0}, t) == -R);
        CHECK(pc.exact(Vec2{R, 0.0}, t) ==
              Catch::Approx(-1.0).margin(1e-12));
        CHECK(pc.initial(Vec2{0.0, 0.0}) == 1.0);
    }
}

TEST_CASE("builtin mass-conservation case", "[cases]") {
    const ProblemCase pc = builtin_case("example3_mass");
    CHECK(pc.alpha == 0.1);
    CHECK(pc.w_inf == 2.0);
    CHECK(pc.base_n == 8);
    CHECK_FALSE(pc.exact);
    REQUIRE(pc.source);
    CHECK(pc.source(Vec2{0.3, -0.2}, 0.11) == 0.0);
    CHECK(pc.initial(Vec2{0.5, 0.0}) == Catch::Approx(1.0).epsilon(1e-14));
    // Geometry and velocity coincide with the traveling-circle case.
    const ProblemCase ref = builtin_case("example1_travel");
    for (int i = 0; i < 10; ++i) {
        const Vec2 p = sample_point(pc, 21, i);
        const double t = 0.2 * (0.5 + 0.5 * hash_unit(21, i, 2));
        CHECK(pc.levelset(p, t) == ref.levelset(p, t));
        CHECK(pc.velocity(p, t).x == ref.velocity(p, t).x);
    }
}

TEST_CASE("builtin topology case", "[cases]") {
    const ProblemCase pc = builtin_case("example4_topology");
    CHECK(pc.alpha == 0.1);
    CHECK(pc.final_time == 1.5);
    CHECK(pc.w_inf == 1.0);
    CHECK(pc.base_n == 43);
    CHECK(pc.box.ymin == -1.5);
    CHECK(pc.box.ymax == 1.5);
    CHECK(pc.div_velocity(Vec2{0.1, 0.2}, 0.3) == 0.0);

    // Velocity branches: sign flips across y = 0 and across t = T/2.
    CHECK(pc.velocity(Vec2{0.3, 0.5}, 0.1).y == 1.0);
    CHECK(pc.velocity(Vec2{0.3, -0.5}, 0.1).y == -1.0);
    CHECK(pc.velocity(Vec2{0.3, 0.5}, 1.0).y == -1.0);
    CHECK(pc.velocity(Vec2{0.3, -0.5}, 1.0).y == 1.0);
    CHECK(pc.velocity(Vec2{0.3, 0.0}, 0.1).y == -1.0);   // y = 0 joins lower
    CHECK(pc.velocity(Vec2{0.3, 0.5}, 0.75).y == 1.0);   // t = T/2 joins first
    CHECK(pc.velocity(Vec2{0.3, 0.5}, 0.1).x == 0.0);

    // Initial datum is -1 on the lower circle, +1 on the upper.
    CHECK(pc.initial(Vec2{0.0, -0.75}) == -1.0);
    CHECK(pc.initial(Vec2{0.0, 0.75}) == 1.0);

    // The motion is time-symmetric: the geometry returns to its start.
    for (int i = 0; i < 50; ++i) {
        const Vec2 p = sample_point(pc, 33, i);
        CHECK(pc.levelset(p, 0.0) == pc.levelset(p, pc.final_time));
    }

    CHECK(error_code_of([&] { builtin_case("no_such_case"); }) ==
          ErrorCode::UnknownCase);
}

TEST_CASE("manufactured sources match a finite-difference oracle", "[cases]") {
    for (const char* name :
         {"example1_travel", "example2_grow", "example2_shrink"}) {
        INFO(name);
        const ProblemCase pc = builtin_case(name);
        REQUIRE(pc.exact);
        REQUIRE(pc.source);
        for (int i = 0; i < 100; ++i) {
            const Vec2 p = sample_point(pc, 101, i);
            const double t =
                pc.final_time * (0.05 + 0.9 * (0.5 + 0.5 * hash_unit(101, i, 2)));
            const double closed = pc.source(p, t);
            const double fd = fd_strong_residual(pc, p, t);
            INFO("i=" << i << " p=(" << p.x << "," << p.y << ") t=" << t);
            CHECK(std::abs(closed - fd) <=
                  1e-6 * std::max(1.0, std::abs(closed)));
        }
    }
}

TEST_CASE("exact solutions satisfy the boundary compatibility condition",
          "[cases]") {
    // grad(ue) . n vanishes on the moving boundary.
    auto check_case = [](const ProblemCase& pc,
                         auto&& boundary_point_and_normal) {
        const double eps = 1e-6;
        for (double tf : {0.0, 0.35, 0.65, 1.0}) {
            const double t = tf * pc.final_time;
            for (int k = 0; k < 16; ++k) {
                const double theta = 2.0 * kPi * (k + 0.21) / 16.0;
                const auto [p, n] = boundary_point_and_normal(theta, t);
                REQUIRE(std::abs(pc.levelset(p, t)) < 1e-12);
                const double gx = (pc.exact({p.x + eps, p.y}, t) -
                                   pc.exact({p.x - eps, p.y}, t)) /
                                  (2.0 * eps);
                const double gy = (pc.exact({p.x, p.y + eps}, t) -
                                   pc.exact({p.x, p.y - eps}, t)) /
                                  (2.0 * eps);
                CHECK(std::abs(gx * n.x + gy * n.y) <= 1e-8);
            }
        }
    };

    {
        const ProblemCase pc = builtin_case("example1_travel");
        check_case(pc, [](double theta, double t) {
            const double cx = std::sin(2.0 * kPi * t) / kPi;
            const Vec2 n{std::cos(theta), std::sin(theta)};
            return std::pair<Vec2, Vec2>{Vec2{cx + 0.5 * n.x, 0.5 * n.y}, n};
        });
    }
    for (const char* name : {"example2_grow", "example2_shrink"}) {
        const ProblemCase pc = builtin_case(name);
        const double beta = pc.name == "example2_grow" ? 1.0 : -1.0;
        const double r0 = beta > 0 ? 0.5 : 1.0;
        check_case(pc, [beta, r0](double theta, double t) {
            const double R = r0 * std::exp(beta * t);
            const Vec2 n{std::cos(theta), std::sin(theta)};
            return std::pair<Vec2, Vec2>{Vec2{R * n.x, R * n.y}, n};
        });
    }
}

TEST_CASE("case files round-trip builtin definitions", "[cases]") {
    for (const char* name : {"example1_travel", "example2_grow",
                             "example2_shrink", "example3_mass"}) {
        INFO(name);
        const ProblemCase pc = builtin_case(name);
        const std::string path = std::string("cases_roundtrip_") + name + ".cfg";
        save_case(pc, path);
        const ProblemCase re = load_case(path);

        CHECK(re.name == pc.name);
        CHECK(re.final_time == pc.final_time);
        CHECK(re.alpha == pc.alpha);
        CHECK(re.w_inf == pc.w_inf);
        CHECK(re.box.xmin == pc.box.xmin);
        CHECK(re.box.ymax == pc.box.ymax);
        CHECK(static_cast<bool>(re.exact) == static_cast<bool>(pc.exact));

        auto close = [](double a, double b) {
            return std::abs(a - b) <= 1e-15 * std::max(1.0, std::abs(b));
        };
        for (int i = 0; i < 100; ++i) {
            const Vec2 p = sample_point(pc, 55, i);
            const double t =
                pc.final_time * (0.5 + 0.5 * hash_unit(55, i, 2));
            INFO("i=" << i << " p=(" << p.x << "," << p.y << ") t=" << t);
            CHECK(close(re.levelset(p, t), pc.levelset(p, t)));
            CHECK(close(re.velocity(p, t).x, pc.velocity(p, t).x));
            CHECK(close(re.velocity(p, t).y, pc.velocity(p, t).y));
            CHECK(close(re.div_velocity(p, t), pc.div_velocity(p, t)));
            CHECK(close(re.initial(p), pc.initial(p)));
            if (pc.exact) CHECK(close(re.exact(p, t), pc.exact(p, t)));
            if (pc.source) CHECK(close(re.source(p, t), pc.source(p, t)));
        }
        std::remove(path.c_str());
    }

    // The topology case has piecewise fields and refuses to serialize.
    CHECK(error_code_of([&] {
        save_case(builtin_case("example4_topology"), "cases_tmp_ex4.cfg");
    }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("case loader validation", "[cases]") {
    const std::string path = "cases_tmp_loader.cfg";
    auto load_text = [&](const std::string& text) {
        write_file(path, text);
        return load_case(path);
    };
    auto code_of_text = [&](const std::string& text) {
        write_file(path, text);
        return error_code_of([&] { load_case(path); });
    };

    const std::string base =
        "box = 0 0 1 1\nT = 1\nalpha = 1\nphi = x*x + y*y - 0.25\nu0 = 1\n";

    // A complete stationary case loads; comments and spacing are tolerated.
    {
        const ProblemCase pc = load_text(
            "# stationary disc\n" + base + "name = disc  # inline comment\n");
        CHECK(pc.name == "disc");
        CHECK(pc.w_inf == 0.0);
        CHECK(pc.levelset(Vec2{0.5, 0.0}, 0.0) == 0.0);
        CHECK(pc.velocity(Vec2{0.3, 0.3}, 0.5).x == 0.0);
        CHECK_FALSE(pc.exact);
        CHECK_FALSE(pc.source);
        CHECK_FALSE(pc.dirichlet);
    }
    // Dirichlet data is picked up when present.
    {
        const ProblemCase pc = load_text(base + "g_d = 1 + x\n");
        REQUIRE(pc.dirichlet);
        CHECK(pc.dirichlet(Vec2{0.25, 0.0}, 0.0) == 1.25);
    }
    // Explicitly-zero velocity loads without divw/w_inf.
    {
        const ProblemCase pc = load_text(base + "wx = 0\nwy = 0\n");
        CHECK(pc.w_inf == 0.0);
    }
    // Nonzero velocity requires divw and w_inf.
    CHECK(code_of_text(base + "wx = y\nwy = 0\nw_inf = 1\n") ==
          ErrorCode::MissingField);
    CHECK(code_of_text(base + "wx = y\nwy = 0\ndivw = 0\n") ==
          ErrorCode::MissingField);
    {
        const ProblemCase pc =
            load_text(base + "wx = y\nwy = 0\ndivw = 0\nw_inf = 1\n");
        CHECK(pc.velocity(Vec2{0.2, 0.7}, 0.0).x == 0.7);
        CHECK(pc.w_inf == 1.0);
    }

    CHECK(code_of_text("T = 1\nalpha = 1\nphi = x\nu0 = 1\n") ==
          ErrorCode::MissingField);  // box missing
    CHECK(code_of_text(
              "box = 0 0 1 1\nT = 1\nalpha = 1\nu0 = 1\n") ==
          ErrorCode::MissingField);  // phi missing
    CHECK(code_of_text(base + "phii = x\n") == ErrorCode::ParseError);
    CHECK(code_of_text(base + "T = 2\n") == ErrorCode::ParseError);  // dup
    CHECK(code_of_text("box = 0 0 1\nT = 1\nalpha = 1\nphi = x\nu0 = 1\n") ==
          ErrorCode::ParseError);
    CHECK(code_of_text("box = 1 0 0 1\nT = 1\nalpha = 1\nphi = x\nu0 = 1\n") ==
          ErrorCode::ConfigInvalid);
    CHECK(code_of_text(
              "box = 0 0 1 1\nT = 0\nalpha = 1\nphi = x\nu0 = 1\n") ==
          ErrorCode::ConfigInvalid);
    CHECK(code_of_text(
              "box = 0 0 1 1\nT = 1\nalpha = -1\nphi = x\nu0 = 1\n") ==
          ErrorCode::ConfigInvalid);
    CHECK(code_of_text(
              "box = 0 0 1 1\nT = 1\nalpha = 1\nphi = x +\nu0 = 1\n") ==
          ErrorCode::ParseError);
    CHECK(code_of_text(base + "just a line\n") == ErrorCode::ParseError);
    CHECK(error_code_of([] { load_case("no_such_file_anywhere.cfg"); }) ==
          ErrorCode::ParseError);
    std::remove(path.c_str());
}
