#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cutmove/stepper.hpp"

using namespace cutmove;

namespace {

template <class F>
std::optional<ErrorCode> error_code_of(F&& f) {
    try {
        f();
        return std::nullopt;
    } catch (const Error& e) {
        return e.code();
    }
}

ProblemCase stationary_disc(const std::string& extra = "") {
    return parse_case_text(
        "box = 0 0 1 1\nT = 1\nalpha = 1\n"
        "phi = (x - 0.5)^2 + (y - 0.5)^2 - 0.09\nu0 = 3\n" +
            extra,
        "inline");
}

std::vector<double> gather_active(const FeFunction& u, const DofMask& mask) {
    std::vector<double> out;
    for (int g : mask.local_to_global)
        out.push_back(u.coefficients[static_cast<size_t>(g)]);
    return out;
}

/// L2 norm of u over the physical domain of the slice.
double l2_norm(const DomainSlice& slice, const FeSpace& space,
               const FeFunction& u) {
    const DofMask mask = active_dofs(space, slice);
    const SparseMatrix m = assemble_mass(slice, space, mask);
    const std::vector<double> v = gather_active(u, mask);
    return std::sqrt(vec_dot(v, m.apply(v)));
}

/// System matrix of one implicit-Euler step on the slice (zero velocity).
SparseMatrix ie_system_matrix(const DomainSlice& slice, const FeSpace& space,
                              double dt, double gamma_s) {
    const DofMask mask = active_dofs(space, slice);
    const SparseMatrix mass = assemble_mass(slice, space, mask);
    const SparseMatrix conv = assemble_diffusion_convection(
        slice, space, mask, 1.0, [](const Vec2&, double) {
            return Vec2{0.0, 0.0};
        },
        [](const Vec2&, double) { return 0.0; }, 0.0,
        FormVariant::Implementation);
    const SparseMatrix ghost =
        assemble_ghost_penalty(slice, space, mask, GhostVariant::Direct);
    std::vector<Triplet> ts;
    detail::append_scaled(ts, mass, 1.0 / dt);
    detail::append_scaled(ts, conv, 1.0);
    if (gamma_s > 0.0) detail::append_scaled(ts, ghost, gamma_s);
    return SparseMatrix::from_triplets(mask.n_active(), mask.n_active(), ts);
}

}  // namespace

TEST_CASE("strip width follows scheme and speed", "[stepper]") {
    ProblemCase ex2 = builtin_case("example2_grow");
    REQUIRE(ex2.w_inf == 1.0);
    CHECK(compute_strip_width(ex2, 0.1, TimeScheme::ImplicitEuler) == 0.1);
    CHECK(compute_strip_width(ex2, 0.1, TimeScheme::Bdf2) == 0.2);
    ProblemCase still = stationary_disc();
    CHECK(still.w_inf == 0.0);
    CHECK(compute_strip_width(still, 0.1, TimeScheme::ImplicitEuler) == 0.0);
    CHECK(compute_strip_width(still, 0.1, TimeScheme::Bdf2) == 0.0);
}

TEST_CASE("stabilization weight is the clamped layer count", "[stepper]") {
    StabilizationWeight w = stabilization_weight(0.1, 0.2, 1.0);
    CHECK(w.K_tilde == 1);
    CHECK(w.gamma_s == 1.0);
    w = stabilization_weight(0.5, 0.1, 1.0);
    CHECK(w.K_tilde == 5);
    CHECK(w.gamma_s == 5.0);
    w = stabilization_weight(0.0, 0.2, 0.75);
    CHECK(w.K_tilde == 1);
    CHECK(w.gamma_s == 0.75);
    CHECK(error_code_of([] { stabilization_weight(0.1, 0.0, 1.0); }) ==
          ErrorCode::ConfigInvalid);
}

TEST_CASE("inclusion check compares active sets", "[stepper]") {
    const Box box{0.0, 0.0, 1.0, 1.0};
    const BackgroundMesh mesh = build_structured_mesh(box, 8);
    auto circle = [&](double cx, double delta) {
        return classify(interpolate_levelset(
                            [cx](const Vec2& p, double) {
                                return norm(Vec2{p.x - cx, p.y - 0.5}) - 0.15;
                            },
                            mesh, 0.0),
                        delta);
    };
    const DomainSlice a = circle(0.3, 0.0);
    CHECK(check_inclusion(a, a));
    // Zero strip width plus a jump of two element columns: not covered.
    const DomainSlice b = circle(0.7, 0.0);
    CHECK_FALSE(check_inclusion(a, b));
    // A generous strip restores coverage.
    const DomainSlice a_wide = circle(0.3, 0.45);
    CHECK(check_inclusion(a_wide, b));

    // Traveling-circle schedule: delta_h = w_inf * dt keeps consecutive
    // slices nested on every tested level.
    const ProblemCase pc = builtin_case("example1_travel");
    for (int level = 0; level < 2; ++level) {
        const int n = pc.base_n << level;
        const double dt = pc.base_dt / (1 << level);
        const double delta =
            compute_strip_width(pc, dt, TimeScheme::ImplicitEuler);
        const BackgroundMesh m = build_structured_mesh(pc.box, n);
        DomainSlice prev =
            classify(interpolate_levelset(pc.levelset, m, 0.0), delta);
        const int steps = static_cast<int>(std::lround(pc.final_time / dt));
        for (int s = 1; s <= steps; ++s) {
            DomainSlice curr = classify(
                interpolate_levelset(pc.levelset, m, s * dt), delta);
            INFO("level " << level << " step " << s);
            CHECK(check_inclusion(prev, curr));
            prev = std::move(curr);
        }
    }
}

TEST_CASE("stationary constant datum is preserved", "[stepper]") {
    const ProblemCase pc = stationary_disc();
    const BackgroundMesh mesh = build_structured_mesh(pc.box, 12);
    const FeSpace space = make_fespace(mesh);

    for (GhostVariant ghost :
         {GhostVariant::Direct, GhostVariant::Lps, GhostVariant::Djump}) {
        for (FormVariant form :
             {FormVariant::Implementation, FormVariant::Skew}) {
            StepConfig config;
            config.dt = 0.1;
            config.ghost = ghost;
            config.form = form;
            const SolutionTrace trace = run(pc, mesh, space, config);
            REQUIRE(trace.states.size() == 11);
            for (const TraceState& st : trace.states) {
                const DofMask mask = active_dofs(space, st.slice);
                double worst = 0.0;
                for (int g : mask.local_to_global)
                    worst = std::max(
                        worst,
                        std::abs(st.u.coefficients[static_cast<size_t>(g)] -
                                 3.0));
                CHECK(worst <= 1e-10);
            }
        }
    }
}

TEST_CASE("conservative mode fixes the discrete mass", "[stepper]") {
    const ProblemCase pc = builtin_case("example3_mass");
    const BackgroundMesh mesh = build_structured_mesh(pc.box, pc.base_n);
    const FeSpace space = make_fespace(mesh);

    for (TimeScheme scheme : {TimeScheme::ImplicitEuler, TimeScheme::Bdf2}) {
        StepConfig config;
        config.dt = pc.base_dt;
        config.scheme = scheme;
        config.conservative = true;
        const SolutionTrace trace = run(pc, mesh, space, config);
        REQUIRE(trace.states.size() == 3);
        const double m0 =
            discrete_mass(trace.states[0].slice, space, trace.states[0].u);
        for (size_t n = 1; n < trace.states.size(); ++n) {
            const double mn =
                discrete_mass(trace.states[n].slice, space, trace.states[n].u);
            const double mp = discrete_mass(trace.states[n - 1].slice, space,
                                            trace.states[n - 1].u);
            CHECK(std::abs(mn - mp) <= 1e-10 * (1.0 + std::abs(mp)));
        }
        const double mN = discrete_mass(trace.states.back().slice, space,
                                        trace.states.back().u);
        CHECK(std::abs(mN - m0) <= 2e-10 * (1.0 + std::abs(m0)));
    }
}

TEST_CASE("source-free runs stay bounded", "[stepper]") {
    const ProblemCase pc = builtin_case("example3_mass");
    const BackgroundMesh mesh = build_structured_mesh(pc.box, pc.base_n);
    const FeSpace space = make_fespace(mesh);
    StepConfig config;
    config.dt = pc.base_dt / 2.0;
    config.scheme = TimeScheme::Bdf2;
    const SolutionTrace trace = run(pc, mesh, space, config);
    const double norm0 = l2_norm(trace.states[0].slice, space, trace.states[0].u);
    REQUIRE(norm0 > 0.0);
    for (const TraceState& st : trace.states)
        CHECK(l2_norm(st.slice, space, st.u) <= 10.0 * norm0);
}

TEST_CASE("traces are bit-identical across runs and thread counts",
          "[stepper]") {
    const ProblemCase pc = builtin_case("example1_travel");
    const BackgroundMesh mesh = build_structured_mesh(pc.box, pc.base_n);
    const FeSpace space = make_fespace(mesh);
    StepConfig config;
    config.dt = pc.base_dt;

    setenv("CUTMOVE_THREADS", "1", 1);
    const SolutionTrace one = run(pc, mesh, space, config);
    const SolutionTrace again = run(pc, mesh, space, config);
    setenv("CUTMOVE_THREADS", "5", 1);
    const SolutionTrace five = run(pc, mesh, space, config);
    setenv("CUTMOVE_THREADS", "1", 1);

    REQUIRE(one.states.size() == again.states.size());
    REQUIRE(one.states.size() == five.states.size());
    for (size_t n = 0; n < one.states.size(); ++n) {
        CHECK(one.states[n].u.coefficients == again.states[n].u.coefficients);
        CHECK(one.states[n].u.coefficients == five.states[n].u.coefficients);
    }
    for (size_t n = 0; n < one.diagnostics.size(); ++n)
        CHECK(format_diagnostics(one.diagnostics[n]) ==
              format_diagnostics(five.diagnostics[n]));
}

TEST_CASE("ghost penalty tames sliver-cut conditioning", "[stepper]") {
    // A vertical interface a hair to the right of a mesh line leaves sliver
    // intersections in one element column.
    const BackgroundMesh mesh =
        build_structured_mesh(Box{0.0, 0.0, 1.0, 1.0}, 4);
    const FeSpace space = make_fespace(mesh);
    const DomainSlice slice = classify(
        interpolate_levelset(
            [](const Vec2& p, double) { return p.x - (0.25 + 1e-6); }, mesh,
            0.0),
        0.0);
    const double cond_stab =
        estimate_condition(ie_system_matrix(slice, space, 0.1, 1.0));
    const double cond_raw =
        estimate_condition(ie_system_matrix(slice, space, 0.1, 0.0));
    INFO("stabilized " << cond_stab << " raw " << cond_raw);
    CHECK(cond_raw >= 10.0 * cond_stab);
}

TEST_CASE("run gates the step count", "[stepper]") {
    const ProblemCase pc = builtin_case("example1_travel");
    const BackgroundMesh mesh = build_structured_mesh(pc.box, pc.base_n);
    const FeSpace space = make_fespace(mesh);

    StepConfig config;
    config.dt = pc.base_dt;
    const SolutionTrace trace = run(pc, mesh, space, config);
    REQUIRE(trace.states.size() == 3);  // T = 0.2 at dt = 0.1: two steps
    REQUIRE(trace.diagnostics.size() == 2);
    CHECK(trace.states[0].time == 0.0);
    CHECK(trace.states[1].time == 0.1);
    CHECK(trace.states[2].time == 0.2);
    for (const TraceState& st : trace.states)
        CHECK(st.u.active_mask == active_dofs(space, st.slice).active);
    for (size_t i = 0; i < trace.diagnostics.size(); ++i) {
        CHECK(trace.diagnostics[i].residual <= 1e-10);
        CHECK(trace.diagnostics[i].included);
        CHECK(trace.diagnostics[i].K_tilde == 1);
        CHECK_FALSE(trace.diagnostics[i].restriction_warning);
    }

    // dt far beyond T: zero steps, initial state only.
    config.dt = 3.0 * pc.final_time;
    const SolutionTrace initial_only = run(pc, mesh, space, config);
    CHECK(initial_only.states.size() == 1);
    CHECK(initial_only.diagnostics.empty());

    // dt that does not divide T is rejected.
    config.dt = 0.4 * pc.final_time;
    CHECK(error_code_of([&] { run(pc, mesh, space, config); }) ==
          ErrorCode::ConfigInvalid);
    config.dt = -0.1;
    CHECK(error_code_of([&] { run(pc, mesh, space, config); }) ==
          ErrorCode::ConfigInvalid);
    config.dt = pc.base_dt;
    config.c_gamma = 0.0;
    CHECK(error_code_of([&] { run(pc, mesh, space, config); }) ==
          ErrorCode::ConfigInvalid);
}

TEST_CASE("inclusion violations abort the run", "[stepper]") {
    const ProblemCase pc = builtin_case("example1_travel");
    const BackgroundMesh mesh = build_structured_mesh(pc.box, pc.base_n);
    const FeSpace space = make_fespace(mesh);
    StepConfig config;
    config.dt = pc.base_dt;
    config.delta_override = 0.0;  // no extension strip: the move escapes
    CHECK(error_code_of([&] { run(pc, mesh, space, config); }) ==
          ErrorCode::InclusionViolated);
}

TEST_CASE("time-step restriction is a warning only", "[stepper]") {
    const ProblemCase pc = builtin_case("example2_grow");
    const BackgroundMesh mesh = build_structured_mesh(pc.box, pc.base_n);
    const FeSpace space = make_fespace(mesh);
    StepConfig config;
    config.dt = pc.final_time;  // one huge step

    config.form = FormVariant::Implementation;
    SolutionTrace trace = run(pc, mesh, space, config);
    REQUIRE(trace.diagnostics.size() == 1);
    // xi_h = (|div w| + alpha)/2 = 1.1; dt * xi_h = 0.76 < 1.
    CHECK(trace.diagnostics[0].xi_h == Catch::Approx(1.1).epsilon(1e-12));
    CHECK_FALSE(trace.diagnostics[0].restriction_warning);
    CHECK(trace.diagnostics[0].K_tilde == 2);

    config.form = FormVariant::Skew;
    trace = run(pc, mesh, space, config);
    REQUIRE(trace.diagnostics.size() == 1);
    // The skew form adds w_inf^2/(4 alpha) = 1.25 inside the average:
    // xi_h = 1.725, dt * xi_h = 1.196 >= 1 warns but completes.
    CHECK(trace.diagnostics[0].xi_h == Catch::Approx(1.725).epsilon(1e-12));
    CHECK(trace.diagnostics[0].restriction_warning);
    CHECK(trace.diagnostics[0].residual <= 1e-10);
}

TEST_CASE("BDF2 startup is one implicit Euler step", "[stepper]") {
    const ProblemCase pc = builtin_case("example1_travel");
    const BackgroundMesh mesh = build_structured_mesh(pc.box, pc.base_n);
    const FeSpace space = make_fespace(mesh);

    StepConfig ie;
    ie.dt = 0.2;  // a single step covers [0, T]
    ie.scheme = TimeScheme::ImplicitEuler;
    ie.delta_override = 0.4;
    StepConfig bdf2 = ie;
    bdf2.scheme = TimeScheme::Bdf2;

    const SolutionTrace a = run(pc, mesh, space, ie);
    const SolutionTrace b = run(pc, mesh, space, bdf2);
    REQUIRE(a.states.size() == 2);
    REQUIRE(b.states.size() == 2);
    CHECK(a.states[1].u.coefficients == b.states[1].u.coefficients);
}

TEST_CASE("diagnostic log lines follow the fixed format", "[stepper]") {
    const ProblemCase pc = builtin_case("example1_travel");
    const BackgroundMesh mesh = build_structured_mesh(pc.box, pc.base_n);
    const FeSpace space = make_fespace(mesh);
    StepConfig config;
    config.dt = pc.base_dt;
    std::ostringstream log;
    const SolutionTrace trace = run(pc, mesh, space, config, &log);

    std::istringstream lines(log.str());
    std::string line;
    int count = 0;
    const std::vector<std::string> keys = {"step",     "t",        "delta_h",
                                           "K",        "gamma_s",  "xi_h_dt",
                                           "residual", "included"};
    while (std::getline(lines, line)) {
        ++count;
        std::istringstream fields(line);
        std::string field;
        size_t k = 0;
        while (fields >> field) {
            REQUIRE(k < keys.size());
            CHECK(field.rfind(keys[k] + "=", 0) == 0);
            ++k;
        }
        CHECK(k == keys.size());
    }
    CHECK(count == 2);
    CHECK(log.str().rfind("step=1 t=0.1", 0) == 0);
    REQUIRE(trace.diagnostics.size() == 2);
    CHECK(format_diagnostics(trace.diagnostics[0]).substr(0, 6) == "step=1");
}

TEST_CASE("topology transition runs conservatively", "[stepper]") {
    ProblemCase pc = builtin_case("example4_topology");
    const BackgroundMesh mesh = build_structured_mesh(pc.box, 21);
    const FeSpace space = make_fespace(mesh);
    StepConfig config;
    config.dt = pc.final_time / 10.0;
    config.conservative = true;
    const SolutionTrace trace = run(pc, mesh, space, config);
    REQUIRE(trace.states.size() == 11);
    const double m0 =
        discrete_mass(trace.states[0].slice, space, trace.states[0].u);
    const double mN = discrete_mass(trace.states.back().slice, space,
                                    trace.states.back().u);
    CHECK(std::abs(mN - m0) <= 1e-9 * (1.0 + std::abs(m0)));
    const double norm0 = l2_norm(trace.states[0].slice, space, trace.states[0].u);
    for (const TraceState& st : trace.states)
        CHECK(l2_norm(st.slice, space, st.u) <= 10.0 * norm0);
}
