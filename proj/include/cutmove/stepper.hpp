#pragma once

/// @file stepper.hpp
/// Time integration driver: builds per-step geometry, selects the extension
/// strip width and ghost-penalty weight, assembles and solves the implicit
/// Euler or BDF2 system (plain or mass-conserving via a scalar Lagrange
/// multiplier), checks the active-mesh inclusion condition between steps, and
/// records per-step diagnostics.

#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cutmove/assembly.hpp"
#include "cutmove/cases.hpp"
#include "cutmove/core.hpp"
#include "cutmove/fespace.hpp"
#include "cutmove/geometry.hpp"
#include "cutmove/linalg.hpp"
#include "cutmove/mesh.hpp"

namespace cutmove {

enum class TimeScheme { ImplicitEuler, Bdf2 };

/// Time-stepping configuration.
struct StepConfig {
    double dt = 0.0;
    TimeScheme scheme = TimeScheme::ImplicitEuler;
    GhostVariant ghost = GhostVariant::Direct;
    FormVariant form = FormVariant::Implementation;
    double c_gamma = 1.0;          ///< ghost-penalty constant, > 0
    bool conservative = false;     ///< enforce exact mass via a multiplier
    std::optional<double> delta_override;  ///< strip half-width override
    double solver_tolerance = 1e-10;
    double lambda0 = 10.0;  ///< Dirichlet penalty scale (cases with g_D)
};

/// Per-step diagnostics, recorded for every completed step.
struct StepDiagnostics {
    int step = 0;
    double time = 0.0;
    double delta_h = 0.0;
    int K_tilde = 1;
    double gamma_s = 0.0;
    double xi_h = 0.0;
    double xi_h_dt = 0.0;
    double residual = 0.0;
    bool included = false;
    bool restriction_warning = false;
    std::optional<double> condition;  ///< filled on demand, not by default
};

/// One time level: the geometry slice and the solution on it.
struct TraceState {
    double time = 0.0;
    DomainSlice slice;
    FeFunction u;
};

/// Full history of a run: states for n = 0..N and diagnostics for n = 1..N.
struct SolutionTrace {
    std::vector<TraceState> states;
    std::vector<StepDiagnostics> diagnostics;
};

/// Extension strip half-width: w_inf * dt for implicit Euler, doubled for
/// BDF2 (the three-level stencil reaches two steps back), 0 for stationary
/// domains.
inline double compute_strip_width(const ProblemCase& pc, double dt,
                                  TimeScheme scheme) {
    if (pc.w_inf == 0.0) return 0.0;
    const double base = pc.w_inf * dt;
    return scheme == TimeScheme::Bdf2 ? 2.0 * base : base;
}

struct StabilizationWeight {
    int K_tilde = 1;
    double gamma_s = 0.0;
};

/// Ghost-penalty weight gamma_s = c_gamma * K, where K = ceil(delta_h / h)
/// estimates the strip thickness in layers of elements, clamped to >= 1.
inline StabilizationWeight stabilization_weight(double delta_h, double h,
                                                double c_gamma) {
    if (!(h > 0.0)) fail(ErrorCode::ConfigInvalid, "mesh size must be > 0");
    int k = 1;
    if (delta_h > 0.0) {
        const double layers = std::ceil(delta_h / h);
        k = layers < 1.0 ? 1 : static_cast<int>(layers);
    }
    return StabilizationWeight{k, c_gamma * k};
}

/// True iff every element meeting the new physical domain (some vertex value
/// of the current slice's level set below zero) was active in the previous
/// slice, i.e. the previous solution is defined there.
inline bool check_inclusion(const DomainSlice& prev,
                            const DomainSlice& curr) {
    if (prev.mesh != curr.mesh)
        fail(ErrorCode::MeshMismatch,
             "inclusion check requires slices on one mesh");
    const BackgroundMesh& mesh = *curr.mesh;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        double v_min = 0.0;
        const auto& tri = mesh.triangles[static_cast<size_t>(t)];
        for (int i = 0; i < 3; ++i) {
            const double v =
                curr.levelset.vertex_values[static_cast<size_t>(tri[size_t(i)])];
            v_min = i == 0 ? v : std::min(v_min, v);
        }
        if (v_min < 0.0 && !prev.is_active(t)) return false;
    }
    return true;
}

/// Total discrete mass of u over the physical domain of the slice.
inline double discrete_mass(const DomainSlice& slice, const FeSpace& space,
                            const FeFunction& u) {
    const DofMask mask = active_dofs(space, slice);
    const std::vector<double> c = assemble_constraint_vector(slice, space, mask);
    double m = 0.0;
    for (int i = 0; i < mask.n_active(); ++i)
        m += c[static_cast<size_t>(i)] *
             u.coefficients[static_cast<size_t>(
                 mask.local_to_global[static_cast<size_t>(i)])];
    return m;
}

/// The exact machine-readable per-step log line.
inline std::string format_diagnostics(const StepDiagnostics& d) {
    return str_printf(
        "step=%d t=%.17g delta_h=%.17g K=%d gamma_s=%.17g xi_h_dt=%.17g "
        "residual=%.17g included=%d",
        d.step, d.time, d.delta_h, d.K_tilde, d.gamma_s, d.xi_h_dt, d.residual,
        d.included ? 1 : 0);
}

namespace detail {

/// Appends the entries of a, scaled by s, onto the triplet stream.
inline void append_scaled(std::vector<Triplet>& out, const SparseMatrix& a,
                          double s) {
    for (int i = 0; i < a.n_rows; ++i)
        for (int k = a.row_ptr[static_cast<size_t>(i)];
             k < a.row_ptr[static_cast<size_t>(i) + 1]; ++k)
            out.push_back({i, a.col_idx[static_cast<size_t>(k)],
                           s * a.values[static_cast<size_t>(k)]});
}

/// Gathers the previous background coefficient vector onto a mask's local
/// numbering.  DOFs that were inactive before hold zero in the background
/// vector; they only multiply structurally-zero matrix columns when the
/// inclusion condition holds.
inline std::vector<double> gather(const FeFunction& u, const DofMask& mask) {
    std::vector<double> out(static_cast<size_t>(mask.n_active()));
    for (int i = 0; i < mask.n_active(); ++i)
        out[static_cast<size_t>(i)] = u.coefficients[static_cast<size_t>(
            mask.local_to_global[static_cast<size_t>(i)])];
    return out;
}

/// Largest |div w| over the active vertices at time t (deterministic:
/// ascending DOF order).
inline double divw_bound(const DomainSlice& slice, const DofMask& mask,
                         const ScalarField& divw, double t) {
    const BackgroundMesh& mesh = *slice.mesh;
    double bound = 0.0;
    for (int v : mask.local_to_global)
        bound = std::max(
            bound, std::abs(divw(mesh.vertices[static_cast<size_t>(v)], t)));
    return bound;
}

}  // namespace detail

/// Advances one time step to t_n on the geometry slice_n.  prev1 is the
/// state at t_n - dt; prev2, when non-null, is the state at t_n - 2 dt and
/// selects the BDF2 stencil (a null prev2 under the BDF2 scheme is the
/// implicit-Euler startup step).  Throws InclusionViolated if the previous
/// active mesh does not cover the new physical domain.
inline std::pair<FeFunction, StepDiagnostics> step(
    const TraceState& prev1, const TraceState* prev2,
    const DomainSlice& slice_n, double t_n, const ProblemCase& pc,
    const StepConfig& config, const FeSpace& space, int step_index) {
    if (!(config.dt > 0.0))
        fail(ErrorCode::ConfigInvalid, "time step must be > 0");
    if (!(config.c_gamma > 0.0))
        fail(ErrorCode::ConfigInvalid, "c_gamma must be > 0");
    const BackgroundMesh& mesh = *space.mesh;

    StepDiagnostics diag;
    diag.step = step_index;
    diag.time = t_n;
    diag.delta_h = slice_n.delta_h;
    const StabilizationWeight sw =
        stabilization_weight(slice_n.delta_h, mesh.h, config.c_gamma);
    diag.K_tilde = sw.K_tilde;
    diag.gamma_s = sw.gamma_s;

    diag.included = check_inclusion(prev1.slice, slice_n) &&
                    (prev2 == nullptr || check_inclusion(prev2->slice, slice_n));
    if (!diag.included)
        fail(ErrorCode::InclusionViolated,
             str_printf("step %d (t=%g): previous active mesh does not cover "
                        "the new domain",
                        step_index, t_n));

    const DofMask mask = active_dofs(space, slice_n);
    const int n = mask.n_active();
    if (n == 0)
        fail(ErrorCode::ConfigInvalid,
             str_printf("step %d: active mesh is empty", step_index));

    const SparseMatrix mass = assemble_mass(slice_n, space, mask);
    const SparseMatrix conv = assemble_diffusion_convection(
        slice_n, space, mask, pc.alpha, pc.velocity, pc.div_velocity, t_n,
        config.form);
    const SparseMatrix ghost =
        assemble_ghost_penalty(slice_n, space, mask, config.ghost);

    const bool bdf2 = prev2 != nullptr;
    const double mass_scale = (bdf2 ? 1.5 : 1.0) / config.dt;

    std::vector<Triplet> ts;
    ts.reserve(static_cast<size_t>(mass.nnz() + conv.nnz() + ghost.nnz()));
    detail::append_scaled(ts, mass, mass_scale);
    detail::append_scaled(ts, conv, 1.0);
    detail::append_scaled(ts, ghost, sw.gamma_s);

    // Right-hand side: the mass history term plus the source.
    const std::vector<double> u1 = detail::gather(prev1.u, mask);
    std::vector<double> hist(static_cast<size_t>(n));
    if (bdf2) {
        const std::vector<double> u2 = detail::gather(prev2->u, mask);
        for (int i = 0; i < n; ++i)
            hist[static_cast<size_t>(i)] =
                (4.0 * u1[static_cast<size_t>(i)] -
                 u2[static_cast<size_t>(i)]) /
                (2.0 * config.dt);
    } else {
        for (int i = 0; i < n; ++i)
            hist[static_cast<size_t>(i)] = u1[static_cast<size_t>(i)] / config.dt;
    }
    std::vector<double> rhs = mass.apply(hist);
    if (pc.source) {
        const std::vector<double> b =
            assemble_source(slice_n, space, mask, pc.source, t_n);
        for (int i = 0; i < n; ++i)
            rhs[static_cast<size_t>(i)] += b[static_cast<size_t>(i)];
    }
    if (pc.dirichlet) {
        const auto nitsche =
            assemble_nitsche(slice_n, space, mask, pc.dirichlet, pc.velocity,
                             pc.alpha, config.lambda0, t_n);
        detail::append_scaled(ts, nitsche.first, 1.0);
        for (int i = 0; i < n; ++i)
            rhs[static_cast<size_t>(i)] += nitsche.second[static_cast<size_t>(i)];
    }
    const SparseMatrix system = SparseMatrix::from_triplets(n, n, ts);

    // Solve, plainly or with the scalar mass constraint appended.
    std::vector<double> u_loc;
    double constraint_defect = 0.0;
    if (config.conservative) {
        const DofMask mask_prev = active_dofs(space, prev1.slice);
        const std::vector<double> c_prev =
            assemble_constraint_vector(prev1.slice, space, mask_prev);
        const double g =
            vec_dot(c_prev, detail::gather(prev1.u, mask_prev));
        const std::vector<double> c =
            assemble_constraint_vector(slice_n, space, mask);
        auto solved =
            solve_bordered(system, c, rhs, g, config.solver_tolerance);
        u_loc = std::move(solved.first);
        const double lambda = solved.second;
        for (int i = 0; i < n; ++i)
            rhs[static_cast<size_t>(i)] -= lambda * c[static_cast<size_t>(i)];
        constraint_defect =
            std::abs(vec_dot(c, u_loc) - g) / (1.0 + std::abs(g));
    } else {
        u_loc = solve(system, rhs, config.solver_tolerance);
    }

    // Residual of the n-by-n block (with the multiplier folded into rhs).
    std::vector<double> r = system.apply(u_loc);
    for (int i = 0; i < n; ++i) r[static_cast<size_t>(i)] -= rhs[static_cast<size_t>(i)];
    diag.residual = std::max(vec_norm2(r) / (1.0 + vec_norm2(rhs)),
                             constraint_defect);

    // Solvability indicator xi_h; the time-step restriction dt < 1/xi_h is
    // advisory, so a violation only flags a warning.
    double xi = detail::divw_bound(slice_n, mask, pc.div_velocity, t_n) +
                pc.alpha;
    if (config.form == FormVariant::Skew)
        xi += pc.w_inf * pc.w_inf / (4.0 * pc.alpha);
    diag.xi_h = 0.5 * xi;
    diag.xi_h_dt = diag.xi_h * config.dt;
    diag.restriction_warning = diag.xi_h_dt >= 1.0;

    FeFunction out;
    out.space = &space;
    out.coefficients.assign(static_cast<size_t>(space.n_dofs()), 0.0);
    out.active_mask = mask.active;
    for (int i = 0; i < n; ++i)
        out.coefficients[static_cast<size_t>(
            mask.local_to_global[static_cast<size_t>(i)])] =
            u_loc[static_cast<size_t>(i)];
    return {std::move(out), std::move(diag)};
}

/// Runs the full time loop: interpolates the initial datum on the t=0 slice,
/// then advances N = round(T/dt) steps (N*dt must hit T to 1e-12 relative
/// unless N is zero, which returns the initial state alone).  The optional
/// log stream receives one format_diagnostics line per step.
inline SolutionTrace run(const ProblemCase& pc, const BackgroundMesh& mesh,
                         const FeSpace& space, const StepConfig& config,
                         std::ostream* log = nullptr) {
    if (!(config.dt > 0.0))
        fail(ErrorCode::ConfigInvalid, "time step must be > 0");
    if (!(config.c_gamma > 0.0))
        fail(ErrorCode::ConfigInvalid, "c_gamma must be > 0");
    if (space.mesh != &mesh)
        fail(ErrorCode::MeshMismatch, "space was built on a different mesh");

    const double T = pc.final_time;
    const long long n_steps = std::llround(T / config.dt);
    if (n_steps > 0 &&
        std::abs(static_cast<double>(n_steps) * config.dt - T) > 1e-12 * T)
        fail(ErrorCode::ConfigInvalid,
             str_printf("dt=%.17g does not divide T=%.17g", config.dt, T));
    const int N = static_cast<int>(n_steps);

    const double delta = config.delta_override
                             ? *config.delta_override
                             : compute_strip_width(pc, config.dt, config.scheme);

    SolutionTrace trace;
    trace.states.reserve(static_cast<size_t>(N) + 1);
    {
        DomainSlice slice0 =
            classify(interpolate_levelset(pc.levelset, mesh, 0.0), delta);
        FeFunction u0 = interpolate(
            space, [&pc](const Vec2& p, double) { return pc.initial(p); }, 0.0,
            slice0);
        trace.states.push_back(TraceState{0.0, std::move(slice0), std::move(u0)});
    }

    for (int s = 1; s <= N; ++s) {
        const double t_n = static_cast<double>(s) * config.dt;
        DomainSlice slice_n =
            classify(interpolate_levelset(pc.levelset, mesh, t_n), delta);
        const TraceState& prev1 = trace.states[static_cast<size_t>(s) - 1];
        const TraceState* prev2 =
            (config.scheme == TimeScheme::Bdf2 && s >= 2)
                ? &trace.states[static_cast<size_t>(s) - 2]
                : nullptr;
        auto result =
            step(prev1, prev2, slice_n, t_n, pc, config, space, s);
        if (log) *log << format_diagnostics(result.second) << "\n";
        trace.diagnostics.push_back(std::move(result.second));
        trace.states.push_back(
            TraceState{t_n, std::move(slice_n), std::move(result.first)});
    }
    return trace;
}

}  // namespace cutmove
