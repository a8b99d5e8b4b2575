#pragma once

/// @file analysis.hpp
/// Post-processing of solution traces: discrete space-time error norms
/// against an exact solution, discrete mass traces, and experimental orders
/// of convergence arranged like the benchmark tables.

#include <cmath>
#include <optional>
#include <vector>

#include "cutmove/assembly.hpp"
#include "cutmove/cases.hpp"
#include "cutmove/core.hpp"
#include "cutmove/fespace.hpp"
#include "cutmove/geometry.hpp"
#include "cutmove/stepper.hpp"

namespace cutmove {

/// Space-time error norms of a trace, plus the per-step ingredients and the
/// discrete mass sequence.
struct ErrorReport {
    double L2L2 = 0.0;    ///< sqrt(sum_n dt ||u_h - ue||^2) over n >= 1
    double L2H1 = 0.0;    ///< same with the gradient seminorm
    double LinfL2 = 0.0;  ///< max_n ||u_h - ue|| over n >= 1
    std::vector<double> step_l2;  ///< per-step L2 errors, n = 0..N
    std::vector<double> step_h1;  ///< per-step H1-seminorm errors, n = 0..N
    std::vector<double> mass;     ///< discrete mass U_h^n, n = 0..N
    double mass_deviation = 0.0;  ///< max_n |U_h^n - U_h^0|
};

/// Discrete mass sequence of a trace and its maximal deviation from the
/// initial mass.
struct MassTrace {
    std::vector<double> mass;
    double deviation = 0.0;
};

inline MassTrace mass_trace(const SolutionTrace& trace) {
    if (trace.states.empty())
        fail(ErrorCode::ConfigInvalid, "mass trace of an empty trace");
    MassTrace mt;
    mt.mass.reserve(trace.states.size());
    for (const TraceState& st : trace.states)
        mt.mass.push_back(discrete_mass(st.slice, *st.u.space, st.u));
    for (double m : mt.mass)
        mt.deviation = std::max(mt.deviation, std::abs(m - mt.mass.front()));
    return mt;
}

namespace detail {

/// Per-step L2 and H1-seminorm errors on the slice's physical domain.
/// The exact gradient is obtained by central differences (step 1e-6), far
/// below the discretization errors these norms measure.
inline void step_errors(const DomainSlice& slice, const FeFunction& u,
                        const ScalarField& exact, double time, int degree,
                        double& l2, double& h1) {
    const BackgroundMesh& mesh = *u.space->mesh;
    const double eps = 1e-6;
    double e2 = 0.0, g2 = 0.0;
    for (int t : slice.active_elements) {
        if (slice.elem_class[static_cast<size_t>(t)] == ElemClass::Outside)
            continue;
        const ElementGeom g = element_geometry(mesh, t);
        const auto& tri = mesh.triangles[static_cast<size_t>(t)];
        Vec2 grad_h{0.0, 0.0};
        for (int i = 0; i < 3; ++i) {
            const double c =
                u.coefficients[static_cast<size_t>(tri[size_t(i)])];
            grad_h.x += c * g.grad[size_t(i)].x;
            grad_h.y += c * g.grad[size_t(i)].y;
        }
        const QuadRule rule = cut_volume_quadrature(slice, t, degree);
        for (size_t q = 0; q < rule.points.size(); ++q) {
            const Vec2 p = rule.points[q];
            const auto l = hat_values(g, p);
            double uh = 0.0;
            for (int i = 0; i < 3; ++i)
                uh += u.coefficients[static_cast<size_t>(tri[size_t(i)])] *
                      l[size_t(i)];
            const double diff = uh - exact(p, time);
            const double gx = (exact({p.x + eps, p.y}, time) -
                               exact({p.x - eps, p.y}, time)) /
                              (2.0 * eps);
            const double gy = (exact({p.x, p.y + eps}, time) -
                               exact({p.x, p.y - eps}, time)) /
                              (2.0 * eps);
            const double dx = grad_h.x - gx;
            const double dy = grad_h.y - gy;
            e2 += rule.weights[q] * diff * diff;
            g2 += rule.weights[q] * (dx * dx + dy * dy);
        }
    }
    l2 = std::sqrt(e2);
    h1 = std::sqrt(g2);
}

}  // namespace detail

/// Discrete space-time error norms of the trace against the case's exact
/// solution, integrated with an elevated-order cut rule (degree 6).  The
/// time sums run over n >= 1; the n = 0 interpolation errors are recorded in
/// the per-step vectors.  Throws NoExactSolution if the case has none.
inline ErrorReport error_norms(const SolutionTrace& trace,
                               const ProblemCase& pc, int degree = 6) {
    if (!pc.exact)
        fail(ErrorCode::NoExactSolution,
             "case '" + pc.name + "' defines no exact solution");
    if (trace.states.empty())
        fail(ErrorCode::ConfigInvalid, "error norms of an empty trace");

    ErrorReport rep;
    for (const TraceState& st : trace.states) {
        double l2 = 0.0, h1 = 0.0;
        detail::step_errors(st.slice, st.u, pc.exact, st.time, degree, l2, h1);
        rep.step_l2.push_back(l2);
        rep.step_h1.push_back(h1);
        rep.mass.push_back(discrete_mass(st.slice, *st.u.space, st.u));
    }
    double sum_l2 = 0.0, sum_h1 = 0.0;
    for (size_t n = 1; n < trace.states.size(); ++n) {
        const double dt =
            trace.states[n].time - trace.states[n - 1].time;
        sum_l2 += dt * rep.step_l2[n] * rep.step_l2[n];
        sum_h1 += dt * rep.step_h1[n] * rep.step_h1[n];
        rep.LinfL2 = std::max(rep.LinfL2, rep.step_l2[n]);
    }
    if (trace.states.size() == 1) rep.LinfL2 = rep.step_l2[0];
    rep.L2L2 = std::sqrt(sum_l2);
    rep.L2H1 = std::sqrt(sum_h1);
    for (double m : rep.mass)
        rep.mass_deviation =
            std::max(rep.mass_deviation, std::abs(m - rep.mass.front()));
    return rep;
}

/// Error grid over (Lt, Lx) with the derived convergence-rate margins.
struct EocTable {
    std::vector<std::vector<double>> errors;  ///< [Lt][Lx]
    std::vector<double> eoc_x;   ///< along the finest-time row, size Lx_max
    std::vector<double> eoc_t;   ///< along the finest-space column, size Lt_max
    std::vector<double> eoc_xt;  ///< along the diagonal e[L][L]
    /// Accelerated diagonal e[2L][L]; entries without a 2L time level are
    /// absent (empty-marked in table output).
    std::vector<std::optional<double>> eoc_xtt;
};

/// Builds the rate margins of a rectangular error grid indexed [Lt][Lx]:
/// eoc = log2(e_coarse / e_fine) between adjacent entries along the finest
/// row/column, the diagonal, and the two-time-levels-per-space-level
/// diagonal.  Throws NonPositiveError unless every error is finite and > 0.
inline EocTable eoc_table(const std::vector<std::vector<double>>& errors) {
    if (errors.empty() || errors.front().empty())
        fail(ErrorCode::ConfigInvalid, "eoc table needs a nonempty grid");
    const size_t nt = errors.size();
    const size_t nx = errors.front().size();
    for (const auto& row : errors) {
        if (row.size() != nx)
            fail(ErrorCode::ConfigInvalid, "eoc table grid is ragged");
        for (double e : row)
            if (!(e > 0.0) || !std::isfinite(e))
                fail(ErrorCode::NonPositiveError,
                     str_printf("eoc requires positive errors (got %g)", e));
    }

    EocTable table;
    table.errors = errors;
    const auto rate = [](double coarse, double fine) {
        return std::log2(coarse / fine);
    };
    for (size_t j = 1; j < nx; ++j)
        table.eoc_x.push_back(rate(errors[nt - 1][j - 1], errors[nt - 1][j]));
    for (size_t i = 1; i < nt; ++i)
        table.eoc_t.push_back(rate(errors[i - 1][nx - 1], errors[i][nx - 1]));
    for (size_t l = 1; l < std::min(nt, nx); ++l)
        table.eoc_xt.push_back(rate(errors[l - 1][l - 1], errors[l][l]));
    for (size_t l = 1; l < nx; ++l) {
        if (2 * l <= nt - 1)
            table.eoc_xtt.push_back(
                rate(errors[2 * (l - 1)][l - 1], errors[2 * l][l]));
        else
            table.eoc_xtt.push_back(std::nullopt);
    }
    return table;
}

}  // namespace cutmove
