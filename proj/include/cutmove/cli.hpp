#pragma once

/// @file cli.hpp
/// Command-line driver: single runs with diagnostics/error/mass outputs,
/// convergence studies over (Lt, Lx) refinement grids written as CSV tables
/// with rate margins, and vertex-table snapshot exports.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cutmove/analysis.hpp"
#include "cutmove/cases.hpp"
#include "cutmove/core.hpp"
#include "cutmove/stepper.hpp"

namespace cutmove {

/// Parsed command-line options (flags take precedence over case-file values,
/// which take precedence over built-in defaults).
struct CliOptions {
    std::string command;
    std::string case_arg;
    std::string out = "out";
    int Lx = 0;
    int Lt = 0;
    int step = 0;
    bool has_step = false;
    int dt_div = 0;  ///< 0 = use the case's base step count
    TimeScheme scheme = TimeScheme::ImplicitEuler;
    GhostVariant ghost = GhostVariant::Direct;
    FormVariant form = FormVariant::Implementation;
    double c_gamma = 1.0;
    bool conservative = false;
    double jitter = 0.0;
    std::uint64_t seed = 0;
};

namespace detail {

inline int parse_int(const std::string& text, const std::string& flag) {
    char* end = nullptr;
    const long v = std::strtol(text.c_str(), &end, 10);
    if (end != text.c_str() + text.size() || text.empty())
        fail(ErrorCode::ConfigInvalid,
             flag + " expects an integer (got '" + text + "')");
    return static_cast<int>(v);
}

inline double parse_double(const std::string& text, const std::string& flag) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || text.empty())
        fail(ErrorCode::ConfigInvalid,
             flag + " expects a number (got '" + text + "')");
    return v;
}

inline std::uint64_t parse_u64(const std::string& text,
                               const std::string& flag) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
    if (end != text.c_str() + text.size() || text.empty())
        fail(ErrorCode::ConfigInvalid,
             flag + " expects an unsigned integer (got '" + text + "')");
    return static_cast<std::uint64_t>(v);
}

inline CliOptions parse_options(const std::vector<std::string>& args) {
    if (args.size() < 2)
        fail(ErrorCode::ConfigInvalid,
             "usage: cutmove <run|convergence|export> <case> [flags]");
    CliOptions opt;
    opt.command = args[0];
    opt.case_arg = args[1];
    if (opt.command != "run" && opt.command != "convergence" &&
        opt.command != "export")
        fail(ErrorCode::ConfigInvalid,
             "unknown command '" + opt.command +
                 "' (expected run, convergence, or export)");

    auto need_value = [&](size_t i, const std::string& flag) -> std::string {
        if (i + 1 >= args.size())
            fail(ErrorCode::ConfigInvalid, flag + " requires a value");
        return args[i + 1];
    };
    for (size_t i = 2; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a == "--Lx") {
            opt.Lx = parse_int(need_value(i++, a), a);
        } else if (a == "--Lt") {
            opt.Lt = parse_int(need_value(i++, a), a);
        } else if (a == "--step") {
            opt.step = parse_int(need_value(i++, a), a);
            opt.has_step = true;
        } else if (a == "--dt-div") {
            opt.dt_div = parse_int(need_value(i++, a), a);
            if (opt.dt_div < 1)
                fail(ErrorCode::ConfigInvalid, "--dt-div must be >= 1");
        } else if (a == "--scheme") {
            const std::string v = need_value(i++, a);
            if (v == "ie")
                opt.scheme = TimeScheme::ImplicitEuler;
            else if (v == "bdf2")
                opt.scheme = TimeScheme::Bdf2;
            else
                fail(ErrorCode::ConfigInvalid,
                     "--scheme expects ie or bdf2 (got '" + v + "')");
        } else if (a == "--ghost") {
            const std::string v = need_value(i++, a);
            if (v == "dir")
                opt.ghost = GhostVariant::Direct;
            else if (v == "lps")
                opt.ghost = GhostVariant::Lps;
            else if (v == "djump")
                opt.ghost = GhostVariant::Djump;
            else
                fail(ErrorCode::ConfigInvalid,
                     "--ghost expects dir, lps, or djump (got '" + v + "')");
        } else if (a == "--form") {
            const std::string v = need_value(i++, a);
            if (v == "impl")
                opt.form = FormVariant::Implementation;
            else if (v == "skew")
                opt.form = FormVariant::Skew;
            else
                fail(ErrorCode::ConfigInvalid,
                     "--form expects impl or skew (got '" + v + "')");
        } else if (a == "--cgamma") {
            opt.c_gamma = parse_double(need_value(i++, a), a);
        } else if (a == "--conservative") {
            opt.conservative = true;
        } else if (a == "--jitter") {
            opt.jitter = parse_double(need_value(i++, a), a);
        } else if (a == "--seed") {
            opt.seed = parse_u64(need_value(i++, a), a);
        } else if (a == "--out") {
            opt.out = need_value(i++, a);
        } else {
            fail(ErrorCode::ConfigInvalid, "unknown flag '" + a + "'");
        }
        if (opt.Lx < 0 || opt.Lx > 12 || opt.Lt < 0 || opt.Lt > 14)
            fail(ErrorCode::ConfigInvalid,
                 "refinement levels must lie in [0, 12] / [0, 14]");
    }
    return opt;
}

/// Resolves the case argument: an existing file path loads as a case file,
/// anything else must be a builtin name.  Cases without benchmark levels
/// (user files) default to base_n = 8 and eight base steps.
inline ProblemCase resolve_case(const std::string& arg) {
    ProblemCase pc = std::filesystem::exists(arg) &&
                             std::filesystem::is_regular_file(arg)
                         ? load_case(arg)
                         : builtin_case(arg);
    if (pc.base_n <= 0) pc.base_n = 8;
    return pc;
}

/// Base number of time steps: the case's nominal step snapped so that
/// N * dt = T holds exactly to the run() gate.
inline int base_steps(const ProblemCase& pc) {
    if (!(pc.base_dt > 0.0)) return 8;
    return static_cast<int>(std::ceil(pc.final_time / pc.base_dt - 1e-9));
}

/// A mesh, its FE space, and a completed trace, with stable addresses.
struct LevelRun {
    BackgroundMesh mesh;
    FeSpace space;
    SolutionTrace trace;
    double dt = 0.0;
    int n = 0;
};

inline std::unique_ptr<LevelRun> run_level(const ProblemCase& pc,
                                           const CliOptions& opt, int Lx,
                                           int Lt,
                                           std::ostream* log = nullptr) {
    auto lr = std::make_unique<LevelRun>();
    lr->n = pc.base_n * (1 << Lx);
    lr->mesh = build_structured_mesh(pc.box, lr->n, opt.jitter, opt.seed);
    lr->space = make_fespace(lr->mesh);
    const int steps =
        (opt.dt_div > 0 ? opt.dt_div : base_steps(pc)) * (1 << Lt);
    lr->dt = pc.final_time / steps;

    StepConfig config;
    config.dt = lr->dt;
    config.scheme = opt.scheme;
    config.ghost = opt.ghost;
    config.form = opt.form;
    config.c_gamma = opt.c_gamma;
    config.conservative = opt.conservative;
    lr->trace = run(pc, lr->mesh, lr->space, config, log);
    return lr;
}

inline const char* scheme_name(TimeScheme s) {
    return s == TimeScheme::Bdf2 ? "bdf2" : "ie";
}
inline const char* ghost_name(GhostVariant g) {
    switch (g) {
        case GhostVariant::Lps: return "lps";
        case GhostVariant::Djump: return "djump";
        default: return "dir";
    }
}
inline const char* form_name(FormVariant f) {
    return f == FormVariant::Skew ? "skew" : "impl";
}

inline void write_metadata(const std::filesystem::path& path,
                           const ProblemCase& pc, const CliOptions& opt) {
    std::ofstream out(path);
    if (!out)
        fail(ErrorCode::ConfigInvalid,
             "cannot write '" + path.string() + "'");
    out << "case = " << pc.name << "\n";
    out << "command = " << opt.command << "\n";
    out << "scheme = " << scheme_name(opt.scheme) << "\n";
    out << "ghost = " << ghost_name(opt.ghost) << "\n";
    out << "form = " << form_name(opt.form) << "\n";
    out << str_printf("cgamma = %.17g\n", opt.c_gamma);
    out << "conservative = " << (opt.conservative ? 1 : 0) << "\n";
    out << str_printf("jitter = %.17g\n", opt.jitter);
    out << "seed = " << opt.seed << "\n";
    out << "base_n = " << pc.base_n << "\n";
    out << "base_steps = " << base_steps(pc) << "\n";
    if (opt.dt_div > 0) out << "dt_div = " << opt.dt_div << "\n";
    out << "note = eoc_t margins run down the finest-space column; eoc_x "
           "margins run along the finest-time row\n";
    out << "note = conservative BDF2 enforces the same single scalar mass "
           "constraint as implicit Euler\n";
    for (const std::string& n : pc.notes) out << "note = " << n << "\n";
}

/// Writes one error grid with its rate margins in the table layout:
/// rows = Lt (plus margin rows), columns = Lx (plus the eoc_t column).
inline void write_grid_csv(const std::filesystem::path& path,
                           const EocTable& table) {
    std::ofstream out(path);
    if (!out)
        fail(ErrorCode::ConfigInvalid,
             "cannot write '" + path.string() + "'");
    const size_t nt = table.errors.size();
    const size_t nx = table.errors.front().size();
    out << "Lt\\Lx";
    for (size_t j = 0; j < nx; ++j) out << "," << j;
    out << ",eoc_t\n";
    for (size_t i = 0; i < nt; ++i) {
        out << i;
        for (size_t j = 0; j < nx; ++j)
            out << "," << str_printf("%.6e", table.errors[i][j]);
        if (i >= 1)
            out << "," << str_printf("%.3f", table.eoc_t[i - 1]);
        else
            out << ",";
        out << "\n";
    }
    auto margin_row = [&](const char* label, auto&& value_at) {
        out << label;
        for (size_t j = 0; j < nx; ++j) {
            out << ",";
            value_at(j);
        }
        out << ",\n";
    };
    margin_row("eoc_x", [&](size_t j) {
        if (j >= 1) out << str_printf("%.3f", table.eoc_x[j - 1]);
    });
    margin_row("eoc_xt", [&](size_t j) {
        if (j >= 1 && j < table.eoc_xt.size() + 1)
            out << str_printf("%.3f", table.eoc_xt[j - 1]);
    });
    margin_row("eoc_xtt", [&](size_t j) {
        if (j >= 1 && table.eoc_xtt[j - 1].has_value())
            out << str_printf("%.3f", *table.eoc_xtt[j - 1]);
    });
}

inline int cmd_run(const ProblemCase& pc, const CliOptions& opt) {
    std::filesystem::create_directories(opt.out);
    const std::filesystem::path dir(opt.out);

    std::ofstream log(dir / "diagnostics.log");
    if (!log)
        fail(ErrorCode::ConfigInvalid,
             "cannot write '" + (dir / "diagnostics.log").string() + "'");
    const auto lr = run_level(pc, opt, opt.Lx, opt.Lt, &log);
    log.close();

    const MassTrace mt = mass_trace(lr->trace);
    {
        std::ofstream mass(dir / "mass.csv");
        mass << "step,t,mass\n";
        for (size_t n = 0; n < mt.mass.size(); ++n)
            mass << n << ","
                 << str_printf("%.17g", lr->trace.states[n].time) << ","
                 << str_printf("%.17g", mt.mass[n]) << "\n";
        mass << str_printf("# max_deviation = %.17g\n", mt.deviation);
    }
    if (pc.exact) {
        const ErrorReport rep = error_norms(lr->trace, pc);
        std::ofstream err(dir / "errors.txt");
        err << str_printf("L2L2 = %.17g\n", rep.L2L2);
        err << str_printf("L2H1 = %.17g\n", rep.L2H1);
        err << str_printf("LinfL2 = %.17g\n", rep.LinfL2);
        err << str_printf("mass_deviation = %.17g\n", rep.mass_deviation);
        for (size_t n = 0; n < rep.step_l2.size(); ++n)
            err << str_printf("n=%zu t=%.17g l2=%.17g h1=%.17g\n", n,
                              lr->trace.states[n].time, rep.step_l2[n],
                              rep.step_h1[n]);
    }
    write_metadata(dir / "metadata.txt", pc, opt);
    return 0;
}

inline int cmd_convergence(const ProblemCase& pc, const CliOptions& opt) {
    if (!pc.exact)
        fail(ErrorCode::NoExactSolution,
             "case '" + pc.name + "' defines no exact solution");
    std::filesystem::create_directories(opt.out);
    const std::filesystem::path dir(opt.out);

    const size_t nt = static_cast<size_t>(opt.Lt) + 1;
    const size_t nx = static_cast<size_t>(opt.Lx) + 1;
    std::vector<std::vector<double>> l2l2(nt, std::vector<double>(nx));
    std::vector<std::vector<double>> l2h1(nt, std::vector<double>(nx));
    std::vector<std::vector<double>> linfl2(nt, std::vector<double>(nx));
    for (size_t i = 0; i < nt; ++i)
        for (size_t j = 0; j < nx; ++j) {
            const auto lr = run_level(pc, opt, static_cast<int>(j),
                                      static_cast<int>(i));
            const ErrorReport rep = error_norms(lr->trace, pc);
            l2l2[i][j] = rep.L2L2;
            l2h1[i][j] = rep.L2H1;
            linfl2[i][j] = rep.LinfL2;
        }
    write_grid_csv(dir / "l2l2.csv", eoc_table(l2l2));
    write_grid_csv(dir / "l2h1.csv", eoc_table(l2h1));
    write_grid_csv(dir / "linfl2.csv", eoc_table(linfl2));
    write_metadata(dir / "metadata.txt", pc, opt);
    return 0;
}

inline int cmd_export(const ProblemCase& pc, const CliOptions& opt) {
    std::filesystem::create_directories(opt.out);
    const std::filesystem::path dir(opt.out);
    const auto lr = run_level(pc, opt, opt.Lx, opt.Lt);
    const int n_states = static_cast<int>(lr->trace.states.size());
    if (opt.step < 0 || opt.step >= n_states)
        fail(ErrorCode::IndexOutOfRange,
             str_printf("snapshot step %d outside [0, %d]", opt.step,
                        n_states - 1));
    const TraceState& st = lr->trace.states[static_cast<size_t>(opt.step)];
    std::ofstream out(dir / str_printf("snapshot_%d.txt", opt.step));
    out << "x y phi u active\n";
    for (int v = 0; v < lr->mesh.n_vertices(); ++v) {
        const Vec2 p = lr->mesh.vertices[static_cast<size_t>(v)];
        const bool active = st.u.active_mask[static_cast<size_t>(v)] != 0;
        out << str_printf(
            "%.17g %.17g %.17g %.17g %d\n", p.x, p.y,
            st.slice.levelset.vertex_values[static_cast<size_t>(v)],
            active ? st.u.coefficients[static_cast<size_t>(v)] : 0.0,
            active ? 1 : 0);
    }
    write_metadata(dir / "metadata.txt", pc, opt);
    return 0;
}

}  // namespace detail

/// Entry point shared by the binary and the tests.  Returns 0 on success,
/// 2 on configuration errors, 1 on runtime (solver/geometry) errors.
inline int cli_main(const std::vector<std::string>& args,
                    std::ostream& errs = std::cerr) {
    try {
        const CliOptions opt = detail::parse_options(args);
        const ProblemCase pc = detail::resolve_case(opt.case_arg);
        if (opt.command == "run") return detail::cmd_run(pc, opt);
        if (opt.command == "convergence") return detail::cmd_convergence(pc, opt);
        return detail::cmd_export(pc, opt);
    } catch (const Error& e) {
        errs << "error: " << e.what() << "\n";
        return is_config_error(e.code()) ? 2 : 1;
    } catch (const std::exception& e) {
        errs << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace cutmove
