#pragma once

/// @file cases.hpp
/// Built-in benchmark problems (a traveling circle, growing/shrinking
/// circles, a mass-conservation variant, and a colliding-circles topology
/// test) plus a small arithmetic expression language and a key=value case
/// file loader so user-defined problems can be run from configuration files.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cutmove/core.hpp"

namespace cutmove {

constexpr double kPi = 3.14159265358979323846;

/// Scalar field of space and time.
using ScalarField = std::function<double(const Vec2&, double)>;
/// Vector field of space and time.
using VectorField = std::function<Vec2(const Vec2&, double)>;
/// Purely spatial field (initial data).
using SpatialField = std::function<double(const Vec2&)>;

// ---------------------------------------------------------------------------
// Expression language
// ---------------------------------------------------------------------------

/// Parsed arithmetic expression in variables x, y, t with constant pi,
/// operators + - * / ^ (binary left-associative except ^, which is
/// right-associative and binds tighter than unary minus) and functions
/// sin, cos, exp, sqrt, abs (one argument) and min, max (two arguments).
class Expression {
  public:
    /// Parses `text`, throwing ParseError with a column position on failure.
    static Expression parse(const std::string& text) {
        Parser parser{text, 0, 0};
        Expression e;
        e.text_ = text;
        e.root_ = parser.parse_expr(e.nodes_);
        parser.skip_spaces();
        if (parser.pos != text.size())
            parser.error("unexpected trailing input");
        return e;
    }

    double eval(double x, double y, double t) const {
        return eval_node(root_, x, y, t);
    }

    const std::string& text() const { return text_; }

  private:
    enum class Op : std::uint8_t {
        Number, VarX, VarY, VarT,
        Add, Sub, Mul, Div, Pow, Neg,
        Sin, Cos, Exp, Sqrt, Abs, Min, Max,
    };
    struct Node {
        Op op;
        double value;
        int a, b;
    };

    struct Parser {
        const std::string& text;
        size_t pos;
        int depth;

        [[noreturn]] void error(const std::string& what) const {
            fail(ErrorCode::ParseError,
                 str_printf("expression error at column %zu: %s", pos + 1,
                            what.c_str()));
        }
        void skip_spaces() {
            while (pos < text.size() &&
                   (text[pos] == ' ' || text[pos] == '\t'))
                ++pos;
        }
        bool eat(char c) {
            skip_spaces();
            if (pos < text.size() && text[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }

        struct DepthGuard {
            Parser& p;
            explicit DepthGuard(Parser& parser) : p(parser) {
                if (++p.depth > 200) p.error("expression too deeply nested");
            }
            ~DepthGuard() { --p.depth; }
        };

        int parse_expr(std::vector<Node>& nodes) {
            DepthGuard guard(*this);
            int left = parse_term(nodes);
            for (;;) {
                if (eat('+'))
                    left = push(nodes, {Op::Add, 0.0, left,
                                        parse_term(nodes)});
                else if (eat('-'))
                    left = push(nodes, {Op::Sub, 0.0, left,
                                        parse_term(nodes)});
                else
                    return left;
            }
        }

        int parse_term(std::vector<Node>& nodes) {
            int left = parse_unary(nodes);
            for (;;) {
                if (eat('*'))
                    left = push(nodes, {Op::Mul, 0.0, left,
                                        parse_unary(nodes)});
                else if (eat('/'))
                    left = push(nodes, {Op::Div, 0.0, left,
                                        parse_unary(nodes)});
                else
                    return left;
            }
        }

        int parse_unary(std::vector<Node>& nodes) {
            DepthGuard guard(*this);
            if (eat('-'))
                return push(nodes, {Op::Neg, 0.0, parse_unary(nodes), -1});
            return parse_power(nodes);
        }

        int parse_power(std::vector<Node>& nodes) {
            int base = parse_atom(nodes);
            if (eat('^'))
                return push(nodes,
                            {Op::Pow, 0.0, base, parse_unary(nodes)});
            return base;
        }

        int parse_atom(std::vector<Node>& nodes) {
            DepthGuard guard(*this);
            skip_spaces();
            if (pos >= text.size()) error("unexpected end of expression");
            const char c = text[pos];
            if (c == '(') {
                ++pos;
                const int inner = parse_expr(nodes);
                if (!eat(')')) error("expected ')'");
                return inner;
            }
            if ((c >= '0' && c <= '9') || c == '.') {
                char* end = nullptr;
                const double v = std::strtod(text.c_str() + pos, &end);
                if (end == text.c_str() + pos) error("malformed number");
                pos = static_cast<size_t>(end - text.c_str());
                return push(nodes, {Op::Number, v, -1, -1});
            }
            if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                c == '_') {
                const size_t start = pos;
                while (pos < text.size() &&
                       ((text[pos] >= 'a' && text[pos] <= 'z') ||
                        (text[pos] >= 'A' && text[pos] <= 'Z') ||
                        (text[pos] >= '0' && text[pos] <= '9') ||
                        text[pos] == '_'))
                    ++pos;
                const std::string name = text.substr(start, pos - start);
                if (name == "x") return push(nodes, {Op::VarX, 0.0, -1, -1});
                if (name == "y") return push(nodes, {Op::VarY, 0.0, -1, -1});
                if (name == "t") return push(nodes, {Op::VarT, 0.0, -1, -1});
                if (name == "pi")
                    return push(nodes, {Op::Number, kPi, -1, -1});
                const Op fn = function_op(name);
                if (!eat('('))
                    error("unknown identifier '" + name + "'");
                const int a = parse_expr(nodes);
                int b = -1;
                const bool binary = fn == Op::Min || fn == Op::Max;
                if (binary) {
                    if (!eat(',')) error("expected ',' in " + name + "()");
                    b = parse_expr(nodes);
                } else if (eat(',')) {
                    error(name + "() takes one argument");
                }
                if (!eat(')')) error("expected ')'");
                return push(nodes, {fn, 0.0, a, b});
            }
            error(str_printf("unexpected character '%c'", c));
        }

        Op function_op(const std::string& name) {
            if (name == "sin") return Op::Sin;
            if (name == "cos") return Op::Cos;
            if (name == "exp") return Op::Exp;
            if (name == "sqrt") return Op::Sqrt;
            if (name == "abs") return Op::Abs;
            if (name == "min") return Op::Min;
            if (name == "max") return Op::Max;
            error("unknown function '" + name + "'");
        }

        static int push(std::vector<Node>& nodes, Node n) {
            nodes.push_back(n);
            return static_cast<int>(nodes.size()) - 1;
        }
    };

    double eval_node(int index, double x, double y, double t) const {
        const Node& n = nodes_[static_cast<size_t>(index)];
        switch (n.op) {
            case Op::Number: return n.value;
            case Op::VarX: return x;
            case Op::VarY: return y;
            case Op::VarT: return t;
            case Op::Add:
                return eval_node(n.a, x, y, t) + eval_node(n.b, x, y, t);
            case Op::Sub:
                return eval_node(n.a, x, y, t) - eval_node(n.b, x, y, t);
            case Op::Mul:
                return eval_node(n.a, x, y, t) * eval_node(n.b, x, y, t);
            case Op::Div:
                return eval_node(n.a, x, y, t) / eval_node(n.b, x, y, t);
            case Op::Pow: {
                const double base = eval_node(n.a, x, y, t);
                const double expo = eval_node(n.b, x, y, t);
                // Small integer exponents multiply out directly so that e.g.
                // z^2 is bitwise identical to z*z.
                if (expo == std::rint(expo) && std::abs(expo) <= 32.0) {
                    const int k = static_cast<int>(std::abs(expo));
                    if (k == 0) return 1.0;
                    double out = base;
                    for (int i = 1; i < k; ++i) out *= base;
                    return expo < 0.0 ? 1.0 / out : out;
                }
                return std::pow(base, expo);
            }
            case Op::Neg: return -eval_node(n.a, x, y, t);
            case Op::Sin: return std::sin(eval_node(n.a, x, y, t));
            case Op::Cos: return std::cos(eval_node(n.a, x, y, t));
            case Op::Exp: return std::exp(eval_node(n.a, x, y, t));
            case Op::Sqrt: return std::sqrt(eval_node(n.a, x, y, t));
            case Op::Abs: return std::abs(eval_node(n.a, x, y, t));
            case Op::Min:
                return std::min(eval_node(n.a, x, y, t),
                                eval_node(n.b, x, y, t));
            case Op::Max:
                return std::max(eval_node(n.a, x, y, t),
                                eval_node(n.b, x, y, t));
        }
        fail(ErrorCode::ParseError, "corrupt expression tree");
    }

    std::vector<Node> nodes_;
    int root_ = -1;
    std::string text_;
};

// ---------------------------------------------------------------------------
// Problem cases
// ---------------------------------------------------------------------------

/// A complete moving-domain benchmark problem: geometry (level set), velocity
/// with analytic divergence and an a-priori bound on |w.n|, coefficients,
/// initial datum, and optional exact solution / source / Dirichlet data.
struct ProblemCase {
    std::string name;
    Box box{};
    double final_time = 0.0;
    double alpha = 0.0;   ///< diffusivity, > 0
    double w_inf = 0.0;   ///< analytic bound on |w.n| over the run (0 = stationary)

    ScalarField levelset;      ///< phi(x, t); domain is phi < 0
    VectorField velocity;      ///< w(x, t)
    ScalarField div_velocity;  ///< analytic div w
    SpatialField initial;      ///< u0(x)
    ScalarField exact;         ///< optional exact solution (may be null)
    ScalarField source;        ///< optional source (null means zero)
    ScalarField dirichlet;     ///< optional Dirichlet data (may be null)

    double base_dt = 0.0;  ///< benchmark level-0 time step (0 = unspecified)
    int base_n = 0;        ///< benchmark level-0 structured resolution

    /// Field definitions as expression/number text, for case-file
    /// serialization; absent entries have no closed-form expression.
    std::map<std::string, std::string> definition;
    /// Declared modeling choices, emitted into output metadata.
    std::vector<std::string> notes;
};

namespace detail {

inline std::string fmt_number(double v) { return str_printf("%.17g", v); }

/// Traveling circle: rigidly advected cosine-squared bump.  The transport
/// terms cancel along the motion, so the source balances diffusion only:
/// f = alpha * (2 k^2 cos(2kr) + k sin(2kr)/r), k = pi / (2 R0), R0 = 1/2.
inline ProblemCase make_example1(bool mass_variant) {
    ProblemCase pc;
    pc.name = mass_variant ? "example3_mass" : "example1_travel";
    pc.box = Box{-0.7, -0.7, 0.9, 0.7};
    pc.final_time = 0.2;
    pc.alpha = mass_variant ? 0.1 : 1.0;
    pc.w_inf = 2.0;
    pc.base_dt = 0.1;
    pc.base_n = 8;

    auto rho_x = [](double t) { return std::sin(2.0 * kPi * t) / kPi; };
    pc.levelset = [rho_x](const Vec2& p, double t) {
        return norm(Vec2{p.x - rho_x(t), p.y}) - 0.5;
    };
    pc.velocity = [](const Vec2&, double t) {
        return Vec2{2.0 * std::cos(2.0 * kPi * t), 0.0};
    };
    pc.div_velocity = [](const Vec2&, double) { return 0.0; };

    if (mass_variant) {
        pc.initial = [](const Vec2& p) { return std::sin(kPi * norm(p)); };
        pc.source = [](const Vec2&, double) { return 0.0; };
    } else {
        pc.exact = [rho_x](const Vec2& p, double t) {
            const double c = std::cos(kPi * norm(Vec2{p.x - rho_x(t), p.y}));
            return c * c;
        };
        pc.initial = [e = pc.exact](const Vec2& p) { return e(p, 0.0); };
        pc.source = [rho_x](const Vec2& p, double t) {
            const double r = norm(Vec2{p.x - rho_x(t), p.y});
            const double arg = 2.0 * kPi * r;
            const double sin_over_r =
                r < 1e-12 ? 2.0 * kPi : std::sin(arg) / r;
            return 2.0 * (kPi * kPi) * std::cos(arg) + kPi * sin_over_r;
        };
    }

    const std::string r = "sqrt((x - sin(2*pi*t)/pi)^2 + y^2)";
    pc.definition["name"] = pc.name;
    pc.definition["box"] = "-0.7 -0.7 0.9 0.7";
    pc.definition["T"] = fmt_number(pc.final_time);
    pc.definition["alpha"] = fmt_number(pc.alpha);
    pc.definition["w_inf"] = fmt_number(pc.w_inf);
    pc.definition["phi"] = r + " - 0.5";
    pc.definition["wx"] = "2*cos(2*pi*t)";
    pc.definition["wy"] = "0";
    pc.definition["divw"] = "0";
    if (mass_variant) {
        pc.definition["u0"] = "sin(pi*sqrt(x^2 + y^2))";
        pc.definition["f"] = "0";
    } else {
        pc.definition["u0"] = "cos(pi*sqrt(x^2 + y^2))^2";
        pc.definition["ue"] = "cos(pi*" + r + ")^2";
        pc.definition["f"] = "2*(pi*pi)*cos(2*pi*" + r + ") + pi*(sin(2*pi*" +
                             r + ")/" + r + ")";
    }
    pc.notes = {"exact solution profile uses radius R0 = 0.5",
                "w_inf = 2 is the time-max of |2 cos(2 pi t)|"};
    if (mass_variant)
        pc.notes = {"geometry and velocity of the traveling-circle case",
                    "no exact solution; the quantity of interest is the "
                    "discrete mass trace"};
    return pc;
}

/// Growing (beta=+1, R0=1/2) or shrinking (beta=-1, R0=1) circle under the
/// radial flow w = beta*x.  The profile cos(pi r / R(t)) rides the flow, so
/// f = div(w) cos(s) + alpha (pi/R)^2 (cos s + sin(s)/s), s = pi r / R(t).
inline ProblemCase make_example2(double beta) {
    ProblemCase pc;
    pc.name = beta > 0 ? "example2_grow" : "example2_shrink";
    pc.box = Box{-1.25, -1.25, 1.25, 1.25};
    pc.final_time = std::log(2.0);
    pc.alpha = 0.2;
    pc.w_inf = 1.0;
    pc.base_dt = 0.5;
    pc.base_n = 6;

    const double r0 = beta > 0 ? 0.5 : 1.0;
    auto radius = [r0, beta](double t) { return r0 * std::exp(beta * t); };
    pc.levelset = [radius](const Vec2& p, double t) {
        return norm(p) - radius(t);
    };
    pc.velocity = [beta](const Vec2& p, double) { return beta * p; };
    pc.div_velocity = [beta](const Vec2&, double) { return 2.0 * beta; };
    pc.exact = [radius](const Vec2& p, double t) {
        return std::cos(kPi * norm(p) / radius(t));
    };
    pc.initial = [e = pc.exact](const Vec2& p) { return e(p, 0.0); };
    const double alpha = pc.alpha;
    pc.source = [radius, beta, alpha](const Vec2& p, double t) {
        const double R = radius(t);
        const double s = kPi * norm(p) / R;
        const double sinc = s < 1e-12 ? 1.0 : std::sin(s) / s;
        const double q = kPi / R;
        return 2.0 * beta * std::cos(s) +
               alpha * (q * q) * (std::cos(s) + sinc);
    };

    const std::string R = beta > 0 ? "(0.5*exp(t))" : "exp(-t)";
    const std::string s = "pi*sqrt(x^2 + y^2)/" + R;
    pc.definition["name"] = pc.name;
    pc.definition["box"] = "-1.25 -1.25 1.25 1.25";
    pc.definition["T"] = fmt_number(pc.final_time);
    pc.definition["alpha"] = fmt_number(pc.alpha);
    pc.definition["w_inf"] = fmt_number(pc.w_inf);
    pc.definition["phi"] = "sqrt(x^2 + y^2) - " + R;
    pc.definition["wx"] = beta > 0 ? "x" : "-x";
    pc.definition["wy"] = beta > 0 ? "y" : "-y";
    pc.definition["divw"] = beta > 0 ? "2" : "-2";
    pc.definition["u0"] = beta > 0 ? "cos(pi*sqrt(x^2 + y^2)/0.5)"
                                   : "cos(pi*sqrt(x^2 + y^2))";
    pc.definition["ue"] = "cos(" + s + ")";
    pc.definition["f"] = std::string(beta > 0 ? "2" : "-2") + "*cos(" + s +
                         ") + " + fmt_number(pc.alpha) + "*((pi/" + R +
                         ")^2)*(cos(" + s + ") + sin(" + s + ")/(" + s + "))";
    pc.notes = {"level-0 resolution n = 6 (cell 0.4167) approximates the "
                "nominal h0 = 0.4"};
    return pc;
}

/// Two circles that collide, merge, and separate again; piecewise-constant
/// vertical velocity, discontinuous at y = 0 and t = T/2.  Qualitative
/// benchmark: no exact solution, conservative runs.
inline ProblemCase make_example4() {
    ProblemCase pc;
    pc.name = "example4_topology";
    pc.box = Box{-1.0, -1.5, 1.0, 1.5};
    pc.final_time = 1.5;
    pc.alpha = 0.1;
    pc.w_inf = 1.0;
    pc.base_dt = 0.15;
    pc.base_n = 43;

    pc.levelset = [](const Vec2& p, double t) {
        const double d1 = norm(Vec2{p.x, p.y - (t - 0.75)});
        const double d2 = norm(Vec2{p.x, p.y - (0.75 - t)});
        return std::min(d1, d2) - 0.5;
    };
    pc.velocity = [](const Vec2& p, double t) {
        const bool up = (p.y > 0.0) == (t <= 0.75);
        return Vec2{0.0, up ? 1.0 : -1.0};
    };
    pc.div_velocity = [](const Vec2&, double) { return 0.0; };
    pc.initial = [](const Vec2& p) { return p.y < 0.0 ? -1.0 : 1.0; };
    pc.source = [](const Vec2&, double) { return 0.0; };

    pc.definition["name"] = pc.name;
    pc.definition["box"] = "-1 -1.5 1 1.5";
    pc.definition["T"] = fmt_number(pc.final_time);
    pc.definition["alpha"] = fmt_number(pc.alpha);
    pc.definition["w_inf"] = fmt_number(pc.w_inf);
    pc.definition["phi"] =
        "min(sqrt(x^2 + (y - (t - 0.75))^2), "
        "sqrt(x^2 + (y - (0.75 - t))^2)) - 0.5";
    // The velocity and initial datum are piecewise and have no expression
    // form, so this case cannot be serialized to a case file.
    pc.notes = {
        "circle radius 0.5 and background box (-1,1)x(-1.5,1.5) are "
        "implementation choices for this qualitative benchmark",
        "velocity is the piecewise field (0,+-1) switching at y=0 and "
        "t=T/2; the level-set centers move in the opposite vertical sense",
        "piecewise velocity and initial datum have no expression form; the "
        "case cannot be saved to a case file"};
    return pc;
}

}  // namespace detail

/// Returns one of the built-in benchmark problems:
/// example1_travel, example2_grow, example2_shrink, example3_mass,
/// example4_topology.  Throws UnknownCase otherwise.
inline ProblemCase builtin_case(const std::string& name) {
    if (name == "example1_travel") return detail::make_example1(false);
    if (name == "example3_mass") return detail::make_example1(true);
    if (name == "example2_grow") return detail::make_example2(1.0);
    if (name == "example2_shrink") return detail::make_example2(-1.0);
    if (name == "example4_topology") return detail::make_example4();
    fail(ErrorCode::UnknownCase, "unknown builtin case '" + name + "'");
}

namespace detail {

inline std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
        --e;
    return s.substr(b, e - b);
}

inline double parse_full_number(const std::string& text,
                                const std::string& key) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || text.empty())
        fail(ErrorCode::ParseError,
             "key '" + key + "': malformed number '" + text + "'");
    return v;
}

inline ScalarField scalar_field(std::shared_ptr<const Expression> e) {
    return [e](const Vec2& p, double t) { return e->eval(p.x, p.y, t); };
}

}  // namespace detail

/// Parses a case from key=value text (see load_case for the file form).
inline ProblemCase parse_case_text(const std::string& text,
                                   const std::string& origin) {
    static const std::vector<std::string> known = {
        "name", "box", "T",  "alpha", "w_inf", "phi", "wx",
        "wy",   "divw", "u0", "ue",    "f",     "g_d"};
    std::map<std::string, std::string> kv;
    std::istringstream lines(text);
    std::string line;
    int lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::ParseError,
                 str_printf("%s:%d: expected key = value", origin.c_str(),
                            lineno));
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (std::find(known.begin(), known.end(), key) == known.end())
            fail(ErrorCode::ParseError,
                 str_printf("%s:%d: unknown key '%s'", origin.c_str(), lineno,
                            key.c_str()));
        if (kv.count(key))
            fail(ErrorCode::ParseError,
                 str_printf("%s:%d: duplicate key '%s'", origin.c_str(),
                            lineno, key.c_str()));
        if (value.empty())
            fail(ErrorCode::ParseError,
                 str_printf("%s:%d: empty value for '%s'", origin.c_str(),
                            lineno, key.c_str()));
        kv[key] = value;
    }

    for (const char* req : {"box", "T", "alpha", "phi", "u0"})
        if (!kv.count(req))
            fail(ErrorCode::MissingField,
                 origin + ": missing required key '" + std::string(req) + "'");

    ProblemCase pc;
    pc.name = kv.count("name") ? kv["name"] : "user_case";
    {
        std::istringstream bs(kv["box"]);
        double v[4];
        if (!(bs >> v[0] >> v[1] >> v[2] >> v[3]) || !(bs >> std::ws).eof())
            fail(ErrorCode::ParseError,
                 origin + ": box must hold exactly four numbers");
        pc.box = Box{v[0], v[1], v[2], v[3]};
        if (!(pc.box.xmax > pc.box.xmin) || !(pc.box.ymax > pc.box.ymin))
            fail(ErrorCode::ConfigInvalid, origin + ": box is degenerate");
    }
    pc.final_time = detail::parse_full_number(kv["T"], "T");
    pc.alpha = detail::parse_full_number(kv["alpha"], "alpha");
    if (!(pc.final_time > 0.0))
        fail(ErrorCode::ConfigInvalid, origin + ": T must be positive");
    if (!(pc.alpha > 0.0))
        fail(ErrorCode::ConfigInvalid, origin + ": alpha must be positive");

    auto parse_expr = [&](const std::string& key) {
        try {
            return std::make_shared<const Expression>(
                Expression::parse(kv[key]));
        } catch (const Error& e) {
            fail(e.code(), origin + ": key '" + key + "': " + e.what());
        }
    };

    pc.levelset = detail::scalar_field(parse_expr("phi"));
    {
        auto u0 = parse_expr("u0");
        pc.initial = [u0](const Vec2& p) { return u0->eval(p.x, p.y, 0.0); };
    }
    if (kv.count("ue")) pc.exact = detail::scalar_field(parse_expr("ue"));
    if (kv.count("f")) pc.source = detail::scalar_field(parse_expr("f"));
    if (kv.count("g_d")) pc.dirichlet = detail::scalar_field(parse_expr("g_d"));

    const bool has_w = kv.count("wx") || kv.count("wy");
    if (!has_w) {
        pc.velocity = [](const Vec2&, double) { return Vec2{0.0, 0.0}; };
        pc.div_velocity = [](const Vec2&, double) { return 0.0; };
        pc.w_inf =
            kv.count("w_inf") ? detail::parse_full_number(kv["w_inf"], "w_inf")
                              : 0.0;
    } else {
        if (!kv.count("wx")) kv["wx"] = "0";
        if (!kv.count("wy")) kv["wy"] = "0";
        auto wx = parse_expr("wx");
        auto wy = parse_expr("wy");
        pc.velocity = [wx, wy](const Vec2& p, double t) {
            return Vec2{wx->eval(p.x, p.y, t), wy->eval(p.x, p.y, t)};
        };
        // Probe the velocity on a sample grid; an identically-zero sample set
        // is treated as a stationary domain.
        bool nonzero = false;
        for (int i = 0; i < 5 && !nonzero; ++i)
            for (int j = 0; j < 5 && !nonzero; ++j)
                for (double tf : {0.0, 0.5, 1.0}) {
                    const Vec2 p{
                        pc.box.xmin + pc.box.width() * (0.5 + i) / 5.0,
                        pc.box.ymin + pc.box.height() * (0.5 + j) / 5.0};
                    const Vec2 w = pc.velocity(p, tf * pc.final_time);
                    if (!(w.x == 0.0) || !(w.y == 0.0)) {
                        nonzero = true;
                        break;
                    }
                }
        if (nonzero) {
            if (!kv.count("divw"))
                fail(ErrorCode::MissingField,
                     origin + ": nonzero velocity requires 'divw'");
            if (!kv.count("w_inf"))
                fail(ErrorCode::MissingField,
                     origin + ": nonzero velocity requires 'w_inf'");
            pc.div_velocity = detail::scalar_field(parse_expr("divw"));
            pc.w_inf = detail::parse_full_number(kv["w_inf"], "w_inf");
            if (pc.w_inf < 0.0)
                fail(ErrorCode::ConfigInvalid,
                     origin + ": w_inf must be nonnegative");
        } else {
            pc.div_velocity =
                kv.count("divw")
                    ? detail::scalar_field(parse_expr("divw"))
                    : ScalarField([](const Vec2&, double) { return 0.0; });
            pc.w_inf = kv.count("w_inf")
                           ? detail::parse_full_number(kv["w_inf"], "w_inf")
                           : 0.0;
        }
    }
    pc.definition = kv;
    return pc;
}

/// Loads a case from a UTF-8 key=value file.  Keys: name, box
/// (xmin ymin xmax ymax), T, alpha, w_inf, and the expression-valued phi,
/// wx, wy, divw, u0, ue, f, g_d.  '#' starts a comment.  A nonzero velocity
/// requires divw and w_inf.  Throws ParseError / MissingField /
/// ConfigInvalid.
inline ProblemCase load_case(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        fail(ErrorCode::ParseError, "cannot open case file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_case_text(ss.str(), path);
}

/// Writes the case's definition to a case file loadable by load_case.
/// Requires a complete expression-backed definition (the topology benchmark
/// has piecewise fields and cannot be saved).
inline void save_case(const ProblemCase& pc, const std::string& path) {
    if (!pc.definition.count("phi") || !pc.definition.count("u0"))
        fail(ErrorCode::ConfigInvalid,
             "case '" + pc.name + "' has no complete serializable definition");
    std::ofstream out(path);
    if (!out)
        fail(ErrorCode::ConfigInvalid, "cannot write case file '" + path + "'");
    static const std::vector<std::string> order = {
        "name", "box", "T",  "alpha", "w_inf", "phi", "wx",
        "wy",   "divw", "u0", "ue",    "f",     "g_d"};
    for (const std::string& key : order) {
        const auto it = pc.definition.find(key);
        if (it != pc.definition.end())
            out << key << " = " << it->second << "\n";
    }
}

}  // namespace cutmove
