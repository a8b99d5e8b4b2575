#pragma once

/// @file core.hpp
/// Shared basic types: 2D vectors, error taxonomy, deterministic hashing,
/// formatting helpers and the thread-count policy.

#include <array>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>

namespace cutmove {

// ---------------------------------------------------------------------------
// 2D vector
// ---------------------------------------------------------------------------

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
};

inline Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
/// z-component of the 3D cross product of the embedded vectors.
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& v) { return std::sqrt(v.x * v.x + v.y * v.y); }

/// Axis-aligned rectangle [xmin,xmax] x [ymin,ymax].
struct Box {
    double xmin = 0.0, ymin = 0.0, xmax = 1.0, ymax = 1.0;

    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    double area() const { return width() * height(); }
    bool contains(const Vec2& p, double tol = 0.0) const {
        return p.x >= xmin - tol && p.x <= xmax + tol &&
               p.y >= ymin - tol && p.y <= ymax + tol;
    }
};

// ---------------------------------------------------------------------------
// Error taxonomy
// ---------------------------------------------------------------------------

/// Failure categories surfaced by the library.  The command-line driver maps
/// configuration-class codes to exit status 2 and runtime-class codes to 1.
enum class ErrorCode {
    // configuration / input errors
    ConfigInvalid,
    UnknownCase,
    ParseError,
    MissingField,
    MissingDirichletData,
    IndexOutOfRange,
    NoExactSolution,
    // mesh / geometry errors
    DegenerateElement,
    NonManifold,
    MeshMismatch,
    EmptyRule,
    // discretization / algebra errors
    InactiveElement,
    NonFinite,
    Singular,
    NoConvergence,
    DegenerateConstraint,
    // time-stepping errors
    InclusionViolated,
    // analysis errors
    NonPositiveError,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
        case ErrorCode::ConfigInvalid:        return "ConfigInvalid";
        case ErrorCode::UnknownCase:          return "UnknownCase";
        case ErrorCode::ParseError:           return "ParseError";
        case ErrorCode::MissingField:         return "MissingField";
        case ErrorCode::MissingDirichletData: return "MissingDirichletData";
        case ErrorCode::IndexOutOfRange:      return "IndexOutOfRange";
        case ErrorCode::NoExactSolution:      return "NoExactSolution";
        case ErrorCode::DegenerateElement:    return "DegenerateElement";
        case ErrorCode::NonManifold:          return "NonManifold";
        case ErrorCode::MeshMismatch:         return "MeshMismatch";
        case ErrorCode::EmptyRule:            return "EmptyRule";
        case ErrorCode::InactiveElement:      return "InactiveElement";
        case ErrorCode::NonFinite:            return "NonFinite";
        case ErrorCode::Singular:             return "Singular";
        case ErrorCode::NoConvergence:        return "NoConvergence";
        case ErrorCode::DegenerateConstraint: return "DegenerateConstraint";
        case ErrorCode::InclusionViolated:    return "InclusionViolated";
        case ErrorCode::NonPositiveError:     return "NonPositiveError";
    }
    return "Unknown";
}

/// True for errors caused by user-supplied configuration rather than by the
/// solver or geometry failing at run time.
inline bool is_config_error(ErrorCode c) {
    switch (c) {
        case ErrorCode::ConfigInvalid:
        case ErrorCode::UnknownCase:
        case ErrorCode::ParseError:
        case ErrorCode::MissingField:
        case ErrorCode::MissingDirichletData:
        case ErrorCode::IndexOutOfRange:
        case ErrorCode::NoExactSolution:
            return true;
        default:
            return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what),
          code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

// ---------------------------------------------------------------------------
// Formatting helpers (printf-style; the toolchain's std::format is unusable)
// ---------------------------------------------------------------------------

inline std::string str_printf(const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    va_list args2;
    va_copy(args2, args);
    int n = std::vsnprintf(nullptr, 0, fmt, args);
    va_end(args);
    std::string out(n > 0 ? static_cast<size_t>(n) : 0, '\0');
    if (n > 0) std::vsnprintf(out.data(), out.size() + 1, fmt, args2);
    va_end(args2);
    return out;
}

/// Shortest round-trip-exact representation of a double (17 significant digits).
inline std::string fmt_full(double v) { return str_printf("%.17g", v); }

// ---------------------------------------------------------------------------
// Deterministic pseudo-random hashing (splitmix64)
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Uniform double in [-1, 1) from a hashed key; reproducible across platforms.
inline double hash_unit(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = splitmix64(seed ^ splitmix64(a ^ splitmix64(b)));
    return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

// ---------------------------------------------------------------------------
// Thread-count policy
// ---------------------------------------------------------------------------

/// Number of worker threads: CUTMOVE_THREADS if set (clamped to [1, 64]),
/// otherwise min(hardware_concurrency, 8).
inline int thread_count() {
    if (const char* env = std::getenv("CUTMOVE_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) return static_cast<int>(v > 64 ? 64 : v);
    }
    unsigned hc = std::thread::hardware_concurrency();
    if (hc == 0) hc = 1;
    return static_cast<int>(hc > 8 ? 8 : hc);
}

}  // namespace cutmove
