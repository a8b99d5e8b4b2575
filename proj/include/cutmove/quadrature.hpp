#pragma once

/// @file quadrature.hpp
/// Reference quadrature rules: symmetric triangle rules of polynomial
/// exactness 2/4/6 and Gauss–Legendre segment rules.  All rules are verified
/// numerically against exact monomial integrals by the unit tests.

#include <array>
#include <vector>

#include "cutmove/core.hpp"

namespace cutmove {

/// A concrete quadrature rule in physical coordinates.  For interface rules
/// `normal` carries the constant per-element unit normal.
struct QuadRule {
    std::vector<Vec2> points;
    std::vector<double> weights;
    Vec2 normal{0.0, 0.0};

    double total_weight() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }
};

/// Symmetric rule on the reference triangle in barycentric coordinates;
/// weights sum to 1 and scale with the physical element area.
struct TriangleRefRule {
    std::vector<std::array<double, 3>> bary;
    std::vector<double> weights;
};

namespace detail {

inline TriangleRefRule make_triangle_rule(int degree) {
    TriangleRefRule r;
    auto push3 = [&r](double a, double w) {
        double b = 1.0 - 2.0 * a;
        r.bary.push_back({b, a, a});
        r.bary.push_back({a, b, a});
        r.bary.push_back({a, a, b});
        r.weights.insert(r.weights.end(), 3, w);
    };
    auto push6 = [&r](double a, double b, double w) {
        double c = 1.0 - a - b;
        r.bary.push_back({a, b, c});
        r.bary.push_back({a, c, b});
        r.bary.push_back({b, a, c});
        r.bary.push_back({b, c, a});
        r.bary.push_back({c, a, b});
        r.bary.push_back({c, b, a});
        r.weights.insert(r.weights.end(), 6, w);
    };
    if (degree <= 2) {
        push3(1.0 / 6.0, 1.0 / 3.0);
    } else if (degree <= 4) {
        push3(0.445948490915965, 0.223381589678011);
        push3(0.091576213509771, 0.109951743655322);
    } else {
        push3(0.249286745170910, 0.116786275726379);
        push3(0.063089014491502, 0.050844906370207);
        push6(0.310352451033785, 0.636502499121399, 0.082851075618374);
    }
    return r;
}

}  // namespace detail

/// Triangle rule with polynomial exactness >= degree (supported: 2, 4, 6).
inline const TriangleRefRule& triangle_rule(int degree) {
    static const TriangleRefRule r2 = detail::make_triangle_rule(2);
    static const TriangleRefRule r4 = detail::make_triangle_rule(4);
    static const TriangleRefRule r6 = detail::make_triangle_rule(6);
    if (degree <= 2) return r2;
    if (degree <= 4) return r4;
    if (degree <= 6) return r6;
    fail(ErrorCode::ConfigInvalid,
         str_printf("no triangle rule of exactness %d (max 6)", degree));
}

/// Gauss–Legendre rule on [0,1]; weights sum to 1.
struct SegmentRefRule {
    std::vector<double> x;
    std::vector<double> w;
};

/// Segment rule with polynomial exactness >= degree (2/3/5/7 points 1..4).
inline const SegmentRefRule& segment_rule(int degree) {
    static const SegmentRefRule g1{{0.5}, {1.0}};
    static const SegmentRefRule g2{
        {0.5 - 0.28867513459481287, 0.5 + 0.28867513459481287}, {0.5, 0.5}};
    static const SegmentRefRule g3{
        {0.5 - 0.5 * 0.7745966692414834, 0.5, 0.5 + 0.5 * 0.7745966692414834},
        {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0}};
    static const SegmentRefRule g4{
        {0.5 - 0.5 * 0.8611363115940526, 0.5 - 0.5 * 0.3399810435848563,
         0.5 + 0.5 * 0.3399810435848563, 0.5 + 0.5 * 0.8611363115940526},
        {0.5 * 0.3478548451374538, 0.5 * 0.6521451548625461,
         0.5 * 0.6521451548625461, 0.5 * 0.3478548451374538}};
    if (degree <= 1) return g1;
    if (degree <= 3) return g2;
    if (degree <= 5) return g3;
    if (degree <= 7) return g4;
    fail(ErrorCode::ConfigInvalid,
         str_printf("no segment rule of exactness %d (max 7)", degree));
}

/// Appends the mapped triangle rule for physical triangle (a, b, c) to `out`.
inline void append_triangle_points(QuadRule& out, const TriangleRefRule& ref,
                                   const Vec2& a, const Vec2& b, const Vec2& c) {
    const double area = 0.5 * std::abs(cross(b - a, c - a));
    for (size_t q = 0; q < ref.bary.size(); ++q) {
        const auto& l = ref.bary[q];
        out.points.push_back(
            {l[0] * a.x + l[1] * b.x + l[2] * c.x,
             l[0] * a.y + l[1] * b.y + l[2] * c.y});
        out.weights.push_back(ref.weights[q] * area);
    }
}

/// Appends the mapped segment rule for the segment [a, b] to `out`.
inline void append_segment_points(QuadRule& out, const SegmentRefRule& ref,
                                  const Vec2& a, const Vec2& b) {
    const double length = norm(b - a);
    for (size_t q = 0; q < ref.x.size(); ++q) {
        double s = ref.x[q];
        out.points.push_back({a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)});
        out.weights.push_back(ref.w[q] * length);
    }
}

}  // namespace cutmove
