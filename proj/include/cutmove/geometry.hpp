#pragma once

/// @file geometry.hpp
/// Discrete level-set geometry: vertex interpolation of the level set,
/// element classification into inside/cut/outside and active/strip sets,
/// ghost-facet selection, and cut-cell / interface quadrature.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cutmove/mesh.hpp"
#include "cutmove/quadrature.hpp"

namespace cutmove {

// ---------------------------------------------------------------------------
// Element geometry helpers
// ---------------------------------------------------------------------------

/// Vertex coordinates, area and P1 barycentric-basis gradients of an element.
struct ElementGeom {
    std::array<Vec2, 3> v;
    double area = 0.0;
    std::array<Vec2, 3> grad;  ///< grad of the hat function at each vertex
};

inline ElementGeom element_geometry(const BackgroundMesh& mesh, int element) {
    const auto& tri = mesh.triangles[static_cast<size_t>(element)];
    ElementGeom g;
    for (int i = 0; i < 3; ++i) g.v[size_t(i)] = mesh.vertices[size_t(tri[size_t(i)])];
    const double area2 = cross(g.v[1] - g.v[0], g.v[2] - g.v[0]);
    g.area = 0.5 * area2;
    // grad(lambda_i) = rot90(v_{i+2} - v_{i+1}) / (2 area): perpendicular to
    // the opposite edge, scaled so lambda_i(v_i) = 1.
    for (int i = 0; i < 3; ++i) {
        const Vec2 e = g.v[size_t((i + 2) % 3)] - g.v[size_t((i + 1) % 3)];
        g.grad[size_t(i)] = Vec2{-e.y / area2, e.x / area2};
    }
    return g;
}

// ---------------------------------------------------------------------------
// Level-set field
// ---------------------------------------------------------------------------

/// Vertex interpolant of the level-set function at a fixed time.
struct LevelSetField {
    const BackgroundMesh* mesh = nullptr;
    double t = 0.0;
    std::vector<double> vertex_values;
};

/// Samples phi(x, t) at every mesh vertex.  phi is any callable
/// (Vec2, double) -> double.  Throws NonFinite on NaN/inf values.
template <class Phi>
LevelSetField interpolate_levelset(Phi&& phi, const BackgroundMesh& mesh,
                                   double t) {
    LevelSetField f;
    f.mesh = &mesh;
    f.t = t;
    f.vertex_values.resize(mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        double v = phi(mesh.vertices[i], t);
        if (!std::isfinite(v))
            fail(ErrorCode::NonFinite,
                 str_printf("level set returned %g at vertex %zu", v, i));
        f.vertex_values[i] = v;
    }
    return f;
}

// ---------------------------------------------------------------------------
// Domain slice: classification, cut decomposition, ghost facets
// ---------------------------------------------------------------------------

enum class ElemClass : std::uint8_t { Inside, Cut, Outside };

/// Exact negative-part decomposition of a cut element: one or two
/// sub-triangles plus the interface segment with its unit normal (pointing
/// toward increasing level-set values, i.e. out of the domain).
struct CutData {
    std::array<std::array<Vec2, 3>, 2> tris;
    int n_tris = 0;
    std::array<Vec2, 2> seg;
    Vec2 normal{0.0, 0.0};

    double negative_area() const {
        double a = 0.0;
        for (int k = 0; k < n_tris; ++k)
            a += 0.5 * std::abs(cross(tris[size_t(k)][1] - tris[size_t(k)][0],
                                      tris[size_t(k)][2] - tris[size_t(k)][0]));
        return a;
    }
};

/// Per-time-step geometric state: element classes, the active mesh, the
/// boundary strip, the ghost-facet set and per-cut-element geometry.
struct DomainSlice {
    const BackgroundMesh* mesh = nullptr;
    LevelSetField levelset;
    double delta_h = 0.0;
    std::vector<ElemClass> elem_class;
    std::vector<std::uint8_t> active;
    std::vector<std::uint8_t> strip;
    std::vector<int> active_elements;  ///< ascending element ids
    std::vector<int> cut_index;        ///< per element: index into cut_data or -1
    std::vector<CutData> cut_data;
    std::vector<int> ghost_facets;     ///< ascending facet ids

    bool is_active(int element) const {
        return active[static_cast<size_t>(element)] != 0;
    }
    bool in_strip(int element) const {
        return strip[static_cast<size_t>(element)] != 0;
    }
    const CutData* cut(int element) const {
        int ci = cut_index[static_cast<size_t>(element)];
        return ci < 0 ? nullptr : &cut_data[static_cast<size_t>(ci)];
    }
};

/// Ghost-facet selection from completed classification flags: an interior
/// facet joins the set iff both adjacent elements are active, they are
/// distinct, and at least one of them lies in the boundary strip.
inline std::vector<int> ghost_facets(const DomainSlice& slice,
                                     const BackgroundMesh& mesh) {
    std::vector<int> out;
    for (int f = 0; f < mesh.n_facets(); ++f) {
        const Facet& facet = mesh.facets[static_cast<size_t>(f)];
        if (facet.is_boundary()) continue;
        const int t0 = facet.elements[0], t1 = facet.elements[1];
        if (t0 == t1) continue;
        if (!slice.is_active(t0) || !slice.is_active(t1)) continue;
        if (!slice.in_strip(t0) && !slice.in_strip(t1)) continue;
        out.push_back(f);
    }
    return out;
}

/// Classifies every element of the level set's mesh with strip half-width
/// delta_h >= 0 and builds cut decompositions and the ghost-facet set.
///
/// Vertex values with |v| < 1e-14 * mesh.h are treated as lying on the
/// interface and count as negative (inside); they enter the element extremes
/// as exactly 0 and produce zero-crossings at the vertex itself.
inline DomainSlice classify(const LevelSetField& levelset, double delta_h) {
    if (!(delta_h >= 0.0))
        fail(ErrorCode::ConfigInvalid, "strip half-width must be >= 0");
    const BackgroundMesh& mesh = *levelset.mesh;
    const double eps_tie = 1e-14 * mesh.h;

    DomainSlice slice;
    slice.mesh = &mesh;
    slice.levelset = levelset;
    slice.delta_h = delta_h;
    slice.elem_class.assign(static_cast<size_t>(mesh.n_triangles()),
                            ElemClass::Outside);
    slice.active.assign(static_cast<size_t>(mesh.n_triangles()), 0);
    slice.strip.assign(static_cast<size_t>(mesh.n_triangles()), 0);
    slice.cut_index.assign(static_cast<size_t>(mesh.n_triangles()), -1);

    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles[static_cast<size_t>(t)];
        std::array<double, 3> val;   // effective values (ties snapped to 0)
        std::array<bool, 3> neg;     // tie-break: |v| < eps counts negative
        for (int i = 0; i < 3; ++i) {
            double v = levelset.vertex_values[static_cast<size_t>(tri[size_t(i)])];
            if (std::abs(v) < eps_tie) {
                val[size_t(i)] = 0.0;
                neg[size_t(i)] = true;
            } else {
                val[size_t(i)] = v;
                neg[size_t(i)] = v < 0.0;
            }
        }
        const double v_min = std::min({val[0], val[1], val[2]});
        const double v_max = std::max({val[0], val[1], val[2]});
        const int n_neg = int(neg[0]) + int(neg[1]) + int(neg[2]);

        ElemClass cls = (n_neg == 3)   ? ElemClass::Inside
                        : (n_neg == 0) ? ElemClass::Outside
                                       : ElemClass::Cut;
        slice.elem_class[static_cast<size_t>(t)] = cls;
        const bool active = v_min <= delta_h;
        const bool strip = v_min <= delta_h && v_max >= -delta_h;
        slice.active[static_cast<size_t>(t)] = active ? 1 : 0;
        slice.strip[static_cast<size_t>(t)] = strip ? 1 : 0;
        if (active) slice.active_elements.push_back(t);

        if (cls != ElemClass::Cut) continue;

        // Exact polygonal decomposition of {phi_h < 0} and the zero segment.
        const auto& tri_v = mesh.triangles[static_cast<size_t>(t)];
        std::array<Vec2, 3> p;
        for (int i = 0; i < 3; ++i)
            p[size_t(i)] = mesh.vertices[static_cast<size_t>(tri_v[size_t(i)])];
        auto crossing = [&](int a, int b) {
            // a negative-side vertex, b positive-side: effective values give
            // s in [0, 1); flagged vertices produce the vertex itself (s = 0).
            const double wa = val[size_t(a)], wb = val[size_t(b)];
            const double s = wa / (wa - wb);
            return Vec2{p[size_t(a)].x + s * (p[size_t(b)].x - p[size_t(a)].x),
                        p[size_t(a)].y + s * (p[size_t(b)].y - p[size_t(a)].y)};
        };

        CutData cd;
        if (n_neg == 1) {
            const int a = neg[0] ? 0 : (neg[1] ? 1 : 2);
            const int b = (a + 1) % 3, c = (a + 2) % 3;
            const Vec2 xab = crossing(a, b);
            const Vec2 xac = crossing(a, c);
            cd.n_tris = 1;
            cd.tris[0] = {p[size_t(a)], xab, xac};
            cd.seg = {xab, xac};
        } else {  // n_neg == 2
            const int c = !neg[0] ? 0 : (!neg[1] ? 1 : 2);  // positive vertex
            const int a = (c + 1) % 3, b = (c + 2) % 3;     // negative pair
            const Vec2 xbc = crossing(b, c);
            const Vec2 xac = crossing(a, c);
            cd.n_tris = 2;
            cd.tris[0] = {p[size_t(a)], p[size_t(b)], xbc};
            cd.tris[1] = {p[size_t(a)], xbc, xac};
            cd.seg = {xbc, xac};
        }
        // Normal from the raw vertex gradient, pointing toward increasing phi.
        const ElementGeom g = element_geometry(mesh, t);
        Vec2 grad{0.0, 0.0};
        for (int i = 0; i < 3; ++i) {
            const double raw =
                levelset.vertex_values[static_cast<size_t>(tri_v[size_t(i)])];
            grad += raw * g.grad[size_t(i)];
        }
        const double gn = norm(grad);
        cd.normal = gn > 0.0 ? Vec2{grad.x / gn, grad.y / gn} : Vec2{0.0, 0.0};

        slice.cut_index[static_cast<size_t>(t)] =
            static_cast<int>(slice.cut_data.size());
        slice.cut_data.push_back(cd);
    }

    slice.ghost_facets = ghost_facets(slice, mesh);
    return slice;
}

// ---------------------------------------------------------------------------
// Cut quadrature
// ---------------------------------------------------------------------------

/// Volume rule over the element's intersection with the discrete domain:
/// the standard mapped rule for inside elements, the mapped rule on each
/// negative-side sub-triangle for cut elements.  Throws EmptyRule for
/// outside elements.
inline QuadRule cut_volume_quadrature(const DomainSlice& slice, int element,
                                      int degree = 4) {
    const BackgroundMesh& mesh = *slice.mesh;
    const ElemClass cls = slice.elem_class[static_cast<size_t>(element)];
    if (cls == ElemClass::Outside)
        fail(ErrorCode::EmptyRule,
             str_printf("element %d lies outside the domain", element));
    QuadRule rule;
    const TriangleRefRule& ref = triangle_rule(degree);
    if (cls == ElemClass::Inside) {
        const auto& tri = mesh.triangles[static_cast<size_t>(element)];
        append_triangle_points(rule, ref,
                               mesh.vertices[static_cast<size_t>(tri[0])],
                               mesh.vertices[static_cast<size_t>(tri[1])],
                               mesh.vertices[static_cast<size_t>(tri[2])]);
    } else {
        const CutData& cd = *slice.cut(element);
        for (int k = 0; k < cd.n_tris; ++k)
            append_triangle_points(rule, ref, cd.tris[size_t(k)][0],
                                   cd.tris[size_t(k)][1], cd.tris[size_t(k)][2]);
    }
    return rule;
}

/// Line rule on the element's zero-level segment with the per-element unit
/// normal attached.  Throws EmptyRule for non-cut elements.
inline QuadRule interface_quadrature(const DomainSlice& slice, int element,
                                     int degree = 4) {
    const CutData* cd = slice.cut(element);
    if (cd == nullptr)
        fail(ErrorCode::EmptyRule,
             str_printf("element %d carries no interface segment", element));
    QuadRule rule;
    append_segment_points(rule, segment_rule(degree), cd->seg[0], cd->seg[1]);
    rule.normal = cd->normal;
    return rule;
}

/// Area of the discrete domain: full areas of inside elements plus exact
/// negative-part polygon areas of cut elements.
inline double domain_measure(const DomainSlice& slice) {
    const BackgroundMesh& mesh = *slice.mesh;
    double total = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        switch (slice.elem_class[static_cast<size_t>(t)]) {
            case ElemClass::Inside:
                total += mesh.areas[static_cast<size_t>(t)];
                break;
            case ElemClass::Cut:
                total += slice.cut(t)->negative_area();
                break;
            case ElemClass::Outside:
                break;
        }
    }
    return total;
}

}  // namespace cutmove
