#pragma once

/// @file mesh.hpp
/// Time-independent background triangulation of the bounding box: structured
/// generator with optional seeded jitter, uniform red refinement, facet
/// topology, and plain-text import/export.

#include <algorithm>
#include <array>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cutmove/core.hpp"

namespace cutmove {

/// An undirected mesh edge with its adjacent triangles.  Canonical key:
/// vertices[0] < vertices[1].  Interior facets have two adjacent triangles
/// (ascending); boundary facets have elements[1] == -1.
struct Facet {
    std::array<int, 2> vertices{-1, -1};
    std::array<int, 2> elements{-1, -1};

    bool is_boundary() const { return elements[1] < 0; }
};

/// Immutable quasi-uniform triangulation of an axis-aligned box.
///
/// Invariants (validated at construction):
///  - every triangle is counterclockwise with strictly positive area;
///  - facets are manifold (at most two adjacent triangles each);
///  - h / h_min <= rho_max (quasi-uniformity);
///  - vertices lie inside the closed box.
struct BackgroundMesh {
    Box box;
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;  ///< CCW vertex index triples
    std::vector<Facet> facets;                  ///< sorted by canonical vertex pair
    std::vector<double> areas;                  ///< per-triangle positive areas
    double h = 0.0;                             ///< max element diameter
    double h_min = 0.0;                         ///< min element diameter

    int n_vertices() const { return static_cast<int>(vertices.size()); }
    int n_triangles() const { return static_cast<int>(triangles.size()); }
    int n_facets() const { return static_cast<int>(facets.size()); }

    double total_area() const {
        double s = 0.0;
        for (double a : areas) s += a;
        return s;
    }

    /// Signed doubled area helper for a vertex triple of this mesh.
    double signed_area(int t) const {
        const auto& tri = triangles[static_cast<size_t>(t)];
        const Vec2& a = vertices[static_cast<size_t>(tri[0])];
        const Vec2& b = vertices[static_cast<size_t>(tri[1])];
        const Vec2& c = vertices[static_cast<size_t>(tri[2])];
        return 0.5 * cross(b - a, c - a);
    }
};

namespace detail {

/// Longest edge length of triangle (a, b, c).
inline double triangle_diameter(const Vec2& a, const Vec2& b, const Vec2& c) {
    return std::max({norm(b - a), norm(c - b), norm(a - c)});
}

}  // namespace detail

/// Builds the facet list of a triangle soup: every unordered vertex pair used
/// by at least one triangle appears exactly once, with its adjacent triangle
/// indices in ascending order.  Throws NonManifold if any edge is shared by
/// more than two triangles.
inline std::vector<Facet> facet_topology(
    const std::vector<std::array<int, 3>>& triangles) {
    std::map<std::pair<int, int>, std::array<int, 2>> edge_map;
    for (int t = 0; t < static_cast<int>(triangles.size()); ++t) {
        const auto& tri = triangles[static_cast<size_t>(t)];
        for (int e = 0; e < 3; ++e) {
            int v0 = tri[static_cast<size_t>(e)];
            int v1 = tri[static_cast<size_t>((e + 1) % 3)];
            if (v0 > v1) std::swap(v0, v1);
            auto [it, inserted] =
                edge_map.try_emplace({v0, v1}, std::array<int, 2>{t, -1});
            if (!inserted) {
                if (it->second[1] >= 0)
                    fail(ErrorCode::NonManifold,
                         str_printf("edge (%d,%d) has more than two adjacent "
                                    "triangles", v0, v1));
                it->second[1] = t;
                if (it->second[0] > it->second[1])
                    std::swap(it->second[0], it->second[1]);
            }
        }
    }
    std::vector<Facet> facets;
    facets.reserve(edge_map.size());
    for (const auto& [key, elems] : edge_map)
        facets.push_back(Facet{{key.first, key.second}, elems});
    return facets;
}

namespace detail {

/// Validates the triangle soup, orients triangles, builds topology and size
/// metrics.  With allow_flip, clockwise triangles are reversed (imported
/// meshes may use either convention); without it a non-positive signed area
/// is a generator failure and throws DegenerateElement.
inline BackgroundMesh finalize_mesh(Box box, std::vector<Vec2> vertices,
                                    std::vector<std::array<int, 3>> triangles,
                                    bool allow_flip, double rho_max = 3.0) {
    BackgroundMesh mesh;
    mesh.box = box;
    mesh.vertices = std::move(vertices);
    mesh.triangles = std::move(triangles);

    const double tol = 1e-12 * std::max(box.width(), box.height());
    for (const Vec2& p : mesh.vertices)
        if (!box.contains(p, tol))
            fail(ErrorCode::DegenerateElement,
                 str_printf("vertex (%g, %g) outside the box", p.x, p.y));

    const double area_floor = 1e-14 * box.area();
    mesh.areas.resize(mesh.triangles.size());
    mesh.h = 0.0;
    mesh.h_min = std::numeric_limits<double>::infinity();
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
        auto& tri = mesh.triangles[t];
        for (int v : tri)
            if (v < 0 || v >= mesh.n_vertices())
                fail(ErrorCode::IndexOutOfRange,
                     str_printf("triangle %zu references vertex %d", t, v));
        const Vec2& a = mesh.vertices[static_cast<size_t>(tri[0])];
        const Vec2& b = mesh.vertices[static_cast<size_t>(tri[1])];
        const Vec2& c = mesh.vertices[static_cast<size_t>(tri[2])];
        double area2 = cross(b - a, c - a);
        if (area2 < 0.0 && allow_flip) {
            std::swap(tri[1], tri[2]);
            area2 = -area2;
        }
        if (!(area2 > 2.0 * area_floor))
            fail(ErrorCode::DegenerateElement,
                 str_printf("triangle %zu has non-positive area %g", t,
                            0.5 * area2));
        mesh.areas[t] = 0.5 * area2;
        double diam = triangle_diameter(a, b, c);
        mesh.h = std::max(mesh.h, diam);
        mesh.h_min = std::min(mesh.h_min, diam);
    }
    if (mesh.triangles.empty()) {
        mesh.h = mesh.h_min = 0.0;
    } else if (mesh.h > rho_max * mesh.h_min) {
        fail(ErrorCode::DegenerateElement,
             str_printf("quasi-uniformity violated: h/h_min = %g > %g",
                        mesh.h / mesh.h_min, rho_max));
    }

    mesh.facets = facet_topology(mesh.triangles);
    return mesh;
}

}  // namespace detail

/// Structured triangulation of `box`: an n x n grid of cells, each split along
/// the "/" diagonal into two triangles.  With jitter > 0, interior grid
/// vertices are displaced deterministically from the seed by up to
/// jitter * cell size per axis; if the displaced mesh is degenerate the
/// generator retries at half the amplitude (and ultimately falls back to the
/// unjittered grid).  jitter must be < 0.3.
inline BackgroundMesh build_structured_mesh(const Box& box, int n,
                                            double jitter = 0.0,
                                            std::uint64_t seed = 0) {
    if (n < 1) fail(ErrorCode::ConfigInvalid, "subdivision count must be >= 1");
    if (!(jitter >= 0.0) || jitter >= 0.3)
        fail(ErrorCode::ConfigInvalid, "jitter amplitude must lie in [0, 0.3)");
    if (!(box.width() > 0.0) || !(box.height() > 0.0))
        fail(ErrorCode::ConfigInvalid, "box must have positive extents");

    const double sx = box.width() / n;
    const double sy = box.height() / n;

    for (double amp = jitter; ; amp *= 0.5) {
        std::vector<Vec2> vertices;
        vertices.reserve(static_cast<size_t>((n + 1) * (n + 1)));
        for (int j = 0; j <= n; ++j) {
            for (int i = 0; i <= n; ++i) {
                double x = (i == n) ? box.xmax : box.xmin + i * sx;
                double y = (j == n) ? box.ymax : box.ymin + j * sy;
                if (amp > 0.0 && i > 0 && i < n && j > 0 && j < n) {
                    x += amp * sx * hash_unit(seed, static_cast<std::uint64_t>(i),
                                              static_cast<std::uint64_t>(j));
                    y += amp * sy *
                         hash_unit(seed ^ 0x5bf03635ULL,
                                   static_cast<std::uint64_t>(i),
                                   static_cast<std::uint64_t>(j));
                }
                vertices.push_back({x, y});
            }
        }
        auto vid = [n](int i, int j) { return j * (n + 1) + i; };
        std::vector<std::array<int, 3>> triangles;
        triangles.reserve(static_cast<size_t>(2 * n * n));
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                int a = vid(i, j), b = vid(i + 1, j);
                int c = vid(i + 1, j + 1), d = vid(i, j + 1);
                triangles.push_back({a, b, c});
                triangles.push_back({a, c, d});
            }
        }
        try {
            return detail::finalize_mesh(box, std::move(vertices),
                                         std::move(triangles),
                                         /*allow_flip=*/false);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateElement || amp <= 0.0) throw;
            if (amp < 1e-6) amp = 0.0;  // final attempt: plain grid
        }
    }
}

/// Red refinement: each triangle is split into four congruent children via its
/// edge midpoints.  h halves (up to floating-point rounding) and the total
/// area is preserved.
inline BackgroundMesh refine_uniform(const BackgroundMesh& mesh) {
    std::vector<Vec2> vertices = mesh.vertices;
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int v0, int v1) {
        if (v0 > v1) std::swap(v0, v1);
        auto [it, inserted] =
            midpoint.try_emplace({v0, v1}, static_cast<int>(vertices.size()));
        if (inserted) {
            const Vec2& a = mesh.vertices[static_cast<size_t>(v0)];
            const Vec2& b = mesh.vertices[static_cast<size_t>(v1)];
            vertices.push_back({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
        }
        return it->second;
    };

    std::vector<std::array<int, 3>> triangles;
    triangles.reserve(mesh.triangles.size() * 4);
    for (const auto& tri : mesh.triangles) {
        int m01 = mid(tri[0], tri[1]);
        int m12 = mid(tri[1], tri[2]);
        int m20 = mid(tri[2], tri[0]);
        triangles.push_back({tri[0], m01, m20});
        triangles.push_back({tri[1], m12, m01});
        triangles.push_back({tri[2], m20, m12});
        triangles.push_back({m01, m12, m20});
    }
    return detail::finalize_mesh(mesh.box, std::move(vertices),
                                 std::move(triangles), /*allow_flip=*/false);
}

// ---------------------------------------------------------------------------
// Plain-text import/export
// ---------------------------------------------------------------------------
// Format: line "VERTICES k", then k lines "x y"; line "TRIANGLES m", then m
// lines "i j k" (0-based indices).  Whitespace-separated decimal floats.

inline void save_mesh(const BackgroundMesh& mesh, std::ostream& os) {
    os << "VERTICES " << mesh.n_vertices() << "\n";
    for (const Vec2& p : mesh.vertices)
        os << fmt_full(p.x) << " " << fmt_full(p.y) << "\n";
    os << "TRIANGLES " << mesh.n_triangles() << "\n";
    for (const auto& tri : mesh.triangles)
        os << tri[0] << " " << tri[1] << " " << tri[2] << "\n";
}

inline void save_mesh(const BackgroundMesh& mesh, const std::string& path) {
    std::ofstream os(path);
    if (!os) fail(ErrorCode::ConfigInvalid, "cannot open " + path + " for writing");
    save_mesh(mesh, os);
}

inline BackgroundMesh load_mesh(std::istream& is) {
    std::string tag;
    int n_vertices = 0;
    if (!(is >> tag >> n_vertices) || tag != "VERTICES" || n_vertices < 0)
        fail(ErrorCode::ParseError, "expected \"VERTICES <count>\"");
    std::vector<Vec2> vertices(static_cast<size_t>(n_vertices));
    for (auto& p : vertices)
        if (!(is >> p.x >> p.y))
            fail(ErrorCode::ParseError, "malformed vertex coordinate line");
    int n_triangles = 0;
    if (!(is >> tag >> n_triangles) || tag != "TRIANGLES" || n_triangles < 0)
        fail(ErrorCode::ParseError, "expected \"TRIANGLES <count>\"");
    std::vector<std::array<int, 3>> triangles(static_cast<size_t>(n_triangles));
    for (auto& tri : triangles)
        if (!(is >> tri[0] >> tri[1] >> tri[2]))
            fail(ErrorCode::ParseError, "malformed triangle index line");

    Box box;
    if (!vertices.empty()) {
        box.xmin = box.xmax = vertices[0].x;
        box.ymin = box.ymax = vertices[0].y;
        for (const Vec2& p : vertices) {
            box.xmin = std::min(box.xmin, p.x);
            box.xmax = std::max(box.xmax, p.x);
            box.ymin = std::min(box.ymin, p.y);
            box.ymax = std::max(box.ymax, p.y);
        }
    }
    return detail::finalize_mesh(box, std::move(vertices), std::move(triangles),
                                 /*allow_flip=*/true);
}

inline BackgroundMesh load_mesh(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail(ErrorCode::ConfigInvalid, "cannot open " + path);
    return load_mesh(is);
}

}  // namespace cutmove
