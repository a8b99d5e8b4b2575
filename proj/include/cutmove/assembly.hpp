#pragma once

/// @file assembly.hpp
/// Assembly of every form of the fully discrete method on a domain slice:
/// mass, diffusion–convection (implementation and skew-symmetric variants),
/// the three ghost penalties, source and constraint vectors, and the Nitsche
/// boundary terms.  All loops run in parallel with per-thread triplet buffers
/// concatenated in partition order, so results are bit-reproducible for any
/// thread count.

#include <array>
#include <cmath>
#include <functional>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "cutmove/fespace.hpp"
#include "cutmove/geometry.hpp"
#include "cutmove/linalg.hpp"

namespace cutmove {

/// Volume bilinear form variant: the production form (full convection term
/// plus full divergence reaction, no boundary term) or the skew-symmetric
/// form (antisymmetrized convection, half divergence reaction, and the
/// compensating interface term).
enum class FormVariant { Implementation, Skew };

/// Ghost-penalty variant: direct polynomial-extension difference, patchwise
/// local-projection deviation, or scaled normal-derivative jumps.
enum class GhostVariant { Direct, Lps, Djump };

namespace detail {

/// Runs body(begin, end) over a contiguous partition of [0, n) — one chunk
/// per worker.  Chunk results must be written to disjoint slots; determinism
/// of the final assembly comes from concatenating buffers in chunk order.
template <class Body>
void parallel_chunks(int n, const Body& body) {
    const int workers = std::min(thread_count(), std::max(n, 1));
    if (workers <= 1 || n < 64) {
        body(0, n, 0);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const int begin = static_cast<int>(static_cast<long>(n) * w / workers);
        const int end =
            static_cast<int>(static_cast<long>(n) * (w + 1) / workers);
        pool.emplace_back([&body, begin, end, w] { body(begin, end, w); });
    }
    for (auto& th : pool) th.join();
}

/// Assembles triplets item-by-item with deterministic order: per-chunk
/// buffers are concatenated in chunk order, so the triplet stream equals the
/// serial item order for every thread count.
template <class Kernel>
std::vector<Triplet> assemble_triplets(int n_items, const Kernel& kernel) {
    const int workers = std::min(thread_count(), std::max(n_items, 1));
    std::vector<std::vector<Triplet>> buffers(
        static_cast<size_t>(std::max(workers, 1)));
    parallel_chunks(n_items, [&](int begin, int end, int chunk) {
        auto& buf = buffers[static_cast<size_t>(chunk)];
        for (int item = begin; item < end; ++item) kernel(item, buf);
    });
    std::vector<Triplet> out;
    size_t total = 0;
    for (const auto& b : buffers) total += b.size();
    out.reserve(total);
    for (const auto& b : buffers) out.insert(out.end(), b.begin(), b.end());
    return out;
}

/// Dense vector accumulated from (row, value) contributions in item order.
template <class Kernel>
std::vector<double> assemble_vector_entries(int n_rows, int n_items,
                                            const Kernel& kernel) {
    auto triplets = assemble_triplets(n_items, kernel);
    std::vector<double> v(static_cast<size_t>(n_rows), 0.0);
    for (const Triplet& t : triplets) {
        if (t.row < 0 || t.row >= n_rows)
            fail(ErrorCode::IndexOutOfRange, "vector entry out of range");
        v[static_cast<size_t>(t.row)] += t.value;
    }
    return v;
}

/// Local DOF ids (in mask-local numbering) of an element's three vertices.
inline std::array<int, 3> local_dofs(const BackgroundMesh& mesh,
                                     const DofMask& mask, int element) {
    const auto& tri = mesh.triangles[static_cast<size_t>(element)];
    std::array<int, 3> dofs{};
    for (int i = 0; i < 3; ++i) {
        dofs[size_t(i)] = mask.global_to_local[static_cast<size_t>(tri[size_t(i)])];
        if (dofs[size_t(i)] < 0)
            fail(ErrorCode::InactiveElement,
                 str_printf("element %d touches inactive DOF %d", element,
                            tri[size_t(i)]));
    }
    return dofs;
}

/// Barycentric values of the three hat functions at a physical point.
inline std::array<double, 3> hat_values(const ElementGeom& g, const Vec2& p) {
    const double l1 = dot(g.grad[1], p - g.v[0]);
    const double l2 = dot(g.grad[2], p - g.v[0]);
    return {1.0 - l1 - l2, l1, l2};
}

/// Scatters a symmetric 3x3 element matrix into the triplet buffer.
inline void scatter_local(const std::array<int, 3>& dofs,
                          const std::array<std::array<double, 3>, 3>& local,
                          std::vector<Triplet>& out) {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            out.push_back({dofs[size_t(i)], dofs[size_t(j)],
                           local[size_t(i)][size_t(j)]});
}

inline void require_same_mesh(const DomainSlice& slice, const FeSpace& space) {
    if (slice.mesh != space.mesh)
        fail(ErrorCode::MeshMismatch,
             "slice and space are built on different meshes");
}

/// True unless the callable is an empty std::function (absent boundary data).
template <class T>
bool is_callable(const T&) {
    return true;
}
template <class S>
bool is_callable(const std::function<S>& f) {
    return static_cast<bool>(f);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Mass matrix
// ---------------------------------------------------------------------------

/// M[i][j] = integral over the discrete domain of phi_i phi_j (cut rules).
inline SparseMatrix assemble_mass(const DomainSlice& slice,
                                  const FeSpace& space, const DofMask& mask,
                                  int degree = 4) {
    detail::require_same_mesh(slice, space);
    const BackgroundMesh& mesh = *space.mesh;
    const auto& elements = slice.active_elements;
    auto triplets = detail::assemble_triplets(
        static_cast<int>(elements.size()),
        [&](int item, std::vector<Triplet>& out) {
            const int t = elements[static_cast<size_t>(item)];
            if (slice.elem_class[static_cast<size_t>(t)] == ElemClass::Outside)
                return;
            const ElementGeom g = element_geometry(mesh, t);
            const auto dofs = detail::local_dofs(mesh, mask, t);
            const QuadRule rule = cut_volume_quadrature(slice, t, degree);
            std::array<std::array<double, 3>, 3> local{};
            for (size_t q = 0; q < rule.points.size(); ++q) {
                const auto l = detail::hat_values(g, rule.points[q]);
                for (int i = 0; i < 3; ++i)
                    for (int j = i; j < 3; ++j) {
                        const double v =
                            rule.weights[q] * l[size_t(i)] * l[size_t(j)];
                        local[size_t(i)][size_t(j)] += v;
                        if (i != j) local[size_t(j)][size_t(i)] += v;
                    }
            }
            detail::scatter_local(dofs, local, out);
        });
    return SparseMatrix::from_triplets(mask.n_active(), mask.n_active(),
                                       std::move(triplets));
}

// ---------------------------------------------------------------------------
// Diffusion–convection matrix
// ---------------------------------------------------------------------------

/// A[i][j] for the chosen variant.  `w` maps (point, t) to the velocity,
/// `divw` to its analytic divergence.
template <class W, class DivW>
SparseMatrix assemble_diffusion_convection(const DomainSlice& slice,
                                           const FeSpace& space,
                                           const DofMask& mask, double alpha,
                                           const W& w, const DivW& divw,
                                           double t, FormVariant variant,
                                           int degree = 4) {
    detail::require_same_mesh(slice, space);
    const BackgroundMesh& mesh = *space.mesh;
    const auto& elements = slice.active_elements;
    auto triplets = detail::assemble_triplets(
        static_cast<int>(elements.size()),
        [&](int item, std::vector<Triplet>& out) {
            const int el = elements[static_cast<size_t>(item)];
            if (slice.elem_class[static_cast<size_t>(el)] == ElemClass::Outside)
                return;
            const ElementGeom g = element_geometry(mesh, el);
            const auto dofs = detail::local_dofs(mesh, mask, el);
            const QuadRule rule = cut_volume_quadrature(slice, el, degree);
            std::array<std::array<double, 3>, 3> local{};
            for (size_t q = 0; q < rule.points.size(); ++q) {
                const double wq = rule.weights[q];
                const auto l = detail::hat_values(g, rule.points[q]);
                const Vec2 vel = w(rule.points[q], t);
                const double dv = divw(rule.points[q], t);
                std::array<double, 3> wg{};
                for (int i = 0; i < 3; ++i)
                    wg[size_t(i)] = dot(vel, g.grad[size_t(i)]);
                for (int i = 0; i < 3; ++i) {
                    for (int j = 0; j < 3; ++j) {
                        double val =
                            alpha * wq *
                            dot(g.grad[size_t(i)], g.grad[size_t(j)]);
                        if (variant == FormVariant::Implementation) {
                            val += wq * wg[size_t(j)] * l[size_t(i)];
                            val += wq * dv * l[size_t(i)] * l[size_t(j)];
                        } else {
                            val += 0.5 * wq *
                                   (wg[size_t(j)] * l[size_t(i)] -
                                    wg[size_t(i)] * l[size_t(j)]);
                            val += 0.5 * wq * dv * l[size_t(i)] * l[size_t(j)];
                        }
                        local[size_t(i)][size_t(j)] += val;
                    }
                }
            }
            if (variant == FormVariant::Skew &&
                slice.elem_class[static_cast<size_t>(el)] == ElemClass::Cut) {
                const QuadRule irule = interface_quadrature(slice, el, degree);
                for (size_t q = 0; q < irule.points.size(); ++q) {
                    const auto l = detail::hat_values(g, irule.points[q]);
                    const double wn =
                        dot(w(irule.points[q], t), irule.normal);
                    for (int i = 0; i < 3; ++i)
                        for (int j = 0; j < 3; ++j)
                            local[size_t(i)][size_t(j)] +=
                                0.5 * irule.weights[q] * wn * l[size_t(i)] *
                                l[size_t(j)];
                }
            }
            detail::scatter_local(dofs, local, out);
        });
    return SparseMatrix::from_triplets(mask.n_active(), mask.n_active(),
                                       std::move(triplets));
}

// ---------------------------------------------------------------------------
// Ghost penalties
// ---------------------------------------------------------------------------

namespace detail {

/// Barycentric coordinates of point p with respect to triangle geometry g.
inline std::array<double, 3> barycentric_at(const ElementGeom& g,
                                            const Vec2& p) {
    return hat_values(g, p);
}

/// Direct-variant facet kernel: the difference of the two linear extensions
/// is kappa * lambda_a with lambda_a the affine function that vanishes on the
/// shared edge and equals one at the off-edge vertex of the first element;
/// the patch integral of lambda_a^2 is computed by the exact degree-2 rule.
inline void ghost_direct(const BackgroundMesh& mesh, const DofMask& mask,
                         const Facet& facet, double h,
                         std::vector<Triplet>& out) {
    const int t1 = facet.elements[0], t2 = facet.elements[1];
    const auto& tri1 = mesh.triangles[static_cast<size_t>(t1)];
    const auto& tri2 = mesh.triangles[static_cast<size_t>(t2)];
    const Vec2 s1 = mesh.vertices[static_cast<size_t>(facet.vertices[0])];
    const Vec2 s2 = mesh.vertices[static_cast<size_t>(facet.vertices[1])];

    int a = -1;
    for (int v : tri1)
        if (v != facet.vertices[0] && v != facet.vertices[1]) a = v;
    const Vec2 pa = mesh.vertices[static_cast<size_t>(a)];
    const double denom = cross(pa - s1, s2 - s1);
    auto lambda_a = [&](const Vec2& x) {
        return cross(x - s1, s2 - s1) / denom;
    };

    // integral of lambda_a^2 over both patch triangles (degree-2 rule exact).
    const TriangleRefRule& ref = triangle_rule(2);
    double integral = 0.0;
    for (int t : {t1, t2}) {
        QuadRule rule;
        const auto& tri = mesh.triangles[static_cast<size_t>(t)];
        append_triangle_points(rule, ref,
                               mesh.vertices[static_cast<size_t>(tri[0])],
                               mesh.vertices[static_cast<size_t>(tri[1])],
                               mesh.vertices[static_cast<size_t>(tri[2])]);
        for (size_t q = 0; q < rule.points.size(); ++q) {
            const double la = lambda_a(rule.points[q]);
            integral += rule.weights[q] * la * la;
        }
    }
    const double scale = integral / (h * h);

    // kappa(u) = u(a) - sum_{v in T2} u(v) * lambda^{T2}_v(a).
    const ElementGeom g2 = element_geometry(mesh, t2);
    const auto bary_a = barycentric_at(g2, pa);
    std::array<int, 4> dofs{};
    std::array<double, 4> kappa{};
    dofs[0] = mask.global_to_local[static_cast<size_t>(a)];
    kappa[0] = 1.0;
    for (int i = 0; i < 3; ++i) {
        dofs[size_t(i) + 1] = mask.global_to_local[static_cast<size_t>(tri2[size_t(i)])];
        kappa[size_t(i) + 1] = -bary_a[size_t(i)];
    }
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            out.push_back({dofs[size_t(i)], dofs[size_t(j)],
                           scale * kappa[size_t(i)] * kappa[size_t(j)]});
}

/// LPS-variant facet kernel: (1/h^2) times patch mass minus the patchwise
/// L2 projection onto linears, via a 3x3 Gram solve in a scaled monomial
/// basis.
inline void ghost_lps(const BackgroundMesh& mesh, const DofMask& mask,
                      const Facet& facet, double h,
                      std::vector<Triplet>& out) {
    const int t1 = facet.elements[0], t2 = facet.elements[1];
    // Patch DOFs: union of the two vertex triples, ascending global order.
    std::array<int, 4> verts{};
    {
        int k = 0;
        for (int v : mesh.triangles[static_cast<size_t>(t1)]) verts[size_t(k++)] = v;
        for (int v : mesh.triangles[static_cast<size_t>(t2)]) {
            bool seen = false;
            for (int i = 0; i < k; ++i) seen |= verts[size_t(i)] == v;
            if (!seen) verts[size_t(k++)] = v;
        }
        std::sort(verts.begin(), verts.end());
    }
    auto patch_index = [&](int v) {
        for (int i = 0; i < 4; ++i)
            if (verts[size_t(i)] == v) return i;
        return -1;
    };

    // Scaled monomials about the patch centroid for Gram conditioning.
    Vec2 centroid{0.0, 0.0};
    for (int v : verts)
        centroid += 0.25 * mesh.vertices[static_cast<size_t>(v)];
    double diam = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            diam = std::max(diam,
                            norm(mesh.vertices[static_cast<size_t>(verts[size_t(i)])] -
                                 mesh.vertices[static_cast<size_t>(verts[size_t(j)])]));
    auto mono = [&](int k, const Vec2& p) {
        if (k == 0) return 1.0;
        if (k == 1) return (p.x - centroid.x) / diam;
        return (p.y - centroid.y) / diam;
    };

    Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
    Eigen::Matrix<double, 3, 4> rhs = Eigen::Matrix<double, 3, 4>::Zero();
    std::array<std::array<double, 4>, 4> patch_mass{};

    const TriangleRefRule& ref = triangle_rule(2);
    for (int t : {t1, t2}) {
        const auto& tri = mesh.triangles[static_cast<size_t>(t)];
        const ElementGeom g = element_geometry(mesh, t);
        QuadRule rule;
        append_triangle_points(rule, ref, g.v[0], g.v[1], g.v[2]);
        for (size_t q = 0; q < rule.points.size(); ++q) {
            const double wq = rule.weights[q];
            const auto l = hat_values(g, rule.points[q]);
            std::array<double, 4> phi{};  // patch-ordered hat values
            for (int i = 0; i < 3; ++i)
                phi[size_t(patch_index(tri[size_t(i)]))] = l[size_t(i)];
            for (int k = 0; k < 3; ++k) {
                const double mk = mono(k, rule.points[q]);
                for (int k2 = 0; k2 < 3; ++k2)
                    gram(k, k2) += wq * mk * mono(k2, rule.points[q]);
                for (int j = 0; j < 4; ++j)
                    rhs(k, j) += wq * mk * phi[size_t(j)];
            }
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    patch_mass[size_t(i)][size_t(j)] +=
                        wq * phi[size_t(i)] * phi[size_t(j)];
        }
    }

    const Eigen::Matrix<double, 3, 4> coef = gram.ldlt().solve(rhs);
    std::array<int, 4> dofs{};
    for (int i = 0; i < 4; ++i)
        dofs[size_t(i)] = mask.global_to_local[static_cast<size_t>(verts[size_t(i)])];
    const double inv_h2 = 1.0 / (h * h);
    for (int i = 0; i < 4; ++i) {
        for (int j = i; j < 4; ++j) {
            double proj = 0.0;
            for (int k = 0; k < 3; ++k)
                for (int k2 = 0; k2 < 3; ++k2)
                    proj += coef(k, i) * gram(k, k2) * coef(k2, j);
            const double value =
                inv_h2 * (patch_mass[size_t(i)][size_t(j)] - proj);
            out.push_back({dofs[size_t(i)], dofs[size_t(j)], value});
            if (i != j) out.push_back({dofs[size_t(j)], dofs[size_t(i)], value});
        }
    }
}

/// Derivative-jump facet kernel: h |F| times the rank-one product of
/// normal-gradient jumps (the constant-gradient k=1 term; k=0 not needed).
inline void ghost_djump(const BackgroundMesh& mesh, const DofMask& mask,
                        const Facet& facet, double h,
                        std::vector<Triplet>& out) {
    const int t1 = facet.elements[0], t2 = facet.elements[1];
    const Vec2 s1 = mesh.vertices[static_cast<size_t>(facet.vertices[0])];
    const Vec2 s2 = mesh.vertices[static_cast<size_t>(facet.vertices[1])];
    const Vec2 tangent = s2 - s1;
    const double len = norm(tangent);
    const Vec2 n{tangent.y / len, -tangent.x / len};

    // Jump coefficients over the (up to 4) patch DOFs.
    std::array<int, 4> verts{-1, -1, -1, -1};
    std::array<double, 4> jump{};
    int count = 0;
    auto slot = [&](int v) {
        for (int i = 0; i < count; ++i)
            if (verts[size_t(i)] == v) return i;
        verts[size_t(count)] = v;
        return count++;
    };
    const ElementGeom g1 = element_geometry(mesh, t1);
    const ElementGeom g2 = element_geometry(mesh, t2);
    const auto& tri1 = mesh.triangles[static_cast<size_t>(t1)];
    const auto& tri2 = mesh.triangles[static_cast<size_t>(t2)];
    for (int i = 0; i < 3; ++i)
        jump[size_t(slot(tri1[size_t(i)]))] += dot(g1.grad[size_t(i)], n);
    for (int i = 0; i < 3; ++i)
        jump[size_t(slot(tri2[size_t(i)]))] -= dot(g2.grad[size_t(i)], n);

    const double scale = h * len;
    for (int i = 0; i < count; ++i)
        for (int j = 0; j < count; ++j)
            out.push_back(
                {mask.global_to_local[static_cast<size_t>(verts[size_t(i)])],
                 mask.global_to_local[static_cast<size_t>(verts[size_t(j)])],
                 scale * jump[size_t(i)] * jump[size_t(j)]});
}

}  // namespace detail

/// S[i][j] over the ghost-facet set of the slice; symmetric positive
/// semidefinite with global linears in the kernel for every variant.
inline SparseMatrix assemble_ghost_penalty(const DomainSlice& slice,
                                           const FeSpace& space,
                                           const DofMask& mask,
                                           GhostVariant variant) {
    detail::require_same_mesh(slice, space);
    const BackgroundMesh& mesh = *space.mesh;
    const double h = mesh.h;
    const auto& facets = slice.ghost_facets;
    auto triplets = detail::assemble_triplets(
        static_cast<int>(facets.size()),
        [&](int item, std::vector<Triplet>& out) {
            const Facet& facet =
                mesh.facets[static_cast<size_t>(facets[static_cast<size_t>(item)])];
            switch (variant) {
                case GhostVariant::Direct:
                    detail::ghost_direct(mesh, mask, facet, h, out);
                    break;
                case GhostVariant::Lps:
                    detail::ghost_lps(mesh, mask, facet, h, out);
                    break;
                case GhostVariant::Djump:
                    detail::ghost_djump(mesh, mask, facet, h, out);
                    break;
            }
        });
    return SparseMatrix::from_triplets(mask.n_active(), mask.n_active(),
                                       std::move(triplets));
}

// ---------------------------------------------------------------------------
// Right-hand-side vectors
// ---------------------------------------------------------------------------

/// b[i] = integral over the discrete domain of f phi_i (cut rules).
template <class F>
std::vector<double> assemble_source(const DomainSlice& slice,
                                    const FeSpace& space, const DofMask& mask,
                                    const F& f, double t, int degree = 4) {
    detail::require_same_mesh(slice, space);
    const BackgroundMesh& mesh = *space.mesh;
    const auto& elements = slice.active_elements;
    return detail::assemble_vector_entries(
        mask.n_active(), static_cast<int>(elements.size()),
        [&](int item, std::vector<Triplet>& out) {
            const int el = elements[static_cast<size_t>(item)];
            if (slice.elem_class[static_cast<size_t>(el)] == ElemClass::Outside)
                return;
            const ElementGeom g = element_geometry(mesh, el);
            const auto dofs = detail::local_dofs(mesh, mask, el);
            const QuadRule rule = cut_volume_quadrature(slice, el, degree);
            std::array<double, 3> local{};
            for (size_t q = 0; q < rule.points.size(); ++q) {
                const double fv = f(rule.points[q], t);
                if (!std::isfinite(fv))
                    fail(ErrorCode::NonFinite,
                         str_printf("source returned %g", fv));
                const auto l = detail::hat_values(g, rule.points[q]);
                for (int i = 0; i < 3; ++i)
                    local[size_t(i)] += rule.weights[q] * fv * l[size_t(i)];
            }
            for (int i = 0; i < 3; ++i)
                out.push_back({dofs[size_t(i)], 0, local[size_t(i)]});
        });
}

/// c[i] = integral over the discrete domain of phi_i; c^T u is the discrete
/// mass of u.
inline std::vector<double> assemble_constraint_vector(const DomainSlice& slice,
                                                      const FeSpace& space,
                                                      const DofMask& mask,
                                                      int degree = 4) {
    return assemble_source(slice, space, mask,
                           [](const Vec2&, double) { return 1.0; }, 0.0,
                           degree);
}

// ---------------------------------------------------------------------------
// Nitsche boundary terms
// ---------------------------------------------------------------------------

/// Interface penalty/consistency matrix and Dirichlet data vector:
///   N[i][j] += int_Gamma (-grad phi_j . n) phi_i + (-grad phi_i . n) phi_j
///              + lambda_h phi_i phi_j,       lambda_h = lambda0 alpha / h;
///   g[i]    += int_Gamma g_D (-grad phi_i . n + lambda_h phi_i
///              + (w . n) phi_i / 2).
template <class GD, class W>
std::pair<SparseMatrix, std::vector<double>> assemble_nitsche(
    const DomainSlice& slice, const FeSpace& space, const DofMask& mask,
    const GD& g_dirichlet, const W& w, double alpha, double lambda0, double t,
    int degree = 4) {
    detail::require_same_mesh(slice, space);
    if (!detail::is_callable(g_dirichlet))
        fail(ErrorCode::MissingDirichletData,
             "Nitsche terms require Dirichlet boundary data");
    const BackgroundMesh& mesh = *space.mesh;
    const double lambda_h = lambda0 * alpha / mesh.h;
    const auto& elements = slice.active_elements;

    std::vector<Triplet> mat_triplets;
    std::vector<double> rhs(static_cast<size_t>(mask.n_active()), 0.0);
    // Matrix and vector feed from the same loop; keep it deterministic by
    // running the interface loop serially (cut elements are a small subset).
    for (int el : elements) {
        if (slice.elem_class[static_cast<size_t>(el)] != ElemClass::Cut)
            continue;
        const ElementGeom g = element_geometry(mesh, el);
        const auto dofs = detail::local_dofs(mesh, mask, el);
        const QuadRule rule = interface_quadrature(slice, el, degree);
        for (size_t q = 0; q < rule.points.size(); ++q) {
            const double wq = rule.weights[q];
            const auto l = detail::hat_values(g, rule.points[q]);
            std::array<double, 3> dn{};
            for (int i = 0; i < 3; ++i)
                dn[size_t(i)] = dot(g.grad[size_t(i)], rule.normal);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    mat_triplets.push_back(
                        {dofs[size_t(i)], dofs[size_t(j)],
                         wq * (-dn[size_t(j)] * l[size_t(i)] -
                               dn[size_t(i)] * l[size_t(j)] +
                               lambda_h * l[size_t(i)] * l[size_t(j)])});
            const double gd = g_dirichlet(rule.points[q], t);
            if (!std::isfinite(gd))
                fail(ErrorCode::NonFinite,
                     str_printf("Dirichlet data returned %g", gd));
            const double wn = dot(w(rule.points[q], t), rule.normal);
            for (int i = 0; i < 3; ++i)
                rhs[static_cast<size_t>(dofs[size_t(i)])] +=
                    wq * gd *
                    (-dn[size_t(i)] + lambda_h * l[size_t(i)] +
                     0.5 * wn * l[size_t(i)]);
        }
    }
    return {SparseMatrix::from_triplets(mask.n_active(), mask.n_active(),
                                        std::move(mat_triplets)),
            std::move(rhs)};
}

}  // namespace cutmove
