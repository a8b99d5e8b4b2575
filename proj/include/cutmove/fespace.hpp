#pragma once

/// @file fespace.hpp
/// P1 Lagrange space on the background mesh, restricted per time step to the
/// active elements: DOF masking, nodal interpolation and point evaluation.

#include <cmath>
#include <cstdint>
#include <vector>

#include "cutmove/geometry.hpp"
#include "cutmove/mesh.hpp"

namespace cutmove {

/// Continuous piecewise-linear space on the whole background mesh; one DOF
/// per vertex.  The degree parameter is carried for interface stability but
/// only m = 1 is implemented.
struct FeSpace {
    const BackgroundMesh* mesh = nullptr;
    int degree = 1;

    int n_dofs() const { return mesh->n_vertices(); }
};

inline FeSpace make_fespace(const BackgroundMesh& mesh, int degree = 1) {
    if (degree != 1)
        fail(ErrorCode::ConfigInvalid,
             str_printf("only polynomial degree 1 is supported (got %d)",
                        degree));
    return FeSpace{&mesh, degree};
}

/// Active DOF subset of a slice with a contiguous local numbering
/// (local_to_global ascending, so the numbering is deterministic).
struct DofMask {
    std::vector<std::uint8_t> active;  ///< per global DOF
    std::vector<int> global_to_local;  ///< -1 when inactive
    std::vector<int> local_to_global;  ///< ascending global ids

    int n_active() const { return static_cast<int>(local_to_global.size()); }
    bool is_active(int dof) const { return active[static_cast<size_t>(dof)] != 0; }
};

/// DOFs carried by the active elements of the slice (the vertices of every
/// active element).  Throws MeshMismatch if slice and space disagree.
inline DofMask active_dofs(const FeSpace& space, const DomainSlice& slice) {
    if (space.mesh != slice.mesh)
        fail(ErrorCode::MeshMismatch,
             "slice was built on a different mesh than the space");
    const BackgroundMesh& mesh = *space.mesh;
    DofMask mask;
    mask.active.assign(static_cast<size_t>(space.n_dofs()), 0);
    for (int t : slice.active_elements)
        for (int v : mesh.triangles[static_cast<size_t>(t)])
            mask.active[static_cast<size_t>(v)] = 1;
    mask.global_to_local.assign(static_cast<size_t>(space.n_dofs()), -1);
    for (int v = 0; v < space.n_dofs(); ++v) {
        if (mask.active[static_cast<size_t>(v)]) {
            mask.global_to_local[static_cast<size_t>(v)] = mask.n_active();
            mask.local_to_global.push_back(v);
        }
    }
    return mask;
}

/// A P1 function as one coefficient per global DOF plus the mask of DOFs that
/// are meaningful for the current slice.  Inactive coefficients are stored as
/// zero but reading them through evaluate() is a contract violation.
struct FeFunction {
    const FeSpace* space = nullptr;
    std::vector<double> coefficients;
    std::vector<std::uint8_t> active_mask;
};

namespace detail {

inline void require_element_active(const FeFunction& u, int element) {
    const BackgroundMesh& mesh = *u.space->mesh;
    for (int v : mesh.triangles[static_cast<size_t>(element)])
        if (!u.active_mask[static_cast<size_t>(v)])
            fail(ErrorCode::InactiveElement,
                 str_printf("element %d touches masked DOF %d", element, v));
}

}  // namespace detail

/// Barycentric-linear interpolation of the vertex coefficients at a point of
/// the given (active) element.
inline double evaluate(const FeFunction& u, int element, const Vec2& p) {
    detail::require_element_active(u, element);
    const BackgroundMesh& mesh = *u.space->mesh;
    const ElementGeom g = element_geometry(mesh, element);
    const auto& tri = mesh.triangles[static_cast<size_t>(element)];
    double value = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double lambda =
            (i == 0 ? 1.0 : 0.0) + dot(g.grad[size_t(i)], p - g.v[0]);
        value += u.coefficients[static_cast<size_t>(tri[size_t(i)])] * lambda;
    }
    return value;
}

/// Constant per-element gradient of the P1 interpolant.
inline Vec2 evaluate_gradient(const FeFunction& u, int element, const Vec2&) {
    detail::require_element_active(u, element);
    const BackgroundMesh& mesh = *u.space->mesh;
    const ElementGeom g = element_geometry(mesh, element);
    const auto& tri = mesh.triangles[static_cast<size_t>(element)];
    Vec2 grad{0.0, 0.0};
    for (int i = 0; i < 3; ++i)
        grad += u.coefficients[static_cast<size_t>(tri[size_t(i)])] *
                g.grad[size_t(i)];
    return grad;
}

/// Nodal (Lagrange) interpolation of g(x, t) on the active DOFs of the slice;
/// inactive DOFs are zeroed and masked.  Throws NonFinite on NaN/inf nodal
/// values.
template <class G>
FeFunction interpolate(const FeSpace& space, G&& g, double t,
                       const DomainSlice& slice) {
    const DofMask mask = active_dofs(space, slice);
    FeFunction u;
    u.space = &space;
    u.coefficients.assign(static_cast<size_t>(space.n_dofs()), 0.0);
    u.active_mask = mask.active;
    for (int v : mask.local_to_global) {
        const double value = g(space.mesh->vertices[static_cast<size_t>(v)], t);
        if (!std::isfinite(value))
            fail(ErrorCode::NonFinite,
                 str_printf("interpolated value %g at vertex %d", value, v));
        u.coefficients[static_cast<size_t>(v)] = value;
    }
    return u;
}

}  // namespace cutmove
