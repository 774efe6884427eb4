#pragma once

#include "isospiral/mesh.hpp"

#include <vector>

namespace isospiral {

using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

// Per-face orthonormal tangent frames and second fundamental forms. `curvature[f]` is
// expressed in (u[f], v[f]); directional curvature along a unit tangent t is t'Ct.
// Sign convention: C = dn/dp, so a sphere with outward normals has curvature +1/R.
struct FaceFrame {
    std::vector<Vec3> u, v, normal;
    std::vector<Mat2> curvature;
    std::vector<char> valid;

    [[nodiscard]] Vec2 to_local(int f, const Vec3& w) const { return {w.dot(u[f]), w.dot(v[f])}; }
    [[nodiscard]] Vec3 to_world(int f, const Vec2& w) const { return w.x() * u[f] + w.y() * v[f]; }
};

// Frames only; curvature left at zero.
[[nodiscard]] FaceFrame face_frames(const TriMesh& mesh);

// Rusinkiewicz-style estimate: per-face fits from normal differences, averaged into
// vertex tensors, then averaged back into faces.
[[nodiscard]] FaceFrame curvature_tensor(const TriMesh& mesh);

// Per-vertex principal curvatures (k1 >= k2) from the intermediate vertex tensors.
[[nodiscard]] std::vector<Vec2> vertex_principal_curvatures(const TriMesh& mesh);

struct FaceGradients {
    std::vector<Vec3> grad;  // ambient coordinates, lying in the face plane
    std::vector<char> valid;
};

// Gradient of the piecewise-linear interpolant of `field`; degenerate faces are flagged invalid.
[[nodiscard]] FaceGradients face_gradient(const TriMesh& mesh, const std::vector<double>& field);

// Cotangent divergence of a per-face tangent field, normalized by 2 * dual area. Faces
// flagged invalid are skipped; `flagged` (optional) marks vertices without valid faces.
[[nodiscard]] std::vector<double> vertex_divergence(const TriMesh& mesh, const std::vector<Vec3>& field,
                                                    const std::vector<char>* valid = nullptr,
                                                    std::vector<char>* flagged = nullptr);

}  // namespace isospiral
