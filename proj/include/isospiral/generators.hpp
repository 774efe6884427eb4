#pragma once

#include "isospiral/mesh.hpp"

#include <functional>
#include <string>
#include <vector>

namespace isospiral {

struct Circle {
    Vec2 center = Vec2::Zero();
    double radius = 1.0;
};

struct MeshData {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;

    [[nodiscard]] TriMesh build(TopologyRequirements req = {}) const { return TriMesh(vertices, faces, req); }
};

// Unit square [0,1]^2 split along its diagonal.
[[nodiscard]] MeshData unit_square();

// Regular grid over [x0,x0+width] x [y0,y0+height], alternating diagonals.
[[nodiscard]] MeshData planar_grid(int nx, int ny, double width, double height, double x0 = 0.0, double y0 = 0.0);

// Concentric rings; ring j carries `sectors` vertices rotated by half a step on odd rings.
[[nodiscard]] MeshData polar_annulus(double inner_radius, double outer_radius, int rings, int sectors);

// Disk with a center vertex and ring j holding 6j vertices.
[[nodiscard]] MeshData polar_disk(double radius, int rings);

[[nodiscard]] MeshData icosphere(double radius, int subdivisions);
[[nodiscard]] MeshData open_cylinder(double radius, double height, int rings, int sectors);
[[nodiscard]] MeshData torus(double major, double minor, int nu, int nv);

// Delaunay triangulation of a disk with circular holes at roughly uniform edge length.
[[nodiscard]] MeshData holed_disk(const Circle& outer, const std::vector<Circle>& holes, double edge_length);

[[nodiscard]] MeshData lift(MeshData planar, const std::function<double(double, double)>& height);

// Fixture meshes shipped with the project (millimetre units).
struct BundledMesh {
    std::string name;
    MeshData data;
};

[[nodiscard]] MeshData threehole_disk(double edge_length = 1.3);
[[nodiscard]] MeshData freeform_surface(double edge_length = 2.5);
[[nodiscard]] MeshData flat_annulus_fixture();
[[nodiscard]] std::vector<BundledMesh> bundled_meshes();

}  // namespace isospiral
