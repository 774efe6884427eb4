#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace isospiral {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

// Names of the planar position channels carried alongside the 3D surface.
inline constexpr const char* kSlitChannel = "S^S";
inline constexpr const char* kDomainChannel = "S^H";

struct TopologyRequirements {
    // Planning meshes must be connected, genus 0, with at least one boundary loop.
    bool planning = true;
    std::size_t max_degenerate_faces = 0;
};

// Triangle mesh with immutable connectivity and 3D geometry. Boundary loop 0 is the
// loop with the greatest 3D length; loops are oriented with the surface on their left.
class TriMesh {
public:
    TriMesh() = default;
    TriMesh(std::vector<Vec3> vertices, std::vector<Face> faces, TopologyRequirements req = {});

    [[nodiscard]] std::size_t num_vertices() const noexcept { return vertices_.size(); }
    [[nodiscard]] std::size_t num_faces() const noexcept { return faces_.size(); }
    [[nodiscard]] const std::vector<Vec3>& vertices() const noexcept { return vertices_; }
    [[nodiscard]] const std::vector<Face>& faces() const noexcept { return faces_; }
    [[nodiscard]] const Vec3& vertex(int v) const { return vertices_[v]; }
    [[nodiscard]] const Face& face(int f) const { return faces_[f]; }

    [[nodiscard]] const std::vector<std::array<int, 2>>& edges() const noexcept { return edges_; }
    // Face across the edge opposite `corner` of face `f`, or -1 on the boundary.
    [[nodiscard]] int neighbor(int f, int corner) const { return neighbors_[f][corner]; }
    [[nodiscard]] int corner_of(int f, int v) const;
    [[nodiscard]] std::span<const int> vertex_faces(int v) const;
    [[nodiscard]] std::span<const int> vertex_neighbors(int v) const;

    [[nodiscard]] const std::vector<std::vector<int>>& boundary_loops() const noexcept { return loops_; }
    [[nodiscard]] std::size_t num_boundaries() const noexcept { return loops_.size(); }
    // Index of the boundary loop containing v, or -1 for interior vertices.
    [[nodiscard]] int boundary_of(int v) const { return vertex_loop_[v]; }
    [[nodiscard]] bool is_boundary(int v) const { return boundary_of(v) >= 0; }
    [[nodiscard]] double loop_length(std::size_t loop) const;

    [[nodiscard]] const std::vector<double>& face_areas() const noexcept { return face_areas_; }
    [[nodiscard]] const std::vector<double>& dual_areas() const noexcept { return dual_areas_; }
    [[nodiscard]] double total_area() const noexcept { return total_area_; }
    [[nodiscard]] double bbox_diagonal() const noexcept { return bbox_diagonal_; }
    [[nodiscard]] double average_edge_length() const noexcept { return avg_edge_; }
    [[nodiscard]] double degenerate_area_threshold() const noexcept { return 1e-12 * bbox_diagonal_ * bbox_diagonal_; }
    [[nodiscard]] const std::vector<int>& degenerate_faces() const noexcept { return degenerate_; }
    [[nodiscard]] int euler_characteristic() const noexcept;
    [[nodiscard]] int genus() const noexcept;

    void set_channel(const std::string& name, std::vector<Vec2> positions);
    [[nodiscard]] bool has_channel(const std::string& name) const { return channels_.contains(name); }
    [[nodiscard]] const std::vector<Vec2>& channel(const std::string& name) const;

private:
    void build_connectivity();
    void build_boundaries();
    void compute_geometry();
    void validate(const TopologyRequirements& req) const;

    std::vector<Vec3> vertices_;
    std::vector<Face> faces_;
    std::vector<std::array<int, 2>> edges_;
    std::vector<std::array<int, 3>> neighbors_;
    std::vector<int> vf_offsets_, vf_;
    std::vector<int> vv_offsets_, vv_;
    std::vector<std::vector<int>> loops_;
    std::vector<int> vertex_loop_;
    std::vector<double> face_areas_, dual_areas_;
    std::vector<int> degenerate_;
    double total_area_ = 0.0;
    double bbox_diagonal_ = 0.0;
    double avg_edge_ = 0.0;
    std::size_t components_ = 0;
    std::size_t isolated_ = 0;
    std::map<std::string, std::vector<Vec2>> channels_;
};

[[nodiscard]] inline double signed_area(const Vec2& a, const Vec2& b, const Vec2& c)
{
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

// Faces whose planar image has non-positive signed area.
[[nodiscard]] std::size_t count_inverted_faces(const TriMesh& mesh, const std::vector<Vec2>& positions);

// Per-vertex unit normals from Max's weights (area over squared edge lengths).
[[nodiscard]] std::vector<Vec3> vertex_normals(const TriMesh& mesh);

[[nodiscard]] Vec3 face_normal(const TriMesh& mesh, int f);

}  // namespace isospiral
