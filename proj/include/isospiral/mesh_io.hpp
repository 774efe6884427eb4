#pragma once

#include "isospiral/mesh.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace isospiral {

enum class MeshFormat { obj, ply, stl };

struct RawMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
};

[[nodiscard]] MeshFormat format_from_extension(const std::filesystem::path& path);

// Parses OBJ, PLY (ascii / binary) or STL (ascii / binary). Polygons are fan-triangulated;
// STL triangle soups are welded on exact coordinate equality.
[[nodiscard]] RawMesh read_raw_mesh(const std::filesystem::path& path, std::optional<MeshFormat> format = std::nullopt);

[[nodiscard]] TriMesh load_mesh(const std::filesystem::path& path, std::optional<MeshFormat> format = std::nullopt,
                                TopologyRequirements req = {});

void write_obj(const TriMesh& mesh, const std::filesystem::path& path);

// Planar channel as an ASCII PLY (x, y, z = 0) with an optional per-vertex scalar property `t`.
void write_channel_ply(const TriMesh& mesh, const std::vector<Vec2>& positions, const std::filesystem::path& path,
                       const std::vector<double>* scalar = nullptr, const std::string& comment = {});

}  // namespace isospiral
