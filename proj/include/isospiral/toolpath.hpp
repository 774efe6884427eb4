#pragma once

#include "isospiral/energy.hpp"
#include "isospiral/mesh.hpp"
#include "isospiral/slitmap.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace isospiral {

struct PathPoint {
    Vec3 position = Vec3::Zero();
    Vec3 normal = Vec3::Zero();  // unit surface normal, zero when unknown
    int face = -1;
    Vec3 bary = Vec3::Zero();
    Vec2 domain = Vec2::Zero();  // location in S^H
    double phi = 0.0;            // unwrapped spiral angle
    double rho = 0.0;            // scheduled domain radius
    int turn = 0;
};

struct Toolpath {
    std::vector<PathPoint> points;
    bool closed = false;
    double delta_T = 0.0;
    double h_set = 0.0;
    CutterSpec cutter;
};

// Field increment between passes so that the mean modeled scallop equals h_set.
[[nodiscard]] double level_spacing(const EnergyReport& report, double h_set);

struct Isocurve {
    std::vector<Vec3> points;
    std::vector<int> faces;
    std::vector<Vec3> bary;
    bool closed = false;
};

// Marching triangles. A vertex counts as above the level when its value is >= level,
// except at the field minimum where equality counts as below.
[[nodiscard]] std::vector<Isocurve> extract_isocurves(const TriMesh& mesh, std::span<const double> field, double level);

struct SpiralOptions {
    double chord_tolerance = 1e-3;  // relative to the bbox diagonal
    int samples_per_turn = 720;
    double clearance_steps = 2.0;   // angular clearance around slit endpoints, in samples
};

// Archimedean spiral in S^H with radius growing by delta_T per turn, mapped back to the
// surface through the shared triangulation. Reads "S^H".
[[nodiscard]] Toolpath synthesize_spiral(const TriMesh& mesh, const SlitDomain& domain, double delta_T,
                                         const SpiralOptions& options = {});

// Pairs of non-adjacent segments that touch or cross, using exact orientation tests.
[[nodiscard]] std::size_t count_self_intersections(const std::vector<Vec2>& polyline);

[[nodiscard]] std::vector<Vec2> domain_polyline(const Toolpath& path);

enum class PathFormat { csv, json, gcode, svg };

struct ExportOptions {
    double feed = 1000.0;  // mm/min
    std::string config_hash;
};

[[nodiscard]] PathFormat path_format_from_extension(const std::filesystem::path& file);
void export_toolpath(const Toolpath& path, PathFormat format, const std::filesystem::path& file, const ExportOptions& options = {});
[[nodiscard]] std::string toolpath_to_string(const Toolpath& path, PathFormat format, const ExportOptions& options = {});

// Reads csv or json exports.
[[nodiscard]] Toolpath read_toolpath(const std::filesystem::path& file);

}  // namespace isospiral
