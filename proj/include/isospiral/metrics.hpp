#pragma once

#include "isospiral/energy.hpp"
#include "isospiral/mesh.hpp"
#include "isospiral/toolpath.hpp"

#include <span>
#include <vector>

namespace isospiral {

struct PathMetrics {
    double length = 0.0;      // |L|
    double smoothness = 0.0;  // integral of squared curvature along L
    std::size_t points = 0;   // after removing repeated points
};

// Curvature of the circle through three points (0 for collinear points).
[[nodiscard]] double circumcircle_curvature(const Vec3& a, const Vec3& b, const Vec3& c);

[[nodiscard]] PathMetrics path_metrics(const std::vector<Vec3>& points);
[[nodiscard]] PathMetrics path_metrics(const Toolpath& path);

struct SurfaceSample {
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::Zero();
    double area = 0.0;
    int face = -1;
};

// Centroids of an n x n subdivision of every face, with n chosen so that there are about
// `density` samples per mm^2. Points are offset by `offset` along interpolated vertex normals.
[[nodiscard]] std::vector<SurfaceSample> surface_samples(const TriMesh& mesh, double density, double offset = 0.0);

struct CoverageOptions {
    double sample_density = 1.0;  // samples per mm^2
    // Hits on one contiguous run of path segments split into separate passes once the run
    // advances by this much spiral angle or by half a level spacing; only used when the
    // path carries spiral coordinates.
    double pass_angle = 3.141592653589793;
};

struct CoverageField {
    std::vector<SurfaceSample> samples;  // on the offset surface S^h
    std::vector<int> counts;             // CT per sample
    double h_set = 0.0;
    double ct2 = 0.0;       // area integral of CT^2 (mm^2)
    double ct2_mean = 0.0;  // ct2 over the sampled area
    int max_ct = 0;
    std::size_t skipped = 0;  // samples with degenerate normals
};

[[nodiscard]] CoverageField coverage_metrics(const TriMesh& mesh, const Toolpath& path, const CutterSpec& cutter, double h_set,
                                             const CoverageOptions& options = {});

struct ScallopSamples {
    std::vector<SurfaceSample> samples;
    std::vector<double> residual;  // height left above the surface point, clipped at 0
    std::vector<char> uncut;
    std::vector<double> msh;       // max residual within one tool radius, cut samples only
    double S_C = 0.0;              // variance of msh
    double mean_msh = 0.0;
    std::size_t uncut_count = 0;
};

[[nodiscard]] ScallopSamples scallop_map(const Toolpath& path, const CutterSpec& cutter, std::vector<SurfaceSample> samples);
[[nodiscard]] ScallopSamples scallop_map(const TriMesh& mesh, const Toolpath& path, const CutterSpec& cutter, double sample_density);

// Residual height below the swept balls at one surface point; negative when no ball reaches
// the normal line within two tool radii.
[[nodiscard]] double envelope_residual(const Toolpath& path, const CutterSpec& cutter, const Vec3& point, const Vec3& normal);

// Two parallel passes on a plane: r - sqrt(r^2 - d^2 / 4).
[[nodiscard]] double two_pass_scallop(double tool_radius, double spacing);

struct ModeledScallop {
    double mean = 0.0;  // arc-length weighted
    double min = 0.0, max = 0.0;
};

// delta_T^2 (K_s + K_c) / (8 |grad T|^2) at every contact point.
[[nodiscard]] ModeledScallop modeled_scallop(const EnergyModel& model, std::span<const double> field, const Toolpath& path);

struct SignalMetrics {
    double a_mean = 0.0, a_var = 0.0;
    double a_cu = 0.0, a_tcu = 0.0;
    double threshold = 0.05;
};

// Signals are taken as magnitudes; a_tcu sums samples strictly above the threshold.
[[nodiscard]] SignalMetrics impact_metrics(std::span<const double> signal, double dt, double threshold = 0.05);

// Acceleration magnitude of the path traversed at constant speed (mm/s), sampled every dt.
[[nodiscard]] std::vector<double> path_acceleration(const Toolpath& path, double speed, double dt);

// Snaps points to their closest surface location, filling face, barycentric coordinates and
// normals. Returns the distance each point moved.
std::vector<double> project_to_surface(const TriMesh& mesh, Toolpath& path);

}  // namespace isospiral
