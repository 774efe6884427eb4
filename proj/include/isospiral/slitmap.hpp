#pragma once

#include "isospiral/mesh.hpp"

#include <vector>

namespace isospiral {

enum class SlitMode { disk, annulus };

// Either an interior point O (face + barycentric coordinates) or an inner boundary loop.
struct Anchor {
    SlitMode mode = SlitMode::disk;
    int face = -1;
    Vec3 bary = Vec3::Constant(1.0 / 3.0);
    int boundary = -1;

    static Anchor interior(int face, Vec3 bary = Vec3::Constant(1.0 / 3.0)) { return {SlitMode::disk, face, bary, -1}; }
    static Anchor loop(int boundary) { return {SlitMode::annulus, -1, Vec3::Zero(), boundary}; }
};

struct Slit {
    int boundary = -1;
    double radius = 0.0;
    // Angular extent [phi_start, phi_end] with phi_start in [-pi, pi) and phi_end >= phi_start.
    double phi_start = 0.0;
    double phi_end = 0.0;
};

struct SlitDomain {
    SlitMode mode = SlitMode::disk;
    Vec2 center = Vec2::Zero();
    double outer_radius = 1.0;
    double inner_radius = 0.0;  // R_A in annulus mode
    std::vector<Slit> slits;
    Anchor anchor;
    std::vector<int> cut;  // vertex path from the outer boundary to the anchor
    std::size_t untangled = 0;  // interior vertices moved to repair folds near slit tips
    double untangle_shift = 0.0;  // largest image displacement made by that repair
    std::vector<double> log_radius;  // harmonic solution u, before any repair
};

// Conformal slit map of a genus-0 surface. Writes the "S^S" channel on `mesh`.
SlitDomain slit_map(TriMesh& mesh, const Anchor& anchor);

// Refreshes radii and angular extents of the slits from a position channel.
void update_slits(const TriMesh& mesh, const std::vector<Vec2>& positions, SlitDomain& domain);

struct SlitQuality {
    double outer_radius_error = 0.0;
    std::vector<double> slit_spread;    // std / mean of the image radius per inner boundary
    std::vector<double> flux_residual;  // per inner boundary, of the solved log-radius field
    std::vector<double> image_flux_residual;  // same, recomputed from log |w| of the channel
    std::vector<double> distortion;     // per face, ratio of singular values (>= 1)
    std::vector<double> histogram_edges;
    std::vector<std::size_t> histogram;
    std::vector<int> flagged_faces;
    std::size_t inverted_faces = 0;
};

[[nodiscard]] SlitQuality slit_quality(const TriMesh& mesh, const SlitDomain& domain, double distortion_threshold = 4.0);

}  // namespace isospiral
