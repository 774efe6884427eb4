#pragma once

#include "isospiral/mesh.hpp"
#include "isospiral/operators.hpp"

#include <span>
#include <vector>

namespace isospiral {

struct CutterSpec {
    double tool_radius = 10.0;  // mm
    int flutes = 2;
    double overhang = 0.0;

    // K_c: the ball curvature, so that a plane gives the classical d^2 / (8 r) scallop.
    [[nodiscard]] double curvature() const { return 1.0 / tool_radius; }
};

struct EnergyOptions {
    double alpha = 10.0;
    // Evaluate the normal-curvature term along the gradient, unsquared, as printed.
    bool printed_normal_term = false;
    // Sum the divergence unsquared instead of C_j * div^2.
    bool printed_geodesic_term = false;
};

struct EnergyReport {
    double E_w = 0.0;
    double E_n = 0.0;
    double E_g = 0.0;
    double E_k = 0.0;
    double E = 0.0;
    double avg = 0.0;
    double alpha = 0.0;
    std::size_t floored_faces = 0;
};

// Precomputed per-face operators for evaluating E = E_w + alpha (E_n + E_g) on a fixed
// surface, plus a cached field for cheap local re-evaluation after vertex edits.
class EnergyModel {
public:
    EnergyModel(const TriMesh& mesh, const FaceFrame& frames, CutterSpec cutter, EnergyOptions options);

    // Gradient floor used by subsequent evaluations; fixed by reset() from the field range.
    void set_gradient_floor(double eps) { grad_floor_ = eps; }
    [[nodiscard]] double gradient_floor() const { return grad_floor_; }

    [[nodiscard]] EnergyReport evaluate(std::span<const double> field) const;

    // Install a field as the cached state and return its report.
    EnergyReport reset(std::vector<double> field, bool refresh_floor = true);
    [[nodiscard]] const std::vector<double>& field() const { return field_; }

    // E restricted to the faces around v and the divergence terms of v and its neighbours.
    [[nodiscard]] double local_energy(int v) const;
    [[nodiscard]] double local_energy_at(int v, double value) const;

    // Energy change if the listed vertices took the given values (cached state untouched).
    [[nodiscard]] double delta(std::span<const int> vertices, std::span<const double> values) const;
    void commit(std::span<const int> vertices, std::span<const double> values);

    // (K_s + K_c) / (8 |grad T|^2) on face f for the given field.
    [[nodiscard]] double scallop_factor(int f, std::span<const double> field) const;

    [[nodiscard]] const TriMesh& mesh() const { return mesh_; }
    [[nodiscard]] const EnergyOptions& options() const { return opt_; }
    [[nodiscard]] const CutterSpec& cutter() const { return cutter_; }

private:
    struct FaceOps {
        Vec2 g1, g2;              // gradient = (T1 - T0) g1 + (T2 - T0) g2
        Mat2 c;                   // curvature tensor in the face frame
        std::array<Vec2, 3> w;    // divergence weights per corner
        double area = 0.0;
    };
    struct FaceTerm {
        double w = 0.0, n = 0.0, x = 0.0;
        Vec2 dir = Vec2::Zero();  // unit gradient, zero when floored
        bool floored = false;
    };

    [[nodiscard]] FaceTerm face_term(int f, double t0, double t1, double t2) const;
    [[nodiscard]] double vertex_term(int j, double s) const;
    [[nodiscard]] double local_sum(std::span<const int> faces, std::span<const int> verts,
                                   const std::vector<FaceTerm>& terms) const;
    void gather(std::span<const int> vertices) const;

    const TriMesh& mesh_;
    CutterSpec cutter_;
    EnergyOptions opt_;
    double kc_ = 0.0;
    double grad_floor_ = 0.0;
    std::vector<FaceOps> ops_;
    std::vector<char> interior_;

    std::vector<double> field_;
    std::vector<FaceTerm> terms_;

    // Scratch for local evaluations.
    mutable std::vector<int> face_mark_, face_pos_, vert_mark_;
    mutable int stamp_ = 0;
    mutable std::vector<int> faces_, verts_;
    mutable std::vector<double> scratch_field_;
    mutable std::vector<FaceTerm> scratch_terms_;
};

// Gradient floor for a field: 1e-8 * (field range) / (bbox diagonal).
[[nodiscard]] double default_gradient_floor(const TriMesh& mesh, std::span<const double> field);

[[nodiscard]] EnergyReport evaluate_energy(const TriMesh& mesh, std::span<const double> field, const CutterSpec& cutter,
                                           const EnergyOptions& options);

}  // namespace isospiral
