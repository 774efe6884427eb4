#pragma once

#include "isospiral/energy.hpp"
#include "isospiral/mesh.hpp"
#include "isospiral/slitmap.hpp"

#include <vector>

namespace isospiral {

// Piecewise-linear f over [x_0, 1] with strictly increasing nodes and values; linear
// extrapolation outside the node range.
struct RadialProfile {
    std::vector<double> nodes;
    std::vector<double> values;

    [[nodiscard]] double operator()(double x) const;
    [[nodiscard]] bool strictly_increasing() const;

    static RadialProfile linear(double x0, double f0, double slope, int count);
};

struct ProfileOptions {
    int nodes = 64;
    double initial_step = 0.05;  // fraction of the local node gap
    double growth = 1.5;         // step factor after an accepted perturbation; halved on rejection
    double margin = 1e-9;        // relative to the value range
    double tolerance = 1e-6;     // best single |dE| / E over a sweep
    double min_step = 1e-6;      // relative to the value range
    int max_sweeps = 500;
};

struct ProfileResult {
    RadialProfile profile;
    EnergyReport report;
    std::vector<double> trace;  // E after the slope fit, then after each sweep
    std::size_t accepted = 0;
};

// Field T = f(|S^S|) for a profile and a position channel.
[[nodiscard]] std::vector<double> profile_field(const RadialProfile& profile, const std::vector<Vec2>& positions);

// Pinned first node: f(0) = 0 in disk mode, f(R_A) = R_A in annulus mode.
[[nodiscard]] double profile_origin(const SlitDomain& domain);

[[nodiscard]] ProfileResult optimize_radial_profile(EnergyModel& model, const std::vector<Vec2>& positions,
                                                    const SlitDomain& domain, const ProfileOptions& options = {});
[[nodiscard]] ProfileResult optimize_radial_profile(const TriMesh& mesh, const SlitDomain& domain, const CutterSpec& cutter,
                                                    const EnergyOptions& energy, const ProfileOptions& options = {});

enum class DomainMode { disk, annulus, automatic };

struct ThetaOptions {
    DomainMode mode = DomainMode::automatic;
    int seeds = 8;
    double offset_fraction = 2.0;  // inward offset of the relocation curves, in average edge lengths
    int max_iterations = 25;
    double initial_step = 0.15;  // relative to the bbox diagonal
    ProfileOptions search_profile{.nodes = 16, .tolerance = 1e-4, .max_sweeps = 200};
    ProfileOptions final_profile{};
};

struct ThetaStep {
    Anchor anchor;
    double E_min = 0.0;
    int relocated_from = -1;  // inner loop crossed by the step, if the iterate was relocated
};

struct ThetaResult {
    Anchor anchor;
    SlitDomain domain;
    ProfileResult profile;
    double E_min = 0.0;
    std::vector<ThetaStep> trace;        // accepted iterates
    std::vector<ThetaStep> relocations;  // every step that left through an inner loop
    std::size_t evaluations = 0;
};

// Faces forming the inward offset of an inner loop at `offset` (mm) from it.
[[nodiscard]] std::vector<int> offset_curve(const TriMesh& mesh, int loop, double offset);

// Minimum E over profiles for one anchor; +inf if the anchor is infeasible.
[[nodiscard]] double theta_energy(const TriMesh& mesh, const Anchor& anchor, const FaceFrame& frames,
                                  const CutterSpec& cutter, const EnergyOptions& energy, const ProfileOptions& profile);

// Discrete descent from one interior start, relocating onto offset curves when a step
// leaves the surface through an inner loop.
[[nodiscard]] ThetaResult descend_theta(const TriMesh& mesh, const Anchor& start, const CutterSpec& cutter,
                                        const EnergyOptions& energy, const ThetaOptions& options = {});

// Multi-start search over interior and boundary anchors. Writes "S^S" for the winner.
[[nodiscard]] ThetaResult search_theta(TriMesh& mesh, const CutterSpec& cutter, const EnergyOptions& energy,
                                       const ThetaOptions& options = {});

struct InitializedDomain {
    SlitDomain domain;          // slit radii and extents in S^H
    std::vector<double> field;  // T_init = |S^H|
};

// S^H = S^S / |S^S| * f(|S^S|). Writes "S^H".
InitializedDomain initialize_domain(TriMesh& mesh, const SlitDomain& domain, const RadialProfile& profile);

}  // namespace isospiral
