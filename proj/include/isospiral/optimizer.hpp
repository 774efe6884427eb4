#pragma once

#include "isospiral/energy.hpp"
#include "isospiral/mesh.hpp"
#include "isospiral/slitmap.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace isospiral {

// Signed radial displacement range (lambda_minus, lambda_plus) of a vertex of S^H.
struct FeasibleInterval {
    double lambda_plus = 0.0;
    double lambda_minus = 0.0;
    bool capped = false;  // bounded by the arc cap rather than the bisector hull
};

// Bisector hull of the one-ring, capped for boundary vertices by a circle of radius equal
// to the shortest incident edge.
[[nodiscard]] FeasibleInterval feasible_interval(const TriMesh& mesh, const std::vector<Vec2>& positions, int v);

// dE/d(radial position) by central differences of the local energy.
[[nodiscard]] double radial_gradient(const EnergyModel& model, int v, double step);
[[nodiscard]] double boundary_gradient(const EnergyModel& model, std::span<const int> loop, double step);

// Normalized steps of the sigmoid rule; C in (0.5, 1).
[[nodiscard]] std::vector<double> step_lengths(std::span<const double> gradients, std::span<const FeasibleInterval> intervals,
                                               double C);

struct OptimizerOptions {
    double C = 0.9;
    int max_iterations = 2000;
    double tolerance = 1e-7;  // relative decrease
    int patience = 5;         // consecutive iterations below tolerance
    int max_halvings = 10;
    double clip = 0.95;
    double fd_scale = 1e-4;
    // Entries whose room in the descent direction is below this fraction of their interval
    // are frozen for the iteration.
    double pin_fraction = 1e-2;
};

struct IterationRecord {
    int iteration = 0;
    double E = 0.0, E_w = 0.0, E_k = 0.0;
    double max_step = 0.0;
    int halvings = 0;
    std::size_t inverted_faces = 0;
    double cocircularity = 0.0;  // worst (max - min) / max radius over movable loops
};

enum class OptimizerStatus { converged, max_iterations, stalled };

struct OptimizerResult {
    std::vector<double> field;  // T_opt = |V^H|
    EnergyReport initial, final;
    std::vector<IterationRecord> trace;  // entry 0 is the initial state
    std::vector<double> seconds;         // wall time per iteration, kept apart from the trace
    OptimizerStatus status = OptimizerStatus::converged;
};

// Radial optimization of the "S^H" channel; writes the final positions back.
OptimizerResult optimize(TriMesh& mesh, const SlitDomain& domain, const FaceFrame& frames, const CutterSpec& cutter,
                         const EnergyOptions& energy, const OptimizerOptions& options = {});

[[nodiscard]] std::string to_string(OptimizerStatus status);
void write_trace_csv(std::ostream& out, const std::vector<IterationRecord>& trace);

}  // namespace isospiral
