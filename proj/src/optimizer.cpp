#include "isospiral/optimizer.hpp"

#include "isospiral/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace isospiral {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec2 perp(const Vec2& e) { return {-e.y(), e.x()}; }

// Worst relative radius spread over the movable loops.
double cocircularity(const TriMesh& mesh, const std::vector<Vec2>& h)
{
    double worst = 0.0;
    for (std::size_t l = 0; l < mesh.num_boundaries(); ++l) {
        double lo = kInf, hi = 0.0;
        for (int v : mesh.boundary_loops()[l]) {
            lo = std::min(lo, h[v].norm());
            hi = std::max(hi, h[v].norm());
        }
        if (hi > 0.0) worst = std::max(worst, (hi - lo) / hi);
    }
    return worst;
}

}  // namespace

FeasibleInterval feasible_interval(const TriMesh& mesh, const std::vector<Vec2>& positions, int v)
{
    const Vec2& p = positions[v];
    const double r = p.norm();
    if (r == 0.0) return {};
    const Vec2 dir = p / r;
    FeasibleInterval out{kInf, -kInf, false};
    auto clip = [&](const Vec2& origin, const Vec2& along) {
        // Half-plane bounded by the line origin + s * along, on the side of p.
        Vec2 n = perp(along).normalized();
        double d = n.dot(p - origin);
        if (d < 0.0) {
            n = -n;
            d = -d;
        }
        if (!(d > 0.0)) fail(ErrorKind::infeasible_geometry, "mesh state invalid");
        const double rate = n.dot(dir);
        if (rate < 0.0) out.lambda_plus = std::min(out.lambda_plus, d / -rate);
        if (rate > 0.0) out.lambda_minus = std::max(out.lambda_minus, -d / rate);
    };
    double shortest = kInf;
    for (int f : mesh.vertex_faces(v)) {
        const int k = mesh.corner_of(f, v);
        const Vec2& a = positions[mesh.face(f)[(k + 1) % 3]];
        const Vec2& b = positions[mesh.face(f)[(k + 2) % 3]];
        if (signed_area(p, a, b) <= 0.0) fail(ErrorKind::infeasible_geometry, "mesh state invalid");
        clip(a, (p - a).normalized() + (b - a).normalized());
        clip(b, (p - b).normalized() + (a - b).normalized());
        shortest = std::min({shortest, (a - p).norm(), (b - p).norm()});
    }
    if (mesh.is_boundary(v)) {
        if (shortest < out.lambda_plus) {
            out.lambda_plus = shortest;
            out.capped = true;
        }
        if (-shortest > out.lambda_minus) {
            out.lambda_minus = -shortest;
            out.capped = true;
        }
    }
    // The vertex may not reach the centre.
    out.lambda_minus = std::max(out.lambda_minus, -r);
    if (!(out.lambda_minus < 0.0 && out.lambda_plus > 0.0) || !std::isfinite(out.lambda_plus))
        fail(ErrorKind::infeasible_geometry, "mesh state invalid");
    return out;
}

double radial_gradient(const EnergyModel& model, int v, double step)
{
    const double t = model.field()[v];
    const int one[] = {v};
    const double up[] = {t + step};
    const double down[] = {t - step};
    return (model.delta(one, up) - model.delta(one, down)) / (2.0 * step);
}

double boundary_gradient(const EnergyModel& model, std::span<const int> loop, double step)
{
    double g = 0.0;
    for (int v : loop) g += radial_gradient(model, v, step);
    return g;
}

std::vector<double> step_lengths(std::span<const double> gradients, std::span<const FeasibleInterval> intervals, double C)
{
    if (!(C > 0.5 && C < 1.0)) fail(ErrorKind::bad_input, "step constant C must lie in (0.5, 1)");
    const std::size_t n = gradients.size();
    std::vector<double> limit(n, 0.0), g1(n, 0.0), out(n, 0.0);
    double gmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = gradients[i];
        if (g == 0.0) continue;
        limit[i] = g < 0.0 ? std::abs(intervals[i].lambda_plus) : std::abs(intervals[i].lambda_minus);
        if (limit[i] == 0.0) continue;
        g1[i] = -g / limit[i];
        gmax = std::max(gmax, std::abs(g1[i]));
    }
    if (gmax == 0.0) return out;
    const double scale = std::log(1.0 / C - 1.0) / gmax;
    for (std::size_t i = 0; i < n; ++i) {
        if (limit[i] == 0.0) continue;
        const double g2 = scale * g1[i];
        out[i] = (2.0 / (1.0 + std::exp(g2)) - 1.0) * limit[i];
    }
    return out;
}

OptimizerResult optimize(TriMesh& mesh, const SlitDomain& /*domain*/, const FaceFrame& frames, const CutterSpec& cutter,
                         const EnergyOptions& energy, const OptimizerOptions& options)
{
    using clock = std::chrono::steady_clock;
    if (!mesh.has_channel(kDomainChannel)) fail(ErrorKind::bad_input, "optimize: mesh has no S^H channel");
    std::vector<Vec2> h = mesh.channel(kDomainChannel);
    const int nv = static_cast<int>(mesh.num_vertices());
    if (count_inverted_faces(mesh, h) > 0) fail(ErrorKind::infeasible_geometry, "optimize: initial S^H has inverted faces");

    // Entries: interior vertices one by one, then each inner loop as a rigid circle.
    std::vector<std::vector<int>> entries;
    for (int v = 0; v < nv; ++v)
        if (!mesh.is_boundary(v) && h[v].norm() > 0.0) entries.push_back({v});
    for (std::size_t l = 1; l < mesh.num_boundaries(); ++l) entries.push_back(mesh.boundary_loops()[l]);

    std::vector<double> t(nv);
    for (int v = 0; v < nv; ++v) t[v] = h[v].norm();
    EnergyModel model(mesh, frames, cutter, energy);
    OptimizerResult res;
    res.initial = model.reset(t);
    EnergyReport cur = res.initial;
    res.trace.push_back({0, cur.E, cur.E_w, cur.E_k, 0.0, 0, 0, cocircularity(mesh, h)});
    res.seconds.push_back(0.0);

    const std::size_t ne = entries.size();
    std::vector<FeasibleInterval> iv(ne);
    std::vector<double> grad(ne);
    std::vector<Vec2> trial(nv);
    std::vector<double> trial_t(nv);
    int quiet = 0;
    res.status = OptimizerStatus::max_iterations;
    for (int it = 1; it <= options.max_iterations; ++it) {
        const auto started = clock::now();
        for (std::size_t e = 0; e < ne; ++e) {
            FeasibleInterval f{kInf, -kInf, false};
            for (int v : entries[e]) {
                const FeasibleInterval g = feasible_interval(mesh, h, v);
                f.lambda_plus = std::min(f.lambda_plus, g.lambda_plus);
                f.lambda_minus = std::max(f.lambda_minus, g.lambda_minus);
                f.capped = f.capped || g.capped;
            }
            iv[e] = f;
            const double fd = options.fd_scale * std::min(f.lambda_plus, -f.lambda_minus);
            if (!(fd > 1e-13 * h[entries[e][0]].norm())) {
                grad[e] = 0.0;
                continue;
            }
            grad[e] = entries[e].size() == 1 ? radial_gradient(model, entries[e][0], fd) : boundary_gradient(model, entries[e], fd);
        }
        for (std::size_t e = 0; e < ne; ++e) {
            const double room = grad[e] < 0.0 ? iv[e].lambda_plus : -iv[e].lambda_minus;
            if (room < options.pin_fraction * (iv[e].lambda_plus - iv[e].lambda_minus)) grad[e] = 0.0;
        }
        std::vector<double> lambda = step_lengths(grad, iv, options.C);
        for (std::size_t e = 0; e < ne; ++e)
            lambda[e] = std::clamp(lambda[e], options.clip * iv[e].lambda_minus, options.clip * iv[e].lambda_plus);

        bool accepted = false;
        int halvings = 0;
        EnergyReport next;
        double max_step = 0.0;
        for (; halvings <= options.max_halvings; ++halvings) {
            trial = h;
            max_step = 0.0;
            for (std::size_t e = 0; e < ne; ++e) {
                max_step = std::max(max_step, std::abs(lambda[e]));
                for (int v : entries[e]) trial[v] = h[v] * ((h[v].norm() + lambda[e]) / h[v].norm());
            }
            if (count_inverted_faces(mesh, trial) == 0) {
                for (int v = 0; v < nv; ++v) trial_t[v] = trial[v].norm();
                next = model.evaluate(trial_t);
                if (next.E <= cur.E) {
                    accepted = true;
                    break;
                }
            }
            for (double& l : lambda) l *= 0.5;
        }
        if (!accepted) {
            res.status = OptimizerStatus::stalled;
            break;
        }
        h.swap(trial);
        model.reset(trial_t, false);
        const double rel = (cur.E - next.E) / std::abs(next.E);
        cur = next;
        res.trace.push_back({it, cur.E, cur.E_w, cur.E_k, max_step, halvings, count_inverted_faces(mesh, h), cocircularity(mesh, h)});
        res.seconds.push_back(std::chrono::duration<double>(clock::now() - started).count());
        quiet = rel < options.tolerance ? quiet + 1 : 0;
        if (quiet >= options.patience) {
            res.status = OptimizerStatus::converged;
            break;
        }
    }
    res.final = cur;
    res.field.resize(nv);
    for (int v = 0; v < nv; ++v) res.field[v] = h[v].norm();
    mesh.set_channel(kDomainChannel, std::move(h));
    return res;
}

std::string to_string(OptimizerStatus status)
{
    switch (status) {
    case OptimizerStatus::converged:
        return "converged";
    case OptimizerStatus::max_iterations:
        return "max_iterations";
    case OptimizerStatus::stalled:
        return "stalled";
    }
    return "unknown";
}

void write_trace_csv(std::ostream& out, const std::vector<IterationRecord>& trace)
{
    out << "iter,E,E_w,E_k,max_step,halvings,inverted_faces,cocircularity\n";
    char buf[256];
    for (const auto& r : trace) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%d,%zu,%.17g\n", r.iteration, r.E, r.E_w, r.E_k, r.max_step,
                      r.halvings, r.inverted_faces, r.cocircularity);
        out << buf;
    }
}

}  // namespace isospiral
