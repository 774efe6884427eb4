#include "isospiral/metrics.hpp"

#include "isospiral/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace isospiral {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct CellKey {
    long long x, y, z;
    bool operator==(const CellKey&) const = default;
};

struct CellHash {
    std::size_t operator()(const CellKey& k) const
    {
        std::size_t h = static_cast<std::size_t>(k.x) * 73856093u;
        h ^= static_cast<std::size_t>(k.y) * 19349663u;
        h ^= static_cast<std::size_t>(k.z) * 83492791u;
        return h;
    }
};

// Uniform hash grid of items given by axis-aligned boxes.
class BoxGrid {
public:
    explicit BoxGrid(double cell) : cell_(cell) {}

    void insert(int id, const Vec3& lo, const Vec3& hi)
    {
        const CellKey a = key(lo), b = key(hi);
        for (long long x = a.x; x <= b.x; ++x)
            for (long long y = a.y; y <= b.y; ++y)
                for (long long z = a.z; z <= b.z; ++z) cells_[{x, y, z}].push_back(id);
    }

    [[nodiscard]] const std::vector<int>& at(const Vec3& p) const
    {
        static const std::vector<int> empty;
        const auto it = cells_.find(key(p));
        return it == cells_.end() ? empty : it->second;
    }

    [[nodiscard]] const std::vector<int>* cell(const CellKey& k) const
    {
        const auto it = cells_.find(k);
        return it == cells_.end() ? nullptr : &it->second;
    }

    [[nodiscard]] CellKey key(const Vec3& p) const
    {
        return {static_cast<long long>(std::floor(p.x() / cell_)), static_cast<long long>(std::floor(p.y() / cell_)),
                static_cast<long long>(std::floor(p.z() / cell_))};
    }

private:
    double cell_;
    std::unordered_map<CellKey, std::vector<int>, CellHash> cells_;
};

double point_segment_distance(const Vec3& q, const Vec3& a, const Vec3& b)
{
    const Vec3 e = b - a;
    const double ee = e.squaredNorm();
    const double s = ee > 0.0 ? std::clamp((q - a).dot(e) / ee, 0.0, 1.0) : 0.0;
    return (q - (a + s * e)).norm();
}

// Lowest t at which the line p + t n enters the capsule of radius r around [c0, c1].
double capsule_entry(const Vec3& p, const Vec3& n, const Vec3& c0, const Vec3& c1, double r)
{
    const Vec3 u0 = c0 - p, e = c1 - c0;
    const double a0 = n.dot(u0), ae = n.dot(e);
    // Squared distance from the line to c(s) is A s^2 + B s + C0.
    const double A = e.squaredNorm() - ae * ae;
    const double B = 2.0 * (u0.dot(e) - a0 * ae);
    const double C = u0.squaredNorm() - a0 * a0 - r * r;
    double lo = 0.0, hi = 1.0;
    if (A > 1e-14 * e.squaredNorm() && A > 0.0) {
        const double disc = B * B - 4.0 * A * C;
        if (disc < 0.0) return kInf;
        const double sq = std::sqrt(disc);
        lo = std::max(lo, (-B - sq) / (2.0 * A));
        hi = std::min(hi, (-B + sq) / (2.0 * A));
    } else if (std::abs(B) > 1e-300) {
        const double s0 = -C / B;
        if (B > 0.0)
            hi = std::min(hi, s0);
        else
            lo = std::max(lo, s0);
    } else if (C > 0.0) {
        return kInf;
    }
    if (lo > hi) return kInf;
    auto entry = [&](double s) {
        const Vec3 u = u0 + s * e;
        const double a = n.dot(u);
        return a - std::sqrt(std::max(0.0, r * r - (u.squaredNorm() - a * a)));
    };
    // Convex in s on the feasible interval.
    constexpr double g = 0.6180339887498949;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = entry(x1), f2 = entry(x2);
    for (int it = 0; it < 60 && hi - lo > 1e-15; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = entry(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = entry(x2);
        }
    }
    return std::min({f1, f2, entry(lo), entry(hi)});
}

// Lowest capsule entry over candidates given as (axis distance, segment). A capsule at axis
// distance D cannot be entered before t = D - r, so candidates are visited nearest first.
double lowest_entry(const Vec3& p, const Vec3& n, const std::vector<Vec3>& c, const std::vector<std::array<int, 2>>& segs,
                    std::vector<std::pair<double, int>>& near, double r)
{
    std::sort(near.begin(), near.end());
    double t = kInf;
    for (const auto& [dist, id] : near) {
        if (dist - r >= t) break;
        t = std::min(t, capsule_entry(p, n, c[segs[id][0]], c[segs[id][1]], r));
    }
    return t;
}

std::vector<Vec3> ball_centers(const Toolpath& path, double r)
{
    std::vector<Vec3> c;
    c.reserve(path.points.size());
    for (const auto& p : path.points) {
        if (!(p.normal.squaredNorm() > 0.0)) fail(ErrorKind::bad_input, "toolpath point without a surface normal");
        c.push_back(p.position + r * p.normal.normalized());
    }
    return c;
}

// Grid of path segments (single points for one-point paths), padded by `reach`.
BoxGrid segment_grid(const std::vector<Vec3>& c, double reach, std::vector<std::array<int, 2>>& segments)
{
    BoxGrid grid(reach);
    segments.clear();
    if (c.size() == 1) segments.push_back({0, 0});
    for (int i = 0; i + 1 < static_cast<int>(c.size()); ++i) segments.push_back({i, i + 1});
    const Vec3 pad = Vec3::Constant(reach);
    for (int s = 0; s < static_cast<int>(segments.size()); ++s) {
        const Vec3& a = c[segments[s][0]];
        const Vec3& b = c[segments[s][1]];
        grid.insert(s, a.cwiseMin(b) - pad, a.cwiseMax(b) + pad);
    }
    return grid;
}

bool has_spiral_coordinates(const Toolpath& path)
{
    return path.delta_T > 0.0 && path.points.size() > 1 && path.points.back().phi != path.points.front().phi;
}

Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, Vec3& bary)
{
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) {
        bary = {1, 0, 0};
        return a;
    }
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) {
        bary = {0, 1, 0};
        return b;
    }
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        const double v = d1 / (d1 - d3);
        bary = {1 - v, v, 0};
        return a + v * ab;
    }
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) {
        bary = {0, 0, 1};
        return c;
    }
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        const double w = d2 / (d2 - d6);
        bary = {1 - w, 0, w};
        return a + w * ac;
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        bary = {0, 1 - w, w};
        return b + w * (c - b);
    }
    const double den = 1.0 / (va + vb + vc);
    const double v = vb * den, w = vc * den;
    bary = {1 - v - w, v, w};
    return a + ab * v + ac * w;
}

}  // namespace

double circumcircle_curvature(const Vec3& a, const Vec3& b, const Vec3& c)
{
    const double ab = (b - a).norm(), bc = (c - b).norm(), ca = (a - c).norm();
    const double den = ab * bc * ca;
    if (den == 0.0) return 0.0;
    return 2.0 * (b - a).cross(c - a).norm() / den;
}

PathMetrics path_metrics(const std::vector<Vec3>& raw)
{
    std::vector<Vec3> p;
    for (const Vec3& q : raw)
        if (p.empty() || (q - p.back()).norm() > 0.0) p.push_back(q);
    if (p.size() < 3) fail(ErrorKind::bad_input, "path metrics need at least 3 distinct points");
    PathMetrics m;
    m.points = p.size();
    for (std::size_t i = 1; i < p.size(); ++i) m.length += (p[i] - p[i - 1]).norm();
    for (std::size_t i = 1; i + 1 < p.size(); ++i) {
        const double k = circumcircle_curvature(p[i - 1], p[i], p[i + 1]);
        const double dl = 0.5 * ((p[i] - p[i - 1]).norm() + (p[i + 1] - p[i]).norm());
        m.smoothness += k * k * dl;
    }
    return m;
}

PathMetrics path_metrics(const Toolpath& path)
{
    std::vector<Vec3> p;
    p.reserve(path.points.size() + 1);
    for (const auto& q : path.points) p.push_back(q.position);
    if (path.closed && !p.empty()) p.push_back(p.front());
    return path_metrics(p);
}

std::vector<SurfaceSample> surface_samples(const TriMesh& mesh, double density, double offset)
{
    if (!(density > 0.0)) fail(ErrorKind::bad_input, "sample density must be positive");
    const std::vector<Vec3> normals = vertex_normals(mesh);
    std::vector<SurfaceSample> out;
    for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f) {
        const Face& t = mesh.face(f);
        std::array<Vec3, 3> v, n;
        for (int k = 0; k < 3; ++k) {
            n[k] = normals[t[k]];
            v[k] = mesh.vertex(t[k]) + offset * n[k];
        }
        const double area = 0.5 * (v[1] - v[0]).cross(v[2] - v[0]).norm();
        if (!(area > 0.0)) continue;
        const int m = std::max(1, static_cast<int>(std::ceil(std::sqrt(density * mesh.face_areas()[f]) - 1e-9)));
        const double w = area / (static_cast<double>(m) * m);
        auto add = [&](double i, double j) {
            const double b1 = i / m, b2 = j / m, b0 = 1.0 - b1 - b2;
            SurfaceSample s;
            s.point = b0 * v[0] + b1 * v[1] + b2 * v[2];
            s.normal = b0 * n[0] + b1 * n[1] + b2 * n[2];
            const double len = s.normal.norm();
            s.normal = len > 0.0 ? Vec3(s.normal / len) : Vec3::Zero();
            s.area = w;
            s.face = f;
            out.push_back(s);
        };
        for (int i = 0; i < m; ++i)
            for (int j = 0; i + j < m; ++j) {
                add(i + 1.0 / 3.0, j + 1.0 / 3.0);
                if (i + j + 1 < m) add(i + 2.0 / 3.0, j + 2.0 / 3.0);
            }
    }
    return out;
}

CoverageField coverage_metrics(const TriMesh& mesh, const Toolpath& path, const CutterSpec& cutter, double h_set,
                               const CoverageOptions& options)
{
    const double r = cutter.tool_radius;
    if (!(r > 0.0)) fail(ErrorKind::bad_input, "tool radius must be positive");
    if (!(h_set > 0.0 && h_set < r)) fail(ErrorKind::bad_input, "h_set must lie in (0, tool radius)");
    CoverageField cov;
    cov.h_set = h_set;
    cov.samples = surface_samples(mesh, options.sample_density, h_set);
    cov.counts.assign(cov.samples.size(), 0);
    double area = 0.0;
    for (const auto& s : cov.samples) area += s.area;
    if (path.points.empty()) return cov;

    const std::vector<Vec3> c = ball_centers(path, r);
    std::vector<std::array<int, 2>> segs;
    const BoxGrid grid = segment_grid(c, r, segs);
    const bool spiral = has_spiral_coordinates(path);
    std::vector<double> arc(c.size(), 0.0);
    for (std::size_t i = 1; i < c.size(); ++i) arc[i] = arc[i - 1] + (path.points[i].position - path.points[i - 1].position).norm();

    std::vector<int> hits;
    for (std::size_t i = 0; i < cov.samples.size(); ++i) {
        const SurfaceSample& s = cov.samples[i];
        if (s.normal.squaredNorm() == 0.0) {
            ++cov.skipped;
            continue;
        }
        hits.clear();
        for (int id : grid.at(s.point))
            if (point_segment_distance(s.point, c[segs[id][0]], c[segs[id][1]]) <= r) hits.push_back(segs[id][0]);
        if (hits.empty()) continue;
        std::sort(hits.begin(), hits.end());
        int passes = 1;
        int start = hits[0];
        for (std::size_t k = 1; k < hits.size(); ++k) {
            const int j = hits[k];
            bool fresh;
            if (spiral) {
                const auto& a = path.points[start];
                const auto& b = path.points[j];
                fresh = b.phi - a.phi >= options.pass_angle || std::abs(b.rho - a.rho) >= 0.5 * path.delta_T;
            } else {
                fresh = arc[j] - arc[start] > 2.0 * r;
            }
            if (fresh) {
                ++passes;
                start = j;
            }
        }
        cov.counts[i] = passes;
    }
    for (std::size_t i = 0; i < cov.samples.size(); ++i) {
        cov.ct2 += cov.samples[i].area * cov.counts[i] * cov.counts[i];
        cov.max_ct = std::max(cov.max_ct, cov.counts[i]);
    }
    cov.ct2_mean = area > 0.0 ? cov.ct2 / area : 0.0;
    return cov;
}

double envelope_residual(const Toolpath& path, const CutterSpec& cutter, const Vec3& point, const Vec3& normal)
{
    const double r = cutter.tool_radius;
    const std::vector<Vec3> c = ball_centers(path, r);
    std::vector<std::array<int, 2>> segs;
    if (c.size() == 1) segs.push_back({0, 0});
    for (int i = 0; i + 1 < static_cast<int>(c.size()); ++i) segs.push_back({i, i + 1});
    std::vector<std::pair<double, int>> near;
    for (int id = 0; id < static_cast<int>(segs.size()); ++id) {
        const double dist = point_segment_distance(point, c[segs[id][0]], c[segs[id][1]]);
        if (dist <= 2.0 * r) near.push_back({dist, id});
    }
    const double t = lowest_entry(point, normal, c, segs, near, r);
    return std::isfinite(t) ? std::max(0.0, t) : -1.0;
}

double two_pass_scallop(double tool_radius, double spacing)
{
    return tool_radius - std::sqrt(tool_radius * tool_radius - 0.25 * spacing * spacing);
}

ScallopSamples scallop_map(const Toolpath& path, const CutterSpec& cutter, std::vector<SurfaceSample> samples)
{
    if (path.points.empty()) fail(ErrorKind::bad_input, "scallop map needs a nonempty path");
    const double r = cutter.tool_radius;
    if (!(r > 0.0)) fail(ErrorKind::bad_input, "tool radius must be positive");
    ScallopSamples out;
    out.samples = std::move(samples);
    const std::size_t n = out.samples.size();
    out.residual.assign(n, 0.0);
    out.uncut.assign(n, 0);
    out.msh.assign(n, 0.0);

    const std::vector<Vec3> c = ball_centers(path, r);
    std::vector<std::array<int, 2>> segs;
    const BoxGrid grid = segment_grid(c, 2.0 * r, segs);
    std::vector<std::pair<double, int>> near;
    for (std::size_t i = 0; i < n; ++i) {
        const SurfaceSample& s = out.samples[i];
        near.clear();
        if (s.normal.squaredNorm() > 0.0)
            for (int id : grid.at(s.point)) {
                const double dist = point_segment_distance(s.point, c[segs[id][0]], c[segs[id][1]]);
                if (dist <= 2.0 * r) near.push_back({dist, id});
            }
        const double t = lowest_entry(s.point, s.normal, c, segs, near, r);
        if (std::isfinite(t)) {
            out.residual[i] = std::max(0.0, t);
        } else {
            out.uncut[i] = 1;
            ++out.uncut_count;
        }
    }

    // msh: largest residual among cut samples within one tool radius.
    BoxGrid cut(r);
    for (std::size_t i = 0; i < n; ++i)
        if (!out.uncut[i]) cut.insert(static_cast<int>(i), out.samples[i].point, out.samples[i].point);
    double sum = 0.0, sq = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (out.uncut[i]) continue;
        const Vec3& p = out.samples[i].point;
        const CellKey k = cut.key(p);
        double best = out.residual[i];
        for (long long x = k.x - 1; x <= k.x + 1; ++x)
            for (long long y = k.y - 1; y <= k.y + 1; ++y)
                for (long long z = k.z - 1; z <= k.z + 1; ++z)
                    if (const auto* ids = cut.cell({x, y, z}))
                        for (int j : *ids)
                            if ((out.samples[j].point - p).norm() <= r) best = std::max(best, out.residual[j]);
        out.msh[i] = best;
        sum += best;
        ++count;
    }
    if (count > 0) {
        out.mean_msh = sum / static_cast<double>(count);
        for (std::size_t i = 0; i < n; ++i)
            if (!out.uncut[i]) sq += (out.msh[i] - out.mean_msh) * (out.msh[i] - out.mean_msh);
        out.S_C = sq / static_cast<double>(count);
    }
    return out;
}

ScallopSamples scallop_map(const TriMesh& mesh, const Toolpath& path, const CutterSpec& cutter, double sample_density)
{
    return scallop_map(path, cutter, surface_samples(mesh, sample_density, 0.0));
}

ModeledScallop modeled_scallop(const EnergyModel& model, std::span<const double> field, const Toolpath& path)
{
    if (path.points.size() < 2) fail(ErrorKind::bad_input, "modeled scallop needs at least two points");
    if (!(path.delta_T > 0.0)) fail(ErrorKind::bad_input, "toolpath has no level spacing");
    ModeledScallop m{0.0, kInf, 0.0};
    double weight = 0.0;
    const std::size_t n = path.points.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = path.points[i];
        if (p.face < 0) fail(ErrorKind::bad_input, "toolpath point without a face");
        const double h = path.delta_T * path.delta_T * model.scallop_factor(p.face, field);
        double w = 0.0;
        if (i > 0) w += 0.5 * (p.position - path.points[i - 1].position).norm();
        if (i + 1 < n) w += 0.5 * (path.points[i + 1].position - p.position).norm();
        m.mean += w * h;
        weight += w;
        m.min = std::min(m.min, h);
        m.max = std::max(m.max, h);
    }
    if (weight > 0.0) m.mean /= weight;
    return m;
}

SignalMetrics impact_metrics(std::span<const double> signal, double dt, double threshold)
{
    if (signal.empty()) fail(ErrorKind::bad_input, "impact metrics need a nonempty signal");
    if (!(dt > 0.0)) fail(ErrorKind::bad_input, "sampling interval must be positive");
    SignalMetrics m;
    m.threshold = threshold;
    const double n = static_cast<double>(signal.size());
    for (double a : signal) m.a_mean += std::abs(a);
    m.a_mean /= n;
    for (double a : signal) {
        const double v = std::abs(a);
        m.a_var += (v - m.a_mean) * (v - m.a_mean);
        m.a_cu += v * v * dt;
        if (v > threshold) m.a_tcu += v * v * dt;
    }
    m.a_var /= n;
    return m;
}

std::vector<double> path_acceleration(const Toolpath& path, double speed, double dt)
{
    if (!(speed > 0.0 && dt > 0.0)) fail(ErrorKind::bad_input, "speed and time step must be positive");
    const auto& pts = path.points;
    if (pts.size() < 2) return {};
    std::vector<double> arc(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) arc[i] = arc[i - 1] + (pts[i].position - pts[i - 1].position).norm();
    const double ds = speed * dt;
    const auto steps = static_cast<std::size_t>(arc.back() / ds);
    std::vector<Vec3> x;
    x.reserve(steps + 1);
    std::size_t seg = 0;
    for (std::size_t j = 0; j <= steps; ++j) {
        const double s = static_cast<double>(j) * ds;
        while (seg + 2 < pts.size() && arc[seg + 1] < s) ++seg;
        const double len = arc[seg + 1] - arc[seg];
        const double t = len > 0.0 ? std::clamp((s - arc[seg]) / len, 0.0, 1.0) : 0.0;
        x.push_back((1.0 - t) * pts[seg].position + t * pts[seg + 1].position);
    }
    std::vector<double> a;
    for (std::size_t j = 1; j + 1 < x.size(); ++j) a.push_back((x[j + 1] - 2.0 * x[j] + x[j - 1]).norm() / (dt * dt));
    return a;
}

std::vector<double> project_to_surface(const TriMesh& mesh, Toolpath& path)
{
    const double cell = 2.0 * mesh.average_edge_length();
    BoxGrid grid(cell);
    Vec3 lo = mesh.vertex(0), hi = lo;
    for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f) {
        const Face& t = mesh.face(f);
        const Vec3 a = mesh.vertex(t[0]).cwiseMin(mesh.vertex(t[1])).cwiseMin(mesh.vertex(t[2]));
        const Vec3 b = mesh.vertex(t[0]).cwiseMax(mesh.vertex(t[1])).cwiseMax(mesh.vertex(t[2]));
        grid.insert(f, a, b);
        lo = lo.cwiseMin(a);
        hi = hi.cwiseMax(b);
    }
    const std::vector<Vec3> normals = vertex_normals(mesh);
    const long long max_ring = static_cast<long long>(std::ceil((hi - lo).maxCoeff() / cell)) + 2;
    std::vector<double> moved;
    moved.reserve(path.points.size());
    for (auto& p : path.points) {
        double best = kInf;
        int best_face = -1;
        Vec3 best_bary = Vec3::Zero(), best_point = p.position;
        auto consider = [&](int f) {
            const Face& t = mesh.face(f);
            Vec3 b;
            const Vec3 q = closest_on_triangle(p.position, mesh.vertex(t[0]), mesh.vertex(t[1]), mesh.vertex(t[2]), b);
            const double d = (q - p.position).norm();
            if (d < best) {
                best = d;
                best_face = f;
                best_bary = b;
                best_point = q;
            }
        };
        const CellKey k = grid.key(p.position);
        for (long long ring = 0; ring <= max_ring; ++ring) {
            if (best < static_cast<double>(ring - 1) * cell) break;
            for (long long x = k.x - ring; x <= k.x + ring; ++x)
                for (long long y = k.y - ring; y <= k.y + ring; ++y)
                    for (long long z = k.z - ring; z <= k.z + ring; ++z) {
                        if (std::max({std::abs(x - k.x), std::abs(y - k.y), std::abs(z - k.z)}) != ring) continue;
                        if (const auto* ids = grid.cell({x, y, z}))
                            for (int f : *ids) consider(f);
                    }
        }
        if (best_face < 0)
            for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f) consider(f);
        const Face& t = mesh.face(best_face);
        p.face = best_face;
        p.bary = best_bary;
        p.normal = (best_bary[0] * normals[t[0]] + best_bary[1] * normals[t[1]] + best_bary[2] * normals[t[2]]).normalized();
        p.position = best_point;
        moved.push_back(best);
    }
    return moved;
}

}  // namespace isospiral
