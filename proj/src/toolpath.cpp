#include "isospiral/toolpath.hpp"

#include "isospiral/error.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace isospiral {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

Vec3 bary2(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& p)
{
    const double d = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
    const double l1 = ((p.x() - a.x()) * (c.y() - a.y()) - (p.y() - a.y()) * (c.x() - a.x())) / d;
    const double l2 = ((b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x())) / d;
    return {1.0 - l1 - l2, l1, l2};
}

double wrap_positive(double a)
{
    a = std::fmod(a, kTwoPi);
    return a < 0.0 ? a + kTwoPi : a;
}

struct Crossing {
    double t = 0.0;
    int face = -1;
    Vec3 bary = Vec3::Zero();
};

struct WalkEnd {
    int face = -1;
    Vec3 bary = Vec3::Zero();
    int hit_loop = -1;  // boundary loop reached before the target
    double t = 1.0;
};

// Point location by straight walks across the planar image of the mesh.
class Locator {
public:
    Locator(const TriMesh& mesh, const std::vector<Vec2>& h) : mesh_(mesh), h_(h) {}

    [[nodiscard]] Vec3 bary(int f, const Vec2& p) const
    {
        const Face& t = mesh_.face(f);
        return bary2(h_[t[0]], h_[t[1]], h_[t[2]], p);
    }

    [[nodiscard]] int locate(const Vec2& p) const
    {
        int best = -1;
        double score = -kInf;
        for (int f = 0; f < static_cast<int>(mesh_.num_faces()); ++f) {
            const double s = bary(f, p).minCoeff();
            if (s > score) {
                score = s;
                best = f;
            }
        }
        if (score < -1e-9) fail(ErrorKind::infeasible_geometry, "spiral start lies outside the domain");
        return best;
    }

    WalkEnd walk(int f, const Vec2& a, const Vec2& b, std::vector<Crossing>* crossings) const
    {
        const int limit = static_cast<int>(mesh_.num_faces()) + 16;
        for (int guard = 0; guard < limit; ++guard) {
            const Vec3 lb = bary(f, b);
            if (lb.minCoeff() >= -1e-12) return {f, clamp(lb), -1, 1.0};
            const Vec3 la = bary(f, a);
            int exit = -1;
            double best = kInf;
            for (int k = 0; k < 3; ++k) {
                if (lb[k] >= -1e-12 || la[k] <= lb[k]) continue;
                const double t = la[k] / (la[k] - lb[k]);
                if (t < best) {
                    best = t;
                    exit = k;
                }
            }
            if (exit < 0) {
                int k = 0;
                lb.minCoeff(&k);
                exit = k;
                best = 0.0;
            }
            best = std::clamp(best, 0.0, 1.0);
            Vec3 c = la + best * (lb - la);
            c[exit] = 0.0;
            c = clamp(c);
            if (crossings) crossings->push_back({best, f, c});
            const int g = mesh_.neighbor(f, exit);
            if (g < 0) return {f, c, mesh_.boundary_of(mesh_.face(f)[(exit + 1) % 3]), best};
            f = g;
        }
        fail(ErrorKind::internal, "point walk did not terminate");
    }

private:
    static Vec3 clamp(Vec3 c)
    {
        c = c.cwiseMax(0.0);
        const double s = c.sum();
        return s > 0.0 ? Vec3(c / s) : Vec3::Constant(1.0 / 3.0);
    }

    const TriMesh& mesh_;
    const std::vector<Vec2>& h_;
};

double loop_mean_radius(const TriMesh& mesh, const std::vector<Vec2>& h, int loop)
{
    double s = 0.0;
    for (int v : mesh.boundary_loops()[loop]) s += h[v].norm();
    return s / static_cast<double>(mesh.boundary_loops()[loop].size());
}

// Distance from the origin to the outer polygon along direction phi.
// Nearest and farthest crossing of the ray at angle phi with a boundary loop polygon in S^H.
std::pair<double, double> ray_span(const TriMesh& mesh, const std::vector<Vec2>& h, int boundary, double phi)
{
    const Vec2 d(std::cos(phi), std::sin(phi));
    const auto& loop = mesh.boundary_loops()[boundary];
    double lo = kInf, hi = -kInf;
    for (std::size_t i = 0; i < loop.size(); ++i) {
        const Vec2& p = h[loop[i]];
        const Vec2& q = h[loop[(i + 1) % loop.size()]];
        const Vec2 e = q - p;
        const double den = d.x() * e.y() - d.y() * e.x();
        if (den == 0.0) continue;
        const double s = (p.x() * e.y() - p.y() * e.x()) / den;
        const double u = (p.x() * d.y() - p.y() * d.x()) / den;
        if (s > 0.0 && u >= -1e-12 && u <= 1.0 + 1e-12) {
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
    }
    return {lo, hi};
}

double polygon_radius(const TriMesh& mesh, const std::vector<Vec2>& h, double phi) { return ray_span(mesh, h, 0, phi).first; }

struct Knot {
    double phi, rho;
};

struct Sample {
    double phi = 0.0, rho = 0.0;
    Vec2 uv = Vec2::Zero();
    int face = -1;
    Vec3 bary = Vec3::Zero();
};

using Rational = boost::multiprecision::cpp_rational;

int orient(const Vec2& a, const Vec2& b, const Vec2& c)
{
    const double l = (b.x() - a.x()) * (c.y() - a.y());
    const double r = (b.y() - a.y()) * (c.x() - a.x());
    const double det = l - r;
    const double bound = 3.3306690738754716e-16 * (std::abs(l) + std::abs(r));
    if (det > bound) return 1;
    if (-det > bound) return -1;
    const Rational e = (Rational(b.x()) - Rational(a.x())) * (Rational(c.y()) - Rational(a.y())) -
                       (Rational(b.y()) - Rational(a.y())) * (Rational(c.x()) - Rational(a.x()));
    return e > 0 ? 1 : (e < 0 ? -1 : 0);
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p)
{
    return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) && std::min(a.y(), b.y()) <= p.y() &&
           p.y() <= std::max(a.y(), b.y());
}

bool segments_touch(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d)
{
    const int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
    if (o1 * o2 < 0 && o3 * o4 < 0) return true;
    if (o1 == 0 && on_segment(a, b, c)) return true;
    if (o2 == 0 && on_segment(a, b, d)) return true;
    if (o3 == 0 && on_segment(c, d, a)) return true;
    if (o4 == 0 && on_segment(c, d, b)) return true;
    return false;
}

std::string fmt(const char* spec, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

}  // namespace

double level_spacing(const EnergyReport& report, double h_set)
{
    if (!(h_set > 0.0)) fail(ErrorKind::bad_input, "h_set must be positive");
    if (!(report.avg > 0.0)) fail(ErrorKind::infeasible_geometry, "average scallop factor is not positive");
    return std::sqrt(h_set / report.avg);
}

std::vector<Isocurve> extract_isocurves(const TriMesh& mesh, std::span<const double> field, double level)
{
    if (field.size() != mesh.num_vertices()) fail(ErrorKind::bad_input, "field size mismatch");
    const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
    if (field.empty() || level < *lo || level > *hi || *lo == *hi) return {};
    const bool at_min = level == *lo;
    auto above = [&](int v) { return at_min ? field[v] > level : field[v] >= level; };

    auto key = [](int a, int b) { return (static_cast<std::uint64_t>(std::min(a, b)) << 32) | static_cast<std::uint32_t>(std::max(a, b)); };
    // Each crossing edge joins the (at most two) faces that cut it.
    struct Cut {
        int a, b;
        std::array<int, 2> faces{-1, -1};
    };
    std::unordered_map<std::uint64_t, int> index;
    std::vector<Cut> cuts;
    std::vector<std::array<int, 2>> face_cuts(mesh.num_faces(), {-1, -1});
    for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f) {
        const Face& t = mesh.face(f);
        int n = 0;
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            if (above(a) == above(b)) continue;
            auto [it, fresh] = index.try_emplace(key(a, b), static_cast<int>(cuts.size()));
            if (fresh) cuts.push_back({a, b});
            Cut& c = cuts[it->second];
            c.faces[c.faces[0] < 0 ? 0 : 1] = f;
            if (n < 2) face_cuts[f][n++] = it->second;
        }
    }

    auto point_on = [&](int cut, int f, Isocurve& out) {
        const Cut& c = cuts[cut];
        const double t = (level - field[c.a]) / (field[c.b] - field[c.a]);
        const Vec3 p = (1.0 - t) * mesh.vertex(c.a) + t * mesh.vertex(c.b);
        Vec3 bary = Vec3::Zero();
        bary[mesh.corner_of(f, c.a)] = 1.0 - t;
        bary[mesh.corner_of(f, c.b)] = t;
        if (!out.points.empty() && (out.points.back() - p).norm() == 0.0) return;
        out.points.push_back(p);
        out.faces.push_back(f);
        out.bary.push_back(bary);
    };

    std::vector<char> used(cuts.size(), 0);
    std::vector<Isocurve> curves;
    auto trace = [&](int start, int face) {
        Isocurve curve;
        int cut = start;
        int f = face;
        used[cut] = 1;
        point_on(cut, f >= 0 ? f : cuts[cut].faces[0], curve);
        while (f >= 0) {
            const int next = face_cuts[f][0] == cut ? face_cuts[f][1] : face_cuts[f][0];
            if (next < 0) break;
            point_on(next, f, curve);
            if (next == start) {
                curve.closed = true;
                break;
            }
            used[next] = 1;
            const Cut& c = cuts[next];
            f = c.faces[0] == f ? c.faces[1] : c.faces[0];
            cut = next;
        }
        if (curve.closed && curve.points.size() > 1 && (curve.points.back() - curve.points.front()).norm() == 0.0) {
            curve.points.pop_back();
            curve.faces.pop_back();
            curve.bary.pop_back();
        }
        if (curve.points.size() >= 2) curves.push_back(std::move(curve));
    };
    // Open curves start on boundary edges, then the remaining cycles.
    for (int i = 0; i < static_cast<int>(cuts.size()); ++i)
        if (!used[i] && cuts[i].faces[1] < 0) trace(i, cuts[i].faces[0]);
    for (int i = 0; i < static_cast<int>(cuts.size()); ++i)
        if (!used[i]) trace(i, cuts[i].faces[0]);
    return curves;
}

Toolpath synthesize_spiral(const TriMesh& mesh, const SlitDomain& domain, double delta_T, const SpiralOptions& options)
{
    if (!mesh.has_channel(kDomainChannel)) fail(ErrorKind::bad_input, "spiral: mesh has no S^H channel");
    if (!(delta_T > 0.0)) fail(ErrorKind::bad_input, "spiral: level spacing must be positive");
    if (options.samples_per_turn < 8) fail(ErrorKind::bad_input, "spiral: too few samples per turn");
    const auto& h = mesh.channel(kDomainChannel);
    SlitDomain dom = domain;
    update_slits(mesh, h, dom);

    const double r_out = loop_mean_radius(mesh, h, 0);
    double r_start = 0.0;
    if (dom.mode == SlitMode::annulus) {
        r_start = loop_mean_radius(mesh, h, dom.anchor.boundary);
    } else {
        // Smallest level enclosing the centre: the anchor face.
        if (dom.anchor.face < 0) fail(ErrorKind::bad_input, "spiral: disk domain without an anchor face");
        for (int v : mesh.face(dom.anchor.face)) r_start = std::max(r_start, h[v].norm());
    }
    if (r_out - r_start < delta_T) fail(ErrorKind::bad_input, "spiral: fewer than one turn");

    const double k = delta_T / kTwoPi;
    const double step = kTwoPi / options.samples_per_turn;
    const double clear = options.clearance_steps * step;

    // Radius schedule with deflections around the slits it would cross.
    std::vector<Knot> knots{{0.0, r_start}};
    double pa = 0.0, ra = r_start;
    std::vector<char> done(dom.slits.size(), 0);
    for (;;) {
        int next = -1;
        for (std::size_t i = 0; i < dom.slits.size(); ++i) {
            const Slit& s = dom.slits[i];
            if (done[i] || s.boundary == dom.anchor.boundary || !(s.radius > ra) || !(s.radius < r_out)) continue;
            if (next < 0 || s.radius < dom.slits[next].radius) next = static_cast<int>(i);
        }
        if (next < 0) break;
        done[next] = 1;
        const Slit& s = dom.slits[next];
        const double width = s.phi_end - s.phi_start + 2.0 * clear;
        if (width >= kTwoPi) fail(ErrorKind::infeasible_geometry, "spiral: slit spans the full circle, deflection infeasible");
        const double ps = pa + (s.radius - ra) / k;
        const double behind = wrap_positive(ps - (s.phi_start - clear));
        if (behind >= width) continue;
        const double ahead = width - behind;
        const double eps = std::min(0.25 * delta_T, delta_T * (kTwoPi - width) / (4.0 * std::numbers::pi));
        const double p_rise = ps - behind;
        if (ahead <= behind || p_rise <= pa) {
            // Stay below the slit until its far end is cleared.
            const double hold = std::max(ra, s.radius - eps);
            const double p1 = pa + (hold - ra) / k;
            const double p2 = ps + ahead;
            if (p1 > pa) knots.push_back({p1, hold});
            knots.push_back({p2, hold});
            pa = p2;
            ra = hold;
        } else {
            // Climb over the slit before its near end, then wait for the schedule.
            const double r1 = ra + k * (p_rise - pa);
            const double hold = s.radius + eps;
            const double p2 = ps + eps / k;
            knots.push_back({p_rise, r1});
            knots.push_back({p_rise, hold});
            knots.push_back({p2, hold});
            pa = p2;
            ra = hold;
        }
    }
    knots.push_back({pa + (r_out - ra) / k, r_out});

    std::vector<std::pair<double, double>> params;
    params.emplace_back(knots[0].phi, knots[0].rho);
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        const Knot& a = knots[i];
        const Knot& b = knots[i + 1];
        const double span = std::max(b.phi - a.phi, std::abs(b.rho - a.rho) / k);
        const int n = std::max(1, static_cast<int>(std::ceil(span / step - 1e-9)));
        for (int j = 1; j <= n; ++j) {
            const double t = static_cast<double>(j) / n;
            params.emplace_back(a.phi + t * (b.phi - a.phi), a.rho + t * (b.rho - a.rho));
        }
    }

    const Locator loc(mesh, h);
    // Slit chords cut inside their circle; turns passing beneath a slit keep below its polygon.
    const double margin = 0.1 * delta_T;
    auto uv_of = [&](double phi, double rho) -> Vec2 {
        double r = std::min(rho, polygon_radius(mesh, h, phi) * (1.0 - 1e-9));
        for (const Slit& s : dom.slits) {
            if (s.boundary == dom.anchor.boundary) continue;
            const auto [lo, hi] = ray_span(mesh, h, s.boundary, phi);
            if (!(r > lo - margin && r <= hi)) continue;
            if (lo - margin < r - 0.5 * delta_T) fail(ErrorKind::infeasible_geometry, "spiral: slit too coarse for the level spacing");
            r = lo - margin;
        }
        return Vec2(std::cos(phi), std::sin(phi)) * r;
    };
    auto surface = [&](int f, const Vec3& b) {
        const Face& t = mesh.face(f);
        return Vec3(b[0] * mesh.vertex(t[0]) + b[1] * mesh.vertex(t[1]) + b[2] * mesh.vertex(t[2]));
    };
    auto advance = [&](const Sample& from, double phi, double rho) {
        Sample s{phi, rho, uv_of(phi, rho), -1, Vec3::Zero()};
        const WalkEnd end = loc.walk(from.face, from.uv, s.uv, nullptr);
        if (end.hit_loop > 0) fail(ErrorKind::infeasible_geometry, "spiral crosses inner boundary " + std::to_string(end.hit_loop));
        s.face = end.face;
        s.bary = end.bary;
        if (end.hit_loop == 0) s.uv = from.uv + end.t * (s.uv - from.uv);
        return s;
    };

    // Adaptive refinement until the chord error on S is below tolerance.
    const double tol = options.chord_tolerance * mesh.bbox_diagonal();
    std::vector<Sample> samples;
    {
        Sample first{params[0].first, params[0].second, uv_of(params[0].first, params[0].second), -1, Vec3::Zero()};
        first.face = loc.locate(first.uv);
        first.bary = loc.bary(first.face, first.uv).cwiseMax(0.0);
        first.bary /= first.bary.sum();
        samples.push_back(first);
    }
    std::function<void(double, double, int)> refine = [&](double phi, double rho, int depth) {
        const Sample a = samples.back();
        const Sample b = advance(a, phi, rho);
        const double pm = 0.5 * (a.phi + phi), rm = 0.5 * (a.rho + rho);
        const Sample m = advance(a, pm, rm);
        const double err = (surface(m.face, m.bary) - 0.5 * (surface(a.face, a.bary) + surface(b.face, b.bary))).norm();
        if (err > tol && depth < 12) {
            refine(pm, rm, depth + 1);
            refine(phi, rho, depth + 1);
            return;
        }
        samples.push_back(b);
    };
    for (std::size_t i = 1; i < params.size(); ++i) refine(params[i].first, params[i].second, 0);

    // Emit samples plus every mesh-edge crossing between them.
    const std::vector<Vec3> normals = vertex_normals(mesh);
    Toolpath path;
    path.delta_T = delta_T;
    const double phi0 = samples.front().phi;
    auto emit = [&](int f, const Vec3& b, double phi, double rho) {
        PathPoint p;
        p.face = f;
        p.bary = b;
        p.position = surface(f, b);
        const Face& t = mesh.face(f);
        p.domain = b[0] * h[t[0]] + b[1] * h[t[1]] + b[2] * h[t[2]];
        p.normal = (b[0] * normals[t[0]] + b[1] * normals[t[1]] + b[2] * normals[t[2]]).normalized();
        p.phi = phi;
        p.rho = rho;
        p.turn = static_cast<int>(std::floor((phi - phi0) / kTwoPi + 1e-12));
        if (!path.points.empty() && (path.points.back().domain - p.domain).norm() == 0.0) {
            path.points.back().face = f;
            path.points.back().bary = b;
            return;
        }
        path.points.push_back(p);
    };
    emit(samples[0].face, samples[0].bary, samples[0].phi, samples[0].rho);
    std::vector<Crossing> crossings;
    for (std::size_t i = 1; i < samples.size(); ++i) {
        const Sample& a = samples[i - 1];
        const Sample& b = samples[i];
        crossings.clear();
        const WalkEnd end = loc.walk(a.face, a.uv, b.uv, &crossings);
        if (end.hit_loop > 0) fail(ErrorKind::infeasible_geometry, "spiral crosses inner boundary " + std::to_string(end.hit_loop));
        for (const Crossing& c : crossings) emit(c.face, c.bary, a.phi + c.t * (b.phi - a.phi), a.rho + c.t * (b.rho - a.rho));
        if (end.hit_loop < 0) emit(end.face, end.bary, b.phi, b.rho);
    }
    return path;
}

std::vector<Vec2> domain_polyline(const Toolpath& path)
{
    std::vector<Vec2> out;
    out.reserve(path.points.size());
    for (const auto& p : path.points) out.push_back(p.domain);
    return out;
}

std::size_t count_self_intersections(const std::vector<Vec2>& polyline)
{
    const int n = static_cast<int>(polyline.size()) - 1;
    if (n < 2) return 0;
    Vec2 lo = polyline[0], hi = polyline[0];
    double total = 0.0;
    for (int i = 0; i <= n; ++i) {
        lo = lo.cwiseMin(polyline[i]);
        hi = hi.cwiseMax(polyline[i]);
        if (i < n) total += (polyline[i + 1] - polyline[i]).norm();
    }
    const double extent = std::max(hi.x() - lo.x(), hi.y() - lo.y());
    const double cell = std::max({2.0 * total / n, extent / 4096.0, std::numeric_limits<double>::min()});
    const int gx = static_cast<int>((hi.x() - lo.x()) / cell) + 1;
    const int gy = static_cast<int>((hi.y() - lo.y()) / cell) + 1;
    auto cx = [&](double x) { return std::clamp(static_cast<int>((x - lo.x()) / cell), 0, gx - 1); };
    auto cy = [&](double y) { return std::clamp(static_cast<int>((y - lo.y()) / cell), 0, gy - 1); };
    std::unordered_map<long long, std::vector<int>> grid;
    for (int i = 0; i < n; ++i) {
        const Vec2 a = polyline[i].cwiseMin(polyline[i + 1]);
        const Vec2 b = polyline[i].cwiseMax(polyline[i + 1]);
        for (int x = cx(a.x()); x <= cx(b.x()); ++x)
            for (int y = cy(a.y()); y <= cy(b.y()); ++y) grid[static_cast<long long>(x) * gy + y].push_back(i);
    }
    std::size_t count = 0;
    for (const auto& [cellid, segs] : grid) {
        for (std::size_t p = 0; p < segs.size(); ++p) {
            for (std::size_t q = p + 1; q < segs.size(); ++q) {
                const int i = segs[p], j = segs[q];
                if (std::abs(i - j) < 2) continue;
                const Vec2& a = polyline[i];
                const Vec2& b = polyline[i + 1];
                const Vec2& c = polyline[j];
                const Vec2& d = polyline[j + 1];
                const Vec2 lo1 = a.cwiseMin(b), hi1 = a.cwiseMax(b), lo2 = c.cwiseMin(d), hi2 = c.cwiseMax(d);
                const Vec2 olo = lo1.cwiseMax(lo2), ohi = hi1.cwiseMin(hi2);
                if (olo.x() > ohi.x() || olo.y() > ohi.y()) continue;
                // Count each pair once, in the cell holding the corner of the box overlap.
                if (static_cast<long long>(cx(olo.x())) * gy + cy(olo.y()) != cellid) continue;
                if (segments_touch(a, b, c, d)) ++count;
            }
        }
    }
    return count;
}

PathFormat path_format_from_extension(const std::filesystem::path& file)
{
    std::string ext = file.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".csv") return PathFormat::csv;
    if (ext == ".json") return PathFormat::json;
    if (ext == ".gcode" || ext == ".nc" || ext == ".ngc") return PathFormat::gcode;
    if (ext == ".svg") return PathFormat::svg;
    fail(ErrorKind::bad_input, "unknown toolpath format: " + file.string());
}

std::string toolpath_to_string(const Toolpath& path, PathFormat format, const ExportOptions& options)
{
    if (path.points.empty()) fail(ErrorKind::bad_input, "cannot export an empty toolpath");
    std::ostringstream out;
    switch (format) {
    case PathFormat::csv: {
        out << "# delta_T=" << fmt("%.17g", path.delta_T) << " h_set=" << fmt("%.17g", path.h_set)
            << " tool_radius=" << fmt("%.17g", path.cutter.tool_radius) << " closed=" << (path.closed ? 1 : 0);
        if (!options.config_hash.empty()) out << " config=" << options.config_hash;
        out << "\nx,y,z,nx,ny,nz,face,b0,b1,b2,u,v,phi,rho,turn\n";
        char buf[512];
        for (const auto& p : path.points) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                          p.position.x(), p.position.y(), p.position.z(), p.normal.x(), p.normal.y(), p.normal.z(), p.face,
                          p.bary.x(), p.bary.y(), p.bary.z(), p.domain.x(), p.domain.y(), p.phi, p.rho, p.turn);
            out << buf;
        }
        break;
    }
    case PathFormat::json: {
        nlohmann::ordered_json j;
        j["delta_T"] = path.delta_T;
        j["h_set"] = path.h_set;
        j["tool_radius"] = path.cutter.tool_radius;
        j["closed"] = path.closed;
        if (!options.config_hash.empty()) j["config_hash"] = options.config_hash;
        auto& pts = j["points"] = nlohmann::ordered_json::array();
        for (const auto& p : path.points) {
            pts.push_back({{"p", {p.position.x(), p.position.y(), p.position.z()}},
                           {"n", {p.normal.x(), p.normal.y(), p.normal.z()}},
                           {"face", p.face},
                           {"bary", {p.bary.x(), p.bary.y(), p.bary.z()}},
                           {"uv", {p.domain.x(), p.domain.y()}},
                           {"phi", p.phi},
                           {"rho", p.rho},
                           {"turn", p.turn}});
        }
        out << j.dump(1) << '\n';
        break;
    }
    case PathFormat::gcode: {
        out << "(spiral toolpath, " << path.points.size() << " points)\n";
        if (!options.config_hash.empty()) out << "(config " << options.config_hash << ")\n";
        out << "G21\nG90\n";
        const auto& p0 = path.points[0].position;
        out << "G0 X" << fmt("%.6f", p0.x()) << " Y" << fmt("%.6f", p0.y()) << " Z" << fmt("%.6f", p0.z()) << '\n';
        int turn = path.points[0].turn - 1;
        for (std::size_t i = 1; i < path.points.size(); ++i) {
            const auto& p = path.points[i];
            if (p.turn != turn) {
                turn = p.turn;
                out << "(turn " << turn << ")\n";
            }
            out << "G1 X" << fmt("%.6f", p.position.x()) << " Y" << fmt("%.6f", p.position.y()) << " Z"
                << fmt("%.6f", p.position.z());
            if (i == 1) out << " F" << fmt("%.1f", options.feed);
            out << '\n';
        }
        break;
    }
    case PathFormat::svg: {
        const double size = 480.0, pad = 10.0;
        auto panel = [&](auto&& coord, double x0, const char* stroke) {
            Vec2 lo = coord(path.points[0]), hi = lo;
            for (const auto& p : path.points) {
                lo = lo.cwiseMin(coord(p));
                hi = hi.cwiseMax(coord(p));
            }
            const double scale = (size - 2.0 * pad) / std::max({hi.x() - lo.x(), hi.y() - lo.y(), 1e-300});
            for (std::size_t start = 0; start + 1 < path.points.size(); start += 1999) {
                out << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"0.5\" points=\"";
                const std::size_t end = std::min(path.points.size(), start + 2000);
                for (std::size_t i = start; i < end; ++i) {
                    const Vec2 c = coord(path.points[i]);
                    out << fmt("%.3f", x0 + pad + (c.x() - lo.x()) * scale) << ',' << fmt("%.3f", size - pad - (c.y() - lo.y()) * scale)
                        << (i + 1 < end ? " " : "");
                }
                out << "\"/>\n";
            }
        };
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * size << "\" height=\"" << size << "\">\n";
        if (!options.config_hash.empty()) out << "<!-- config " << options.config_hash << " -->\n";
        out << "<g id=\"domain\">\n";
        panel([](const PathPoint& p) { return p.domain; }, 0.0, "#1f5fa8");
        out << "</g>\n<g id=\"surface\">\n";
        panel([](const PathPoint& p) { return Vec2(p.position.x(), p.position.y()); }, size, "#b33a1d");
        out << "</g>\n</svg>\n";
        break;
    }
    }
    return out.str();
}

void export_toolpath(const Toolpath& path, PathFormat format, const std::filesystem::path& file, const ExportOptions& options)
{
    const std::string text = toolpath_to_string(path, format, options);
    std::ofstream out(file, std::ios::binary);
    if (!out) fail(ErrorKind::bad_input, "cannot write " + file.string());
    out << text;
    if (!out) fail(ErrorKind::bad_input, "cannot write " + file.string());
}

Toolpath read_toolpath(const std::filesystem::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) fail(ErrorKind::bad_input, "toolpath not found: " + file.string());
    Toolpath path;
    const PathFormat format = path_format_from_extension(file);
    if (format == PathFormat::json) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
            path.delta_T = j.value("delta_T", 0.0);
            path.h_set = j.value("h_set", 0.0);
            path.cutter.tool_radius = j.value("tool_radius", path.cutter.tool_radius);
            path.closed = j.value("closed", false);
            for (const auto& q : j.at("points")) {
                PathPoint p;
                const auto& x = q.at("p");
                p.position = {x.at(0).get<double>(), x.at(1).get<double>(), x.at(2).get<double>()};
                if (q.contains("n")) p.normal = {q["n"][0].get<double>(), q["n"][1].get<double>(), q["n"][2].get<double>()};
                p.face = q.value("face", -1);
                if (q.contains("bary")) p.bary = {q["bary"][0].get<double>(), q["bary"][1].get<double>(), q["bary"][2].get<double>()};
                if (q.contains("uv")) p.domain = {q["uv"][0].get<double>(), q["uv"][1].get<double>()};
                p.phi = q.value("phi", 0.0);
                p.rho = q.value("rho", 0.0);
                p.turn = q.value("turn", 0);
                path.points.push_back(p);
            }
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::bad_input, "malformed toolpath json: " + std::string(e.what()));
        }
    } else if (format == PathFormat::csv) {
        std::string line;
        std::vector<std::string> columns;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            if (line[0] == '#') {
                std::istringstream meta(line.substr(1));
                std::string kv;
                while (meta >> kv) {
                    const auto eq = kv.find('=');
                    if (eq == std::string::npos) continue;
                    const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
                    if (k == "delta_T") path.delta_T = std::stod(v);
                    if (k == "h_set") path.h_set = std::stod(v);
                    if (k == "tool_radius") path.cutter.tool_radius = std::stod(v);
                    if (k == "closed") path.closed = v == "1";
                }
                continue;
            }
            std::vector<std::string> cells;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            if (columns.empty()) {
                columns = cells;
                continue;
            }
            std::unordered_map<std::string, std::string> row;
            for (std::size_t i = 0; i < std::min(cells.size(), columns.size()); ++i) row[columns[i]] = cells[i];
            auto num = [&](const char* name, double def) {
                const auto it = row.find(name);
                return it == row.end() || it->second.empty() ? def : std::stod(it->second);
            };
            if (!row.contains("x") || !row.contains("y") || !row.contains("z"))
                fail(ErrorKind::bad_input, "toolpath csv needs x, y, z columns");
            PathPoint p;
            try {
                p.position = {num("x", 0), num("y", 0), num("z", 0)};
                p.normal = {num("nx", 0), num("ny", 0), num("nz", 0)};
                p.face = static_cast<int>(num("face", -1));
                p.bary = {num("b0", 0), num("b1", 0), num("b2", 0)};
                p.domain = {num("u", 0), num("v", 0)};
                p.phi = num("phi", 0);
                p.rho = num("rho", 0);
                p.turn = static_cast<int>(num("turn", 0));
            } catch (const std::exception&) {
                fail(ErrorKind::bad_input, "malformed toolpath csv row: " + line);
            }
            path.points.push_back(p);
        }
    } else {
        fail(ErrorKind::bad_input, "toolpaths can only be read from csv or json");
    }
    if (path.points.empty()) fail(ErrorKind::bad_input, "toolpath is empty: " + file.string());
    return path;
}

}  // namespace isospiral
