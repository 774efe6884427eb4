#include "isospiral/field_init.hpp"

#include "isospiral/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace isospiral {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double profile_start(const SlitDomain& domain) { return domain.mode == SlitMode::disk ? 0.0 : domain.inner_radius; }

}  // namespace

double RadialProfile::operator()(double x) const
{
    const std::size_t n = nodes.size();
    std::size_t j = std::upper_bound(nodes.begin(), nodes.end(), x) - nodes.begin();
    j = std::clamp<std::size_t>(j, 1, n - 1) - 1;
    const double t = (x - nodes[j]) / (nodes[j + 1] - nodes[j]);
    return values[j] + t * (values[j + 1] - values[j]);
}

bool RadialProfile::strictly_increasing() const
{
    if (nodes.size() < 2 || nodes.size() != values.size()) return false;
    for (std::size_t i = 1; i < nodes.size(); ++i)
        if (!(nodes[i] > nodes[i - 1]) || !(values[i] > values[i - 1])) return false;
    return true;
}

RadialProfile RadialProfile::linear(double x0, double f0, double slope, int count)
{
    RadialProfile p;
    for (int k = 0; k < count; ++k) {
        const double x = x0 + (1.0 - x0) * k / (count - 1);
        p.nodes.push_back(x);
        p.values.push_back(f0 + slope * (x - x0));
    }
    return p;
}

std::vector<double> profile_field(const RadialProfile& profile, const std::vector<Vec2>& positions)
{
    std::vector<double> t(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) t[i] = profile(positions[i].norm());
    return t;
}

double profile_origin(const SlitDomain& domain) { return profile_start(domain); }

ProfileResult optimize_radial_profile(EnergyModel& model, const std::vector<Vec2>& positions, const SlitDomain& domain,
                                      const ProfileOptions& options)
{
    const TriMesh& mesh = model.mesh();
    if (positions.size() != mesh.num_vertices()) fail(ErrorKind::internal, "profile: position channel size mismatch");
    if (options.nodes < 2) fail(ErrorKind::bad_input, "profile_nodes must be at least 2");
    const double x0 = profile_start(domain);
    const double f0 = profile_origin(domain);
    const int n = options.nodes;

    // Best linear profile first: coarse log scan of the slope, then golden section.
    auto energy_at = [&](double slope) {
        const auto t = profile_field(RadialProfile::linear(x0, f0, slope, n), positions);
        model.set_gradient_floor(default_gradient_floor(mesh, t));
        try {
            const double e = model.evaluate(t).E;
            return std::isfinite(e) ? e : kInf;
        } catch (const Error&) {
            return kInf;
        }
    };
    const double guess = std::sqrt(model.cutter().curvature() / 8.0) * mesh.loop_length(0) / (2.0 * std::numbers::pi);
    const int scan = 25;
    std::vector<double> ls(scan), es(scan);
    for (int i = 0; i < scan; ++i) {
        ls[i] = std::log(guess) + std::log(100.0) * (2.0 * i / (scan - 1) - 1.0);
        es[i] = energy_at(std::exp(ls[i]));
    }
    const int imin = static_cast<int>(std::min_element(es.begin(), es.end()) - es.begin());
    if (!std::isfinite(es[imin])) fail(ErrorKind::infeasible_geometry, "infeasible initial profile");
    double a = ls[std::max(imin - 1, 0)], b = ls[std::min(imin + 1, scan - 1)];
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double ec = energy_at(std::exp(c)), ed = energy_at(std::exp(d));
    for (int it = 0; it < 40; ++it) {
        if (ec < ed) {
            b = d;
            d = c;
            ed = ec;
            c = b - phi * (b - a);
            ec = energy_at(std::exp(c));
        } else {
            a = c;
            c = d;
            ec = ed;
            d = a + phi * (b - a);
            ed = energy_at(std::exp(d));
        }
    }
    double slope = std::exp(ls[imin]);
    if (std::min(ec, ed) < es[imin]) slope = std::exp(ec < ed ? c : d);

    ProfileResult out;
    out.profile = RadialProfile::linear(x0, f0, slope, n);
    auto& f = out.profile.values;
    const auto& xs = out.profile.nodes;
    EnergyReport start = model.reset(profile_field(out.profile, positions));
    double e = start.E;
    out.trace.push_back(e);

    // Hat-function weights of each vertex on the movable nodes.
    std::vector<std::vector<std::pair<int, double>>> support(n);
    const double hx = xs[1] - xs[0];
    for (int v = 0; v < static_cast<int>(positions.size()); ++v) {
        const double r = positions[v].norm();
        const int j = std::clamp(static_cast<int>(std::floor((r - x0) / hx)), 0, n - 2);
        const double t = (r - xs[j]) / (xs[j + 1] - xs[j]);
        if (j > 0) support[j].emplace_back(v, 1.0 - t);
        support[j + 1].emplace_back(v, t);
    }

    std::vector<double> step(n, 0.0);
    for (int k = 1; k < n; ++k) {
        const double gap = k + 1 < n ? std::min(f[k] - f[k - 1], f[k + 1] - f[k]) : f[k] - f[k - 1];
        step[k] = options.initial_step * gap;
    }
    std::vector<int> verts;
    std::vector<double> vals;
    for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
        const double range = f[n - 1] - f[0];
        const double margin = options.margin * range;
        double best = 0.0;
        std::size_t accepted = 0;
        for (int k = 1; k < n; ++k) {
            if (step[k] < options.min_step * range || support[k].empty()) continue;
            const double lo = f[k - 1] + margin;
            const double hi = k + 1 < n ? f[k + 1] - margin : kInf;
            bool moved = false;
            for (double sign : {1.0, -1.0}) {
                const double target = std::clamp(f[k] + sign * step[k], lo, hi);
                const double shift = target - f[k];
                if (shift == 0.0) continue;
                verts.clear();
                vals.clear();
                for (const auto& [v, w] : support[k]) {
                    verts.push_back(v);
                    vals.push_back(model.field()[v] + shift * w);
                }
                double de = kInf;
                try {
                    de = model.delta(verts, vals);
                } catch (const Error&) {
                    continue;
                }
                if (de < -1e-15 * std::abs(e)) {
                    model.commit(verts, vals);
                    f[k] = target;
                    e += de;
                    best = std::max(best, -de);
                    ++accepted;
                    moved = true;
                    step[k] *= options.growth;
                    break;
                }
            }
            if (!moved) step[k] *= 0.5;
        }
        out.accepted += accepted;
        if (sweep == 0 && accepted == 0 && start.floored_faces > 0 && !std::isfinite(start.E))
            fail(ErrorKind::infeasible_geometry, "infeasible initial profile");
        e = model.evaluate(model.field()).E;
        out.trace.push_back(e);
        if (best / std::abs(e) < options.tolerance) break;
    }
    out.report = model.evaluate(model.field());
    return out;
}

ProfileResult optimize_radial_profile(const TriMesh& mesh, const SlitDomain& domain, const CutterSpec& cutter,
                                      const EnergyOptions& energy, const ProfileOptions& options)
{
    if (!mesh.has_channel(kSlitChannel)) fail(ErrorKind::bad_input, "profile: mesh has no S^S channel");
    EnergyModel model(mesh, curvature_tensor(mesh), cutter, energy);
    return optimize_radial_profile(model, mesh.channel(kSlitChannel), domain, options);
}

namespace {

double boundary_clearance(const TriMesh& mesh, const Vec3& p)
{
    double d = kInf;
    for (const auto& loop : mesh.boundary_loops())
        for (int v : loop) d = std::min(d, (mesh.vertex(v) - p).norm());
    return d;
}

Vec3 centroid(const TriMesh& mesh, int f)
{
    const Face& t = mesh.face(f);
    return (mesh.vertex(t[0]) + mesh.vertex(t[1]) + mesh.vertex(t[2])) / 3.0;
}

int nearest_loop(const TriMesh& mesh, const Vec3& p)
{
    int best = -1;
    double bd = kInf;
    for (int l = 0; l < static_cast<int>(mesh.num_boundaries()); ++l)
        for (int v : mesh.boundary_loops()[l]) {
            const double d = (mesh.vertex(v) - p).norm();
            if (d < bd) {
                bd = d;
                best = l;
            }
        }
    return best;
}

// Farthest-point sample of up to `count` faces, starting from `first`.
std::vector<int> farthest_faces(const TriMesh& mesh, const std::vector<int>& faces, int first, int count)
{
    std::vector<int> out;
    if (faces.empty()) return out;
    std::vector<double> dist(faces.size(), kInf);
    int next = first;
    while (static_cast<int>(out.size()) < count) {
        out.push_back(faces[next]);
        const Vec3 c = centroid(mesh, faces[next]);
        double far = 0.0;
        next = -1;
        for (std::size_t i = 0; i < faces.size(); ++i) {
            dist[i] = std::min(dist[i], (centroid(mesh, faces[i]) - c).norm());
            if (dist[i] > far) {
                far = dist[i];
                next = static_cast<int>(i);
            }
        }
        if (next < 0) break;
    }
    return out;
}

struct WalkEnd {
    int face = -1;
    int exit_loop = -1;
};

// Straightest walk of `length` from the centroid of `face` along tangent `dir`.
WalkEnd walk_surface(const TriMesh& mesh, const FaceFrame& frames, int face, Vec3 dir, double length)
{
    Vec3 p = centroid(mesh, face);
    for (int guard = 0; guard < 100000; ++guard) {
        const Face& t = mesh.face(face);
        const Vec3& n = frames.normal[face];
        dir -= dir.dot(n) * n;
        if (dir.norm() == 0.0) return {face, -1};
        dir.normalize();
        const Vec3 n2 = (mesh.vertex(t[1]) - mesh.vertex(t[0])).cross(mesh.vertex(t[2]) - mesh.vertex(t[0]));
        const Vec3 c = centroid(mesh, face);
        double t_exit = kInf;
        int k_exit = -1;
        for (int k = 0; k < 3; ++k) {
            const Vec3 g = n2.cross(mesh.vertex(t[(k + 2) % 3]) - mesh.vertex(t[(k + 1) % 3])) / n2.squaredNorm();
            const double b = 1.0 / 3.0 + g.dot(p - c);
            const double db = g.dot(dir);
            if (db >= -1e-15) continue;
            const double tk = std::max(0.0, -b / db);
            if (tk < t_exit) {
                t_exit = tk;
                k_exit = k;
            }
        }
        if (k_exit < 0 || t_exit >= length) return {face, -1};
        p += t_exit * dir;
        length -= t_exit;
        const int next = mesh.neighbor(face, k_exit);
        if (next < 0) return {face, mesh.boundary_of(t[(k_exit + 1) % 3])};
        dir = Eigen::Quaterniond::FromTwoVectors(n, frames.normal[next]) * dir;
        face = next;
    }
    return {face, -1};
}

class ThetaSearch {
public:
    ThetaSearch(const TriMesh& mesh, const CutterSpec& cutter, const EnergyOptions& energy, const ThetaOptions& options)
        : mesh_(mesh), frames_(curvature_tensor(mesh)), cutter_(cutter), energy_(energy), opt_(options),
          h_(mesh.average_edge_length())
    {
    }

    double energy(const Anchor& a)
    {
        const int key = a.mode == SlitMode::disk ? a.face : -1 - a.boundary;
        const auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        ++evaluations_;
        const double e = theta_energy(mesh_, a, frames_, cutter_, energy_, opt_.search_profile);
        cache_[key] = e;
        return e;
    }

    bool feasible(int f) const { return boundary_clearance(mesh_, centroid(mesh_, f)) >= 2.0 * h_ * (1.0 + 1e-9); }

    // Minimizer of E_min over sample points of the offset curve of an inner loop.
    std::pair<Anchor, double> relocate(int loop)
    {
        const auto found = relocated_.find(loop);
        if (found != relocated_.end()) return found->second;
        std::vector<int> faces;
        for (int f : offset_curve(mesh_, loop, opt_.offset_fraction * h_))
            if (feasible(f)) faces.push_back(f);
        std::pair<Anchor, double> best{Anchor{}, kInf};
        for (int f : farthest_faces(mesh_, faces, 0, std::max(opt_.seeds, 1))) {
            const Anchor a = Anchor::interior(f);
            const double e = energy(a);
            if (e < best.second) best = {a, e};
        }
        relocated_[loop] = best;
        return best;
    }

    ThetaResult descend(const Anchor& start)
    {
        ThetaResult r;
        r.anchor = start;
        r.E_min = energy(start);
        r.trace.push_back({start, r.E_min, -1});
        double step = opt_.initial_step * mesh_.bbox_diagonal();
        for (int it = 0; it < opt_.max_iterations && step >= 2.0 * h_; ++it) {
            const int f = r.anchor.face;
            ThetaStep best{r.anchor, r.E_min, -1};
            for (int k = 0; k < 6; ++k) {
                const double ang = k * std::numbers::pi / 3.0;
                const Vec3 dir = std::cos(ang) * frames_.u[f] + std::sin(ang) * frames_.v[f];
                const WalkEnd end = walk_surface(mesh_, frames_, f, dir, step);
                int crossed = end.exit_loop;
                if (crossed < 0 && !feasible(end.face)) crossed = nearest_loop(mesh_, centroid(mesh_, end.face));
                ThetaStep cand;
                if (crossed == 0) continue;
                if (crossed > 0) {
                    const auto [a, e] = relocate(crossed);
                    cand = {a, e, crossed};
                    r.relocations.push_back(cand);
                } else {
                    const Anchor a = Anchor::interior(end.face);
                    cand = {a, energy(a), -1};
                }
                if (cand.E_min < best.E_min) best = cand;
            }
            if (best.E_min < r.E_min) {
                r.anchor = best.anchor;
                r.E_min = best.E_min;
                r.trace.push_back(best);
            } else {
                step *= 0.5;
            }
        }
        r.evaluations = evaluations_;
        return r;
    }

    std::vector<int> seeds() const
    {
        std::vector<int> faces;
        int first = -1;
        double clear = 0.0;
        for (int f = 0; f < static_cast<int>(mesh_.num_faces()); ++f) {
            if (!feasible(f)) continue;
            const double c = boundary_clearance(mesh_, centroid(mesh_, f));
            if (c > clear) {
                clear = c;
                first = static_cast<int>(faces.size());
            }
            faces.push_back(f);
        }
        if (faces.empty()) return {};
        return farthest_faces(mesh_, faces, first, opt_.seeds);
    }

    std::size_t evaluations() const { return evaluations_; }
    const FaceFrame& frames() const { return frames_; }

private:
    const TriMesh& mesh_;
    FaceFrame frames_;
    CutterSpec cutter_;
    EnergyOptions energy_;
    ThetaOptions opt_;
    double h_;
    std::map<int, double> cache_;
    std::map<int, std::pair<Anchor, double>> relocated_;
    std::size_t evaluations_ = 0;
};

}  // namespace

std::vector<int> offset_curve(const TriMesh& mesh, int loop, double offset)
{
    if (loop < 1 || loop >= static_cast<int>(mesh.num_boundaries())) fail(ErrorKind::bad_input, "offset curve: invalid loop");
    const double h = mesh.average_edge_length();
    std::vector<int> out;
    for (double band = h; out.empty() && band <= 8.0 * h; band *= 2.0) {
        for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f) {
            const Vec3 c = centroid(mesh, f);
            double own = kInf, other = kInf;
            for (int l = 0; l < static_cast<int>(mesh.num_boundaries()); ++l) {
                double& d = l == loop ? own : other;
                for (int v : mesh.boundary_loops()[l]) d = std::min(d, (mesh.vertex(v) - c).norm());
            }
            if (own >= offset && own < offset + band && other >= offset) out.push_back(f);
        }
    }
    return out;
}

double theta_energy(const TriMesh& mesh, const Anchor& anchor, const FaceFrame& frames, const CutterSpec& cutter,
                    const EnergyOptions& energy, const ProfileOptions& profile)
{
    try {
        TriMesh copy = mesh;
        const SlitDomain dom = slit_map(copy, anchor);
        if (count_inverted_faces(copy, copy.channel(kSlitChannel)) > 0) return kInf;
        EnergyModel model(copy, frames, cutter, energy);
        return optimize_radial_profile(model, copy.channel(kSlitChannel), dom, profile).report.E;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::internal) throw;
        return kInf;
    }
}

ThetaResult descend_theta(const TriMesh& mesh, const Anchor& start, const CutterSpec& cutter, const EnergyOptions& energy,
                          const ThetaOptions& options)
{
    if (start.mode != SlitMode::disk) fail(ErrorKind::bad_input, "descent starts from an interior anchor");
    ThetaSearch search(mesh, cutter, energy, options);
    return search.descend(start);
}

ThetaResult search_theta(TriMesh& mesh, const CutterSpec& cutter, const EnergyOptions& energy, const ThetaOptions& options)
{
    const int m = static_cast<int>(mesh.num_boundaries()) - 1;
    if (options.mode == DomainMode::annulus && m < 1) fail(ErrorKind::bad_input, "annulus mode needs an inner boundary");
    ThetaSearch search(mesh, cutter, energy, options);
    ThetaResult best;
    best.E_min = kInf;
    bool have = false;
    if (options.mode != DomainMode::annulus) {
        const auto seeds = search.seeds();
        if (seeds.empty() && options.mode == DomainMode::disk)
            fail(ErrorKind::infeasible_geometry, "no interior anchor is far enough from the boundary");
        for (int f : seeds) {
            ThetaResult r = search.descend(Anchor::interior(f));
            if (!have || r.E_min < best.E_min) {
                best = std::move(r);
                have = true;
            }
        }
    }
    if (options.mode != DomainMode::disk) {
        for (int l = 1; l <= m; ++l) {
            const Anchor a = Anchor::loop(l);
            const double e = search.energy(a);
            if (!have || e < best.E_min) {
                best = ThetaResult{};
                best.anchor = a;
                best.E_min = e;
                best.trace.push_back({a, e, -1});
                have = true;
            }
        }
    }
    if (!have || !std::isfinite(best.E_min)) fail(ErrorKind::infeasible_geometry, "no feasible anchor found");
    best.evaluations = search.evaluations();
    best.domain = slit_map(mesh, best.anchor);
    EnergyModel model(mesh, search.frames(), cutter, energy);
    best.profile = optimize_radial_profile(model, mesh.channel(kSlitChannel), best.domain, options.final_profile);
    return best;
}

InitializedDomain initialize_domain(TriMesh& mesh, const SlitDomain& domain, const RadialProfile& profile)
{
    if (!mesh.has_channel(kSlitChannel)) fail(ErrorKind::bad_input, "initialize: mesh has no S^S channel");
    if (!profile.strictly_increasing()) fail(ErrorKind::infeasible_geometry, "initialize: profile is not strictly increasing");
    const auto& s = mesh.channel(kSlitChannel);
    std::vector<Vec2> h(s.size());
    InitializedDomain out;
    out.field.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double r = s[i].norm();
        const double fr = profile(r);
        h[i] = r > 0.0 ? Vec2(s[i] / r * fr) : Vec2::Zero();
        out.field[i] = h[i].norm();
    }
    if (count_inverted_faces(mesh, h) > 0) fail(ErrorKind::infeasible_geometry, "initialize: profile inverts faces");
    out.domain = domain;
    out.domain.outer_radius = profile(1.0);
    if (domain.mode == SlitMode::annulus) out.domain.inner_radius = profile(domain.inner_radius);
    update_slits(mesh, h, out.domain);
    mesh.set_channel(kDomainChannel, std::move(h));
    return out;
}

}  // namespace isospiral
