#include "isospiral/generators.hpp"

#include "isospiral/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <unordered_map>

namespace isospiral {

namespace {

constexpr double kPi = std::numbers::pi;

void orient_ccw_xy(MeshData& m)
{
    for (auto& f : m.faces) {
        const Vec3& a = m.vertices[f[0]];
        const Vec3& b = m.vertices[f[1]];
        const Vec3& c = m.vertices[f[2]];
        if ((b - a).cross(c - a).z() < 0.0) std::swap(f[1], f[2]);
    }
}

// Triangulates the band between two closed rings given as vertex ids with increasing
// unwrapped angles starting near the same direction.
void stitch_rings(MeshData& m, const std::vector<int>& inner, const std::vector<double>& ia,
                  const std::vector<int>& outer, const std::vector<double>& oa)
{
    const std::size_t n1 = inner.size();
    const std::size_t n2 = outer.size();
    auto angle_in = [&](std::size_t i) { return ia[i % n1] + 2.0 * kPi * static_cast<double>(i / n1); };
    auto angle_out = [&](std::size_t j) { return oa[j % n2] + 2.0 * kPi * static_cast<double>(j / n2); };
    std::size_t i = 0, j = 0;
    while (i < n1 || j < n2) {
        const bool advance_inner = j == n2 || (i < n1 && angle_in(i + 1) < angle_out(j + 1));
        if (advance_inner) {
            m.faces.push_back({inner[i % n1], inner[(i + 1) % n1], outer[j % n2]});
            ++i;
        } else {
            m.faces.push_back({inner[i % n1], outer[(j + 1) % n2], outer[j % n2]});
            ++j;
        }
    }
}

double orient(const Vec2& a, const Vec2& b, const Vec2& c)
{
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

// Positive when d lies inside the circumcircle of the counter-clockwise triangle abc.
double in_circle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d)
{
    const Vec2 ad = a - d, bd = b - d, cd = c - d;
    return ad.squaredNorm() * (bd.x() * cd.y() - cd.x() * bd.y()) - bd.squaredNorm() * (ad.x() * cd.y() - cd.x() * ad.y()) +
           cd.squaredNorm() * (ad.x() * bd.y() - bd.x() * ad.y());
}

struct Tri {
    std::array<int, 3> v;
    std::array<int, 3> nbr;  // across the edge opposite v[k]
    bool alive = true;
};

// Bowyer-Watson with a visibility walk for point location and a connected cavity.
std::vector<std::array<int, 3>> delaunay(std::vector<Vec2> pts)
{
    Vec2 lo = pts.front(), hi = pts.front();
    for (const auto& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double span = std::max(hi.x() - lo.x(), hi.y() - lo.y());
    const Vec2 mid = 0.5 * (lo + hi);
    const int n = static_cast<int>(pts.size());
    pts.emplace_back(mid.x() - 20 * span, mid.y() - 10 * span);
    pts.emplace_back(mid.x() + 20 * span, mid.y() - 10 * span);
    pts.emplace_back(mid.x(), mid.y() + 20 * span);

    std::vector<Tri> tris{{{n, n + 1, n + 2}, {-1, -1, -1}, true}};
    int last = 0;
    std::vector<int> cavity, stack, mark(1, -1);
    for (int p = 0; p < n; ++p) {
        const Vec2& q = pts[p];
        int t = last;
        for (int steps = 0;; ++steps) {
            if (steps > 4 * static_cast<int>(tris.size())) fail(ErrorKind::internal, "delaunay walk did not terminate");
            bool moved = false;
            for (int k = 0; k < 3; ++k) {
                const auto& tr = tris[t];
                if (orient(pts[tr.v[(k + 1) % 3]], pts[tr.v[(k + 2) % 3]], q) < 0.0 && tr.nbr[k] >= 0) {
                    t = tr.nbr[k];
                    moved = true;
                    break;
                }
            }
            if (!moved) break;
        }

        cavity.clear();
        stack.assign(1, t);
        mark.resize(tris.size(), -1);
        mark[t] = p;
        while (!stack.empty()) {
            const int c = stack.back();
            stack.pop_back();
            cavity.push_back(c);
            for (int k = 0; k < 3; ++k) {
                const int nb = tris[c].nbr[k];
                if (nb < 0 || mark[nb] == p) continue;
                const auto& v = tris[nb].v;
                if (in_circle(pts[v[0]], pts[v[1]], pts[v[2]], q) > 0.0) {
                    mark[nb] = p;
                    stack.push_back(nb);
                }
            }
        }

        // Fan the cavity boundary to q; link fresh triangles through their shared spokes.
        std::unordered_map<int, std::pair<int, int>> spoke;  // vertex -> (triangle, slot)
        const std::size_t first = tris.size();
        for (int c : cavity) {
            for (int k = 0; k < 3; ++k) {
                const int nb = tris[c].nbr[k];
                if (nb >= 0 && mark[nb] == p) continue;
                const int a = tris[c].v[(k + 1) % 3], b = tris[c].v[(k + 2) % 3];
                const int id = static_cast<int>(tris.size());
                tris.push_back({{a, b, p}, {-1, -1, nb}, true});
                if (nb >= 0)
                    for (int j = 0; j < 3; ++j)
                        if (tris[nb].nbr[j] == c) tris[nb].nbr[j] = id;
                // Slot 0 is opposite a (edge b-p), slot 1 opposite b (edge p-a).
                for (auto [vert, slot] : {std::pair{b, 0}, std::pair{a, 1}}) {
                    auto it = spoke.find(vert);
                    if (it == spoke.end()) {
                        spoke[vert] = {id, slot};
                    } else {
                        tris[id].nbr[slot] = it->second.first;
                        tris[it->second.first].nbr[it->second.second] = id;
                        spoke.erase(it);
                    }
                }
            }
        }
        for (int c : cavity) tris[c].alive = false;
        last = static_cast<int>(first);
    }
    std::vector<std::array<int, 3>> out;
    for (const auto& t : tris) {
        if (!t.alive || t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;
        out.push_back(t.v);
    }
    return out;
}

double jitter(int i, int j, double scale)
{
    // Deterministic hash noise in [-scale, scale].
    std::uint32_t h = static_cast<std::uint32_t>(i) * 73856093u ^ static_cast<std::uint32_t>(j) * 19349663u;
    h ^= h >> 13;
    h *= 0x5bd1e995u;
    h ^= h >> 15;
    return scale * (static_cast<double>(h % 20001u) / 10000.0 - 1.0);
}

}  // namespace

MeshData unit_square()
{
    MeshData m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)};
    m.faces = {{0, 1, 2}, {0, 2, 3}};
    return m;
}

MeshData planar_grid(int nx, int ny, double width, double height, double x0, double y0)
{
    MeshData m;
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            m.vertices.emplace_back(x0 + width * i / nx, y0 + height * j / ny, 0.0);
    auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            if ((i + j) % 2 == 0) {
                m.faces.push_back({a, b, c});
                m.faces.push_back({a, c, d});
            } else {
                m.faces.push_back({a, b, d});
                m.faces.push_back({b, c, d});
            }
        }
    }
    return m;
}

MeshData polar_annulus(double inner_radius, double outer_radius, int rings, int sectors)
{
    MeshData m;
    std::vector<std::vector<int>> ids(static_cast<std::size_t>(rings) + 1);
    std::vector<std::vector<double>> angles(static_cast<std::size_t>(rings) + 1);
    for (int j = 0; j <= rings; ++j) {
        const double r = inner_radius + (outer_radius - inner_radius) * j / rings;
        for (int k = 0; k < sectors; ++k) {
            const double a = 2.0 * kPi * (k + 0.5 * (j % 2)) / sectors;
            ids[j].push_back(static_cast<int>(m.vertices.size()));
            angles[j].push_back(a);
            m.vertices.emplace_back(r * std::cos(a), r * std::sin(a), 0.0);
        }
    }
    for (int j = 0; j < rings; ++j) stitch_rings(m, ids[j], angles[j], ids[j + 1], angles[j + 1]);
    orient_ccw_xy(m);
    return m;
}

MeshData polar_disk(double radius, int rings)
{
    MeshData m;
    m.vertices.emplace_back(0.0, 0.0, 0.0);
    std::vector<int> prev{0};
    std::vector<double> prev_a{0.0};
    for (int j = 1; j <= rings; ++j) {
        const double r = radius * j / rings;
        const int count = 6 * j;
        std::vector<int> ring;
        std::vector<double> ra;
        for (int k = 0; k < count; ++k) {
            const double a = 2.0 * kPi * k / count;
            ring.push_back(static_cast<int>(m.vertices.size()));
            ra.push_back(a);
            m.vertices.emplace_back(r * std::cos(a), r * std::sin(a), 0.0);
        }
        if (j == 1) {
            for (int k = 0; k < count; ++k) m.faces.push_back({0, ring[k], ring[(k + 1) % count]});
        } else {
            stitch_rings(m, prev, prev_a, ring, ra);
        }
        prev = std::move(ring);
        prev_a = std::move(ra);
    }
    orient_ccw_xy(m);
    return m;
}

MeshData icosphere(double radius, int subdivisions)
{
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    MeshData m;
    m.vertices = {Vec3(-1, t, 0), Vec3(1, t, 0),  Vec3(-1, -t, 0), Vec3(1, -t, 0), Vec3(0, -1, t),  Vec3(0, 1, t),
                  Vec3(0, -1, -t), Vec3(0, 1, -t), Vec3(t, 0, -1),  Vec3(t, 0, 1),  Vec3(-t, 0, -1), Vec3(-t, 0, 1)};
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
               {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (auto& v : m.vertices) v.normalize();
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> mids;
        auto midpoint = [&](int a, int b) {
            const auto key = std::make_pair(std::min(a, b), std::max(a, b));
            auto it = mids.find(key);
            if (it != mids.end()) return it->second;
            const int id = static_cast<int>(m.vertices.size());
            m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
            mids[key] = id;
            return id;
        };
        std::vector<Face> next;
        for (const auto& f : m.faces) {
            const int ab = midpoint(f[0], f[1]), bc = midpoint(f[1], f[2]), ca = midpoint(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        m.faces = std::move(next);
    }
    for (auto& v : m.vertices) v *= radius;
    return m;
}

MeshData open_cylinder(double radius, double height, int rings, int sectors)
{
    MeshData m;
    for (int j = 0; j <= rings; ++j)
        for (int k = 0; k < sectors; ++k) {
            const double a = 2.0 * kPi * (k + 0.5 * (j % 2)) / sectors;
            m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), height * j / rings);
        }
    auto id = [sectors](int j, int k) { return j * sectors + (k % sectors); };
    for (int j = 0; j < rings; ++j)
        for (int k = 0; k < sectors; ++k) {
            if (j % 2 == 0) {
                m.faces.push_back({id(j, k), id(j, k + 1), id(j + 1, k)});
                m.faces.push_back({id(j, k + 1), id(j + 1, k + 1), id(j + 1, k)});
            } else {
                m.faces.push_back({id(j, k), id(j + 1, k + 1), id(j + 1, k)});
                m.faces.push_back({id(j, k), id(j, k + 1), id(j + 1, k + 1)});
            }
        }
    // Outward normals.
    for (auto& f : m.faces) {
        const Vec3 c = (m.vertices[f[0]] + m.vertices[f[1]] + m.vertices[f[2]]) / 3.0;
        const Vec3 n = (m.vertices[f[1]] - m.vertices[f[0]]).cross(m.vertices[f[2]] - m.vertices[f[0]]);
        if (n.dot(Vec3(c.x(), c.y(), 0.0)) < 0.0) std::swap(f[1], f[2]);
    }
    return m;
}

MeshData torus(double major, double minor, int nu, int nv)
{
    MeshData m;
    for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nv; ++j) {
            const double u = 2.0 * kPi * i / nu, v = 2.0 * kPi * j / nv;
            m.vertices.emplace_back((major + minor * std::cos(v)) * std::cos(u), (major + minor * std::cos(v)) * std::sin(u),
                                    minor * std::sin(v));
        }
    auto id = [nu, nv](int i, int j) { return (i % nu) * nv + (j % nv); };
    for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nv; ++j) {
            m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    return m;
}

namespace {

// Flips edges so that no boundary vertex is shared by only two faces.
void widen_boundary_fans(MeshData& m, const std::vector<Vec2>& pts)
{
    for (int pass = 0; pass < 8; ++pass) {
        const TriMesh mesh(m.vertices, m.faces);
        bool changed = false;
        std::vector<char> touched(m.faces.size(), 0);
        for (int t = 0; t < static_cast<int>(mesh.num_vertices()); ++t) {
            const auto fan = mesh.vertex_faces(t);
            if (!mesh.is_boundary(t) || fan.size() != 2) continue;
            for (int f : fan) {
                const int g = mesh.neighbor(f, mesh.corner_of(f, t));
                if (g < 0 || touched[f] || touched[g]) continue;
                const int k = mesh.corner_of(f, t);
                const int i = m.faces[f][(k + 1) % 3], a = m.faces[f][(k + 2) % 3];
                int x = -1;
                for (int v : m.faces[g])
                    if (v != i && v != a) x = v;
                if (orient(pts[t], pts[i], pts[x]) <= 0.0 || orient(pts[t], pts[x], pts[a]) <= 0.0) continue;
                m.faces[f] = {t, i, x};
                m.faces[g] = {t, x, a};
                touched[f] = touched[g] = 1;
                changed = true;
                break;
            }
        }
        if (!changed) return;
    }
}

}  // namespace

MeshData holed_disk(const Circle& outer, const std::vector<Circle>& holes, double edge_length)
{
    const double h = edge_length;
    std::vector<Vec2> pts;
    std::vector<std::size_t> loop_sizes;
    auto sample_circle = [&](const Circle& c) {
        const int n = std::max(12, static_cast<int>(std::lround(2.0 * kPi * c.radius / h)));
        for (int k = 0; k < n; ++k) {
            const double a = 2.0 * kPi * k / n;
            const double r = c.radius * (1.0 + jitter(k, static_cast<int>(loop_sizes.size()), 1e-4));
            pts.emplace_back(c.center + r * Vec2(std::cos(a), std::sin(a)));
        }
        loop_sizes.push_back(static_cast<std::size_t>(n));
    };
    sample_circle(outer);
    for (const auto& c : holes) sample_circle(c);

    const double clearance = 0.7 * h;
    auto inside = [&](const Vec2& p, double margin) {
        if ((p - outer.center).norm() > outer.radius - margin) return false;
        for (const auto& c : holes)
            if ((p - c.center).norm() < c.radius + margin) return false;
        return true;
    };
    const double dy = h * std::sqrt(3.0) / 2.0;
    const int ny = static_cast<int>(std::ceil(outer.radius / dy)) + 1;
    const int nx = static_cast<int>(std::ceil(outer.radius / h)) + 1;
    for (int j = -ny; j <= ny; ++j)
        for (int i = -nx; i <= nx; ++i) {
            Vec2 p = outer.center + Vec2((i + 0.5 * (std::abs(j) % 2)) * h, j * dy);
            p += Vec2(jitter(i, j, 0.02 * h), jitter(j + 7919, i, 0.02 * h));
            if (inside(p, clearance)) pts.push_back(p);
        }

    const auto tris = delaunay(pts);
    MeshData m;
    for (const auto& p : pts) m.vertices.emplace_back(p.x(), p.y(), 0.0);
    for (const auto& t : tris) {
        const Vec2 c = (pts[t[0]] + pts[t[1]] + pts[t[2]]) / 3.0;
        if (!inside(c, 0.0)) continue;
        m.faces.push_back({t[0], t[1], t[2]});
    }
    orient_ccw_xy(m);
    widen_boundary_fans(m, pts);

    const TriMesh check(m.vertices, m.faces);
    if (check.num_boundaries() != holes.size() + 1)
        fail(ErrorKind::internal, "holed_disk: boundary recovery failed; refine edge length");
    for (const auto& loop : check.boundary_loops())
        if (std::find(loop_sizes.begin(), loop_sizes.end(), loop.size()) == loop_sizes.end())
            fail(ErrorKind::internal, "holed_disk: boundary recovery failed; refine edge length");
    return m;
}

MeshData lift(MeshData planar, const std::function<double(double, double)>& height)
{
    for (auto& v : planar.vertices) v.z() = height(v.x(), v.y());
    return planar;
}

namespace {

std::vector<Circle> fixture_holes()
{
    return {{Vec2(18.0, 10.0), 7.0}, {Vec2(-15.0, 16.0), 6.0}, {Vec2(-2.0, -22.0), 8.0}};
}

}  // namespace

MeshData threehole_disk(double edge_length)
{
    return holed_disk({Vec2::Zero(), 50.0}, fixture_holes(), edge_length);
}

MeshData freeform_surface(double edge_length)
{
    // Elongated boss plus a gentle saddle; curvature stays well below the 0.1/mm cutter curvature.
    return lift(holed_disk({Vec2::Zero(), 50.0}, fixture_holes(), edge_length), [](double x, double y) {
        const double dx = (x - 4.0) / 20.0, dy = (y + 2.0) / 12.0;
        return 10.0 * std::exp(-0.5 * (dx * dx + dy * dy)) + 0.0015 * (x * x - 0.5 * y * y);
    });
}

MeshData flat_annulus_fixture() { return polar_annulus(15.0, 40.0, 16, 96); }

std::vector<BundledMesh> bundled_meshes()
{
    return {{"threehole", threehole_disk()}, {"freeform", freeform_surface()}, {"annulus", flat_annulus_fixture()}, {"plate", polar_disk(30.0, 24)}};
}

}  // namespace isospiral
