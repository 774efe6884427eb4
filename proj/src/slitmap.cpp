#include "isospiral/slitmap.hpp"

#include "isospiral/error.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

namespace isospiral {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Gradients of the three hat functions on face f (ambient coordinates).
std::array<Vec3, 3> hat_gradients(const TriMesh& mesh, int f)
{
    const Face& t = mesh.face(f);
    const Vec3 n2 = (mesh.vertex(t[1]) - mesh.vertex(t[0])).cross(mesh.vertex(t[2]) - mesh.vertex(t[0]));
    const double a2 = n2.squaredNorm();
    std::array<Vec3, 3> g;
    for (int k = 0; k < 3; ++k) g[k] = n2.cross(mesh.vertex(t[(k + 2) % 3]) - mesh.vertex(t[(k + 1) % 3])) / a2;
    return g;
}

// Assembles sum_f A_f grad(phi_i).grad(phi_j) on the reduced unknowns `dof` (-1 = fixed),
// moving fixed values to the right-hand side.
struct Reduced {
    SpMat k;
    Eigen::VectorXd rhs;
};

Reduced assemble(const TriMesh& mesh, const std::vector<int>& dof, int ndof, const std::vector<double>& fixed,
                 const std::vector<char>& skip_face)
{
    std::vector<Triplet> trip;
    trip.reserve(mesh.num_faces() * 9);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ndof);
    for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f) {
        if (!skip_face.empty() && skip_face[f]) continue;
        const Face& t = mesh.face(f);
        const auto g = hat_gradients(mesh, f);
        const double area = mesh.face_areas()[f];
        for (int a = 0; a < 3; ++a) {
            const int da = dof[t[a]];
            if (da < 0) continue;
            for (int b = 0; b < 3; ++b) {
                const double kab = area * g[a].dot(g[b]);
                const int db = dof[t[b]];
                if (db >= 0)
                    trip.emplace_back(da, db, kab);
                else
                    rhs[da] -= kab * fixed[t[b]];
            }
        }
    }
    SpMat k(ndof, ndof);
    k.setFromTriplets(trip.begin(), trip.end());
    return {std::move(k), std::move(rhs)};
}

Eigen::VectorXd solve_spd(const SpMat& k, const Eigen::VectorXd& rhs)
{
    Eigen::SimplicialLDLT<SpMat> solver(k);
    if (solver.info() != Eigen::Success) fail(ErrorKind::infeasible_geometry, "slit map: singular system");
    Eigen::VectorXd x = solver.solve(rhs);
    const double res = (k * x - rhs).norm();
    if (solver.info() != Eigen::Success || !(res <= 1e-10 * std::max(1.0, rhs.norm())))
        fail(ErrorKind::infeasible_geometry, "slit map: linear solve did not converge");
    return x;
}

// Harmonic function with the given Dirichlet loops; other inner loops float as single
// unknowns with zero total flux. `source` adds a right-hand side on free vertices.
std::vector<double> harmonic(const TriMesh& mesh, const std::vector<int>& dirichlet_loops, const std::vector<double>& loop_values,
                             const std::vector<double>& source)
{
    const int nv = static_cast<int>(mesh.num_vertices());
    std::vector<int> dof(nv, -1);
    std::vector<double> fixed(nv, 0.0);
    int ndof = 0;
    std::vector<int> loop_dof(mesh.num_boundaries(), -2);
    for (std::size_t i = 0; i < dirichlet_loops.size(); ++i) loop_dof[dirichlet_loops[i]] = -1;
    for (std::size_t l = 0; l < mesh.num_boundaries(); ++l)
        if (loop_dof[l] == -2) loop_dof[l] = ndof++;
    for (int v = 0; v < nv; ++v) {
        const int l = mesh.boundary_of(v);
        if (l < 0) {
            dof[v] = ndof++;
        } else {
            dof[v] = loop_dof[l];
            if (dof[v] < 0) {
                const auto it = std::find(dirichlet_loops.begin(), dirichlet_loops.end(), l);
                fixed[v] = loop_values[it - dirichlet_loops.begin()];
            }
        }
    }
    Reduced sys = assemble(mesh, dof, ndof, fixed, {});
    for (int v = 0; v < nv; ++v)
        if (dof[v] >= 0) sys.rhs[dof[v]] += source[v];
    const Eigen::VectorXd x = solve_spd(sys.k, sys.rhs);
    std::vector<double> out(nv);
    for (int v = 0; v < nv; ++v) out[v] = dof[v] >= 0 ? x[dof[v]] : fixed[v];
    return out;
}

// Net discrete flux sum_{i in loop} (K u)_i.
double loop_flux(const TriMesh& mesh, const std::vector<double>& u, int loop)
{
    double flux = 0.0;
    for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f) {
        const Face& t = mesh.face(f);
        const auto g = hat_gradients(mesh, f);
        const double area = mesh.face_areas()[f];
        for (int a = 0; a < 3; ++a) {
            if (mesh.boundary_of(t[a]) != loop) continue;
            for (int b = 0; b < 3; ++b) flux += area * g[a].dot(g[b]) * u[t[b]];
        }
    }
    return flux;
}

// Shortest edge path from the outer loop through interior vertices to any target vertex.
std::vector<int> shortest_cut(const TriMesh& mesh, const std::vector<char>& target)
{
    const int nv = static_cast<int>(mesh.num_vertices());
    std::vector<double> dist(nv, std::numeric_limits<double>::infinity());
    std::vector<int> prev(nv, -1);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    for (int v : mesh.boundary_loops()[0]) {
        dist[v] = 0.0;
        pq.emplace(0.0, v);
    }
    int hit = -1;
    while (!pq.empty()) {
        const auto [d, v] = pq.top();
        pq.pop();
        if (d > dist[v]) continue;
        if (target[v]) {
            hit = v;
            break;
        }
        if (mesh.is_boundary(v) && mesh.boundary_of(v) != 0) continue;
        for (int w : mesh.vertex_neighbors(v)) {
            const bool ok = target[w] || !mesh.is_boundary(w);
            if (!ok) continue;
            // Edges along the outer loop itself are not cut candidates.
            if (mesh.boundary_of(v) == 0 && mesh.boundary_of(w) == 0) continue;
            const double nd = d + (mesh.vertex(w) - mesh.vertex(v)).norm();
            if (nd < dist[w]) {
                dist[w] = nd;
                prev[w] = v;
                pq.emplace(nd, w);
            }
        }
    }
    if (hit < 0) fail(ErrorKind::infeasible_geometry, "slit map: no cut path to the anchor");
    std::vector<int> path;
    for (int v = hit; v >= 0; v = prev[v]) path.push_back(v);
    std::reverse(path.begin(), path.end());
    return path;
}

// Face containing the half-edge a->b in its counter-clockwise order, with the corner of a.
std::pair<int, int> left_face(const TriMesh& mesh, int a, int b)
{
    for (int f : mesh.vertex_faces(a)) {
        const int k = mesh.corner_of(f, a);
        if (mesh.face(f)[(k + 1) % 3] == b) return {f, k};
    }
    fail(ErrorKind::internal, "slit map: cut edge without a left face");
}

// Marks corners of faces lying to the left of the inward-directed cut.
std::vector<std::array<char, 3>> cut_jumps(const TriMesh& mesh, const std::vector<int>& cut, int stop_face)
{
    std::vector<std::array<char, 3>> jump(mesh.num_faces(), {0, 0, 0});
    const std::size_t n = cut.size();
    for (std::size_t i = 0; i < n; ++i) {
        const int c = cut[i];
        if (i + 1 < n) {
            // Rotate counter-clockwise from the left face of the outgoing edge.
            auto [f, k] = left_face(mesh, c, cut[i + 1]);
            const int stop = i > 0 ? left_face(mesh, cut[i - 1], c).first : -1;
            for (std::size_t guard = 0; guard <= mesh.vertex_faces(c).size(); ++guard) {
                jump[f][k] = 1;
                if (f == stop) break;
                const int g = mesh.neighbor(f, (k + 1) % 3);
                if (g < 0) break;
                f = g;
                k = mesh.corner_of(f, c);
            }
        } else {
            // End of the cut: rotate clockwise from the left face of the incoming edge.
            auto [f, k] = left_face(mesh, cut[i - 1], c);
            k = mesh.corner_of(f, c);
            for (std::size_t guard = 0; guard <= mesh.vertex_faces(c).size(); ++guard) {
                if (f == stop_face) break;
                jump[f][k] = 1;
                const int g = mesh.neighbor(f, (k + 2) % 3);
                if (g < 0) break;
                f = g;
                k = mesh.corner_of(f, c);
            }
        }
    }
    return jump;
}

double angle_of(const Vec2& p) { return std::atan2(p.y(), p.x()); }

// Feasible region of v: the intersection of the half-planes left of each opposite edge.
std::vector<Vec2> star_kernel(const TriMesh& mesh, const std::vector<Vec2>& w, int v)
{
    const double big = 4.0;
    std::vector<Vec2> poly = {{-big, -big}, {big, -big}, {big, big}, {-big, big}};
    for (int f : mesh.vertex_faces(v)) {
        const int k = mesh.corner_of(f, v);
        const Vec2& a = w[mesh.face(f)[(k + 1) % 3]];
        const Vec2& b = w[mesh.face(f)[(k + 2) % 3]];
        std::vector<Vec2> out;
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const Vec2& p = poly[i];
            const Vec2& q = poly[(i + 1) % poly.size()];
            const double sp = signed_area(a, b, p), sq = signed_area(a, b, q);
            if (sp >= 0.0) out.push_back(p);
            if ((sp >= 0.0) != (sq >= 0.0)) out.push_back(p + sp / (sp - sq) * (q - p));
        }
        poly = std::move(out);
        if (poly.size() < 3) return {};
    }
    return poly;
}

bool star_valid(const TriMesh& mesh, const std::vector<Vec2>& w, int v)
{
    for (int f : mesh.vertex_faces(v)) {
        const Face& t = mesh.face(f);
        if (signed_area(w[t[0]], w[t[1]], w[t[2]]) <= 0.0) return false;
    }
    return true;
}

// Moves interior vertices of inverted faces toward the centroid of their star kernel,
// only as far as needed to restore orientation. Returns the number of moves.
std::size_t untangle(const TriMesh& mesh, std::vector<Vec2>& w)
{
    std::size_t moves = 0;
    for (int pass = 0; pass < 20; ++pass) {
        std::vector<int> work;
        for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f) {
            const Face& t = mesh.face(f);
            if (signed_area(w[t[0]], w[t[1]], w[t[2]]) > 0.0) continue;
            for (int v : t)
                if (!mesh.is_boundary(v)) work.push_back(v);
        }
        if (work.empty()) break;
        std::sort(work.begin(), work.end());
        work.erase(std::unique(work.begin(), work.end()), work.end());
        for (int v : work) {
            if (star_valid(mesh, w, v)) continue;
            const auto poly = star_kernel(mesh, w, v);
            if (poly.empty()) {
                // Relax the neighbourhood so that a later pass finds a kernel.
                Vec2 c = Vec2::Zero();
                for (int u : mesh.vertex_neighbors(v)) c += w[u];
                w[v] = c / static_cast<double>(mesh.vertex_neighbors(v).size());
                ++moves;
                continue;
            }
            double area = 0.0;
            Vec2 c = Vec2::Zero();
            for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
                const double a = signed_area(poly[0], poly[i], poly[i + 1]);
                area += a;
                c += a * (poly[0] + poly[i] + poly[i + 1]) / 3.0;
            }
            if (!(area > 0.0)) continue;
            c /= area;
            const Vec2 start = w[v];
            double lo = 0.0, hi = 1.0;
            for (int it = 0; it < 40; ++it) {
                const double mid = 0.5 * (lo + hi);
                w[v] = start + mid * (c - start);
                (star_valid(mesh, w, v) ? hi : lo) = mid;
            }
            w[v] = start + 0.5 * (hi + 1.0) * (c - start);
            ++moves;
        }
    }
    return moves;
}

}  // namespace

SlitDomain slit_map(TriMesh& mesh, const Anchor& anchor)
{
    const int nv = static_cast<int>(mesh.num_vertices());
    const int nloops = static_cast<int>(mesh.num_boundaries());
    if (nloops < 1) fail(ErrorKind::bad_input, "slit map: mesh has no boundary");
    SlitDomain dom;
    dom.mode = anchor.mode;
    dom.anchor = anchor;

    std::vector<double> u;
    std::vector<char> target(nv, 0);
    int anchor_face = -1;
    if (anchor.mode == SlitMode::disk) {
        if (anchor.face < 0 || anchor.face >= static_cast<int>(mesh.num_faces()))
            fail(ErrorKind::bad_input, "slit map: anchor face out of range");
        if (anchor.bary.minCoeff() < 0.0 || std::abs(anchor.bary.sum() - 1.0) > 1e-9)
            fail(ErrorKind::bad_input, "slit map: invalid barycentric coordinates");
        anchor_face = anchor.face;
        const Face& t = mesh.face(anchor_face);
        const Vec3 o = anchor.bary[0] * mesh.vertex(t[0]) + anchor.bary[1] * mesh.vertex(t[1]) + anchor.bary[2] * mesh.vertex(t[2]);
        double nearest = std::numeric_limits<double>::infinity();
        for (const auto& loop : mesh.boundary_loops())
            for (int v : loop) nearest = std::min(nearest, (mesh.vertex(v) - o).norm());
        if (nearest < 2.0 * mesh.average_edge_length())
            fail(ErrorKind::infeasible_geometry, "slit map: anchor lies within two edge lengths of a boundary");
        std::vector<double> source(nv, 0.0);
        for (int k = 0; k < 3; ++k) source[t[k]] = -kTwoPi * anchor.bary[k];
        u = harmonic(mesh, {0}, {0.0}, source);
        for (int k = 0; k < 3; ++k) target[t[k]] = 1;
    } else {
        if (anchor.boundary < 1 || anchor.boundary >= nloops)
            fail(ErrorKind::bad_input, "slit map: annulus anchor must be an inner boundary");
        const std::vector<double> h = harmonic(mesh, {0, anchor.boundary}, {0.0, 1.0}, std::vector<double>(nv, 0.0));
        const double flux = loop_flux(mesh, h, anchor.boundary);
        if (!(std::abs(flux) > 0.0)) fail(ErrorKind::infeasible_geometry, "slit map: degenerate annulus");
        const double k = -kTwoPi / std::abs(flux);
        u.resize(nv);
        for (int v = 0; v < nv; ++v) u[v] = k * h[v];
        dom.inner_radius = std::exp(k);
        for (int v : mesh.boundary_loops()[anchor.boundary]) target[v] = 1;
    }

    dom.cut = shortest_cut(mesh, target);
    const auto jump = cut_jumps(mesh, dom.cut, anchor_face);

    // Conjugate angle: least-squares fit of grad v to the rotated gradient of u, with a
    // 2*pi jump on corners left of the cut and the anchor face left out.
    std::vector<int> dof(nv);
    const int pin = dom.cut.front();
    int ndof = 0;
    for (int v = 0; v < nv; ++v) dof[v] = v == pin ? -1 : ndof++;
    std::vector<char> skip(mesh.num_faces(), 0);
    if (anchor_face >= 0) skip[anchor_face] = 1;
    Reduced sys = assemble(mesh, dof, ndof, std::vector<double>(nv, 0.0), skip);
    for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f) {
        if (skip[f]) continue;
        const Face& t = mesh.face(f);
        const auto g = hat_gradients(mesh, f);
        const Vec3 n = g[1].cross(g[2]).normalized();
        Vec3 gu = Vec3::Zero(), gj = Vec3::Zero();
        for (int k = 0; k < 3; ++k) {
            gu += u[t[k]] * g[k];
            if (jump[f][k]) gj += kTwoPi * g[k];
        }
        const Vec3 target_grad = n.cross(gu) - gj;
        const double area = mesh.face_areas()[f];
        for (int k = 0; k < 3; ++k)
            if (dof[t[k]] >= 0) sys.rhs[dof[t[k]]] += area * g[k].dot(target_grad);
    }
    const Eigen::VectorXd x = solve_spd(sys.k, sys.rhs);

    std::vector<Vec2> w(nv);
    for (int v = 0; v < nv; ++v) {
        const double angle = dof[v] >= 0 ? x[dof[v]] : 0.0;
        w[v] = std::exp(u[v]) * Vec2(std::cos(angle), std::sin(angle));
    }
    for (int v : mesh.boundary_loops()[0]) w[v].normalize();
    if (anchor.mode == SlitMode::annulus)
        for (int v : mesh.boundary_loops()[anchor.boundary]) w[v] *= dom.inner_radius / w[v].norm();
    const std::vector<Vec2> solved = w;
    dom.untangled = untangle(mesh, w);
    for (int v = 0; v < nv; ++v) dom.untangle_shift = std::max(dom.untangle_shift, (w[v] - solved[v]).norm());
    dom.log_radius = std::move(u);

    for (int l = 1; l < nloops; ++l)
        if (anchor.mode == SlitMode::disk || l != anchor.boundary) dom.slits.push_back({l, 0.0, 0.0, 0.0});
    update_slits(mesh, w, dom);
    mesh.set_channel(kSlitChannel, std::move(w));
    return dom;
}

void update_slits(const TriMesh& mesh, const std::vector<Vec2>& positions, SlitDomain& domain)
{
    for (Slit& s : domain.slits) {
        const auto& loop = mesh.boundary_loops()[s.boundary];
        std::vector<double> angles;
        double r = 0.0;
        for (int v : loop) {
            angles.push_back(angle_of(positions[v]));
            r += positions[v].norm();
        }
        s.radius = r / static_cast<double>(loop.size());
        std::sort(angles.begin(), angles.end());
        // The extent is the complement of the largest angular gap.
        std::size_t gap_at = angles.size() - 1;
        double gap = angles.front() + kTwoPi - angles.back();
        for (std::size_t i = 0; i + 1 < angles.size(); ++i) {
            if (angles[i + 1] - angles[i] > gap) {
                gap = angles[i + 1] - angles[i];
                gap_at = i;
            }
        }
        s.phi_start = angles[(gap_at + 1) % angles.size()];
        s.phi_end = s.phi_start + (kTwoPi - gap);
    }
}

SlitQuality slit_quality(const TriMesh& mesh, const SlitDomain& domain, double distortion_threshold)
{
    SlitQuality q;
    const auto& w = mesh.channel(kSlitChannel);
    for (int v : mesh.boundary_loops()[0]) q.outer_radius_error = std::max(q.outer_radius_error, std::abs(w[v].norm() - 1.0));

    std::vector<double> u(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) u[i] = std::log(w[i].norm());
    for (int l = 1; l < static_cast<int>(mesh.num_boundaries()); ++l) {
        const auto& loop = mesh.boundary_loops()[l];
        double mean = 0.0, sq = 0.0;
        for (int v : loop) mean += w[v].norm();
        mean /= static_cast<double>(loop.size());
        for (int v : loop) sq += (w[v].norm() - mean) * (w[v].norm() - mean);
        q.slit_spread.push_back(std::sqrt(sq / static_cast<double>(loop.size())) / mean);
        const bool inner = domain.mode == SlitMode::annulus && l == domain.anchor.boundary;
        auto residual = [&](const std::vector<double>& field) {
            const double flux = loop_flux(mesh, field, l);
            return inner ? std::abs(std::abs(flux) - kTwoPi) : std::abs(flux);
        };
        q.image_flux_residual.push_back(residual(u));
        q.flux_residual.push_back(domain.log_radius.size() == u.size() ? residual(domain.log_radius) : q.image_flux_residual.back());
    }

    q.histogram_edges = {1.0, 1.1, 1.25, 1.5, 2.0, 3.0, 5.0};
    q.histogram.assign(q.histogram_edges.size(), 0);
    for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f) {
        const Face& t = mesh.face(f);
        const Vec3 e1 = mesh.vertex(t[1]) - mesh.vertex(t[0]);
        const Vec3 e2 = mesh.vertex(t[2]) - mesh.vertex(t[0]);
        const Vec3 a = e1.normalized();
        const Vec3 b = e1.cross(e2).cross(e1).normalized();
        Eigen::Matrix2d src, dst;
        src << e1.dot(a), e2.dot(a), e1.dot(b), e2.dot(b);
        dst << w[t[1]].x() - w[t[0]].x(), w[t[2]].x() - w[t[0]].x(), w[t[1]].y() - w[t[0]].y(), w[t[2]].y() - w[t[0]].y();
        const Eigen::Matrix2d jac = dst * src.inverse();
        const double det = jac.determinant();
        if (signed_area(w[t[0]], w[t[1]], w[t[2]]) <= 0.0) ++q.inverted_faces;
        const Eigen::JacobiSVD<Eigen::Matrix2d> svd(jac);
        const auto s = svd.singularValues();
        const double ratio = det > 0.0 && s[1] > 0.0 ? s[0] / s[1] : std::numeric_limits<double>::infinity();
        q.distortion.push_back(ratio);
        const auto bin = std::upper_bound(q.histogram_edges.begin(), q.histogram_edges.end(), ratio) - q.histogram_edges.begin();
        ++q.histogram[std::max<std::ptrdiff_t>(bin - 1, 0)];
        if (ratio > distortion_threshold) q.flagged_faces.push_back(f);
    }
    return q;
}

}  // namespace isospiral
