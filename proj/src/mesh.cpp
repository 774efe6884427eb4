#include "isospiral/mesh.hpp"

#include "isospiral/error.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <unordered_map>

namespace isospiral {

namespace {

std::uint64_t edge_key(int a, int b)
{
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (lo << 32) | hi;
}

}  // namespace

TriMesh::TriMesh(std::vector<Vec3> vertices, std::vector<Face> faces, TopologyRequirements req)
    : vertices_(std::move(vertices)), faces_(std::move(faces))
{
    const int nv = static_cast<int>(vertices_.size());
    for (const auto& f : faces_) {
        for (int v : f) {
            if (v < 0 || v >= nv)
                fail(ErrorKind::bad_input, "face references vertex " + std::to_string(v) + " out of range");
        }
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
            fail(ErrorKind::bad_input, "face with repeated vertex");
    }
    if (faces_.empty())
        fail(ErrorKind::bad_input, "mesh has no faces");
    build_connectivity();
    build_boundaries();
    compute_geometry();
    validate(req);
}

void TriMesh::build_connectivity()
{
    const std::size_t nf = faces_.size();
    const std::size_t nv = vertices_.size();
    neighbors_.assign(nf, {-1, -1, -1});

    // Directed half-edge (a->b) to (face, corner opposite).
    std::unordered_map<std::uint64_t, std::vector<std::pair<int, int>>> by_edge;
    by_edge.reserve(nf * 3);
    for (std::size_t f = 0; f < nf; ++f) {
        for (int k = 0; k < 3; ++k) {
            const int a = faces_[f][(k + 1) % 3];
            const int b = faces_[f][(k + 2) % 3];
            by_edge[edge_key(a, b)].emplace_back(static_cast<int>(f), k);
        }
    }

    edges_.clear();
    edges_.reserve(by_edge.size());
    // Deterministic edge order: walk faces, emit each edge on first sight.
    std::unordered_map<std::uint64_t, bool> seen;
    seen.reserve(by_edge.size());
    for (std::size_t f = 0; f < nf; ++f) {
        for (int k = 0; k < 3; ++k) {
            const int a = faces_[f][(k + 1) % 3];
            const int b = faces_[f][(k + 2) % 3];
            const auto key = edge_key(a, b);
            const auto& users = by_edge[key];
            if (users.size() > 2)
                fail(ErrorKind::bad_input, "non-manifold edge (" + std::to_string(a) + ", " + std::to_string(b) + ")");
            if (users.size() == 2) {
                const auto [f0, k0] = users[0];
                const auto [f1, k1] = users[1];
                const int a0 = faces_[f0][(k0 + 1) % 3];
                const int a1 = faces_[f1][(k1 + 1) % 3];
                if (a0 == a1)
                    fail(ErrorKind::bad_input, "inconsistent face orientation at edge (" + std::to_string(a) + ", " + std::to_string(b) + ")");
                neighbors_[f0][k0] = f1;
                neighbors_[f1][k1] = f0;
            }
            if (!seen[key]) {
                seen[key] = true;
                edges_.push_back({std::min(a, b), std::max(a, b)});
            }
        }
    }

    std::vector<int> deg(nv, 0);
    for (const auto& f : faces_)
        for (int v : f) ++deg[v];
    vf_offsets_.assign(nv + 1, 0);
    for (std::size_t v = 0; v < nv; ++v) vf_offsets_[v + 1] = vf_offsets_[v] + deg[v];
    vf_.assign(static_cast<std::size_t>(vf_offsets_[nv]), -1);
    std::vector<int> fill(vf_offsets_.begin(), vf_offsets_.end() - 1);
    for (std::size_t f = 0; f < nf; ++f)
        for (int v : faces_[f]) vf_[fill[static_cast<std::size_t>(v)]++] = static_cast<int>(f);

    std::vector<std::vector<int>> nbrs(nv);
    for (const auto& e : edges_) {
        nbrs[e[0]].push_back(e[1]);
        nbrs[e[1]].push_back(e[0]);
    }
    vv_offsets_.assign(nv + 1, 0);
    for (std::size_t v = 0; v < nv; ++v) {
        std::sort(nbrs[v].begin(), nbrs[v].end());
        vv_offsets_[v + 1] = vv_offsets_[v] + static_cast<int>(nbrs[v].size());
    }
    vv_.clear();
    vv_.reserve(static_cast<std::size_t>(vv_offsets_[nv]));
    for (auto& n : nbrs) vv_.insert(vv_.end(), n.begin(), n.end());

    // Connected components over faces.
    std::vector<int> comp(nf, -1);
    components_ = 0;
    for (std::size_t s = 0; s < nf; ++s) {
        if (comp[s] >= 0) continue;
        std::queue<int> q;
        q.push(static_cast<int>(s));
        comp[s] = static_cast<int>(components_);
        while (!q.empty()) {
            const int f = q.front();
            q.pop();
            for (int k = 0; k < 3; ++k) {
                const int g = neighbors_[f][k];
                if (g >= 0 && comp[g] < 0) {
                    comp[g] = static_cast<int>(components_);
                    q.push(g);
                }
            }
        }
        ++components_;
    }
    isolated_ = static_cast<std::size_t>(std::count(deg.begin(), deg.end(), 0));
}

void TriMesh::build_boundaries()
{
    const std::size_t nv = vertices_.size();
    std::vector<int> next(nv, -1);
    for (std::size_t f = 0; f < faces_.size(); ++f) {
        for (int k = 0; k < 3; ++k) {
            if (neighbors_[f][k] >= 0) continue;
            const int a = faces_[f][(k + 1) % 3];
            const int b = faces_[f][(k + 2) % 3];
            if (next[a] >= 0)
                fail(ErrorKind::bad_input, "non-manifold boundary vertex " + std::to_string(a));
            next[a] = b;
        }
    }
    vertex_loop_.assign(nv, -1);
    loops_.clear();
    std::vector<char> visited(nv, 0);
    for (std::size_t s = 0; s < nv; ++s) {
        if (next[s] < 0 || visited[s]) continue;
        std::vector<int> loop;
        int v = static_cast<int>(s);
        while (!visited[v]) {
            visited[v] = 1;
            loop.push_back(v);
            v = next[v];
            if (v < 0) fail(ErrorKind::bad_input, "open boundary chain");
        }
        if (v != static_cast<int>(s)) fail(ErrorKind::bad_input, "boundary chain does not close");
        loops_.push_back(std::move(loop));
    }

    auto length = [this](const std::vector<int>& loop) {
        double len = 0.0;
        for (std::size_t i = 0; i < loop.size(); ++i)
            len += (vertices_[loop[(i + 1) % loop.size()]] - vertices_[loop[i]]).norm();
        return len;
    };
    std::vector<double> lens;
    for (const auto& l : loops_) lens.push_back(length(l));
    std::vector<std::size_t> order(loops_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lens[a] > lens[b]; });
    std::vector<std::vector<int>> sorted;
    for (auto i : order) sorted.push_back(std::move(loops_[i]));
    loops_ = std::move(sorted);
    for (std::size_t i = 0; i < loops_.size(); ++i)
        for (int v : loops_[i]) vertex_loop_[v] = static_cast<int>(i);
}

void TriMesh::compute_geometry()
{
    const std::size_t nf = faces_.size();
    face_areas_.resize(nf);
    dual_areas_.assign(vertices_.size(), 0.0);
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
    Vec3 hi = -lo;
    for (const auto& p : vertices_) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    bbox_diagonal_ = (hi - lo).norm();
    total_area_ = 0.0;
    degenerate_.clear();
    const double thresh = degenerate_area_threshold();
    for (std::size_t f = 0; f < nf; ++f) {
        const auto& t = faces_[f];
        const Vec3& a = vertices_[t[0]];
        const Vec3& b = vertices_[t[1]];
        const Vec3& c = vertices_[t[2]];
        const double area = 0.5 * (b - a).cross(c - a).norm();
        face_areas_[f] = area;
        total_area_ += area;
        if (area < thresh) degenerate_.push_back(static_cast<int>(f));
        for (int v : t) dual_areas_[v] += area / 3.0;
    }
    double sum = 0.0;
    for (const auto& e : edges_) sum += (vertices_[e[0]] - vertices_[e[1]]).norm();
    avg_edge_ = edges_.empty() ? 0.0 : sum / static_cast<double>(edges_.size());
}

void TriMesh::validate(const TopologyRequirements& req) const
{
    if (degenerate_.size() > req.max_degenerate_faces)
        fail(ErrorKind::bad_input, std::to_string(degenerate_.size()) + " degenerate (zero-area) faces");
    if (!req.planning) return;
    if (components_ != 1)
        fail(ErrorKind::bad_input, "mesh has " + std::to_string(components_) + " connected components");
    if (isolated_ != 0)
        fail(ErrorKind::bad_input, std::to_string(isolated_) + " isolated vertices");
    if (loops_.empty() || genus() != 0)
        fail(ErrorKind::bad_input, "genus/boundary requirements violated (genus " + std::to_string(genus()) + ", " +
                                       std::to_string(loops_.size()) + " boundary loops)");
}

int TriMesh::euler_characteristic() const noexcept
{
    return static_cast<int>(vertices_.size() - isolated_) - static_cast<int>(edges_.size()) + static_cast<int>(faces_.size());
}

int TriMesh::genus() const noexcept
{
    return (2 - static_cast<int>(loops_.size()) - euler_characteristic()) / 2;
}

int TriMesh::corner_of(int f, int v) const
{
    const auto& t = faces_[f];
    for (int k = 0; k < 3; ++k)
        if (t[k] == v) return k;
    return -1;
}

std::span<const int> TriMesh::vertex_faces(int v) const
{
    const auto b = static_cast<std::size_t>(vf_offsets_[v]);
    const auto e = static_cast<std::size_t>(vf_offsets_[static_cast<std::size_t>(v) + 1]);
    return {vf_.data() + b, e - b};
}

std::span<const int> TriMesh::vertex_neighbors(int v) const
{
    const auto b = static_cast<std::size_t>(vv_offsets_[v]);
    const auto e = static_cast<std::size_t>(vv_offsets_[static_cast<std::size_t>(v) + 1]);
    return {vv_.data() + b, e - b};
}

double TriMesh::loop_length(std::size_t loop) const
{
    const auto& l = loops_.at(loop);
    double len = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) len += (vertex(l[(i + 1) % l.size()]) - vertex(l[i])).norm();
    return len;
}

void TriMesh::set_channel(const std::string& name, std::vector<Vec2> positions)
{
    if (positions.size() != vertices_.size())
        fail(ErrorKind::internal, "channel " + name + " size mismatch");
    channels_[name] = std::move(positions);
}

const std::vector<Vec2>& TriMesh::channel(const std::string& name) const
{
    const auto it = channels_.find(name);
    if (it == channels_.end()) fail(ErrorKind::internal, "missing channel " + name);
    return it->second;
}

std::size_t count_inverted_faces(const TriMesh& mesh, const std::vector<Vec2>& positions)
{
    std::size_t count = 0;
    for (const auto& f : mesh.faces()) {
        if (signed_area(positions[f[0]], positions[f[1]],
                        positions[f[2]]) <= 0.0)
            ++count;
    }
    return count;
}

Vec3 face_normal(const TriMesh& mesh, int f)
{
    const auto& t = mesh.face(f);
    const Vec3 n = (mesh.vertex(t[1]) - mesh.vertex(t[0])).cross(mesh.vertex(t[2]) - mesh.vertex(t[0]));
    const double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

std::vector<Vec3> vertex_normals(const TriMesh& mesh)
{
    std::vector<Vec3> normals(mesh.num_vertices(), Vec3::Zero());
    for (const auto& t : mesh.faces()) {
        for (int k = 0; k < 3; ++k) {
            const Vec3& p = mesh.vertex(t[k]);
            const Vec3 e1 = mesh.vertex(t[(k + 1) % 3]) - p;
            const Vec3 e2 = mesh.vertex(t[(k + 2) % 3]) - p;
            const double l1 = e1.squaredNorm();
            const double l2 = e2.squaredNorm();
            if (l1 <= 0.0 || l2 <= 0.0) continue;
            normals[t[static_cast<std::size_t>(k)]] += e1.cross(e2) / (l1 * l2);
        }
    }
    for (auto& n : normals) {
        const double len = n.norm();
        if (len > 0.0) n /= len;
    }
    return normals;
}

}  // namespace isospiral
