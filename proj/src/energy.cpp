#include "isospiral/energy.hpp"

#include "isospiral/error.hpp"

#include <algorithm>
#include <cmath>

namespace isospiral {

namespace {

constexpr double kCurvatureClamp = 1e-6;

}  // namespace

EnergyModel::EnergyModel(const TriMesh& mesh, const FaceFrame& frames, CutterSpec cutter, EnergyOptions options)
    : mesh_(mesh), cutter_(cutter), opt_(options), kc_(cutter.curvature())
{
    if (!(cutter.tool_radius > 0.0)) fail(ErrorKind::bad_input, "tool radius must be positive");
    const int nf = static_cast<int>(mesh.num_faces());
    ops_.resize(nf);
    for (int f = 0; f < nf; ++f) {
        FaceOps& op = ops_[f];
        op.area = mesh.face_areas()[f];
        op.c = frames.curvature[f];
        if (!frames.valid[f]) continue;
        const Face& t = mesh.face(f);
        std::array<Vec2, 3> p;
        for (int k = 0; k < 3; ++k) p[k] = frames.to_local(f, mesh.vertex(t[k]) - mesh.vertex(t[0]));
        const double a2 = (p[1].x() - p[0].x()) * (p[2].y() - p[0].y()) - (p[1].y() - p[0].y()) * (p[2].x() - p[0].x());
        auto perp = [](const Vec2& e) { return Vec2(-e.y(), e.x()); };
        op.g1 = perp(p[0] - p[2]) / a2;
        op.g2 = perp(p[1] - p[0]) / a2;
        std::array<double, 3> cot;
        for (int k = 0; k < 3; ++k) {
            const Vec2 a = p[(k + 1) % 3] - p[k];
            const Vec2 b = p[(k + 2) % 3] - p[k];
            cot[k] = a.dot(b) / std::abs(a.x() * b.y() - a.y() * b.x());
        }
        for (int k = 0; k < 3; ++k)
            op.w[k] = cot[(k + 2) % 3] * (p[(k + 1) % 3] - p[k]) + cot[(k + 1) % 3] * (p[(k + 2) % 3] - p[k]);
    }
    interior_.resize(mesh.num_vertices());
    for (int v = 0; v < static_cast<int>(mesh.num_vertices()); ++v) interior_[v] = !mesh.is_boundary(v);
    face_mark_.assign(nf, -1);
    face_pos_.assign(nf, 0);
    vert_mark_.assign(mesh.num_vertices(), -1);
}

EnergyModel::FaceTerm EnergyModel::face_term(int f, double t0, double t1, double t2) const
{
    const FaceOps& op = ops_[f];
    FaceTerm out;
    if (op.area <= 0.0) return out;
    const Vec2 g = (t1 - t0) * op.g1 + (t2 - t0) * op.g2;
    double gn = g.norm();
    double ks = 0.0;
    if (gn <= grad_floor_ || gn == 0.0) {
        out.floored = true;
        gn = std::max(grad_floor_, std::numeric_limits<double>::min());
    } else {
        out.dir = g / gn;
        ks = out.dir.dot(op.c * out.dir);
    }
    const double kappa = std::max(ks + kc_, kCurvatureClamp);
    out.x = kappa / (8.0 * gn * gn);
    out.w = op.area * (out.x + 1.0 / out.x);
    if (!out.floored) {
        if (opt_.printed_normal_term) {
            out.n = op.area * ks;
        } else {
            const Vec2 t(-out.dir.y(), out.dir.x());
            const double kn = t.dot(op.c * t);
            out.n = op.area * kn * kn;
        }
    }
    return out;
}

double EnergyModel::vertex_term(int j, double s) const
{
    if (!interior_[j]) return 0.0;
    if (opt_.printed_geodesic_term) return 0.5 * s;
    return s * s / (4.0 * mesh_.dual_areas()[j]);
}

double EnergyModel::scallop_factor(int f, std::span<const double> field) const
{
    const Face& t = mesh_.face(f);
    return face_term(f, field[t[0]], field[t[1]], field[t[2]]).x;
}

EnergyReport EnergyModel::evaluate(std::span<const double> field) const
{
    const int nf = static_cast<int>(mesh_.num_faces());
    std::vector<double> s(mesh_.num_vertices(), 0.0);
    EnergyReport r;
    r.alpha = opt_.alpha;
    double ax = 0.0, area = 0.0;
    for (int f = 0; f < nf; ++f) {
        const Face& t = mesh_.face(f);
        const FaceTerm ft = face_term(f, field[t[0]], field[t[1]], field[t[2]]);
        r.E_w += ft.w;
        r.E_n += ft.n;
        if (ft.floored) {
            ++r.floored_faces;
            continue;
        }
        ax += ops_[f].area * ft.x;
        area += ops_[f].area;
        for (int k = 0; k < 3; ++k) s[t[k]] += ops_[f].w[k].dot(ft.dir);
    }
    if (r.floored_faces == mesh_.num_faces()) fail(ErrorKind::infeasible_geometry, "field is constant");
    for (int j = 0; j < static_cast<int>(s.size()); ++j) r.E_g += vertex_term(j, s[j]);
    r.E_k = r.E_n + r.E_g;
    r.E = r.E_w + opt_.alpha * r.E_k;
    r.avg = area > 0.0 ? ax / area : 0.0;
    return r;
}

EnergyReport EnergyModel::reset(std::vector<double> field, bool refresh_floor)
{
    if (field.size() != mesh_.num_vertices()) fail(ErrorKind::internal, "field size mismatch");
    if (refresh_floor) grad_floor_ = default_gradient_floor(mesh_, field);
    field_ = std::move(field);
    scratch_field_ = field_;
    const int nf = static_cast<int>(mesh_.num_faces());
    terms_.resize(nf);
    for (int f = 0; f < nf; ++f) {
        const Face& t = mesh_.face(f);
        terms_[f] = face_term(f, field_[t[0]], field_[t[1]], field_[t[2]]);
    }
    return evaluate(field_);
}

void EnergyModel::gather(std::span<const int> vertices) const
{
    ++stamp_;
    faces_.clear();
    verts_.clear();
    for (int v : vertices) {
        for (int f : mesh_.vertex_faces(v)) {
            if (face_mark_[f] == stamp_) continue;
            face_mark_[f] = stamp_;
            face_pos_[f] = static_cast<int>(faces_.size());
            faces_.push_back(f);
            for (int j : mesh_.face(f))
                if (vert_mark_[j] != stamp_) {
                    vert_mark_[j] = stamp_;
                    verts_.push_back(j);
                }
        }
    }
}

double EnergyModel::local_sum(std::span<const int> faces, std::span<const int> verts,
                              const std::vector<FaceTerm>& terms) const
{
    // `terms` is parallel to `faces`; other faces use the cached state.
    double e = 0.0;
    for (std::size_t i = 0; i < faces.size(); ++i) e += terms[i].w + opt_.alpha * terms[i].n;
    for (int j : verts) {
        if (!interior_[j]) continue;
        double s = 0.0;
        for (int f : mesh_.vertex_faces(j)) {
            const Vec2* dir = &terms_[f].dir;
            if (face_mark_[f] == stamp_) dir = &terms[face_pos_[f]].dir;
            s += ops_[f].w[mesh_.corner_of(f, j)].dot(*dir);
        }
        e += opt_.alpha * vertex_term(j, s);
    }
    return e;
}

double EnergyModel::local_energy(int v) const
{
    const int one[] = {v};
    gather(one);
    scratch_terms_.clear();
    for (int f : faces_) scratch_terms_.push_back(terms_[f]);
    return local_sum(faces_, verts_, scratch_terms_);
}

double EnergyModel::local_energy_at(int v, double value) const
{
    const int one[] = {v};
    const double val[] = {value};
    return local_energy(v) + delta(one, val);
}

double EnergyModel::delta(std::span<const int> vertices, std::span<const double> values) const
{
    gather(vertices);
    scratch_terms_.clear();
    for (int f : faces_) scratch_terms_.push_back(terms_[f]);
    const double before = local_sum(faces_, verts_, scratch_terms_);
    for (std::size_t i = 0; i < vertices.size(); ++i) scratch_field_[vertices[i]] = values[i];
    for (std::size_t i = 0; i < faces_.size(); ++i) {
        const Face& t = mesh_.face(faces_[i]);
        scratch_terms_[i] = face_term(faces_[i], scratch_field_[t[0]], scratch_field_[t[1]], scratch_field_[t[2]]);
    }
    for (int v : vertices) scratch_field_[v] = field_[v];
    return local_sum(faces_, verts_, scratch_terms_) - before;
}

void EnergyModel::commit(std::span<const int> vertices, std::span<const double> values)
{
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        field_[vertices[i]] = values[i];
        scratch_field_[vertices[i]] = values[i];
    }
    gather(vertices);
    for (int f : faces_) {
        const Face& t = mesh_.face(f);
        terms_[f] = face_term(f, field_[t[0]], field_[t[1]], field_[t[2]]);
    }
}

double default_gradient_floor(const TriMesh& mesh, std::span<const double> field)
{
    const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
    return 1e-8 * (*hi - *lo) / mesh.bbox_diagonal();
}

EnergyReport evaluate_energy(const TriMesh& mesh, std::span<const double> field, const CutterSpec& cutter,
                             const EnergyOptions& options)
{
    EnergyModel model(mesh, curvature_tensor(mesh), cutter, options);
    model.set_gradient_floor(default_gradient_floor(mesh, field));
    return model.evaluate(field);
}

}  // namespace isospiral
