#include "isospiral/operators.hpp"

#include <cmath>
#include <iostream>

namespace isospiral {

namespace {

// Tangent basis perpendicular to n.
void basis_for(const Vec3& n, Vec3& a, Vec3& b)
{
    a = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    a = (a - a.dot(n) * n).normalized();
    b = n.cross(a);
}

// Minimal rotation taking unit vector `from` onto unit vector `to`.
Mat3 align(const Vec3& from, const Vec3& to)
{
    return Eigen::Quaterniond::FromTwoVectors(from, to).toRotationMatrix();
}

// Least-squares second fundamental form of one face from vertex normals.
Mat2 fit_face(const TriMesh& mesh, const std::vector<Vec3>& vn, int f, const Vec3& u, const Vec3& v)
{
    const Face& t = mesh.face(f);
    Eigen::Matrix<double, 6, 3> a = Eigen::Matrix<double, 6, 3>::Zero();
    Eigen::Matrix<double, 6, 1> b;
    for (int k = 0; k < 3; ++k) {
        const int i = t[(k + 1) % 3], j = t[(k + 2) % 3];
        const Vec3 e = mesh.vertex(j) - mesh.vertex(i);
        const Vec3 dn = vn[j] - vn[i];
        const double eu = e.dot(u), ev = e.dot(v);
        a.row(2 * k) << eu, ev, 0.0;
        a.row(2 * k + 1) << 0.0, eu, ev;
        b(2 * k) = dn.dot(u);
        b(2 * k + 1) = dn.dot(v);
    }
    const Vec3 x = a.colPivHouseholderQr().solve(b);
    Mat2 c;
    c << x(0), x(1), x(1), x(2);
    return c;
}

struct VertexTensors {
    std::vector<Vec3> normal;
    std::vector<Mat3> tensor;  // ambient 3x3 form, tangent to the vertex normal
};

VertexTensors vertex_tensors(const TriMesh& mesh, const FaceFrame& frames)
{
    VertexTensors vt;
    vt.normal = vertex_normals(mesh);
    const std::size_t nv = mesh.num_vertices();
    vt.tensor.assign(nv, Mat3::Zero());
    std::vector<double> weight(nv, 0.0);
    for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f) {
        if (!frames.valid[f]) continue;
        const Face& t = mesh.face(f);
        const Vec3 fu = frames.u[f];
        const Vec3 fv = frames.v[f];
        Eigen::Matrix<double, 3, 2> basis;
        basis << fu, fv;
        const Mat3 world = basis * frames.curvature[f] * basis.transpose();
        const double w = mesh.face_areas()[f] / 3.0;
        for (int vtx : t) {
            const Mat3 r = align(frames.normal[f], vt.normal[vtx]);
            vt.tensor[vtx] += w * (r * world * r.transpose());
            weight[vtx] += w;
        }
    }
    for (std::size_t i = 0; i < nv; ++i) {
        if (weight[i] <= 0.0) {
            std::cerr << "warning: vertex " << i << " has no valid umbrella; curvature set to zero\n";
            continue;
        }
        // Project back onto the tangent plane to drop normal components from the rotations.
        const Mat3 p = Mat3::Identity() - vt.normal[i] * vt.normal[i].transpose();
        vt.tensor[i] = p * (vt.tensor[i] / weight[i]) * p;
        vt.tensor[i] = 0.5 * (vt.tensor[i] + vt.tensor[i].transpose()).eval();
    }
    return vt;
}

FaceFrame fitted_frames(const TriMesh& mesh)
{
    FaceFrame fr = face_frames(mesh);
    const auto vn = vertex_normals(mesh);
    for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f)
        if (fr.valid[f]) fr.curvature[f] = fit_face(mesh, vn, f, fr.u[f], fr.v[f]);
    return fr;
}

}  // namespace

FaceFrame face_frames(const TriMesh& mesh)
{
    const std::size_t nf = mesh.num_faces();
    FaceFrame fr;
    fr.u.resize(nf);
    fr.v.resize(nf);
    fr.normal.resize(nf);
    fr.curvature.assign(nf, Mat2::Zero());
    fr.valid.assign(nf, 1);
    const double thresh = mesh.degenerate_area_threshold();
    for (int f = 0; f < static_cast<int>(nf); ++f) {
        const Face& t = mesh.face(f);
        const Vec3 e = mesh.vertex(t[1]) - mesh.vertex(t[0]);
        fr.normal[f] = face_normal(mesh, f);
        if (mesh.face_areas()[f] < thresh || e.norm() == 0.0) {
            fr.valid[f] = 0;
            basis_for(fr.normal[f].norm() > 0.0 ? fr.normal[f] : Vec3::UnitZ(), fr.u[f], fr.v[f]);
            continue;
        }
        fr.u[f] = e.normalized();
        fr.v[f] = fr.normal[f].cross(fr.u[f]);
    }
    return fr;
}

FaceFrame curvature_tensor(const TriMesh& mesh)
{
    const FaceFrame fitted = fitted_frames(mesh);
    const VertexTensors vt = vertex_tensors(mesh, fitted);
    FaceFrame fr = face_frames(mesh);
    for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f) {
        if (!fr.valid[f]) continue;
        Mat3 acc = Mat3::Zero();
        for (int vtx : mesh.face(f)) {
            const Mat3 r = align(vt.normal[vtx], fr.normal[f]);
            acc += r * vt.tensor[vtx] * r.transpose();
        }
        acc /= 3.0;
        Eigen::Matrix<double, 3, 2> basis;
        basis << fr.u[f], fr.v[f];
        Mat2 c = basis.transpose() * acc * basis;
        fr.curvature[f] = 0.5 * (c + c.transpose());
    }
    return fr;
}

std::vector<Vec2> vertex_principal_curvatures(const TriMesh& mesh)
{
    const VertexTensors vt = vertex_tensors(mesh, fitted_frames(mesh));
    std::vector<Vec2> out(mesh.num_vertices());
    for (std::size_t i = 0; i < out.size(); ++i) {
        Vec3 a, b;
        basis_for(vt.normal[i], a, b);
        Eigen::Matrix<double, 3, 2> basis;
        basis << a, b;
        const Mat2 c = basis.transpose() * vt.tensor[i] * basis;
        const Eigen::SelfAdjointEigenSolver<Mat2> es(c);
        out[i] = Vec2(es.eigenvalues()(1), es.eigenvalues()(0));
    }
    return out;
}

FaceGradients face_gradient(const TriMesh& mesh, const std::vector<double>& field)
{
    const std::size_t nf = mesh.num_faces();
    FaceGradients g;
    g.grad.assign(nf, Vec3::Zero());
    g.valid.assign(nf, 1);
    const double thresh = mesh.degenerate_area_threshold();
    for (int f = 0; f < static_cast<int>(nf); ++f) {
        const Face& t = mesh.face(f);
        const Vec3 n2 = (mesh.vertex(t[1]) - mesh.vertex(t[0])).cross(mesh.vertex(t[2]) - mesh.vertex(t[0]));
        const double area2 = n2.norm();
        if (0.5 * area2 < thresh) {
            g.valid[f] = 0;
            continue;
        }
        const Vec3 n = n2 / area2;
        const Vec3& p0 = mesh.vertex(t[0]);
        const Vec3& p1 = mesh.vertex(t[1]);
        const Vec3& p2 = mesh.vertex(t[2]);
        // Differences against corner 0 so that constant fields give an exact zero.
        const Vec3 acc = (field[t[1]] - field[t[0]]) * n.cross(p0 - p2) + (field[t[2]] - field[t[0]]) * n.cross(p1 - p0);
        g.grad[f] = acc / area2;
    }
    return g;
}

std::vector<double> vertex_divergence(const TriMesh& mesh, const std::vector<Vec3>& field, const std::vector<char>* valid,
                                      std::vector<char>* flagged)
{
    const std::size_t nv = mesh.num_vertices();
    std::vector<double> div(nv, 0.0);
    std::vector<char> touched(nv, 0);
    for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f) {
        if (valid && !(*valid)[f]) continue;
        const Face& t = mesh.face(f);
        const Vec3& x = field[f];
        std::array<double, 3> cot{};
        for (int k = 0; k < 3; ++k) {
            const Vec3 a = mesh.vertex(t[(k + 1) % 3]) - mesh.vertex(t[k]);
            const Vec3 b = mesh.vertex(t[(k + 2) % 3]) - mesh.vertex(t[k]);
            cot[k] = a.dot(b) / a.cross(b).norm();
        }
        for (int k = 0; k < 3; ++k) {
            const Vec3 e1 = mesh.vertex(t[(k + 1) % 3]) - mesh.vertex(t[k]);
            const Vec3 e2 = mesh.vertex(t[(k + 2) % 3]) - mesh.vertex(t[k]);
            div[t[k]] += cot[(k + 2) % 3] * e1.dot(x) + cot[(k + 1) % 3] * e2.dot(x);
            touched[t[k]] = 1;
        }
    }
    for (std::size_t i = 0; i < nv; ++i) div[i] = touched[i] ? div[i] / (2.0 * mesh.dual_areas()[i]) : 0.0;
    if (flagged) {
        flagged->assign(nv, 0);
        for (std::size_t i = 0; i < nv; ++i) (*flagged)[i] = !touched[i];
    }
    return div;
}

}  // namespace isospiral
