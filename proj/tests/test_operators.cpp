#include <doctest.h>

#include "isospiral/generators.hpp"
#include "isospiral/operators.hpp"

#include <cmath>
#include <numeric>

using namespace isospiral;

namespace {

std::vector<double> sample(const TriMesh& mesh, auto fn)
{
    std::vector<double> out;
    for (const auto& p : mesh.vertices()) out.push_back(fn(p));
    return out;
}

}  // namespace

TEST_CASE("gradient of a linear field is exact")
{
    const TriMesh tri({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 1, 2}});
    const auto g = face_gradient(tri, {0.0, 1.0, 0.0});
    CHECK((g.grad[0] - Vec3(1, 0, 0)).norm() < 1e-15);

    const TriMesh mesh = holed_disk({Vec2::Zero(), 5.0}, {{Vec2(1.0, 0.5), 1.0}}, 0.4).build();
    const auto lin = face_gradient(mesh, sample(mesh, [](const Vec3& p) { return p.x() + 2.0 * p.y(); }));
    const auto cst = face_gradient(mesh, std::vector<double>(mesh.num_vertices(), 3.0));
    double worst = 0.0, worst_c = 0.0;
    for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
        worst = std::max(worst, (lin.grad[f] - Vec3(1, 2, 0)).norm());
        worst_c = std::max(worst_c, cst.grad[f].norm());
    }
    CHECK(worst < 1e-12);
    CHECK(worst_c == 0.0);
}

TEST_CASE("planar mesh has zero curvature")
{
    const TriMesh mesh = planar_grid(10, 10, 1.0, 1.0).build();
    const FaceFrame fr = curvature_tensor(mesh);
    for (const auto& c : fr.curvature) CHECK(c.norm() < 1e-12);
}

TEST_CASE("sphere principal curvatures match 1/R")
{
    for (int level : {3, 4}) {
        CAPTURE(level);
        const TriMesh mesh = icosphere(1.0, level).build({.planning = false});
        const FaceFrame fr = curvature_tensor(mesh);
        double lo = 1e9, hi = -1e9;
        for (const auto& c : fr.curvature) {
            const Eigen::SelfAdjointEigenSolver<Mat2> es(c);
            lo = std::min(lo, es.eigenvalues()(0));
            hi = std::max(hi, es.eigenvalues()(1));
            CHECK(std::abs(c(0, 1) - c(1, 0)) < 1e-12);
        }
        CHECK(lo > 0.95);
        CHECK(hi < 1.05);
    }
}

TEST_CASE("cylinder principal curvatures are 1/R and 0")
{
    const TriMesh mesh = open_cylinder(2.0, 6.0, 30, 96).build();
    const FaceFrame fr = curvature_tensor(mesh);
    int checked = 0;
    for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
        const Face& t = mesh.face(static_cast<int>(f));
        if (mesh.is_boundary(t[0]) || mesh.is_boundary(t[1]) || mesh.is_boundary(t[2])) continue;
        const Eigen::SelfAdjointEigenSolver<Mat2> es(fr.curvature[f]);
        CHECK(es.eigenvalues()(1) == doctest::Approx(0.5).epsilon(0.05));
        CHECK(std::abs(es.eigenvalues()(0)) < 0.025);
        ++checked;
    }
    CHECK(checked > 1000);
}

TEST_CASE("torus curvature error shrinks under refinement")
{
    const double R = 3.0, r = 1.0;
    double prev = 1e9;
    for (int n : {24, 48, 96}) {
        const TriMesh mesh = torus(R, r, n, n / 2).build({.planning = false});
        const auto k = vertex_principal_curvatures(mesh);
        double err = 0.0;
        for (int v = 0; v < static_cast<int>(mesh.num_vertices()); ++v) {
            const Vec3& p = mesh.vertex(v);
            const double cv = (std::hypot(p.x(), p.y()) - R) / r;
            const double a = 1.0 / r, b = cv / (R + r * cv);
            err = std::max({err, std::abs(k[v].x() - std::max(a, b)), std::abs(k[v].y() - std::min(a, b))});
        }
        CAPTURE(n);
        CHECK(err < 0.75 * prev);
        prev = err;
    }
}

TEST_CASE("divergence of a constant field vanishes in the interior")
{
    const TriMesh mesh = planar_grid(20, 20, 2.0, 2.0).build();
    const std::vector<Vec3> x(mesh.num_faces(), Vec3(0.6, 0.8, 0.0));
    const auto div = vertex_divergence(mesh, x);
    for (int v = 0; v < static_cast<int>(mesh.num_vertices()); ++v)
        if (!mesh.is_boundary(v)) CHECK(std::abs(div[v]) < 1e-6);

    const auto g = face_gradient(mesh, sample(mesh, [](const Vec3& p) { return p.x(); }));
    std::vector<Vec3> unit;
    for (const auto& d : g.grad) unit.push_back(d.normalized());
    const auto div2 = vertex_divergence(mesh, unit, &g.valid);
    for (int v = 0; v < static_cast<int>(mesh.num_vertices()); ++v)
        if (!mesh.is_boundary(v)) CHECK(std::abs(div2[v]) < 1e-9);
}

TEST_CASE("divergence of a radial field is 1/r")
{
    const TriMesh mesh = planar_grid(160, 160, 8.0, 8.0, -4.0, -4.0).build();
    std::vector<Vec3> x;
    for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f) {
        const Face& t = mesh.face(f);
        const Vec3 c = (mesh.vertex(t[0]) + mesh.vertex(t[1]) + mesh.vertex(t[2])) / 3.0;
        x.push_back(c.normalized());
    }
    const auto div = vertex_divergence(mesh, x);
    int found = 0;
    for (int v = 0; v < static_cast<int>(mesh.num_vertices()); ++v) {
        const double r = mesh.vertex(v).norm();
        if (std::abs(r - 2.0) > 1e-9) continue;
        CHECK(div[v] == doctest::Approx(0.5).epsilon(0.05));
        ++found;
    }
    CHECK(found >= 4);
}

TEST_CASE("area-weighted divergence sums to zero including boundary terms")
{
    const TriMesh mesh = holed_disk({Vec2::Zero(), 5.0}, {{Vec2(1.0, 0.5), 1.0}}, 0.4).build();
    std::vector<Vec3> x;
    for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f) {
        const double a = 0.37 * f;
        x.emplace_back(std::cos(a), std::sin(a), 0.0);
    }
    const auto div = vertex_divergence(mesh, x);
    double total = 0.0, scale = 0.0;
    for (std::size_t v = 0; v < div.size(); ++v) {
        total += mesh.dual_areas()[v] * div[v];
        scale += mesh.dual_areas()[v] * std::abs(div[v]);
    }
    CHECK(std::abs(total) < 1e-10 * scale);
}
