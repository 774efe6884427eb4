#include <doctest.h>

#include "isospiral/error.hpp"
#include "isospiral/generators.hpp"
#include "isospiral/metrics.hpp"
#include "isospiral/operators.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace isospiral;

namespace {

constexpr double kPi = std::numbers::pi;

PathPoint flat_point(double x, double y, double z = 0.0)
{
    PathPoint p;
    p.position = {x, y, z};
    p.normal = {0, 0, 1};
    return p;
}

Toolpath line_path(const std::vector<Vec3>& pts)
{
    Toolpath t;
    for (const Vec3& p : pts) t.points.push_back(flat_point(p.x(), p.y(), p.z()));
    return t;
}

// Passes along x at the given y values, joined far outside the sampled window.
Toolpath parallel_passes(const std::vector<double>& ys, double x0, double x1, int n)
{
    Toolpath t;
    for (std::size_t k = 0; k < ys.size(); ++k)
        for (int i = 0; i <= n; ++i) {
            const double s = static_cast<double>(i) / n;
            const double x = k % 2 == 0 ? x0 + s * (x1 - x0) : x1 - s * (x1 - x0);
            t.points.push_back(flat_point(x, ys[k]));
        }
    return t;
}

}  // namespace

TEST_CASE("circle length and smoothness")
{
    std::vector<Vec3> p;
    const int n = 1000;
    for (int i = 0; i <= n; ++i) {
        const double a = 2.0 * kPi * i / n;
        p.emplace_back(2.0 * std::cos(a), 2.0 * std::sin(a), 0.0);
    }
    const PathMetrics m = path_metrics(p);
    CHECK(m.length == doctest::Approx(4.0 * kPi).epsilon(1e-3));
    CHECK(m.smoothness == doctest::Approx(kPi).epsilon(1e-2));

    const PathMetrics line = path_metrics(std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}, {1, 0, 0}, {3, 0, 0}});
    CHECK(line.length == doctest::Approx(3.0));
    CHECK(line.smoothness == 0.0);
    CHECK(line.points == 3);
    CHECK_THROWS_AS((void)path_metrics(std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}}), Error);
}

TEST_CASE("circumcircle curvature")
{
    CHECK(circumcircle_curvature({1, 0, 0}, {0, 1, 0}, {-1, 0, 0}) == doctest::Approx(1.0));
    CHECK(circumcircle_curvature({0, 0, 0}, {1, 0, 0}, {2, 0, 0}) == 0.0);
    CHECK(circumcircle_curvature({0, 0, 0}, {0, 0, 0}, {2, 0, 0}) == 0.0);
}

TEST_CASE("surface samples cover the area")
{
    const TriMesh mesh = planar_grid(10, 10, 20.0, 20.0).build();
    for (double density : {0.5, 1.0, 4.0}) {
        const auto s = surface_samples(mesh, density);
        double area = 0.0;
        for (const auto& q : s) {
            area += q.area;
            CHECK(q.point.x() > 0.0);
            CHECK(q.point.x() < 20.0);
        }
        CHECK(area == doctest::Approx(400.0));
        CHECK(static_cast<double>(s.size()) >= density * 400.0);
    }
    const auto lifted = surface_samples(mesh, 1.0, 0.25);
    for (const auto& q : lifted) CHECK(q.point.z() == doctest::Approx(0.25));
    CHECK_THROWS_AS((void)surface_samples(mesh, 0.0), Error);
}

TEST_CASE("single straight pass covers a strip once")
{
    const TriMesh mesh = planar_grid(40, 40, 40.0, 40.0, -20.0, -20.0).build();
    const CutterSpec cutter{.tool_radius = 10.0};
    const double h = 0.2;
    const Toolpath path = line_path({{-40, 0, 0}, {40, 0, 0}});
    const CoverageField cov = coverage_metrics(mesh, path, cutter, h, {.sample_density = 16.0});
    // Ball centres sit at height r, so S^h is hit within sqrt(r^2 - (r - h)^2) of the line.
    const double half = std::sqrt(10.0 * 10.0 - 9.8 * 9.8);
    double width_area = 0.0;
    for (std::size_t i = 0; i < cov.samples.size(); ++i) {
        CHECK(cov.counts[i] <= 1);
        if (cov.counts[i] == 1) width_area += cov.samples[i].area;
    }
    CHECK(2.0 * half == doctest::Approx(3.980).epsilon(1e-3));
    CHECK(width_area / 40.0 == doctest::Approx(2.0 * half).epsilon(1e-2));
    CHECK(cov.max_ct == 1);
    CHECK(cov.ct2 == doctest::Approx(width_area));

    const CoverageField none = coverage_metrics(mesh, Toolpath{}, cutter, h);
    CHECK(none.max_ct == 0);
    CHECK(none.ct2 == 0.0);
    CHECK_THROWS_AS((void)coverage_metrics(mesh, path, cutter, 12.0), Error);
}

TEST_CASE("coincident passes count twice")
{
    const TriMesh mesh = planar_grid(20, 20, 20.0, 20.0, -10.0, -10.0).build();
    const CutterSpec cutter{.tool_radius = 10.0};
    const Toolpath there_and_back = line_path({{-30, 0, 0}, {30, 0, 0}, {-30, 0, 0}});
    const CoverageField cov = coverage_metrics(mesh, there_and_back, cutter, 0.2, {.sample_density = 4.0});
    CHECK(cov.max_ct == 2);
    for (std::size_t i = 0; i < cov.samples.size(); ++i)
        if (std::abs(cov.samples[i].point.y()) < 1.5) CHECK(cov.counts[i] == 2);
}

TEST_CASE("spiral coordinates split passes by angle and level")
{
    const TriMesh mesh = planar_grid(4, 4, 2.0, 2.0, -1.0, -1.0).build();
    const CutterSpec cutter{.tool_radius = 10.0};
    Toolpath path;
    path.delta_T = 1.0;
    // A dense run along x whose spiral angle jumps by 2 pi halfway.
    for (int i = 0; i <= 200; ++i) {
        PathPoint p = flat_point(-5.0 + 10.0 * i / 200.0, 0.0);
        p.phi = i < 100 ? 0.001 * i : 2.0 * kPi + 0.001 * i;
        p.rho = p.phi / (2.0 * kPi);
        path.points.push_back(p);
    }
    const CoverageField cov = coverage_metrics(mesh, path, cutter, 0.2);
    CHECK(cov.max_ct == 2);
    CoverageOptions wide;
    wide.pass_angle = 10.0;
    path.delta_T = 4.0;
    CHECK(coverage_metrics(mesh, path, cutter, 0.2, wide).max_ct == 1);
}

TEST_CASE("two parallel passes leave the textbook scallop")
{
    const double r = 5.0, d = 0.4;
    CHECK(two_pass_scallop(r, d) == doctest::Approx(0.004002).epsilon(1e-5 / 0.004002));
    const Toolpath path = parallel_passes({0.0, d}, -20.0, 20.0, 400);
    const CutterSpec cutter{.tool_radius = r};
    const double mid = envelope_residual(path, cutter, {0.0, d / 2, 0.0}, {0, 0, 1});
    CHECK(mid == doctest::Approx(0.004002).epsilon(1e-5 / 0.004002));
    CHECK(envelope_residual(path, cutter, {0.0, 0.0, 0.0}, {0, 0, 1}) == doctest::Approx(0.0));
    CHECK(envelope_residual(path, cutter, {0.0, 30.0, 0.0}, {0, 0, 1}) < 0.0);
    // The quadratic model agrees within 2%.
    CHECK(d * d / (8.0 * r) == doctest::Approx(mid).epsilon(0.02));
}

TEST_CASE("scallop model on a sphere")
{
    // Two latitude circles on a sphere of radius R, a geodesic distance d apart.
    const double R = 50.0, r = 5.0, d = 1.0;
    const double theta = kPi / 4.0, alpha = d / R;
    Toolpath path;
    for (double th : {theta - alpha / 2.0, theta + alpha / 2.0}) {
        const int n = 4000;
        const double start = path.points.empty() ? kPi : 3.0 * kPi;
        for (int i = 0; i <= n; ++i) {
            const double ph = start + 2.0 * kPi * i / n;
            PathPoint p;
            p.normal = {std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
            p.position = R * p.normal;
            path.points.push_back(p);
        }
    }
    const Vec3 n{std::sin(theta), 0.0, std::cos(theta)};
    const double h = envelope_residual(path, {.tool_radius = r}, R * n, n);
    const double model = d * d * (1.0 / R + 1.0 / r) / 8.0;
    CHECK(h > 0.0);
    CHECK(model == doctest::Approx(h).epsilon(0.02));
}

TEST_CASE("modeled scallop on a plane uses the energy model")
{
    const TriMesh mesh = planar_grid(10, 10, 10.0, 10.0).build();
    std::vector<double> field(mesh.num_vertices());
    for (std::size_t v = 0; v < field.size(); ++v) field[v] = 2.0 * mesh.vertex(static_cast<int>(v)).x();
    const CutterSpec cutter{.tool_radius = 5.0};
    EnergyModel model(mesh, curvature_tensor(mesh), cutter, {});
    (void)model.reset(field);
    Toolpath path;
    path.delta_T = 0.8;  // 0.4 mm apart on the surface
    for (int i = 0; i <= 10; ++i) {
        PathPoint p = flat_point(5.0, 0.5 + 0.9 * i);
        p.face = 0;
        path.points.push_back(p);
    }
    for (auto& p : path.points) {
        Toolpath probe;
        probe.points = {p};
        const std::vector<double> moved = project_to_surface(mesh, probe);
        CHECK(moved[0] == doctest::Approx(0.0));
        p.face = probe.points[0].face;
    }
    const ModeledScallop m = modeled_scallop(model, field, path);
    CHECK(m.mean == doctest::Approx(0.004).epsilon(1e-9));
    CHECK(m.min == doctest::Approx(0.004));
    CHECK(m.max == doctest::Approx(0.004));
    CHECK(m.mean == doctest::Approx(two_pass_scallop(5.0, 0.4)).epsilon(0.02));
}

TEST_CASE("scallop map over a raster")
{
    const TriMesh mesh = planar_grid(20, 20, 10.0, 10.0).build();
    const CutterSpec cutter{.tool_radius = 5.0};
    // Centroid samples sit at y = 0.5 j + 1/6 and 0.5 j + 1/3; put a scallop peak on each 1/6 row.
    const double d = 0.5;
    std::vector<double> ys;
    for (double y = 1.0 / 6.0 - 0.25 - 2.0; y <= 12.0; y += d) ys.push_back(y);
    const Toolpath path = parallel_passes(ys, -10.0, 20.0, 300);
    const ScallopSamples s = scallop_map(mesh, path, cutter, 4.0);
    const double peak = two_pass_scallop(5.0, d);
    CHECK(s.uncut_count == 0);
    for (double v : s.residual) CHECK(v <= peak + 1e-12);
    for (double v : s.msh) CHECK(v == doctest::Approx(peak).epsilon(1e-9));
    CHECK(s.S_C < 1e-20);

    // msh and S_C follow their definitions on an irregular raster.
    const Toolpath uneven = parallel_passes({-1.0, -0.3, 0.6, 1.0, 1.9, 2.2, 3.0, 3.7, 4.1, 5.0, 5.6, 6.4, 7.0, 7.9, 8.5, 9.2, 10.0, 10.8},
                                            -10.0, 20.0, 300);
    const ScallopSamples u = scallop_map(mesh, uneven, cutter, 2.0);
    REQUIRE(u.uncut_count == 0);
    double mean = 0.0;
    for (std::size_t i = 0; i < u.samples.size(); i += 7) {
        double best = 0.0;
        for (std::size_t j = 0; j < u.samples.size(); ++j)
            if ((u.samples[j].point - u.samples[i].point).norm() <= 5.0) best = std::max(best, u.residual[j]);
        CHECK(u.msh[i] == best);
    }
    for (double v : u.msh) mean += v;
    mean /= static_cast<double>(u.msh.size());
    double var = 0.0;
    for (double v : u.msh) var += (v - mean) * (v - mean);
    CHECK(u.S_C == doctest::Approx(var / static_cast<double>(u.msh.size())));
    CHECK(u.S_C > 0.0);

    const Toolpath single = line_path({{-10, 0, 0}, {20, 0, 0}});
    const ScallopSamples far = scallop_map(mesh, single, cutter, 1.0);
    CHECK(far.uncut_count > 0);
    CHECK(far.uncut_count < far.samples.size());
    CHECK_THROWS_AS((void)scallop_map(mesh, Toolpath{}, cutter, 1.0), Error);
}

TEST_CASE("impact metrics")
{
    const double dt = 0.01;
    const std::vector<double> low(1000, 0.04);
    const SignalMetrics a = impact_metrics(low, dt);
    CHECK(a.a_cu == doctest::Approx(0.016));
    CHECK(a.a_tcu == 0.0);
    CHECK(a.a_mean == doctest::Approx(0.04));
    CHECK(a.a_var == doctest::Approx(0.0));

    const std::vector<double> high(200, 0.1);
    const SignalMetrics b = impact_metrics(high, dt);
    CHECK(b.a_cu == doctest::Approx(0.02));
    CHECK(b.a_tcu == doctest::Approx(0.02));

    const std::vector<double> at(100, 0.05);
    CHECK(impact_metrics(at, dt).a_tcu == 0.0);

    const std::vector<double> one{0.3};
    CHECK(impact_metrics(one, dt).a_var == 0.0);
    CHECK_THROWS_AS((void)impact_metrics(std::vector<double>{}, dt), Error);
    CHECK_THROWS_AS((void)impact_metrics(one, 0.0), Error);
}

TEST_CASE("impact metric properties on random signals")
{
    std::mt19937 rng(7);
    std::normal_distribution<double> g(0.0, 0.08);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> s(500);
        for (double& v : s) v = g(rng);
        const SignalMetrics m = impact_metrics(s, 0.002);
        CHECK(m.a_tcu <= m.a_cu);
        CHECK(m.a_var >= 0.0);
        std::vector<double> twice(s);
        for (double& v : twice) v *= 2.0;
        CHECK(impact_metrics(twice, 0.002, 2.0 * m.threshold).a_cu == doctest::Approx(4.0 * m.a_cu));
        CHECK(impact_metrics(twice, 0.002, 2.0 * m.threshold).a_tcu == doctest::Approx(4.0 * m.a_tcu));
    }
}

TEST_CASE("constant speed acceleration")
{
    const Toolpath straight = line_path({{0, 0, 0}, {50, 0, 0}, {100, 0, 0}});
    for (double a : path_acceleration(straight, 10.0, 0.01)) CHECK(a == doctest::Approx(0.0).epsilon(1e-9));

    // Circle of radius R at speed v: centripetal v^2 / R.
    Toolpath circle;
    const double R = 20.0, v = 10.0;
    for (int i = 0; i <= 20000; ++i) {
        const double t = 2.0 * kPi * i / 20000;
        circle.points.push_back(flat_point(R * std::cos(t), R * std::sin(t)));
    }
    const auto acc = path_acceleration(circle, v, 0.05);
    REQUIRE(acc.size() > 100);
    for (std::size_t i = 0; i < acc.size(); i += 37) CHECK(acc[i] == doctest::Approx(v * v / R).epsilon(1e-2));
}

TEST_CASE("projection onto a surface")
{
    const TriMesh mesh = icosphere(10.0, 3).build({.planning = false});
    Toolpath path;
    std::mt19937 rng(3);
    std::normal_distribution<double> g;
    for (int i = 0; i < 50; ++i) {
        Vec3 dir(g(rng), g(rng), g(rng));
        dir.normalize();
        path.points.push_back(flat_point(11.0 * dir.x(), 11.0 * dir.y(), 11.0 * dir.z()));
    }
    std::vector<Vec3> original;
    for (const auto& p : path.points) original.push_back(p.position);
    const auto moved = project_to_surface(mesh, path);
    for (std::size_t i = 0; i < moved.size(); ++i) {
        const auto& p = path.points[i];
        CHECK(moved[i] >= 1.0 - 1e-9);
        CHECK(moved[i] < 1.1);
        const Face& t = mesh.face(p.face);
        const Vec3 back = p.bary[0] * mesh.vertex(t[0]) + p.bary[1] * mesh.vertex(t[1]) + p.bary[2] * mesh.vertex(t[2]);
        CHECK((back - p.position).norm() < 1e-9);
        CHECK(p.normal.dot(p.position.normalized()) > 0.99);
        double nearest_vertex = 1e300;
        for (const Vec3& q : mesh.vertices()) nearest_vertex = std::min(nearest_vertex, (q - original[i]).norm());
        CHECK((p.position - original[i]).norm() == doctest::Approx(moved[i]));
        CHECK(moved[i] <= nearest_vertex + 1e-12);
    }
}
