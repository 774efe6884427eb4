#include <doctest.h>

#include "isospiral/error.hpp"
#include "isospiral/field_init.hpp"
#include "isospiral/generators.hpp"
#include "isospiral/toolpath.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>
#include <sstream>

using namespace isospiral;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int face_nearest(const TriMesh& mesh, const Vec3& p)
{
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f) {
        const Face& t = mesh.face(f);
        const double d = ((mesh.vertex(t[0]) + mesh.vertex(t[1]) + mesh.vertex(t[2])) / 3.0 - p).norm();
        if (d < bd) {
            bd = d;
            best = f;
        }
    }
    return best;
}

double polyline_length(const std::vector<Vec3>& p, bool closed)
{
    double s = 0.0;
    for (std::size_t i = 1; i < p.size(); ++i) s += (p[i] - p[i - 1]).norm();
    if (closed && p.size() > 1) s += (p.front() - p.back()).norm();
    return s;
}

bool faces_adjacent(const TriMesh& mesh, int f, int g)
{
    if (f == g) return true;
    for (int k = 0; k < 3; ++k)
        if (mesh.neighbor(f, k) == g) return true;
    return false;
}

// Three-hole disk with S^H from the optimal radial profile.
struct Planned {
    TriMesh mesh;
    SlitDomain domain;
    double delta_T = 0.0;
};

Planned& threehole_planned()
{
    static Planned p = [] {
        Planned out{threehole_disk(2.5).build(), {}, 0.0};
        const SlitDomain dom = slit_map(out.mesh, Anchor::interior(face_nearest(out.mesh, Vec3(-20.0, -5.0, 0.0))));
        const ProfileResult pr = optimize_radial_profile(out.mesh, dom, {}, {});
        out.domain = initialize_domain(out.mesh, dom, pr.profile).domain;
        std::vector<double> t;
        for (const Vec2& q : out.mesh.channel(kDomainChannel)) t.push_back(q.norm());
        out.delta_T = level_spacing(evaluate_energy(out.mesh, t, {}, {}), 0.2);
        return out;
    }();
    return p;
}

}  // namespace

TEST_CASE("level spacing on a flat field")
{
    TriMesh mesh = planar_grid(20, 20, 10.0, 10.0).build();
    std::vector<double> t;
    for (const Vec3& p : mesh.vertices()) t.push_back(p.x());
    const EnergyReport r = evaluate_energy(mesh, t, CutterSpec{.tool_radius = 10.0}, {});
    CHECK(r.avg == doctest::Approx(0.0125).epsilon(1e-9));
    CHECK(level_spacing(r, 0.2) == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(level_spacing(r, 0.4) == doctest::Approx(4.0 * std::sqrt(2.0)).epsilon(1e-9));
    CHECK_THROWS_AS((void)level_spacing(r, 0.0), Error);
    EnergyReport bad = r;
    bad.avg = 0.0;
    CHECK_THROWS_AS((void)level_spacing(bad, 0.2), Error);
}

TEST_CASE("iso-curves of a linear field")
{
    TriMesh mesh = unit_square().build();
    TriMesh grid = planar_grid(10, 10, 1.0, 1.0).build();
    for (TriMesh* m : {&mesh, &grid}) {
        std::vector<double> t;
        for (const Vec3& p : m->vertices()) t.push_back(p.x());
        for (double level : {0.5, 0.37}) {
            const auto curves = extract_isocurves(*m, t, level);
            REQUIRE(curves.size() == 1);
            CHECK_FALSE(curves[0].closed);
            CHECK(polyline_length(curves[0].points, false) == doctest::Approx(1.0).epsilon(1e-9));
            for (std::size_t i = 0; i < curves[0].points.size(); ++i) {
                const Face& f = m->face(curves[0].faces[i]);
                const Vec3& b = curves[0].bary[i];
                CHECK((b[0] * m->vertex(f[0]) + b[1] * m->vertex(f[1]) + b[2] * m->vertex(f[2]) - curves[0].points[i]).norm() < 1e-12);
            }
        }
        CHECK(extract_isocurves(*m, t, 1.5).empty());
        CHECK(extract_isocurves(*m, t, -0.1).empty());
    }
}

TEST_CASE("boundary iso-levels reproduce the boundary loops")
{
    TriMesh mesh = polar_annulus(0.5, 1.0, 6, 40).build();
    std::vector<double> t;
    for (const Vec3& p : mesh.vertices()) t.push_back(std::round(p.head<2>().norm() * 1e12) / 1e12);
    for (std::size_t l = 0; l < 2; ++l) {
        const double level = t[mesh.boundary_loops()[l][0]];
        const auto curves = extract_isocurves(mesh, t, level);
        REQUIRE(curves.size() == 1);
        CHECK(curves[0].closed);
        CHECK(curves[0].points.size() == mesh.boundary_loops()[l].size());
        std::set<int> hit;
        for (const Vec3& p : curves[0].points)
            for (int v : mesh.boundary_loops()[l])
                if ((mesh.vertex(v) - p).norm() < 1e-12) hit.insert(v);
        CHECK(hit.size() == mesh.boundary_loops()[l].size());
    }
}

TEST_CASE("spiral on a slit-free flat annulus")
{
    TriMesh mesh = polar_annulus(0.5, 1.0, 12, 96).build();
    std::vector<Vec2> h;
    for (const Vec3& p : mesh.vertices()) h.push_back(p.head<2>());
    mesh.set_channel(kDomainChannel, h);
    SlitDomain dom;
    dom.mode = SlitMode::annulus;
    dom.anchor = Anchor::loop(1);
    const Toolpath path = synthesize_spiral(mesh, dom, 0.1);
    REQUIRE(path.points.size() > 100);
    CHECK(path.points.front().rho == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(path.points.back().rho == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(path.points.front().domain.norm() == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(path.points.back().domain.norm() == doctest::Approx(1.0).epsilon(1e-3));
    CHECK((path.points.back().phi - path.points.front().phi) / kTwoPi == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(path.points.back().turn == 5);
    double worst = 0.0;
    for (const auto& p : path.points) worst = std::max(worst, std::abs(p.rho - (0.5 + 0.1 * (p.phi - path.points.front().phi) / kTwoPi)));
    CHECK(worst < 1e-9);
    CHECK(count_self_intersections(domain_polyline(path)) == 0);
    CHECK_THROWS_AS((void)synthesize_spiral(mesh, dom, 0.6), Error);
}

TEST_CASE("spiral on the three-hole disk")
{
    Planned& p = threehole_planned();
    const Toolpath path = synthesize_spiral(p.mesh, p.domain, p.delta_T);
    REQUIRE(path.points.size() > 100);
    CHECK(count_self_intersections(domain_polyline(path)) == 0);
    for (std::size_t i = 1; i < path.points.size(); ++i) {
        CHECK(faces_adjacent(p.mesh, path.points[i - 1].face, path.points[i].face));
        CHECK(path.points[i].rho >= path.points[i - 1].rho);
        CHECK(path.points[i].phi >= path.points[i - 1].phi);
    }
    double r_out = 0.0;
    for (int v : p.mesh.boundary_loops()[0]) r_out += p.mesh.channel(kDomainChannel)[v].norm();
    r_out /= static_cast<double>(p.mesh.boundary_loops()[0].size());
    CHECK(path.points.back().rho == doctest::Approx(r_out).epsilon(1e-12));
    // Every point lies on the surface: barycentric weights reproduce the 3D position.
    for (const auto& q : path.points) {
        const Face& f = p.mesh.face(q.face);
        CHECK(q.bary.minCoeff() >= 0.0);
        CHECK((q.bary[0] * p.mesh.vertex(f[0]) + q.bary[1] * p.mesh.vertex(f[1]) + q.bary[2] * p.mesh.vertex(f[2]) - q.position).norm() < 1e-9);
    }
}

TEST_CASE("self-intersection counter")
{
    CHECK(count_self_intersections({{0, 0}, {1, 0}, {1, 1}, {0, 1}}) == 0);
    CHECK(count_self_intersections({{0, 0}, {2, 0}, {2, 1}, {1, -1}}) == 1);
    // Touching at a vertex counts.
    CHECK(count_self_intersections({{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 0}}) == 1);
    // Collinear overlap counts once.
    CHECK(count_self_intersections({{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 0}, {3, 0}}) >= 1);
    // A vertex one ulp off a segment: crossing it counts once, stopping on the near side counts nothing.
    const double e = std::ldexp(1.0, -50);
    const double above = std::nextafter(0.5 * e, 1.0);
    CHECK(count_self_intersections({{0, 0}, {1, e}, {1, 1}, {0.5, above}, {0.5, -1}}) == 1);
    CHECK(count_self_intersections({{0, 0}, {1, e}, {1, 1}, {0.5, above}}) == 0);
    CHECK(count_self_intersections({{0, 0}, {1, e}, {1, 1}, {0.5, 0.5 * e}}) == 1);
}

TEST_CASE("exports")
{
    Toolpath path;
    path.delta_T = 4.0;
    path.h_set = 0.2;
    path.cutter.tool_radius = 10.0;
    for (int i = 0; i < 3; ++i) {
        PathPoint p;
        p.position = {0.1 * i + 1.0 / 3.0, std::sqrt(2.0) * i, -i / 7.0};
        p.normal = {0.0, 0.0, 1.0};
        p.face = i;
        p.bary = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
        p.domain = {std::cos(i * 0.1), std::sin(i * 0.1)};
        p.phi = i * 0.1;
        p.rho = 1.0 + i;
        p.turn = i / 2;
        path.points.push_back(p);
    }
    const std::string g = toolpath_to_string(path, PathFormat::gcode);
    std::istringstream in(g);
    std::string line;
    int g0 = 0, g1 = 0;
    while (std::getline(in, line)) {
        g0 += line.rfind("G0 ", 0) == 0;
        g1 += line.rfind("G1 ", 0) == 0;
    }
    CHECK(g0 == 1);
    CHECK(g1 == 2);
    CHECK(g.find("G21") != std::string::npos);
    CHECK(g.find("G90") != std::string::npos);
    CHECK(g.find("(turn 1)") != std::string::npos);

    const auto dir = std::filesystem::temp_directory_path() / "isospiral_export_test";
    std::filesystem::create_directories(dir);
    for (const char* name : {"p.csv", "p.json"}) {
        export_toolpath(path, path_format_from_extension(name), dir / name);
        const Toolpath back = read_toolpath(dir / name);
        REQUIRE(back.points.size() == path.points.size());
        CHECK(back.delta_T == path.delta_T);
        CHECK(back.h_set == path.h_set);
        CHECK(back.cutter.tool_radius == path.cutter.tool_radius);
        for (std::size_t i = 0; i < path.points.size(); ++i) {
            CHECK((back.points[i].position - path.points[i].position).norm() <= 1e-12);
            CHECK((back.points[i].domain - path.points[i].domain).norm() <= 1e-12);
            CHECK(back.points[i].turn == path.points[i].turn);
            CHECK(back.points[i].face == path.points[i].face);
        }
    }
    const std::string j = toolpath_to_string(path, PathFormat::json);
    for (const char* key : {"\"delta_T\"", "\"h_set\"", "\"tool_radius\""}) CHECK(j.find(key) != std::string::npos);
    const std::string svg = toolpath_to_string(path, PathFormat::svg);
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK_THROWS_AS((void)toolpath_to_string(Toolpath{}, PathFormat::csv), Error);
    CHECK_THROWS_AS(export_toolpath(path, PathFormat::csv, dir / "missing" / "x.csv"), Error);
    std::filesystem::remove_all(dir);
}
