#include <doctest.h>

#include "isospiral/error.hpp"
#include "isospiral/field_init.hpp"
#include "isospiral/generators.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace isospiral;

namespace {

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

}  // namespace

TEST_CASE("flat annulus: the optimal profile is linear")
{
    TriMesh mesh = flat_annulus_fixture().build();
    const SlitDomain dom = slit_map(mesh, Anchor::loop(1));
    EnergyModel model(mesh, curvature_tensor(mesh), {}, {});
    const ProfileResult r = optimize_radial_profile(model, mesh.channel(kSlitChannel), dom);
    const auto& x = r.profile.nodes;
    const auto& f = r.profile.values;
    CHECK(r.profile.strictly_increasing());
    CHECK(f.front() == doctest::Approx(dom.inner_radius));

    // Least-squares line through the nodes.
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += f[i];
        sxx += x[i] * x[i];
        sxy += x[i] * f[i];
    }
    const double b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double a = (sy - b * sx) / n;
    double dev = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dev = std::max(dev, std::abs(f[i] - (a + b * x[i])));
    CHECK(dev < 0.01 * (f.back() - f.front()));

    // Random monotone profiles do no better.
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> jitter(0.8, 1.25);
    for (int trial = 0; trial < 20; ++trial) {
        RadialProfile p = r.profile;
        for (std::size_t i = 1; i < p.values.size(); ++i)
            p.values[i] = p.values[i - 1] + (r.profile.values[i] - r.profile.values[i - 1]) * jitter(rng);
        CHECK(model.evaluate(profile_field(p, mesh.channel(kSlitChannel))).E >= r.report.E);
    }
}

TEST_CASE("profile optimization keeps monotonicity and never increases E")
{
    TriMesh mesh = threehole_disk(2.5).build();
    const SlitDomain dom = slit_map(mesh, Anchor::interior(face_nearest(mesh, Vec3(-20.0, -5.0, 0.0))));
    const ProfileResult r = optimize_radial_profile(mesh, dom, {}, {});
    CHECK(r.profile.strictly_increasing());
    CHECK(r.profile.values.front() == 0.0);
    REQUIRE(r.trace.size() >= 2);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1] * (1.0 + 1e-12));
    CHECK(r.report.E < r.trace.front());
    CHECK(r.accepted > 0);
}

TEST_CASE("annulus anchor beats interior anchors on a symmetric annulus")
{
    TriMesh mesh = flat_annulus_fixture().build();
    const FaceFrame frames = curvature_tensor(mesh);
    const ProfileOptions opt{.nodes = 16, .tolerance = 1e-4};
    const double annulus = theta_energy(mesh, Anchor::loop(1), frames, {}, {}, opt);
    CHECK(std::isfinite(annulus));
    for (double r : {22.0, 27.5, 33.0})
        for (double a : {0.3, 2.0, 4.1}) {
            const double disk = theta_energy(mesh, Anchor::interior(face_nearest(mesh, Vec3(r * std::cos(a), r * std::sin(a), 0.0))),
                                             frames, {}, {}, opt);
            CHECK(annulus <= disk);
        }
}

TEST_CASE("descent never accepts an increase and relocates onto offset curves")
{
    const TriMesh mesh = threehole_disk(2.5).build();
    const double h = mesh.average_edge_length();
    ThetaOptions opt;
    opt.seeds = 3;
    opt.max_iterations = 4;
    opt.initial_step = 0.1;
    // Start between the two upper holes, close enough that some steps cross them.
    const Anchor start = Anchor::interior(face_nearest(mesh, Vec3(2.0, 14.0, 0.0)));
    const ThetaResult r = descend_theta(mesh, start, {}, {}, opt);
    REQUIRE(!r.trace.empty());
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].E_min < r.trace[i - 1].E_min);
    CHECK(r.E_min <= r.trace.front().E_min);
    REQUIRE(!r.relocations.empty());
    for (const ThetaStep& s : r.relocations) {
        CHECK(s.relocated_from >= 1);
        const auto curve = offset_curve(mesh, s.relocated_from, opt.offset_fraction * h);
        CHECK(std::find(curve.begin(), curve.end(), s.anchor.face) != curve.end());
    }
}

TEST_CASE("initialized domain")
{
    TriMesh mesh = threehole_disk(2.5).build();
    const SlitDomain dom = slit_map(mesh, Anchor::interior(face_nearest(mesh, Vec3(-20.0, -5.0, 0.0))));
    const auto& s = mesh.channel(kSlitChannel);

    SUBCASE("identity profile reproduces S^S")
    {
        const InitializedDomain init = initialize_domain(mesh, dom, RadialProfile::linear(0.0, 0.0, 1.0, 64));
        const auto& h = mesh.channel(kDomainChannel);
        for (std::size_t i = 0; i < s.size(); ++i) CHECK((h[i] - s[i]).norm() <= 1e-15);
        CHECK(init.domain.outer_radius == doctest::Approx(1.0));
    }

    SUBCASE("optimized profile keeps the embedding and boundary circles")
    {
        const ProfileResult pr = optimize_radial_profile(mesh, dom, {}, {});
        const InitializedDomain init = initialize_domain(mesh, dom, pr.profile);
        const auto& h = mesh.channel(kDomainChannel);
        CHECK(count_inverted_faces(mesh, h) == 0);
        for (const auto& loop : mesh.boundary_loops()) {
            double lo = 1e300, hi = 0.0;
            for (int v : loop) {
                lo = std::min(lo, h[v].norm());
                hi = std::max(hi, h[v].norm());
            }
            CHECK((hi - lo) / hi < 1e-9);
        }
        for (std::size_t i = 0; i < h.size(); ++i) CHECK(init.field[i] == h[i].norm());
        // No interior critical points away from the pole: every one-ring has larger and smaller values.
        const Face& pole = mesh.face(dom.anchor.face);
        for (int v = 0; v < static_cast<int>(mesh.num_vertices()); ++v) {
            if (mesh.is_boundary(v) || std::find(pole.begin(), pole.end(), v) != pole.end()) continue;
            bool above = false, below = false;
            for (int u : mesh.vertex_neighbors(v)) {
                above |= init.field[u] > init.field[v];
                below |= init.field[u] < init.field[v];
            }
            CHECK((above && below));
        }
        CHECK(pr.report.E <= pr.trace.front());
    }

    SUBCASE("non-monotone profile is rejected")
    {
        RadialProfile p = RadialProfile::linear(0.0, 0.0, 1.0, 8);
        p.values[4] = p.values[2];
        CHECK_THROWS_AS(initialize_domain(mesh, dom, p), Error);
    }
}
