#include <doctest.h>

#include "isospiral/error.hpp"
#include "isospiral/generators.hpp"
#include "isospiral/mesh_io.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

using namespace isospiral;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / "isospiral_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_text(const fs::path& p, const std::string& text)
{
    std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("unit square loads with one boundary loop of length 4")
{
    const auto path = temp_file("square.obj");
    write_text(path, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3\nf 1/1 3/3 4/4\n");
    const TriMesh mesh = load_mesh(path);
    CHECK(mesh.num_vertices() == 4);
    CHECK(mesh.num_faces() == 2);
    REQUIRE(mesh.num_boundaries() == 1);
    CHECK(mesh.boundary_loops()[0].size() == 4);
    CHECK(mesh.loop_length(0) == doctest::Approx(4.0));
    CHECK(mesh.total_area() == doctest::Approx(1.0));
}

TEST_CASE("quad faces are fan triangulated")
{
    const auto path = temp_file("quad.obj");
    write_text(path, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
    const TriMesh mesh = load_mesh(path);
    CHECK(mesh.num_faces() == 2);
}

TEST_CASE("annulus: outer loop is the first boundary")
{
    const TriMesh mesh = polar_annulus(1.0, 2.0, 6, 48).build();
    REQUIRE(mesh.num_boundaries() == 2);
    const double r0 = mesh.vertex(mesh.boundary_loops()[0][0]).norm();
    const double r1 = mesh.vertex(mesh.boundary_loops()[1][0]).norm();
    CHECK(r0 == doctest::Approx(2.0));
    CHECK(r1 == doctest::Approx(1.0));
    CHECK(mesh.genus() == 0);
}

TEST_CASE("torus is rejected")
{
    const auto path = temp_file("torus.obj");
    write_obj(torus(3.0, 1.0, 24, 12).build({.planning = false}), path);
    try {
        (void)load_mesh(path);
        FAIL("expected rejection");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::bad_input);
        CHECK(std::string(e.what()).find("genus/boundary requirements violated") != std::string::npos);
    }
}

TEST_CASE("non-manifold edge is rejected")
{
    std::vector<Vec3> v{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, -1, 0), Vec3(0, 0, 1)};
    std::vector<Face> f{{0, 1, 2}, {1, 0, 3}, {0, 1, 4}};
    CHECK_THROWS_AS(TriMesh(v, f), Error);
}

TEST_CASE("degenerate faces above the threshold are rejected")
{
    std::vector<Vec3> v{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(1, 1, 0)};
    std::vector<Face> f{{0, 1, 3}, {1, 2, 3}, {0, 2, 1}};
    CHECK_THROWS_AS(TriMesh(v, f, {.planning = false}), Error);
}

TEST_CASE("area sums agree")
{
    const TriMesh mesh = freeform_surface(4.0).build();
    const double faces = std::accumulate(mesh.face_areas().begin(), mesh.face_areas().end(), 0.0);
    const double duals = std::accumulate(mesh.dual_areas().begin(), mesh.dual_areas().end(), 0.0);
    CHECK(faces == doctest::Approx(mesh.total_area()).epsilon(1e-12));
    CHECK(duals == doctest::Approx(mesh.total_area()).epsilon(1e-12));
}

TEST_CASE("PLY ascii and binary readers agree")
{
    const MeshData data = polar_annulus(1.0, 2.0, 3, 16);
    const auto ascii = temp_file("annulus_ascii.ply");
    {
        std::ofstream out(ascii);
        out.precision(17);
        out << "ply\nformat ascii 1.0\nelement vertex " << data.vertices.size()
            << "\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nelement face "
            << data.faces.size() << "\nproperty list uchar int vertex_indices\nend_header\n";
        for (const auto& p : data.vertices) out << p.x() << ' ' << p.y() << ' ' << p.z() << " 255\n";
        for (const auto& f : data.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    }
    const auto binary = temp_file("annulus_binary.ply");
    {
        std::ofstream out(binary, std::ios::binary);
        out << "ply\nformat binary_little_endian 1.0\nelement vertex " << data.vertices.size()
            << "\nproperty double x\nproperty double y\nproperty double z\nelement face " << data.faces.size()
            << "\nproperty list uchar int vertex_indices\nend_header\n";
        for (const auto& p : data.vertices) out.write(reinterpret_cast<const char*>(p.data()), 24);
        for (const auto& f : data.faces) {
            const std::uint8_t n = 3;
            out.write(reinterpret_cast<const char*>(&n), 1);
            out.write(reinterpret_cast<const char*>(f.data()), 12);
        }
    }
    const TriMesh a = load_mesh(ascii);
    const TriMesh b = load_mesh(binary);
    CHECK(a.num_faces() == b.num_faces());
    CHECK(a.num_boundaries() == 2);
    CHECK(b.num_boundaries() == 2);
    CHECK(a.total_area() == doctest::Approx(b.total_area()).epsilon(1e-6));
}

TEST_CASE("STL soups are welded")
{
    const MeshData data = polar_annulus(1.0, 2.0, 3, 16);
    const auto ascii = temp_file("annulus.stl");
    const auto binary = temp_file("annulus_bin.stl");
    {
        std::ofstream out(ascii);
        out.precision(17);
        out << "solid t\n";
        for (const auto& f : data.faces) {
            out << "facet normal 0 0 1\nouter loop\n";
            for (int v : f) out << "vertex " << data.vertices[v].x() << ' ' << data.vertices[v].y() << ' ' << data.vertices[v].z() << '\n';
            out << "endloop\nendfacet\n";
        }
        out << "endsolid t\n";
    }
    {
        std::ofstream out(binary, std::ios::binary);
        char header[80] = {};
        out.write(header, 80);
        const auto n = static_cast<std::uint32_t>(data.faces.size());
        out.write(reinterpret_cast<const char*>(&n), 4);
        for (const auto& f : data.faces) {
            float buf[12] = {0, 0, 1};
            for (int k = 0; k < 3; ++k)
                for (int c = 0; c < 3; ++c) buf[3 + 3 * k + c] = static_cast<float>(data.vertices[f[k]][c]);
            out.write(reinterpret_cast<const char*>(buf), 48);
            const std::uint16_t attr = 0;
            out.write(reinterpret_cast<const char*>(&attr), 2);
        }
    }
    const TriMesh a = load_mesh(ascii);
    const TriMesh b = load_mesh(binary);
    CHECK(a.num_vertices() == data.vertices.size());
    CHECK(b.num_vertices() == data.vertices.size());
    CHECK(b.num_boundaries() == 2);
}

TEST_CASE("missing file reports mesh not found")
{
    try {
        (void)load_mesh("/nonexistent/mesh.obj");
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::bad_input);
        CHECK(std::string(e.what()).find("mesh not found") != std::string::npos);
    }
}

TEST_CASE("bundled meshes are valid planning inputs")
{
    for (const auto& b : bundled_meshes()) {
        CAPTURE(b.name);
        const TriMesh mesh = b.data.build();
        CHECK(mesh.genus() == 0);
        CHECK(mesh.degenerate_faces().empty());
        if (b.name == "annulus") {
            CHECK(mesh.num_boundaries() == 2);
        } else if (b.name == "plate") {
            CHECK(mesh.num_boundaries() == 1);
            CHECK(mesh.loop_length(0) == doctest::Approx(2.0 * 3.14159265 * 30.0).epsilon(0.01));
        } else {
            CHECK(mesh.num_boundaries() == 4);
            CHECK(mesh.loop_length(0) == doctest::Approx(2.0 * 3.14159265 * 50.0).epsilon(0.05));
        }
    }
    const TriMesh threehole = threehole_disk().build();
    CHECK(threehole.num_faces() > 8000);
    CHECK(threehole.num_faces() < 12000);
}
