#include "isospiral/mesh_io.hpp"

#include "isospiral/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace isospiral {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

void add_polygon(std::vector<Face>& faces, const std::vector<int>& poly)
{
    if (poly.size() < 3) fail(ErrorKind::bad_input, "polygon with fewer than 3 vertices");
    for (std::size_t i = 1; i + 1 < poly.size(); ++i) faces.push_back({poly[0], poly[i], poly[i + 1]});
}

RawMesh read_obj(std::istream& in)
{
    RawMesh raw;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            double x = 0, y = 0, z = 0;
            if (!(ls >> x >> y >> z)) fail(ErrorKind::bad_input, "malformed OBJ vertex: " + line);
            raw.vertices.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<int> poly;
            std::string tok;
            while (ls >> tok) {
                const int idx = std::stoi(tok.substr(0, tok.find('/')));
                const int n = static_cast<int>(raw.vertices.size());
                poly.push_back(idx < 0 ? n + idx : idx - 1);
            }
            add_polygon(raw.faces, poly);
        }
    }
    return raw;
}

enum class PlyEncoding { ascii, little, big };

struct PlyProperty {
    std::string name;
    std::string type;
    bool is_list = false;
    std::string count_type;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
};

std::size_t ply_type_size(const std::string& t)
{
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    fail(ErrorKind::bad_input, "unknown PLY type " + t);
}

double read_binary_value(std::istream& in, const std::string& t, PlyEncoding enc)
{
    std::array<char, 8> buf{};
    const std::size_t n = ply_type_size(t);
    if (!in.read(buf.data(), static_cast<std::streamsize>(n))) fail(ErrorKind::bad_input, "truncated binary PLY");
    const bool native_little = std::endian::native == std::endian::little;
    if ((enc == PlyEncoding::little) != native_little) std::reverse(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n));
    auto as = [&]<typename T>(T) {
        T v;
        std::memcpy(&v, buf.data(), sizeof(T));
        return static_cast<double>(v);
    };
    if (t == "char" || t == "int8") return as(std::int8_t{});
    if (t == "uchar" || t == "uint8") return as(std::uint8_t{});
    if (t == "short" || t == "int16") return as(std::int16_t{});
    if (t == "ushort" || t == "uint16") return as(std::uint16_t{});
    if (t == "int" || t == "int32") return as(std::int32_t{});
    if (t == "uint" || t == "uint32") return as(std::uint32_t{});
    if (t == "float" || t == "float32") return as(float{});
    return as(double{});
}

RawMesh read_ply(std::istream& in)
{
    std::string line;
    std::getline(in, line);
    if (lower(line).rfind("ply", 0) != 0) fail(ErrorKind::bad_input, "missing PLY magic");
    PlyEncoding enc = PlyEncoding::ascii;
    std::vector<PlyElement> elements;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "format") {
            std::string f;
            ls >> f;
            enc = f == "ascii" ? PlyEncoding::ascii : f == "binary_big_endian" ? PlyEncoding::big : PlyEncoding::little;
        } else if (tag == "element") {
            PlyElement e;
            ls >> e.name >> e.count;
            elements.push_back(e);
        } else if (tag == "property") {
            if (elements.empty()) fail(ErrorKind::bad_input, "PLY property before element");
            PlyProperty p;
            ls >> p.type;
            if (p.type == "list") {
                p.is_list = true;
                ls >> p.count_type >> p.type;
            }
            ls >> p.name;
            elements.back().props.push_back(p);
        } else if (tag == "end_header") {
            break;
        }
    }

    RawMesh raw;
    for (const auto& e : elements) {
        for (std::size_t i = 0; i < e.count; ++i) {
            std::vector<double> scalars;
            std::vector<int> list;
            if (enc == PlyEncoding::ascii) {
                if (!std::getline(in, line)) fail(ErrorKind::bad_input, "truncated ASCII PLY");
                std::istringstream ls(line);
                for (const auto& p : e.props) {
                    if (p.is_list) {
                        std::size_t n = 0;
                        ls >> n;
                        std::vector<int> items(n);
                        for (auto& it : items) ls >> it;
                        if (p.name == "vertex_indices" || p.name == "vertex_index") list = items;
                    } else {
                        double v = 0;
                        ls >> v;
                        scalars.push_back(v);
                    }
                }
            } else {
                for (const auto& p : e.props) {
                    if (p.is_list) {
                        const auto n = static_cast<std::size_t>(read_binary_value(in, p.count_type, enc));
                        std::vector<int> items(n);
                        for (auto& it : items) it = static_cast<int>(read_binary_value(in, p.type, enc));
                        if (p.name == "vertex_indices" || p.name == "vertex_index") list = items;
                    } else {
                        scalars.push_back(read_binary_value(in, p.type, enc));
                    }
                }
            }
            if (e.name == "vertex") {
                Vec3 pos = Vec3::Zero();
                std::size_t s = 0;
                for (const auto& p : e.props) {
                    if (p.is_list) continue;
                    if (p.name == "x") pos.x() = scalars[s];
                    if (p.name == "y") pos.y() = scalars[s];
                    if (p.name == "z") pos.z() = scalars[s];
                    ++s;
                }
                raw.vertices.push_back(pos);
            } else if (e.name == "face") {
                add_polygon(raw.faces, list);
            }
        }
    }
    return raw;
}

struct Vec3Less {
    bool operator()(const Vec3& a, const Vec3& b) const
    {
        return std::tie(a.x(), a.y(), a.z()) < std::tie(b.x(), b.y(), b.z());
    }
};

RawMesh weld(const std::vector<std::array<Vec3, 3>>& soup)
{
    RawMesh raw;
    std::map<Vec3, int, Vec3Less> index;
    for (const auto& tri : soup) {
        Face f{};
        for (std::size_t k = 0; k < 3; ++k) {
            auto [it, inserted] = index.try_emplace(tri[k], static_cast<int>(raw.vertices.size()));
            if (inserted) raw.vertices.push_back(tri[k]);
            f[k] = it->second;
        }
        raw.faces.push_back(f);
    }
    return raw;
}

RawMesh read_stl(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    const auto size = fs::file_size(path);
    std::array<char, 80> header{};
    in.read(header.data(), 80);
    std::uint32_t count = 0;
    in.read(reinterpret_cast<char*>(&count), 4);
    std::vector<std::array<Vec3, 3>> soup;
    if (in && size == 84 + 50ull * count) {
        for (std::uint32_t i = 0; i < count; ++i) {
            std::array<float, 12> v{};
            std::uint16_t attr = 0;
            in.read(reinterpret_cast<char*>(v.data()), 48);
            in.read(reinterpret_cast<char*>(&attr), 2);
            if (!in) fail(ErrorKind::bad_input, "truncated binary STL");
            soup.push_back({Vec3(v[3], v[4], v[5]), Vec3(v[6], v[7], v[8]), Vec3(v[9], v[10], v[11])});
        }
        return weld(soup);
    }
    std::ifstream text(path);
    std::string tok;
    std::array<Vec3, 3> tri;
    int k = 0;
    while (text >> tok) {
        if (tok != "vertex") continue;
        double x = 0, y = 0, z = 0;
        text >> x >> y >> z;
        tri[k++] = Vec3(x, y, z);
        if (k == 3) {
            soup.push_back(tri);
            k = 0;
        }
    }
    if (soup.empty()) fail(ErrorKind::bad_input, "no facets in STL file");
    return weld(soup);
}

}  // namespace

MeshFormat format_from_extension(const fs::path& path)
{
    const auto ext = lower(path.extension().string());
    if (ext == ".obj") return MeshFormat::obj;
    if (ext == ".ply") return MeshFormat::ply;
    if (ext == ".stl") return MeshFormat::stl;
    fail(ErrorKind::bad_input, "unrecognized mesh extension '" + ext + "'");
}

RawMesh read_raw_mesh(const fs::path& path, std::optional<MeshFormat> format)
{
    if (!fs::exists(path)) fail(ErrorKind::bad_input, "mesh not found: " + path.string());
    const auto fmt = format.value_or(format_from_extension(path));
    if (fmt == MeshFormat::stl) return read_stl(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::bad_input, "cannot open " + path.string());
    return fmt == MeshFormat::obj ? read_obj(in) : read_ply(in);
}

TriMesh load_mesh(const fs::path& path, std::optional<MeshFormat> format, TopologyRequirements req)
{
    auto raw = read_raw_mesh(path, format);
    return TriMesh(std::move(raw.vertices), std::move(raw.faces), req);
}

void write_obj(const TriMesh& mesh, const fs::path& path)
{
    std::ofstream out(path);
    if (!out) fail(ErrorKind::bad_input, "cannot write " + path.string());
    out.precision(17);
    for (const auto& v : mesh.vertices()) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& f : mesh.faces()) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

void write_channel_ply(const TriMesh& mesh, const std::vector<Vec2>& positions, const fs::path& path,
                       const std::vector<double>* scalar, const std::string& comment)
{
    std::ofstream out(path);
    if (!out) fail(ErrorKind::bad_input, "cannot write " + path.string());
    out.precision(17);
    out << "ply\nformat ascii 1.0\n";
    if (!comment.empty()) out << "comment " << comment << '\n';
    out << "element vertex " << positions.size() << "\nproperty double x\nproperty double y\nproperty double z\n";
    if (scalar) out << "property double t\n";
    out << "element face " << mesh.num_faces() << "\nproperty list uchar int vertex_indices\nend_header\n";
    for (std::size_t i = 0; i < positions.size(); ++i) {
        out << positions[i].x() << ' ' << positions[i].y() << " 0";
        if (scalar) out << ' ' << (*scalar)[i];
        out << '\n';
    }
    for (const auto& f : mesh.faces()) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

}  // namespace isospiral
