#include "isospiral/error.hpp"
#include "isospiral/generators.hpp"
#include "isospiral/mesh_io.hpp"
#include "isospiral/pipeline.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

using namespace isospiral;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::bad_input:
        return 2;
    case ErrorKind::infeasible_geometry:
        return 3;
    case ErrorKind::internal:
        return 1;
    }
    return 1;
}

const char* kind_name(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::bad_input:
        return "bad_input";
    case ErrorKind::infeasible_geometry:
        return "infeasible_geometry";
    case ErrorKind::internal:
        return "internal";
    }
    return "internal";
}

int report_error(ErrorKind kind, const std::string& message)
{
    json j;
    j["error"] = {{"kind", kind_name(kind)}, {"message", message}, {"exit_code", exit_code(kind)}};
    std::cerr << j.dump() << '\n';
    return exit_code(kind);
}

// Flags that map onto pipeline settings; values are applied after the config file.
struct SettingFlags {
    std::map<std::string, std::string> values;

    void add(CLI::App& app)
    {
        const std::pair<const char*, const char*> flags[] = {
            {"mesh", "mesh file (obj, ply, stl) or builtin:<name>"},
            {"tool-radius", "ball radius in mm"},
            {"hset", "target scallop height in mm"},
            {"alpha", "weight of the curvature terms"},
            {"C", "step constant in (0.5, 1)"},
            {"mode", "auto, disk or annulus"},
            {"anchor-face", "fixed interior anchor face"},
            {"anchor-loop", "fixed inner boundary anchor"},
            {"theta-seeds", "starts of the anchor search"},
            {"init", "slitmap or raw"},
            {"max-iterations", "optimizer iteration limit"},
            {"tolerance", "relative decrease counted as stalled"},
            {"patience", "consecutive quiet iterations before stopping"},
            {"max-halvings", "backtracking halvings per iteration"},
            {"sample-density", "metric samples per mm^2"},
            {"feed", "feed rate in mm/min"},
        };
        for (const auto& [name, help] : flags)
            app.add_option_function<std::string>(std::string("--") + name, [this, key = std::string(name)](const std::string& v) { values[key] = v; },
                                                 help);
    }

    void apply(PipelineConfig& config) const
    {
        for (const auto& [k, v] : values) apply_setting(config, k, v);
    }
};

PipelineConfig make_config(const std::string& config_file, const SettingFlags& flags, const std::string& output)
{
    PipelineConfig c;
    if (!config_file.empty()) read_config_file(c, config_file);
    flags.apply(c);
    if (!output.empty()) c.output = output;
    return c;
}

void write_json(const fs::path& file, const json& j)
{
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) fail(ErrorKind::bad_input, "cannot write " + file.string());
    out << dump_json(j);
}

// Alpha-sweep trends: as alpha decreases, length, mean CT^2 and max CT do not increase and
// smoothness does not decrease; the extreme alphas differ strictly.
std::vector<std::string> alpha_trend_violations(const json& rows)
{
    std::vector<std::pair<double, json>> sweep;
    for (const auto& r : rows) {
        const std::string label = r["variant"];
        if (!r["ok"].get<bool>() || label.rfind("alpha=", 0) != 0 || label.find(',') != std::string::npos) continue;
        sweep.emplace_back(std::stod(label.substr(6)), r);
    }
    std::sort(sweep.begin(), sweep.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::string> bad;
    if (sweep.size() < 2) return bad;
    for (std::size_t i = 1; i < sweep.size(); ++i) {
        const json& hi = sweep[i - 1].second;
        const json& lo = sweep[i].second;
        for (const char* k : {"length", "ct2_mean", "max_ct"})
            if (lo[k].get<double>() > hi[k].get<double>()) bad.push_back(std::string(k) + " increased as alpha decreased");
        if (lo["smoothness"].get<double>() < hi["smoothness"].get<double>()) bad.push_back("smoothness decreased as alpha decreased");
    }
    const json& first = sweep.front().second;
    const json& last = sweep.back().second;
    for (const char* k : {"length", "ct2_mean", "max_ct"})
        if (!(last[k].get<double>() < first[k].get<double>())) bad.push_back(std::string(k) + " not strictly smaller at the lowest alpha");
    if (!(last["smoothness"].get<double>() > first["smoothness"].get<double>())) bad.push_back("smoothness not strictly larger at the lowest alpha");
    return bad;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Spiral toolpath planning on holed surfaces"};
    app.require_subcommand(1);

    std::string config_file, output;

    auto* plan = app.add_subcommand("plan", "plan, optimize, synthesize and evaluate one configuration");
    SettingFlags plan_flags;
    plan->add_option("--config", config_file, "key = value settings file");
    plan->add_option("-o,--output", output, "output directory");
    plan_flags.add(*plan);

    auto* compare = app.add_subcommand("compare", "run several variants of one configuration");
    SettingFlags compare_flags;
    std::vector<std::string> variants;
    std::string report;
    bool enforce = false;
    compare->add_option("--config", config_file, "key = value settings file");
    compare->add_option("--variant", variants, "comma-separated key=value overrides; repeat per variant");
    compare->add_option("--report", report, "write the table as JSON");
    compare->add_flag("--enforce-trends", enforce, "fail when alpha-sweep trends are violated");
    compare_flags.add(*compare);

    auto* evaluate = app.add_subcommand("evaluate", "metrics for an external toolpath");
    SettingFlags evaluate_flags;
    std::string path_file, metrics_out;
    double tolerance = 1e-3;
    evaluate->add_option("--config", config_file, "key = value settings file");
    evaluate->add_option("--path", path_file, "toolpath csv or json")->required();
    evaluate->add_option("--metrics", metrics_out, "write metrics JSON here instead of stdout");
    evaluate->add_option("--surface-tolerance", tolerance, "distance (mm) beyond which projected points are reported");
    evaluate_flags.add(*evaluate);

    auto* generate = app.add_subcommand("generate", "write the bundled fixture meshes as OBJ");
    std::string mesh_dir = "data";
    generate->add_option("-o,--output", mesh_dir, "target directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error(ErrorKind::bad_input, e.what());
    }

    try {
        if (*plan) {
            const PipelineConfig c = make_config(config_file, plan_flags, output);
            const PlanResult r = run_plan(c);
            write_plan_artifacts(r);
            const json& m = r.metrics;
            std::cout << "config " << r.hash << "  status " << m["status"].get<std::string>() << "  iterations " << m["iterations"]
                      << "  E " << r.optimizer.initial.E << " -> " << r.optimizer.final.E << "\n"
                      << "delta_T " << r.delta_T << "  turns " << m["turns"] << "  points " << r.path.points.size() << "  length "
                      << m["path"]["length"] << "\nartifacts in " << c.output << '\n';
        } else if (*compare) {
            const PipelineConfig c = make_config(config_file, compare_flags, "");
            validate(c);
            const auto rows = run_compare(c, variants);
            const json table = compare_json(rows);
            if (!report.empty()) write_json(report, table);
            std::printf("%-28s %12s %12s %10s %6s %12s %14s %6s %9s\n", "variant", "length", "smoothness", "ct2_mean", "maxCT", "S_C", "E", "iters",
                        "seconds");
            for (const auto& r : table) {
                if (!r["ok"].get<bool>()) {
                    std::printf("%-28s failed: %s\n", r["variant"].get<std::string>().c_str(), r["error"].get<std::string>().c_str());
                    continue;
                }
                std::printf("%-28s %12.4f %12.6f %10.4f %6d %12.4e %14.6e %6d %9.2f\n", r["variant"].get<std::string>().c_str(),
                            r["length"].get<double>(), r["smoothness"].get<double>(), r["ct2_mean"].get<double>(), r["max_ct"].get<int>(),
                            r["S_C"].get<double>(), r["E"].get<double>(), r["iterations"].get<int>(), r["wall_seconds"].get<double>());
            }
            bool failed = false;
            for (const auto& r : table) failed = failed || !r["ok"].get<bool>();
            if (enforce) {
                const auto bad = alpha_trend_violations(table);
                for (const auto& b : bad) std::cout << "trend violated: " << b << '\n';
                if (!bad.empty()) return report_error(ErrorKind::internal, "alpha-sweep trends violated");
            }
            if (failed) return report_error(ErrorKind::internal, "some variants failed");
        } else if (*evaluate) {
            const PipelineConfig c = make_config(config_file, evaluate_flags, "");
            validate(c);
            const TriMesh mesh = load_pipeline_mesh(c.mesh);
            Toolpath path = read_toolpath(path_file);
            if (path.points.empty()) fail(ErrorKind::bad_input, "toolpath is empty");
            bool on_surface = true;
            for (const auto& p : path.points) {
                if (p.face < 0 || p.face >= static_cast<int>(mesh.num_faces()) || !(p.normal.squaredNorm() > 0.0)) {
                    on_surface = false;
                    break;
                }
                const Face& f = mesh.face(p.face);
                const Vec3 q = p.bary[0] * mesh.vertex(f[0]) + p.bary[1] * mesh.vertex(f[1]) + p.bary[2] * mesh.vertex(f[2]);
                if ((q - p.position).norm() > tolerance) {
                    on_surface = false;
                    break;
                }
            }
            json warnings = json::array();
            if (!on_surface) {
                const std::vector<double> moved = project_to_surface(mesh, path);
                for (std::size_t i = 0; i < moved.size(); ++i)
                    if (moved[i] > tolerance) warnings.push_back({{"point", i}, {"distance", moved[i]}});
                if (!warnings.empty()) std::cerr << warnings.size() << " points were more than " << tolerance << " mm off the surface\n";
            }
            const CutterSpec cutter{.tool_radius = c.tool_radius};
            if (path.cutter.tool_radius != c.tool_radius) path.cutter = cutter;
            json out;
            out["config_hash"] = config_hash(c);
            out["path"] = evaluate_path(mesh, path, cutter, c.h_set, c.sample_density, c.feed);
            out["projected"] = !on_surface;
            out["off_surface"] = warnings;
            if (metrics_out.empty())
                std::cout << dump_json(out);
            else
                write_json(metrics_out, out);
        } else if (*generate) {
            fs::create_directories(mesh_dir);
            for (const auto& m : bundled_meshes()) {
                const fs::path file = fs::path(mesh_dir) / (m.name + ".obj");
                write_obj(m.data.build(), file);
                std::cout << file.string() << '\n';
            }
        }
    } catch (const Error& e) {
        return report_error(e.kind(), e.what());
    } catch (const std::exception& e) {
        return report_error(ErrorKind::internal, e.what());
    }
    return 0;
}
