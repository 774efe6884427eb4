#include "isospiral/pipeline.hpp"

#include "isospiral/error.hpp"
#include "isospiral/generators.hpp"
#include "isospiral/mesh_io.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace isospiral {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    std::string out = s.substr(b, e - b + 1);
    if (out.size() >= 2 && (out.front() == '"' || out.front() == '\'') && out.back() == out.front())
        out = out.substr(1, out.size() - 2);
    return out;
}

double parse_double(const std::string& key, const std::string& value)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size() || !std::isfinite(v)) fail(ErrorKind::bad_input, key + ": not a number: " + value);
    return v;
}

int parse_int(const std::string& key, const std::string& value)
{
    const double v = parse_double(key, value);
    if (v != std::floor(v) || std::abs(v) > 1e9) fail(ErrorKind::bad_input, key + ": not an integer: " + value);
    return static_cast<int>(v);
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string mode_name(DomainMode m)
{
    switch (m) {
    case DomainMode::disk:
        return "disk";
    case DomainMode::annulus:
        return "annulus";
    case DomainMode::automatic:
        return "auto";
    }
    return "auto";
}

json vec_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

json anchor_json(const Anchor& a)
{
    json j;
    j["mode"] = a.mode == SlitMode::disk ? "disk" : "annulus";
    if (a.mode == SlitMode::disk) {
        j["face"] = a.face;
        j["bary"] = json::array({a.bary.x(), a.bary.y(), a.bary.z()});
    } else {
        j["boundary"] = a.boundary;
    }
    return j;
}

json domain_json(const SlitDomain& d)
{
    json j;
    j["mode"] = d.mode == SlitMode::disk ? "disk" : "annulus";
    j["center"] = vec_json(d.center);
    j["outer_radius"] = d.outer_radius;
    j["inner_radius"] = d.inner_radius;
    j["anchor"] = anchor_json(d.anchor);
    json slits = json::array();
    for (const Slit& s : d.slits) slits.push_back({{"boundary", s.boundary}, {"radius", s.radius}, {"phi_start", s.phi_start}, {"phi_end", s.phi_end}});
    j["slits"] = slits;
    j["untangled_vertices"] = d.untangled;
    j["untangle_shift"] = d.untangle_shift;
    return j;
}

json quality_json(const SlitQuality& q)
{
    json j;
    j["outer_radius_error"] = q.outer_radius_error;
    j["slit_spread"] = q.slit_spread;
    j["flux_residual"] = q.flux_residual;
    j["image_flux_residual"] = q.image_flux_residual;
    j["inverted_faces"] = q.inverted_faces;
    j["flagged_faces"] = q.flagged_faces.size();
    j["distortion_max"] = q.distortion.empty() ? 0.0 : *std::max_element(q.distortion.begin(), q.distortion.end());
    j["histogram_edges"] = q.histogram_edges;
    j["histogram"] = q.histogram;
    return j;
}

void write_text(const fs::path& file, const std::string& text)
{
    std::ofstream out(file, std::ios::binary);
    if (!out) fail(ErrorKind::bad_input, "cannot write " + file.string());
    out << text;
    if (!out) fail(ErrorKind::internal, "write failed: " + file.string());
}

int thread_count()
{
    if (const char* env = std::getenv("ISOSPIRAL_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

bool has_domain_coordinates(const Toolpath& path)
{
    for (const auto& p : path.points)
        if (p.domain.squaredNorm() > 0.0) return true;
    return false;
}

}  // namespace

void apply_setting(PipelineConfig& c, const std::string& raw_key, const std::string& raw_value)
{
    std::string key = trim(raw_key);
    std::replace(key.begin(), key.end(), '-', '_');
    const std::string value = trim(raw_value);
    if (key == "mesh")
        c.mesh = value;
    else if (key == "tool_radius")
        c.tool_radius = parse_double(key, value);
    else if (key == "h_set" || key == "hset")
        c.h_set = parse_double(key, value);
    else if (key == "alpha")
        c.alpha = parse_double(key, value);
    else if (key == "C" || key == "c")
        c.C = parse_double(key, value);
    else if (key == "mode") {
        if (value == "auto")
            c.mode = DomainMode::automatic;
        else if (value == "disk")
            c.mode = DomainMode::disk;
        else if (value == "annulus")
            c.mode = DomainMode::annulus;
        else
            fail(ErrorKind::bad_input, "mode must be auto, disk or annulus");
    } else if (key == "anchor_face")
        c.anchor_face = parse_int(key, value);
    else if (key == "anchor_loop")
        c.anchor_loop = parse_int(key, value);
    else if (key == "theta_seeds")
        c.theta_seeds = parse_int(key, value);
    else if (key == "init") {
        if (value == "slitmap")
            c.init = InitKind::slitmap;
        else if (value == "raw")
            c.init = InitKind::raw;
        else
            fail(ErrorKind::bad_input, "init must be slitmap or raw");
    } else if (key == "max_iterations")
        c.max_iterations = parse_int(key, value);
    else if (key == "tolerance")
        c.tolerance = parse_double(key, value);
    else if (key == "patience")
        c.patience = parse_int(key, value);
    else if (key == "max_halvings")
        c.max_halvings = parse_int(key, value);
    else if (key == "sample_density")
        c.sample_density = parse_double(key, value);
    else if (key == "feed")
        c.feed = parse_double(key, value);
    else if (key == "output")
        c.output = value;
    else
        fail(ErrorKind::bad_input, "unknown setting: " + key);
}

void read_config_file(PipelineConfig& config, const fs::path& file)
{
    std::ifstream in(file);
    if (!in) fail(ErrorKind::bad_input, "config not found: " + file.string());
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty() || trim(line).front() == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(ErrorKind::bad_input, file.string() + ":" + std::to_string(number) + ": expected key = value");
        apply_setting(config, line.substr(0, eq), line.substr(eq + 1));
    }
}

void validate(const PipelineConfig& c)
{
    if (c.mesh.empty()) fail(ErrorKind::bad_input, "no mesh given");
    if (!(c.tool_radius > 0.0)) fail(ErrorKind::bad_input, "tool_radius must be positive");
    if (!(c.h_set > 0.0 && c.h_set < c.tool_radius)) fail(ErrorKind::bad_input, "h_set must lie in (0, tool_radius)");
    if (!(c.alpha >= 0.0)) fail(ErrorKind::bad_input, "alpha must be non-negative");
    if (!(c.C > 0.5 && c.C < 1.0)) fail(ErrorKind::bad_input, "C must lie in (0.5, 1)");
    if (c.anchor_face >= 0 && c.anchor_loop >= 0) fail(ErrorKind::bad_input, "anchor_face and anchor_loop are exclusive");
    if (c.anchor_loop == 0) fail(ErrorKind::bad_input, "anchor_loop must be an inner boundary (>= 1)");
    if (c.theta_seeds < 1) fail(ErrorKind::bad_input, "theta_seeds must be at least 1");
    if (c.max_iterations < 0 || c.patience < 1 || c.max_halvings < 0) fail(ErrorKind::bad_input, "invalid optimizer limits");
    if (!(c.tolerance >= 0.0)) fail(ErrorKind::bad_input, "tolerance must be non-negative");
    if (!(c.sample_density > 0.0)) fail(ErrorKind::bad_input, "sample_density must be positive");
    if (!(c.feed > 0.0)) fail(ErrorKind::bad_input, "feed must be positive");
}

std::string canonical_config(const PipelineConfig& c)
{
    std::ostringstream out;
    out << "mesh=" << c.mesh << '\n'
        << "tool_radius=" << fmt(c.tool_radius) << '\n'
        << "h_set=" << fmt(c.h_set) << '\n'
        << "alpha=" << fmt(c.alpha) << '\n'
        << "C=" << fmt(c.C) << '\n'
        << "mode=" << mode_name(c.mode) << '\n'
        << "anchor_face=" << c.anchor_face << '\n'
        << "anchor_loop=" << c.anchor_loop << '\n'
        << "theta_seeds=" << c.theta_seeds << '\n'
        << "init=" << (c.init == InitKind::raw ? "raw" : "slitmap") << '\n'
        << "max_iterations=" << c.max_iterations << '\n'
        << "tolerance=" << fmt(c.tolerance) << '\n'
        << "patience=" << c.patience << '\n'
        << "max_halvings=" << c.max_halvings << '\n'
        << "sample_density=" << fmt(c.sample_density) << '\n'
        << "feed=" << fmt(c.feed) << '\n';
    return out.str();
}

std::string config_hash(const PipelineConfig& config)
{
    // FNV-1a, 64 bit.
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : canonical_config(config)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

TriMesh load_pipeline_mesh(const std::string& source)
{
    constexpr std::string_view prefix = "builtin:";
    if (source.rfind(prefix, 0) == 0) {
        const std::string name = source.substr(prefix.size());
        for (auto& m : bundled_meshes())
            if (m.name == name) return m.data.build();
        fail(ErrorKind::bad_input, "unknown builtin mesh: " + name);
    }
    if (!fs::exists(source)) fail(ErrorKind::bad_input, "mesh not found: " + source);
    return load_mesh(source);
}

Anchor choose_anchor(TriMesh& mesh, const PipelineConfig& c, std::optional<ThetaResult>& theta)
{
    if (c.anchor_face >= 0) {
        if (c.anchor_face >= static_cast<int>(mesh.num_faces())) fail(ErrorKind::bad_input, "anchor_face out of range");
        return Anchor::interior(c.anchor_face);
    }
    if (c.anchor_loop >= 1) {
        if (c.anchor_loop >= static_cast<int>(mesh.num_boundaries())) fail(ErrorKind::bad_input, "anchor_loop out of range");
        return Anchor::loop(c.anchor_loop);
    }
    ThetaOptions opt;
    opt.mode = c.mode;
    opt.seeds = c.theta_seeds;
    theta = search_theta(mesh, CutterSpec{.tool_radius = c.tool_radius}, EnergyOptions{.alpha = c.alpha}, opt);
    return theta->anchor;
}

json energy_json(const EnergyReport& r)
{
    return {{"E", r.E}, {"E_w", r.E_w}, {"E_n", r.E_n}, {"E_g", r.E_g}, {"E_k", r.E_k}, {"avg", r.avg}, {"alpha", r.alpha}, {"floored_faces", r.floored_faces}};
}

json evaluate_path(const TriMesh& mesh, const Toolpath& path, const CutterSpec& cutter, double h_set, double sample_density, double feed)
{
    if (path.points.empty()) fail(ErrorKind::bad_input, "toolpath is empty");
    json j;
    const PathMetrics pm = path_metrics(path);
    j["points"] = path.points.size();
    j["length"] = pm.length;
    j["smoothness"] = pm.smoothness;

    const CoverageField cov = coverage_metrics(mesh, path, cutter, h_set, {.sample_density = sample_density});
    j["coverage"] = {{"samples", cov.samples.size()}, {"ct2", cov.ct2}, {"ct2_mean", cov.ct2_mean}, {"max_ct", cov.max_ct}, {"skipped", cov.skipped}};

    const ScallopSamples sc = scallop_map(mesh, path, cutter, sample_density);
    double max_res = 0.0;
    for (std::size_t i = 0; i < sc.residual.size(); ++i)
        if (!sc.uncut[i]) max_res = std::max(max_res, sc.residual[i]);
    j["scallop"] = {{"samples", sc.samples.size()}, {"mean_msh", sc.mean_msh}, {"S_C", sc.S_C}, {"max_residual", max_res}, {"uncut", sc.uncut_count}};

    // Acceleration proxy in m/s^2 at the programmed feed, sampled every millisecond.
    const double speed = feed / 60.0, dt = 1e-3;
    std::vector<double> acc = path_acceleration(path, speed, dt);
    for (double& a : acc) a *= 1e-3;
    if (!acc.empty()) {
        const SignalMetrics s = impact_metrics(acc, dt);
        j["impact"] = {{"speed_mm_s", speed}, {"dt", dt}, {"threshold", s.threshold}, {"a_mean", s.a_mean}, {"a_var", s.a_var}, {"a_cu", s.a_cu}, {"a_tcu", s.a_tcu}};
    }
    if (has_domain_coordinates(path)) j["self_intersections"] = count_self_intersections(domain_polyline(path));
    return j;
}

PlanResult run_plan(const PipelineConfig& config, const std::optional<Anchor>& given)
{
    validate(config);
    PlanResult r{.config = config, .hash = config_hash(config), .mesh = load_pipeline_mesh(config.mesh)};
    const CutterSpec cutter{.tool_radius = config.tool_radius};
    const EnergyOptions energy{.alpha = config.alpha};
    const Anchor anchor = given ? *given : choose_anchor(r.mesh, config, r.theta);

    r.slit = slit_map(r.mesh, anchor);
    r.quality = slit_quality(r.mesh, r.slit);
    if (config.init == InitKind::slitmap) {
        const bool reuse = r.theta && r.theta->anchor.mode == anchor.mode && r.theta->anchor.face == anchor.face &&
                           r.theta->anchor.boundary == anchor.boundary;
        r.profile = reuse ? r.theta->profile.profile : optimize_radial_profile(r.mesh, r.slit, cutter, energy).profile;
        InitializedDomain init = initialize_domain(r.mesh, r.slit, r.profile);
        r.domain = init.domain;
        r.T_init = std::move(init.field);
    }
    const FaceFrame frames = curvature_tensor(r.mesh);
    if (config.init == InitKind::raw) {
        // The slit disk scaled uniformly to its lowest energy.
        const std::vector<Vec2> unit = r.mesh.channel(kSlitChannel);
        std::vector<double> rho;
        for (const Vec2& q : unit) rho.push_back(q.norm());
        EnergyModel model(r.mesh, frames, cutter, energy);
        auto energy_at = [&](double log_s) {
            std::vector<double> f(rho.size());
            for (std::size_t i = 0; i < rho.size(); ++i) f[i] = std::exp(log_s) * rho[i];
            return model.reset(std::move(f)).E;
        };
        const double diag = r.mesh.bbox_diagonal();
        const double log_s = boost::math::tools::brent_find_minima(energy_at, std::log(1e-3 * diag), std::log(1e3 * diag), 40).first;
        std::vector<Vec2> scaled = unit;
        for (Vec2& q : scaled) q *= std::exp(log_s);
        r.mesh.set_channel(kDomainChannel, scaled);
        r.domain = r.slit;
        update_slits(r.mesh, r.mesh.channel(kDomainChannel), r.domain);
        for (const Vec2& q : scaled) r.T_init.push_back(q.norm());
    }
    r.SH_init = r.mesh.channel(kDomainChannel);

    OptimizerOptions opt;
    opt.C = config.C;
    opt.max_iterations = config.max_iterations;
    opt.tolerance = config.tolerance;
    opt.patience = config.patience;
    opt.max_halvings = config.max_halvings;
    r.optimizer = optimize(r.mesh, r.domain, frames, cutter, energy, opt);
    r.T_opt = r.optimizer.field;
    update_slits(r.mesh, r.mesh.channel(kDomainChannel), r.domain);

    r.delta_T = level_spacing(r.optimizer.final, config.h_set);
    r.path = synthesize_spiral(r.mesh, r.domain, r.delta_T);
    r.path.h_set = config.h_set;
    r.path.cutter = cutter;

    json m;
    m["config_hash"] = r.hash;
    m["delta_T"] = r.delta_T;
    int turns = 0;
    for (const auto& p : r.path.points) turns = std::max(turns, p.turn);
    m["turns"] = turns;
    m["path"] = evaluate_path(r.mesh, r.path, cutter, config.h_set, config.sample_density, config.feed);
    EnergyModel model(r.mesh, frames, cutter, energy);
    (void)model.reset(r.T_opt);
    const ModeledScallop ms = modeled_scallop(model, r.T_opt, r.path);
    m["modeled_scallop"] = {{"mean", ms.mean}, {"min", ms.min}, {"max", ms.max}, {"h_set", config.h_set}};
    m["energy_initial"] = energy_json(r.optimizer.initial);
    m["energy_final"] = energy_json(r.optimizer.final);
    m["iterations"] = r.optimizer.trace.size() - 1;
    m["status"] = to_string(r.optimizer.status);
    r.metrics = std::move(m);
    return r;
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

void write_plan_artifacts(const PlanResult& r)
{
    const auto started = std::chrono::system_clock::now();
    const fs::path dir = r.config.output;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::bad_input, "cannot create output directory " + dir.string());
    const std::string tag = "config " + r.hash;
    std::vector<std::string> files;
    auto done = [&](const std::string& name) { files.push_back(name); };

    json dom;
    dom["config_hash"] = r.hash;
    dom["slit_domain"] = domain_json(r.slit);
    dom["optimized_domain"] = domain_json(r.domain);
    dom["quality"] = quality_json(r.quality);
    if (r.theta) {
        json t;
        t["E_min"] = r.theta->E_min;
        t["evaluations"] = r.theta->evaluations;
        t["accepted_steps"] = r.theta->trace.size();
        t["relocations"] = r.theta->relocations.size();
        dom["theta_search"] = t;
    }
    dom["profile"] = {{"nodes", r.profile.nodes}, {"values", r.profile.values}};
    write_text(dir / "slit_domain.json", dump_json(dom));
    done("slit_domain.json");

    write_channel_ply(r.mesh, r.mesh.channel(kSlitChannel), dir / "S_S.ply", nullptr, tag);
    done("S_S.ply");
    write_channel_ply(r.mesh, r.SH_init, dir / "T_init.ply", &r.T_init, tag);
    done("T_init.ply");
    write_channel_ply(r.mesh, r.mesh.channel(kDomainChannel), dir / "T_opt.ply", &r.T_opt, tag);
    done("T_opt.ply");

    std::ostringstream trace;
    trace << "# " << tag << '\n';
    write_trace_csv(trace, r.optimizer.trace);
    write_text(dir / "trace.csv", trace.str());
    done("trace.csv");

    const ExportOptions ex{.feed = r.config.feed, .config_hash = r.hash};
    for (const auto& [name, format] : {std::pair{"toolpath.csv", PathFormat::csv}, std::pair{"toolpath.json", PathFormat::json},
                                       std::pair{"toolpath.gcode", PathFormat::gcode}, std::pair{"toolpath.svg", PathFormat::svg}}) {
        export_toolpath(r.path, format, dir / name, ex);
        done(name);
    }

    json energy;
    energy["config_hash"] = r.hash;
    energy["initial"] = energy_json(r.optimizer.initial);
    energy["final"] = energy_json(r.optimizer.final);
    energy["iterations"] = r.optimizer.trace.size() - 1;
    energy["status"] = to_string(r.optimizer.status);
    energy["delta_T"] = r.delta_T;
    write_text(dir / "energy.json", dump_json(energy));
    done("energy.json");
    write_text(dir / "metrics.json", dump_json(r.metrics));
    done("metrics.json");
    write_text(dir / "config.txt", canonical_config(r.config));
    done("config.txt");

    double optimizer_seconds = 0.0;
    for (double s : r.optimizer.seconds) optimizer_seconds += s;
    const std::time_t now = std::chrono::system_clock::to_time_t(started);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    json manifest;
    manifest["config_hash"] = r.hash;
    manifest["written_at"] = stamp;
    manifest["optimizer_seconds"] = optimizer_seconds;
    manifest["files"] = files;
    write_text(dir / "manifest.json", dump_json(manifest));
}

std::vector<VariantRow> run_compare(const PipelineConfig& base, const std::vector<std::string>& variants)
{
    if (variants.size() < 2) fail(ErrorKind::bad_input, "need >= 2 variants");
    std::vector<PipelineConfig> configs;
    for (const std::string& v : variants) {
        PipelineConfig c = base;
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) fail(ErrorKind::bad_input, "variant entries must be key=value: " + item);
            apply_setting(c, item.substr(0, eq), item.substr(eq + 1));
        }
        validate(c);
        configs.push_back(c);
    }

    // One anchor search shared by every variant whose search settings match the base.
    std::optional<Anchor> shared;
    if (base.anchor_face < 0 && base.anchor_loop < 0) {
        TriMesh mesh = load_pipeline_mesh(base.mesh);
        std::optional<ThetaResult> theta;
        shared = choose_anchor(mesh, base, theta);
    }

    std::vector<VariantRow> rows(configs.size());
    std::mutex lock;
    std::size_t next = 0;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard g(lock);
                if (next >= configs.size()) return;
                i = next++;
            }
            VariantRow& row = rows[i];
            row.label = variants[i];
            const PipelineConfig& c = configs[i];
            const bool own_anchor = c.anchor_face >= 0 || c.anchor_loop >= 0 || c.mesh != base.mesh || c.mode != base.mode;
            const auto started = std::chrono::steady_clock::now();
            try {
                const PlanResult r = run_plan(c, own_anchor ? std::nullopt : shared);
                const json& p = r.metrics["path"];
                json v;
                v["length"] = p["length"];
                v["smoothness"] = p["smoothness"];
                v["ct2_mean"] = p["coverage"]["ct2_mean"];
                v["max_ct"] = p["coverage"]["max_ct"];
                v["S_C"] = p["scallop"]["S_C"];
                v["E"] = r.optimizer.final.E;
                v["iterations"] = r.optimizer.trace.size() - 1;
                v["status"] = to_string(r.optimizer.status);
                json trace = json::array();
                for (const auto& t : r.optimizer.trace) trace.push_back(t.E);
                v["E_trace"] = trace;
                row.values = v;
                row.ok = true;
            } catch (const std::exception& e) {
                row.error = e.what();
            }
            row.values["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        }
    };
    const int n = std::min<int>(thread_count(), static_cast<int>(configs.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return rows;
}

json compare_json(const std::vector<VariantRow>& rows)
{
    json out = json::array();
    // Reference for the initialization ablation: the final E of the first raw-initialized run.
    std::optional<double> raw_final;
    std::optional<std::size_t> raw_iterations;
    for (const auto& r : rows)
        if (r.ok && r.label.find("init=raw") != std::string::npos) {
            raw_final = r.values["E"].get<double>();
            raw_iterations = r.values["iterations"].get<std::size_t>();
            break;
        }
    for (const auto& r : rows) {
        json j;
        j["variant"] = r.label;
        j["ok"] = r.ok;
        if (!r.ok) j["error"] = r.error;
        for (const auto& [k, v] : r.values.items())
            if (k != "E_trace") j[k] = v;
        if (r.ok && raw_final) {
            const auto& trace = r.values["E_trace"];
            json reached = nullptr;
            for (std::size_t i = 0; i < trace.size(); ++i)
                if (trace[i].get<double>() <= *raw_final) {
                    reached = i;
                    break;
                }
            j["iterations_to_raw_final_E"] = reached;
            j["raw_iterations"] = *raw_iterations;
        }
        out.push_back(j);
    }
    return out;
}

}  // namespace isospiral
