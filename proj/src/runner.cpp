#include "qdiff/runner.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <set>

#include "qdiff/errors.hpp"

namespace qdiff {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::map<std::string, std::map<std::string, std::string>>& kind_defaults() {
    static const std::map<std::string, std::map<std::string, std::string>> d{
        {"diffusion-constant", {{"n_traj", "100000"}, {"fit_quartic", "0"}}},
        {"fiber-scan", {{"points", "64"}}},
        {"rg-flow",
         {{"lambdas", "0.2,0.1,0.05"}, {"tau0", "1"}, {"flow_lambda", "1"}, {"levels", "6"}, {"ell", "4"}}},
        {"dyson-convergence",
         {{"order", "2"}, {"lambda_sweep", "0.2,0.1,0.05"}, {"nodes", "12"}, {"time", "2"}, {"toy_dim", "64"}}},
        {"ward-suite", {{"toy_dim", "64"}}},
        {"cluster-suite", {{"instances", "500"}, {"persistence_instances", "200"}, {"n_max", "6"}, {"kappa", "1"}}},
    };
    return d;
}

bool needs_model(const std::string& kind) {
    return kind == "diffusion-constant" || kind == "fiber-scan" || kind == "rg-flow";
}

// Keys that do not change any result.
bool hashed(const std::string& key) { return key != "out" && key != "threads" && key != "model"; }

std::string config_hash(const Config& spec) {
    Config h;
    for (const auto& [k, v] : spec.entries())
        if (hashed(k)) h.set(k, v);
    std::string text = h.dump();
    if (spec.has("model")) text += "\n" + Config::load(spec.raw("model")).dump();
    return fnv1a_hex(text);
}

double memory_estimate_mb(const Config& spec) {
    const std::string kind = spec.raw("kind");
    if (kind == "diffusion-constant") return 64 + spec.num("n_traj") * 31 * 8 / 1e6;
    if (kind == "dyson-convergence") {
        const double D = dyson_toy(0.1).dim();
        return 16 + std::pow(D, 4) * 16 * (4 * spec.num("order") + 4) / 1e6;
    }
    if (kind == "ward-suite") {
        double worst = 0;
        for (const auto& t : {ring_toy(), two_mode_toy()}) {
            const double n = double(t.dS) * t.dS;
            worst = std::max(worst, std::pow(n, 6) * 16 * 14 + std::pow(double(t.dim()), 4) * 16 * 4);
        }
        return 16 + worst / 1e6;
    }
    return 64;
}

}  // namespace

const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> k{"diffusion-constant", "fiber-scan",  "rg-flow",
                                            "dyson-convergence",  "ward-suite",  "cluster-suite"};
    return k;
}

Config resolve_spec(Config spec, const std::string& base, const RunOverrides& ov) {
    if (!spec.has("kind")) throw ConfigError("spec has no kind");
    const std::string kind = spec.raw("kind");
    auto it = kind_defaults().find(kind);
    if (it == kind_defaults().end()) throw ConfigError("unknown experiment kind '" + kind + "'");
    for (const auto& [k, v] : it->second)
        if (!spec.has(k)) spec.set(k, v);
    if (!spec.has("seed")) spec.set("seed", "1");
    if (!spec.has("threads")) spec.set("threads", "1");
    if (!spec.has("memory_mb")) spec.set("memory_mb", "4096");
    if (!spec.has("out")) spec.set("out", "runs/" + kind);

    if (ov.threads) spec.set("threads", std::to_string(*ov.threads));
    if (ov.seed) spec.set("seed", std::to_string(*ov.seed));
    if (ov.out) spec.set("out", *ov.out);
    if (ov.order) spec.set("order", std::to_string(*ov.order));
    if (ov.lambda_sweep) spec.set(kind == "rg-flow" ? "lambdas" : "lambda_sweep", *ov.lambda_sweep);
    if (ov.toy_dim) spec.set("toy_dim", std::to_string(*ov.toy_dim));

    if (spec.integer("threads", 1) < 1) throw ConfigError("threads must be positive");
    if (spec.num("seed") < 0) throw ConfigError("seed must be non-negative");
    if (needs_model(kind)) {
        if (!spec.has("model")) throw ConfigError(kind + " needs a model config");
        fs::path m = spec.raw("model");
        if (m.is_relative() && !base.empty() && fs::exists(fs::path(base) / m)) m = fs::path(base) / m;
        if (!fs::exists(m)) throw ConfigError("model config not found: " + spec.raw("model"));
        spec.set("model", fs::absolute(m).lexically_normal().string());
    }
    fs::path out = spec.raw("out");
    if (out.is_relative() && !base.empty()) out = fs::path(base) / out;
    spec.set("out", out.lexically_normal().string());
    return spec;
}

bool RunOutcome::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

RunOutcome run_experiment(const Config& spec) {
    const auto t_start = std::chrono::steady_clock::now();
    const std::string kind = spec.raw("kind");
    const double mem = memory_estimate_mb(spec);
    if (mem > spec.num("memory_mb"))
        throw ResourceCap("estimated " + fmt(mem) + " MB exceeds memory_mb = " + spec.raw("memory_mb"));

    const auto seed = static_cast<std::uint64_t>(spec.num("seed"));
    const int threads = spec.integer("threads", 1);
    Config model;
    if (spec.has("model")) model = Config::load(spec.raw("model"));

    StudyResult res;
    if (kind == "diffusion-constant") {
        DiffusionOptions o;
        o.n_traj = static_cast<std::size_t>(spec.num("n_traj"));
        o.seed = seed;
        o.threads = threads;
        o.fit_quartic = spec.integer("fit_quartic", 0) != 0;
        o.label = fs::path(spec.raw("model")).stem().string();
        res = diffusion_study(model, o);
    } else if (kind == "fiber-scan") {
        res = fiber_study(model, spec.integer("points", 64), threads);
    } else if (kind == "rg-flow") {
        res = seed_ratio_study(model, spec.list("lambdas"), spec.num("tau0"));
        res.merge(gaussian_flow_study(model, spec.integer("levels", 6), spec.num("flow_lambda"), spec.num("tau0"),
                                      spec.integer("ell", 4)));
    } else if (kind == "dyson-convergence") {
        if (dyson_toy(0.1).dim() > spec.integer("toy_dim", 64))
            throw ResourceCap("toy dimension " + std::to_string(dyson_toy(0.1).dim()) + " exceeds toy_dim");
        DysonStudyOptions o;
        o.lambdas = spec.list("lambda_sweep");
        if (o.lambdas.size() < 2) throw ConfigError("lambda_sweep needs at least two values");
        o.max_order = spec.integer("order", 2);
        if (o.max_order < 1) throw ConfigError("order must be at least 1");
        o.nodes = spec.integer("nodes", 12);
        o.t = spec.num("time");
        o.threads = threads;
        res = dyson_study(o);
    } else if (kind == "ward-suite") {
        for (const auto& t : {ring_toy(), two_mode_toy()})
            if (t.dim() > spec.integer("toy_dim", 64))
                throw ResourceCap("toy dimension " + std::to_string(t.dim()) + " exceeds toy_dim");
        res = ward_study();
        res.merge(recursion_study());
    } else {
        res = kernel_property_study(seed, spec.integer("instances", 500));
        res.merge(persistence_study(seed, spec.integer("persistence_instances", 200)));
        res.merge(cluster_study(spec.integer("n_max", 6), spec.num("kappa")));
    }

    RunOutcome out;
    out.out_dir = spec.raw("out");
    out.checks = res.checks;
    fs::create_directories(out.out_dir);
    const std::string hash = config_hash(spec);
    const std::string comment =
        "qdiff " + std::string(kVersion) + " kind=" + kind + " config=" + hash + " seed=" + spec.raw("seed");
    for (const auto& t : res.tables) {
        write_table((fs::path(out.out_dir) / (t.name + ".csv")).string(), t, comment);
        out.artifacts.push_back(t.name + ".csv");
    }
    write_checks((fs::path(out.out_dir) / "checks.csv").string(), res.checks, comment);
    out.artifacts.push_back("checks.csv");
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    json m;
    m["tool"] = "qdiff";
    m["kind"] = kind;
    m["config_hash"] = hash;
    m["seed"] = spec.raw("seed");
    m["threads"] = threads;
    m["wall_seconds"] = out.seconds;
    m["versions"] = {{"qdiff", std::string(kVersion)},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                   "." + std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__}};
    m["spec"] = spec.entries();
    if (spec.has("model")) m["model_config"] = model.entries();
    m["artifacts"] = out.artifacts;
    m["passed"] = out.passed();
    std::ofstream mf(fs::path(out.out_dir) / "manifest.json");
    if (!mf) throw ConfigError("cannot write manifest in " + out.out_dir);
    mf << std::setw(2) << m << "\n";
    return out;
}

RunOutcome run_spec_file(const std::string& path, const RunOverrides& ov) {
    if (!fs::exists(path)) throw ConfigError("spec not found: " + path);
    const std::string base = fs::absolute(path).parent_path().string();
    return run_experiment(resolve_spec(Config::load(path), base, ov));
}

std::vector<ReportRow> load_report(const std::vector<std::string>& dirs, const std::map<std::string, double>& tol) {
    std::vector<ReportRow> rows;
    std::set<std::string> used;
    for (const auto& dir : dirs) {
        const fs::path mpath = fs::path(dir) / "manifest.json";
        std::ifstream in(mpath);
        if (!in) throw MissingArtifact(mpath.string());
        json m;
        try {
            in >> m;
        } catch (const json::exception& e) {
            throw ConfigError("unreadable manifest " + mpath.string() + ": " + e.what());
        }
        for (const auto& a : m.value("artifacts", json::array()))
            if (!fs::exists(fs::path(dir) / a.get<std::string>()))
                throw MissingArtifact((fs::path(dir) / a.get<std::string>()).string());
        for (auto c : read_checks((fs::path(dir) / "checks.csv").string())) {
            for (const std::string& key : {c.criterion(), c.id}) {
                auto it = tol.find(key);
                if (it == tol.end()) continue;
                c.threshold = it->second;
                used.insert(key);
            }
            c.pass = std::isfinite(c.measured) && compare(c.measured, c.op, c.threshold);
            rows.push_back({dir, c});
        }
    }
    for (const auto& [k, v] : tol)
        if (!used.count(k)) throw ConfigError("tolerance override '" + k + "' matches no check");
    return rows;
}

void print_report(std::ostream& os, const std::vector<ReportRow>& rows) {
    std::size_t wid = 2, wname = 5;
    for (const auto& r : rows) {
        wid = std::max(wid, r.check.id.size());
        wname = std::max(wname, r.check.name.size());
    }
    os << "   " << std::left << std::setw(wid) << "id" << "  " << std::setw(wname) << "check"
       << "  " << std::setw(24) << "measured" << "  expected\n";
    int failed = 0;
    for (const auto& r : rows) {
        const auto& c = r.check;
        failed += !c.pass;
        os << (c.pass ? "✓" : "✗") << "  " << std::left << std::setw(wid) << c.id << "  "
           << std::setw(wname) << c.name << "  " << std::setw(24) << fmt(c.measured) << "  " << c.op << ' '
           << fmt(c.threshold) << "\n";
    }
    os << rows.size() - failed << "/" << rows.size() << " checks pass\n";
}

}  // namespace qdiff
