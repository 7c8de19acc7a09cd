#include <CLI11.hpp>
#include <iostream>

#include "qdiff/errors.hpp"
#include "qdiff/runner.hpp"

using namespace qdiff;

namespace {

std::map<std::string, double> parse_tolerances(const std::vector<std::string>& items) {
    std::map<std::string, double> tol;
    for (const auto& s : items) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--tol expects ID=value, got '" + s + "'");
        try {
            tol[s.substr(0, eq)] = std::stod(s.substr(eq + 1));
        } catch (const std::exception&) {
            throw ConfigError("bad tolerance value in '" + s + "'");
        }
    }
    return tol;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qdiff experiment runner"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run an experiment spec");
    std::string spec;
    RunOverrides ov;
    int threads = 0, order = 0, toy_dim = 0;
    long seed = -1;
    std::string out, sweep;
    run->add_option("spec", spec, "experiment spec (key = value)")->required();
    auto* o_threads = run->add_option("--threads", threads, "worker threads");
    auto* o_seed = run->add_option("--seed", seed, "random seed");
    auto* o_out = run->add_option("--out", out, "output directory");
    auto* o_order = run->add_option("--order", order, "highest Dyson order");
    auto* o_sweep = run->add_option("--lambda-sweep", sweep, "comma separated coupling values");
    auto* o_dim = run->add_option("--toy-dim", toy_dim, "cap on the toy Hilbert space dimension");

    auto* report = app.add_subcommand("report", "summarise run directories");
    std::vector<std::string> dirs, tols;
    report->add_option("dirs", dirs, "run directories")->required();
    report->add_option("--tol", tols, "threshold override ID=value (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*run) {
            if (*o_threads) ov.threads = threads;
            if (*o_seed) ov.seed = seed;
            if (*o_out) ov.out = out;
            if (*o_order) ov.order = order;
            if (*o_sweep) ov.lambda_sweep = sweep;
            if (*o_dim) ov.toy_dim = toy_dim;
            auto res = run_spec_file(spec, ov);
            int failed = 0;
            for (const auto& c : res.checks) {
                failed += !c.pass;
                std::cout << (c.pass ? "pass " : "FAIL ") << c.id << " " << fmt(c.measured) << " " << c.op << " "
                          << fmt(c.threshold) << "\n";
            }
            std::cout << "wrote " << res.artifacts.size() << " artifacts to " << res.out_dir << " in "
                      << fmt(res.seconds) << " s\n";
            return failed ? 2 : 0;
        }
        auto rows = load_report(dirs, parse_tolerances(tols));
        print_report(std::cout, rows);
        for (const auto& r : rows)
            if (!r.check.pass) return 2;
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
