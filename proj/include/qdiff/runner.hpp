#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qdiff/config.hpp"
#include "qdiff/experiments.hpp"

namespace qdiff {

// Spec keys: kind, model, out, seed, threads, memory_mb and per-kind options.
// Command-line values override the file.
struct RunOverrides {
    std::optional<int> threads;
    std::optional<long> seed;
    std::optional<std::string> out;
    std::optional<int> order;
    std::optional<std::string> lambda_sweep;
    std::optional<int> toy_dim;
};

const std::vector<std::string>& experiment_kinds();

// Fills every default for the kind; throws ConfigError on an unknown kind or
// an unresolvable model path. `base` resolves relative model paths.
Config resolve_spec(Config spec, const std::string& base, const RunOverrides& ov = {});

struct RunOutcome {
    std::string out_dir;
    std::vector<Check> checks;
    std::vector<std::string> artifacts;
    double seconds = 0;
    bool passed() const;
};

// Writes manifest.json, checks.csv and the kind's tables into the output directory.
RunOutcome run_experiment(const Config& resolved);
RunOutcome run_spec_file(const std::string& path, const RunOverrides& ov = {});

struct ReportRow {
    std::string dir;
    Check check;
};

// Reads manifest.json and checks.csv of each run directory; MissingArtifact if
// either or any listed artifact is absent. `tol` overrides thresholds by check
// id or by criterion.
std::vector<ReportRow> load_report(const std::vector<std::string>& dirs,
                                   const std::map<std::string, double>& tol = {});
void print_report(std::ostream& os, const std::vector<ReportRow>& rows);

}  // namespace qdiff
