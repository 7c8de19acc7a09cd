#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qdiff/config.hpp"
#include "qdiff/dyson.hpp"

namespace qdiff {

inline constexpr const char* kVersion = "0.1.0";

// One acceptance check. Ids look like "C4" or "C4.monotone"; the part before
// the dot names the criterion.
struct Check {
    std::string id;
    std::string name;
    double measured = 0;
    std::string op;  // "<", "<=", ">", ">=", "=="
    double threshold = 0;
    bool pass = false;
    std::string detail;

    std::string criterion() const { return id.substr(0, id.find('.')); }
};

Check make_check(std::string id, std::string name, double measured, std::string op, double threshold,
                 std::string detail = "");
bool compare(double measured, const std::string& op, double threshold);

struct Table {
    std::string name;  // file stem
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

std::string fmt(double x);   // shortest round-trip form
std::string fmt(long x);
std::string fmt(int x);

// First line "# <comment>", then the header, then rows.
void write_table(const std::string& path, const Table& t, const std::string& comment);
void write_checks(const std::string& path, const std::vector<Check>& checks, const std::string& comment);
std::vector<Check> read_checks(const std::string& path);

// FNV-1a 64 over the text, hex.
std::string fnv1a_hex(const std::string& text);

struct StudyResult {
    std::vector<Check> checks;
    std::vector<Table> tables;

    void merge(StudyResult other);
};

// Stationary density against (2 pi)^{-d} e^{-beta e} / Z; needs equal reservoir temperatures.
StudyResult gibbs_study(const Config& model);

struct DiffusionOptions {
    std::size_t n_traj = 100000;
    std::uint64_t seed = 1;
    int threads = 1;
    bool fit_quartic = false;
    std::string label = "model";
};

// Green-Kubo, fiber curvature and MSD estimates of D_Q; one summary row and
// an msd table per model, one agreement check per model.
StudyResult diffusion_study(const Config& model, const DiffusionOptions& opt);

// D_0 / (tau0 D_Q) of the RG seed for each lambda.
StudyResult seed_ratio_study(const Config& model, const std::vector<double>& lambdas, double tau0 = 1.0);

// Distance of the transported trace to the Gaussian along the flow, n = 0..levels.
StudyResult gaussian_flow_study(const Config& model, int levels = 6, double lambda = 1.0, double tau0 = 1.0,
                                int ell = 4);

// Toys used by the Dyson, Ward and recursion studies.
ToySystem dyson_toy(double lambda);
ToySystem ring_toy(double lambda = 0.5);
ToySystem two_mode_toy(double lambda = 0.5);

struct DysonStudyOptions {
    std::vector<double> lambdas{0.2, 0.1, 0.05};
    int max_order = 2;
    double t = 2.0;
    int nodes = 12;
    int threads = 1;
};

// Truncation error against the exact propagator; log-log slope per order.
StudyResult dyson_study(const DysonStudyOptions& opt);

StudyResult ward_study();
StudyResult recursion_study();

StudyResult kernel_property_study(std::uint64_t seed, int instances = 500);
StudyResult persistence_study(std::uint64_t seed, int instances = 200);
// Interval polymers of length <= 3 on {0..n_max} with weights eps^len, eps set
// so the hypothesis holds with slack 1/2; every nonempty S' is checked.
StudyResult cluster_study(int n_max = 6, double kappa = 1.0);

StudyResult fiber_study(const Config& model, int points = 64, int threads = 1);

}  // namespace qdiff
