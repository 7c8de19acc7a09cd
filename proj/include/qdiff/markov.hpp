#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <vector>

#include "qdiff/model.hpp"

namespace qdiff {

// Jump rates of the classical process on levels x momentum grid. The momentum
// grid is bins^d with k_n = 2 pi n / bins per axis; a jump adds the k-transfer
// of its cell.
struct RateTable {
    int n_levels = 0;
    int d = 1;
    int bins = 0;
    double m_p = 1.0;
    std::vector<double> levels;
    // mass[e * n + e2][cell]: rate mass of the jump e -> e2 with k-transfer `cell`
    std::vector<std::vector<double>> mass;
    std::vector<double> channel_total;  // n * n
    std::vector<double> escape;         // w(e)

    int cells() const;
    std::size_t states() const { return static_cast<std::size_t>(n_levels) * cells(); }
    const std::vector<double>& channel(int e, int e2) const { return mass[e * n_levels + e2]; }
    // j(e2, k2; e, k) for grid cells
    double rate(int e2, int cell2, int e, int cell) const;
    std::vector<int> decode(int cell) const;
    int encode(const std::vector<int>& c) const;
    int add(int cell, int delta) const;
    std::vector<double> momentum(int cell) const;
    std::vector<double> velocity(int cell) const;
    double mean_escape(const std::vector<double>& level_weights) const;
};

RateTable jump_rates(const SpinSystem& spin, const std::map<double, SpectralMeasure>& measures,
                     double m_p);

// Spectral measures for every nonzero Bohr frequency.
std::map<double, SpectralMeasure> bohr_measures(const Model& model);
RateTable markov_rates(const Model& model);

// Dense generator G[(e2,k2),(e,k)] = j - delta w. Only for small grids.
Eigen::MatrixXd generator_matrix(const RateTable& rates);
std::vector<double> apply_generator(const RateTable& rates, const std::vector<double>& f);

struct Density {
    int n_levels = 0;
    int cells = 0;
    double cell_volume = 0;   // (2 pi / bins)^d
    std::vector<double> mu;   // density, sum mu * cell_volume = 1
    double residual = 0;      // max |G mu| / max mu
    int iterations = 0;

    std::vector<double> probability() const;  // mu * cell_volume
    std::vector<double> level_marginal() const;
};

Density stationary_density(const RateTable& rates, double tol = 1e-12, int max_iter = 10000);

bool irreducibility_check(const RateTable& rates);

struct Diffusion {
    Eigen::MatrixXd D;
    double D_Q = 0;  // trace / d
};

enum class GreenKuboMethod { solve, quadrature };

Diffusion diffusion_green_kubo(const RateTable& rates, const Density& mu,
                               GreenKuboMethod method = GreenKuboMethod::solve,
                               double t_max = 0.0);

struct JumpEvent {
    double t;
    int e;
    int cell;
    std::vector<double> x;
    std::vector<double> v;  // velocity until the next event
};

struct Trajectory {
    std::uint64_t seed = 0;
    double t_max = 0;
    std::vector<JumpEvent> events;  // events[0] is the initial state at t = 0

    std::vector<double> position(double t) const;
    std::size_t jumps() const { return events.empty() ? 0 : events.size() - 1; }
};

struct InitialState {
    int e = 0;
    int cell = 0;
    std::vector<double> x;
};

Trajectory simulate_trajectory(const RateTable& rates, const InitialState& init, double t_max,
                               std::uint64_t seed);

// Squared displacements |x(t) - x(0)|^2, row per trajectory, column per time.
struct DisplacementTable {
    int d = 1;
    std::vector<double> times;
    std::vector<double> sq;
    std::vector<std::uint32_t> jumps;  // per trajectory

    std::size_t n_traj() const { return times.empty() ? 0 : sq.size() / times.size(); }
};

// 30 log-spaced times in [10 / w_min, 400 / w_mean].
std::vector<double> msd_times(const RateTable& rates, const Density& mu, int n = 30);

// Trajectory i starts from mu and uses the stream seed_seq{seed, i}; results do
// not depend on the thread count.
DisplacementTable msd_ensemble(const RateTable& rates, const Density& mu, std::size_t n_traj,
                               const std::vector<double>& times, std::uint64_t seed,
                               int threads);

struct MsdFit {
    double D = 0;
    double stderr_D = 0;
    double intercept = 0;
    std::vector<double> times, msd, msd_err;
};

MsdFit msd_diffusion(const DisplacementTable& table, std::uint64_t seed = 1, int resamples = 200);
MsdFit msd_diffusion(const std::vector<Trajectory>& trajectories, const std::vector<double>& times,
                     int d);

}  // namespace qdiff
