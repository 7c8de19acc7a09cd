#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "qdiff/config.hpp"

namespace qdiff {

using cd = std::complex<double>;

struct SpinSystem {
    std::vector<double> levels;  // eigenvalues of H_spin, ascending
    Eigen::MatrixXcd W;          // coupling in the level basis

    int size() const { return static_cast<int>(levels.size()); }
    // Distinct Bohr frequencies e - e' (including 0), ascending.
    std::vector<double> bohr_frequencies() const;
    void validate() const;
};

enum class Dispersion { optical, acoustic, massive, table };

struct BathSpec {
    int d = 3;
    int L = 16;
    Dispersion kind = Dispersion::optical;
    double m_ph = 0.3;
    double phi_radius = 2.5;
    double phi_amp = 1.0;
    std::vector<double> betas{1.0};  // one entry per reservoir
    std::vector<double> table;       // omega over the dual lattice (kind == table)
    bool drop_zero_modes = true;

    // Filled by prepare(): one entry per retained dual-lattice point.
    std::vector<int> mode_index;     // flat index into L^d
    std::vector<double> omega;
    std::vector<double> phi2;        // |phi(q)|^2

    void prepare();
    int sites() const;
    std::vector<int> decode(int flat) const;        // lattice coordinates 0..L-1
    std::vector<double> momentum(int flat) const;   // minimal image in (-pi, pi]
    double dispersion(const std::vector<double>& q) const;
    double form_factor(const std::vector<double>& q) const;
    double min_beta() const;
};

struct ModelParams {
    double lambda = 0.1;
    double m_p = 1.0;
    double tau0 = 1.0;
    double t0() const { return tau0 / (lambda * lambda); }
};

struct Model {
    SpinSystem spin;
    BathSpec bath;
    ModelParams params;
    int bins = 32;    // momentum grid per axis
    double nu = 0.0;  // energy window half-width, 0 = default
    Config source;
};

Model build_model(const Config& cfg);

// Mode-sum form zeta(x, t) = sum_m A_m exp(i Omega_m t).
struct ModeSum {
    std::vector<double> ar, ai, om;
    cd eval(cd t) const;
};

ModeSum correlation_modes(const std::vector<int>& x, const BathSpec& bath);

cd bath_correlation(const std::vector<int>& x, cd t, const BathSpec& bath);

// Values of zeta(x, t0 + k dt), k = 0..n-1, by phase rotation.
std::vector<cd> correlation_series(const ModeSum& ms, double t0, double dt, std::size_t n);

struct SpectralMeasure {
    double eps = 0;
    int d = 1;
    int bins = 0;
    double nu = 0;
    std::vector<double> weights;  // per cell of the bins^d grid

    double total() const;
    // sum_cells weight(q) exp(-i q.x)
    cd fourier(const std::vector<double>& x) const;
};

double default_nu(const BathSpec& bath);
SpectralMeasure spectral_measure(double eps, const BathSpec& bath, int bins, double nu = 0.0);

std::vector<double> group_velocity(const std::vector<double>& k, double m_p);

struct DecayReport {
    bool passes = false;
    double fitted_exponent = 0;
    double t_lo = 0, t_hi = 0;
    std::vector<double> times, sup_real, sup_shifted;
};

DecayReport decay_check(const BathSpec& bath, double alpha, double t_max);

}  // namespace qdiff
