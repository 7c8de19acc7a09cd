#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "qdiff/markov.hpp"
#include "qdiff/model.hpp"

namespace qdiff {

// t_eps = Im int_0^inf zeta(0,s) exp(-i eps s) exp(-nu s) ds for every nonzero
// Bohr frequency, and the level shifts H_Lamb(e) = sum_e2 t_{e2-e} |W_{e2,e}|^2.
struct LambShift {
    std::map<double, double> t;
    std::vector<double> h;
};

double lamb_integral(double eps, const BathSpec& bath, double nu);
// Closed form of the same regularised integral from the mode sum.
double lamb_integral_exact(double eps, const BathSpec& bath, double nu);
LambShift lamb_shift(const Model& model);

// Weak-coupling generator on a small periodic lattice Z_N^d, Hilbert space
// index x * n + e.
//   M rho = Phi(rho) - 1/2 {Phi*(1), rho} + i [H_Lamb, rho]
//   Phi(rho)(x,y) = sum_eps zeta_eps(x-y) W_eps rho(x,y) W_eps^dagger
// with W_eps = P_e2 W P_e for eps = e2 - e.
struct GeneratorM {
    int n_levels = 0;
    int N = 0;
    int d = 1;
    double m_p = 1.0;
    std::vector<double> levels;
    Eigen::MatrixXcd W;
    std::map<double, SpectralMeasure> measures;  // bins == N
    LambShift lamb;

    int sites() const;
    int dim() const { return sites() * n_levels; }
    cd zeta(double eps, const std::vector<int>& x) const;
    Eigen::MatrixXcd jump_operator(int e, int e2) const;  // W_eps for eps = e2 - e
    Eigen::MatrixXcd phi(const Eigen::MatrixXcd& rho) const;
    Eigen::MatrixXcd phi_star(const Eigen::MatrixXcd& O) const;
    Eigen::MatrixXcd lamb_hamiltonian() const;
    Eigen::MatrixXcd kinetic_hamiltonian() const;  // m_p^{-1} sum (2 - 2 cos k)
    Eigen::MatrixXcd apply(const Eigen::MatrixXcd& rho) const;
    // Q = M - i ad(H_kin)
    Eigen::MatrixXcd apply_Q(const Eigen::MatrixXcd& rho) const;
    // Dense matrix on column-major vec(rho).
    Eigen::MatrixXcd superoperator(bool kinetic) const;
    Eigen::MatrixXcd choi_of_phi() const;
};

GeneratorM build_generator(const Model& model, int N);

// E_kin(p, k) = (2/m_p) sum_j (cos(p_j/2 + k_j) - cos(p_j/2 - k_j))
cd kinetic_symbol(const std::vector<cd>& p, const std::vector<cd>& k, double m_p);
double kinetic_symbol(const std::vector<double>& p, const std::vector<double>& k, double m_p);

struct FiberOptions {
    double gamma0 = 1.0;     // allowed |Im p|
    bool offset = false;     // k_n = 2 pi n / N - p/2 instead of 2 pi n / N
    std::vector<cd> kappa;   // evaluate the kinetic symbol at k - kappa
};

struct FiberOperator {
    double eps = 0;
    int e = -1, e2 = -1;     // eps = levels[e] - levels[e2] when eps != 0
    std::vector<cd> p;
    int n_levels = 0;
    int cells = 0;
    // eps == 0: dense on (level, k), index e * cells + k; otherwise diagonal on k.
    Eigen::MatrixXcd matrix;
    Eigen::VectorXcd diag;

    bool diagonal() const { return eps != 0; }
    Eigen::MatrixXcd dense() const;
};

std::vector<cd> fiber_momenta(const RateTable& rates, const std::vector<cd>& p, int cell,
                              const FiberOptions& opt);

FiberOperator fiber_operator(double eps, const std::vector<cd>& p, const RateTable& rates,
                             const LambShift& lamb, const FiberOptions& opt = {});

struct LeadingEigen {
    cd f = 0;
    cd second = 0;
    double gap = 0;              // Re f - Re second
    Eigen::VectorXcd right, left;  // sum right * cell_volume = 1, left . right * cell_volume = 1
    std::string method;
};

// Largest-real-part eigenvalue of an eps = 0 fiber; dense up to dense_max rows,
// shift-invert iteration above.
LeadingEigen leading_eigen(const FiberOperator& fiber, int dense_max = 1024,
                           double isolation_tol = 1e-9);

struct Curvature {
    double D = 0;            // -1/2 f'' at step h, averaged over axes
    double D_half = 0;       // same at h/2
    std::vector<double> per_axis;
    double quartic_exponent = 0;
    double h = 0;
};

// f is even in p, so the 5-point stencil uses f(0), f(h), f(2h) only.
Curvature diffusion_from_curvature(const RateTable& rates, const LambShift& lamb, double h = 0.02,
                                   double tol = 1e-5, bool fit_quartic = true);

struct FiberScanRow {
    double p = 0;
    cd f = 0;
    double gap = 0;
    double max_re = 0;  // over every eps block
};

// Real p along the first axis.
std::vector<FiberScanRow> fiber_scan(const RateTable& rates, const LambShift& lamb,
                                     const std::vector<double>& ps, int threads);

struct SpectralConstants {
    double a_Q = 0;       // gap at p = 0
    double p_Q = 0;       // isolation radius: gap >= a_Q / 2 for |p| <= p_Q
    double b_Q = 0;       // max Re spectrum <= -b_Q for |p| >= p_Q
    double gamma0 = 0;    // isolation width in Im p at Re p = 0
};

SpectralConstants spectral_constants(const RateTable& rates, const LambShift& lamb);

}  // namespace qdiff
