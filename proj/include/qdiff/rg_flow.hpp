#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qdiff/kernels.hpp"
#include "qdiff/lindblad.hpp"
#include "qdiff/markov.hpp"

namespace qdiff {

// Internal states s = (e_L, e_R, eta, v) for a relative coordinate on the
// N-ring: r = x_L - x_R = 2 v + eta per axis, v the minimal image in (-N/4, N/4].
struct InternalBasis {
    int n_levels = 0;
    int d = 1;
    int N = 0;
    std::vector<std::vector<int>> v, eta;  // per relative index r (N^d of them)

    int rel() const { return static_cast<int>(v.size()); }
    int dim() const { return n_levels * n_levels * rel(); }
    int index(int eL, int eR, int r) const { return (eL * n_levels + eR) * rel() + r; }
    bool in_s0(int s) const;
    KernelSpace space(int L, int ell, int n) const;
    // (I_q f)(k) = sum_r f(r) exp(i q.eta/2) exp(i k.r) on one spin block
    Eigen::MatrixXcd transform(const std::vector<cd>& q) const;
};

InternalBasis internal_basis(int n_levels, int d, int N);

// T^(p) stored in the momentum basis of the relative coordinate, where it is
// block diagonal: one dense block on the populations (index e * N^d + k) and a
// diagonal per coherence (e_L != e_R).
struct FiberBlocks {
    std::vector<cd> q;               // momentum at the original scale (transform I_q)
    Eigen::MatrixXcd zero;
    std::vector<Eigen::VectorXcd> coherence;  // index e_L * n + e_R, empty on the diagonal
    // leading eigen-data of the population block when known exactly (NaN otherwise)
    cd lead_log{std::nan(""), 0.0};
    Eigen::VectorXcd lead_right, lead_left;  // lead_left^T lead_right = 1
};

FiberBlocks power(const FiberBlocks& B, long m);

// Logarithm of the seed symbol: tau0 Q~(q) on the populations and
// tau0 diag - i t0 eps per coherence.
struct FiberGenerator {
    std::vector<cd> q;
    Eigen::MatrixXcd zero;     // base + diag(kinetic)
    Eigen::VectorXcd kinetic;  // q-dependent diagonal, evaluated without cancellation
    // null pair of the q = 0 population generator, left^T right = 1
    std::shared_ptr<const std::pair<Eigen::VectorXcd, Eigen::VectorXcd>> null_pair;
    std::vector<Eigen::VectorXcd> coherence;
    std::vector<double> eps;  // Bohr frequency per coherence
    double t0 = 0;
};

std::function<FiberGenerator(const std::vector<cd>&)> seed_generator(const RateTable& rates,
                                                                     const LambShift& lamb,
                                                                     double lambda, double tau0);
// exp(m G) through the eigendecomposition of the population generator
FiberBlocks exponentiate(const FiberGenerator& G, double m);

struct FlowParams {
    int ell = 4;
    double gamma0 = 0.05;      // strip half-width and v-weight
    double tilde_alpha = 0.25;
    double C = 10.0;           // strip and position constants
    int grid = 128;            // real p samples on [-pi, pi)
    double h = 0.02;           // curvature step
};

struct RGState {
    int n = 0;
    FlowParams params;
    InternalBasis basis;
    std::function<FiberGenerator(const std::vector<cd>&)> generator;  // seed logarithm
    std::function<FiberBlocks(const std::vector<cd>&)> symbol;        // T^_n(p)

    std::vector<double> grid;
    std::vector<cd> f;         // f_n on the grid (log of the leading eigenvalue)
    double D = 0;
    Eigen::VectorXcd mu;       // R_n(0) = |mu><1_S0|
    double gap = 0;            // ||(1 - R_n(0)) T^_n(0)||_G
    double gap_budget = 0;     // 1/2 ell^{-tilde_alpha n / 8}
    bool gap_collapse = false;

    Eigen::MatrixXcd hat(const std::vector<cd>& p) const;  // in the s basis
    double d_dim() const { return basis.d; }
};

// Leading eigenvalue of the population block; log taken on the principal branch.
cd leading_log(const FiberBlocks& B);
Eigen::VectorXcd leading_right(const FiberBlocks& B);
Eigen::MatrixXcd to_internal(const FiberBlocks& B, const InternalBasis& basis);

// T_0 = exp(t_0(-i L_spin + lambda^2 Q)) with t_0 = tau0 / lambda^2.
std::function<FiberBlocks(const std::vector<cd>&)> seed_symbol(const RateTable& rates,
                                                               const LambShift& lamb,
                                                               double lambda, double tau0);

// Fills grid, f, D, mu and the gap record of a state whose symbol is set.
void track_spectrum(RGState& s);
RGState seed_state(const RateTable& rates, const LambShift& lamb, double lambda, double tau0,
                   const FlowParams& params = {});
// T_{n+1} = S_ell[T_n^{ell^2}]: T^_{n+1}(p) = T^_n(p / ell)^{ell^2}, evaluated in
// closed form as exp(ell^{2n+2} G(p / ell^{n+1})).
RGState rg_step(const RGState& s);
// Same step by literal powering of the previous symbol.
std::function<FiberBlocks(const std::vector<cd>&)> literal_step(const RGState& s);

struct InductionReport {
    double strip_max = 0;        // sup ||T^_n(p)||_G on the strip
    double parabola_ratio = 0;   // max |f + D p^2| / (ell^{-a n/4} |p|^3), |Re p| < p_n
    double small_gap = 0;        // max ||(1 - R) T^|| for |Re p| < p_n
    double large_gap = 0;        // max ||T^|| for |Re p| >= p_n
    double budget = 0;           // 1/2 ell^{-a n / 8}
    double position_C = 0;       // max ||T_n(x)||_G exp(10 gamma0 |x|)
    double envelope_violation = 0;  // worst log-excess over the two-sided envelope
    double p_n = 0;
    bool strip_ok = false, parabola_ok = false, gap_ok = false, position_ok = false,
         envelope_ok = false, gap_collapse = false;
    bool passes() const {
        return strip_ok && parabola_ok && gap_ok && position_ok && envelope_ok && !gap_collapse;
    }
};

InductionReport verify_induction(const RGState& s, double D0, double p0 = -1);

// T_n(x) at integer points |x_j| <= W of X_n by inverse Fourier transform.
LatticeKernel position_kernel(const RGState& s, int W);

// tr[T^_n(p) rho^_0(p / ell^n)] for a state rho_0 on the original lattice,
// given as (x_L, x_R, e_L, e_R) -> value.
struct LocalDensity {
    struct Entry {
        std::vector<int> xL, xR;
        int eL, eR;
        cd value;
    };
    std::vector<Entry> entries;
};

LocalDensity product_density(int e, const std::vector<double>& psi, int d);  // psi on {-1, 0, 1}
Eigen::VectorXcd density_hat(const LocalDensity& rho, const InternalBasis& basis,
                             const std::vector<cd>& p);
cd transported_trace(const RGState& s, const LocalDensity& rho, const std::vector<cd>& p);

// sup_{|p| <= pmax} |tr[T^_n(p / sqrt t0) rho^_0(p / (ell^n sqrt t0))] - exp(-D* p^2)|
double gaussian_deviation(const RGState& s, const LocalDensity& rho, double t0, double Dstar,
                          double pmax = 1.0, int samples = 41);

struct FlowRow {
    int n;
    double D, gap, parabola, strip;
};
void write_flow_csv(const std::string& path, const std::vector<FlowRow>& rows,
                    const std::string& header_comment);
// Little-endian: int32 n, int32 d, int32 window, int32 dim, then per site
// (row-major over the box [-W, W]^d) dim x dim row-major complex doubles.
void write_kernel_snapshot(const std::string& path, const LatticeKernel& K, int n, int window);

}  // namespace qdiff
