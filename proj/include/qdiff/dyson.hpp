#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "qdiff/kernels.hpp"
#include "qdiff/model.hpp"

namespace qdiff {

// One boson mode coupled through W (x) e^{iqX} (x) a^* + h.c., or through the
// projector on spin level `sector` instead of W when sector >= 0.
struct ToyMode {
    double q = 3.141592653589793;
    double omega = 1.0;
    double g = 1.0;
    int sector = -1;
};

// Spin x ring Z_L coupled to a few truncated modes. System index s = e * L + x,
// full index s * dim_E + f.
struct ToySystem {
    std::vector<double> levels{0.0, 0.7};
    Eigen::MatrixXcd W;  // empty = default Hermitian coupling
    int L = 2;
    double m_p = 1.0;
    int n_fock = 3;
    double beta = 8.0;
    double lambda = 0.1;
    std::vector<ToyMode> modes{ToyMode{}};

    // Filled by build().
    int dS = 0, dE = 0;
    Eigen::MatrixXcd H_S, H_E, rho_ref;
    std::vector<Eigen::MatrixXcd> A, phi;  // H_I = sum_j A_j (x) phi_j

    void build();
    int dim() const { return dS * dE; }
    Eigen::MatrixXcd hamiltonian() const;  // H_S + H_E + lambda H_I
    // Internal states are pairs (s_L, s_R), index s_L * dS + s_R; S_0 is the diagonal.
    std::shared_ptr<const KernelSpace> space() const;
};

// Superoperators act on row-major vec(rho), index i * d + j.
Eigen::MatrixXcd left_mult(const Eigen::MatrixXcd& X);
Eigen::MatrixXcd right_mult(const Eigen::MatrixXcd& X);
Eigen::MatrixXcd conjugation(const Eigen::MatrixXcd& U);  // rho -> U rho U^dagger
Eigen::MatrixXcd unitary(const Eigen::MatrixXcd& H, double t);

Eigen::MatrixXcd exact_reduced_dynamics(const ToySystem& toy, double t);

std::vector<std::vector<std::pair<int, int>>> pairings(int n);

struct DysonOptions {
    int nodes = 12;                   // Gauss-Legendre nodes per simplex dimension
    double budget = 2e6;              // nodes^{2m} * pairings
    int threads = 1;
};

// orders[k] is the lambda-free order-k term: Z_t ~ sum_k lambda^{2k} orders[k].
std::vector<Eigen::MatrixXcd> dyson_orders(const ToySystem& toy, double t, int m,
                                           const DysonOptions& opt = {});
Eigen::MatrixXcd dyson_expansion(const ToySystem& toy, double t, int m,
                                 const DysonOptions& opt = {});

// Excitation operators on the toy. Operators on S (x) E are stored as bath
// matrices indexed by the system pair (sigma', sigma): block[sigma' * n + sigma],
// n = dS^2, bath pair index e_L * dE + e_R.
struct ToyCorrelations {
    std::shared_ptr<const KernelSpace> space;
    int n = 0, nE = 0;
    double t0 = 0;
    std::vector<Eigen::MatrixXcd> U;  // e^{-i t0 ad H}
    std::vector<Eigen::MatrixXcd> B;  // U - T (x) F
    Eigen::MatrixXcd T;
    Eigen::VectorXcd F;               // e^{-i t0 ad H_E}, diagonal in the Fock basis
    Eigen::VectorXcd ref, trace;      // vec(rho_ref), vec(1)

    Kernel T_kernel(int time) const;
    // B(tau) = e^{i tau t0 L_E} B e^{-i (tau - 1) t0 L_E}
    std::vector<Eigen::MatrixXcd> B_at(int tau) const;
    Kernel expect_B(int tau) const;
    // G_A = E(B(tau_m) . ... . B(tau_1))
    Kernel correlation(const std::vector<int>& A) const;
};

// Operator on S (x) E with `legs` system legs: blocks over leg pairs
// p = sigma' * n + sigma, earliest leg most significant.
struct SEOperator {
    int n = 0, legs = 1;
    std::vector<Eigen::MatrixXcd> blocks;
};

// D_later . D_earlier: tensor product on S, operator product on E.
SEOperator odot(const SEOperator& later, const SEOperator& earlier);
// E(D) per block: Tr_E[D_E rho_ref].
Eigen::VectorXcd expect(const SEOperator& D, const Eigen::VectorXcd& ref, const Eigen::VectorXcd& trace);

struct CorrelationOptions {
    int power = 1;                    // macroscopic unit power * t0
    Eigen::VectorXd kraus;            // rho -> K rho K^dagger after U, K = diag(kraus) on S
};

ToyCorrelations toy_correlations(const ToySystem& toy, double t0, const CorrelationOptions& opt = {});

// Tensor product of kernels on disjoint time sets, legs sorted by time.
Kernel outer(const std::vector<Kernel>& parts);

struct CorrelationTable {
    std::map<std::vector<int>, Kernel> G, Gc;
};

CorrelationTable correlation_table(const ToyCorrelations& C, const std::vector<int>& times, int max_size);
// Moebius inversion over set partitions, by increasing |A|.
void cumulants(CorrelationTable& table);
std::vector<std::vector<std::vector<int>>> set_partitions(const std::vector<int>& A);

// max over the other indices of | int dz'_tau 1_{S_0}(s'_tau) G(z', z) |, tau = max A.
double ward_unitarity(const Kernel& Gc);

struct RecursionCheck {
    double deviation = 0;
    Kernel left, right;
    std::size_t collections = 0;
};

// Scale 0 -> 1 with ell^2 microscopic blocks per macroscopic time. For A' = {1}
// the left side is T_1 (the T recursion); for |A'| = 2 it is G^c_{1,A'}.
RecursionCheck cumulant_recursion_check(const ToySystem& toy, double t0, const std::vector<int>& Aprime,
                                        int ell2, bool zero_cumulants = false);

long dist(std::vector<int> A);
// Edge lists of every labelled tree on k vertices (Pruefer sequences).
std::vector<std::vector<std::pair<int, int>>> spanning_trees(int k);
bool tree_bound_check(const std::vector<int>& A);

struct KPResult {
    bool hypothesis_holds = false;
    bool conclusion_holds = false;
    double hypothesis_ratio = 0;  // max over S' of lhs / (kappa |S'|)
    double conclusion_sum = 0;
    double conclusion_bound = 0;
    std::size_t collections = 0;
};

// Polymers are nonempty subsets of {0..n_max} as bitmasks; collections are sets
// of distinct polymers with nonzero weight.
KPResult kotecky_preiss_check(const std::vector<double>& w, int n_max, double kappa, unsigned S_prime,
                              std::size_t cap = 1000000);

}  // namespace qdiff
