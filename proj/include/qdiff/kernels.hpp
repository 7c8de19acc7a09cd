#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "qdiff/model.hpp"

namespace qdiff {

// Generic tensor with m legs; every leg has an output and an input index.
// Layout: out_0 .. out_{m-1}, in_0 .. in_{m-1}, last index fastest.
// weight[j] is the integration measure of leg j (cell volume or 1).
struct LegTensor {
    std::vector<int> size;
    std::vector<double> weight;
    std::vector<cd> data;

    int degree() const { return static_cast<int>(size.size()); }
    std::size_t elements() const;
};

// Recursive max-over-legs L1-Linf norm.
double ll_norm(const LegTensor& K);
LegTensor tensor(const LegTensor& K, const LegTensor& L);  // legs of K first
// (iota K)(y', y) = int dy~ K(.., y~ at out_i, .., y' at out_j; .., y at in_i, .., y~ at in_j)
// The merged leg takes position i; leg j is removed.
LegTensor iota(const LegTensor& K, int i, int j);
LegTensor abs(const LegTensor& K);

// A_n = X_n x S with X_n = ell^{-n} (Z/L)^d. Points are indexed x * |S| + s.
struct KernelSpace {
    int d = 1;
    int L = 2;
    int ell = 2;
    int n = 0;
    std::vector<std::vector<int>> v;  // v coordinate of every internal state
    std::vector<bool> s0;             // membership of S_0

    int sites() const;
    int internal() const { return static_cast<int>(v.size()); }
    int points() const { return sites() * internal(); }
    double cell() const;                    // ell^{-nd}
    std::vector<int> site(int x) const;     // torus coordinates
    double xdist(int x1, int x2) const;     // ell^{-n} * torus distance
    double vdist(int s1, int s2) const;
    KernelSpace finer() const;              // scale n + 1
};

// Kernel K_A(z'_A, z_A) on A_n for a time set A (ascending).
struct Kernel {
    std::shared_ptr<const KernelSpace> space;
    std::vector<int> times;
    std::vector<cd> data;  // out legs then in legs in time order, point index per leg

    int degree() const { return static_cast<int>(times.size()); }
    std::size_t index(const std::vector<int>& out, const std::vector<int>& in) const;
};

Kernel zero_kernel(std::shared_ptr<const KernelSpace> space, std::vector<int> times);
// delta(z', z) = ell^{nd} [z' = z]
Kernel delta_kernel(std::shared_ptr<const KernelSpace> space, int time);

// Legs (x_tau, s_tau) per time with weights exp(gamma |x'-x|) exp(gamma0 |v'-v|).
LegTensor weighted_legs(const Kernel& K, double gamma, double gamma0);
double gamma_norm(const Kernel& K, double gamma, double gamma0);

// (S_ell K)(x', s'; x, s) = ell^d K(ell x', s'; ell x, s) per time leg.
Kernel scale_kernel(const Kernel& K);
// Tr f = int dz f(z) 1_{S_0}(s) on a density (degree-0 function of z).
double trace_density(const KernelSpace& space, const std::vector<cd>& rho);
std::vector<cd> scale_density(const KernelSpace& space, const std::vector<cd>& rho);

// Chronological contraction within consecutive blocks of times. The factors
// must tile the union of the blocks; each block becomes one output leg.
Kernel contract(const std::vector<Kernel>& factors, const std::vector<std::vector<int>>& blocks);
// Single interval: T[V_m (x) ... (x) V_1] = V_m ... V_1.
Kernel contract(const std::vector<Kernel>& factors);
// T_{A'} with I_{tau'} = {ell2 (tau'-1) + 1, ..., ell2 tau'}.
Kernel contract_blocks(const std::vector<Kernel>& factors, const std::vector<int>& Aprime, int ell2);

// Translation-invariant reduced kernel K(x), x on the torus of the space.
struct LatticeKernel {
    std::shared_ptr<const KernelSpace> space;
    std::vector<Eigen::MatrixXcd> values;  // per site, |S| x |S|

    Kernel dense() const;  // K(x', s'; x, s) = values[x' - x](s', s)
};

double internal_norm(const Eigen::MatrixXcd& F, const KernelSpace& space, double gamma0);
// int dx ||K(x)||_G exp(gamma |x|)
double reduced_gamma_norm(const LatticeKernel& K, double gamma, double gamma0);
// K^(p) = int dx exp(i p.x) K(x)
Eigen::MatrixXcd fourier(const LatticeKernel& K, const std::vector<cd>& p);
LatticeKernel scale_kernel(const LatticeKernel& K, std::size_t cap = 1u << 24);

// Perturbation of an isolated simple eigenvalue (operator 2-norm).
struct PersistenceBound {
    bool persists = false;
    double b = 0;             // b(r)
    double eig_shift = 0;     // |a - a0| <= r
    double proj_shift = 0;    // ||P - P0||
};

double persistence_b(const Eigen::MatrixXcd& A0, cd a0, const Eigen::MatrixXcd& P0, double r);
PersistenceBound eigen_persistence_bound(const Eigen::MatrixXcd& A0, cd a0,
                                         const Eigen::MatrixXcd& P0, const Eigen::MatrixXcd& A1,
                                         double r);

double operator_norm(const Eigen::MatrixXcd& A);

}  // namespace qdiff
