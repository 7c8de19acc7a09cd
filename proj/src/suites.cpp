#include "qdiff/suites.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "qdiff/kernels.hpp"

namespace qdiff {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Draw {
    std::mt19937_64 eng;
    explicit Draw(std::uint64_t seed) : eng(seed) {}
    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(eng); }
    double normal() { return std::normal_distribution<double>()(eng); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng); }
    cd complex_normal() { return {normal(), normal()}; }
    Eigen::MatrixXcd matrix(int r, int c) {
        Eigen::MatrixXcd m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = complex_normal();
        return m;
    }
};

std::shared_ptr<KernelSpace> space(int L, int S, int ell, int n, int d = 1) {
    auto sp = std::make_shared<KernelSpace>();
    sp->d = d;
    sp->L = L;
    sp->ell = ell;
    sp->n = n;
    for (int s = 0; s < S; ++s) {
        sp->v.push_back(std::vector<int>(d, s / 2 - (S > 2 ? 1 : 0)));
        sp->s0.push_back(s == 0);
    }
    return sp;
}

Kernel random_kernel(Draw& g, std::shared_ptr<const KernelSpace> sp, std::vector<int> times) {
    Kernel K = zero_kernel(sp, std::move(times));
    for (auto& x : K.data) x = g.complex_normal();
    return K;
}

LegTensor random_legs(Draw& g, const std::vector<int>& size, bool nonneg = false) {
    LegTensor T;
    T.size = size;
    for (std::size_t i = 0; i < size.size(); ++i) T.weight.push_back(g.uniform(0.3, 1.5));
    T.data.resize(T.elements());
    for (auto& x : T.data) x = nonneg ? cd(std::abs(g.normal()), 0) : g.complex_normal();
    return T;
}

bool above(double lhs, double rhs) { return lhs > rhs * (1 + 1e-12); }

}  // namespace

int PropertyReport::total() const {
    int s = 0;
    for (const auto& [k, v] : violations) s += v;
    return s;
}

PropertyReport kernel_property_suite(std::uint64_t seed, int instances) {
    PropertyReport rep;
    rep.instances = instances;
    Draw g(seed);
    auto& V = rep.violations;
    for (const char* k : {"tensor_submultiplicative", "contraction_bound", "chained_sup_bound", "product_bound",
                          "gamma_monotone", "scaling_norm", "scaling_trace", "reduced_norm", "fourier_strip"})
        V[k] = 0;

    for (int t = 0; t < instances; ++t) {
        {
            std::vector<int> sk(g.integer(1, 2)), sl(g.integer(1, 2));
            for (auto& s : sk) s = g.integer(1, 3);
            for (auto& s : sl) s = g.integer(1, 3);
            LegTensor K = random_legs(g, sk), L = random_legs(g, sl);
            V["tensor_submultiplicative"] += above(ll_norm(tensor(K, L)), ll_norm(K) * ll_norm(L));
        }
        {
            int m = g.integer(2, 3), n = g.integer(1, 3);
            std::vector<int> size(m);
            for (auto& s : size) s = g.integer(1, 3);
            int i = g.integer(0, m - 2), j = g.integer(i + 1, m - 1);
            size[i] = size[j] = n;
            LegTensor K = random_legs(g, size);
            K.weight[j] = K.weight[i];
            V["contraction_bound"] += above(ll_norm(iota(K, i, j)), ll_norm(K));
        }
        {
            const int m = g.integer(2, 3), n = g.integer(1, 3);
            LegTensor K = random_legs(g, std::vector<int>(m, n), true);
            const double w = K.weight[0];
            for (auto& x : K.weight) x = w;
            LegTensor C = K;
            for (int j = m - 1; j >= 1; --j) C = iota(C, j - 1, j);
            double lhs = 0;
            for (const auto& x : C.data) lhs = std::max(lhs, std::abs(x));
            const int i = g.integer(0, m - 1);
            LegTensor S;
            for (int k = 0; k < m; ++k)
                if (k != i) {
                    S.size.push_back(n);
                    S.weight.push_back(w);
                }
            S.data.assign(S.elements(), 0.0);
            std::vector<int> dig(2 * m);
            for (std::size_t idx = 0; idx < K.data.size(); ++idx) {
                std::size_t rem = idx, out = 0;
                for (int k = 2 * m - 1; k >= 0; --k) {
                    dig[k] = static_cast<int>(rem % n);
                    rem /= n;
                }
                for (int k = 0; k < 2 * m; ++k)
                    if (k != i && k != m + i) out = out * n + dig[k];
                S.data[out] = std::max(S.data[out].real(), std::abs(K.data[idx]));
            }
            V["chained_sup_bound"] += above(lhs, ll_norm(S));
        }
        {
            auto sp = space(2, g.integer(1, 2), 2, g.integer(0, 1));
            double ga = g.uniform(0, 1), g0 = g.uniform(0, 0.5);
            std::vector<Kernel> fs;
            Kernel R;
            switch (t % 3) {
                case 0:
                    fs = {random_kernel(g, sp, {1, 3}), random_kernel(g, sp, {2})};
                    R = contract(fs);
                    break;
                case 1:
                    fs = {random_kernel(g, sp, {1, 3}), random_kernel(g, sp, {2, 4})};
                    R = contract_blocks(fs, {1, 2}, 2);
                    break;
                default:
                    fs = {random_kernel(g, sp, {1}), random_kernel(g, sp, {2}), random_kernel(g, sp, {3})};
                    R = contract(fs);
            }
            double prod = 1;
            for (const auto& f : fs) prod *= gamma_norm(f, ga, g0);
            V["product_bound"] += above(gamma_norm(R, ga, g0), prod);
        }
        {
            auto sp = space(g.integer(2, 4), g.integer(1, 2), 2, g.integer(0, 1));
            Kernel K = random_kernel(g, sp, t % 3 ? std::vector<int>{1} : std::vector<int>{1, 2});
            double ga = g.uniform(0, 1), g2 = ga + g.uniform(0, 1), g0 = g.uniform(0, 0.5);
            V["gamma_monotone"] += above(gamma_norm(K, ga, g0), gamma_norm(K, g2, g0));
        }
        {
            auto sp = space(3, 2, 2 + t % 3, t % 2);
            Kernel K = random_kernel(g, sp, t % 2 ? std::vector<int>{1, 2} : std::vector<int>{1});
            double ga = g.uniform(0.1, 2.0), g0 = g.uniform(0, 0.5);
            double lhs = gamma_norm(scale_kernel(K), ga, g0), rhs = gamma_norm(K, ga / sp->ell, g0);
            V["scaling_norm"] += std::abs(lhs - rhs) > 1e-12 * rhs;
        }
        {
            auto sp = space(g.integer(2, 6), 4, g.integer(2, 3), g.integer(0, 1), g.integer(1, 2));
            std::vector<cd> rho(sp->points());
            for (auto& x : rho) x = g.complex_normal();
            double a = trace_density(*sp, rho);
            double b = trace_density(sp->finer(), scale_density(*sp, rho));
            V["scaling_trace"] += std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a));
        }
        {
            auto sp = space(g.integer(2, 5), g.integer(1, 3), 2, g.integer(0, 2));
            LatticeKernel K{sp, {}};
            for (int x = 0; x < sp->sites(); ++x) K.values.push_back(g.matrix(sp->internal(), sp->internal()));
            double ga = g.uniform(0, 2), g0 = g.uniform(0, 0.5);
            double a = gamma_norm(K.dense(), ga, g0), b = reduced_gamma_norm(K, ga, g0);
            V["reduced_norm"] += std::abs(a - b) > 1e-12 * b;

            double bound = b;
            int bad = 0;
            for (int j = 0; j < 8; ++j) {
                cd p(g.uniform(-kPi, kPi), g.uniform(-ga, ga));
                std::vector<cd> pv(sp->d, 0.0);
                pv[0] = p;
                bad += above(internal_norm(fourier(K, pv), *sp, g0), bound);
            }
            V["fourier_strip"] += bad > 0;
        }
    }
    return rep;
}

PersistenceReport persistence_suite(std::uint64_t seed, int instances, int N) {
    PersistenceReport rep;
    Draw g(seed);
    const int max_attempts = 50 * instances;
    while (rep.instances < instances && rep.attempts < max_attempts) {
        ++rep.attempts;
        Eigen::MatrixXcd S = Eigen::MatrixXcd::Identity(N, N) + 0.3 * g.matrix(N, N) / std::sqrt(N);
        Eigen::VectorXcd ev(N);
        cd a0 = std::polar(g.uniform(1.0, 2.0), g.uniform(-kPi, kPi));
        ev[0] = a0;
        for (int i = 1; i < N; ++i) ev[i] = std::polar(g.uniform(0, 0.3), g.uniform(-kPi, kPi));
        Eigen::MatrixXcd Si = S.inverse();
        Eigen::MatrixXcd A0 = S * ev.asDiagonal() * Si;
        Eigen::MatrixXcd P0 = S.col(0) * Si.row(0);
        const double iso = operator_norm(A0 - a0 * P0);
        if (iso >= std::abs(a0)) continue;
        const double r = g.uniform(0.1, 0.9) * (std::abs(a0) - iso);
        Eigen::MatrixXcd A1 = g.matrix(N, N);
        A1 *= g.uniform(0.001, 0.3) / operator_norm(A1);
        auto pb = eigen_persistence_bound(A0, a0, P0, A1, r);
        if (!pb.persists) continue;
        ++rep.instances;

        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(A0 + A1);
        int best = 0;
        for (int i = 1; i < N; ++i)
            if (std::abs(es.eigenvalues()[i] - a0) < std::abs(es.eigenvalues()[best] - a0)) best = i;
        cd a = es.eigenvalues()[best];
        Eigen::MatrixXcd Vv = es.eigenvectors(), Vi = Vv.inverse();
        Eigen::MatrixXcd P = Vv.col(best) * Vi.row(best);
        double de = std::abs(a - a0), dp = operator_norm(P - P0);
        rep.worst_eig_ratio = std::max(rep.worst_eig_ratio, de / std::max(pb.eig_shift, 1e-300));
        rep.worst_proj_ratio = std::max(rep.worst_proj_ratio, dp / std::max(pb.proj_shift, 1e-300));
        if (de > r || de > pb.eig_shift * (1 + 1e-9) || dp > pb.proj_shift * (1 + 1e-9)) ++rep.violations;
    }
    return rep;
}

}  // namespace qdiff
