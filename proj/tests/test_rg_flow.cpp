#include <doctest.h>

#include <cmath>
#include <fstream>
#include <functional>

#include <unsupported/Eigen/MatrixFunctions>

#include "gen.hpp"
#include "qdiff/errors.hpp"
#include "qdiff/rg_flow.hpp"

using namespace qdiff;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::shared_ptr<KernelSpace> small_space(int L, int S, int ell = 2, int n = 0, int d = 1) {
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

Kernel random_kernel(gen::Rng& rng, std::shared_ptr<const KernelSpace> sp, std::vector<int> times,
                     bool nonneg = false) {
    Kernel K = zero_kernel(sp, std::move(times));
    for (auto& x : K.data) x = nonneg ? cd(std::abs(rng.normal()), 0) : rng.complex_normal();
    return K;
}

LegTensor random_legs(gen::Rng& rng, const std::vector<int>& size, bool nonneg = false) {
    LegTensor T;
    T.size = size;
    for (std::size_t i = 0; i < size.size(); ++i) T.weight.push_back(rng.uniform(0.3, 1.5));
    T.data.resize(T.elements());
    for (auto& x : T.data) x = nonneg ? cd(std::abs(rng.normal()), 0) : rng.complex_normal();
    return T;
}

struct Fixture {
    Model model;
    RateTable rates;
    LambShift lamb;
    Fixture()
        : model(build_model(Config::load(std::string(QDIFF_SOURCE_DIR) + "/configs/default_d1.cfg"))),
          rates(markov_rates(model)),
          lamb(lamb_shift(model)) {}
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

std::vector<cd> px(int d, cd a, cd b = 0.0) {
    std::vector<cd> p(d, 0.0);
    p[0] = a;
    if (d > 1) p[1] = b;
    return p;
}

FlowParams quick() {
    FlowParams fp;
    fp.grid = 32;
    return fp;
}

}  // namespace

// ---------------------------------------------------------------- scaling

TEST_CASE("scaling preserves the trace of densities") {
    gen::Rng rng(11);
    auto sp = small_space(6, 4, 3, 1, 2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<cd> rho(sp->points());
        for (auto& x : rho) x = rng.complex_normal();
        double a = trace_density(*sp, rho);
        auto fine = sp->finer();
        double b = trace_density(fine, scale_density(*sp, rho));
        CHECK(std::abs(a - b) < 1e-12 * std::max(1.0, std::abs(a)));
    }
}

TEST_CASE("scaling trades gamma for gamma / ell in the norm") {
    gen::Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        auto sp = small_space(3, 2, 2 + trial % 3, trial % 2);
        std::vector<int> times = trial % 2 ? std::vector<int>{1, 2} : std::vector<int>{1};
        Kernel K = random_kernel(rng, sp, times);
        double g = rng.uniform(0.1, 2.0), g0 = rng.uniform(0, 0.5);
        double lhs = gamma_norm(scale_kernel(K), g, g0);
        double rhs = gamma_norm(K, g / sp->ell, g0);
        CHECK(std::abs(lhs - rhs) < 1e-12 * rhs);
    }
}

TEST_CASE("delta kernel: unit norm, maps to the finer delta") {
    for (int n : {0, 1, 2}) {
        auto sp = small_space(4, 3, 2, n);
        Kernel dk = delta_kernel(sp, 1);
        for (double g : {0.0, 0.7, 3.0}) CHECK(std::abs(gamma_norm(dk, g, 0.4) - 1.0) < 1e-13);
        Kernel s = scale_kernel(dk);
        Kernel fine = delta_kernel(std::make_shared<KernelSpace>(sp->finer()), 1);
        double worst = 0;
        for (std::size_t i = 0; i < s.data.size(); ++i) worst = std::max(worst, std::abs(s.data[i] - fine.data[i]));
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("lattice scaling respects the window cap") {
    auto sp = small_space(5, 2);
    LatticeKernel K{sp, std::vector<Eigen::MatrixXcd>(sp->sites(), Eigen::MatrixXcd::Identity(2, 2))};
    CHECK_THROWS_AS(scale_kernel(K, 10), WindowOverflow);
    auto R = scale_kernel(K);
    CHECK(R.space->n == 1);
    CHECK(std::abs(R.values[0](0, 0) - 2.0) < 1e-15);
}

// ---------------------------------------------------------------- norms

TEST_CASE("norm is submultiplicative under tensor products") {
    gen::Rng rng(21);
    for (int trial = 0; trial < 500; ++trial) {
        int dk = rng.integer(1, 2), dl = rng.integer(1, 2);
        std::vector<int> sk(dk), sl(dl);
        for (auto& s : sk) s = rng.integer(1, 3);
        for (auto& s : sl) s = rng.integer(1, 3);
        LegTensor K = random_legs(rng, sk), L = random_legs(rng, sl);
        double lhs = ll_norm(tensor(K, L)), rhs = ll_norm(K) * ll_norm(L);
        CHECK(lhs <= rhs * (1 + 1e-12));
    }
}

TEST_CASE("contraction does not increase the norm") {
    gen::Rng rng(22);
    for (int trial = 0; trial < 500; ++trial) {
        int m = rng.integer(2, 3);
        int n = rng.integer(1, 3);
        std::vector<int> size(m);
        for (auto& s : size) s = rng.integer(1, 3);
        int i = rng.integer(0, m - 2), j = rng.integer(i + 1, m - 1);
        size[i] = size[j] = n;
        LegTensor K = random_legs(rng, size);
        K.weight[j] = K.weight[i];
        CHECK(ll_norm(iota(K, i, j)) <= ll_norm(K) * (1 + 1e-12));
    }
}

TEST_CASE("iota matches its defining sum") {
    gen::Rng rng(23);
    LegTensor K = random_legs(rng, {3, 3});
    K.weight = {0.5, 0.5};
    LegTensor R = iota(K, 0, 1);
    // K(out_0, out_1; in_0, in_1), index ((o0 * 3 + o1) * 3 + i0) * 3 + i1
    auto at = [&](int o0, int o1, int i0, int i1) { return K.data[((o0 * 3 + o1) * 3 + i0) * 3 + i1]; };
    for (int yp = 0; yp < 3; ++yp)
        for (int y = 0; y < 3; ++y) {
            cd s = 0;
            for (int t = 0; t < 3; ++t) s += 0.5 * at(t, yp, y, t);
            CHECK(std::abs(R.data[yp * 3 + y] - s) < 1e-14);
        }
}

TEST_CASE("chained contraction is bounded by the sup over one leg") {
    gen::Rng rng(24);
    for (int trial = 0; trial < 500; ++trial) {
        const int m = rng.integer(2, 3), n = rng.integer(1, 3);
        LegTensor K = random_legs(rng, std::vector<int>(m, n), true);
        const double w = K.weight[0];
        for (auto& x : K.weight) x = w;
        // iota_{12} iota_{23} ... iota_{m-1,m} K, innermost first
        LegTensor C = K;
        for (int j = m - 1; j >= 1; --j) C = iota(C, j - 1, j);
        double lhs = 0;
        for (const auto& x : C.data) lhs = std::max(lhs, std::abs(x));

        const int i = rng.integer(0, m - 1);
        LegTensor S;
        for (int k = 0; k < m; ++k)
            if (k != i) {
                S.size.push_back(n);
                S.weight.push_back(w);
            }
        S.data.assign(S.elements(), 0.0);
        for (std::size_t idx = 0; idx < K.data.size(); ++idx) {
            std::size_t rem = idx, out = 0;
            std::vector<int> dig(2 * m);
            for (int k = 2 * m - 1; k >= 0; --k) {
                dig[k] = static_cast<int>(rem % n);
                rem /= n;
            }
            for (int k = 0; k < 2 * m; ++k) {
                if (k == i || k == m + i) continue;
                out = out * n + dig[k];
            }
            S.data[out] = std::max(S.data[out].real(), std::abs(K.data[idx]));
        }
        CHECK(lhs <= ll_norm(S) * (1 + 1e-12));
    }
}

TEST_CASE("gamma norm is monotone in gamma") {
    gen::Rng rng(25);
    for (int trial = 0; trial < 500; ++trial) {
        auto sp = small_space(rng.integer(2, 4), rng.integer(1, 2), 2, rng.integer(0, 1));
        std::vector<int> times = trial % 3 ? std::vector<int>{1} : std::vector<int>{1, 2};
        Kernel K = random_kernel(rng, sp, times);
        double g = rng.uniform(0, 1), g2 = g + rng.uniform(0, 1), g0 = rng.uniform(0, 0.5);
        CHECK(gamma_norm(K, g, g0) <= gamma_norm(K, g2, g0) * (1 + 1e-12));
    }
}

TEST_CASE("translation-invariant kernels: gamma norm is the reduced integral") {
    gen::Rng rng(26);
    for (int trial = 0; trial < 50; ++trial) {
        auto sp = small_space(rng.integer(2, 5), rng.integer(1, 3), 2, rng.integer(0, 2));
        LatticeKernel K{sp, {}};
        for (int x = 0; x < sp->sites(); ++x) K.values.push_back(rng.matrix(sp->internal(), sp->internal()));
        double g = rng.uniform(0, 2), g0 = rng.uniform(0, 0.5);
        double a = gamma_norm(K.dense(), g, g0), b = reduced_gamma_norm(K, g, g0);
        CHECK(std::abs(a - b) < 1e-12 * b);
    }
}

TEST_CASE("Fourier transform is bounded on the strip by the gamma norm") {
    gen::Rng rng(27);
    for (int trial = 0; trial < 50; ++trial) {
        auto sp = small_space(rng.integer(3, 7), 2, 2, rng.integer(0, 1));
        LatticeKernel K{sp, {}};
        for (int x = 0; x < sp->sites(); ++x) K.values.push_back(rng.matrix(2, 2));
        double g = rng.uniform(0.1, 1), g0 = 0.3;
        double bound = reduced_gamma_norm(K, g, g0);
        for (int j = 0; j < 40; ++j) {
            cd p(rng.uniform(-kPi, kPi), rng.uniform(-g, g));
            CHECK(internal_norm(fourier(K, {p}), *sp, g0) <= bound * (1 + 1e-12));
        }
    }
}

// ---------------------------------------------------------------- contraction

TEST_CASE("contraction: two deltas give a delta") {
    auto sp = small_space(3, 2, 2, 1);
    Kernel r = contract({delta_kernel(sp, 1), delta_kernel(sp, 2)});
    Kernel d = delta_kernel(sp, 1);
    REQUIRE(r.data.size() == d.data.size());
    double worst = 0;
    for (std::size_t i = 0; i < d.data.size(); ++i) worst = std::max(worst, std::abs(r.data[i] - d.data[i]));
    CHECK(worst < 1e-12);
}

TEST_CASE("contraction of single-time factors is the operator product") {
    gen::Rng rng(31);
    auto sp = small_space(2, 2, 2, 1);
    const int P = sp->points();
    Kernel a = random_kernel(rng, sp, {1}), b = random_kernel(rng, sp, {2}), c = random_kernel(rng, sp, {3});
    auto mat = [&](const Kernel& k) {
        Eigen::MatrixXcd M(P, P);
        for (int i = 0; i < P; ++i)
            for (int j = 0; j < P; ++j) M(i, j) = k.data[i * P + j];
        return M;
    };
    const double cell = sp->cell();
    Eigen::MatrixXcd want = mat(c) * mat(b) * mat(a) * (cell * cell);
    Eigen::MatrixXcd got = mat(contract({a, b, c}));
    CHECK((want - got).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("contraction of the two-block pattern matches a nested loop") {
    // A' = {1, 2}, ell^2 = 4, factors on {1, 2, 5, 6} and {3, 4, 7, 8}
    gen::Rng rng(32);
    auto sp = small_space(2, 1, 2, 1);
    const int P = sp->points();
    Kernel K1 = random_kernel(rng, sp, {1, 2, 5, 6});
    Kernel K2 = random_kernel(rng, sp, {3, 4, 7, 8});
    Kernel R = contract_blocks({K1, K2}, {1, 2}, 4);
    CHECK(R.times == std::vector<int>{1, 2});
    const double c6 = std::pow(sp->cell(), 6);
    double worst = 0;
    for (int o1 = 0; o1 < P; ++o1)
        for (int o2 = 0; o2 < P; ++o2)
            for (int i1 = 0; i1 < P; ++i1)
                for (int i2 = 0; i2 < P; ++i2) {
                    cd s = 0;
                    // block 1: i1 -> a -> b -> c -> o1, block 2: i2 -> d -> e -> f -> o2
                    for (int a = 0; a < P; ++a)
                        for (int b = 0; b < P; ++b)
                            for (int c = 0; c < P; ++c)
                                for (int d = 0; d < P; ++d)
                                    for (int e = 0; e < P; ++e)
                                        for (int f = 0; f < P; ++f)
                                            s += K1.data[K1.index({a, b, d, e}, {i1, a, i2, d})] *
                                                 K2.data[K2.index({c, o1, f, o2}, {b, c, e, f})];
                    worst = std::max(worst, std::abs(R.data[R.index({o1, o2}, {i1, i2})] - s * c6));
                }
    CHECK(worst < 1e-12);
}

TEST_CASE("contraction rejects gaps, repeats and bad tilings") {
    auto sp = small_space(2, 1);
    CHECK_THROWS_AS(contract({delta_kernel(sp, 1), delta_kernel(sp, 3)}), LabelGap);
    CHECK_THROWS_AS(contract({delta_kernel(sp, 1), delta_kernel(sp, 1)}), LabelGap);
    CHECK_THROWS_AS(contract({delta_kernel(sp, 1)}, {{1, 3}}), LabelGap);
    CHECK_THROWS_AS(contract_blocks({delta_kernel(sp, 1)}, {1}, 2), LabelGap);
}

TEST_CASE("contracted norm is bounded by the product of norms") {
    gen::Rng rng(33);
    for (int trial = 0; trial < 500; ++trial) {
        auto sp = small_space(2, rng.integer(1, 2), 2, rng.integer(0, 1));
        double g = rng.uniform(0, 1), g0 = rng.uniform(0, 0.5);
        std::vector<Kernel> fs;
        Kernel R;
        switch (trial % 3) {
            case 0:
                fs = {random_kernel(rng, sp, {1, 3}), random_kernel(rng, sp, {2})};
                R = contract(fs);
                break;
            case 1:
                fs = {random_kernel(rng, sp, {1, 3}), random_kernel(rng, sp, {2, 4})};
                R = contract_blocks(fs, {1, 2}, 2);
                break;
            default:
                fs = {random_kernel(rng, sp, {1}), random_kernel(rng, sp, {2}), random_kernel(rng, sp, {3})};
                R = contract(fs);
        }
        double prod = 1;
        for (const auto& f : fs) prod *= gamma_norm(f, g, g0);
        CHECK(gamma_norm(R, g, g0) <= prod * (1 + 1e-12));
    }
}

// ---------------------------------------------------------------- persistence

TEST_CASE("persistence: b formula and the unperturbed case") {
    Eigen::MatrixXcd A0 = Eigen::MatrixXcd::Zero(3, 3);
    A0(0, 0) = 2.0;
    A0(1, 1) = 0.5;
    A0(2, 2) = -0.3;
    Eigen::MatrixXcd P0 = Eigen::MatrixXcd::Zero(3, 3);
    P0(0, 0) = 1;
    // ||P0|| = 1, ||A0 - 2 P0|| = 0.5
    CHECK(std::abs(persistence_b(A0, 2.0, P0, 0.4) - (1 / 0.4 + 1 / (2 - 0.4 - 0.5))) < 1e-14);
    CHECK(std::abs(persistence_b(A0, 2.0, P0, 1.0) - (1.0 + 1 / 0.5)) < 1e-14);
    auto pb = eigen_persistence_bound(A0, 2.0, P0, Eigen::MatrixXcd::Zero(3, 3), 0.4);
    CHECK(pb.persists);
    CHECK(pb.eig_shift == 0.0);
    CHECK(pb.proj_shift == 0.0);
    CHECK_THROWS_AS(persistence_b(A0, 0.4, P0, 0.1), HypothesisViolated);
    CHECK_THROWS_AS(persistence_b(A0, 2.0, P0, 1.6), HypothesisViolated);
}

TEST_CASE("persistence bounds hold against dense eigensolves") {
    gen::Rng rng(41);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int N = 8;
        Eigen::MatrixXcd S = Eigen::MatrixXcd::Identity(N, N) + 0.3 * rng.matrix(N, N) / std::sqrt(N);
        Eigen::VectorXcd ev(N);
        cd a0 = std::polar(rng.uniform(1.0, 2.0), rng.uniform(-kPi, kPi));
        ev[0] = a0;
        for (int i = 1; i < N; ++i) ev[i] = std::polar(rng.uniform(0, 0.3), rng.uniform(-kPi, kPi));
        Eigen::MatrixXcd Si = S.inverse();
        Eigen::MatrixXcd A0 = S * ev.asDiagonal() * Si;
        Eigen::MatrixXcd P0 = S.col(0) * Si.row(0);
        const double iso = operator_norm(A0 - a0 * P0);
        if (iso >= std::abs(a0)) continue;
        const double r = rng.uniform(0.1, 0.9) * (std::abs(a0) - iso);
        Eigen::MatrixXcd A1 = rng.matrix(N, N);
        A1 *= rng.uniform(0.001, 0.3) / operator_norm(A1);
        auto pb = eigen_persistence_bound(A0, a0, P0, A1, r);
        if (!pb.persists) continue;
        ++checked;

        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(A0 + A1);
        int best = 0;
        for (int i = 1; i < N; ++i)
            if (std::abs(es.eigenvalues()[i] - a0) < std::abs(es.eigenvalues()[best] - a0)) best = i;
        cd a = es.eigenvalues()[best];
        Eigen::MatrixXcd V = es.eigenvectors(), Vi = V.inverse();
        Eigen::MatrixXcd P = V.col(best) * Vi.row(best);
        CHECK(std::abs(a - a0) <= r);
        CHECK(std::abs(a - a0) <= pb.eig_shift * (1 + 1e-9));
        CHECK(operator_norm(P - P0) <= pb.proj_shift * (1 + 1e-9));
    }
    CHECK(checked > 100);
}

// ---------------------------------------------------------------- flow

TEST_CASE("internal basis: relative coordinates and S_0") {
    auto b = internal_basis(2, 1, 8);
    CHECK(b.dim() == 32);
    int s0 = 0;
    for (int s = 0; s < b.dim(); ++s) s0 += b.in_s0(s);
    CHECK(s0 == 2);
    for (int r = 0; r < b.rel(); ++r) {
        CHECK(((2 * b.v[r][0] + b.eta[r][0]) % 8 + 8) % 8 == r);
        CHECK(4 * b.v[r][0] > -8);
        CHECK(4 * b.v[r][0] <= 8);
    }
    Eigen::MatrixXcd T = b.transform({cd(0.3, 0.05)});
    CHECK((T * T.inverse() - Eigen::MatrixXcd::Identity(8, 8)).norm() < 1e-12);
    CHECK_THROWS_AS(internal_basis(2, 1, 7), ConfigError);
}

TEST_CASE("seed state: trace preservation, projector and spectral data") {
    auto& fx = fixture();
    auto s = seed_state(fx.rates, fx.lamb, 1.0, 1.0, quick());
    CHECK(std::abs(leading_log(s.symbol(px(1, 0.0)))) < 1e-12);
    Eigen::MatrixXcd T0 = s.hat(px(1, 0.0));
    CHECK((T0 * s.mu - s.mu).norm() < 1e-10);
    cd on_s0 = 0;
    Eigen::VectorXcd one = Eigen::VectorXcd::Zero(s.basis.dim());
    for (int i = 0; i < s.basis.dim(); ++i)
        if (s.basis.in_s0(i)) {
            on_s0 += s.mu[i];
            one[i] = 1;
        }
    CHECK(std::abs(on_s0 - 1.0) < 1e-12);
    // trace preservation: <1_S0| T^(0) = <1_S0|
    CHECK((one.transpose() * T0 - one.transpose()).norm() < 1e-10);
    Eigen::MatrixXcd R = s.mu * one.transpose();
    CHECK((R * R - R).norm() < 1e-10);
    // the seed diffusion constant is tau0 times the Markov one
    auto gk = diffusion_green_kubo(fx.rates, stationary_density(fx.rates));
    CHECK(std::abs(s.D / gk.D_Q - 1) < 1e-6);
}

TEST_CASE("closed-form population block agrees with the fiber operator") {
    auto& fx = fixture();
    auto gen = seed_generator(fx.rates, fx.lamb, 1.0, 1.0);
    // reflection in k relates the two bases; compare spectra and traces
    for (cd p : {cd(0.4, 0), cd(-1.1, 0.03), cd(2.5, -0.05)}) {
        auto G = gen(px(1, p));
        FiberOptions opt;
        opt.gamma0 = 1;
        auto F = fiber_operator(0.0, px(1, -p), fx.rates, fx.lamb, opt);
        CHECK(std::abs(G.zero.trace() - F.matrix.trace()) < 1e-10);
        CHECK(std::abs((G.zero * G.zero).trace() - (F.matrix * F.matrix).trace()) < 1e-9);
        auto a = exponentiate(G, 1.0);
        Eigen::MatrixXcd E = (F.matrix).exp();
        CHECK(std::abs(a.zero.trace() - E.trace()) < 1e-9);
    }
}

TEST_CASE("noise-free flow: eigenvalue scaling, constant D, literal powering") {
    auto& fx = fixture();
    auto s0 = seed_state(fx.rates, fx.lamb, 1.0, 1.0, quick());
    auto s1 = rg_step(s0);
    auto s2 = rg_step(s1);
    const double ell = s0.params.ell;
    double worst = 0;
    for (std::size_t j = 0; j < s1.grid.size(); ++j) {
        cd want = ell * ell * leading_log(s0.symbol(px(1, s1.grid[j] / ell)));
        worst = std::max(worst, std::abs(s1.f[j] - want));
    }
    CHECK(worst < 1e-10);
    CHECK(std::abs(s1.D - s0.D) < 1e-10 * s0.D);
    CHECK(std::abs(s2.D - s0.D) < 1e-10 * s0.D);

    auto lit = literal_step(s0);
    for (double p : {0.0, 0.7, -2.0}) {
        auto a = lit(px(1, p)), b = s1.symbol(px(1, p));
        double scale = std::max(1e-300, b.zero.cwiseAbs().maxCoeff());
        CHECK((a.zero - b.zero).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, scale));
        for (std::size_t i = 0; i < a.coherence.size(); ++i)
            if (a.coherence[i].size()) CHECK((a.coherence[i] - b.coherence[i]).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("gap amplification over one step") {
    auto& fx = fixture();
    auto s0 = seed_state(fx.rates, fx.lamb, 1.0, 0.25, quick());
    auto s1 = rg_step(s0);
    CHECK(s0.gap > 0);
    CHECK(s1.gap <= std::pow(s0.gap, 16) * (1 + 1e-9) + 1e-300);
    CHECK(!s1.gap_collapse);
}

TEST_CASE("induction checks at n = 0 and a corrupted negative control") {
    auto& fx = fixture();
    auto s = seed_state(fx.rates, fx.lamb, 1.0, 20.0, quick());
    auto r = verify_induction(s, s.D);
    CHECK(r.strip_ok);
    CHECK(r.parabola_ok);
    CHECK(r.gap_ok);
    CHECK(r.position_ok);
    CHECK(r.envelope_ok);
    CHECK(r.passes());
    MESSAGE("strip ", r.strip_max, " parabola ", r.parabola_ratio, " gap ", r.small_gap, "/", r.large_gap,
            " position ", r.position_C);

    // replace the populations by the identity: no contraction of the complement
    RGState bad = s;
    auto sym = s.symbol;
    bad.symbol = [sym](const std::vector<cd>& p) {
        auto B = sym(p);
        B.zero = Eigen::MatrixXcd::Identity(B.zero.rows(), B.zero.cols());
        B.lead_log = cd(std::nan(""), 0);
        return B;
    };
    track_spectrum(bad);
    CHECK(bad.gap_collapse);
    CHECK(!verify_induction(bad, s.D).passes());
}

TEST_CASE("f_n is invariant under lattice symmetries") {
    auto& fx = fixture();
    auto s = rg_step(seed_state(fx.rates, fx.lamb, 1.0, 1.0, quick()));
    gen::Rng rng(51);
    for (int trial = 0; trial < 10; ++trial) {
        cd p(rng.uniform(-3, 3), rng.uniform(-0.05, 0.05));
        CHECK(std::abs(leading_log(s.symbol(px(1, p))) - leading_log(s.symbol(px(1, -p)))) < 1e-10);
        CHECK(std::abs(s.hat(px(1, p)).trace() - s.hat(px(1, -p)).trace()) < 1e-10);
    }

    Model m2 = fx.model;
    m2.bath.d = 2;
    m2.bath.L = 8;
    m2.bath.prepare();
    m2.bins = 8;
    auto r2 = markov_rates(m2);
    auto l2 = lamb_shift(m2);
    auto s2 = seed_state(r2, l2, 1.0, 1.0, quick());
    for (int trial = 0; trial < 4; ++trial) {
        double a = rng.uniform(-1.5, 1.5), b = rng.uniform(-1.5, 1.5);
        cd ref = leading_log(s2.symbol(px(2, a, b)));
        CHECK(std::abs(leading_log(s2.symbol(px(2, b, a))) - ref) < 1e-10);
        CHECK(std::abs(leading_log(s2.symbol(px(2, -a, b))) - ref) < 1e-10);
        CHECK(std::abs(leading_log(s2.symbol(px(2, a, -b))) - ref) < 1e-10);
    }
}

TEST_CASE("transported trace tends to the Gaussian") {
    auto& fx = fixture();
    auto s = seed_state(fx.rates, fx.lamb, 1.0, 1.0, quick());
    auto rho = product_density(0, {1, 2, 1}, 1);
    CHECK(std::abs(transported_trace(s, rho, px(1, 0.0)) - 1.0) < 1e-12);
    double prev = gaussian_deviation(s, rho, 1.0, s.D, 1.0, 11);
    for (int n = 1; n <= 3; ++n) {
        s = rg_step(s);
        double dev = gaussian_deviation(s, rho, 1.0, s.D, 1.0, 11);
        CHECK(dev < prev);
        prev = dev;
    }
    CHECK(prev < 1e-3);
}

TEST_CASE("position kernel: the seed kernel is recovered from its transform") {
    auto& fx = fixture();
    auto s = seed_state(fx.rates, fx.lamb, 1.0, 1.0, quick());
    auto K = position_kernel(s, 6);
    for (cd p : {cd(0.3, 0), cd(-1.0, 0.02)}) {
        Eigen::MatrixXcd a = fourier(K, px(1, p)), b = s.hat(px(1, p));
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("flow table and snapshot writers") {
    auto dir = std::string(QDIFF_SOURCE_DIR) + "/build";
    std::vector<FlowRow> rows{{0, 0.16, 1e-3, 0.1, 1.3}, {1, 0.16, 1e-40, 0.01, 1.3}};
    write_flow_csv(dir + "/flow_test.csv", rows, "default_d1");
    std::ifstream in(dir + "/flow_test.csv");
    std::string l1, l2;
    std::getline(in, l1);
    std::getline(in, l2);
    CHECK(l2 == "n,D_n,gap,parabola_residual,strip_max");

    auto sp = small_space(5, 2);
    LatticeKernel K{sp, {}};
    for (int x = 0; x < sp->sites(); ++x) K.values.push_back(Eigen::MatrixXcd::Constant(2, 2, cd(x, -x)));
    write_kernel_snapshot(dir + "/snap_test.bin", K, 3, 1);
    std::ifstream b(dir + "/snap_test.bin", std::ios::binary);
    std::int32_t hdr[4];
    b.read(reinterpret_cast<char*>(hdr), sizeof hdr);
    CHECK(hdr[0] == 3);
    CHECK(hdr[1] == 1);
    CHECK(hdr[2] == 1);
    CHECK(hdr[3] == 2);
    double z[2];
    b.read(reinterpret_cast<char*>(z), sizeof z);
    // first site of the box is x = -1, stored at torus index 4
    CHECK(z[0] == 4.0);
    CHECK(z[1] == -4.0);
}
