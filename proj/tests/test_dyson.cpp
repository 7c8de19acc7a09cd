#include <doctest.h>

#include <cmath>

#include "gen.hpp"
#include "qdiff/dyson.hpp"
#include "qdiff/errors.hpp"

using namespace qdiff;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

namespace {

constexpr double kPi = 3.14159265358979323846;

ToySystem dyson_toy(double lambda) {
    ToySystem t;
    t.levels = {0.0, 0.7};
    t.L = 2;
    t.modes = {ToyMode{kPi, 1.0, 1.0, -1}};
    t.lambda = lambda;
    t.build();
    return t;
}

// spin 1 x ring 2, one mode
ToySystem ring_toy(double lambda = 0.5) {
    ToySystem t;
    t.levels = {0.0};
    t.L = 2;
    t.modes = {ToyMode{kPi, 1.0, 1.0, -1}};
    t.lambda = lambda;
    t.build();
    return t;
}

// spin 2 x ring 1, two modes
ToySystem two_mode_toy(double lambda = 0.5) {
    ToySystem t;
    t.levels = {0.0, 0.7};
    t.L = 1;
    t.modes = {ToyMode{0.0, 1.0, 1.0, -1}, ToyMode{0.0, 1.6, 0.8, -1}};
    t.lambda = lambda;
    t.build();
    return t;
}

double max_abs(const MatrixXcd& M) { return M.cwiseAbs().maxCoeff(); }

double max_diff(const Kernel& a, const Kernel& b) {
    REQUIRE(a.data.size() == b.data.size());
    double r = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) r = std::max(r, std::abs(a.data[i] - b.data[i]));
    return r;
}

double max_abs(const Kernel& a) {
    double r = 0;
    for (auto v : a.data) r = std::max(r, std::abs(v));
    return r;
}

VectorXcd vec(const MatrixXcd& rho) {
    VectorXcd v(rho.size());
    for (int i = 0; i < rho.rows(); ++i)
        for (int j = 0; j < rho.cols(); ++j) v(i * rho.cols() + j) = rho(i, j);
    return v;
}

cd trace_vec(const VectorXcd& v, int d) {
    cd s = 0;
    for (int i = 0; i < d; ++i) s += v(i * d + i);
    return s;
}

SEOperator random_se(gen::Rng& rng, int n, int nE, int legs) {
    SEOperator D;
    D.n = n;
    D.legs = legs;
    std::size_t nb = 1;
    for (int i = 0; i < legs; ++i) nb *= static_cast<std::size_t>(n) * n;
    for (std::size_t p = 0; p < nb; ++p) D.blocks.push_back(rng.matrix(nE, nE));
    return D;
}

double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += std::log(x[i]) / x.size(), my += std::log(y[i]) / y.size();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
        den += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
    }
    return num / den;
}

}  // namespace

TEST_CASE("toy system assembly") {
    auto toy = dyson_toy(0.3);
    CHECK(toy.dim() == 16);
    MatrixXcd H = toy.hamiltonian();
    CHECK(max_abs(H - H.adjoint()) < 1e-15);
    CHECK(std::abs(toy.rho_ref.trace() - 1.0) < 1e-15);
    CHECK(two_mode_toy().dim() == 32);
    CHECK(ring_toy().dim() == 8);

    ToySystem bad;
    bad.W = MatrixXcd::Zero(2, 2);
    bad.W(0, 1) = 1.0;
    CHECK_THROWS_AS(bad.build(), NonHermitianCoupling);
}

TEST_CASE("exact reduced dynamics: identity, trace, decoupled limit") {
    auto toy = dyson_toy(0.4);
    const int n = toy.dS * toy.dS;
    CHECK(max_abs(exact_reduced_dynamics(toy, 0.0) - MatrixXcd::Identity(n, n)) < 1e-14);

    gen::Rng rng(11);
    MatrixXcd Z = exact_reduced_dynamics(toy, 2.3);
    for (int i = 0; i < 20; ++i) {
        MatrixXcd rho = rng.density(toy.dS);
        CHECK(std::abs(trace_vec(Z * vec(rho), toy.dS) - 1.0) < 1e-12);
    }

    auto free = dyson_toy(0.0);
    MatrixXcd U = conjugation(unitary(free.H_S, 1.7));
    CHECK(max_abs(exact_reduced_dynamics(free, 1.7) - U) < 1e-12);
}

TEST_CASE("pairings") {
    CHECK(pairings(2).size() == 1);
    CHECK(pairings(4).size() == 3);
    CHECK(pairings(6).size() == 15);
    CHECK(pairings(3).empty());
    for (const auto& p : pairings(6)) {
        std::vector<int> seen(6, 0);
        for (auto [u, v] : p) {
            CHECK(u < v);
            ++seen[u];
            ++seen[v];
        }
        for (int s : seen) CHECK(s == 1);
    }
}

TEST_CASE("Dyson order zero is the free propagator") {
    auto toy = dyson_toy(0.2);
    MatrixXcd U = conjugation(unitary(toy.H_S, 2.0));
    CHECK(max_abs(dyson_expansion(toy, 2.0, 0) - U) < 1e-13);
}

TEST_CASE("Dyson terms against the exact dynamics") {
    const double t = 2.0;
    static const auto orders = dyson_orders(dyson_toy(0.1), t, 2);

    SUBCASE("finite differences") {
        // Z(lambda) is even in lambda; Richardson on (Z(l) - Z(0)) / l^2 isolates
        // the l^2 coefficient, and the l^4 one from the remainder.
        auto Zl = [&](double l) { return exact_reduced_dynamics(dyson_toy(l), t); };
        MatrixXcd Z0 = Zl(0.0);
        auto f = [&](double l) -> MatrixXcd { return (Zl(l) - Z0) / (l * l); };
        MatrixXcd J1 = (4.0 * f(0.01) - f(0.02)) / 3.0;
        CHECK(max_abs(orders[1] - J1) < 1e-6 * max_abs(J1));

        auto g = [&](double l) -> MatrixXcd { return (Zl(l) - Z0 - l * l * orders[1]) / std::pow(l, 4); };
        MatrixXcd J2 = (4.0 * g(0.025) - g(0.05)) / 3.0;
        CHECK(max_abs(orders[2] - J2) < 1e-4 * max_abs(J2));
    }

    SUBCASE("truncation error scales as lambda^(2m+2)") {
        std::vector<double> lams{0.2, 0.1, 0.05};
        for (int m = 1; m <= 2; ++m) {
            std::vector<double> err;
            for (double l : lams) {
                MatrixXcd D = MatrixXcd::Zero(orders[0].rows(), orders[0].cols());
                for (int k = 0; k <= m; ++k) D += std::pow(l, 2 * k) * orders[k];
                err.push_back(max_abs(exact_reduced_dynamics(dyson_toy(l), t) - D));
            }
            double slope = log_slope(lams, err);
            INFO("m = " << m << " slope = " << slope);
            CHECK(std::abs(slope - (2 * m + 2)) < 0.3);
        }
    }
}

TEST_CASE("Dyson quadrature budget") {
    auto toy = dyson_toy(0.1);
    CHECK_THROWS_AS(dyson_orders(toy, 1.0, 3), QuadratureBudget);
    CHECK_THROWS_AS(dyson_orders(toy, 1.0, 4), QuadratureBudget);
    DysonOptions opt;
    opt.nodes = 2;
    CHECK(dyson_orders(toy, 1.0, 3, opt).size() == 4);
}

TEST_CASE("odot is associative and E is linear") {
    gen::Rng rng(5);
    for (int it = 0; it < 20; ++it) {
        auto X = random_se(rng, 2, 3, 1), Y = random_se(rng, 2, 3, 1), Z = random_se(rng, 2, 3, 1);
        auto a = odot(odot(X, Y), Z), b = odot(X, odot(Y, Z));
        double r = 0;
        for (std::size_t p = 0; p < a.blocks.size(); ++p) r = std::max(r, max_abs(a.blocks[p] - b.blocks[p]));
        CHECK(r < 1e-12);

        VectorXcd ref = rng.matrix(9, 1), tr = rng.matrix(9, 1);
        cd s = rng.complex_normal();
        SEOperator lin = X;
        for (std::size_t p = 0; p < lin.blocks.size(); ++p) lin.blocks[p] = X.blocks[p] + s * Y.blocks[p];
        VectorXcd lhs = expect(lin, ref, tr), rhs = expect(X, ref, tr) + s * expect(Y, ref, tr);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12 * (1 + rhs.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("correlation tensors agree with the explicit odot chain") {
    auto toy = ring_toy();
    auto C = toy_correlations(toy, 1.0);
    SEOperator b1{C.n, 1, C.B_at(1)}, b2{C.n, 1, C.B_at(2)}, b4{C.n, 1, C.B_at(4)};
    VectorXcd chain = expect(odot(b4, odot(b2, b1)), C.ref, C.trace);
    Kernel G = C.correlation({1, 2, 4});
    std::vector<int> out(3), in(3);
    double r = 0;
    const int n = C.n;
    for (std::size_t c = 0; c < static_cast<std::size_t>(chain.size()); ++c) {
        std::size_t q = c;
        for (int i = 2; i >= 0; --i) {
            int p = static_cast<int>(q % (n * n));
            q /= n * n;
            out[i] = p / n;
            in[i] = p % n;
        }
        r = std::max(r, std::abs(chain(c) - G.data[G.index(out, in)]));
    }
    CHECK(r < 1e-13);
    CHECK(max_abs(G) > 1e-4);
}

TEST_CASE("excitation operator has zero expectation") {
    for (const auto& toy : {ring_toy(), two_mode_toy(), dyson_toy(0.5)}) {
        auto C = toy_correlations(toy, 1.0);
        for (int tau = 1; tau <= 3; ++tau) CHECK(max_abs(C.expect_B(tau)) < 1e-11);
    }
}

TEST_CASE("correlations are translation invariant") {
    auto C = toy_correlations(two_mode_toy(), 1.0);
    Kernel a = C.correlation({1, 3}), b = C.correlation({2, 4});
    CHECK(max_diff(a, b) < 1e-10);
    CHECK(max_abs(a) > 1e-4);
}

TEST_CASE("correlation expansion reconstructs the reduced dynamics") {
    for (const auto& toy : {ring_toy(), two_mode_toy()}) {
        const double t0 = 1.0;
        auto C = toy_correlations(toy, t0);
        Kernel total = zero_kernel(C.space, {1});
        for (unsigned mask = 0; mask < 8; ++mask) {
            std::vector<Kernel> f;
            std::vector<int> A;
            for (int tau = 1; tau <= 3; ++tau)
                if (mask >> (tau - 1) & 1u) A.push_back(tau);
                else f.push_back(C.T_kernel(tau));
            if (!A.empty()) f.push_back(C.correlation(A));
            Kernel term = contract(f);
            for (std::size_t i = 0; i < term.data.size(); ++i) total.data[i] += term.data[i];
        }
        MatrixXcd Z = exact_reduced_dynamics(toy, 3 * t0);
        double r = 0;
        for (int a = 0; a < C.n; ++a)
            for (int b = 0; b < C.n; ++b) r = std::max(r, std::abs(total.data[a * C.n + b] - Z(a, b)));
        CHECK(r < 1e-9);
    }
}

TEST_CASE("cumulants: low-order formulas and re-summation") {
    auto C = toy_correlations(ring_toy(), 1.0);
    auto tab = correlation_table(C, {1, 2, 3, 4}, 4);
    cumulants(tab);
    for (int tau = 1; tau <= 4; ++tau) CHECK(max_abs(tab.Gc.at({tau})) < 1e-11);

    const auto& G12 = tab.G.at({1, 2});
    Kernel two = G12;
    Kernel prod = outer({tab.Gc.at({1}), tab.Gc.at({2})});
    for (std::size_t i = 0; i < two.data.size(); ++i) two.data[i] -= prod.data[i];
    CHECK(max_diff(tab.Gc.at({1, 2}), two) < 1e-15);
    CHECK(max_diff(tab.Gc.at({1, 2}), G12) < 1e-11);

    Kernel three = tab.G.at({1, 2, 3});
    for (const auto& f : {outer({tab.Gc.at({1, 2}), tab.Gc.at({3})}), outer({tab.Gc.at({1, 3}), tab.Gc.at({2})}),
                          outer({tab.Gc.at({2, 3}), tab.Gc.at({1})}),
                          outer({tab.Gc.at({1}), tab.Gc.at({2}), tab.Gc.at({3})})})
        for (std::size_t i = 0; i < three.data.size(); ++i) three.data[i] -= f.data[i];
    CHECK(max_diff(tab.Gc.at({1, 2, 3}), three) < 1e-15);

    for (const std::vector<int>& A : {std::vector<int>{1, 2, 3}, std::vector<int>{1, 2, 3, 4}}) {
        Kernel sum = zero_kernel(C.space, A);
        for (const auto& part : set_partitions(A)) {
            std::vector<Kernel> f;
            for (const auto& blk : part) f.push_back(tab.Gc.at(blk));
            Kernel p = outer(f);
            for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += p.data[i];
        }
        CHECK(max_diff(sum, tab.G.at(A)) < 1e-14);
    }
    CHECK(set_partitions({1, 2, 3, 4}).size() == 15);

    CorrelationTable gap;
    gap.G.emplace(std::vector<int>{1, 2}, tab.G.at({1, 2}));
    gap.G.emplace(std::vector<int>{1}, tab.G.at({1}));
    CHECK_THROWS_AS(cumulants(gap), MissingSubset);
}

TEST_CASE("cumulants factorize across independent reservoirs") {
    // Each spin level couples to its own mode; a leg supported on the level-e
    // block sees reservoir e only.
    ToySystem toy;
    toy.levels = {0.0, 0.7};
    toy.L = 2;
    toy.n_fock = 1;
    toy.modes = {ToyMode{kPi, 1.0, 1.0, 0}, ToyMode{kPi, 1.3, 1.0, 1}};
    toy.lambda = 0.6;
    toy.build();
    CHECK(toy.dim() == 16);
    auto C = toy_correlations(toy, 1.0);
    auto tab = correlation_table(C, {1, 2, 3}, 3);
    cumulants(tab);

    const int dS = toy.dS, n = C.n;
    auto sector = [&](int pair) {
        int a = pair / dS, b = pair % dS;
        int ea = a / toy.L, eb = b / toy.L;
        return ea == eb ? ea : -1;
    };
    double cross = 0, same = 0;
    for (const auto& [A, Gc] : tab.Gc) {
        const int m = static_cast<int>(A.size());
        if (m < 2) continue;
        std::vector<int> dig(2 * m, 0);
        for (std::size_t idx = 0; idx < Gc.data.size(); ++idx) {
            std::size_t r = idx;
            for (int k = 2 * m - 1; k >= 0; --k) {
                dig[k] = static_cast<int>(r % n);
                r /= n;
            }
            std::vector<int> sec(m);
            bool ok = true;
            for (int i = 0; i < m; ++i) {
                int so = sector(dig[i]), si = sector(dig[m + i]);
                if (so < 0 || so != si) ok = false;
                sec[i] = so;
            }
            if (!ok) continue;
            bool mixed = std::any_of(sec.begin(), sec.end(), [&](int s) { return s != sec[0]; });
            (mixed ? cross : same) = std::max(mixed ? cross : same, std::abs(Gc.data[idx]));
        }
    }
    CHECK(cross < 1e-10);
    CHECK(same > 1e-4);
}

TEST_CASE("Ward identity from unitarity") {
    for (const auto& toy : {ring_toy(), two_mode_toy()}) {
        auto C = toy_correlations(toy, 1.0);
        auto tab = correlation_table(C, {1, 2, 3}, 3);
        cumulants(tab);
        for (const auto& [A, Gc] : tab.Gc) {
            if (A.size() < 2) continue;
            INFO("|A| = " << A.size());
            CHECK(ward_unitarity(Gc) < 1e-10);
            CHECK(max_abs(Gc) > 1e-5);
        }
    }

    // Trace-breaking damping on one system state.
    auto toy = ring_toy();
    CorrelationOptions broken;
    broken.kraus = Eigen::VectorXd::Ones(toy.dS);
    broken.kraus(1) = std::sqrt(0.9);
    auto C = toy_correlations(toy, 1.0, broken);
    auto tab = correlation_table(C, {1, 2, 3}, 2);
    cumulants(tab);
    CHECK(ward_unitarity(tab.Gc.at({1, 2})) > 1e-3);
    CHECK(ward_unitarity(tab.Gc.at({1, 3})) > 1e-3);
}

TEST_CASE("cumulant recursion from scale 0 to 1") {
    auto toy = ring_toy();
    auto one = cumulant_recursion_check(toy, 1.0, {1}, 2);
    CHECK(one.deviation < 1e-9);
    CHECK(one.collections == 5);

    auto two = cumulant_recursion_check(toy, 1.0, {1, 2}, 2);
    CHECK(two.deviation < 1e-8);
    CHECK(max_abs(two.left) > 1e-4);

    auto zero = cumulant_recursion_check(toy, 1.0, {1}, 2, true);
    auto C = toy_correlations(toy, 1.0);
    MatrixXcd T2 = C.T * C.T;
    double r = 0;
    for (int a = 0; a < C.n; ++a)
        for (int b = 0; b < C.n; ++b) r = std::max(r, std::abs(zero.right.data[a * C.n + b] - T2(a, b)));
    CHECK(r < 1e-15);
    CHECK(zero.deviation > 1e-4);
}

TEST_CASE("dist and spanning trees") {
    CHECK(dist({1, 3, 7}) == 15);
    CHECK(dist({5}) == 1);
    CHECK(dist({4, 2, 1}) == 6);
    for (int k = 1; k <= 6; ++k) {
        long expect_count = k <= 2 ? 1 : static_cast<long>(std::pow(k, k - 2));
        CHECK(static_cast<long>(spanning_trees(k).size()) == expect_count);
    }
    auto trees = spanning_trees(3);
    CHECK(trees.size() == 3);
    long star = 1;
    for (auto [a, b] : std::vector<std::pair<int, int>>{{0, 1}, {0, 2}}) star *= 1 + std::abs(std::vector<int>{1, 2, 4}[a] - std::vector<int>{1, 2, 4}[b]);
    CHECK(star == 8);
    CHECK(tree_bound_check({1, 2, 4}));

    gen::Rng rng(3);
    for (int it = 0; it < 200; ++it) {
        std::vector<int> A;
        int k = rng.integer(1, 6);
        while (static_cast<int>(A.size()) < k) {
            int t = rng.integer(0, 30);
            if (std::find(A.begin(), A.end(), t) == A.end()) A.push_back(t);
        }
        CHECK(tree_bound_check(A));
    }
}

TEST_CASE("Kotecky-Preiss criterion on interval polymers") {
    const int n_max = 6;
    const unsigned full = 1u << (n_max + 1);
    auto weights = [&](double eps) {
        std::vector<double> w(full, 0.0);
        for (int a = 0; a <= n_max; ++a)
            for (int len = 1; len <= 3 && a + len - 1 <= n_max; ++len) {
                unsigned S = 0;
                for (int i = a; i < a + len; ++i) S |= 1u << i;
                w[S] = std::pow(eps, len);
            }
        return w;
    };

    auto none = kotecky_preiss_check(std::vector<double>(full, 0.0), n_max, 1.0, 0b1);
    CHECK(none.hypothesis_holds);
    CHECK(none.conclusion_holds);
    CHECK(none.conclusion_sum == 0.0);

    // eps with hypothesis ratio 0.5
    double lo = 0, hi = 1;
    for (int it = 0; it < 60; ++it) {
        double mid = (lo + hi) / 2;
        (kotecky_preiss_check(weights(mid), n_max, 1.0, 0b1).hypothesis_ratio < 0.5 ? lo : hi) = mid;
    }
    for (unsigned Sp : {0b1u, 0b1000u, 0b110u, 0b1010101u}) {
        auto r = kotecky_preiss_check(weights(lo), n_max, 1.0, Sp);
        CHECK(std::abs(r.hypothesis_ratio - 0.5) < 1e-9);
        CHECK(r.hypothesis_holds);
        CHECK(r.conclusion_holds);
        CHECK(r.conclusion_sum > 0);
        CHECK(r.collections == (1u << 18) - 1);
    }

    auto big = kotecky_preiss_check(weights(0.9), n_max, 1.0, 0b1);
    CHECK_FALSE(big.hypothesis_holds);

    CHECK_THROWS_AS(kotecky_preiss_check(weights(0.1), n_max, 1.0, 0b1, 1000), ResourceCap);
}
