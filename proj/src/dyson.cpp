#include "qdiff/dyson.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>

#include "qdiff/errors.hpp"
#include "qdiff/parallel.hpp"

namespace qdiff {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

namespace {

MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
    MatrixXcd r(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return r;
}

bool hermitian(const MatrixXcd& X) { return (X - X.adjoint()).cwiseAbs().maxCoeff() < 1e-14; }

// Gauss-Legendre on [0, 1] by Golub-Welsch.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = k / std::sqrt(4.0 * k * k - 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < n; ++i) {
        x[i] = 0.5 * (1 + es.eigenvalues()(i));
        w[i] = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
    }
}

// Terms of <phi_a(s) phi_b(0)> = sum amp exp(i freq s) in the Fock basis.
struct TwoPoint {
    std::vector<cd> amp;
    std::vector<double> freq;
    cd operator()(double s) const {
        cd r = 0;
        for (std::size_t i = 0; i < amp.size(); ++i) r += amp[i] * std::polar(1.0, freq[i] * s);
        return r;
    }
};

TwoPoint two_point(const MatrixXcd& a, const MatrixXcd& b, const Eigen::VectorXd& E, const Eigen::VectorXd& p) {
    TwoPoint tp;
    for (int m = 0; m < a.rows(); ++m)
        for (int k = 0; k < a.rows(); ++k) {
            cd c = p(m) * a(m, k) * b(k, m);
            if (std::abs(c) < 1e-300) continue;
            tp.amp.push_back(c);
            tp.freq.push_back(E(m) - E(k));
        }
    return tp;
}

}  // namespace

void ToySystem::build() {
    const int nS = static_cast<int>(levels.size());
    if (nS < 1 || L < 1 || n_fock < 1 || modes.empty()) throw ConfigError("toy system needs levels, sites and modes");
    if (W.size() == 0) {
        W = MatrixXcd::Ones(nS, nS);
        if (nS > 1) W(0, 0) = 0.3, W(nS - 1, nS - 1) = -0.4;
    }
    if (W.rows() != nS || !hermitian(W)) throw NonHermitianCoupling("toy W");
    dS = nS * L;
    MatrixXcd shift = MatrixXcd::Zero(L, L);
    for (int x = 0; x < L; ++x) shift((x + 1) % L, x) += 1.0;
    MatrixXcd kin = (2.0 * MatrixXcd::Identity(L, L) - shift - shift.adjoint()) / m_p;
    MatrixXcd hs = MatrixXcd::Zero(nS, nS);
    for (int e = 0; e < nS; ++e) hs(e, e) = levels[e];
    H_S = kron(hs, MatrixXcd::Identity(L, L)) + kron(MatrixXcd::Identity(nS, nS), kin);

    const int nf = n_fock + 1;
    const int mb = static_cast<int>(modes.size());
    dE = 1;
    for (int i = 0; i < mb; ++i) dE *= nf;
    MatrixXcd a1 = MatrixXcd::Zero(nf, nf);
    for (int k = 1; k < nf; ++k) a1(k - 1, k) = std::sqrt(static_cast<double>(k));
    H_E = MatrixXcd::Zero(dE, dE);
    A.clear();
    phi.clear();
    for (int i = 0; i < mb; ++i) {
        MatrixXcd a = MatrixXcd::Identity(1, 1);
        for (int j = 0; j < mb; ++j) a = kron(a, j == i ? a1 : MatrixXcd::Identity(nf, nf));
        H_E += modes[i].omega * a.adjoint() * a;
        MatrixXcd spin = W;
        if (modes[i].sector >= 0) {
            if (modes[i].sector >= nS) throw ConfigError("toy mode sector out of range");
            spin = MatrixXcd::Zero(nS, nS);
            spin(modes[i].sector, modes[i].sector) = 1.0;
        }
        MatrixXcd phase = MatrixXcd::Zero(L, L);
        for (int x = 0; x < L; ++x) phase(x, x) = std::polar(1.0, modes[i].q * x);
        MatrixXcd X = kron(spin, phase);
        if (hermitian(X)) {
            A.push_back(X);
            phi.push_back(modes[i].g * (a + a.adjoint()));
        } else {
            A.push_back(X);
            phi.push_back(modes[i].g * a.adjoint());
            A.push_back(X.adjoint());
            phi.push_back(modes[i].g * a);
        }
    }
    Eigen::VectorXd w(dE);
    const double e0 = H_E.diagonal().real().minCoeff();
    for (int f = 0; f < dE; ++f) w(f) = std::exp(-beta * (H_E(f, f).real() - e0));
    rho_ref = MatrixXcd::Zero(dE, dE);
    rho_ref.diagonal() = (w / w.sum()).cast<cd>();
}

MatrixXcd ToySystem::hamiltonian() const {
    MatrixXcd H = kron(H_S, MatrixXcd::Identity(dE, dE)) + kron(MatrixXcd::Identity(dS, dS), H_E);
    for (std::size_t j = 0; j < A.size(); ++j) H += lambda * kron(A[j], phi[j]);
    return (H + H.adjoint()) / 2.0;
}

std::shared_ptr<const KernelSpace> ToySystem::space() const {
    auto sp = std::make_shared<KernelSpace>();
    sp->d = 1;
    sp->L = 1;
    sp->ell = 2;
    sp->n = 0;
    for (int a = 0; a < dS; ++a)
        for (int b = 0; b < dS; ++b) {
            sp->v.push_back({0});
            sp->s0.push_back(a == b);
        }
    return sp;
}

MatrixXcd left_mult(const MatrixXcd& X) { return kron(X, MatrixXcd::Identity(X.rows(), X.rows())); }
MatrixXcd right_mult(const MatrixXcd& X) { return kron(MatrixXcd::Identity(X.rows(), X.rows()), X.transpose()); }
MatrixXcd conjugation(const MatrixXcd& U) { return kron(U, U.conjugate()); }

MatrixXcd unitary(const MatrixXcd& H, double t) {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(H);
    VectorXcd ph(H.rows());
    for (int i = 0; i < H.rows(); ++i) ph(i) = std::polar(1.0, -es.eigenvalues()(i) * t);
    return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

MatrixXcd exact_reduced_dynamics(const ToySystem& toy, double t) {
    const int dS = toy.dS, dE = toy.dE;
    MatrixXcd U = unitary(toy.hamiltonian(), t);
    MatrixXcd Z(dS * dS, dS * dS);
    for (int i = 0; i < dS; ++i)
        for (int j = 0; j < dS; ++j) {
            // U (|i><j| x rho) U^dagger = U.cols(i) rho U.cols(j)^dagger
            MatrixXcd out = U.middleCols(i * dE, dE) * toy.rho_ref * U.middleCols(j * dE, dE).adjoint();
            for (int a = 0; a < dS; ++a)
                for (int b = 0; b < dS; ++b) Z(a * dS + b, i * dS + j) = out.block(a * dE, b * dE, dE, dE).trace();
        }
    return Z;
}

std::vector<std::vector<std::pair<int, int>>> pairings(int n) {
    std::vector<std::vector<std::pair<int, int>>> out;
    if (n % 2) return out;
    std::vector<std::pair<int, int>> cur;
    std::vector<bool> used(n, false);
    std::function<void()> rec = [&] {
        int first = -1;
        for (int i = 0; i < n; ++i)
            if (!used[i]) {
                first = i;
                break;
            }
        if (first < 0) {
            out.push_back(cur);
            return;
        }
        used[first] = true;
        for (int j = first + 1; j < n; ++j) {
            if (used[j]) continue;
            used[j] = true;
            cur.emplace_back(first, j);
            rec();
            cur.pop_back();
            used[j] = false;
        }
        used[first] = false;
    };
    rec();
    return out;
}

std::vector<MatrixXcd> dyson_orders(const ToySystem& toy, double t, int m, const DysonOptions& opt) {
    if (m < 0 || m > 3) throw QuadratureBudget("order must lie in 0..3");
    const int dS = toy.dS, n = dS * dS, J = static_cast<int>(toy.A.size());
    for (int k = 1; k <= m; ++k) {
        double cost = std::pow(static_cast<double>(opt.nodes), 2 * k) * static_cast<double>(pairings(2 * k).size());
        if (cost > opt.budget)
            throw QuadratureBudget("order " + std::to_string(k) + " needs " + std::to_string(cost) + " evaluations");
    }

    // Work in the eigenbasis of H_S, where free propagators are diagonal.
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(toy.H_S);
    const MatrixXcd& V = es.eigenvectors();
    Eigen::VectorXd bohr(n);
    for (int i = 0; i < dS; ++i)
        for (int j = 0; j < dS; ++j) bohr(i * dS + j) = es.eigenvalues()(i) - es.eigenvalues()(j);
    auto prop = [&](double dt) {
        VectorXcd u(n);
        for (int i = 0; i < n; ++i) u(i) = std::polar(1.0, -bohr(i) * dt);
        return u;
    };
    std::vector<std::array<MatrixXcd, 2>> side(J);  // side[j][a] = (A_j)^a with sign (-1)^a
    for (int j = 0; j < J; ++j) {
        MatrixXcd Ae = V.adjoint() * toy.A[j] * V;
        side[j][0] = left_mult(Ae);
        side[j][1] = -right_mult(Ae);
    }
    Eigen::VectorXd Eb = toy.H_E.diagonal().real(), pb = toy.rho_ref.diagonal().real();
    // zeta[j][j'][later side a][earlier side b]
    std::vector<std::vector<std::array<TwoPoint, 2>>> zeta(J, std::vector<std::array<TwoPoint, 2>>(J));
    for (int j = 0; j < J; ++j)
        for (int jp = 0; jp < J; ++jp) {
            zeta[j][jp][0] = two_point(toy.phi[j], toy.phi[jp], Eb, pb);  // <phi_j(v) phi_j'(u)>
            TwoPoint rev = two_point(toy.phi[jp], toy.phi[j], Eb, pb);    // <phi_j'(u) phi_j(v)>
            for (auto& f : rev.freq) f = -f;
            zeta[j][jp][1] = rev;
        }
    auto zeta_ab = [&](int j, int jp, int a, int b, double s) {
        // (0,0), (1,0) -> <phi(v) phi(u)>; (0,1), (1,1) -> <phi(u) phi(v)>
        (void)a;
        return zeta[j][jp][b](s);
    };

    MatrixXcd Vsup = conjugation(V), Vinv = conjugation(V.adjoint());
    std::vector<MatrixXcd> orders;
    orders.push_back(Vsup * prop(t).asDiagonal() * Vinv);

    std::vector<double> gx, gw;
    gauss_legendre(opt.nodes, gx, gw);
    for (int k = 1; k <= m; ++k) {
        const int nt = 2 * k;
        const auto pairs = pairings(nt);
        std::size_t total = 1;
        for (int i = 0; i < nt; ++i) total *= opt.nodes;
        const std::size_t chunks = std::min<std::size_t>(64, total);
        std::vector<MatrixXcd> acc(chunks, MatrixXcd::Zero(n, n));
        parallel_for(chunks, opt.threads, [&](std::size_t c) {
            std::vector<double> tm(nt);
            std::vector<int> partner(nt), opened_j(nt), opened_b(nt);
            for (std::size_t node = c; node < total; node += chunks) {
                std::size_t r = node;
                double weight = t, hi = t;
                for (int i = nt - 1; i >= 0; --i) {
                    int g = static_cast<int>(r % opt.nodes);
                    r /= opt.nodes;
                    tm[i] = hi * gx[g];
                    weight *= gw[g];
                    if (i > 0) weight *= tm[i];
                    hi = tm[i];
                }
                for (const auto& pr : pairs) {
                    for (auto [u, v] : pr) partner[u] = v, partner[v] = u;
                    std::function<void(int, const MatrixXcd&)> step = [&](int i, const MatrixXcd& M) {
                        double prev = i == 0 ? 0.0 : tm[i - 1];
                        if (i == nt) {
                            acc[c] += weight * (prop(t - prev).asDiagonal() * M);
                            return;
                        }
                        MatrixXcd D = prop(tm[i] - prev).asDiagonal() * M;
                        if (partner[i] > i) {
                            for (int j = 0; j < J; ++j)
                                for (int b = 0; b < 2; ++b) {
                                    opened_j[i] = j;
                                    opened_b[i] = b;
                                    step(i + 1, side[j][b] * D);
                                }
                        } else {
                            int u = partner[i];
                            MatrixXcd Y = MatrixXcd::Zero(n, n);
                            for (int j = 0; j < J; ++j)
                                for (int a = 0; a < 2; ++a)
                                    Y += zeta_ab(j, opened_j[u], a, opened_b[u], tm[i] - tm[u]) * side[j][a];
                            step(i + 1, Y * D);
                        }
                    };
                    step(0, MatrixXcd::Identity(n, n));
                }
            }
        });
        MatrixXcd sum = MatrixXcd::Zero(n, n);
        for (const auto& a : acc) sum += a;
        orders.push_back((k % 2 ? -1.0 : 1.0) * (Vsup * sum * Vinv));
    }
    return orders;
}

MatrixXcd dyson_expansion(const ToySystem& toy, double t, int m, const DysonOptions& opt) {
    auto orders = dyson_orders(toy, t, m, opt);
    MatrixXcd Z = MatrixXcd::Zero(orders[0].rows(), orders[0].cols());
    double lam2 = 1;
    for (const auto& o : orders) {
        Z += lam2 * o;
        lam2 *= toy.lambda * toy.lambda;
    }
    return Z;
}

ToyCorrelations toy_correlations(const ToySystem& toy, double t0, const CorrelationOptions& opt) {
    ToyCorrelations C;
    const int dS = toy.dS, dE = toy.dE, n = dS * dS, nE = dE * dE;
    C.space = toy.space();
    C.n = n;
    C.nE = nE;
    C.t0 = opt.power * t0;
    MatrixXcd Uf = unitary(toy.hamiltonian(), C.t0);
    Eigen::VectorXd kraus = opt.kraus.size() ? opt.kraus : Eigen::VectorXd::Ones(dS);
    if (kraus.size() != dS) throw ConfigError("kraus diagonal must have dim S entries");

    C.ref.resize(nE);
    C.trace = VectorXcd::Zero(nE);
    C.F.resize(nE);
    for (int e = 0; e < dE; ++e)
        for (int f = 0; f < dE; ++f) {
            C.ref(e * dE + f) = toy.rho_ref(e, f);
            C.F(e * dE + f) = std::polar(1.0, -(toy.H_E(e, e).real() - toy.H_E(f, f).real()) * C.t0);
        }
    for (int e = 0; e < dE; ++e) C.trace(e * dE + e) = 1.0;

    C.U.assign(static_cast<std::size_t>(n) * n, MatrixXcd());
    C.T.resize(n, n);
    for (int a = 0; a < dS; ++a)
        for (int b = 0; b < dS; ++b)
            for (int c = 0; c < dS; ++c)
                for (int d = 0; d < dS; ++d) {
                    MatrixXcd blk(nE, nE);
                    auto L = Uf.block(a * dE, c * dE, dE, dE);
                    MatrixXcd R = Uf.block(b * dE, d * dE, dE, dE).conjugate();
                    double kr = kraus(a) * kraus(b);
                    for (int e = 0; e < dE; ++e)
                        for (int f = 0; f < dE; ++f)
                            for (int g = 0; g < dE; ++g)
                                for (int h = 0; h < dE; ++h) blk(e * dE + f, g * dE + h) = kr * L(e, g) * R(f, h);
                    int sp = a * dS + b, s = c * dS + d;
                    C.T(sp, s) = C.trace.dot(blk * C.ref);  // dot conjugates the real 0/1 trace vector
                    C.U[sp * n + s] = std::move(blk);
                }
    C.B.resize(C.U.size());
    for (int sp = 0; sp < n; ++sp)
        for (int s = 0; s < n; ++s) {
            C.B[sp * n + s] = C.U[sp * n + s];
            C.B[sp * n + s].diagonal() -= C.T(sp, s) * C.F;
        }
    return C;
}

Kernel ToyCorrelations::T_kernel(int time) const {
    Kernel K = zero_kernel(space, {time});
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) K.data[a * n + b] = T(a, b);
    return K;
}

std::vector<MatrixXcd> ToyCorrelations::B_at(int tau) const {
    VectorXcd lft(nE), rgt(nE);
    for (int i = 0; i < nE; ++i) {
        double ph = std::arg(F(i));
        lft(i) = std::polar(1.0, -tau * ph);
        rgt(i) = std::polar(1.0, (tau - 1) * ph);
    }
    std::vector<MatrixXcd> out(B.size());
    for (std::size_t p = 0; p < B.size(); ++p) out[p] = lft.asDiagonal() * B[p] * rgt.asDiagonal();
    return out;
}

Kernel ToyCorrelations::expect_B(int tau) const { return correlation({tau}); }

Kernel ToyCorrelations::correlation(const std::vector<int>& A) const {
    std::vector<int> times(A);
    std::sort(times.begin(), times.end());
    const int m = static_cast<int>(times.size());
    const int n2 = n * n;
    MatrixXcd Vm = ref;  // columns: combos of earlier legs, newest digit fastest
    for (int i = 0; i + 1 < m; ++i) {
        auto Bt = B_at(times[i]);
        MatrixXcd next(nE, Vm.cols() * n2);
        for (Eigen::Index c = 0; c < Vm.cols(); ++c)
            for (int p = 0; p < n2; ++p) next.col(c * n2 + p) = Bt[p] * Vm.col(c);
        Vm = std::move(next);
    }
    auto Bt = B_at(times[m - 1]);
    MatrixXcd rows(n2, nE);
    for (int p = 0; p < n2; ++p) rows.row(p) = trace.transpose() * Bt[p];
    MatrixXcd vals = rows * Vm;  // (p_last, combo)

    Kernel K = zero_kernel(space, times);
    std::vector<int> out(m), in(m);
    for (Eigen::Index c = 0; c < Vm.cols(); ++c) {
        std::size_t r = c;
        for (int i = m - 2; i >= 0; --i) {
            int p = static_cast<int>(r % n2);
            r /= n2;
            out[i] = p / n;
            in[i] = p % n;
        }
        for (int p = 0; p < n2; ++p) {
            out[m - 1] = p / n;
            in[m - 1] = p % n;
            K.data[K.index(out, in)] = vals(p, c);
        }
    }
    return K;
}

SEOperator odot(const SEOperator& later, const SEOperator& earlier) {
    if (later.n != earlier.n) throw ConfigError("odot of operators on different system spaces");
    SEOperator r;
    r.n = later.n;
    r.legs = later.legs + earlier.legs;
    const std::size_t nl = later.blocks.size();
    r.blocks.resize(nl * earlier.blocks.size());
    for (std::size_t py = 0; py < earlier.blocks.size(); ++py)
        for (std::size_t px = 0; px < nl; ++px) r.blocks[py * nl + px] = later.blocks[px] * earlier.blocks[py];
    return r;
}

VectorXcd expect(const SEOperator& D, const VectorXcd& ref, const VectorXcd& trace) {
    VectorXcd v(D.blocks.size());
    for (std::size_t p = 0; p < D.blocks.size(); ++p) v(p) = trace.transpose() * (D.blocks[p] * ref);
    return v;
}

Kernel outer(const std::vector<Kernel>& parts) {
    if (parts.empty()) throw LabelGap("empty product");
    std::vector<int> times;
    for (const auto& p : parts) times.insert(times.end(), p.times.begin(), p.times.end());
    std::sort(times.begin(), times.end());
    if (std::adjacent_find(times.begin(), times.end()) != times.end()) throw LabelGap("overlapping time sets");
    const int m = static_cast<int>(times.size());
    const std::size_t P = parts[0].space->points();
    std::vector<std::vector<int>> pos(parts.size());
    for (std::size_t f = 0; f < parts.size(); ++f)
        for (int t : parts[f].times)
            pos[f].push_back(static_cast<int>(std::lower_bound(times.begin(), times.end(), t) - times.begin()));
    Kernel K = zero_kernel(parts[0].space, times);
    std::vector<int> dig(2 * m, 0);
    for (std::size_t idx = 0; idx < K.data.size(); ++idx) {
        cd v = 1;
        for (std::size_t f = 0; f < parts.size() && v != 0.0; ++f) {
            std::size_t fi = 0;
            for (int q : pos[f]) fi = fi * P + dig[q];
            for (int q : pos[f]) fi = fi * P + dig[m + q];
            v *= parts[f].data[fi];
        }
        K.data[idx] = v;
        for (int k = 2 * m - 1; k >= 0; --k) {
            if (++dig[k] < static_cast<int>(P)) break;
            dig[k] = 0;
        }
    }
    return K;
}

CorrelationTable correlation_table(const ToyCorrelations& C, const std::vector<int>& times, int max_size) {
    CorrelationTable tab;
    const int N = static_cast<int>(times.size());
    for (unsigned mask = 1; mask < (1u << N); ++mask) {
        if (std::popcount(mask) > max_size) continue;
        std::vector<int> A;
        for (int i = 0; i < N; ++i)
            if (mask >> i & 1u) A.push_back(times[i]);
        std::sort(A.begin(), A.end());
        tab.G.emplace(A, C.correlation(A));
    }
    return tab;
}

std::vector<std::vector<std::vector<int>>> set_partitions(const std::vector<int>& A) {
    std::vector<std::vector<std::vector<int>>> out;
    std::vector<std::vector<int>> cur;
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == A.size()) {
            out.push_back(cur);
            return;
        }
        for (std::size_t b = 0; b < cur.size(); ++b) {
            cur[b].push_back(A[i]);
            rec(i + 1);
            cur[b].pop_back();
        }
        cur.push_back({A[i]});
        rec(i + 1);
        cur.pop_back();
    };
    rec(0);
    return out;
}

void cumulants(CorrelationTable& table) {
    std::vector<std::vector<int>> keys;
    for (const auto& [A, G] : table.G) keys.push_back(A);
    std::stable_sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) { return a.size() < b.size(); });
    table.Gc.clear();
    for (const auto& A : keys) {
        Kernel Gc = table.G.at(A);
        for (const auto& part : set_partitions(A)) {
            if (part.size() < 2) continue;
            std::vector<Kernel> factors;
            for (auto blk : part) {
                std::sort(blk.begin(), blk.end());
                auto it = table.Gc.find(blk);
                if (it == table.Gc.end()) {
                    std::string s;
                    for (int t : blk) s += std::to_string(t) + " ";
                    throw MissingSubset("no correlation for subset { " + s + "}");
                }
                factors.push_back(it->second);
            }
            Kernel prod = outer(factors);
            for (std::size_t i = 0; i < Gc.data.size(); ++i) Gc.data[i] -= prod.data[i];
        }
        table.Gc.emplace(A, std::move(Gc));
    }
}

double ward_unitarity(const Kernel& Gc) {
    const KernelSpace& sp = *Gc.space;
    const int m = Gc.degree(), S = sp.internal();
    const std::size_t P = sp.points();
    std::size_t lo = 1, hi = 1;
    for (int i = 0; i < m; ++i) lo *= P;
    for (int i = 0; i + 1 < m; ++i) hi *= P;
    double worst = 0;
    for (std::size_t h = 0; h < hi; ++h)
        for (std::size_t l = 0; l < lo; ++l) {
            cd s = 0;
            for (std::size_t z = 0; z < P; ++z)
                if (sp.s0[z % S]) s += Gc.data[(h * P + z) * lo + l];
            worst = std::max(worst, std::abs(s * sp.cell()));
        }
    return worst;
}

RecursionCheck cumulant_recursion_check(const ToySystem& toy, double t0, const std::vector<int>& Aprime, int ell2,
                                        bool zero_cumulants) {
    if (Aprime.empty() || Aprime.size() > 2 || ell2 < 1 || ell2 > 4)
        throw ConfigError("recursion check needs 1 <= |A'| <= 2 and ell^2 <= 4");
    ToyCorrelations C0 = toy_correlations(toy, t0);
    CorrelationOptions o1;
    o1.power = ell2;
    ToyCorrelations C1 = toy_correlations(toy, t0, o1);

    std::vector<int> I;
    std::vector<int> block_of;
    for (std::size_t b = 0; b < Aprime.size(); ++b)
        for (int k = 1; k <= ell2; ++k) {
            I.push_back(ell2 * (Aprime[b] - 1) + k);
            block_of.push_back(static_cast<int>(b));
        }
    CorrelationTable t0tab = correlation_table(C0, I, static_cast<int>(I.size()));
    cumulants(t0tab);

    RecursionCheck res;
    res.right = zero_kernel(C0.space, Aprime);
    // Collections of disjoint nonempty subsets of I: label[i] = -1 (uncovered) or block id.
    std::vector<int> label(I.size(), -1);
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int nblocks) {
        if (i == I.size()) {
            if (zero_cumulants && nblocks > 0) return;
            std::vector<std::vector<int>> sets(nblocks);
            for (std::size_t k = 0; k < I.size(); ++k)
                if (label[k] >= 0) sets[label[k]].push_back(I[k]);
            if (Aprime.size() == 2) {
                bool joined = false;
                for (int s = 0; s < nblocks; ++s) {
                    std::set<int> bl;
                    for (std::size_t k = 0; k < I.size(); ++k)
                        if (label[k] == s) bl.insert(block_of[k]);
                    joined |= bl.size() == 2;
                }
                if (!joined) return;
            }
            std::vector<Kernel> factors;
            for (const auto& s : sets) factors.push_back(t0tab.Gc.at(s));
            for (std::size_t k = 0; k < I.size(); ++k)
                if (label[k] < 0) factors.push_back(C0.T_kernel(I[k]));
            Kernel term = contract_blocks(factors, Aprime, ell2);
            for (std::size_t q = 0; q < term.data.size(); ++q) res.right.data[q] += term.data[q];
            ++res.collections;
            return;
        }
        label[i] = -1;
        rec(i + 1, nblocks);
        for (int b = 0; b <= nblocks; ++b) {
            label[i] = b;
            rec(i + 1, std::max(nblocks, b + 1));
        }
        label[i] = -1;
    };
    rec(0, 0);

    if (Aprime.size() == 1) {
        res.left = C1.T_kernel(Aprime[0]);
    } else {
        CorrelationTable t1 = correlation_table(C1, Aprime, 2);
        cumulants(t1);
        res.left = t1.Gc.at(Aprime);
    }
    for (std::size_t q = 0; q < res.left.data.size(); ++q)
        res.deviation = std::max(res.deviation, std::abs(res.left.data[q] - res.right.data[q]));
    return res;
}

long dist(std::vector<int> A) {
    std::sort(A.begin(), A.end());
    long d = 1;
    for (std::size_t j = 1; j < A.size(); ++j) d *= 1 + std::abs(A[j] - A[j - 1]);
    return d;
}

std::vector<std::vector<std::pair<int, int>>> spanning_trees(int k) {
    std::vector<std::vector<std::pair<int, int>>> out;
    if (k <= 1) {
        out.emplace_back();
        return out;
    }
    if (k == 2) {
        out.push_back({{0, 1}});
        return out;
    }
    std::vector<int> seq(k - 2, 0);
    while (true) {
        std::vector<int> deg(k, 1);
        for (int s : seq) ++deg[s];
        std::vector<std::pair<int, int>> edges;
        for (int s : seq)
            for (int v = 0; v < k; ++v)
                if (deg[v] == 1) {
                    edges.emplace_back(std::min(v, s), std::max(v, s));
                    --deg[v];
                    --deg[s];
                    break;
                }
        int u = -1;
        for (int v = 0; v < k; ++v)
            if (deg[v] == 1) {
                if (u < 0) {
                    u = v;
                } else {
                    edges.emplace_back(u, v);
                    break;
                }
            }
        out.push_back(edges);
        int i = k - 3;
        while (i >= 0 && ++seq[i] == k) seq[i--] = 0;
        if (i < 0) break;
    }
    return out;
}

bool tree_bound_check(const std::vector<int>& A) {
    const long dA = dist(A);
    for (const auto& tree : spanning_trees(static_cast<int>(A.size()))) {
        long dT = 1;
        for (auto [a, b] : tree) dT *= 1 + std::abs(A[a] - A[b]);
        if (dA > dT) return false;
    }
    return true;
}

KPResult kotecky_preiss_check(const std::vector<double>& w, int n_max, double kappa, unsigned S_prime,
                              std::size_t cap) {
    const unsigned full = 1u << (n_max + 1);
    if (w.size() != full) throw ConfigError("weight table must have 2^(n_max+1) entries");
    if (S_prime == 0 || S_prime >= full) throw ConfigError("S' must be a nonempty subset of the ground set");
    KPResult r;
    for (unsigned Sp = 1; Sp < full; ++Sp) {
        double lhs = 0;
        for (unsigned S = 1; S < full; ++S)
            if (S & Sp) lhs += std::exp(kappa * std::popcount(S)) * std::abs(w[S]);
        r.hypothesis_ratio = std::max(r.hypothesis_ratio, lhs / (kappa * std::popcount(Sp)));
    }
    r.hypothesis_holds = r.hypothesis_ratio <= 1.0;

    std::vector<unsigned> poly;
    for (unsigned S = 1; S < full; ++S)
        if (w[S] != 0.0) poly.push_back(S);
    if (poly.size() >= 63 || (std::size_t{1} << poly.size()) > cap)
        throw ResourceCap(std::to_string(poly.size()) + " polymers exceed the collection cap");
    const std::size_t ncol = std::size_t{1} << poly.size();
    for (std::size_t c = 1; c < ncol; ++c) {
        unsigned reached = S_prime;
        std::size_t rest = c;
        bool grew = true;
        while (rest && grew) {
            grew = false;
            for (std::size_t i = 0; i < poly.size(); ++i)
                if ((rest >> i & 1u) && (poly[i] & reached)) {
                    reached |= poly[i];
                    rest &= ~(std::size_t{1} << i);
                    grew = true;
                }
        }
        ++r.collections;
        if (rest) continue;
        double v = 1;
        for (std::size_t i = 0; i < poly.size(); ++i)
            if (c >> i & 1u) v *= std::abs(w[poly[i]]);
        r.conclusion_sum += v;
    }
    r.conclusion_bound = std::exp(kappa * std::popcount(S_prime));
    r.conclusion_holds = r.conclusion_sum <= r.conclusion_bound;
    return r;
}

}  // namespace qdiff
