#include "qdiff/rg_flow.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "qdiff/errors.hpp"

namespace qdiff {

namespace {

constexpr double kPi = 3.14159265358979323846;
const cd I(0, 1);

std::vector<int> digits(int idx, int d, int N) {
    std::vector<int> c(d);
    for (int j = d - 1; j >= 0; --j) {
        c[j] = idx % N;
        idx /= N;
    }
    return c;
}

int undigits(const std::vector<int>& c, int N) {
    int f = 0;
    for (int x : c) f = f * N + ((x % N) + N) % N;
    return f;
}

int floor_div2(int a) { return a >= 0 ? a / 2 : -((-a + 1) / 2); }

// k -> -k on the momentum grid
std::vector<int> negation(int d, int N) {
    const int C = static_cast<int>(std::pow(N, d));
    std::vector<int> neg(C);
    for (int k = 0; k < C; ++k) {
        auto c = digits(k, d, N);
        for (auto& x : c) x = -x;
        neg[k] = undigits(c, N);
    }
    return neg;
}

std::vector<cd> scaled(const std::vector<cd>& p, double f) {
    std::vector<cd> q = p;
    for (auto& x : q) x *= f;
    return q;
}

std::vector<cd> axis_point(int d, cd p) {
    std::vector<cd> v(d, 0.0);
    v[0] = p;
    return v;
}

// eigen-decomposition of the population block: leading value, right and left vectors
struct Lead {
    cd value;
    Eigen::VectorXcd right, left;  // left^T right = 1
};

// largest modulus for a propagator, largest real part for a generator
Lead lead_of(const Eigen::MatrixXcd& Z, bool want_left, bool generator = false) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(Z, true);
    const auto& ev = es.eigenvalues();
    int best = 0;
    for (int i = 1; i < ev.size(); ++i)
        if (generator ? ev[i].real() > ev[best].real() : std::abs(ev[i]) > std::abs(ev[best])) best = i;
    Lead l;
    l.value = ev[best];
    l.right = es.eigenvectors().col(best);
    if (want_left) {
        Eigen::MatrixXcd Vinv = es.eigenvectors().inverse();
        l.left = Vinv.row(best).transpose();
    }
    return l;
}

Lead lead_of(const FiberBlocks& B, bool want_left) {
    if (std::isnan(B.lead_log.real())) return lead_of(B.zero, want_left);
    Lead l;
    l.value = std::exp(B.lead_log);
    l.right = B.lead_right;
    l.left = B.lead_left;
    return l;
}

cd lead_log_of(const FiberBlocks& B) {
    if (std::isnan(B.lead_log.real())) return std::log(lead_of(B.zero, false).value);
    return B.lead_log;
}

double stencil_D(cd f0, cd f1, cd f2, double h) {
    return -0.5 * ((-2.0 * f2 + 32.0 * f1 - 30.0 * f0) / (12 * h * h)).real();
}

}  // namespace

bool InternalBasis::in_s0(int s) const {
    const int r = s % rel(), pair = s / rel();
    if (pair / n_levels != pair % n_levels) return false;
    for (int j = 0; j < d; ++j)
        if (v[r][j] != 0 || eta[r][j] != 0) return false;
    return true;
}

KernelSpace InternalBasis::space(int L, int ell, int n) const {
    KernelSpace sp;
    sp.d = d;
    sp.L = L;
    sp.ell = ell;
    sp.n = n;
    for (int s = 0; s < dim(); ++s) {
        sp.v.push_back(v[s % rel()]);
        sp.s0.push_back(in_s0(s));
    }
    return sp;
}

Eigen::MatrixXcd InternalBasis::transform(const std::vector<cd>& q) const {
    const int R = rel();
    Eigen::MatrixXcd T(R, R);
    for (int k = 0; k < R; ++k) {
        auto kc = digits(k, d, N);
        for (int r = 0; r < R; ++r) {
            cd ph = 0;
            for (int j = 0; j < d; ++j) {
                ph += q[j] * (eta[r][j] / 2.0);
                ph += (2 * kPi * kc[j] / N) * (2.0 * v[r][j] + eta[r][j]);
            }
            T(k, r) = std::exp(I * ph);
        }
    }
    return T;
}

InternalBasis internal_basis(int n_levels, int d, int N) {
    if (N % 2) throw ConfigError("relative ring size must be even");
    InternalBasis b;
    b.n_levels = n_levels;
    b.d = d;
    b.N = N;
    const int R = static_cast<int>(std::pow(N, d));
    for (int r = 0; r < R; ++r) {
        auto c = digits(r, d, N);
        std::vector<int> v(d), eta(d);
        for (int j = 0; j < d; ++j) {
            bool found = false;
            for (int shift : {0, -N, N}) {
                int rep = c[j] + shift;
                int vv = floor_div2(rep);
                if (4 * vv > -N && 4 * vv <= N) {
                    v[j] = vv;
                    eta[j] = rep - 2 * vv;
                    found = true;
                    break;
                }
            }
            if (!found) throw ConfigError("no (v, eta) representative");
        }
        b.v.push_back(v);
        b.eta.push_back(eta);
    }
    return b;
}

FiberBlocks power(const FiberBlocks& B, long m) {
    FiberBlocks R;
    R.q = B.q;
    Eigen::MatrixXcd base = B.zero;
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Identity(base.rows(), base.cols());
    for (long e = m; e > 0; e >>= 1) {
        if (e & 1) acc = acc * base;
        if (e > 1) base = base * base;
    }
    R.zero = acc;
    R.lead_log = B.lead_log * static_cast<double>(m);
    R.lead_right = B.lead_right;
    R.lead_left = B.lead_left;
    for (const auto& c : B.coherence) {
        Eigen::VectorXcd out(c.size());
        for (int i = 0; i < c.size(); ++i) out[i] = std::pow(c[i], static_cast<double>(m));
        R.coherence.push_back(out);
    }
    return R;
}

cd leading_log(const FiberBlocks& B) { return lead_log_of(B); }

Eigen::VectorXcd leading_right(const FiberBlocks& B) { return lead_of(B, false).right; }

Eigen::MatrixXcd to_internal(const FiberBlocks& B, const InternalBasis& basis) {
    const int n = basis.n_levels, R = basis.rel();
    Eigen::MatrixXcd T = basis.transform(B.q);
    Eigen::MatrixXcd Ti = T.inverse();
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(basis.dim(), basis.dim());
    for (int e = 0; e < n; ++e)
        for (int e2 = 0; e2 < n; ++e2)
            out.block(basis.index(e, e, 0), basis.index(e2, e2, 0), R, R) =
                Ti * B.zero.block(e * R, e2 * R, R, R) * T;
    for (int eL = 0; eL < n; ++eL)
        for (int eR = 0; eR < n; ++eR) {
            if (eL == eR) continue;
            const auto& c = B.coherence[eL * n + eR];
            out.block(basis.index(eL, eR, 0), basis.index(eL, eR, 0), R, R) =
                Ti * c.asDiagonal() * T;
        }
    return out;
}

std::function<FiberGenerator(const std::vector<cd>&)> seed_generator(const RateTable& rates,
                                                                     const LambShift& lamb,
                                                                     double lambda, double tau0) {
    const double t0 = tau0 / (lambda * lambda);
    auto neg = negation(rates.d, rates.bins);
    const int n = rates.n_levels, C = rates.cells();
    FiberOptions opt;
    opt.gamma0 = 1e300;
    // q enters the population block only through the kinetic diagonal
    auto F00 = fiber_operator(0.0, std::vector<cd>(rates.d, 0.0), rates, lamb, opt);
    Eigen::MatrixXcd base(n * C, n * C);
    for (int a = 0; a < n * C; ++a)
        for (int b = 0; b < n * C; ++b)
            base(a, b) = tau0 * F00.matrix((a / C) * C + neg[a % C], (b / C) * C + neg[b % C]);
    Lead l0 = lead_of(base, true, true);
    auto pair = std::make_shared<std::pair<Eigen::VectorXcd, Eigen::VectorXcd>>(
        l0.left / l0.left.sum(), l0.right * l0.left.sum());
    std::vector<std::vector<double>> sink(C);
    for (int k = 0; k < C; ++k) {
        auto kc = digits(k, rates.d, rates.bins);
        for (int j = 0; j < rates.d; ++j) sink[k].push_back(std::sin(2 * kPi * kc[j] / rates.bins));
    }
    return [=](const std::vector<cd>& q) {
        std::vector<cd> mq = scaled(q, -1.0);
        FiberGenerator G;
        G.q = q;
        G.t0 = t0;
        G.kinetic.resize(n * C);
        for (int a = 0; a < n * C; ++a) {
            cd e = 0;
            for (int j = 0; j < rates.d; ++j) e += std::sin(q[j] / 2.0) * sink[a % C][j];
            G.kinetic[a] = tau0 * I * (-4.0 / rates.m_p) * e;
        }
        G.zero = base;
        G.zero.diagonal() += G.kinetic;
        G.null_pair = pair;
        G.coherence.assign(n * n, Eigen::VectorXcd());
        G.eps.assign(n * n, 0.0);
        for (int eL = 0; eL < n; ++eL)
            for (int eR = 0; eR < n; ++eR) {
                if (eL == eR) continue;
                double eps = rates.levels[eL] - rates.levels[eR];
                auto Fe = fiber_operator(eps, mq, rates, lamb, opt);
                Eigen::VectorXcd c(C);
                for (int k = 0; k < C; ++k) c[k] = tau0 * Fe.diag[neg[k]];
                G.coherence[eL * n + eR] = c;
                G.eps[eL * n + eR] = eps;
            }
        return G;
    };
}

namespace {

// Leading eigenvalue of base + diag(kinetic) continued from the null pair of
// base: theta = w.K u + w.K (theta - QZQ)^{-1} Q K u, accurate relative to theta.
cd refine_leading(const FiberGenerator& G, cd guess) {
    const auto& w = G.null_pair->first;
    const auto& u = G.null_pair->second;
    const int N = static_cast<int>(u.size());
    Eigen::VectorXcd Ku = G.kinetic.cwiseProduct(u);
    Eigen::VectorXcd wK = G.kinetic.cwiseProduct(w);
    cd first = (w.transpose() * Ku)(0);
    Eigen::VectorXcd rhs = Ku - u * first;
    cd theta = guess;
    for (int it = 0; it < 30; ++it) {
        Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(N + 1, N + 1);
        A.topLeftCorner(N, N) = -G.zero;
        A.topLeftCorner(N, N).diagonal().array() += theta;
        A.block(0, N, N, 1) = u;
        A.block(N, 0, 1, N) = w.transpose();
        Eigen::VectorXcd b(N + 1);
        b.head(N) = rhs;
        b[N] = 0;
        Eigen::VectorXcd y = A.partialPivLu().solve(b);
        cd next = first + (wK.transpose() * y.head(N))(0);
        bool done = std::abs(next - theta) <= 1e-15 * std::abs(next);
        theta = next;
        if (done) break;
    }
    if (!(std::abs(theta - guess) <= 1e-8 * std::max(1.0, G.zero.cwiseAbs().maxCoeff()))) return guess;
    return theta;
}

}  // namespace

FiberBlocks exponentiate(const FiberGenerator& G, double m) {
    FiberBlocks B;
    B.q = G.q;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(G.zero, true);
    const auto& ev = es.eigenvalues();
    const Eigen::MatrixXcd& V = es.eigenvectors();
    Eigen::MatrixXcd Vinv = V.inverse();
    int best = 0;
    for (int i = 1; i < ev.size(); ++i)
        if (ev[i].real() > ev[best].real()) best = i;
    cd theta = ev[best];
    if (G.null_pair) theta = refine_leading(G, theta);
    Eigen::VectorXcd e(ev.size());
    for (int i = 0; i < ev.size(); ++i) e[i] = std::exp(m * (i == best ? theta : ev[i]));
    B.zero = V * e.asDiagonal() * Vinv;
    B.lead_log = m * theta;
    B.lead_right = V.col(best);
    B.lead_left = Vinv.row(best).transpose();
    B.coherence.assign(G.coherence.size(), Eigen::VectorXcd());
    for (std::size_t i = 0; i < G.coherence.size(); ++i) {
        if (G.coherence[i].size() == 0) continue;
        cd phase = std::exp(-I * std::fmod(m * G.t0 * G.eps[i], 2 * kPi));
        Eigen::VectorXcd c(G.coherence[i].size());
        for (int k = 0; k < c.size(); ++k) c[k] = phase * std::exp(m * G.coherence[i][k]);
        B.coherence[i] = c;
    }
    return B;
}

std::function<FiberBlocks(const std::vector<cd>&)> seed_symbol(const RateTable& rates,
                                                               const LambShift& lamb,
                                                               double lambda, double tau0) {
    auto gen = seed_generator(rates, lamb, lambda, tau0);
    return [gen](const std::vector<cd>& q) { return exponentiate(gen(q), 1.0); };
}

Eigen::MatrixXcd RGState::hat(const std::vector<cd>& p) const { return to_internal(symbol(p), basis); }

void track_spectrum(RGState& s) {
    const int d = s.basis.d;
    const int G = s.params.grid;
    s.grid.resize(G);
    s.f.resize(G);
    for (int j = 0; j < G; ++j) {
        s.grid[j] = -kPi + 2 * kPi * j / G;
        s.f[j] = leading_log(s.symbol(axis_point(d, s.grid[j])));
    }
    // f_n(p) = ell^{2n} f_0(p / ell^n): widen the step so the probe stays away from the rounding floor
    const double h = std::min(1.0, s.params.h * std::pow(static_cast<double>(s.params.ell), s.n));
    cd f0 = leading_log(s.symbol(axis_point(d, 0.0)));
    cd f1 = leading_log(s.symbol(axis_point(d, h)));
    cd f2 = leading_log(s.symbol(axis_point(d, 2 * h)));
    s.D = stencil_D(f0, f1, f2, h);

    FiberBlocks B0 = s.symbol(axis_point(d, 0.0));
    Lead l = lead_of(B0, true);
    FiberBlocks Bp = B0;
    Bp.zero -= l.value * l.right * l.left.transpose();
    // right vector in the s basis, normalised on S_0
    const int n = s.basis.n_levels, R = s.basis.rel();
    Eigen::MatrixXcd Ti = s.basis.transform(B0.q).inverse();
    s.mu = Eigen::VectorXcd::Zero(s.basis.dim());
    for (int e = 0; e < n; ++e) s.mu.segment(s.basis.index(e, e, 0), R) = Ti * l.right.segment(e * R, R);
    cd norm = 0;
    for (int i = 0; i < s.basis.dim(); ++i)
        if (s.basis.in_s0(i)) norm += s.mu[i];
    s.mu /= norm;
    KernelSpace sp = s.basis.space(2, s.params.ell, s.n);
    s.gap = internal_norm(to_internal(Bp, s.basis), sp, s.params.gamma0);
    s.gap_budget = 0.5 * std::pow(static_cast<double>(s.params.ell), -s.params.tilde_alpha * s.n / 8);
    s.gap_collapse = s.gap > s.gap_budget;
}

RGState seed_state(const RateTable& rates, const LambShift& lamb, double lambda, double tau0,
                   const FlowParams& params) {
    RGState s;
    s.n = 0;
    s.params = params;
    s.basis = internal_basis(rates.n_levels, rates.d, rates.bins);
    s.generator = seed_generator(rates, lamb, lambda, tau0);
    auto gen = s.generator;
    s.symbol = [gen](const std::vector<cd>& q) { return exponentiate(gen(q), 1.0); };
    track_spectrum(s);
    return s;
}

RGState rg_step(const RGState& s) {
    RGState t;
    t.n = s.n + 1;
    t.params = s.params;
    t.basis = s.basis;
    t.generator = s.generator;
    const double scale = std::pow(static_cast<double>(s.params.ell), t.n);
    auto gen = s.generator;
    t.symbol = [gen, scale](const std::vector<cd>& p) {
        return exponentiate(gen(scaled(p, 1.0 / scale)), scale * scale);
    };
    track_spectrum(t);
    return t;
}

std::function<FiberBlocks(const std::vector<cd>&)> literal_step(const RGState& s) {
    const int ell = s.params.ell;
    auto prev = s.symbol;
    return [prev, ell](const std::vector<cd>& p) {
        return power(prev(scaled(p, 1.0 / ell)), static_cast<long>(ell) * ell);
    };
}

LatticeKernel position_kernel(const RGState& s, int W) {
    const int d = s.basis.d;
    const double scale = std::pow(static_cast<double>(s.params.ell), s.n);
    // T^_n is negligible beyond the Gaussian envelope; at n = 0 it is 2 pi periodic
    double P = kPi;
    if (s.n > 0) {
        double want = std::sqrt(35.0 / std::max(s.D, 1e-12));
        P = std::min(scale * kPi, kPi * std::ceil(want / kPi));
    }
    const int M = static_cast<int>(std::lround(s.params.grid * P / kPi));
    const int L = 2 * W + 1;
    auto space = std::make_shared<KernelSpace>(s.basis.space(L, s.params.ell, s.n));
    LatticeKernel K;
    K.space = space;
    const int sites = space->sites(), dim = s.basis.dim();
    K.values.assign(sites, Eigen::MatrixXcd::Zero(dim, dim));
    std::vector<double> ps(M);
    for (int j = 0; j < M; ++j) ps[j] = -P + 2 * P * j / M;
    const double w = std::pow(2 * P / M / (2 * kPi), d);
    // the position lattice is ell^{-n} Z; integer points of X_n sit at j * ell^n there
    std::vector<int> idx(d, 0);
    const int total = static_cast<int>(std::pow(M, d));
    for (int t = 0; t < total; ++t) {
        auto c = digits(t, d, M);
        std::vector<cd> p(d);
        for (int j = 0; j < d; ++j) p[j] = ps[c[j]];
        Eigen::MatrixXcd H = s.hat(p);
        for (int x = 0; x < sites; ++x) {
            auto xc = digits(x, d, L);
            double ph = 0;
            for (int j = 0; j < d; ++j) {
                int xi = xc[j] > W ? xc[j] - L : xc[j];
                ph += p[j].real() * xi;
            }
            K.values[x] += std::exp(-I * ph) * H;
        }
    }
    for (auto& v : K.values) v *= w;
    return K;
}

InductionReport verify_induction(const RGState& s, double D0, double p0) {
    InductionReport r;
    const auto& P = s.params;
    const int d = s.basis.d;
    const double ell = P.ell;
    if (p0 < 0) p0 = std::min(D0 / 2, kPi);
    r.p_n = std::sqrt((P.tilde_alpha * s.n * std::log(ell) / 2 + D0 * p0 * p0) / s.D);
    r.budget = s.gap_budget;
    const double para_scale = std::pow(ell, -P.tilde_alpha * s.n / 4);
    KernelSpace sp = s.basis.space(2, P.ell, s.n);
    double para = 0, env = 0;
    for (double re : s.grid)
        for (double im : {0.0, 0.5, -0.5, 1.0, -1.0}) {
            cd p(re, im * P.gamma0);
            FiberBlocks B = s.symbol(axis_point(d, p));
            double nT = internal_norm(to_internal(B, s.basis), sp, P.gamma0);
            r.strip_max = std::max(r.strip_max, nT);
            if (std::abs(re) < r.p_n) {
                Lead l = lead_of(B, true);
                FiberBlocks Bp = B;
                Bp.zero -= l.value * l.right * l.left.transpose();
                r.small_gap = std::max(r.small_gap, internal_norm(to_internal(Bp, s.basis), sp, P.gamma0));
                cd f = lead_log_of(B);
                if (std::abs(p) > 1e-12)
                    para = std::max(para, std::abs(f + s.D * p * p) / (para_scale * std::pow(std::abs(p), 3)));
                double lo = -1.5 * s.D * re * re - P.C * p.imag() * p.imag();
                double hi = -0.5 * s.D * re * re + P.C * p.imag() * p.imag();
                env = std::max({env, f.real() - hi, lo - f.real()});
            } else {
                r.large_gap = std::max(r.large_gap, nT);
            }
        }
    r.parabola_ratio = para;
    r.envelope_violation = env;
    auto K = position_kernel(s, 8);
    for (int x = 0; x < K.space->sites(); ++x)
        r.position_C = std::max(r.position_C, internal_norm(K.values[x], *K.space, P.gamma0) *
                                                  std::exp(10 * P.gamma0 * K.space->xdist(x, 0) *
                                                           std::pow(ell, s.n)));
    r.strip_ok = r.strip_max <= P.C;
    r.parabola_ok = para <= 1;
    r.gap_ok = r.small_gap <= r.budget && r.large_gap <= r.budget;
    r.position_ok = r.position_C <= P.C;
    r.envelope_ok = env <= 1e-12;
    r.gap_collapse = s.gap_collapse;
    return r;
}

LocalDensity product_density(int e, const std::vector<double>& psi, int d) {
    if (psi.size() != 3) throw ConfigError("psi lives on {-1, 0, 1}");
    LocalDensity rho;
    const int total = static_cast<int>(std::pow(3, d));
    double norm = 0;
    for (double a : psi) norm += a * a;
    norm = std::pow(norm, d);
    for (int a = 0; a < total; ++a)
        for (int b = 0; b < total; ++b) {
            auto ca = digits(a, d, 3), cb = digits(b, d, 3);
            double val = 1;
            std::vector<int> xL(d), xR(d);
            for (int j = 0; j < d; ++j) {
                val *= psi[ca[j]] * psi[cb[j]];
                xL[j] = ca[j] - 1;
                xR[j] = cb[j] - 1;
            }
            rho.entries.push_back({xL, xR, e, e, val / norm});
        }
    return rho;
}

Eigen::VectorXcd density_hat(const LocalDensity& rho, const InternalBasis& basis,
                             const std::vector<cd>& p) {
    const int d = basis.d;
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(basis.dim());
    for (const auto& en : rho.entries) {
        cd ph = 0;
        std::vector<int> rc(d);
        for (int j = 0; j < d; ++j) {
            int rep = en.xL[j] - en.xR[j];
            int x = floor_div2(en.xL[j] + en.xR[j]);
            int v = floor_div2(rep);
            if (!(4 * v > -basis.N && 4 * v <= basis.N))
                throw ConfigError("density wider than the relative ring");
            rc[j] = rep;
            ph += p[j] * static_cast<double>(x);
        }
        int r = undigits(rc, basis.N);
        out[basis.index(en.eL, en.eR, r)] += std::exp(I * ph) * en.value;
    }
    return out;
}

cd transported_trace(const RGState& s, const LocalDensity& rho, const std::vector<cd>& p) {
    const double scale = std::pow(static_cast<double>(s.params.ell), s.n);
    Eigen::VectorXcd v = s.hat(p) * density_hat(rho, s.basis, scaled(p, 1.0 / scale));
    cd tr = 0;
    for (int i = 0; i < v.size(); ++i)
        if (s.basis.in_s0(i)) tr += v[i];
    return tr;
}

double gaussian_deviation(const RGState& s, const LocalDensity& rho, double t0, double Dstar,
                          double pmax, int samples) {
    double worst = 0;
    for (int i = 0; i < samples; ++i) {
        double p = -pmax + 2 * pmax * i / (samples - 1);
        cd tr = transported_trace(s, rho, axis_point(s.basis.d, p / std::sqrt(t0)));
        worst = std::max(worst, std::abs(tr - std::exp(-Dstar * p * p)));
    }
    return worst;
}

void write_flow_csv(const std::string& path, const std::vector<FlowRow>& rows,
                    const std::string& header_comment) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "# " << header_comment << "\n";
    out << "n,D_n,gap,parabola_residual,strip_max\n";
    out << std::setprecision(12);
    for (const auto& r : rows) out << r.n << ',' << r.D << ',' << r.gap << ',' << r.parabola << ',' << r.strip << '\n';
}

void write_kernel_snapshot(const std::string& path, const LatticeKernel& K, int n, int window) {
    static_assert(std::endian::native == std::endian::little, "snapshot writer assumes little endian");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    const KernelSpace& sp = *K.space;
    std::int32_t hdr[4] = {n, sp.d, window, sp.internal()};
    out.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
    const int L = sp.L, side = 2 * window + 1;
    const int total = static_cast<int>(std::pow(side, sp.d));
    for (int t = 0; t < total; ++t) {
        auto c = digits(t, sp.d, side);
        for (auto& x : c) x -= window;
        const auto& M = K.values[undigits(c, L)];
        for (int a = 0; a < M.rows(); ++a)
            for (int b = 0; b < M.cols(); ++b) {
                double z[2] = {M(a, b).real(), M(a, b).imag()};
                out.write(reinterpret_cast<const char*>(z), sizeof z);
            }
    }
}

}  // namespace qdiff
