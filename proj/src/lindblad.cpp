#include "qdiff/lindblad.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qdiff/errors.hpp"
#include "qdiff/parallel.hpp"

namespace qdiff {

namespace {

constexpr double kPi = 3.14159265358979323846;
const cd I(0, 1);

double measure_nu(const Model& m) { return m.nu > 0 ? m.nu : default_nu(m.bath); }

std::vector<int> decode_site(int s, int N, int d) {
    std::vector<int> c(d);
    for (int i = d - 1; i >= 0; --i) {
        c[i] = s % N;
        s /= N;
    }
    return c;
}

int pair_for(const std::vector<double>& levels, double eps, int* e2) {
    const int n = static_cast<int>(levels.size());
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            if (a != b && std::abs(levels[a] - levels[b] - eps) < 1e-9) {
                *e2 = b;
                return a;
            }
    throw MissingMeasure("no level pair with Bohr frequency " + std::to_string(eps));
}

double simpson_weight(size_t i, size_t n) {
    if (i == 0 || i + 1 == n) return 1.0;
    return i % 2 ? 4.0 : 2.0;
}

}  // namespace

double lamb_integral(double eps, const BathSpec& bath, double nu) {
    auto ms = correlation_modes(std::vector<int>(bath.d, 0), bath);
    double amax = 0;
    for (double om : ms.om) amax = std::max(amax, std::abs(om - eps));
    const double T = std::max(500.0 / std::abs(eps), 40.0 / std::max(nu, 1e-12));
    const double h = std::min(0.01, 0.05 / std::max(amax, 1e-12));
    if (T / h > double(1u << 22))
        throw QuadratureFail("Lamb integral for eps=" + std::to_string(eps) + " needs " + std::to_string(T / h) +
                             " steps (regulator nu=" + std::to_string(nu) + " too small)");
    size_t steps = 2 * static_cast<size_t>(std::ceil(T / h / 2));
    size_t half = steps / 2;
    if (half % 2) {
        steps += 2;
        half = steps / 2;
    }
    const double dt = T / steps;
    auto z = correlation_series(ms, 0.0, dt, steps + 1);
    cd full = 0, part = 0;
    for (size_t i = 0; i <= steps; ++i) {
        double s = i * dt;
        cd g = z[i] * std::exp(cd(-nu * s, -eps * s));
        full += simpson_weight(i, steps + 1) * g;
        if (i <= half) part += simpson_weight(i, half + 1) * g;
    }
    double a = (full * dt / 3.0).imag(), b = (part * dt / 3.0).imag();
    if (std::abs(a - b) > 1e-8 * std::max(1.0, std::abs(a)))
        throw QuadratureFail("Lamb integral for eps=" + std::to_string(eps) +
                             " not converged at horizon " + std::to_string(T));
    return a;
}

double lamb_integral_exact(double eps, const BathSpec& bath, double nu) {
    auto ms = correlation_modes(std::vector<int>(bath.d, 0), bath);
    cd s = 0;
    for (size_t i = 0; i < ms.om.size(); ++i) s += cd(ms.ar[i], ms.ai[i]) / cd(nu, -(ms.om[i] - eps));
    return s.imag();
}

LambShift lamb_shift(const Model& model) {
    LambShift ls;
    const int n = model.spin.size();
    const double nu = measure_nu(model);
    for (double eps : model.spin.bohr_frequencies())
        if (std::abs(eps) > 1e-12) ls.t[eps] = lamb_integral(eps, model.bath, nu);
    ls.h.assign(n, 0.0);
    for (int e = 0; e < n; ++e)
        for (int e2 = 0; e2 < n; ++e2) {
            if (e == e2) continue;
            double eps = model.spin.levels[e2] - model.spin.levels[e];
            auto it = ls.t.lower_bound(eps - 1e-9);
            ls.h[e] += it->second * std::norm(model.spin.W(e2, e));
        }
    return ls;
}

int GeneratorM::sites() const {
    int s = 1;
    for (int i = 0; i < d; ++i) s *= N;
    return s;
}

cd GeneratorM::zeta(double eps, const std::vector<int>& x) const {
    auto it = measures.lower_bound(eps - 1e-9);
    if (it == measures.end() || std::abs(it->first - eps) > 1e-9) return 0.0;
    const auto& w = it->second.weights;
    cd s = 0;
    for (size_t c = 0; c < w.size(); ++c) {
        if (w[c] == 0) continue;
        auto cc = decode_site(static_cast<int>(c), N, d);
        long dot = 0;
        for (int i = 0; i < d; ++i) dot += static_cast<long>(cc[i]) * x[i];
        s += w[c] * std::exp(cd(0, 2 * kPi * static_cast<double>(((dot % N) + N) % N) / N));
    }
    return s;
}

Eigen::MatrixXcd GeneratorM::jump_operator(int e, int e2) const {
    Eigen::MatrixXcd w = Eigen::MatrixXcd::Zero(n_levels, n_levels);
    w(e2, e) = W(e2, e);
    return w;
}

Eigen::MatrixXcd GeneratorM::phi(const Eigen::MatrixXcd& rho) const {
    const int S = sites(), n = n_levels;
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim(), dim());
    for (int e = 0; e < n; ++e)
        for (int e2 = 0; e2 < n; ++e2) {
            if (e == e2) continue;
            double eps = levels[e2] - levels[e];
            Eigen::MatrixXcd Wl = jump_operator(e, e2);
            for (int x = 0; x < S; ++x)
                for (int y = 0; y < S; ++y) {
                    auto cx = decode_site(x, N, d), cy = decode_site(y, N, d);
                    for (int i = 0; i < d; ++i) cx[i] -= cy[i];
                    cd z = zeta(eps, cx);
                    if (z == 0.0) continue;
                    out.block(x * n, y * n, n, n) +=
                        z * Wl * rho.block(x * n, y * n, n, n) * Wl.adjoint();
                }
        }
    return out;
}

Eigen::MatrixXcd GeneratorM::phi_star(const Eigen::MatrixXcd& O) const {
    const int S = sites(), n = n_levels;
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim(), dim());
    for (int e = 0; e < n; ++e)
        for (int e2 = 0; e2 < n; ++e2) {
            if (e == e2) continue;
            double eps = levels[e2] - levels[e];
            Eigen::MatrixXcd Wl = jump_operator(e, e2);
            for (int x = 0; x < S; ++x)
                for (int y = 0; y < S; ++y) {
                    auto cx = decode_site(x, N, d), cy = decode_site(y, N, d);
                    for (int i = 0; i < d; ++i) cy[i] -= cx[i];
                    cd z = zeta(eps, cy);
                    if (z == 0.0) continue;
                    out.block(x * n, y * n, n, n) +=
                        z * Wl.adjoint() * O.block(x * n, y * n, n, n) * Wl;
                }
        }
    return out;
}

Eigen::MatrixXcd GeneratorM::lamb_hamiltonian() const {
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(dim(), dim());
    for (int x = 0; x < sites(); ++x)
        for (int e = 0; e < n_levels; ++e) H(x * n_levels + e, x * n_levels + e) = lamb.h[e];
    return H;
}

Eigen::MatrixXcd GeneratorM::kinetic_hamiltonian() const {
    const int S = sites(), n = n_levels;
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(dim(), dim());
    for (int x = 0; x < S; ++x) {
        auto cx = decode_site(x, N, d);
        for (int i = 0; i < d; ++i) {
            for (int sgn : {-1, 1}) {
                auto cy = cx;
                cy[i] = ((cy[i] + sgn) % N + N) % N;
                int y = 0;
                for (int j = 0; j < d; ++j) y = y * N + cy[j];
                for (int e = 0; e < n; ++e) H(x * n + e, y * n + e) -= 1.0 / m_p;
            }
            for (int e = 0; e < n; ++e) H(x * n + e, x * n + e) += 2.0 / m_p;
        }
    }
    return H;
}

Eigen::MatrixXcd GeneratorM::apply(const Eigen::MatrixXcd& rho) const {
    Eigen::MatrixXcd one = Eigen::MatrixXcd::Identity(dim(), dim());
    Eigen::MatrixXcd K = phi_star(one);
    Eigen::MatrixXcd H = lamb_hamiltonian();
    return phi(rho) - 0.5 * (K * rho + rho * K) + I * (H * rho - rho * H);
}

Eigen::MatrixXcd GeneratorM::apply_Q(const Eigen::MatrixXcd& rho) const {
    Eigen::MatrixXcd H = kinetic_hamiltonian();
    return apply(rho) - I * (H * rho - rho * H);
}

Eigen::MatrixXcd GeneratorM::superoperator(bool kinetic) const {
    const int D = dim();
    if (D > 32) throw ResourceCap("superoperator of dimension " + std::to_string(D * D));
    Eigen::MatrixXcd S(D * D, D * D);
    for (int j = 0; j < D; ++j)
        for (int i = 0; i < D; ++i) {
            Eigen::MatrixXcd E = Eigen::MatrixXcd::Zero(D, D);
            E(i, j) = 1.0;
            Eigen::MatrixXcd out = kinetic ? apply_Q(E) : apply(E);
            S.col(j * D + i) = Eigen::Map<Eigen::VectorXcd>(out.data(), D * D);
        }
    return S;
}

Eigen::MatrixXcd GeneratorM::choi_of_phi() const {
    const int D = dim();
    if (D > 8) throw ResourceCap("Choi matrix of dimension " + std::to_string(D * D));
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(D * D, D * D);
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
            Eigen::MatrixXcd E = Eigen::MatrixXcd::Zero(D, D);
            E(i, j) = 1.0;
            C.block(i * D, j * D, D, D) = phi(E);
        }
    return C;
}

GeneratorM build_generator(const Model& model, int N) {
    GeneratorM g;
    g.n_levels = model.spin.size();
    g.N = N;
    g.d = model.bath.d;
    g.m_p = model.params.m_p;
    g.levels = model.spin.levels;
    g.W = model.spin.W;
    const double nu = measure_nu(model);
    for (double eps : model.spin.bohr_frequencies())
        if (std::abs(eps) > 1e-12) g.measures.emplace(eps, spectral_measure(eps, model.bath, N, nu));
    g.lamb = lamb_shift(model);
    return g;
}

cd kinetic_symbol(const std::vector<cd>& p, const std::vector<cd>& k, double m_p) {
    cd s = 0;
    for (size_t j = 0; j < p.size(); ++j) s += std::cos(p[j] / 2.0 + k[j]) - std::cos(p[j] / 2.0 - k[j]);
    return 2.0 / m_p * s;
}

double kinetic_symbol(const std::vector<double>& p, const std::vector<double>& k, double m_p) {
    double s = 0;
    for (size_t j = 0; j < p.size(); ++j) s += std::cos(p[j] / 2 + k[j]) - std::cos(p[j] / 2 - k[j]);
    return 2.0 / m_p * s;
}

Eigen::MatrixXcd FiberOperator::dense() const {
    if (!diagonal()) return matrix;
    return diag.asDiagonal();
}

std::vector<cd> fiber_momenta(const RateTable& r, const std::vector<cd>& p, int cell,
                              const FiberOptions& opt) {
    auto k = r.momentum(cell);
    std::vector<cd> out(r.d);
    for (int i = 0; i < r.d; ++i) {
        out[i] = k[i];
        if (opt.offset) out[i] -= p[i] / 2.0;
        if (!opt.kappa.empty()) out[i] -= opt.kappa[i];
    }
    return out;
}

FiberOperator fiber_operator(double eps, const std::vector<cd>& p, const RateTable& r,
                             const LambShift& lamb, const FiberOptions& opt) {
    if (static_cast<int>(p.size()) != r.d) throw ConfigError("p has wrong dimension");
    for (const auto& c : p)
        if (std::abs(c.imag()) > opt.gamma0)
            throw StripViolation("|Im p| = " + std::to_string(std::abs(c.imag())) + " > gamma0");
    FiberOperator f;
    f.eps = eps;
    f.p = p;
    f.n_levels = r.n_levels;
    f.cells = r.cells();
    const int C = f.cells, n = f.n_levels;
    std::vector<cd> ek(C);
    for (int k = 0; k < C; ++k) ek[k] = kinetic_symbol(p, fiber_momenta(r, p, k, opt), r.m_p);
    if (std::abs(eps) > 1e-12) {
        f.e = pair_for(r.levels, eps, &f.e2);
        f.diag.resize(C);
        double re = -0.5 * (r.escape[f.e] + r.escape[f.e2]);
        double lh = lamb.h[f.e] - lamb.h[f.e2];
        for (int k = 0; k < C; ++k) f.diag[k] = re + I * (ek[k] + lh);
        return f;
    }
    f.eps = 0;
    f.matrix = Eigen::MatrixXcd::Zero(n * C, n * C);
    for (int e = 0; e < n; ++e)
        for (int e2 = 0; e2 < n; ++e2) {
            const auto& m = r.channel(e, e2);
            for (int dc = 0; dc < C; ++dc) {
                if (m[dc] == 0) continue;
                for (int k = 0; k < C; ++k) f.matrix(e2 * C + r.add(k, dc), e * C + k) += m[dc];
            }
        }
    for (int e = 0; e < n; ++e)
        for (int k = 0; k < C; ++k) f.matrix(e * C + k, e * C + k) += -r.escape[e] + I * ek[k];
    return f;
}

namespace {

void normalise(LeadingEigen& le, double cv) {
    cd s = le.right.sum() * cv;
    if (std::abs(s) > 1e-8 * le.right.norm()) le.right /= s;
    else le.right /= le.right.norm();
    cd bil = (le.left.transpose() * le.right)(0, 0) * cv;
    le.left /= bil;
}

Eigen::VectorXcd left_vector(const Eigen::MatrixXcd& A, cd f) {
    const int N = static_cast<int>(A.rows());
    double scale = A.cwiseAbs().maxCoeff();
    cd shift = f + 1e-9 * (1 + scale);
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(
        (A - shift * Eigen::MatrixXcd::Identity(N, N)).transpose());
    Eigen::VectorXcd y = Eigen::VectorXcd::Ones(N);
    for (int it = 0; it < 6; ++it) {
        y = lu.solve(y);
        y /= y.norm();
    }
    return y;
}

}  // namespace

LeadingEigen leading_eigen(const FiberOperator& fiber, int dense_max, double isolation_tol) {
    if (fiber.diagonal()) throw ConfigError("leading_eigen expects the eps = 0 fiber");
    const Eigen::MatrixXcd& A = fiber.matrix;
    const int N = static_cast<int>(A.rows());
    const int d = static_cast<int>(fiber.p.size());
    const double cv = std::pow(2 * kPi, d) / fiber.cells;
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    LeadingEigen le;
    if (N <= dense_max) {
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(A, true);
        const auto& ev = es.eigenvalues();
        std::vector<int> idx(N);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return ev[a].real() > ev[b].real(); });
        le.f = ev[idx[0]];
        le.second = N > 1 ? ev[idx[1]] : cd(-1e300, 0);
        le.right = es.eigenvectors().col(idx[0]);
        le.method = "dense";
    } else {
        double wmin = -A.diagonal().real().maxCoeff();
        double sigma = 0.05 * std::max(wmin, 1e-6);
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A - sigma * Eigen::MatrixXcd::Identity(N, N));
        const int b = 4;
        Eigen::MatrixXcd X(N, b);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < b; ++j) X(i, j) = std::cos(0.37 * (i + 1) * (j + 1)) + (j == 0 ? 1.0 : 0.0);
        cd prev = 1e300;
        bool ok = false;
        Eigen::MatrixXcd Q;
        Eigen::VectorXcd ritz;
        Eigen::MatrixXcd vecs;
        for (int it = 0; it < 500; ++it) {
            X = lu.solve(X);
            Eigen::HouseholderQR<Eigen::MatrixXcd> qr(X);
            Q = qr.householderQ() * Eigen::MatrixXcd::Identity(N, b);
            X = Q;
            Eigen::MatrixXcd H = Q.adjoint() * A * Q;
            Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(H, true);
            ritz = es.eigenvalues();
            vecs = es.eigenvectors();
            int best = 0;
            for (int j = 1; j < b; ++j)
                if (std::abs(ritz[j] - sigma) < std::abs(ritz[best] - sigma)) best = j;
            if (std::abs(ritz[best] - prev) < 1e-14 * scale) {
                ok = true;
                break;
            }
            prev = ritz[best];
        }
        if (!ok) throw NotConverged("shift-invert iteration for the leading eigenvalue");
        std::vector<int> idx(b);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(),
                  [&](int a, int c) { return ritz[a].real() > ritz[c].real(); });
        le.f = ritz[idx[0]];
        le.second = ritz[idx[1]];
        le.right = Q * vecs.col(idx[0]);
        le.method = "shift-invert";
    }
    le.gap = le.f.real() - le.second.real();
    if (le.gap < isolation_tol * scale)
        throw NotIsolated("leading eigenvalue not separated: gap " + std::to_string(le.gap));
    le.left = left_vector(A, le.f);
    normalise(le, cv);
    return le;
}

namespace {

double leading_real(const RateTable& r, const LambShift& lamb, const std::vector<cd>& p) {
    FiberOptions opt;
    opt.gamma0 = 1e9;
    return leading_eigen(fiber_operator(0.0, p, r, lamb, opt)).f.real();
}

double fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (size_t i = 0; i < x.size(); ++i) {
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double sxy = 0, sxx = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace

Curvature diffusion_from_curvature(const RateTable& r, const LambShift& lamb, double h, double tol,
                                   bool fit_quartic) {
    Curvature c;
    c.h = h;
    const int d = r.d;
    std::vector<cd> zero(d, 0.0);
    double f0 = leading_real(r, lamb, zero);
    auto second = [&](int axis, double step) {
        std::vector<cd> p1(d, 0.0), p2(d, 0.0);
        p1[axis] = step;
        p2[axis] = 2 * step;
        double f1 = leading_real(r, lamb, p1), f2 = leading_real(r, lamb, p2);
        return (-2 * f2 + 32 * f1 - 30 * f0) / (12 * step * step);
    };
    double Dh = 0, Dh2 = 0;
    for (int i = 0; i < d; ++i) {
        double a = -0.5 * second(i, h);
        double b = -0.5 * second(i, h / 2);
        c.per_axis.push_back(a);
        Dh += a / d;
        Dh2 += b / d;
    }
    c.D = Dh;
    c.D_half = Dh2;
    if (std::abs(Dh - Dh2) > tol * std::max(std::abs(Dh), 1e-300))
        throw CurvatureUnstable("D(h) = " + std::to_string(Dh) + ", D(h/2) = " + std::to_string(Dh2));
    if (fit_quartic) {
        std::vector<double> ps, res;
        for (int j = 0; j < 8; ++j) {
            double p = 0.05 * std::pow(10.0, j / 7.0);
            std::vector<cd> pv(d, 0.0);
            pv[0] = p;
            ps.push_back(p);
            res.push_back(std::abs(leading_real(r, lamb, pv) + c.per_axis[0] * p * p));
        }
        c.quartic_exponent = fit_loglog(ps, res);
    }
    return c;
}

std::vector<FiberScanRow> fiber_scan(const RateTable& r, const LambShift& lamb,
                                     const std::vector<double>& ps, int threads) {
    std::vector<FiberScanRow> rows(ps.size());
    // coherence blocks: Re q_eps is independent of p
    double coh = -1e300;
    for (int e = 0; e < r.n_levels; ++e)
        for (int e2 = 0; e2 < r.n_levels; ++e2)
            if (e != e2) coh = std::max(coh, -0.5 * (r.escape[e] + r.escape[e2]));
    parallel_for(ps.size(), threads, [&](size_t i) {
        std::vector<cd> p(r.d, 0.0);
        p[0] = ps[i];
        FiberOptions opt;
        opt.gamma0 = 1e9;
        auto fib = fiber_operator(0.0, p, r, lamb, opt);
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(fib.matrix, false);
        const auto& ev = es.eigenvalues();
        std::vector<int> idx(ev.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return ev[a].real() > ev[b].real(); });
        rows[i].p = ps[i];
        rows[i].f = ev[idx[0]];
        rows[i].gap = ev.size() > 1 ? ev[idx[0]].real() - ev[idx[1]].real() : 0.0;
        rows[i].max_re = std::max(ev[idx[0]].real(), coh);
    });
    return rows;
}

SpectralConstants spectral_constants(const RateTable& r, const LambShift& lamb) {
    SpectralConstants sc;
    auto gap_at = [&](std::vector<cd> p) {
        FiberOptions opt;
        opt.gamma0 = 1e9;
        auto fib = fiber_operator(0.0, p, r, lamb, opt);
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(fib.matrix, false);
        auto ev = es.eigenvalues();
        std::vector<double> re(ev.size());
        for (int i = 0; i < ev.size(); ++i) re[i] = ev[i].real();
        std::sort(re.rbegin(), re.rend());
        return std::make_pair(re[0], re.size() > 1 ? re[0] - re[1] : 0.0);
    };
    std::vector<cd> p(r.d, 0.0);
    sc.a_Q = gap_at(p).second;
    auto ok_real = [&](double x) {
        std::vector<cd> q(r.d, 0.0);
        q[0] = x;
        return gap_at(q).second >= sc.a_Q / 2;
    };
    auto bisect = [&](auto ok, double hi) {
        if (ok(hi)) return hi;
        double lo = 0;
        for (int it = 0; it < 40; ++it) {
            double mid = 0.5 * (lo + hi);
            (ok(mid) ? lo : hi) = mid;
        }
        return lo;
    };
    sc.p_Q = bisect(ok_real, kPi);
    {
        std::vector<cd> q(r.d, 0.0);
        q[0] = sc.p_Q;
        double coh = -1e300;
        for (int e = 0; e < r.n_levels; ++e)
            for (int e2 = 0; e2 < r.n_levels; ++e2)
                if (e != e2) coh = std::max(coh, -0.5 * (r.escape[e] + r.escape[e2]));
        sc.b_Q = -0.5 * std::max(gap_at(q).first, coh);
    }
    auto ok_imag = [&](double y) {
        std::vector<cd> q(r.d, 0.0);
        q[0] = cd(0, y);
        return gap_at(q).second >= sc.a_Q / 2;
    };
    sc.gamma0 = bisect(ok_imag, 3.0);
    return sc;
}

}  // namespace qdiff
