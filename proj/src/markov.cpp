#include "qdiff/markov.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "qdiff/errors.hpp"
#include "qdiff/parallel.hpp"
#include "qdiff/simd.hpp"

namespace qdiff {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Inverse-CDF sampler over a sparse list of outcomes.
struct Sampler {
    std::vector<double> cum;
    std::vector<int> outcome;

    void build(const std::vector<double>& w) {
        cum.clear();
        outcome.clear();
        double s = 0;
        for (size_t i = 0; i < w.size(); ++i) {
            if (w[i] <= 0) continue;
            s += w[i];
            cum.push_back(s);
            outcome.push_back(static_cast<int>(i));
        }
    }
    int draw(double u) const {
        double target = u * cum.back();
        auto it = std::upper_bound(cum.begin(), cum.end(), target);
        if (it == cum.end()) --it;
        return outcome[it - cum.begin()];
    }
};

struct Samplers {
    std::vector<Sampler> level;     // per e: next level
    std::vector<Sampler> transfer;  // per (e, e2): k-transfer cell
    std::vector<double> vel;        // cells * d

    explicit Samplers(const RateTable& r) {
        const int n = r.n_levels;
        level.resize(n);
        transfer.resize(n * n);
        for (int e = 0; e < n; ++e) {
            std::vector<double> w(n);
            for (int e2 = 0; e2 < n; ++e2) w[e2] = r.channel_total[e * n + e2];
            level[e].build(w);
            for (int e2 = 0; e2 < n; ++e2) transfer[e * n + e2].build(r.channel(e, e2));
        }
        vel.resize(static_cast<size_t>(r.cells()) * r.d);
        for (int c = 0; c < r.cells(); ++c) {
            auto v = r.velocity(c);
            std::copy(v.begin(), v.end(), vel.begin() + static_cast<size_t>(c) * r.d);
        }
    }
};

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t idx) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(idx), static_cast<std::uint32_t>(idx >> 32)};
    return std::mt19937_64(seq);
}

// Calls on_jump(t, e, cell, x) at t = 0 and after every jump, and
// on_sample(j, x) for every sample time. Stops at t_max.
template <class OnJump, class OnSample>
void run_process(const RateTable& r, const Samplers& s, int e, int cell, std::vector<double> x,
                 double t_max, const std::vector<double>& samples, std::mt19937_64& eng,
                 OnJump&& on_jump, OnSample&& on_sample) {
    const int d = r.d;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double t = 0;
    size_t next = 0;
    std::vector<double> xs(d);
    on_jump(t, e, cell, x);
    while (true) {
        double t_next = t + std::exponential_distribution<double>(r.escape[e])(eng);
        const double* v = &s.vel[static_cast<size_t>(cell) * d];
        double stop = std::min(t_next, t_max);
        while (next < samples.size() && samples[next] <= stop) {
            for (int i = 0; i < d; ++i) xs[i] = x[i] + v[i] * (samples[next] - t);
            on_sample(next, xs);
            ++next;
        }
        if (t_next >= t_max) break;
        for (int i = 0; i < d; ++i) x[i] += v[i] * (t_next - t);
        t = t_next;
        int e2 = s.level[e].draw(uni(eng));
        int delta = s.transfer[e * r.n_levels + e2].draw(uni(eng));
        cell = r.add(cell, delta);
        e = e2;
        on_jump(t, e, cell, x);
    }
}

// Fourier blocks G_hat(x)[e2, e] = sum_delta J_{e->e2}(delta) exp(-i delta.x) - delta w(e2).
Eigen::MatrixXcd fourier_block(const RateTable& r, int xcell) {
    const int n = r.n_levels;
    auto xc = r.decode(xcell);
    Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(n, n);
    for (int e = 0; e < n; ++e) {
        for (int e2 = 0; e2 < n; ++e2) {
            const auto& m = r.channel(e, e2);
            cd s = 0;
            for (int c = 0; c < r.cells(); ++c) {
                if (m[c] == 0) continue;
                auto dc = r.decode(c);
                long dot = 0;
                for (int i = 0; i < r.d; ++i) dot += static_cast<long>(dc[i]) * xc[i];
                double ph = 2 * kPi * static_cast<double>(dot % r.bins) / r.bins;
                s += m[c] * std::exp(cd(0, -ph));
            }
            g(e2, e) += s;
        }
        g(e, e) -= r.escape[e];
    }
    return g;
}

// Naive DFT over the grid: fhat(e, x) = (1/cells) sum_k f(e, k) exp(-i k.x).
std::vector<cd> grid_dft(const RateTable& r, const std::vector<cd>& f, int sign) {
    const int C = r.cells();
    std::vector<cd> out(f.size(), 0.0);
    std::vector<cd> tw(r.bins);
    for (int j = 0; j < r.bins; ++j) tw[j] = std::exp(cd(0, sign * 2 * kPi * j / r.bins));
    std::vector<std::vector<int>> coords(C);
    for (int c = 0; c < C; ++c) coords[c] = r.decode(c);
    for (int x = 0; x < C; ++x) {
        for (int k = 0; k < C; ++k) {
            long dot = 0;
            for (int i = 0; i < r.d; ++i) dot += static_cast<long>(coords[k][i]) * coords[x][i];
            cd ph = tw[dot % r.bins];
            for (int e = 0; e < r.n_levels; ++e) out[e * C + x] += f[e * C + k] * ph;
        }
    }
    if (sign < 0)
        for (auto& v : out) v /= C;
    return out;
}

double fit_slope_ols(const std::vector<double>& x, const std::vector<double>& y, double* icpt) {
    const double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    double b = sxy / sxx;
    if (icpt) *icpt = my - b * mx;
    return b;
}

}  // namespace

int RateTable::cells() const {
    int c = 1;
    for (int i = 0; i < d; ++i) c *= bins;
    return c;
}

std::vector<int> RateTable::decode(int cell) const {
    std::vector<int> c(d);
    for (int i = d - 1; i >= 0; --i) {
        c[i] = cell % bins;
        cell /= bins;
    }
    return c;
}

int RateTable::encode(const std::vector<int>& c) const {
    int f = 0;
    for (int i = 0; i < d; ++i) f = f * bins + ((c[i] % bins) + bins) % bins;
    return f;
}

int RateTable::add(int cell, int delta) const {
    int f = 0, stride = 1;
    for (int i = 0; i < d; ++i) {
        int a = cell % bins, b = delta % bins;
        f += ((a + b) % bins) * stride;
        stride *= bins;
        cell /= bins;
        delta /= bins;
    }
    return f;
}

std::vector<double> RateTable::momentum(int cell) const {
    auto c = decode(cell);
    std::vector<double> k(d);
    for (int i = 0; i < d; ++i) k[i] = 2 * kPi * c[i] / bins;
    return k;
}

std::vector<double> RateTable::velocity(int cell) const { return group_velocity(momentum(cell), m_p); }

double RateTable::rate(int e2, int cell2, int e, int cell) const {
    auto a = decode(cell2), b = decode(cell);
    for (int i = 0; i < d; ++i) a[i] -= b[i];
    return channel(e, e2)[encode(a)];
}

double RateTable::mean_escape(const std::vector<double>& level_weights) const {
    double s = 0;
    for (int e = 0; e < n_levels; ++e) s += level_weights[e] * escape[e];
    return s;
}

RateTable jump_rates(const SpinSystem& spin, const std::map<double, SpectralMeasure>& measures,
                     double m_p) {
    RateTable r;
    r.n_levels = spin.size();
    r.levels = spin.levels;
    r.m_p = m_p;
    const int n = r.n_levels;
    auto find = [&](double eps) -> const SpectralMeasure& {
        auto it = measures.lower_bound(eps - 1e-9);
        if (it == measures.end() || std::abs(it->first - eps) > 1e-9)
            throw MissingMeasure("no spectral measure for eps=" + std::to_string(eps));
        return it->second;
    };
    bool first = true;
    r.mass.assign(n * n, {});
    r.channel_total.assign(n * n, 0.0);
    r.escape.assign(n, 0.0);
    for (int e = 0; e < n; ++e) {
        for (int e2 = 0; e2 < n; ++e2) {
            if (e2 == e) continue;
            const auto& sm = find(spin.levels[e2] - spin.levels[e]);
            if (first) {
                r.d = sm.d;
                r.bins = sm.bins;
                first = false;
            } else if (sm.d != r.d || sm.bins != r.bins) {
                throw ConfigError("spectral measures on different grids");
            }
            double w2 = std::norm(spin.W(e, e2));
            auto& m = r.mass[e * n + e2];
            m.resize(sm.weights.size());
            for (size_t c = 0; c < m.size(); ++c) m[c] = w2 * sm.weights[c];
            r.channel_total[e * n + e2] = std::accumulate(m.begin(), m.end(), 0.0);
            r.escape[e] += r.channel_total[e * n + e2];
        }
    }
    if (n == 1) {
        r.d = 1;
        r.bins = 1;
    }
    for (int e = 0; e < n; ++e) {
        auto& m = r.mass[e * n + e];
        m.assign(r.cells(), 0.0);
        if (!(r.escape[e] > 0))
            throw ZeroEscape("level " + std::to_string(spin.levels[e]) + " has zero escape rate");
    }
    return r;
}

std::map<double, SpectralMeasure> bohr_measures(const Model& model) {
    std::map<double, SpectralMeasure> ms;
    for (double eps : model.spin.bohr_frequencies()) {
        if (std::abs(eps) < 1e-12) continue;
        ms.emplace(eps, spectral_measure(eps, model.bath, model.bins, model.nu));
    }
    return ms;
}

RateTable markov_rates(const Model& model) {
    return jump_rates(model.spin, bohr_measures(model), model.params.m_p);
}

Eigen::MatrixXd generator_matrix(const RateTable& r) {
    const int C = r.cells(), n = r.n_levels;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n * C, n * C);
    for (int e = 0; e < n; ++e)
        for (int e2 = 0; e2 < n; ++e2) {
            const auto& m = r.channel(e, e2);
            for (int dc = 0; dc < C; ++dc) {
                if (m[dc] == 0) continue;
                for (int k = 0; k < C; ++k) G(e2 * C + r.add(k, dc), e * C + k) += m[dc];
            }
        }
    for (int e = 0; e < n; ++e)
        for (int k = 0; k < C; ++k) G(e * C + k, e * C + k) -= r.escape[e];
    return G;
}

std::vector<double> apply_generator(const RateTable& r, const std::vector<double>& f) {
    const int C = r.cells(), n = r.n_levels;
    std::vector<double> out(f.size(), 0.0);
    for (int e = 0; e < n; ++e) {
        for (int e2 = 0; e2 < n; ++e2) {
            const auto& m = r.channel(e, e2);
            for (int dc = 0; dc < C; ++dc) {
                if (m[dc] == 0) continue;
                for (int k = 0; k < C; ++k) out[e2 * C + r.add(k, dc)] += m[dc] * f[e * C + k];
            }
        }
        for (int k = 0; k < C; ++k) out[e * C + k] -= r.escape[e] * f[e * C + k];
    }
    return out;
}

std::vector<double> Density::probability() const {
    std::vector<double> p(mu.size());
    for (size_t i = 0; i < mu.size(); ++i) p[i] = mu[i] * cell_volume;
    return p;
}

std::vector<double> Density::level_marginal() const {
    std::vector<double> m(n_levels, 0.0);
    for (int e = 0; e < n_levels; ++e)
        for (int k = 0; k < cells; ++k) m[e] += mu[e * cells + k] * cell_volume;
    return m;
}

Density stationary_density(const RateTable& r, double tol, int max_iter) {
    const int C = r.cells(), n = r.n_levels;
    const size_t N = r.states();
    // Shifted inverse iteration with (G - sigma)^{-1} applied blockwise in the
    // Fourier variable conjugate to k.
    const double wmax = *std::max_element(r.escape.begin(), r.escape.end());
    const double sigma = 1e-3 * wmax;
    std::vector<Eigen::PartialPivLU<Eigen::MatrixXcd>> lu;
    lu.reserve(C);
    for (int x = 0; x < C; ++x) {
        Eigen::MatrixXcd g = fourier_block(r, x);
        g -= sigma * Eigen::MatrixXcd::Identity(n, n);
        lu.emplace_back(g);
    }
    std::vector<cd> f(N);
    // deterministic start with a k-dependent component
    for (size_t i = 0; i < N; ++i) f[i] = 1.0 + 0.1 * std::cos(static_cast<double>(i));
    Density out;
    out.n_levels = n;
    out.cells = C;
    out.cell_volume = std::pow(2 * kPi / r.bins, r.d);
    std::vector<double> mu(N);
    for (int it = 1; it <= max_iter; ++it) {
        auto fh = grid_dft(r, f, -1);
        std::vector<cd> ah(N);
        for (int x = 0; x < C; ++x) {
            Eigen::VectorXcd b(n);
            for (int e = 0; e < n; ++e) b[e] = fh[e * C + x];
            Eigen::VectorXcd a = lu[x].solve(b);
            for (int e = 0; e < n; ++e) ah[e * C + x] = a[e];
        }
        f = grid_dft(r, ah, +1);
        double s = 0;
        for (size_t i = 0; i < N; ++i) s += f[i].real();
        for (size_t i = 0; i < N; ++i) {
            f[i] = f[i].real() / s;
            mu[i] = f[i].real();
        }
        auto g = apply_generator(r, mu);
        double gmax = 0, mmax = 0;
        for (size_t i = 0; i < N; ++i) {
            gmax = std::max(gmax, std::abs(g[i]));
            mmax = std::max(mmax, std::abs(mu[i]));
        }
        out.residual = gmax / (wmax * mmax);
        out.iterations = it;
        if (out.residual < tol) break;
    }
    if (!(out.residual < tol))
        throw NotConverged("stationary density residual " + std::to_string(out.residual));
    out.mu.resize(N);
    for (size_t i = 0; i < N; ++i) out.mu[i] = mu[i] / out.cell_volume;
    return out;
}

bool irreducibility_check(const RateTable& r) {
    const int C = r.cells(), n = r.n_levels;
    const size_t N = r.states();
    std::vector<std::pair<int, int>> edges;  // (level pair, transfer)
    for (int e = 0; e < n; ++e)
        for (int e2 = 0; e2 < n; ++e2)
            for (int dc = 0; dc < C; ++dc)
                if (r.channel(e, e2)[dc] > 0) edges.emplace_back(e * n + e2, dc);
    auto closure = [&](bool forward) {
        std::vector<char> seen(N, 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        size_t count = 1;
        while (!stack.empty()) {
            int s = stack.back();
            stack.pop_back();
            int e = s / C, k = s % C;
            for (auto [pair, dc] : edges) {
                int from = pair / n, to = pair % n;
                int t;
                if (forward) {
                    if (from != e) continue;
                    t = to * C + r.add(k, dc);
                } else {
                    if (to != e) continue;
                    auto c = r.decode(dc);
                    for (auto& v : c) v = -v;
                    t = from * C + r.add(k, r.encode(c));
                }
                if (!seen[t]) {
                    seen[t] = 1;
                    ++count;
                    stack.push_back(t);
                }
            }
        }
        return count == N;
    };
    return closure(true) && closure(false);
}

Diffusion diffusion_green_kubo(const RateTable& r, const Density& mu, GreenKuboMethod method,
                               double t_max) {
    const int C = r.cells(), n = r.n_levels, d = r.d;
    const size_t N = r.states();
    auto p = mu.probability();
    // v_j * pi on the grid
    std::vector<std::vector<double>> vpi(d, std::vector<double>(N));
    std::vector<std::vector<double>> vel(C);
    for (int k = 0; k < C; ++k) vel[k] = r.velocity(k);
    double scale = 0;
    for (int j = 0; j < d; ++j) {
        double s = 0;
        for (int e = 0; e < n; ++e)
            for (int k = 0; k < C; ++k) {
                vpi[j][e * C + k] = vel[k][j] * p[e * C + k];
                s += vpi[j][e * C + k];
                scale += std::abs(vpi[j][e * C + k]);
            }
        if (std::abs(s) > 1e-9 * std::max(scale, 1e-300))
            throw SingularSolve("velocity has nonzero stationary mean");
    }
    Diffusion out;
    out.D = Eigen::MatrixXd::Zero(d, d);
    if (scale == 0) return out;

    const double wmin = *std::min_element(r.escape.begin(), r.escape.end());
    if (t_max <= 0) t_max = 80.0 / wmin;
    for (int j = 0; j < d; ++j) {
        std::vector<cd> f(vpi[j].begin(), vpi[j].end());
        auto fh = grid_dft(r, f, -1);
        std::vector<cd> uh(N, 0.0);
        for (int x = 1; x < C; ++x) {
            Eigen::VectorXcd b(n);
            double bn = 0;
            for (int e = 0; e < n; ++e) {
                b[e] = fh[e * C + x];
                bn += std::abs(b[e]);
            }
            if (bn < 1e-15 * scale) continue;
            Eigen::MatrixXcd g = fourier_block(r, x);
            Eigen::VectorXcd a;
            if (method == GreenKuboMethod::solve) {
                Eigen::FullPivLU<Eigen::MatrixXcd> lu(-g);
                if (!lu.isInvertible()) throw SingularSolve("generator block not invertible");
                a = lu.solve(b);
            } else {
                // composite Simpson on int_0^T exp(tG) b dt
                const double wmax = *std::max_element(r.escape.begin(), r.escape.end());
                int steps = 2 * static_cast<int>(std::ceil(t_max * wmax * 20 / 2));
                double h = t_max / steps;
                Eigen::MatrixXcd E = (h * g).exp();
                Eigen::VectorXcd y = b;
                a = y;
                for (int s = 1; s <= steps; ++s) {
                    y = E * y;
                    double w = (s == steps) ? 1.0 : (s % 2 ? 4.0 : 2.0);
                    a += w * y;
                }
                a *= h / 3;
            }
            for (int e = 0; e < n; ++e) uh[e * C + x] = a[e];
        }
        auto u = grid_dft(r, uh, +1);
        for (int i = 0; i < d; ++i) {
            double s = 0;
            for (int e = 0; e < n; ++e)
                for (int k = 0; k < C; ++k) s += vel[k][i] * u[e * C + k].real();
            out.D(i, j) = s;
        }
    }
    out.D_Q = out.D.trace() / d;
    return out;
}

std::vector<double> Trajectory::position(double t) const {
    auto it = std::upper_bound(events.begin(), events.end(), t,
                               [](double v, const JumpEvent& ev) { return v < ev.t; });
    const JumpEvent& ev = *(it - 1);
    std::vector<double> x = ev.x;
    for (size_t i = 0; i < x.size(); ++i) x[i] += ev.v[i] * (t - ev.t);
    return x;
}

Trajectory simulate_trajectory(const RateTable& r, const InitialState& init, double t_max,
                               std::uint64_t seed) {
    Samplers s(r);
    Trajectory tr;
    tr.seed = seed;
    tr.t_max = t_max;
    auto eng = stream(seed, 0);
    std::vector<double> x0 = init.x;
    x0.resize(r.d, 0.0);
    run_process(
        r, s, init.e, init.cell, x0, t_max, {}, eng,
        [&](double t, int e, int cell, const std::vector<double>& x) {
            tr.events.push_back({t, e, cell, x, r.velocity(cell)});
        },
        [](size_t, const std::vector<double>&) {});
    return tr;
}

std::vector<double> msd_times(const RateTable& r, const Density& mu, int n) {
    double wmin = *std::min_element(r.escape.begin(), r.escape.end());
    double wbar = r.mean_escape(mu.level_marginal());
    double lo = 10.0 / wmin, hi = 400.0 / wbar;
    if (hi <= lo) hi = 40 * lo;
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) t[i] = lo * std::pow(hi / lo, i / double(n - 1));
    return t;
}

DisplacementTable msd_ensemble(const RateTable& r, const Density& mu, std::size_t n_traj,
                               const std::vector<double>& times, std::uint64_t seed,
                               int threads) {
    Samplers s(r);
    Sampler init;
    init.build(mu.probability());
    DisplacementTable tab;
    tab.d = r.d;
    tab.times = times;
    const size_t nt = times.size();
    tab.sq.assign(n_traj * nt, 0.0);
    tab.jumps.assign(n_traj, 0);
    const double t_max = times.back();
    const int C = r.cells();
    parallel_for(n_traj, threads, [&](size_t i) {
        auto eng = stream(seed, i);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        int st = init.draw(uni(eng));
        std::vector<double> x0(r.d, 0.0);
        double* row = &tab.sq[i * nt];
        std::uint32_t jumps = 0;
        run_process(
            r, s, st / C, st % C, x0, t_max, times, eng,
            [&](double, int, int, const std::vector<double>&) { ++jumps; },
            [&](size_t j, const std::vector<double>& x) {
                double q = 0;
                for (double c : x) q += c * c;
                row[j] = q;
            });
        tab.jumps[i] = jumps - 1;
    });
    return tab;
}

MsdFit msd_diffusion(const DisplacementTable& tab, std::uint64_t seed, int resamples) {
    const size_t n = tab.n_traj(), nt = tab.times.size();
    if (n < 2 || nt < 3) throw InsufficientData("need >= 2 trajectories and >= 3 sample times");
    std::uint64_t total_jumps = 0;
    for (auto j : tab.jumps) total_jumps += j;
    if (!tab.jumps.empty() && total_jumps == 0)
        throw InsufficientData("no jumps in the window: motion is ballistic");

    auto mean_curve = [&](const std::vector<size_t>* idx) {
        std::vector<double> m(nt, 0.0);
        for (size_t a = 0; a < n; ++a) {
            size_t i = idx ? (*idx)[a] : a;
            simd::active().axpy(1.0, &tab.sq[i * nt], m.data(), nt);
        }
        for (auto& v : m) v /= static_cast<double>(n);
        return m;
    };
    MsdFit fit;
    fit.times = tab.times;
    fit.msd = mean_curve(nullptr);
    fit.msd_err.assign(nt, 0.0);
    for (size_t j = 0; j < nt; ++j) {
        double s = 0;
        for (size_t i = 0; i < n; ++i) s += std::pow(tab.sq[i * nt + j] - fit.msd[j], 2);
        fit.msd_err[j] = std::sqrt(s / (n - 1) / n);
    }
    if (fit.msd.front() <= 0) throw InsufficientData("zero displacement");
    std::vector<double> lt(nt), lm(nt);
    for (size_t j = 0; j < nt; ++j) {
        lt[j] = std::log(tab.times[j]);
        lm[j] = std::log(fit.msd[j]);
    }
    if (fit_slope_ols(lt, lm, nullptr) > 1.5)
        throw InsufficientData("mean-square displacement grows ballistically");

    const double two_d = 2.0 * tab.d;
    fit.D = fit_slope_ols(tab.times, fit.msd, &fit.intercept) / two_d;
    std::mt19937_64 eng(seed);
    std::uniform_int_distribution<size_t> pick(0, n - 1);
    std::vector<size_t> idx(n);
    double s1 = 0, s2 = 0;
    for (int b = 0; b < resamples; ++b) {
        for (auto& i : idx) i = pick(eng);
        double D = fit_slope_ols(tab.times, mean_curve(&idx), nullptr) / two_d;
        s1 += D;
        s2 += D * D;
    }
    double m = s1 / resamples;
    fit.stderr_D = std::sqrt(std::max(0.0, s2 / resamples - m * m) * resamples / (resamples - 1));
    return fit;
}

MsdFit msd_diffusion(const std::vector<Trajectory>& trs, const std::vector<double>& times, int d) {
    DisplacementTable tab;
    tab.d = d;
    tab.times = times;
    for (const auto& tr : trs) {
        if (tr.t_max < times.back()) throw InsufficientData("trajectory shorter than sample window");
        auto x0 = tr.position(0.0);
        for (double t : times) {
            auto x = tr.position(t);
            double q = 0;
            for (int i = 0; i < d; ++i) q += (x[i] - x0[i]) * (x[i] - x0[i]);
            tab.sq.push_back(q);
        }
        tab.jumps.push_back(static_cast<std::uint32_t>(tr.jumps()));
    }
    return msd_diffusion(tab);
}

}  // namespace qdiff
