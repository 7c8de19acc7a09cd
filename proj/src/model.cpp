#include "qdiff/model.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qdiff/errors.hpp"
#include "qdiff/simd.hpp"

namespace qdiff {

namespace {

constexpr double kPi = 3.14159265358979323846;

double bose(double x) { return 1.0 / std::expm1(x); }

double torus_norm(const std::vector<double>& q) {
    double s = 0;
    for (double c : q) s += c * c;
    return std::sqrt(s);
}

Dispersion parse_dispersion(const std::string& s) {
    if (s == "optical") return Dispersion::optical;
    if (s == "acoustic") return Dispersion::acoustic;
    if (s == "massive") return Dispersion::massive;
    if (s == "table") return Dispersion::table;
    throw ConfigError("unknown bath.dispersion '" + s + "'");
}

}  // namespace

std::vector<double> SpinSystem::bohr_frequencies() const {
    std::vector<double> out;
    for (double a : levels)
        for (double b : levels) out.push_back(a - b);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-12; }),
              out.end());
    return out;
}

void SpinSystem::validate() const {
    const int n = size();
    if (n == 0) throw ConfigError("spin.levels is empty");
    if (W.rows() != n || W.cols() != n) throw ConfigError("spin.W has wrong dimension");
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(levels[i] - levels[j]) < 1e-12)
                throw DegenerateSpectrum("repeated level " + std::to_string(levels[i]));
    std::vector<double> gaps;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) gaps.push_back(levels[i] - levels[j]);
    std::sort(gaps.begin(), gaps.end());
    for (size_t i = 1; i < gaps.size(); ++i)
        if (std::abs(gaps[i] - gaps[i - 1]) < 1e-12)
            throw DegenerateSpectrum("repeated Bohr frequency " + std::to_string(gaps[i]));
    if ((W - W.adjoint()).norm() > 1e-12 * std::max(1.0, W.norm()))
        throw NonHermitianCoupling("W differs from its adjoint");
}

int BathSpec::sites() const {
    int n = 1;
    for (int i = 0; i < d; ++i) n *= L;
    return n;
}

std::vector<int> BathSpec::decode(int flat) const {
    std::vector<int> c(d);
    for (int i = d - 1; i >= 0; --i) {
        c[i] = flat % L;
        flat /= L;
    }
    return c;
}

std::vector<double> BathSpec::momentum(int flat) const {
    auto c = decode(flat);
    std::vector<double> q(d);
    for (int i = 0; i < d; ++i) {
        int n = c[i] > L / 2 ? c[i] - L : c[i];
        q[i] = 2 * kPi * n / L;
    }
    return q;
}

double BathSpec::dispersion(const std::vector<double>& q) const {
    double s = 0;
    switch (kind) {
        case Dispersion::optical:
        case Dispersion::acoustic: {
            double m = kind == Dispersion::acoustic ? 0.0 : m_ph;
            for (double c : q) s += std::pow(std::sin(c / 2), 2);
            return std::sqrt(m * m + s);
        }
        case Dispersion::massive:
            for (double c : q) s += 4 * std::pow(std::sin(c / 2), 2);
            return std::sqrt(m_ph * m_ph + s);
        case Dispersion::table:
            break;
    }
    throw ConfigError("dispersion() is not defined off-grid for tabulated baths");
}

double BathSpec::form_factor(const std::vector<double>& q) const {
    double r = torus_norm(q) / phi_radius;
    if (r >= 1.0) return 0.0;
    return phi_amp * std::exp(1.0 - 1.0 / (1.0 - r * r));
}

double BathSpec::min_beta() const { return *std::min_element(betas.begin(), betas.end()); }

void BathSpec::prepare() {
    if (d < 1) throw ConfigError("lattice.d must be positive");
    if (L < 2 || L % 2) throw ConfigError("lattice.L must be even and >= 2");
    if (betas.empty()) throw ConfigError("at least one reservoir temperature required");
    for (double b : betas)
        if (!(b > 0)) throw ConfigError("inverse temperatures must be positive");
    const int n = sites();
    if (kind == Dispersion::table && static_cast<int>(table.size()) != n)
        throw ConfigError("bath.table needs L^d entries");
    mode_index.clear();
    omega.clear();
    phi2.clear();
    for (int f = 0; f < n; ++f) {
        auto q = momentum(f);
        bool zero = std::all_of(q.begin(), q.end(), [](double c) { return c == 0.0; });
        double w = kind == Dispersion::table ? table[f] : dispersion(q);
        if (zero && drop_zero_modes && w <= 0) continue;
        if (!(w > 0))
            throw ZeroDispersion("omega vanishes at grid point " + std::to_string(f));
        double phi = form_factor(q);
        mode_index.push_back(f);
        omega.push_back(w);
        phi2.push_back(phi * phi);
    }
}

Model build_model(const Config& cfg) {
    Model m;
    m.source = cfg;
    m.spin.levels = cfg.list("spin.levels");
    const int n = m.spin.size();
    auto w = cfg.list("spin.W");
    if (static_cast<int>(w.size()) != 2 * n * n)
        throw ConfigError("spin.W needs " + std::to_string(2 * n * n) + " numbers");
    m.spin.W.resize(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m.spin.W(i, j) = cd(w[2 * (i * n + j)], w[2 * (i * n + j) + 1]);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(),
              [&](int a, int b) { return m.spin.levels[a] < m.spin.levels[b]; });
    SpinSystem sorted;
    sorted.W.resize(n, n);
    for (int i = 0; i < n; ++i) {
        sorted.levels.push_back(m.spin.levels[perm[i]]);
        for (int j = 0; j < n; ++j) sorted.W(i, j) = m.spin.W(perm[i], perm[j]);
    }
    m.spin = sorted;
    m.spin.validate();

    auto& b = m.bath;
    b.d = cfg.integer("lattice.d", 3);
    b.L = cfg.integer("lattice.L", 16);
    b.kind = parse_dispersion(cfg.str("bath.dispersion", "optical"));
    b.m_ph = cfg.num("bath.m_ph", 0.3);
    if (b.kind == Dispersion::acoustic) b.m_ph = 0.0;
    if (cfg.has("bath.phi")) {
        auto phi = cfg.list("bath.phi");
        if (phi.size() != 2) throw ConfigError("bath.phi = radius, amplitude");
        b.phi_radius = phi[0];
        b.phi_amp = phi[1];
    }
    b.betas = {cfg.num("bath.beta1", 1.0)};
    if (cfg.has("bath.beta2")) b.betas.push_back(cfg.num("bath.beta2"));
    if (b.kind == Dispersion::table) b.table = cfg.list("bath.table");
    b.drop_zero_modes = cfg.integer("bath.drop_zero_modes", 1) != 0;
    b.prepare();

    m.params.lambda = cfg.num("params.lambda", 0.1);
    m.params.m_p = cfg.num("params.m_p", 1.0);
    m.params.tau0 = cfg.num("params.tau0", 1.0);
    if (m.params.lambda == 0) throw ConfigError("params.lambda must be nonzero");
    if (!(m.params.m_p > 0)) throw ConfigError("params.m_p must be positive");
    if (!(m.params.tau0 > 0)) throw ConfigError("params.tau0 must be positive");

    m.bins = cfg.integer("measure.bins", b.d <= 2 ? 32 : 16);
    m.nu = cfg.num("measure.nu", 0.0);
    if (m.bins < 2) throw ConfigError("measure.bins must be >= 2");
    return m;
}

cd ModeSum::eval(cd t) const {
    cd s = 0;
    for (size_t i = 0; i < om.size(); ++i) s += cd(ar[i], ai[i]) * std::exp(cd(0, 1) * om[i] * t);
    return s;
}

ModeSum correlation_modes(const std::vector<int>& x, const BathSpec& bath) {
    ModeSum ms;
    const double vol = std::pow(2 * kPi / bath.L, bath.d);
    for (double beta : bath.betas) {
        for (size_t m = 0; m < bath.omega.size(); ++m) {
            if (bath.phi2[m] == 0) continue;
            auto q = bath.momentum(bath.mode_index[m]);
            double xq = 0;
            for (int i = 0; i < bath.d; ++i) xq += x[i] * q[i];
            double w = bath.omega[m];
            double nb = bose(beta * w);
            cd plus = vol * bath.phi2[m] * nb * std::exp(cd(0, xq));
            cd minus = vol * bath.phi2[m] * (1 + nb) * std::exp(cd(0, -xq));
            ms.ar.push_back(plus.real());
            ms.ai.push_back(plus.imag());
            ms.om.push_back(w);
            ms.ar.push_back(minus.real());
            ms.ai.push_back(minus.imag());
            ms.om.push_back(-w);
        }
    }
    return ms;
}

cd bath_correlation(const std::vector<int>& x, cd t, const BathSpec& bath) {
    if (static_cast<int>(x.size()) != bath.d) throw ConfigError("x has wrong dimension");
    if (t.imag() < 0 || t.imag() > bath.min_beta())
        throw StripViolation("Im t = " + std::to_string(t.imag()) + " outside [0, beta]");
    auto ms = correlation_modes(x, bath);
    const size_t n = ms.om.size();
    std::vector<double> cr(n), ci(n);
    for (size_t i = 0; i < n; ++i) {
        cd e = std::exp(cd(0, 1) * ms.om[i] * t);
        cr[i] = e.real();
        ci[i] = e.imag();
    }
    return simd::active().cdot(ms.ar.data(), ms.ai.data(), cr.data(), ci.data(), n);
}

std::vector<cd> correlation_series(const ModeSum& ms, double t0, double dt, std::size_t n) {
    const auto& k = simd::active();
    const size_t m = ms.om.size();
    std::vector<double> re(m), im(m), sr(m), si(m);
    for (size_t i = 0; i < m; ++i) {
        re[i] = std::cos(ms.om[i] * t0);
        im[i] = std::sin(ms.om[i] * t0);
        sr[i] = std::cos(ms.om[i] * dt);
        si[i] = std::sin(ms.om[i] * dt);
    }
    std::vector<cd> out(n);
    for (size_t s = 0; s < n; ++s) {
        // Re-seed the phases periodically so rotation rounding does not accumulate.
        if (s % 4096 == 0 && s) {
            double t = t0 + s * dt;
            for (size_t i = 0; i < m; ++i) {
                re[i] = std::cos(ms.om[i] * t);
                im[i] = std::sin(ms.om[i] * t);
            }
        }
        out[s] = k.cdot(ms.ar.data(), ms.ai.data(), re.data(), im.data(), m);
        k.crotate(re.data(), im.data(), sr.data(), si.data(), m);
    }
    return out;
}

double SpectralMeasure::total() const {
    return std::accumulate(weights.begin(), weights.end(), 0.0);
}

cd SpectralMeasure::fourier(const std::vector<double>& x) const {
    cd s = 0;
    for (size_t c = 0; c < weights.size(); ++c) {
        if (weights[c] == 0) continue;
        size_t f = c;
        double phase = 0;
        for (int i = d - 1; i >= 0; --i) {
            int n = static_cast<int>(f % bins);
            f /= bins;
            phase += 2 * kPi * n / bins * x[i];
        }
        s += weights[c] * std::exp(cd(0, -phase));
    }
    return s;
}

double default_nu(const BathSpec& bath) {
    std::vector<double> w = bath.omega;
    std::sort(w.begin(), w.end());
    w.erase(std::unique(w.begin(), w.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
            w.end());
    if (w.size() < 2) return 1e-3;
    return 4.0 * (w.back() - w.front()) / static_cast<double>(w.size() - 1);
}

SpectralMeasure spectral_measure(double eps, const BathSpec& bath, int bins, double nu) {
    SpectralMeasure sm;
    sm.eps = eps;
    sm.d = bath.d;
    sm.bins = bins;
    sm.nu = nu > 0 ? nu : default_nu(bath);
    size_t cells = 1;
    for (int i = 0; i < bath.d; ++i) cells *= bins;
    sm.weights.assign(cells, 0.0);
    if (std::abs(eps) < 1e-14) return sm;

    const double vol = std::pow(2 * kPi / bath.L, bath.d);
    const double target = std::abs(eps);
    bool hit = false;
    for (double beta : bath.betas) {
        const double B = std::abs(bose(beta * eps));
        for (size_t m = 0; m < bath.omega.size(); ++m) {
            if (std::abs(bath.omega[m] - target) > sm.nu) continue;
            hit = true;
            if (bath.phi2[m] == 0) continue;
            auto q = bath.momentum(bath.mode_index[m]);
            // eps > 0 comes from the exp(+i x q) term: its mass sits at -q.
            size_t cell = 0;
            for (int i = 0; i < bath.d; ++i) {
                double qi = eps > 0 ? -q[i] : q[i];
                long n = std::lround(qi * bins / (2 * kPi));
                n = ((n % bins) + bins) % bins;
                cell = cell * bins + static_cast<size_t>(n);
            }
            sm.weights[cell] += vol * bath.phi2[m] * B * kPi / sm.nu;
        }
    }
    if (!hit)
        throw EmptyShell("no dual-lattice point within nu=" + std::to_string(sm.nu) +
                         " of |eps|=" + std::to_string(target));
    return sm;
}

std::vector<double> group_velocity(const std::vector<double>& k, double m_p) {
    std::vector<double> v(k.size());
    for (size_t i = 0; i < k.size(); ++i) v[i] = 2.0 / m_p * std::sin(k[i]);
    return v;
}

namespace {

double max_group_speed(const BathSpec& bath) {
    if (bath.kind == Dispersion::table) return 0;
    double vmax = 0;
    const double h = 1e-5;
    for (size_t m = 0; m < bath.omega.size(); ++m) {
        if (bath.phi2[m] == 0) continue;
        auto q = bath.momentum(bath.mode_index[m]);
        double s = 0;
        for (int i = 0; i < bath.d; ++i) {
            auto a = q, b = q;
            a[i] += h;
            b[i] -= h;
            double g = (bath.dispersion(a) - bath.dispersion(b)) / (2 * h);
            s += g * g;
        }
        vmax = std::max(vmax, std::sqrt(s));
    }
    return vmax;
}

// sup_x |zeta(x, t + i u)| over the full lattice via one inverse DFT.
double sup_correlation(const BathSpec& bath, double t, double u, fftw_complex* buf, fftw_plan plan) {
    const int n = bath.sites();
    const double vol = std::pow(2 * kPi / bath.L, bath.d);
    for (int i = 0; i < n; ++i) buf[i][0] = buf[i][1] = 0;
    for (double beta : bath.betas) {
        for (size_t m = 0; m < bath.omega.size(); ++m) {
            if (bath.phi2[m] == 0) continue;
            double w = bath.omega[m];
            double nb = bose(beta * w);
            int f = bath.mode_index[m];
            auto c = bath.decode(f);
            int g = 0;
            for (int i = 0; i < bath.d; ++i) g = g * bath.L + (bath.L - c[i]) % bath.L;
            cd plus = vol * bath.phi2[m] * nb * std::exp(cd(-w * u, w * t));
            cd minus = vol * bath.phi2[m] * (1 + nb) * std::exp(cd(w * u, -w * t));
            buf[f][0] += plus.real();
            buf[f][1] += plus.imag();
            buf[g][0] += minus.real();
            buf[g][1] += minus.imag();
        }
    }
    fftw_execute(plan);
    double s = 0;
    for (int i = 0; i < n; ++i) s = std::max(s, std::hypot(buf[i][0], buf[i][1]));
    return s;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace

DecayReport decay_check(const BathSpec& bath, double alpha, double t_max) {
    DecayReport r;
    bool zero = std::all_of(bath.phi2.begin(), bath.phi2.end(), [](double p) { return p == 0; });
    if (zero) {
        r.passes = true;
        r.fitted_exponent = std::numeric_limits<double>::infinity();
        return r;
    }
    double vmax = max_group_speed(bath);
    r.t_hi = t_max;
    if (vmax > 0) r.t_hi = std::min(t_max, 0.25 * bath.L / vmax);
    r.t_lo = r.t_hi / 4;

    const int n = bath.sites();
    std::vector<int> dims(bath.d, bath.L);
    auto* buf = fftw_alloc_complex(n);
    fftw_plan plan =
        fftw_plan_dft(bath.d, dims.data(), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    const int pts = 24;
    std::vector<double> lt, l0, l1;
    for (int i = 0; i < pts; ++i) {
        double t = r.t_lo * std::pow(r.t_hi / r.t_lo, i / double(pts - 1));
        double s0 = sup_correlation(bath, t, 0.0, buf, plan);
        double s1 = sup_correlation(bath, t, bath.min_beta(), buf, plan);
        r.times.push_back(t);
        r.sup_real.push_back(s0);
        r.sup_shifted.push_back(s1);
        lt.push_back(std::log(t));
        l0.push_back(std::log(s0));
        l1.push_back(std::log(s1));
    }
    fftw_destroy_plan(plan);
    fftw_free(buf);
    r.fitted_exponent = std::min(-fit_slope(lt, l0), -fit_slope(lt, l1));
    r.passes = r.fitted_exponent > 1.0 + alpha;
    return r;
}

}  // namespace qdiff
