#include "qdiff/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qdiff/errors.hpp"
#include "qdiff/lindblad.hpp"
#include "qdiff/markov.hpp"
#include "qdiff/rg_flow.hpp"
#include "qdiff/suites.hpp"

namespace qdiff {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') quoted = !quoted;
        else if (c == ',' && !quoted) {
            out.push_back(cur);
            cur.clear();
        } else cur += c;
    }
    out.push_back(cur);
    return out;
}

std::string quote(const std::string& s) {
    if (s.find(',') == std::string::npos) return s;
    return '"' + s + '"';
}

double max_abs(const Eigen::MatrixXcd& M) { return M.cwiseAbs().maxCoeff(); }

double max_abs(const Kernel& K) {
    double r = 0;
    for (auto v : K.data) r = std::max(r, std::abs(v));
    return r;
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

bool compare(double m, const std::string& op, double t) {
    if (op == "<") return m < t;
    if (op == "<=") return m <= t;
    if (op == ">") return m > t;
    if (op == ">=") return m >= t;
    if (op == "==") return m == t;
    throw ConfigError("unknown comparison '" + op + "'");
}

Check make_check(std::string id, std::string name, double measured, std::string op, double threshold,
                 std::string detail) {
    Check c{std::move(id), std::move(name), measured, std::move(op), threshold, false, std::move(detail)};
    c.pass = std::isfinite(measured) && compare(measured, c.op, threshold);
    return c;
}

std::string fmt(double x) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, p);
}
std::string fmt(long x) { return std::to_string(x); }
std::string fmt(int x) { return std::to_string(x); }

void write_table(const std::string& path, const Table& t, const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "# " << comment << "\n";
    for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
    out << "\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << quote(row[i]);
        out << "\n";
    }
}

void write_checks(const std::string& path, const std::vector<Check>& checks, const std::string& comment) {
    Table t{"checks", {"id", "name", "measured", "op", "threshold", "pass", "detail"}, {}};
    for (const auto& c : checks)
        t.add({c.id, c.name, fmt(c.measured), c.op, fmt(c.threshold), c.pass ? "1" : "0", c.detail});
    write_table(path, t, comment);
}

std::vector<Check> read_checks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifact(path);
    std::vector<Check> out;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        auto f = split_csv(line);
        if (f.size() != 7) throw ConfigError("malformed check row in " + path);
        Check c;
        c.id = f[0];
        c.name = f[1];
        c.measured = std::stod(f[2]);
        c.op = f[3];
        c.threshold = std::stod(f[4]);
        c.pass = f[5] == "1";
        c.detail = f[6];
        out.push_back(c);
    }
    return out;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

void StudyResult::merge(StudyResult other) {
    for (auto& c : other.checks) checks.push_back(std::move(c));
    for (auto& t : other.tables) tables.push_back(std::move(t));
}

// ---------------------------------------------------------------- markov

StudyResult gibbs_study(const Config& cfg) {
    Model model = build_model(cfg);
    const auto& betas = model.bath.betas;
    for (double b : betas)
        if (b != betas[0]) throw ConfigError("Gibbs check needs equal reservoir temperatures");
    const double beta = betas[0];
    auto rates = markov_rates(model);
    auto mu = stationary_density(rates);
    double Z = 0;
    for (double e : rates.levels) Z += std::exp(-beta * e);
    const double vol = std::pow(2 * kPi, rates.d);
    double err = 0;
    Table t{"gibbs", {"e", "mu_min", "mu_max", "gibbs"}, {}};
    for (int e = 0; e < rates.n_levels; ++e) {
        const double want = std::exp(-beta * rates.levels[e]) / Z / vol;
        double lo = INFINITY, hi = -INFINITY;
        for (int k = 0; k < rates.cells(); ++k) {
            const double v = mu.mu[e * rates.cells() + k];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            err = std::max(err, std::abs(v / want - 1));
        }
        t.add({fmt(rates.levels[e]), fmt(lo), fmt(hi), fmt(want)});
    }
    StudyResult r;
    r.tables.push_back(t);
    r.checks.push_back(make_check("C1", "Gibbs stationarity (max relative error)", err, "<", 1e-8,
                                  "cells=" + fmt(rates.cells())));
    return r;
}

StudyResult diffusion_study(const Config& cfg, const DiffusionOptions& opt) {
    Model model = build_model(cfg);
    auto rates = markov_rates(model);
    auto mu = stationary_density(rates);
    const double D_gk = diffusion_green_kubo(rates, mu).D_Q;
    auto lamb = lamb_shift(model);
    const double D_curv = diffusion_from_curvature(rates, lamb, 0.02, 1e-5, opt.fit_quartic).D;
    auto times = msd_times(rates, mu);
    auto tab = msd_ensemble(rates, mu, opt.n_traj, times, opt.seed, opt.threads);
    auto fit = msd_diffusion(tab);

    struct Est {
        const char* name;
        double D, se;
    };
    const Est est[3] = {{"gk", D_gk, 0}, {"curvature", D_curv, 0}, {"msd", fit.D, fit.stderr_D}};
    double worst = 0;
    std::string detail;
    for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b) {
            const double allow = std::max(0.01 * 0.5 * (est[a].D + est[b].D),
                                          3 * std::hypot(est[a].se, est[b].se));
            const double ratio = std::abs(est[a].D - est[b].D) / allow;
            worst = std::max(worst, ratio);
            detail += std::string(detail.empty() ? "" : " ") + est[a].name + "/" + est[b].name + "=" + fmt(ratio);
        }

    StudyResult r;
    Table s{"summary", {"model", "d", "D_gk", "D_msd", "D_msd_stderr", "D_curvature", "n_traj"}, {}};
    s.add({opt.label, fmt(rates.d), fmt(D_gk), fmt(fit.D), fmt(fit.stderr_D), fmt(D_curv),
           fmt(static_cast<long>(opt.n_traj))});
    r.tables.push_back(s);
    Table m{"msd_" + opt.label, {"t", "msd", "msd_err"}, {}};
    for (std::size_t i = 0; i < fit.times.size(); ++i) m.add({fmt(fit.times[i]), fmt(fit.msd[i]), fmt(fit.msd_err[i])});
    r.tables.push_back(m);
    r.checks.push_back(make_check("C2." + opt.label, "diffusion estimates agree (max |dD| / allowance)", worst,
                                  "<=", 1.0, detail));
    return r;
}

// ---------------------------------------------------------------- rg flow

StudyResult seed_ratio_study(const Config& cfg, const std::vector<double>& lambdas, double tau0) {
    Model model = build_model(cfg);
    auto rates = markov_rates(model);
    auto lamb = lamb_shift(model);
    const double DQ = diffusion_green_kubo(rates, stationary_density(rates)).D_Q;
    Table t{"seed_ratio", {"lambda", "D_0", "ratio", "deviation"}, {}};
    std::vector<double> dev;
    for (double l : lambdas) {
        auto s = seed_state(rates, lamb, l, tau0);
        const double ratio = s.D / (tau0 * DQ);
        dev.push_back(std::abs(ratio - 1));
        t.add({fmt(l), fmt(s.D), fmt(ratio), fmt(dev.back())});
    }
    double rise = -INFINITY;
    for (std::size_t i = 1; i < dev.size(); ++i) rise = std::max(rise, dev[i] - dev[i - 1]);
    StudyResult r;
    r.tables.push_back(t);
    r.checks.push_back(make_check("C3", "seed D_0 / (tau0 D_Q) deviation at smallest lambda", dev.back(), "<", 0.05));
    if (dev.size() > 1)
        r.checks.push_back(make_check("C3.trend", "seed deviation non-increasing as lambda decreases", rise, "<=", 1e-9));
    return r;
}

StudyResult gaussian_flow_study(const Config& cfg, int levels, double lambda, double tau0, int ell) {
    Model model = build_model(cfg);
    auto rates = markov_rates(model);
    auto lamb = lamb_shift(model);
    FlowParams fp;
    fp.ell = ell;
    auto s = seed_state(rates, lamb, lambda, tau0, fp);
    auto rho = product_density(0, {1, 2, 1}, rates.d);
    const double t0 = tau0 / (lambda * lambda);
    const double Dstar = s.D / t0;

    Table t{"flow", {"n", "D_n", "gap", "gaussian_deviation"}, {}};
    std::vector<double> dev;
    for (int n = 0; n <= levels; ++n) {
        if (n > 0) s = rg_step(s);
        dev.push_back(gaussian_deviation(s, rho, t0, Dstar));
        t.add({fmt(n), fmt(s.D), fmt(s.gap), fmt(dev.back())});
    }
    double rise = -INFINITY;
    for (std::size_t i = 1; i < dev.size(); ++i) rise = std::max(rise, dev[i] - dev[i - 1]);
    StudyResult r;
    r.tables.push_back(t);
    r.checks.push_back(make_check("C4", "Gaussian deviation at the last level", dev.back(), "<", 1e-3));
    r.checks.push_back(make_check("C4.monotone", "Gaussian deviation strictly decreasing (max step)", rise, "<", 0.0));
    return r;
}

// ---------------------------------------------------------------- toys

ToySystem dyson_toy(double lambda) {
    ToySystem t;
    t.levels = {0.0, 0.7};
    t.L = 2;
    t.modes = {ToyMode{kPi, 1.0, 1.0, -1}};
    t.lambda = lambda;
    t.build();
    return t;
}

ToySystem ring_toy(double lambda) {
    ToySystem t;
    t.levels = {0.0};
    t.L = 2;
    t.modes = {ToyMode{kPi, 1.0, 1.0, -1}};
    t.lambda = lambda;
    t.build();
    return t;
}

ToySystem two_mode_toy(double lambda) {
    ToySystem t;
    t.levels = {0.0, 0.7};
    t.L = 1;
    t.modes = {ToyMode{0.0, 1.0, 1.0, -1}, ToyMode{0.0, 1.6, 0.8, -1}};
    t.lambda = lambda;
    t.build();
    return t;
}

StudyResult dyson_study(const DysonStudyOptions& opt) {
    DysonOptions d;
    d.nodes = opt.nodes;
    d.threads = opt.threads;
    // orders are lambda-free, so one expansion serves the whole sweep
    const auto orders = dyson_orders(dyson_toy(opt.lambdas.front()), opt.t, opt.max_order, d);
    Table t{"dyson", {"lambda", "order", "error"}, {}};
    std::vector<std::vector<double>> err(opt.max_order + 1);
    for (double l : opt.lambdas) {
        Eigen::MatrixXcd Z = exact_reduced_dynamics(dyson_toy(l), opt.t);
        Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(Z.rows(), Z.cols());
        for (int m = 0; m <= opt.max_order; ++m) {
            S += std::pow(l, 2 * m) * orders[m];
            err[m].push_back(max_abs(Z - S));
            t.add({fmt(l), fmt(m), fmt(err[m].back())});
        }
    }
    StudyResult r;
    r.tables.push_back(t);
    for (int m = 1; m <= opt.max_order; ++m) {
        const double slope = log_slope(opt.lambdas, err[m]);
        r.checks.push_back(make_check("C5.m" + std::to_string(m),
                                      "order-" + std::to_string(m) + " error slope minus " + std::to_string(2 * m + 2),
                                      std::abs(slope - (2 * m + 2)), "<=", 0.3, "slope=" + fmt(slope)));
    }
    return r;
}

StudyResult ward_study() {
    StudyResult r;
    Table t{"ward", {"toy", "A", "residual", "max_entry"}, {}};
    double worst = 0;
    int n = 0;
    const std::pair<const char*, ToySystem> toys[] = {{"ring", ring_toy()}, {"two_mode", two_mode_toy()}};
    for (const auto& [name, toy] : toys) {
        auto tab = correlation_table(toy_correlations(toy, 1.0), {1, 2, 3}, 3);
        cumulants(tab);
        for (const auto& [A, Gc] : tab.Gc) {
            if (A.size() < 2) continue;
            std::string a;
            for (int x : A) a += (a.empty() ? "" : " ") + std::to_string(x);
            const double res = ward_unitarity(Gc);
            worst = std::max(worst, res);
            ++n;
            t.add({name, a, fmt(res), fmt(max_abs(Gc))});
        }
    }
    r.checks.push_back(make_check("C6", "Ward residual over toy cumulants", worst, "<", 1e-10,
                                  "cumulants=" + std::to_string(n)));

    auto toy = ring_toy();
    CorrelationOptions broken;
    broken.kraus = Eigen::VectorXd::Ones(toy.dS);
    broken.kraus(1) = std::sqrt(0.9);
    auto tab = correlation_table(toy_correlations(toy, 1.0, broken), {1, 2, 3}, 2);
    cumulants(tab);
    double least = INFINITY;
    for (const auto& [A, Gc] : tab.Gc) {
        if (A.size() != 2) continue;
        const double res = ward_unitarity(Gc);
        least = std::min(least, res);
        t.add({"ring_damped", std::to_string(A[0]) + " " + std::to_string(A[1]), fmt(res), fmt(max_abs(Gc))});
    }
    r.checks.push_back(make_check("C6.control", "trace-breaking control residual (min)", least, ">", 1e-3));
    r.tables.push_back(t);
    return r;
}

StudyResult recursion_study() {
    StudyResult r;
    Table t{"recursion", {"Aprime", "ell2", "deviation", "collections"}, {}};
    auto toy = ring_toy();
    for (const auto& Ap : std::vector<std::vector<int>>{{1}, {1, 2}}) {
        auto rc = cumulant_recursion_check(toy, 1.0, Ap, 2);
        std::string a = Ap.size() == 1 ? "1" : "1 2";
        t.add({a, "2", fmt(rc.deviation), fmt(static_cast<long>(rc.collections))});
        r.checks.push_back(make_check(Ap.size() == 1 ? "C7.single" : "C7.pair",
                                      "recursion deviation for A' = {" + a + "}", rc.deviation, "<", 1e-8));
    }
    r.tables.push_back(t);
    return r;
}

// ---------------------------------------------------------------- suites

StudyResult kernel_property_study(std::uint64_t seed, int instances) {
    auto rep = kernel_property_suite(seed, instances);
    StudyResult r;
    Table t{"kernel_properties", {"property", "instances", "violations"}, {}};
    std::string detail;
    for (const auto& [k, v] : rep.violations) t.add({k, fmt(rep.instances), fmt(v)});
    r.tables.push_back(t);
    r.checks.push_back(make_check("C8", "kernel algebra violations", rep.total(), "==", 0,
                                  std::to_string(rep.violations.size()) + " properties x " +
                                      std::to_string(rep.instances)));
    return r;
}

StudyResult persistence_study(std::uint64_t seed, int instances) {
    auto rep = persistence_suite(seed, instances);
    StudyResult r;
    Table t{"persistence", {"instances", "attempts", "violations", "worst_eig_ratio", "worst_proj_ratio"}, {}};
    t.add({fmt(rep.instances), fmt(rep.attempts), fmt(rep.violations), fmt(rep.worst_eig_ratio),
           fmt(rep.worst_proj_ratio)});
    r.tables.push_back(t);
    r.checks.push_back(make_check("C9", "eigenvalue persistence violations", rep.violations, "==", 0,
                                  "eig ratio " + fmt(rep.worst_eig_ratio) + " proj ratio " + fmt(rep.worst_proj_ratio)));
    r.checks.push_back(make_check("C9.count", "instances satisfying the hypotheses", rep.instances, ">=", instances));
    return r;
}

StudyResult cluster_study(int n_max, double kappa) {
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
    double lo = 0, hi = 1;
    for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + hi);
        (kotecky_preiss_check(weights(mid), n_max, kappa, 1).hypothesis_ratio < 0.5 ? lo : hi) = mid;
    }
    const auto w = weights(lo);
    StudyResult r;
    Table t{"cluster", {"S_prime", "sum", "bound"}, {}};
    double worst = 0, hyp = 0;
    for (unsigned Sp = 1; Sp < full; ++Sp) {
        auto k = kotecky_preiss_check(w, n_max, kappa, Sp);
        hyp = k.hypothesis_ratio;
        worst = std::max(worst, k.conclusion_sum / k.conclusion_bound);
        t.add({fmt(static_cast<long>(Sp)), fmt(k.conclusion_sum), fmt(k.conclusion_bound)});
    }
    r.tables.push_back(t);
    r.checks.push_back(make_check("C10", "connected-collection sum / bound (max over S')", worst, "<=", 1.0,
                                  "eps=" + fmt(lo)));
    r.checks.push_back(make_check("C10.hypothesis", "polymer condition ratio", hyp, "<=", 0.5 + 1e-9));
    return r;
}

StudyResult fiber_study(const Config& cfg, int points, int threads) {
    Model model = build_model(cfg);
    auto rates = markov_rates(model);
    auto lamb = lamb_shift(model);
    auto sc = spectral_constants(rates, lamb);
    std::vector<double> ps;
    for (int i = 0; i < points; ++i) ps.push_back(-kPi + 2 * kPi * i / points);
    auto rows = fiber_scan(rates, lamb, ps, threads);
    int bad = 0;
    Table t{"fiber_scan", {"p", "re_f", "im_f", "gap", "max_re"}, {}};
    for (const auto& row : rows) {
        if (std::abs(row.p) >= sc.p_Q && row.max_re > -sc.b_Q) ++bad;
        if (std::abs(row.p) <= sc.p_Q && row.gap < sc.a_Q / 2) ++bad;
        t.add({fmt(row.p), fmt(row.f.real()), fmt(row.f.imag()), fmt(row.gap), fmt(row.max_re)});
    }
    Table c{"spectral_constants", {"a_Q", "p_Q", "b_Q", "gamma0"}, {}};
    c.add({fmt(sc.a_Q), fmt(sc.p_Q), fmt(sc.b_Q), fmt(sc.gamma0)});
    StudyResult r;
    r.tables.push_back(t);
    r.tables.push_back(c);
    r.checks.push_back(make_check("C11", "fiber scan violations", bad, "==", 0,
                                  "a_Q=" + fmt(sc.a_Q) + " p_Q=" + fmt(sc.p_Q) + " b_Q=" + fmt(sc.b_Q)));
    return r;
}

}  // namespace qdiff
