#include "qdiff/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "qdiff/errors.hpp"

namespace qdiff {

namespace {

// Real nonnegative tensor used inside the norm recursion.
struct AbsTensor {
    std::vector<int> size;
    std::vector<double> weight;
    std::vector<double> data;
};

// strides of out_j and in_j for the layout out_0..out_{m-1}, in_0..in_{m-1}
void leg_strides(const std::vector<int>& size, std::vector<std::size_t>& so,
                 std::vector<std::size_t>& si) {
    const int m = static_cast<int>(size.size());
    so.assign(m, 0);
    si.assign(m, 0);
    std::size_t s = 1;
    for (int j = m - 1; j >= 0; --j) {
        si[j] = s;
        s *= size[j];
    }
    for (int j = m - 1; j >= 0; --j) {
        so[j] = s;
        s *= size[j];
    }
}

double degree_one(const AbsTensor& K) {
    const int n = K.size[0];
    const double w = K.weight[0];
    double best = 0;
    for (int o = 0; o < n; ++o) {
        double s = 0;
        for (int i = 0; i < n; ++i) s += K.data[o * n + i];
        best = std::max(best, w * s);
    }
    for (int i = 0; i < n; ++i) {
        double s = 0;
        for (int o = 0; o < n; ++o) s += K.data[o * n + i];
        best = std::max(best, w * s);
    }
    return best;
}

// K_(i): the degree-one norm of leg i with all other legs fixed.
AbsTensor reduce_leg(const AbsTensor& K, int leg) {
    const int m = static_cast<int>(K.size.size());
    std::vector<std::size_t> so, si;
    leg_strides(K.size, so, si);
    AbsTensor R;
    for (int j = 0; j < m; ++j)
        if (j != leg) {
            R.size.push_back(K.size[j]);
            R.weight.push_back(K.weight[j]);
        }
    std::size_t total = 1;
    for (int s : R.size) total *= static_cast<std::size_t>(s) * s;
    R.data.assign(total, 0.0);

    // digits of R in its own layout: out legs then in legs
    std::vector<int> legs;
    for (int j = 0; j < m; ++j)
        if (j != leg) legs.push_back(j);
    const int r = m - 1;
    std::vector<int> dig(2 * r, 0);
    const int n = K.size[leg];
    const double w = K.weight[leg];
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t base = 0;
        for (int j = 0; j < r; ++j) base += dig[j] * so[legs[j]] + dig[r + j] * si[legs[j]];
        double best = 0;
        for (int o = 0; o < n; ++o) {
            double s = 0;
            for (int i = 0; i < n; ++i) s += K.data[base + o * so[leg] + i * si[leg]];
            best = std::max(best, s);
        }
        for (int i = 0; i < n; ++i) {
            double s = 0;
            for (int o = 0; o < n; ++o) s += K.data[base + o * so[leg] + i * si[leg]];
            best = std::max(best, s);
        }
        R.data[idx] = w * best;
        for (int j = 2 * r - 1; j >= 0; --j) {
            int sz = R.size[j % std::max(r, 1)];
            if (++dig[j] < sz) break;
            dig[j] = 0;
        }
    }
    return R;
}

double norm_rec(const AbsTensor& K) {
    if (K.size.empty()) return K.data.empty() ? 0.0 : K.data[0];
    if (K.size.size() == 1) return degree_one(K);
    double best = 0;
    for (int i = 0; i < static_cast<int>(K.size.size()); ++i)
        best = std::max(best, norm_rec(reduce_leg(K, i)));
    return best;
}

std::vector<int> decode_site(int x, int d, int L) {
    std::vector<int> c(d);
    for (int j = d - 1; j >= 0; --j) {
        c[j] = x % L;
        x /= L;
    }
    return c;
}

int min_image(int a, int L) {
    a %= L;
    if (a < 0) a += L;
    if (a > L / 2) a -= L;
    return a;
}

}  // namespace

std::size_t LegTensor::elements() const {
    std::size_t s = 1;
    for (int n : size) s *= static_cast<std::size_t>(n) * n;
    return s;
}

double ll_norm(const LegTensor& K) {
    AbsTensor A{K.size, K.weight, std::vector<double>(K.data.size())};
    for (std::size_t i = 0; i < K.data.size(); ++i) A.data[i] = std::abs(K.data[i]);
    return norm_rec(A);
}

LegTensor abs(const LegTensor& K) {
    LegTensor R = K;
    for (auto& x : R.data) x = std::abs(x);
    return R;
}

LegTensor tensor(const LegTensor& K, const LegTensor& L) {
    LegTensor R;
    R.size = K.size;
    R.size.insert(R.size.end(), L.size.begin(), L.size.end());
    R.weight = K.weight;
    R.weight.insert(R.weight.end(), L.weight.begin(), L.weight.end());
    std::size_t ko = 1, lo = 1;
    for (int s : K.size) ko *= s;
    for (int s : L.size) lo *= s;
    R.data.assign(ko * lo * ko * lo, 0.0);
    // index (oK, oL, iK, iL)
    for (std::size_t oK = 0; oK < ko; ++oK)
        for (std::size_t oL = 0; oL < lo; ++oL)
            for (std::size_t iK = 0; iK < ko; ++iK)
                for (std::size_t iL = 0; iL < lo; ++iL)
                    R.data[((oK * lo + oL) * ko + iK) * lo + iL] =
                        K.data[oK * ko + iK] * L.data[oL * lo + iL];
    return R;
}

LegTensor iota(const LegTensor& K, int i, int j) {
    const int m = K.degree();
    if (i >= j || j >= m || K.size[i] != K.size[j])
        throw ConfigError("iota needs i < j on legs of equal size");
    std::vector<std::size_t> so, si;
    leg_strides(K.size, so, si);
    LegTensor R;
    for (int k = 0; k < m; ++k)
        if (k != j) {
            R.size.push_back(K.size[k]);
            R.weight.push_back(K.weight[k]);
        }
    R.data.assign(R.elements(), 0.0);
    const int r = m - 1;
    std::vector<int> src;  // source leg of every result leg (out side)
    for (int k = 0; k < m; ++k)
        if (k != j) src.push_back(k);
    std::vector<int> dig(2 * r, 0);
    const int n = K.size[j];
    const double w = K.weight[j];
    for (std::size_t idx = 0; idx < R.data.size(); ++idx) {
        std::size_t base = 0;
        for (int k = 0; k < r; ++k) {
            int leg = src[k];
            int out = dig[k], in = dig[r + k];
            if (leg == i) {
                base += out * so[j] + in * si[i];  // y' at out_j, y at in_i
            } else {
                base += out * so[leg] + in * si[leg];
            }
        }
        cd s = 0;
        for (int t = 0; t < n; ++t) s += K.data[base + t * so[i] + t * si[j]];
        R.data[idx] = w * s;
        for (int k = 2 * r - 1; k >= 0; --k) {
            if (++dig[k] < R.size[k % r]) break;
            dig[k] = 0;
        }
    }
    return R;
}

int KernelSpace::sites() const {
    int s = 1;
    for (int j = 0; j < d; ++j) s *= L;
    return s;
}

double KernelSpace::cell() const { return std::pow(static_cast<double>(ell), -n * d); }

std::vector<int> KernelSpace::site(int x) const { return decode_site(x, d, L); }

double KernelSpace::xdist(int x1, int x2) const {
    auto a = site(x1), b = site(x2);
    double s = 0;
    for (int j = 0; j < d; ++j) {
        double c = min_image(a[j] - b[j], L);
        s += c * c;
    }
    return std::sqrt(s) * std::pow(static_cast<double>(ell), -n);
}

double KernelSpace::vdist(int s1, int s2) const {
    double s = 0;
    for (std::size_t j = 0; j < v[s1].size(); ++j) {
        double c = v[s1][j] - v[s2][j];
        s += c * c;
    }
    return std::sqrt(s);
}

KernelSpace KernelSpace::finer() const {
    KernelSpace k = *this;
    ++k.n;
    return k;
}

std::size_t Kernel::index(const std::vector<int>& out, const std::vector<int>& in) const {
    const std::size_t P = space->points();
    std::size_t idx = 0;
    for (int o : out) idx = idx * P + o;
    for (int i : in) idx = idx * P + i;
    return idx;
}

Kernel zero_kernel(std::shared_ptr<const KernelSpace> space, std::vector<int> times) {
    Kernel K;
    std::size_t P = space->points(), total = 1;
    for (std::size_t t = 0; t < times.size(); ++t) total *= P * P;
    K.space = std::move(space);
    K.times = std::move(times);
    K.data.assign(total, 0.0);
    return K;
}

Kernel delta_kernel(std::shared_ptr<const KernelSpace> space, int time) {
    Kernel K = zero_kernel(space, {time});
    const int P = space->points();
    for (int z = 0; z < P; ++z) K.data[z * P + z] = 1.0 / space->cell();
    return K;
}

LegTensor weighted_legs(const Kernel& K, double gamma, double gamma0) {
    const KernelSpace& sp = *K.space;
    const int m = K.degree(), X = sp.sites(), S = sp.internal(), P = sp.points();
    LegTensor T;
    for (int t = 0; t < m; ++t) {
        T.size.push_back(X);
        T.weight.push_back(sp.cell());
        T.size.push_back(S);
        T.weight.push_back(1.0);
    }
    T.data = K.data;
    std::vector<double> wx(static_cast<std::size_t>(P) * P);
    for (int a = 0; a < P; ++a)
        for (int b = 0; b < P; ++b)
            wx[a * P + b] = std::exp(gamma * sp.xdist(a / S, b / S) + gamma0 * sp.vdist(a % S, b % S));
    std::vector<int> dig(2 * m, 0);
    for (std::size_t idx = 0; idx < T.data.size(); ++idx) {
        double w = 1;
        for (int t = 0; t < m; ++t) w *= wx[dig[t] * P + dig[m + t]];
        T.data[idx] *= w;
        for (int k = 2 * m - 1; k >= 0; --k) {
            if (++dig[k] < P) break;
            dig[k] = 0;
        }
    }
    return T;
}

double gamma_norm(const Kernel& K, double gamma, double gamma0) {
    return ll_norm(weighted_legs(K, gamma, gamma0));
}

Kernel scale_kernel(const Kernel& K) {
    Kernel R = K;
    R.space = std::make_shared<KernelSpace>(K.space->finer());
    const double f = std::pow(static_cast<double>(K.space->ell), K.space->d * K.degree());
    for (auto& x : R.data) x *= f;
    return R;
}

double trace_density(const KernelSpace& space, const std::vector<cd>& rho) {
    const int S = space.internal();
    double s = 0;
    for (int z = 0; z < space.points(); ++z)
        if (space.s0[z % S]) s += rho[z].real();
    return s * space.cell();
}

std::vector<cd> scale_density(const KernelSpace& space, const std::vector<cd>& rho) {
    std::vector<cd> r = rho;
    const double f = std::pow(static_cast<double>(space.ell), space.d);
    for (auto& x : r) x *= f;
    return r;
}

Kernel contract(const std::vector<Kernel>& factors, const std::vector<std::vector<int>>& blocks) {
    if (factors.empty()) throw LabelGap("no factors");
    auto space = factors[0].space;
    for (const auto& b : blocks) {
        if (b.empty()) throw LabelGap("empty block");
        for (std::size_t i = 1; i < b.size(); ++i)
            if (b[i] != b[i - 1] + 1) throw LabelGap("block is not a discrete interval");
    }
    std::set<int> covered, wanted;
    for (const auto& b : blocks) wanted.insert(b.begin(), b.end());
    for (const auto& f : factors)
        for (int t : f.times)
            if (!covered.insert(t).second) throw LabelGap("time " + std::to_string(t) + " repeated");
    if (covered != wanted) throw LabelGap("factors do not tile the blocks");

    // labels: 0..B-1 external out, B..2B-1 external in, then one per bulk bond
    const int B = static_cast<int>(blocks.size());
    std::map<int, int> in_label, out_label;
    int next = 2 * B;
    for (int b = 0; b < B; ++b) {
        in_label[blocks[b].front()] = B + b;
        out_label[blocks[b].back()] = b;
        for (std::size_t i = 0; i + 1 < blocks[b].size(); ++i) {
            out_label[blocks[b][i]] = next;
            in_label[blocks[b][i + 1]] = next;
            ++next;
        }
    }
    const int n_labels = next, n_int = next - 2 * B;
    const std::size_t P = space->points();

    struct Slot {
        const Kernel* k;
        std::vector<std::pair<int, std::size_t>> terms;  // (label, stride)
    };
    std::vector<Slot> slots;
    for (const auto& f : factors) {
        Slot s{&f, {}};
        const int m = f.degree();
        std::size_t stride = 1;
        std::vector<std::size_t> st(2 * m);
        for (int k = 2 * m - 1; k >= 0; --k) {
            st[k] = stride;
            stride *= P;
        }
        for (int k = 0; k < m; ++k) {
            s.terms.push_back({out_label.at(f.times[k]), st[k]});
            s.terms.push_back({in_label.at(f.times[k]), st[m + k]});
        }
        slots.push_back(std::move(s));
    }

    std::vector<int> times(B);
    std::iota(times.begin(), times.end(), 1);
    Kernel R = zero_kernel(space, times);
    const double measure = std::pow(space->cell(), n_int);
    std::vector<int> val(n_labels, 0);
    std::size_t ext_total = R.data.size(), int_total = 1;
    for (int k = 0; k < n_int; ++k) int_total *= P;
    for (std::size_t e = 0; e < ext_total; ++e) {
        std::size_t rem = e;
        for (int k = 2 * B - 1; k >= 0; --k) {
            val[k] = static_cast<int>(rem % P);
            rem /= P;
        }
        cd acc = 0;
        for (std::size_t it = 0; it < int_total; ++it) {
            std::size_t r2 = it;
            for (int k = n_labels - 1; k >= 2 * B; --k) {
                val[k] = static_cast<int>(r2 % P);
                r2 /= P;
            }
            cd prod = 1;
            for (const auto& s : slots) {
                std::size_t idx = 0;
                for (const auto& [lab, st] : s.terms) idx += val[lab] * st;
                prod *= s.k->data[idx];
                if (prod == cd(0)) break;
            }
            acc += prod;
        }
        R.data[e] = acc * measure;
    }
    return R;
}

Kernel contract(const std::vector<Kernel>& factors) {
    int lo = std::numeric_limits<int>::max(), hi = std::numeric_limits<int>::min();
    for (const auto& f : factors)
        for (int t : f.times) {
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
    std::vector<int> block(hi - lo + 1);
    std::iota(block.begin(), block.end(), lo);
    return contract(factors, {block});
}

Kernel contract_blocks(const std::vector<Kernel>& factors, const std::vector<int>& Aprime, int ell2) {
    std::vector<std::vector<int>> blocks;
    for (int tp : Aprime) {
        std::vector<int> b(ell2);
        std::iota(b.begin(), b.end(), ell2 * (tp - 1) + 1);
        blocks.push_back(b);
    }
    Kernel R = contract(factors, blocks);
    R.times = Aprime;
    return R;
}

Kernel LatticeKernel::dense() const {
    const KernelSpace& sp = *space;
    const int X = sp.sites(), S = sp.internal(), P = sp.points();
    Kernel K = zero_kernel(space, {1});
    for (int x1 = 0; x1 < X; ++x1)
        for (int x0 = 0; x0 < X; ++x0) {
            auto a = sp.site(x1), b = sp.site(x0);
            int diff = 0;
            for (int j = 0; j < sp.d; ++j) diff = diff * sp.L + ((a[j] - b[j]) % sp.L + sp.L) % sp.L;
            const auto& F = values[diff];
            for (int s1 = 0; s1 < S; ++s1)
                for (int s0 = 0; s0 < S; ++s0) K.data[(x1 * S + s1) * P + x0 * S + s0] = F(s1, s0);
        }
    return K;
}

double internal_norm(const Eigen::MatrixXcd& F, const KernelSpace& space, double gamma0) {
    const int S = static_cast<int>(F.rows());
    double best = 0;
    for (int a = 0; a < S; ++a) {
        double r = 0, c = 0;
        for (int b = 0; b < S; ++b) {
            r += std::abs(F(a, b)) * std::exp(gamma0 * space.vdist(a, b));
            c += std::abs(F(b, a)) * std::exp(gamma0 * space.vdist(a, b));
        }
        best = std::max({best, r, c});
    }
    return best;
}

double reduced_gamma_norm(const LatticeKernel& K, double gamma, double gamma0) {
    const KernelSpace& sp = *K.space;
    double s = 0;
    for (int x = 0; x < sp.sites(); ++x)
        s += internal_norm(K.values[x], sp, gamma0) * std::exp(gamma * sp.xdist(x, 0));
    return s * sp.cell();
}

Eigen::MatrixXcd fourier(const LatticeKernel& K, const std::vector<cd>& p) {
    const KernelSpace& sp = *K.space;
    const double a = std::pow(static_cast<double>(sp.ell), -sp.n);
    Eigen::MatrixXcd R = Eigen::MatrixXcd::Zero(sp.internal(), sp.internal());
    for (int x = 0; x < sp.sites(); ++x) {
        auto c = sp.site(x);
        cd phase = 0;
        for (int j = 0; j < sp.d; ++j) phase += p[j] * (a * min_image(c[j], sp.L));
        R += std::exp(cd(0, 1) * phase) * K.values[x];
    }
    return R * sp.cell();
}

LatticeKernel scale_kernel(const LatticeKernel& K, std::size_t cap) {
    const KernelSpace& sp = *K.space;
    std::size_t entries = static_cast<std::size_t>(sp.sites()) * sp.internal() * sp.internal();
    if (entries > cap) throw WindowOverflow(std::to_string(entries) + " entries exceed the cap");
    LatticeKernel R;
    R.space = std::make_shared<KernelSpace>(sp.finer());
    const double f = std::pow(static_cast<double>(sp.ell), sp.d);
    for (const auto& v : K.values) R.values.push_back(v * f);
    return R;
}

double operator_norm(const Eigen::MatrixXcd& A) {
    if (A.size() == 0) return 0;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A);
    return svd.singularValues()(0);
}

double persistence_b(const Eigen::MatrixXcd& A0, cd a0, const Eigen::MatrixXcd& P0, double r) {
    const double iso = operator_norm(A0 - a0 * P0);
    if (!(iso < std::abs(a0))) throw HypothesisViolated("||A0 - a0 P0|| >= |a0|");
    if (!(r > 0 && r < std::abs(a0) - iso))
        throw HypothesisViolated("r outside (0, |a0| - ||A0 - a0 P0||)");
    return operator_norm(P0) / r + 1.0 / (std::abs(a0) - r - iso);
}

PersistenceBound eigen_persistence_bound(const Eigen::MatrixXcd& A0, cd a0,
                                         const Eigen::MatrixXcd& P0, const Eigen::MatrixXcd& A1,
                                         double r) {
    PersistenceBound out;
    out.b = persistence_b(A0, a0, P0, r);
    const double a = operator_norm(A1);
    const double x = a * out.b;
    out.persists = x < 1;
    if (!out.persists) {
        out.eig_shift = out.proj_shift = std::numeric_limits<double>::infinity();
        return out;
    }
    // smallest r' with ||A1|| b(r') = 1; the lemma applies to every r' in [r', r]
    const double g = std::abs(a0) - operator_norm(A0 - a0 * P0);
    const double pn = operator_norm(P0);
    const double B = g + a * pn - a, c = a * pn * g;
    double disc = std::max(0.0, B * B - 4 * c);
    out.eig_shift = std::min(r, c > 0 ? 2 * c / (B + std::sqrt(disc)) : 0.0);
    out.proj_shift = r * out.b * x / (1 - x);
    return out;
}

}  // namespace qdiff
