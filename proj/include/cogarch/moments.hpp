#ifndef COGARCH_MOMENTS_HPP
#define COGARCH_MOMENTS_HPP

#include <cmath>
#include <utility>
#include <vector>

#include "cogarch/common.hpp"
#include "cogarch/exppoly.hpp"
#include "cogarch/levy.hpp"

namespace cogarch {

/// Memoized table of the deterministic coefficients J_{kir}(h, d) of the
/// conditional moments
///   E_v[ G_{s,h}^{2i} sigma^{2(k-i)}_{s+h} ] = sum_r J_{kir}(h, s-v) sigma^{2r}_v
/// for all 0 <= i <= k <= k_max, 0 <= r <= k, each stored exactly as an
/// ExpPoly. Immutable after build.
class JTable {
public:
    JTable(const LevyModel& model, const Theta& theta, int k_max)
        : model_(model), theta_(theta), k_max_(k_max) {
        if (k_max < 0 || k_max > 4)
            throw std::invalid_argument("JTable: k_max must be in [0, 4]");
        if (!stationarity_check(model, theta, std::max(k_max, 1)))
            throw numeric_error("JTable: stationary moment does not exist at this theta");
        psi_.resize(k_max_ + 1);
        for (int k = 0; k <= k_max_; ++k) psi_[k] = psi(model, theta, k);
        build();
    }

    int k_max() const { return k_max_; }
    const LevyModel& model() const { return model_; }
    const Theta& theta() const { return theta_; }
    double psi_value(int k) const { return psi_[static_cast<std::size_t>(k)]; }

    const ExpPoly& at(int k, int i, int r) const {
        if (k < 0 || k > k_max_ || i < 0 || i > k || r < 0 || r > k)
            throw std::invalid_argument("JTable: (k,i,r) not tabulated");
        return entries_[idx(k, i, r)];
    }

private:
    LevyModel model_;
    Theta theta_;
    int k_max_;
    std::vector<double> psi_;
    std::vector<ExpPoly> entries_; // dense over (k,i,r), k<=4

    std::size_t idx(int k, int i, int r) const {
        return static_cast<std::size_t>((k * (k_max_ + 1) + i) * (k_max_ + 1) + r);
    }

    // Combined coefficient of J_{k(i-j)r} inside the w-integrand:
    //   binom(2i,2j) * ( E[L]_1^{(2j)} + sum_{l=1..k-i} binom(k-i,l) phi^l m_{2l+2j} ).
    long double integrand_coef(int k, int i, int j) const {
        long double inner = model_.qv_moment(2 * j);
        long double phi_l = 1.0L;
        for (int l = 1; l <= k - i; ++l) {
            phi_l *= theta_.phi;
            inner += detail::binom(k - i, l) * phi_l * model_.levy_measure_moment(2 * l + 2 * j);
        }
        return detail::binom(2 * i, 2 * j) * inner;
    }

    void build() {
        entries_.assign(static_cast<std::size_t>((k_max_ + 1) * (k_max_ + 1) * (k_max_ + 1)),
                        ExpPoly{});

        // i = 0 row. J_{k0r} depends on (h,d) only through t = h+d and obeys
        //   d/dt J_{k0r}(t) = Psi(k) J_{k0r}(t) + k beta J_{(k-1)0r}(t),
        // J_{k0r}(0) = [r == k]; the iterated variation-of-constants solution
        // of this recursion is exactly the nested-integral form.
        std::vector<std::vector<ExpPoly>> row0(static_cast<std::size_t>(k_max_) + 1);
        row0[0] = {ExpPoly::constant(1.0)};
        for (int k = 1; k <= k_max_; ++k) {
            row0[k].resize(static_cast<std::size_t>(k) + 1);
            row0[k][k] = ExpPoly::term(1.0, 0, 0, psi_[k], 0.0);
            for (int r = 0; r < k; ++r) {
                ExpPoly src = (r <= k - 1) ? row0[k - 1][r].scaled(k * theta_.beta) : ExpPoly{};
                row0[k][r] = src.shifted_h_rate(-psi_[k]).integrate_h().shifted_h_rate(psi_[k]);
            }
        }
        // expand t = h + d into bivariate terms
        for (int k = 0; k <= k_max_; ++k)
            for (int r = 0; r <= k; ++r)
                entries_[idx(k, 0, r)] = expand_total_lag(row0[k][r]);

        for (int k = 1; k <= k_max_; ++k) {
            // 0 < i < k
            for (int i = 1; i < k; ++i) {
                for (int r = 0; r <= k; ++r) {
                    ExpPoly integrand;
                    if (r <= k - 1)
                        integrand += at(k - 1, i, r).scaled((k - i) * theta_.beta);
                    for (int j = 1; j <= i; ++j)
                        integrand += at(k, i - j, r).scaled(integrand_coef(k, i, j));
                    entries_[idx(k, i, r)] = integrand.shifted_h_rate(-psi_[k - i])
                                                 .integrate_h()
                                                 .shifted_h_rate(psi_[k - i]);
                }
            }
            // i = k: J_{kkr}(h,d) = sum_{j<k} binom(2k,2(k-j)) E[L]_1^{(2(k-j))} int_0^h J_{kjr}
            for (int r = 0; r <= k; ++r) {
                ExpPoly acc;
                for (int j = 0; j < k; ++j) {
                    const long double c =
                        detail::binom(2 * k, 2 * (k - j)) * model_.qv_moment(2 * (k - j));
                    acc += at(k, j, r).integrate_h().scaled(c);
                }
                entries_[idx(k, k, r)] = acc;
            }
        }
    }

    // c t^p e^{lam t} with t = h + d  ->  sum_m binom(p,m) c h^m d^{p-m} e^{lam h} e^{lam d}
    static ExpPoly expand_total_lag(const ExpPoly& univariate) {
        ExpPoly out;
        for (const auto& t : univariate.terms()) {
            for (int m = 0; m <= t.h_pow; ++m) {
                out += ExpPoly::term_q(t.coef * static_cast<__float128>(detail::binom(t.h_pow, m)),
                                       m, t.h_pow - m, t.h_rate, t.h_rate);
            }
        }
        return out;
    }
};

/// Stationary sigma^{2k} moments, transient products E(G_t^{2i} sigma_t^{2(k-i)})
/// as closed-form functions of t (sigma_0^2 stationary, G_0 = 0), and the
/// JTable they are built from. Immutable after build.
class MomentCache {
public:
    MomentCache(const LevyModel& model, const Theta& theta, int k_max)
        : jtable_(model, theta, k_max) {
        build();
    }

    const JTable& jtable() const { return jtable_; }
    const LevyModel& model() const { return jtable_.model(); }
    const Theta& theta() const { return jtable_.theta(); }
    int k_max() const { return jtable_.k_max(); }

    /// E sigma^{2k}_inf = k! beta^k prod_{l=1..k} (-1/Psi(l)).
    double stationary_sigma_moment(int k) const {
        if (k < 0 || k > k_max())
            throw std::invalid_argument("stationary_sigma_moment: k out of range");
        return stationary_[static_cast<std::size_t>(k)];
    }

    /// E(G_t^{2i} sigma_t^{2(k-i)}) as an ExpPoly in t (second variable unused).
    const ExpPoly& transient_product(int k, int i) const {
        if (k < 0 || k > k_max() || i < 0 || i > k)
            throw std::invalid_argument("transient_product: (k,i) not tabulated");
        return transient_[static_cast<std::size_t>(k * (k_max() + 1) + i)];
    }

    /// E G_t^{2k} with sigma_0^2 stationary and G_0 = 0. By stationarity of
    /// the increments this is also the stationary return moment E G_{s,t}^{2k}.
    double marginal_g_moment(int k, double t) const {
        if (k == 0) return 1.0;
        return transient_product(k, k).eval(t, 0.0);
    }

private:
    JTable jtable_;
    std::vector<double> stationary_;
    std::vector<ExpPoly> transient_;

    void build() {
        const int kmax = k_max();
        const Theta& th = theta();
        stationary_.resize(static_cast<std::size_t>(kmax) + 1);
        stationary_[0] = 1.0;
        long double acc = 1.0L;
        for (int k = 1; k <= kmax; ++k) {
            const double pk = jtable_.psi_value(k);
            if (pk >= 0.0) throw numeric_error("stationary moment does not exist: Psi(k) >= 0");
            acc *= k * static_cast<long double>(th.beta) * (-1.0L / pk);
            stationary_[static_cast<std::size_t>(k)] = static_cast<double>(acc);
        }

        transient_.assign(static_cast<std::size_t>((kmax + 1) * (kmax + 1)), ExpPoly{});
        auto P = [&](int k, int i) -> ExpPoly& {
            return transient_[static_cast<std::size_t>(k * (kmax + 1) + i)];
        };
        P(0, 0) = ExpPoly::constant(1.0);
        for (int k = 1; k <= kmax; ++k) {
            // pure sigma moments stay at their stationary value
            P(k, 0) = ExpPoly::constant(stationary_[static_cast<std::size_t>(k)]);
            for (int i = 1; i < k; ++i) {
                ExpPoly c_ki = P(k - 1, i).scaled((k - i) * th.beta);
                for (int j = 1; j <= i; ++j)
                    c_ki += P(k, i - j).scaled(transient_coef(k, i, j));
                const double pki = jtable_.psi_value(k - i);
                P(k, i) = c_ki.shifted_h_rate(-pki).integrate_h().shifted_h_rate(pki);
            }
            // E G_t^{2k} = sum_i binom(2k,2i) E[L]_1^{(2i)} int_0^t E(G^{2(k-i)} sigma^{2i})
            ExpPoly g2k;
            for (int i = 1; i <= k; ++i) {
                const long double c = detail::binom(2 * k, 2 * i) * model().qv_moment(2 * i);
                g2k += P(k, k - i).integrate_h().scaled(c);
            }
            P(k, k) = g2k;
        }
    }

    long double transient_coef(int k, int i, int j) const {
        long double inner = model().qv_moment(2 * j);
        long double phi_l = 1.0L;
        for (int l = 1; l <= k - i; ++l) {
            phi_l *= theta().phi;
            inner += detail::binom(k - i, l) * phi_l * model().levy_measure_moment(2 * l + 2 * j);
        }
        return detail::binom(2 * i, 2 * j) * inner;
    }
};

/// sum_r J_{kir}(h, d) * sigma2_v^r.
inline double conditional_product_moment(const JTable& jt, int k, int i, double h, double d,
                                         double sigma2_v) {
    if (h < 0.0 || d < 0.0)
        throw std::invalid_argument("conditional_product_moment: h and d must be >= 0");
    long double sum = 0.0L;
    long double p = 1.0L;
    for (int r = 0; r <= k; ++r) {
        sum += jt.at(k, i, r).eval(h, d) * p;
        p *= sigma2_v;
    }
    return static_cast<double>(sum);
}

/// E( G_{t_1,r}^{2 i_1} ... G_{t_h,r}^{2 i_h} ) for ascending times with
/// gaps t_j - t_{j-1} >= r. Zero exponents drop out; coincident times merge.
/// Evaluates the telescoping product of J coefficients down to the innermost
/// factor E(sigma_r^{2a} G_r^{2 i_1}).
inline double joint_return_moment(const MomentCache& cache,
                                  std::vector<std::pair<double, int>> lags, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("joint_return_moment: lag r must be positive");
    // canonicalize: drop zero exponents, sort, merge coincident times
    std::erase_if(lags, [](const auto& l) { return l.second == 0; });
    if (lags.empty()) return 1.0;
    std::sort(lags.begin(), lags.end());
    std::vector<std::pair<double, int>> merged;
    const double teps = 1e-9 * r;
    for (const auto& l : lags) {
        if (l.second < 0) throw std::invalid_argument("joint_return_moment: negative exponent");
        if (!merged.empty() && std::abs(l.first - merged.back().first) <= teps)
            merged.back().second += l.second;
        else
            merged.push_back(l);
    }
    int total = 0;
    for (const auto& l : merged) total += l.second;
    if (total > cache.k_max())
        throw numeric_error("joint_return_moment: total order not tabulated");
    for (std::size_t j = 1; j < merged.size(); ++j)
        if (merged[j].first - merged[j - 1].first < r - teps)
            throw numeric_error("joint_return_moment: unsupported overlap between return intervals");

    const std::size_t m = merged.size();
    if (m == 1) return cache.marginal_g_moment(merged[0].second, r);

    const JTable& jt = cache.jtable();
    // fold from the last return down to the second; weights[a] multiplies sigma^{2a}
    std::vector<long double> weights;
    {
        const int ih = merged[m - 1].second;
        const double d = merged[m - 1].first - merged[m - 2].first - r;
        weights.resize(static_cast<std::size_t>(ih) + 1);
        for (int r1 = 0; r1 <= ih; ++r1)
            weights[static_cast<std::size_t>(r1)] = jt.at(ih, ih, r1).eval(r, std::max(d, 0.0));
    }
    for (std::size_t j = m - 2; j >= 1; --j) {
        const int ij = merged[j].second;
        const double d = merged[j].first - merged[j - 1].first - r;
        const int prev_max = static_cast<int>(weights.size()) - 1;
        std::vector<long double> next(static_cast<std::size_t>(prev_max + ij) + 1, 0.0L);
        for (int a = 0; a <= prev_max; ++a) {
            if (weights[static_cast<std::size_t>(a)] == 0.0L) continue;
            const int kk = a + ij;
            for (int rr = 0; rr <= kk; ++rr)
                next[static_cast<std::size_t>(rr)] += weights[static_cast<std::size_t>(a)] *
                                                      jt.at(kk, ij, rr).eval(r, std::max(d, 0.0));
        }
        weights = std::move(next);
    }
    const int i1 = merged[0].second;
    long double sum = 0.0L;
    for (int a = 0; a < static_cast<int>(weights.size()); ++a) {
        if (weights[static_cast<std::size_t>(a)] == 0.0L) continue;
        sum += weights[static_cast<std::size_t>(a)] *
               cache.transient_product(a + i1, i1).eval(r, 0.0);
    }
    return static_cast<double>(sum);
}

} // namespace cogarch

#endif
