#ifndef COGARCH_ORACLES_HPP
#define COGARCH_ORACLES_HPP

// Independent brute-force references: adaptive quadrature, direct nested
// integrals, an RK4 solve of the coefficient ODE system, and Monte Carlo
// moment estimation. None of these touch the ExpPoly closed-form path they
// are used to check.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "cogarch/common.hpp"
#include "cogarch/levy.hpp"
#include "cogarch/simulate.hpp"

namespace cogarch::oracles {

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t n_paths = 0;
};

namespace detail_q {

inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive(const std::function<double(double)>& f, double a, double b, double fa,
                       double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(f, a, m, fa, flm, fm);
    const double right = simpson(f, m, b, fm, frm, fb);
    if (depth <= 0) throw numeric_error("quadrature_integral: max depth reached");
    if (std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail_q

/// Adaptive Simpson quadrature of f over [a, b] with absolute tolerance tol.
inline double quadrature_integral(const std::function<double(double)>& f, double a, double b,
                                  double tol = 1e-10) {
    if (a == b) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = detail_q::simpson(f, a, b, fa, fm, fb);
    return detail_q::adaptive(f, a, b, fa, fm, fb, whole, tol, 60);
}

/// int x^order nu(dx) by numeric integration of the Levy density, the
/// reference for the closed-form measure moments.
inline double levy_measure_moment_numeric(const LevyModel& model, int order, double tol = 1e-10) {
    if (order % 2 == 1) return 0.0;
    switch (model.family()) {
    case LevyModel::Family::VarianceGamma: {
        const double c = model.vg_c();
        const double rate = std::sqrt(2.0 * c);
        // symmetric: 2 * int_0^inf x^{order-1} C e^{-rate x} dx, cut far in the tail
        const double upper = (order + 60.0) / rate;
        return 2.0 * quadrature_integral(
                         [&](double x) { return c * std::pow(x, order - 1) * std::exp(-rate * x); },
                         0.0, upper, tol);
    }
    case LevyModel::Family::CompoundPoissonNormal: {
        const double s = model.cpn_jump_sd();
        const double lam = model.cpn_rate();
        const double upper = s * (12.0 + order);
        return 2.0 * quadrature_integral(
                         [&](double x) {
                             return lam * std::pow(x, order) *
                                    std::exp(-0.5 * x * x / (s * s)) /
                                    (s * std::sqrt(2.0 * M_PI));
                         },
                         0.0, upper, tol);
    }
    }
    return 0.0;
}

/// Psi(c) by numeric integration of (1 + phi x^2)^c - 1 against nu, minus eta c.
inline double psi_numeric(const LevyModel& model, const Theta& theta, int c, double tol = 1e-10) {
    if (c == 0) return 0.0;
    std::function<double(double)> density;
    double upper = 0.0;
    if (model.family() == LevyModel::Family::VarianceGamma) {
        const double C = model.vg_c();
        const double rate = std::sqrt(2.0 * C);
        density = [C, rate](double x) { return C / x * std::exp(-rate * x); };
        upper = (2.0 * c + 60.0) / rate;
    } else {
        const double s = model.cpn_jump_sd();
        const double lam = model.cpn_rate();
        density = [s, lam](double x) {
            return lam * std::exp(-0.5 * x * x / (s * s)) / (s * std::sqrt(2.0 * M_PI));
        };
        upper = s * (12.0 + 2.0 * c);
    }
    // (1+phi x^2)^c - 1 ~ c phi x^2 near 0 tames the VG 1/x singularity
    const double integral =
        2.0 * quadrature_integral(
                  [&](double x) {
                      const double y = std::pow(1.0 + theta.phi * x * x, c) - 1.0;
                      return x == 0.0 ? 0.0 : y * density(x);
                  },
                  0.0, upper, tol);
    return -theta.eta * c + integral;
}

/// Direct nested quadrature of the i-fold integral form of J_{k0(k-i)}(t),
/// t = h + d. Cost grows with depth i; intended for k <= 3.
inline double nested_j_quadrature(const LevyModel& model, const Theta& theta, int k, int i,
                                  double t, double tol = 1e-10) {
    if (i < 0 || i > k) throw std::invalid_argument("nested_j_quadrature: need 0 <= i <= k");
    std::vector<double> ps(static_cast<std::size_t>(k) + 1);
    for (int j = 0; j <= k; ++j) ps[static_cast<std::size_t>(j)] = psi(model, theta, j);
    if (i == 0) return std::exp(t * ps[static_cast<std::size_t>(k)]);

    // F_0(u) = e^{u Psi(k-i)}; F_l(u) = int_0^u e^{(u-s) Psi(k-i+l)} F_{l-1}(s) ds
    std::function<double(int, double)> F = [&](int level, double u) -> double {
        if (level == 0) return std::exp(u * ps[static_cast<std::size_t>(k - i)]);
        const double rate = ps[static_cast<std::size_t>(k - i + level)];
        return quadrature_integral(
            [&](double s) { return std::exp((u - s) * rate) * F(level - 1, s); }, 0.0, u,
            tol / (1.0 + t));
    };
    const double top = quadrature_integral(
        [&](double s) { return std::exp((t - s) * ps[static_cast<std::size_t>(k)]) * F(i - 1, s); },
        0.0, t, tol / (1.0 + t));
    return static_cast<double>(detail::factorial(k) / detail::factorial(k - i) *
                               std::pow(theta.beta, i)) *
           top;
}

/// RK4 solve of the linear ODE system the J coefficients satisfy in h at
/// fixed d (initial conditions from a first pass in t for the i = 0 row).
/// Returns a dense table indexed like JTable; independent of ExpPoly.
class OdeJTable {
public:
    OdeJTable(const LevyModel& model, const Theta& theta, int k_max, double h, double d,
              double step = 5e-4)
        : model_(model), theta_(theta), k_max_(k_max) {
        psi_.resize(static_cast<std::size_t>(k_max_) + 1);
        for (int k = 0; k <= k_max_; ++k) psi_[static_cast<std::size_t>(k)] = psi(model, theta, k);
        state_.assign(dim(), 0.0);

        // i = 0 row at h = 0 equals the univariate solution at t = d
        std::vector<double> row0(static_cast<std::size_t>((k_max_ + 1) * (k_max_ + 1)), 0.0);
        for (int k = 0; k <= k_max_; ++k) row0[static_cast<std::size_t>(k * (k_max_ + 1) + k)] = 1.0;
        integrate_row0(row0, d, step);
        for (int k = 0; k <= k_max_; ++k)
            for (int r = 0; r <= k; ++r)
                state_[idx(k, 0, r)] = row0[static_cast<std::size_t>(k * (k_max_ + 1) + r)];

        integrate_full(h, step);
    }

    double at(int k, int i, int r) const { return state_[idx(k, i, r)]; }

private:
    LevyModel model_;
    Theta theta_;
    int k_max_;
    std::vector<double> psi_;
    std::vector<double> state_;

    std::size_t dim() const {
        return static_cast<std::size_t>((k_max_ + 1) * (k_max_ + 1) * (k_max_ + 1));
    }
    std::size_t idx(int k, int i, int r) const {
        return static_cast<std::size_t>((k * (k_max_ + 1) + i) * (k_max_ + 1) + r);
    }

    double coef(int k, int i, int j) const {
        double inner = model_.qv_moment(2 * j);
        double phi_l = 1.0;
        for (int l = 1; l <= k - i; ++l) {
            phi_l *= theta_.phi;
            inner += static_cast<double>(detail::binom(k - i, l)) * phi_l *
                     model_.levy_measure_moment(2 * l + 2 * j);
        }
        return static_cast<double>(detail::binom(2 * i, 2 * j)) * inner;
    }

    // d/dt row0_{kr} = Psi(k) row0_{kr} + k beta row0_{(k-1)r}
    void integrate_row0(std::vector<double>& y, double t_end, double step) const {
        auto deriv = [&](const std::vector<double>& s, std::vector<double>& ds) {
            for (int k = 0; k <= k_max_; ++k)
                for (int r = 0; r <= k; ++r) {
                    double v = psi_[static_cast<std::size_t>(k)] *
                               s[static_cast<std::size_t>(k * (k_max_ + 1) + r)];
                    if (k >= 1 && r <= k - 1)
                        v += k * theta_.beta *
                             s[static_cast<std::size_t>((k - 1) * (k_max_ + 1) + r)];
                    ds[static_cast<std::size_t>(k * (k_max_ + 1) + r)] = v;
                }
        };
        rk4(y, t_end, step, deriv);
    }

    void integrate_full(double h_end, double step) {
        auto deriv = [&](const std::vector<double>& s, std::vector<double>& ds) {
            for (int k = 0; k <= k_max_; ++k) {
                for (int r = 0; r <= k; ++r) {
                    // i = 0
                    {
                        double v = psi_[static_cast<std::size_t>(k)] * s[idx(k, 0, r)];
                        if (k >= 1 && r <= k - 1)
                            v += k * theta_.beta * s[idx(k - 1, 0, r)];
                        ds[idx(k, 0, r)] = v;
                    }
                    // 0 < i < k
                    for (int i = 1; i < k; ++i) {
                        double v = psi_[static_cast<std::size_t>(k - i)] * s[idx(k, i, r)];
                        if (r <= k - 1) v += (k - i) * theta_.beta * s[idx(k - 1, i, r)];
                        for (int j = 1; j <= i; ++j) v += coef(k, i, j) * s[idx(k, i - j, r)];
                        ds[idx(k, i, r)] = v;
                    }
                    // i = k
                    if (k >= 1) {
                        double v = 0.0;
                        for (int j = 0; j < k; ++j)
                            v += static_cast<double>(detail::binom(2 * k, 2 * (k - j))) *
                                 model_.qv_moment(2 * (k - j)) * s[idx(k, j, r)];
                        ds[idx(k, k, r)] = v;
                    }
                }
            }
        };
        rk4(state_, h_end, step, deriv);
    }

    template <class Deriv>
    static void rk4(std::vector<double>& y, double t_end, double step, Deriv deriv) {
        if (t_end <= 0.0) return;
        const auto n = static_cast<std::int64_t>(std::ceil(t_end / step));
        const double dt = t_end / static_cast<double>(n);
        const std::size_t m = y.size();
        std::vector<double> k1(m), k2(m), k3(m), k4(m), tmp(m);
        for (std::int64_t s = 0; s < n; ++s) {
            deriv(y, k1);
            for (std::size_t j = 0; j < m; ++j) tmp[j] = y[j] + 0.5 * dt * k1[j];
            deriv(tmp, k2);
            for (std::size_t j = 0; j < m; ++j) tmp[j] = y[j] + 0.5 * dt * k2[j];
            deriv(tmp, k3);
            for (std::size_t j = 0; j < m; ++j) tmp[j] = y[j] + dt * k3[j];
            deriv(tmp, k4);
            for (std::size_t j = 0; j < m; ++j)
                y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
};

namespace detail_mc {

inline McEstimate batch_means(const std::vector<double>& samples) {
    const auto n = static_cast<std::int64_t>(samples.size());
    const std::int64_t nb = std::min<std::int64_t>(100, n);
    std::vector<double> means(static_cast<std::size_t>(nb), 0.0);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(nb), 0);
    for (std::int64_t i = 0; i < n; ++i) {
        const auto b = static_cast<std::size_t>(i % nb);
        means[b] += samples[static_cast<std::size_t>(i)];
        counts[b] += 1;
    }
    double grand = 0.0;
    for (std::size_t b = 0; b < means.size(); ++b) {
        means[b] /= static_cast<double>(counts[b]);
        grand += means[b];
    }
    grand /= static_cast<double>(nb);
    double var = 0.0;
    for (double m : means) var += (m - grand) * (m - grand);
    var /= static_cast<double>(nb - 1);
    McEstimate e;
    e.value = grand;
    e.std_error = std::sqrt(var / static_cast<double>(nb));
    e.n_paths = n;
    return e;
}

} // namespace detail_mc

/// Monte Carlo estimate of a product of return powers: for each path
/// simulates positions.back()+1 returns at lag r and averages
/// prod_j returns[pos_j]^{2 pow_j}.
inline McEstimate mc_joint_g_moment(const LevyModel& model, const Theta& theta,
                                    const std::vector<std::pair<int, int>>& positions_and_powers,
                                    double r, std::int64_t n_paths, std::uint64_t seed,
                                    int refine = 500, std::optional<double> burn_in = {}) {
    int max_pos = 0;
    for (const auto& [p, pow] : positions_and_powers) {
        if (p < 0 || pow < 0) throw std::invalid_argument("mc_joint_g_moment: bad position/power");
        max_pos = std::max(max_pos, p);
    }
    SimConfig cfg;
    cfg.n_obs = max_pos + 1;
    cfg.lag_r = r;
    cfg.refine = refine;
    cfg.burn_in = burn_in;
    cfg.seed = seed;
    std::vector<double> samples(static_cast<std::size_t>(n_paths));
    for (std::int64_t p = 0; p < n_paths; ++p) {
        const auto sample = simulate_path(model, theta, cfg, static_cast<std::uint64_t>(p));
        double v = 1.0;
        for (const auto& [pos, pow] : positions_and_powers)
            for (int e = 0; e < 2 * pow; ++e) v *= sample.values[static_cast<std::size_t>(pos)];
        samples[static_cast<std::size_t>(p)] = v;
    }
    return detail_mc::batch_means(samples);
}

/// Monte Carlo estimate of E( G_{s,h}^{2i} sigma^{2m}_{s+h} ) in the
/// stationary regime; records sigma^2 at the window end.
inline McEstimate mc_g_sigma_moment(const LevyModel& model, const Theta& theta, int i, int m,
                                    double h, std::int64_t n_paths, std::uint64_t seed,
                                    int refine = 500, std::optional<double> burn_in = {}) {
    if (!stationarity_check(model, theta, 2))
        throw numeric_error("mc_g_sigma_moment: stationarity fails");
    const double psi1 = psi(model, theta, 1);
    const double burn = burn_in ? *burn_in : 20.0 / (-psi1);
    const double dt = h / refine;
    LevyIncrementSampler sampler(model);
    std::vector<double> samples(static_cast<std::size_t>(n_paths));
    for (std::int64_t p = 0; p < n_paths; ++p) {
        auto rng = substream_rng(seed, static_cast<std::uint64_t>(p));
        double sigma2 = theta.beta / (-psi1);
        double g = 0.0;
        const double dtb = std::min(std::max(dt, 0.1), std::max(burn, dt));
        const auto nb = static_cast<std::int64_t>(std::ceil(burn / dtb));
        for (std::int64_t s = 0; s < nb; ++s)
            cogarch::detail::euler_step(g, sigma2, dtb, theta, sampler, rng);
        g = 0.0;
        for (int s = 0; s < refine; ++s)
            cogarch::detail::euler_step(g, sigma2, dt, theta, sampler, rng);
        double v = 1.0;
        for (int e = 0; e < 2 * i; ++e) v *= g;
        for (int e = 0; e < m; ++e) v *= sigma2;
        samples[static_cast<std::size_t>(p)] = v;
    }
    return detail_mc::batch_means(samples);
}

} // namespace cogarch::oracles

#endif
