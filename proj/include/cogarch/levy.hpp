#ifndef COGARCH_LEVY_HPP
#define COGARCH_LEVY_HPP

#include <cmath>
#include <stdexcept>
#include <string>

#include "cogarch/common.hpp"

namespace cogarch {

/// Parameter triple (beta, eta, phi) of the COGARCH(1,1) volatility SDE.
/// All three coordinates are strictly positive.
struct Theta {
    double beta;
    double eta;
    double phi;

    Theta(double beta_, double eta_, double phi_) : beta(beta_), eta(eta_), phi(phi_) {
        if (!(beta > 0.0) || !(eta > 0.0) || !(phi > 0.0))
            throw std::invalid_argument("Theta: beta, eta and phi must be strictly positive");
    }
};

/// Driving Levy process, standardized to E L_1 = 0 and E L_1^2 = 1.
///
/// Two symmetric families are supported:
///  - VarianceGamma(C): gamma-subordinated Brownian motion with A = 1
///    (standardization forces A = 1; other values are rejected).
///  - CompoundPoissonNormal(rate): Poisson jumps with centered normal
///    marks; jump_sd is derived from rate * jump_sd^2 = 1.
class LevyModel {
public:
    enum class Family { VarianceGamma, CompoundPoissonNormal };

    static LevyModel variance_gamma(double C, double A = 1.0) {
        if (!(C > 0.0)) throw std::invalid_argument("VarianceGamma: C must be positive");
        if (std::abs(A - 1.0) > 1e-12)
            throw std::invalid_argument(
                "VarianceGamma: standardization E L_1^2 = 1 requires A = 1");
        LevyModel m;
        m.family_ = Family::VarianceGamma;
        m.c_ = C;
        // all moments finite; cap keeps factorials within double range
        m.max_moment_order_ = 64;
        return m;
    }

    static LevyModel compound_poisson_normal(double rate) {
        if (!(rate > 0.0)) throw std::invalid_argument("CompoundPoissonNormal: rate must be positive");
        LevyModel m;
        m.family_ = Family::CompoundPoissonNormal;
        m.rate_ = rate;
        m.jump_sd_ = 1.0 / std::sqrt(rate);
        m.max_moment_order_ = 64;
        return m;
    }

    Family family() const { return family_; }
    double vg_c() const { return c_; }
    double cpn_rate() const { return rate_; }
    double cpn_jump_sd() const { return jump_sd_; }
    int max_moment_order() const { return max_moment_order_; }

    /// Brownian variance component tau^2 = 1 - int x^2 nu(dx).
    /// Zero for both supported families.
    double tau2() const { return 1.0 - levy_measure_moment(2); }

    /// int x^order nu(dx), in closed form. Zero for odd order (both
    /// families are symmetric).
    double levy_measure_moment(int order) const {
        if (order < 2) throw std::invalid_argument("levy_measure_moment: order must be >= 2");
        if (order > max_moment_order_)
            throw numeric_error("levy_measure_moment: moment of order " + std::to_string(order) +
                                " not finite for this model");
        if (order % 2 == 1) return 0.0;
        switch (family_) {
        case Family::VarianceGamma: {
            // density C/|x| exp(-|x| sqrt(2C)/A), A = 1
            const long double s = 1.0L / std::sqrt(2.0L * c_); // A/sqrt(2C)
            return static_cast<double>(2.0L * c_ * detail::factorial(order - 1) *
                                       std::pow(s, static_cast<long double>(order)));
        }
        case Family::CompoundPoissonNormal:
            return static_cast<double>(rate_ *
                                       std::pow(static_cast<long double>(jump_sd_), order) *
                                       detail::double_factorial(order - 1));
        }
        return 0.0;
    }

    /// E [L]_1^{(order)}: 1 for order 2 (full quadratic variation including
    /// tau^2); the pure-jump measure moment for even order >= 4.
    double qv_moment(int order) const {
        if (order < 2 || order % 2 == 1)
            throw std::invalid_argument("qv_moment: order must be even and >= 2");
        if (order == 2) return 1.0;
        return levy_measure_moment(order);
    }

private:
    LevyModel() = default;
    Family family_ = Family::VarianceGamma;
    double c_ = 1.0;
    double rate_ = 1.0;
    double jump_sd_ = 1.0;
    int max_moment_order_ = 64;
};

/// Laplace exponent of the auxiliary process X:
///   Psi(c) = -eta c + sum_{i=1..c} binom(c,i) phi^i int x^{2i} nu(dx).
inline double psi(const LevyModel& model, const Theta& theta, int c) {
    if (c < 0) throw std::invalid_argument("psi: c must be >= 0");
    if (c == 0) return 0.0;
    if (2 * c > model.max_moment_order())
        throw numeric_error("psi: undefined, 2c-th moment not finite");
    long double sum = -static_cast<long double>(theta.eta) * c;
    long double phi_i = 1.0L;
    for (int i = 1; i <= c; ++i) {
        phi_i *= theta.phi;
        sum += detail::binom(c, i) * phi_i * model.levy_measure_moment(2 * i);
    }
    return static_cast<double>(sum);
}

/// True iff Psi(j) < 0 for all 1 <= j <= k and the 2k-th moment is finite:
/// the stationarity/moment condition the estimators need (k = 4 for OPBE).
inline bool stationarity_check(const LevyModel& model, const Theta& theta, int k) {
    if (2 * k > model.max_moment_order()) return false;
    for (int j = 1; j <= k; ++j)
        if (psi(model, theta, j) >= 0.0) return false;
    return true;
}

} // namespace cogarch

#endif
