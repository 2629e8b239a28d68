#ifndef COGARCH_EXPPOLY_HPP
#define COGARCH_EXPPOLY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <json.hpp>
#include <quadmath.h>

#include "cogarch/common.hpp"

namespace cogarch {

/// One term  coef * h^h_pow * d^d_pow * exp(h_rate*h) * exp(d_rate*d).
/// Coefficients are carried in quad precision: the moment recursions divide
/// by near-coincident exponential rates, so intermediate coefficients can
/// exceed 1e18 while the evaluated sum is O(1).  That cancellation destroys
/// up to 20 decimal digits, which long double cannot absorb.
struct ExpTerm {
    __float128 coef = 0;
    int h_pow = 0;
    int d_pow = 0;
    long double h_rate = 0.0L;
    long double d_rate = 0.0L;
};

/// Finite sum of bivariate exponential-polynomial terms in (h, d).
/// Closed under addition, scaling, exponential shifts and definite
/// integration over [0, h] in the first variable, which is all the
/// conditional-moment recursions need.
class ExpPoly {
public:
    // Rates closer than this are treated as equal when merging terms; a
    // near-zero rate in the integrator collapses to the polynomial branch
    // instead of dividing by it.
    static constexpr long double kRateTol = 1e-12L;
    static constexpr long double kCoefDrop = 1e-300L;

    ExpPoly() = default;

    static ExpPoly constant(double c) { return term(c, 0, 0, 0.0, 0.0); }

    static ExpPoly term(long double coef, int h_pow, int d_pow, long double h_rate,
                        long double d_rate) {
        return term_q(static_cast<__float128>(coef), h_pow, d_pow, h_rate, d_rate);
    }

    /// Same as term() but takes the coefficient in quad precision, for
    /// rewrites of already-built polynomials that must not round.
    static ExpPoly term_q(__float128 coef, int h_pow, int d_pow, long double h_rate,
                          long double d_rate) {
        ExpPoly p;
        if (coef != 0) p.terms_.push_back({coef, h_pow, d_pow, h_rate, d_rate});
        return p;
    }

    bool empty() const { return terms_.empty(); }
    const std::vector<ExpTerm>& terms() const { return terms_; }

    ExpPoly& operator+=(const ExpPoly& other) {
        terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
        normalize();
        return *this;
    }

    friend ExpPoly operator+(ExpPoly a, const ExpPoly& b) { return a += b; }

    friend ExpPoly operator-(const ExpPoly& a, const ExpPoly& b) { return a + b.scaled(-1.0); }

    ExpPoly scaled(long double s) const {
        ExpPoly p(*this);
        for (auto& t : p.terms_) t.coef *= s;
        p.normalize();
        return p;
    }

    /// Shift every term's h-rate: multiplication by exp(shift*h).
    ExpPoly shifted_h_rate(long double shift) const {
        ExpPoly p(*this);
        for (auto& t : p.terms_) t.h_rate += shift;
        p.normalize();
        return p;
    }

    /// Shift every term's d-rate: multiplication by exp(shift*d).
    ExpPoly shifted_d_rate(long double shift) const {
        ExpPoly p(*this);
        for (auto& t : p.terms_) t.d_rate += shift;
        p.normalize();
        return p;
    }

    /// F(h, d) = integral over [0, h] of this(w, d) dw, in closed form.
    /// The lower limit is subtracted so F(0, d) = 0 for every d.
    ExpPoly integrate_h() const {
        ExpPoly out;
        for (const auto& t : terms_) {
            const long double a = t.h_rate;
            if (std::abs(a) <= kRateTol) {
                // polynomial branch: w^p -> h^{p+1}/(p+1)
                out.terms_.push_back({t.coef / (t.h_pow + 1), t.h_pow + 1, t.d_pow, 0.0L, t.d_rate});
                continue;
            }
            // integral of w^p e^{aw} dw = e^{ah} sum_j (-1)^j p!/(p-j)! a^{-(j+1)} h^{p-j}
            const __float128 aq = a;
            __float128 c = t.coef / aq;
            for (int j = 0; j <= t.h_pow; ++j) {
                out.terms_.push_back({c, t.h_pow - j, t.d_pow, a, t.d_rate});
                if (j < t.h_pow) c *= -static_cast<__float128>(t.h_pow - j) / aq;
            }
            // lower-limit contribution (only the j = p term survives at w = 0)
            out.terms_.push_back({-c, 0, t.d_pow, 0.0L, t.d_rate});
        }
        out.normalize();
        return out;
    }

    /// Numeric value at (h, d).  The exponentials are evaluated in quad
    /// precision as well: terms of magnitude 1e18 must cancel to O(1), so
    /// each one needs more correct digits than long double exp() delivers.
    double eval(double h, double d) const {
        __float128 sum = 0;
        for (const auto& t : terms_) {
            __float128 v = t.coef * expq(static_cast<__float128>(t.h_rate) * h +
                                         static_cast<__float128>(t.d_rate) * d);
            for (int i = 0; i < t.h_pow; ++i) v *= h;
            for (int i = 0; i < t.d_pow; ++i) v *= d;
            sum += v;
        }
        return static_cast<double>(sum);
    }

    /// Largest h_rate + d_rate over terms; 0 for the empty poly.
    /// Negative iff the function decays as h + d grows.
    double max_total_rate() const {
        long double m = terms_.empty() ? 0.0L : -1e300L;
        for (const auto& t : terms_) m = std::max(m, t.h_rate + t.d_rate);
        return static_cast<double>(m);
    }

    std::size_t size() const { return terms_.size(); }

    /// Deterministic debug form: sorted list of [coef, h_pow, d_pow, h_rate, d_rate].
    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& t : terms_) {
            arr.push_back({static_cast<double>(t.coef), t.h_pow, t.d_pow,
                           static_cast<double>(t.h_rate), static_cast<double>(t.d_rate)});
        }
        return arr;
    }

private:
    std::vector<ExpTerm> terms_;

    static bool key_less(const ExpTerm& a, const ExpTerm& b) {
        if (a.h_rate < b.h_rate - kRateTol) return true;
        if (a.h_rate > b.h_rate + kRateTol) return false;
        if (a.d_rate < b.d_rate - kRateTol) return true;
        if (a.d_rate > b.d_rate + kRateTol) return false;
        if (a.h_pow != b.h_pow) return a.h_pow < b.h_pow;
        return a.d_pow < b.d_pow;
    }

    static bool key_equal(const ExpTerm& a, const ExpTerm& b) {
        return !key_less(a, b) && !key_less(b, a);
    }

    void normalize() {
        std::sort(terms_.begin(), terms_.end(), key_less);
        std::vector<ExpTerm> merged;
        for (const auto& t : terms_) {
            if (!merged.empty() && key_equal(merged.back(), t)) {
                merged.back().coef += t.coef;
            } else {
                merged.push_back(t);
            }
        }
        merged.erase(std::remove_if(merged.begin(), merged.end(),
                                    [](const ExpTerm& t) { return fabsq(t.coef) < kCoefDrop; }),
                     merged.end());
        terms_ = std::move(merged);
    }
};

} // namespace cogarch

#endif
