#ifndef COGARCH_SIMULATE_HPP
#define COGARCH_SIMULATE_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cogarch/common.hpp"
#include "cogarch/levy.hpp"
#include "cogarch/moments.hpp"

namespace cogarch {

struct SimConfig {
    std::int64_t n_obs = 1;      ///< number of equally spaced returns
    double lag_r = 1.0;          ///< observation spacing
    int refine = 1000;           ///< fine Euler steps per lag
    std::optional<double> burn_in; ///< time units; default 20/(-Psi(1))
    std::uint64_t seed = 0;

    void validate() const {
        if (n_obs < 1) throw std::invalid_argument("SimConfig: n_obs must be >= 1");
        if (refine < 1) throw std::invalid_argument("SimConfig: refine must be >= 1");
        if (!(lag_r > 0.0)) throw std::invalid_argument("SimConfig: lag_r must be positive");
        if (burn_in && *burn_in < 0.0)
            throw std::invalid_argument("SimConfig: burn_in must be >= 0");
    }
};

/// Equally spaced squared-return observations are derived from this:
/// values[j] = G_{(j+1)r} - G_{jr}.
struct ReturnsSample {
    double lag_r = 1.0;
    std::vector<double> values;
};

/// Deterministic RNG substream for (seed, stream index); streams are
/// independent of the order in which they are created.
inline std::mt19937_64 substream_rng(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(detail::splitmix64(seed ^ detail::splitmix64(index + 1)));
}

/// Samples one fine-grid increment (dL, dQV) of the driving Levy process.
class LevyIncrementSampler {
public:
    explicit LevyIncrementSampler(const LevyModel& model) : model_(model) {}

    struct Increment {
        double dL;
        double dQV;
    };

    Increment draw(double dt, std::mt19937_64& rng) {
        switch (model_.family()) {
        case LevyModel::Family::VarianceGamma: {
            // gamma-subordinated normal: Gamma(shape C dt, rate C) time change
            const double c = model_.vg_c();
            std::gamma_distribution<double> gamma(c * dt, 1.0 / c);
            const double g = gamma(rng);
            const double dl = std::sqrt(g) * normal_(rng);
            return {dl, dl * dl};
        }
        case LevyModel::Family::CompoundPoissonNormal: {
            std::poisson_distribution<int> pois(model_.cpn_rate() * dt);
            const int n = pois(rng);
            double dl = 0.0, dqv = 0.0;
            for (int i = 0; i < n; ++i) {
                const double j = model_.cpn_jump_sd() * normal_(rng);
                dl += j;
                dqv += j * j;
            }
            return {dl, dqv};
        }
        }
        return {0.0, 0.0};
    }

private:
    LevyModel model_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

namespace detail {

// One Euler step; sigma2 uses the left limit for both drift and jump feedback.
inline void euler_step(double& g, double& sigma2, double dt, const Theta& th,
                       LevyIncrementSampler& sampler, std::mt19937_64& rng) {
    const auto inc = sampler.draw(dt, rng);
    g += std::sqrt(sigma2) * inc.dL;
    sigma2 = sigma2 + (th.beta - th.eta * sigma2) * dt + th.phi * sigma2 * inc.dQV;
}

} // namespace detail

/// Euler scheme on the fine grid dt = lag_r / refine. sigma^2 starts at its
/// stationary mean and is evolved through the burn-in (on a coarser grid,
/// capped at dt <= 0.1, since only the stationary law matters there) before
/// returns are recorded.
inline ReturnsSample simulate_path(const LevyModel& model, const Theta& theta,
                                   const SimConfig& cfg, std::uint64_t path_index = 0) {
    cfg.validate();
    if (!stationarity_check(model, theta, 2))
        throw numeric_error("simulate_path: stationarity condition Psi(2) < 0 fails");

    const double psi1 = psi(model, theta, 1);
    const double burn = cfg.burn_in ? *cfg.burn_in : 20.0 / (-psi1);
    const double dt = cfg.lag_r / cfg.refine;

    auto rng = substream_rng(cfg.seed, path_index);
    LevyIncrementSampler sampler(model);

    double sigma2 = theta.beta / (-psi1); // E sigma^2_inf
    double g = 0.0;

    if (burn > 0.0) {
        const double dtb = std::min(std::max(dt, 0.1), burn);
        const auto nb = static_cast<std::int64_t>(std::ceil(burn / dtb));
        for (std::int64_t s = 0; s < nb; ++s) {
            detail::euler_step(g, sigma2, dtb, theta, sampler, rng);
            if (!std::isfinite(sigma2) || sigma2 <= 0.0)
                throw numeric_error("simulate_path: path diverged at burn-in step " +
                                    std::to_string(s));
        }
        g = 0.0;
    }

    ReturnsSample out;
    out.lag_r = cfg.lag_r;
    out.values.reserve(static_cast<std::size_t>(cfg.n_obs));
    for (std::int64_t j = 0; j < cfg.n_obs; ++j) {
        const double g_start = g;
        for (int s = 0; s < cfg.refine; ++s) {
            detail::euler_step(g, sigma2, dt, theta, sampler, rng);
            if (!std::isfinite(g) || !std::isfinite(sigma2) || sigma2 <= 0.0)
                throw numeric_error("simulate_path: path diverged at step " +
                                    std::to_string(j * cfg.refine + s));
        }
        out.values.push_back(g - g_start);
    }
    return out;
}

} // namespace cogarch

#endif
