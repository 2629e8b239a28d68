#ifndef COGARCH_ESTIMATE_HPP
#define COGARCH_ESTIMATE_HPP

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "cogarch/common.hpp"
#include "cogarch/levy.hpp"
#include "cogarch/nelder_mead.hpp"
#include "cogarch/pbef.hpp"
#include "cogarch/simulate.hpp"

namespace cogarch {

/// Sufficient statistics of the squared-return sample for both estimators:
/// with y_i = G^2_{ir,r} and Z_i = (1, y_{i-1}, ..., y_{i-q}),
///   contrast(theta) = syy - 2 a~' syz + a~' szz a~
///   sum_i H^i(theta) = syz - szz a~.
struct DataSums {
    int q = 0;
    std::int64_t count = 0;
    double syy = 0.0;
    Eigen::VectorXd syz;
    Eigen::MatrixXd szz;
};

inline DataSums make_data_sums(const ReturnsSample& data, int q) {
    const auto n = static_cast<std::int64_t>(data.values.size());
    if (n <= q) throw std::invalid_argument("make_data_sums: need more observations than q");
    DataSums s;
    s.q = q;
    s.syz = Eigen::VectorXd::Zero(q + 1);
    s.szz = Eigen::MatrixXd::Zero(q + 1, q + 1);
    Eigen::VectorXd z(q + 1);
    for (std::int64_t i = q; i < n; ++i) {
        const double y = data.values[static_cast<std::size_t>(i)] *
                         data.values[static_cast<std::size_t>(i)];
        z(0) = 1.0;
        for (int j = 1; j <= q; ++j) {
            const double yj = data.values[static_cast<std::size_t>(i - j)] *
                              data.values[static_cast<std::size_t>(i - j)];
            z(j) = yj;
        }
        s.syy += y * y;
        s.syz += y * z;
        s.szz += z * z.transpose();
        ++s.count;
    }
    return s;
}

/// Mean square prediction error sum for the given predictor coefficients.
inline double mspe_contrast(const DataSums& sums, const Eigen::VectorXd& a_tilde) {
    return sums.syy - 2.0 * a_tilde.dot(sums.syz) + a_tilde.dot(sums.szz * a_tilde);
}

struct EstimationResult {
    Theta theta_hat{1.0, 1.0, 1.0};
    double objective_value = 0.0;
    int iterations = 0;
    bool converged = false;
    Method method = Method::MSPE;
    int truncation_K = 0;
    std::optional<Eigen::Matrix3d> asymptotic_cov;
};

struct EstimateOptions {
    int truncation_K = 0;       ///< M-matrix truncation for OPBE weights
    int multistarts = 5;        ///< init plus jittered starting points
    int restarts = 4;           ///< simplex restarts per start if not converged
    std::uint64_t seed = 12345; ///< jitter seed
    int max_iter = 800;
    bool with_asymptotic_cov = false;
};

namespace detail_est {

// Penalized objective over x = log(theta); candidates violating the
// stationarity condition are pushed back rather than rejected.
template <class Objective>
double wrapped(const LevyModel& model, int order, const std::vector<double>& x, Objective&& obj) {
    const double lim = 30.0;
    for (double xi : x)
        if (!std::isfinite(xi) || std::abs(xi) > lim) return 1e120;
    const Theta th(std::exp(x[0]), std::exp(x[1]), std::exp(x[2]));
    double worst = -std::numeric_limits<double>::infinity();
    for (int j = 1; j <= order; ++j) worst = std::max(worst, psi(model, th, j));
    if (worst >= 0.0) return 1e100 * (1.0 + worst);
    try {
        return obj(th);
    } catch (const numeric_error&) {
        return 1e100;
    }
}

template <class Objective>
NelderMeadResult multistart(const LevyModel& model, int order, const Theta& init,
                            const EstimateOptions& opt, Objective&& obj) {
    auto f = [&](const std::vector<double>& x) { return wrapped(model, order, x, obj); };
    NelderMeadOptions nm;
    nm.max_iter = opt.max_iter;

    std::vector<std::vector<double>> starts;
    starts.push_back({std::log(init.beta), std::log(init.eta), std::log(init.phi)});
    auto rng = substream_rng(opt.seed, 0xe571);
    std::normal_distribution<double> jitter(0.0, 0.3);
    for (int s = 1; s < opt.multistarts; ++s) {
        auto x = starts[0];
        for (auto& xi : x) xi += jitter(rng);
        starts.push_back(std::move(x));
    }

    // multi-start results are merged by value, so start order cannot matter
    NelderMeadResult best;
    int total_iter = 0;
    for (const auto& x0 : starts) {
        auto r = nelder_mead(f, x0, nm);
        total_iter += r.iterations;
        // A long curved valley collapses the simplex before the tolerance is
        // met; re-seeding a fresh, progressively smaller simplex at the
        // incumbent best recovers convergence cheaply.
        NelderMeadOptions rnm = nm;
        for (int t = 0; t < opt.restarts && !r.converged; ++t) {
            rnm.initial_step *= 0.2;
            auto r2 = nelder_mead(f, r.x, rnm);
            total_iter += r2.iterations;
            if (r2.fx <= r.fx) r = std::move(r2);
        }
        const double tie = 1e-15 * (1.0 + std::abs(r.fx));
        if (best.x.empty() || r.fx < best.fx - tie ||
            (std::abs(r.fx - best.fx) <= tie && r.converged && !best.converged))
            best = std::move(r);
    }
    best.iterations = total_iter;
    return best;
}

// Levenberg-Marquardt polish from the simplex solution.  The contrast
// surfaces have long curved valleys along which Nelder-Mead stalls before
// reaching its tolerance; a few damped Newton steps with the analytic
// predictor-coefficient Jacobian finish the job.  `tight` reports whether
// the final step was negligible, i.e. a stationary point was reached.
struct PolishResult {
    Theta theta{1.0, 1.0, 1.0};
    double fx = 0.0;
    bool tight = false;
    int iterations = 0;
};

template <class Ffun, class GHfun>
PolishResult lm_polish(const LevyModel& model, int order, Theta th, Ffun&& F, GHfun&& GH) {
    auto valid = [&](const Theta& t) {
        if (!(t.beta > 0.0) || !(t.eta > 0.0) || !(t.phi > 0.0)) return false;
        for (int j = 1; j <= order; ++j)
            if (psi(model, t, j) >= 0.0) return false;
        return true;
    };
    PolishResult out;
    out.theta = th;
    try {
        out.fx = F(th);
    } catch (const numeric_error&) {
        out.fx = std::numeric_limits<double>::infinity();
        return out;
    }
    double lambda = 1e-4;
    // iterations are cheap (one Jacobian and a few trial evaluations), and
    // stiff weighted systems can need several hundred before the step dies
    for (int it = 0; it < 2000; ++it) {
        ++out.iterations;
        Eigen::Vector3d g;
        Eigen::Matrix3d H;
        try {
            GH(out.theta, g, H);
        } catch (const numeric_error&) {
            // derivative evaluation stepped over the stationarity boundary;
            // keep the current point rather than abandoning the fit
            break;
        }
        const Eigen::Vector3d scale(out.theta.beta, out.theta.eta, out.theta.phi);
        bool stepped = false;
        for (int tr = 0; tr < 25; ++tr) {
            Eigen::Matrix3d Hl = H;
            for (int c = 0; c < 3; ++c)
                Hl(c, c) += lambda * (std::abs(H(c, c)) + 1e-12 / (scale(c) * scale(c)));
            const Eigen::Vector3d delta = Hl.ldlt().solve(-g);
            const Theta cand(out.theta.beta + delta(0), out.theta.eta + delta(1),
                             out.theta.phi + delta(2));
            if (valid(cand)) {
                double fc;
                try {
                    fc = F(cand);
                } catch (const numeric_error&) {
                    fc = std::numeric_limits<double>::infinity();
                }
                if (fc <= out.fx) {
                    const double rel = (delta.cwiseQuotient(scale)).norm();
                    out.theta = cand;
                    out.fx = fc;
                    lambda = std::max(lambda * 0.25, 1e-12);
                    stepped = true;
                    if (rel < 1e-10) out.tight = true;
                    break;
                }
            }
            lambda *= 8.0;
        }
        if (!stepped) {
            // no admissible descent step: treat the point as stationary
            out.tight = true;
            break;
        }
        if (out.tight) break;
    }
    return out;
}

} // namespace detail_est

/// Fits theta by MSPE (contrast minimization) or by the optimal PBEF with
/// two-stage frozen weights: solve with W*(init), re-freeze at the solution,
/// solve once more.
inline EstimationResult estimate(const ReturnsSample& data, const LevyModel& model, Method method,
                                 int q, const Theta& init, const EstimateOptions& opt = {}) {
    const DataSums sums = make_data_sums(data, q);
    EstimationResult res;
    res.method = method;
    res.truncation_K = opt.truncation_K;

    if (method == Method::MSPE) {
        auto obj = [&](const Theta& th) {
            return mspe_contrast(sums, a_tilde_of(model, th, q, data.lag_r));
        };
        auto r = detail_est::multistart(model, 2, init, opt, obj);
        Theta th(std::exp(r.x[0]), std::exp(r.x[1]), std::exp(r.x[2]));
        auto polish = detail_est::lm_polish(
            model, 2, th, obj,
            [&](const Theta& t, Eigen::Vector3d& g, Eigen::Matrix3d& H) {
                const Eigen::MatrixXd dA = d_a_tilde(model, t, q, data.lag_r);
                const Eigen::VectorXd resid =
                    sums.syz - sums.szz * a_tilde_of(model, t, q, data.lag_r);
                g = -2.0 * dA.transpose() * resid;
                H = 2.0 * dA.transpose() * sums.szz * dA;
            });
        res.theta_hat = polish.theta;
        res.objective_value = polish.fx;
        res.iterations = r.iterations + polish.iterations;
        res.converged = (r.converged || polish.tight) && polish.fx < 1e90;
    } else {
        // The optimal weights are frozen once, at the supplied preliminary
        // value.  Re-freezing at successive solutions chases its own drift
        // and runs away when the weighted system is ill-conditioned.
        //
        // A preliminary fit need not admit 8th moments; if it violates the
        // order-4 stationarity condition, shrink the feedback parameter until
        // it does (psi(c) -> -c*eta < 0 as phi -> 0, so this terminates).
        Theta freeze = init;
        auto max_psi = [&](const Theta& t) {
            double worst = -std::numeric_limits<double>::infinity();
            for (int j = 1; j <= 4; ++j) worst = std::max(worst, psi(model, t, j));
            return worst;
        };
        for (int t = 0; t < 200 && max_psi(freeze) >= 0.0; ++t) freeze.phi *= 0.8;
        MomentCache cache(model, freeze, 4);
        const Eigen::MatrixXd W = optimal_weights(model, cache, q, data.lag_r, opt.truncation_K);
        auto sfun = [&](const Theta& th) {
            return Eigen::Vector3d(W *
                                   (sums.syz - sums.szz * a_tilde_of(model, th, q, data.lag_r)));
        };
        auto obj = [&](const Theta& th) { return sfun(th).squaredNorm(); };
        auto r = detail_est::multistart(model, 4, freeze, opt, obj);
        auto polish = detail_est::lm_polish(
            model, 4, Theta(std::exp(r.x[0]), std::exp(r.x[1]), std::exp(r.x[2])), obj,
            [&](const Theta& t, Eigen::Vector3d& g, Eigen::Matrix3d& H) {
                const Eigen::Matrix3d J = -(W * (sums.szz * d_a_tilde(model, t, q, data.lag_r)));
                const Eigen::Vector3d s = sfun(t);
                g = 2.0 * J.transpose() * s;
                H = 2.0 * J.transpose() * J;
            });
        res.theta_hat = polish.theta;
        res.objective_value = polish.fx;
        res.iterations = r.iterations + polish.iterations;
        res.converged = (r.converged || polish.tight) && polish.fx < 1e90;
    }

    if (opt.with_asymptotic_cov && res.converged) {
        try {
            res.asymptotic_cov = asymptotic_variance(model, res.theta_hat, q, data.lag_r, method,
                                                     opt.truncation_K);
        } catch (const numeric_error&) {
            res.asymptotic_cov.reset();
        }
    }
    return res;
}

} // namespace cogarch

#endif
