// End-to-end acceptance checks. Each criterion prints exactly one PASS/FAIL
// line; the exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cogarch/estimate.hpp"
#include "cogarch/moments.hpp"
#include "cogarch/oracles.hpp"
#include "cogarch/pbef.hpp"
#include "cogarch/simulate.hpp"
#include "cogarch/study.hpp"

using namespace cogarch;
using clk = std::chrono::steady_clock;

namespace {

const Theta kTheta0{0.04, 0.053, 0.038};
const LevyModel kVg = LevyModel::variance_gamma(1.0);

int g_failures = 0;
clk::time_point g_t0;

void report(int idx, const char* what, bool pass, const std::string& detail) {
    const double elapsed = std::chrono::duration<double>(clk::now() - g_t0).count();
    std::printf("%s criterion %d: %s (%s) [%.1fs]\n", pass ? "PASS" : "FAIL", idx, what,
                detail.c_str(), elapsed);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double worst_rel(const Eigen::Matrix3d& got, const Eigen::Matrix3d& want) {
    double w = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            w = std::max(w, std::abs(got(i, j) - want(i, j)) / std::abs(want(i, j)));
    return w;
}

Eigen::Matrix3d from_rows(const double rows[3][3]) {
    Eigen::Matrix3d m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = rows[i][j];
    return m;
}

// ---------------------------------------------------------------- criterion 1
void criterion_psi() {
    const double p4 = psi(kVg, kTheta0, 4);
    const bool pass = std::abs(p4 - (-0.0261)) <= 5e-4;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "Psi(4) = %.7f", p4);
    report(1, "Laplace exponent at the reference point", pass, buf);
}

// ------------------------------------------------------------- criteria 2 + 3
void criterion_av_table() {
    const double tab_mspe[3][3] = {
        {4.668, 2.989, 1.216}, {2.989, 3.172, 2.058}, {1.216, 2.058, 1.628}};
    const double tab_opbe[3][3] = {
        {4.503, 2.844, 1.133}, {2.844, 3.045, 1.985}, {1.133, 1.985, 1.587}};
    const double tab_appr[3][3] = {
        {4.504, 2.845, 1.134}, {2.845, 3.047, 1.988}, {1.134, 1.988, 1.588}};
    const Eigen::Matrix3d Tm = from_rows(tab_mspe);
    const Eigen::Matrix3d To = from_rows(tab_opbe);
    const Eigen::Matrix3d Ta = from_rows(tab_appr);
    const int var_K = 400; // long-run M: tail is converged well before this

    // sweep the predictor order; small q are structurally unable to match
    // (q = 1 is unidentifiable, q = 2, 3 give variances orders of magnitude
    // above the table), so the sweep extends until the published values are
    // reached
    std::string sweep;
    int q_star = -1;
    double best = 1e300;
    for (int q : {1, 2, 3, 35, 70}) {
        std::string entry;
        try {
            const Eigen::Matrix3d Vm =
                asymptotic_variance(kVg, kTheta0, q, 1.0, Method::MSPE, 0, var_K);
            const double wr = worst_rel(Vm, Tm);
            char buf[64];
            std::snprintf(buf, sizeof(buf), "q=%d: %.3g%%", q, 100.0 * wr);
            entry = buf;
            if (wr < best) {
                best = wr;
                q_star = q;
            }
        } catch (const numeric_error&) {
            entry = "q=" + std::to_string(q) + ": unidentifiable";
        }
        sweep += (sweep.empty() ? "" : ", ") + entry;
    }

    bool pass = q_star > 0 && best <= 0.02;
    Eigen::Matrix3d Vo = Eigen::Matrix3d::Zero(), Va = Eigen::Matrix3d::Zero();
    double wr_o = 1.0, wr_a = 1.0;
    if (q_star > 0) {
        Vo = asymptotic_variance(kVg, kTheta0, q_star, 1.0, Method::OPBE, var_K, var_K);
        Va = asymptotic_variance(kVg, kTheta0, q_star, 1.0, Method::OPBE, 0, var_K);
        wr_o = worst_rel(Vo, To);
        wr_a = worst_rel(Va, Ta);
        pass = pass && wr_o <= 0.02 && wr_a <= 0.02;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "sweep [%s]; selected q=%d, opbe %.3g%%, approx %.3g%%",
                  sweep.c_str(), q_star, 100.0 * wr_o, 100.0 * wr_a);
    report(2, "asymptotic-variance table reproduction", pass, buf);

    const double gap = worst_rel(Va, Vo);
    char buf3[64];
    std::snprintf(buf3, sizeof(buf3), "max entrywise gap %.4g%%", 100.0 * gap);
    report(3, "lag-0 weight approximation of the optimal estimator", gap < 0.005, buf3);
}

// ---------------------------------------------------------------- criterion 4
struct McStat {
    double value = 0.0, se = 0.0;
};

McStat batch_mean(const std::vector<double>& s) {
    const std::size_t nb = 100;
    std::vector<double> bm(nb, 0.0);
    std::vector<std::size_t> cnt(nb, 0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        bm[i % nb] += s[i];
        cnt[i % nb] += 1;
    }
    double grand = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        bm[b] /= static_cast<double>(cnt[b]);
        grand += bm[b];
    }
    grand /= static_cast<double>(nb);
    double var = 0.0;
    for (double m : bm) var += (m - grand) * (m - grand);
    var /= static_cast<double>(nb - 1);
    return {grand, std::sqrt(var / static_cast<double>(nb))};
}

void criterion_monte_carlo() {
    const std::int64_t n_paths = 100000;
    const std::vector<int> ks = {1, 2, 5, 10};
    SimConfig cfg;
    cfg.n_obs = 11;
    cfg.lag_r = 1.0;
    cfg.refine = 100;
    cfg.burn_in = 400.0;
    cfg.seed = 20240817;

    std::vector<std::vector<double>> samples(2 + ks.size());
    for (auto& s : samples) s.reserve(static_cast<std::size_t>(n_paths));
    for (std::int64_t p = 0; p < n_paths; ++p) {
        const auto path = simulate_path(kVg, kTheta0, cfg, static_cast<std::uint64_t>(p));
        const double y0 = path.values[0] * path.values[0];
        samples[0].push_back(y0);
        samples[1].push_back(y0 * y0);
        for (std::size_t j = 0; j < ks.size(); ++j) {
            const auto k = static_cast<std::size_t>(ks[j]);
            const double yk = path.values[k] * path.values[k];
            samples[2 + j].push_back(y0 * yk);
        }
    }

    MomentCache cache(kVg, kTheta0, 4);
    std::vector<double> exact = {cache.marginal_g_moment(1, 1.0), cache.marginal_g_moment(2, 1.0)};
    std::vector<std::string> names = {"EG2", "EG4"};
    for (int k : ks) {
        exact.push_back(joint_return_moment(cache, {{0.0, 1}, {static_cast<double>(k), 1}}, 1.0));
        names.push_back("E(y0 y" + std::to_string(k) + ")");
    }

    bool pass = true;
    std::string detail;
    for (std::size_t j = 0; j < exact.size(); ++j) {
        const McStat st = batch_mean(samples[j]);
        const double z = (st.value - exact[j]) / st.se;
        pass = pass && std::abs(z) <= 3.0;
        char buf[80];
        std::snprintf(buf, sizeof(buf), "%s z=%+.2f", names[j].c_str(), z);
        detail += (detail.empty() ? "" : ", ") + std::string(buf);
    }
    report(4, "moment engine vs Monte Carlo over 100000 paths", pass, detail);
}

// ---------------------------------------------------------------- criterion 5
void criterion_quadrature() {
    const JTable jt(kVg, kTheta0, 3);
    std::mt19937_64 rng(2718);
    std::uniform_real_distribution<double> hu(0.2, 2.5), du(0.0, 1.5);
    bool pass = true;
    double worst = 0.0;
    for (int point = 0; point < 10; ++point) {
        const double h = hu(rng), d = du(rng);
        const oracles::OdeJTable ode(kVg, kTheta0, 3, h, d);
        for (int k = 0; k <= 3; ++k)
            for (int i = 0; i <= k; ++i)
                for (int r = 0; r <= k; ++r) {
                    const double closed = jt.at(k, i, r).eval(h, d);
                    const double ref = ode.at(k, i, r);
                    const double err =
                        std::abs(closed - ref) / std::max({std::abs(ref), std::abs(closed), 1e-12});
                    worst = std::max(worst, err);
                }
        // the i = 0 row also has an independent nested-integral form
        for (int k = 1; k <= 3; ++k)
            for (int i = 0; i <= k; ++i) {
                const double closed = jt.at(k, 0, k - i).eval(h, d);
                const double ref = oracles::nested_j_quadrature(kVg, kTheta0, k, i, h + d, 1e-11);
                const double err =
                    std::abs(closed - ref) / std::max({std::abs(ref), std::abs(closed), 1e-12});
                worst = std::max(worst, err);
            }
    }
    pass = worst <= 1e-8;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "worst relative error %.3g", worst);
    report(5, "closed forms vs quadrature and ODE oracles, k <= 3", pass, buf);
}

// ---------------------------------------------------------------- criterion 6
void criterion_total_expectation() {
    MomentCache cache(kVg, kTheta0, 4);
    std::mt19937_64 rng(31415);
    std::uniform_real_distribution<double> u(0.1, 4.0);
    double worst = 0.0;
    for (int point = 0; point < 20; ++point) {
        const double h = u(rng), d = u(rng);
        for (int k = 1; k <= 4; ++k) {
            long double total = 0.0L;
            for (int r = 0; r <= k; ++r)
                total += cache.jtable().at(k, 0, r).eval(h, d) * cache.stationary_sigma_moment(r);
            worst = std::max(worst, std::abs(static_cast<double>(total) -
                                             cache.stationary_sigma_moment(k)) /
                                        cache.stationary_sigma_moment(k));
        }
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "worst relative defect %.3g", worst);
    report(6, "law of total expectation, k <= 4, 20 random points", worst <= 1e-10, buf);
}

// ---------------------------------------------------------------- criterion 7
void criterion_study() {
    StudyConfig cfg;
    cfg.model = kVg;
    cfg.theta0 = kTheta0;
    cfg.n_obs = 5000;
    cfg.lag_r = 1.0;
    cfg.refine = 100;
    cfg.replications = 200;
    cfg.methods = {Method::MSPE, Method::OPBE};
    cfg.q = 70; // the predictor order that reproduces the published variances
    cfg.trunc_K = 0;
    cfg.seed = 1234;
    cfg.workers = 1;
    cfg.out_dir = "acceptance_study_out";
    const StudySummary summary = run_study(cfg);

    const auto& mspe = summary.json.at("methods").at("mspe");
    const auto& opbe = summary.json.at("methods").at("opbe");
    const double t0[3] = {kTheta0.beta, kTheta0.eta, kTheta0.phi};

    bool pass = mspe.at("n_failed").get<int>() == 0 && opbe.at("n_failed").get<int>() == 0;
    std::string detail;
    double worst_med = 0.0;
    for (int p = 0; p < 3; ++p) {
        const double med = mspe.at("median").at(static_cast<std::size_t>(p)).get<double>();
        worst_med = std::max(worst_med, std::abs(med - t0[p]) / t0[p]);
    }
    pass = pass && worst_med <= 0.15;

    double tr_m = 0.0, tr_o = 0.0;
    for (int p = 0; p < 3; ++p) {
        tr_m += mspe.at("cov").at(static_cast<std::size_t>(p)).at(static_cast<std::size_t>(p))
                    .get<double>();
        tr_o += opbe.at("cov").at(static_cast<std::size_t>(p)).at(static_cast<std::size_t>(p))
                    .get<double>();
    }
    pass = pass && tr_o <= tr_m;

    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "worst median offset %.3g%%, trace cov mspe %.3g vs opbe %.3g", 100.0 * worst_med,
                  tr_m, tr_o);
    report(7, "replication study, 200 x 5000 observations", pass, buf);
}

// ---------------------------------------------------------------- criterion 8
void criterion_properties() {
    bool pass = true;
    std::string detail;

    // normal-equation residuals
    MomentCache cache(kVg, kTheta0, 4);
    double worst_ne = 0.0;
    for (int q = 1; q <= 5; ++q) {
        const PredictorCoeffs pc = predictor_coeffs(cache, q, 1.0);
        const Eigen::VectorXd a = pc.a_tilde.tail(q);
        worst_ne = std::max(worst_ne,
                            (pc.C * a - pc.b).cwiseAbs().maxCoeff() / pc.C.norm());
    }
    pass = pass && worst_ne < 1e-10;

    // M symmetric positive definite
    const PredictorCoeffs pc4 = predictor_coeffs(cache, 4, 1.0);
    const Eigen::MatrixXd M = m_matrix(cache, 4, 1.0, pc4.a_tilde, 20);
    const double asym = (M - M.transpose()).cwiseAbs().maxCoeff() / M.norm();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> mes(M);
    pass = pass && asym < 1e-12 && mes.eigenvalues().minCoeff() > 0.0;

    // contrast variance dominates the optimal variance
    const Eigen::Matrix3d vm = asymptotic_variance(kVg, kTheta0, 5, 1.0, Method::MSPE, 0, 50);
    const Eigen::Matrix3d vo = asymptotic_variance(kVg, kTheta0, 5, 1.0, Method::OPBE, 50, 50);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> des(vm - vo);
    const double min_eig = des.eigenvalues().minCoeff() / vm.norm();
    pass = pass && min_eig > -1e-8;

    // symbolic integrate/differentiate round trip
    ExpPoly p = ExpPoly::term(2.0, 1, 1, -0.6, 0.2) + ExpPoly::term(-1.0, 2, 0, 0.4, -0.1);
    const ExpPoly F = p.integrate_h();
    double worst_rt = 0.0;
    for (double h : {0.4, 1.1, 2.3}) {
        const double eps = 1e-5;
        const double deriv = (F.eval(h + eps, 0.7) - F.eval(h - eps, 0.7)) / (2.0 * eps);
        worst_rt = std::max(worst_rt, std::abs(deriv - p.eval(h, 0.7)) /
                                          std::max(1.0, std::abs(p.eval(h, 0.7))));
    }
    pass = pass && worst_rt < 1e-6;

    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "normal-eq %.2g, M asym %.2g, min eig (Vmspe-Vopbe)/|V| %.2g, round-trip %.2g",
                  worst_ne, asym, min_eig, worst_rt);
    report(8, "property suite", pass, buf);
}

} // namespace

int main() {
    g_t0 = clk::now();
    criterion_psi();
    criterion_av_table();
    criterion_monte_carlo();
    criterion_quadrature();
    criterion_total_expectation();
    criterion_study();
    criterion_properties();
    return g_failures;
}
