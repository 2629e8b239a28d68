#ifndef COGARCH_STUDY_HPP
#define COGARCH_STUDY_HPP

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>
#include <vector>

#include "cogarch/config.hpp"
#include "cogarch/estimate.hpp"
#include "cogarch/simulate.hpp"

namespace cogarch {

struct StudyCell {
    bool ok = false;
    double beta = 0.0, eta = 0.0, phi = 0.0;
    double objective = 0.0;
    bool converged = false;
    std::string error;
};

struct StudySummary {
    nlohmann::json json;
};

namespace detail_study {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline nlohmann::json method_summary(const std::vector<StudyCell>& cells, const Theta& theta0) {
    std::int64_t ok = 0;
    double s[3] = {0, 0, 0};
    std::vector<double> col[3];
    for (const auto& c : cells)
        if (c.ok) {
            ++ok;
            s[0] += c.beta;
            s[1] += c.eta;
            s[2] += c.phi;
            col[0].push_back(c.beta);
            col[1].push_back(c.eta);
            col[2].push_back(c.phi);
        }
    nlohmann::json out;
    out["n_replications"] = cells.size();
    out["n_failed"] = cells.size() - static_cast<std::size_t>(ok);
    if (ok == 0) return out;
    const double avg[3] = {s[0] / ok, s[1] / ok, s[2] / ok};
    const double t0[3] = {theta0.beta, theta0.eta, theta0.phi};
    nlohmann::json cov = nlohmann::json::array();
    double c[3][3] = {};
    for (const auto& cell : cells) {
        if (!cell.ok) continue;
        const double d[3] = {cell.beta - avg[0], cell.eta - avg[1], cell.phi - avg[2]};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) c[i][j] += d[i] * d[j];
    }
    for (int i = 0; i < 3; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < 3; ++j) row.push_back(ok > 1 ? c[i][j] / (ok - 1) : 0.0);
        cov.push_back(row);
    }
    out["avg"] = {avg[0], avg[1], avg[2]};
    out["median"] = {median_of(col[0]), median_of(col[1]), median_of(col[2])};
    out["rel_bias"] = {std::abs(avg[0] - t0[0]) / t0[0], std::abs(avg[1] - t0[1]) / t0[1],
                       std::abs(avg[2] - t0[2]) / t0[2]};
    out["cov"] = cov;
    return out;
}

inline void write_histogram(const std::string& path, const std::vector<double>& values,
                            const nlohmann::json& provenance) {
    std::ofstream out(path);
    out << "# config: " << provenance.dump() << "\n";
    out << "bin_lo,bin_hi,count\n";
    if (values.empty()) return;
    double lo = values[0], hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi <= lo) hi = lo + 1e-12;
    const int bins = 30;
    std::vector<std::int64_t> counts(bins, 0);
    for (double v : values) {
        int b = static_cast<int>((v - lo) / (hi - lo) * bins);
        b = std::min(std::max(b, 0), bins - 1);
        ++counts[static_cast<std::size_t>(b)];
    }
    for (int b = 0; b < bins; ++b) {
        const double a = lo + (hi - lo) * b / bins;
        const double c = lo + (hi - lo) * (b + 1) / bins;
        out << fmt(a) << ',' << fmt(c) << ',' << counts[static_cast<std::size_t>(b)] << "\n";
    }
}

} // namespace detail_study

/// Runs the replication study: simulate, estimate with each method, write
/// per-replication estimates CSV, a summary JSON (avg, relative bias,
/// empirical covariance, failure counts) and per-parameter histogram CSVs.
/// Deterministic given the seed, independent of the worker count.
inline StudySummary run_study(const StudyConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    const auto n_methods = cfg.methods.size();
    const auto reps = static_cast<std::size_t>(cfg.replications);
    std::vector<std::vector<StudyCell>> results(n_methods, std::vector<StudyCell>(reps));

    std::atomic<std::int64_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::int64_t rep = next.fetch_add(1);
            if (rep >= cfg.replications) return;
            SimConfig sim;
            sim.n_obs = cfg.n_obs;
            sim.lag_r = cfg.lag_r;
            sim.refine = cfg.refine;
            sim.seed = cfg.seed;
            ReturnsSample sample;
            std::string sim_error;
            try {
                sample = simulate_path(cfg.model, cfg.theta0, sim,
                                       static_cast<std::uint64_t>(rep));
            } catch (const std::exception& e) {
                sim_error = e.what();
            }
            // MSPE runs first (regardless of the configured order) so that
            // its fit can serve as the data-driven preliminary value at which
            // the optimally weighted estimator freezes its weights.
            std::vector<std::size_t> order(n_methods);
            for (std::size_t m = 0; m < n_methods; ++m) order[m] = m;
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return (cfg.methods[a] == Method::MSPE) > (cfg.methods[b] == Method::MSPE);
            });
            Theta prelim = cfg.theta0;
            for (std::size_t m : order) {
                StudyCell& cell = results[m][static_cast<std::size_t>(rep)];
                if (!sim_error.empty()) {
                    cell.error = sim_error;
                    continue;
                }
                try {
                    EstimateOptions opt;
                    opt.truncation_K = cfg.trunc_K;
                    opt.seed = detail::splitmix64(cfg.seed ^ static_cast<std::uint64_t>(rep));
                    const Theta& init = cfg.methods[m] == Method::OPBE ? prelim : cfg.theta0;
                    const auto r = estimate(sample, cfg.model, cfg.methods[m], cfg.q, init, opt);
                    cell.ok = true;
                    cell.beta = r.theta_hat.beta;
                    cell.eta = r.theta_hat.eta;
                    cell.phi = r.theta_hat.phi;
                    cell.objective = r.objective_value;
                    cell.converged = r.converged;
                    if (cfg.methods[m] == Method::MSPE && r.converged) prelim = r.theta_hat;
                } catch (const std::exception& e) {
                    cell.error = e.what();
                }
            }
        }
    };

    std::vector<std::thread> pool;
    const int n_workers = std::min<int>(cfg.workers, static_cast<int>(reps));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    const nlohmann::json provenance = {{"config", cfg.to_json()}, {"version", kVersion}};

    {
        std::ofstream out(cfg.out_dir + "/estimates.csv");
        out << "# config: " << provenance.dump() << "\n";
        out << "replication,method,beta,eta,phi,converged,objective,error\n";
        for (std::size_t rep = 0; rep < reps; ++rep) {
            for (std::size_t m = 0; m < n_methods; ++m) {
                const auto& c = results[m][rep];
                const char* name = cfg.methods[m] == Method::MSPE ? "mspe" : "opbe";
                if (c.ok)
                    out << rep << ',' << name << ',' << detail_study::fmt(c.beta) << ','
                        << detail_study::fmt(c.eta) << ',' << detail_study::fmt(c.phi) << ','
                        << (c.converged ? 1 : 0) << ',' << detail_study::fmt(c.objective) << ",\n";
                else
                    out << rep << ',' << name << ",,,,0,," << c.error << "\n";
            }
        }
    }

    nlohmann::json summary;
    summary["config"] = cfg.to_json();
    summary["version"] = kVersion;
    const char* pnames[3] = {"beta", "eta", "phi"};
    for (std::size_t m = 0; m < n_methods; ++m) {
        const char* name = cfg.methods[m] == Method::MSPE ? "mspe" : "opbe";
        summary["methods"][name] = detail_study::method_summary(results[m], cfg.theta0);
        for (int p = 0; p < 3; ++p) {
            std::vector<double> vals;
            for (const auto& c : results[m])
                if (c.ok) vals.push_back(p == 0 ? c.beta : p == 1 ? c.eta : c.phi);
            detail_study::write_histogram(cfg.out_dir + "/hist_" + pnames[p] + "_" + name + ".csv",
                                          vals, provenance);
        }
    }
    {
        std::ofstream out(cfg.out_dir + "/summary.json");
        out << summary.dump(2) << "\n";
    }
    return StudySummary{summary};
}

} // namespace cogarch

#endif
