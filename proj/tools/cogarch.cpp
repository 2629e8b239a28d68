// Command-line front end: simulate, moments, estimate, asymvar, study,
// plus brute-force oracle access behind --dev.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cogarch/config.hpp"
#include "cogarch/estimate.hpp"
#include "cogarch/moments.hpp"
#include "cogarch/oracles.hpp"
#include "cogarch/pbef.hpp"
#include "cogarch/simulate.hpp"
#include "cogarch/study.hpp"

namespace {

using namespace cogarch;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

Theta parse_theta_triple(const std::string& s) {
    double v[3];
    char c1 = 0, c2 = 0;
    std::istringstream in(s);
    if (!(in >> v[0] >> c1 >> v[1] >> c2 >> v[2]) || c1 != ',' || c2 != ',')
        throw config_error("expected theta as \"beta,eta,phi\", got \"" + s + "\"");
    try {
        return Theta(v[0], v[1], v[2]);
    } catch (const std::invalid_argument& e) {
        throw config_error(e.what());
    }
}

LevyModel load_model(const std::string& path) {
    return parse_model(detail_cfg::load_json(path));
}

ReturnsSample load_returns(const std::string& path, double lag_r) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open data file: " + path);
    ReturnsSample s;
    s.lag_r = lag_r;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.find_first_of("0123456789+-.") != 0) continue;
        s.values.push_back(std::stod(line));
    }
    if (s.values.empty()) throw config_error("data file has no numeric rows: " + path);
    return s;
}

nlohmann::json matrix_json(const Eigen::Matrix3d& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < 3; ++i) rows.push_back({m(i, 0), m(i, 1), m(i, 2)});
    return rows;
}

int run(int argc, char** argv) {
    CLI::App app{"COGARCH(1,1): simulation, exact moments and PBEF estimation"};
    app.require_subcommand(1);

    std::string model_path, theta_str = "0.04,0.053,0.038", out_path, data_path, config_path;
    std::string method_str = "mspe", init_str = "0.04,0.053,0.038";
    std::int64_t n_obs = 1000;
    double lag_r = 1.0, burn_in = -1.0;
    int refine = 1000, q = 1, trunc_k = 0;
    std::uint64_t seed = 1;
    bool dev = false;
    std::vector<std::string> moment_specs;

    auto* sim = app.add_subcommand("simulate", "simulate equally spaced returns");
    sim->add_option("--config", model_path, "model JSON file")->required();
    sim->add_option("--theta", theta_str, "beta,eta,phi");
    sim->add_option("--n", n_obs, "number of returns");
    sim->add_option("--lag-r", lag_r, "observation spacing");
    sim->add_option("--refine", refine, "fine steps per lag");
    sim->add_option("--burn-in", burn_in, "burn-in time units (default 20/(-Psi(1)))");
    sim->add_option("--seed", seed, "RNG seed");
    sim->add_option("--out", out_path, "output CSV (JSON sidecar written alongside)")->required();

    auto* mom = app.add_subcommand("moments", "print stationary product moments as CSV");
    mom->add_option("--config", model_path, "model JSON file")->required();
    mom->add_option("--theta", theta_str, "beta,eta,phi");
    mom->add_option("--spec", moment_specs, "moment spec k,i,h,d (repeatable)")->required();

    auto* est = app.add_subcommand("estimate", "fit theta from a returns sample");
    est->add_option("--config", model_path, "model JSON file")->required();
    est->add_option("--data", data_path, "returns CSV")->required();
    est->add_option("--method", method_str, "mspe|opbe");
    est->add_option("--q", q, "predictor order");
    est->add_option("--trunc-K", trunc_k, "M-matrix truncation (opbe)");
    est->add_option("--init", init_str, "initial beta,eta,phi");
    est->add_option("--lag-r", lag_r, "observation spacing of the data");
    est->add_option("--seed", seed, "multistart jitter seed");

    auto* av = app.add_subcommand("asymvar", "asymptotic variance matrix as CSV");
    av->add_option("--config", model_path, "model JSON file")->required();
    av->add_option("--theta", theta_str, "beta,eta,phi");
    av->add_option("--method", method_str, "mspe|opbe");
    av->add_option("--q", q, "predictor order");
    av->add_option("--trunc-K", trunc_k, "M truncation in the weights (opbe)");
    int var_k = 400;
    av->add_option("--var-K", var_k, "M truncation in the variance");
    av->add_option("--lag-r", lag_r, "observation spacing");

    auto* study = app.add_subcommand("study", "replication study from a config file");
    study->add_option("--config", config_path, "study JSON config")->required();

    auto* orc = app.add_subcommand("oracle", "brute-force reference values (dev only)");
    orc->add_flag("--dev", dev, "enable development oracles");
    int ok = 1, oi = 0;
    double ot = 1.0;
    orc->add_option("--k", ok);
    orc->add_option("--i", oi);
    orc->add_option("--t", ot);
    orc->add_option("--config", model_path, "model JSON file")->required();
    orc->add_option("--theta", theta_str, "beta,eta,phi");

    CLI11_PARSE(app, argc, argv);

    if (sim->parsed()) {
        const LevyModel model = load_model(model_path);
        const Theta theta = parse_theta_triple(theta_str);
        SimConfig cfg;
        cfg.n_obs = n_obs;
        cfg.lag_r = lag_r;
        cfg.refine = refine;
        cfg.seed = seed;
        if (burn_in >= 0.0) cfg.burn_in = burn_in;
        const ReturnsSample sample = simulate_path(model, theta, cfg);
        std::ofstream out(out_path);
        if (!out) throw config_error("cannot write " + out_path);
        for (double v : sample.values) out << fmt(v) << "\n";
        nlohmann::json side = {{"model", model_to_json(model)},
                               {"theta", theta_to_json(theta)},
                               {"n_obs", cfg.n_obs},
                               {"lag_r", cfg.lag_r},
                               {"refine", cfg.refine},
                               {"burn_in", cfg.burn_in ? *cfg.burn_in
                                                       : 20.0 / (-psi(model, theta, 1))},
                               {"seed", cfg.seed},
                               {"version", kVersion}};
        std::ofstream sideout(out_path + ".json");
        sideout << side.dump(2) << "\n";
        return 0;
    }

    if (mom->parsed()) {
        const LevyModel model = load_model(model_path);
        const Theta theta = parse_theta_triple(theta_str);
        MomentCache cache(model, theta, 4);
        std::cout << "k,i,h,d,value\n";
        for (const auto& spec : moment_specs) {
            int k = 0, i = 0;
            double h = 0.0, d = 0.0;
            char c;
            std::istringstream in(spec);
            if (!(in >> k >> c >> i >> c >> h >> c >> d))
                throw config_error("bad moment spec \"" + spec + "\" (expected k,i,h,d)");
            // stationary E( G_{s,h}^{2i} sigma^{2(k-i)}_{s+h} )
            long double val = 0.0L;
            for (int r = 0; r <= k; ++r)
                val += cache.jtable().at(k, i, r).eval(h, d) * cache.stationary_sigma_moment(r);
            std::cout << k << ',' << i << ',' << fmt(h) << ',' << fmt(d) << ','
                      << fmt(static_cast<double>(val)) << "\n";
        }
        return 0;
    }

    if (est->parsed()) {
        const LevyModel model = load_model(model_path);
        const ReturnsSample sample = load_returns(data_path, lag_r);
        const Theta init = parse_theta_triple(init_str);
        EstimateOptions opt;
        opt.truncation_K = trunc_k;
        opt.seed = seed;
        opt.with_asymptotic_cov = true;
        const auto res = estimate(sample, model, parse_method(method_str), q, init, opt);
        nlohmann::json j = {{"theta_hat", theta_to_json(res.theta_hat)},
                            {"objective_value", res.objective_value},
                            {"iterations", res.iterations},
                            {"converged", res.converged},
                            {"method", method_str},
                            {"q", q},
                            {"trunc_K", trunc_k},
                            {"version", kVersion}};
        if (res.asymptotic_cov) j["asymptotic_cov"] = matrix_json(*res.asymptotic_cov);
        std::cout << j.dump(2) << "\n";
        return 0;
    }

    if (av->parsed()) {
        const LevyModel model = load_model(model_path);
        const Theta theta = parse_theta_triple(theta_str);
        const Eigen::Matrix3d V =
            asymptotic_variance(model, theta, q, lag_r, parse_method(method_str), trunc_k, var_k);
        for (int i = 0; i < 3; ++i)
            std::cout << fmt(V(i, 0)) << ',' << fmt(V(i, 1)) << ',' << fmt(V(i, 2)) << "\n";
        return 0;
    }

    if (study->parsed()) {
        run_study(parse_study_config(config_path));
        return 0;
    }

    if (orc->parsed()) {
        if (!dev) throw config_error("oracle subcommand requires --dev");
        const LevyModel model = load_model(model_path);
        const Theta theta = parse_theta_triple(theta_str);
        std::cout << fmt(oracles::nested_j_quadrature(model, theta, ok, oi, ot)) << "\n";
        return 0;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const cogarch::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
