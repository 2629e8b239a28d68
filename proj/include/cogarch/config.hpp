#ifndef COGARCH_CONFIG_HPP
#define COGARCH_CONFIG_HPP

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cogarch/common.hpp"
#include "cogarch/levy.hpp"
#include "cogarch/pbef.hpp"

namespace cogarch {

namespace detail_cfg {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw config_error(where + ": unknown key \"" + it.key() + "\"");
}

inline nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error(path + ": " + e.what());
    }
}

} // namespace detail_cfg

/// Model spec: {"family": "variance_gamma", "C": 1.0} or
/// {"family": "compound_poisson_normal", "rate": 1.0}.
inline LevyModel parse_model(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("family"))
        throw config_error("model: expected an object with a \"family\" key");
    const std::string family = j.at("family").get<std::string>();
    try {
        if (family == "variance_gamma") {
            detail_cfg::reject_unknown_keys(j, {"family", "C"}, "model");
            return LevyModel::variance_gamma(j.value("C", 1.0));
        }
        if (family == "compound_poisson_normal") {
            detail_cfg::reject_unknown_keys(j, {"family", "rate"}, "model");
            return LevyModel::compound_poisson_normal(j.value("rate", 1.0));
        }
    } catch (const std::invalid_argument& e) {
        throw config_error(std::string("model: ") + e.what());
    }
    throw config_error("model: unknown family \"" + family + "\"");
}

inline nlohmann::json model_to_json(const LevyModel& m) {
    if (m.family() == LevyModel::Family::VarianceGamma)
        return {{"family", "variance_gamma"}, {"C", m.vg_c()}};
    return {{"family", "compound_poisson_normal"}, {"rate", m.cpn_rate()}};
}

inline Theta parse_theta(const nlohmann::json& j) {
    if (!j.is_object()) throw config_error("theta: expected an object");
    detail_cfg::reject_unknown_keys(j, {"beta", "eta", "phi"}, "theta");
    try {
        return Theta(j.at("beta").get<double>(), j.at("eta").get<double>(),
                     j.at("phi").get<double>());
    } catch (const std::invalid_argument& e) {
        throw config_error(std::string("theta: ") + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("theta: ") + e.what());
    }
}

inline nlohmann::json theta_to_json(const Theta& t) {
    return {{"beta", t.beta}, {"eta", t.eta}, {"phi", t.phi}};
}

/// Replication-study configuration (JSON file, strict keys).
struct StudyConfig {
    LevyModel model = LevyModel::variance_gamma(1.0);
    Theta theta0{0.04, 0.053, 0.038};
    std::int64_t n_obs = 5000;
    double lag_r = 1.0;
    int refine = 1000;
    std::int64_t replications = 1;
    std::vector<Method> methods{Method::MSPE};
    int q = 1;
    int trunc_K = 0;
    std::uint64_t seed = 1;
    int workers = 1;
    std::string out_dir = "study_out";

    nlohmann::json to_json() const {
        nlohmann::json methods_j = nlohmann::json::array();
        for (auto m : methods) methods_j.push_back(m == Method::MSPE ? "mspe" : "opbe");
        return {{"model", model_to_json(model)}, {"theta0", theta_to_json(theta0)},
                {"n_obs", n_obs},               {"lag_r", lag_r},
                {"refine", refine},             {"replications", replications},
                {"methods", methods_j},         {"q", q},
                {"trunc_K", trunc_K},           {"seed", seed},
                {"workers", workers},           {"out_dir", out_dir}};
    }
};

inline Method parse_method(const std::string& name) {
    if (name == "mspe") return Method::MSPE;
    if (name == "opbe") return Method::OPBE;
    throw config_error("unknown method \"" + name + "\" (expected mspe or opbe)");
}

inline StudyConfig parse_study_config(const std::string& path) {
    const nlohmann::json j = detail_cfg::load_json(path);
    detail_cfg::reject_unknown_keys(j,
                                    {"model", "theta0", "n_obs", "lag_r", "refine", "replications",
                                     "methods", "q", "trunc_K", "seed", "workers", "out_dir"},
                                    path);
    StudyConfig cfg;
    if (!j.contains("model")) throw config_error(path + ": missing \"model\"");
    if (!j.contains("theta0")) throw config_error(path + ": missing \"theta0\"");
    cfg.model = parse_model(j.at("model"));
    cfg.theta0 = parse_theta(j.at("theta0"));
    try {
        cfg.n_obs = j.value("n_obs", cfg.n_obs);
        cfg.lag_r = j.value("lag_r", cfg.lag_r);
        cfg.refine = j.value("refine", cfg.refine);
        cfg.replications = j.value("replications", cfg.replications);
        cfg.q = j.value("q", cfg.q);
        cfg.trunc_K = j.value("trunc_K", cfg.trunc_K);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.workers = j.value("workers", cfg.workers);
        cfg.out_dir = j.value("out_dir", cfg.out_dir);
        if (j.contains("methods")) {
            cfg.methods.clear();
            for (const auto& m : j.at("methods"))
                cfg.methods.push_back(parse_method(m.get<std::string>()));
        }
    } catch (const nlohmann::json::exception& e) {
        throw config_error(path + ": " + e.what());
    }
    if (cfg.replications < 1) throw config_error(path + ": replications must be >= 1");
    if (cfg.methods.empty()) throw config_error(path + ": methods must be non-empty");
    if (cfg.workers < 1) throw config_error(path + ": workers must be >= 1");
    if (cfg.n_obs <= cfg.q) throw config_error(path + ": n_obs must exceed q");
    if (cfg.refine < 1) throw config_error(path + ": refine must be >= 1");
    if (!(cfg.lag_r > 0.0)) throw config_error(path + ": lag_r must be positive");
    return cfg;
}

} // namespace cogarch

#endif
