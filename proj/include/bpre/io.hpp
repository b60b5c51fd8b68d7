#pragma once

// JSON serialization of environments and exact-analysis results.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpre/analysis.hpp"
#include "bpre/env.hpp"
#include "bpre/error.hpp"
#include "bpre/explore.hpp"
#include "bpre/tree.hpp"

namespace bpre {

using json = nlohmann::json;

inline json pmf_to_json(const OffspringDist& d) {
    return json(std::vector<double>(d.probs().begin(), d.probs().end()));
}

inline OffspringDist pmf_from_json(const json& j) {
    if (!j.is_array()) fail(ErrorKind::ConfigError, "pmf must be an array of weights");
    std::vector<double> w;
    for (const auto& x : j) {
        if (!x.is_number()) fail(ErrorKind::ConfigError, "pmf weights must be numbers");
        w.push_back(x.get<double>());
    }
    return OffspringDist(w);
}

/// {"variant": "constant", "pmf": [...]}
/// {"variant": "periodic", "period": [[...], ...]}
/// {"variant": "mixture", "components": [[...], ...], "weights": [...], "seed": 7}
inline json env_to_json(const EnvSpec& spec) {
    json j;
    if (const auto* c = std::get_if<ConstantEnv>(&spec)) {
        j["variant"] = "constant";
        j["pmf"] = pmf_to_json(c->dist);
    } else if (const auto* p = std::get_if<PeriodicEnv>(&spec)) {
        j["variant"] = "periodic";
        j["period"] = json::array();
        for (const auto& d : p->period) j["period"].push_back(pmf_to_json(d));
    } else {
        const auto& m = std::get<MixtureEnv>(spec);
        j["variant"] = "mixture";
        j["components"] = json::array();
        for (const auto& d : m.components) j["components"].push_back(pmf_to_json(d));
        j["weights"] = m.weights;
        j["seed"] = m.seed;
    }
    return j;
}

inline EnvSpec env_from_json(const json& j) {
    if (!j.is_object() || !j.contains("variant") || !j["variant"].is_string()) {
        fail(ErrorKind::ConfigError, "environment needs a string \"variant\"");
    }
    const auto variant = j["variant"].get<std::string>();
    auto list = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_array() || j[key].empty()) {
            fail(ErrorKind::ConfigError, std::string("environment needs a nonempty \"") + key + "\"");
        }
        std::vector<OffspringDist> out;
        for (const auto& x : j[key]) out.push_back(pmf_from_json(x));
        return out;
    };
    EnvSpec spec;
    try {
        if (variant == "constant") {
            if (!j.contains("pmf")) fail(ErrorKind::ConfigError, "constant environment needs \"pmf\"");
            spec = ConstantEnv{pmf_from_json(j["pmf"])};
        } else if (variant == "periodic") {
            spec = PeriodicEnv{list("period")};
        } else if (variant == "mixture") {
            MixtureEnv m;
            m.components = list("components");
            if (!j.contains("weights") || !j["weights"].is_array()) {
                fail(ErrorKind::ConfigError, "mixture needs \"weights\"");
            }
            m.weights = j["weights"].get<std::vector<double>>();
            if (j.contains("seed")) m.seed = j["seed"].get<std::uint64_t>();
            spec = std::move(m);
        } else {
            fail(ErrorKind::ConfigError, "unknown environment variant \"" + variant + "\"");
        }
        validate(spec);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ConfigError) throw;
        fail(ErrorKind::ConfigError, e.what());
    } catch (const json::exception& e) {
        fail(ErrorKind::ConfigError, e.what());
    }
    return spec;
}

inline json to_json(const SurvivalTable& t) {
    return json{{"m", t.m},
                {"q", t.q},
                {"phi_terms", t.phi_terms},
                {"survival", t.survival},
                {"survival_phi", t.survival_phi}};
}

inline json to_json(const ConditionReport& r) {
    json j{{"n", r.n}, {"sigma2", r.sigma2}, {"c", r.c}, {"h_n", r.h_n}, {"all_pass", r.all_pass()}};
    j["conditions"] = json::array();
    for (const auto& e : r.entries) {
        j["conditions"].push_back({{"name", e.name},
                                   {"statistic", e.statistic},
                                   {"target", e.target},
                                   {"deviation", e.deviation},
                                   {"tolerance", e.tolerance},
                                   {"pass", e.pass}});
    }
    j["windows"] = json::array();
    for (const auto& w : r.windows) j["windows"].push_back({{"a", w.a}, {"b", w.b}, {"average", w.average}});
    j["large_degree_sums"] = r.large_degree_sums;
    j["large_degree_zero_from"] = r.large_degree_zero_from;
    j["spine_average"] = r.spine_average;
    j["spine_expectation"] = r.spine_expectation;
    j["omega_n"] = r.omega_n;
    j["omega_averages"] = r.omega_averages;
    j["omega_trend_ok"] = r.omega_trend_ok;
    return j;
}

inline json to_json(const BlockTable& t) {
    json j{{"roots_per_block", t.roots_per_block},
           {"block_height", t.block_height},
           {"columns", t.columns},
           {"rows", t.rows},
           {"bad_count", t.bad_count}};
    j["blocks"] = json::array();
    for (const auto& b : t.blocks) {
        j["blocks"].push_back(
            {{"i", b.i}, {"k", b.k}, {"size", b.size}, {"weight", b.weight}, {"good", b.good}});
    }
    return j;
}

inline json to_json(const TreeStats& s) {
    return json{{"height", s.height},
                {"width", s.width},
                {"size", s.size},
                {"generation_sizes", s.generation_sizes},
                {"tree_count", s.tree_count}};
}

inline json to_json(const ExcursionSet& e) {
    json j = json::array();
    for (const auto& x : e.items) {
        j.push_back({{"start", x.start}, {"end", x.end}, {"length", x.length}, {"tree_index", x.tree_index}});
    }
    return j;
}

}  // namespace bpre
