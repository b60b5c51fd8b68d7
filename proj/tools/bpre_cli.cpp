// bpre: command-line front end for the branching-process toolkit.
//
//   bpre <subcommand> --config cfg.json [--seed S] [--n N] [--replicates R]
//        [--out DIR] [--format json|csv] [--threads T]
//
// Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
// 3 runtime error.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "bpre/analysis.hpp"
#include "bpre/experiments.hpp"
#include "bpre/explore.hpp"
#include "bpre/io.hpp"
#include "bpre/tree.hpp"

namespace fs = std::filesystem;
using namespace bpre;

namespace {

constexpr int kSchemaVersion = 1;

struct Options {
    std::string command;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n;
    std::optional<std::size_t> replicates;
    std::optional<unsigned> threads;
    std::string out;
    std::string format = "json";
};

ExperimentConfig load_config(const Options& o) {
    if (o.config_path.empty()) fail(ErrorKind::ConfigError, "no --config given");
    std::ifstream in(o.config_path);
    if (!in) fail(ErrorKind::ConfigError, "cannot open config file " + o.config_path);
    ExperimentConfig cfg;
    try {
        const json j = json::parse(in);
        if (!j.is_object()) fail(ErrorKind::ConfigError, "top level must be an object");
        for (const auto& [key, _] : j.items()) {
            static const char* known[] = {"schema_version", "env", "n", "replicates", "seed", "annealed", "params"};
            if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
                std::end(known)) {
                fail(ErrorKind::ConfigError, "unknown key \"" + key + "\"");
            }
        }
        if (!j.contains("schema_version") || j["schema_version"] != kSchemaVersion) {
            fail(ErrorKind::ConfigError, "schema_version must be 1");
        }
        if (!j.contains("env")) fail(ErrorKind::ConfigError, "missing \"env\"");
        cfg.env = env_from_json(j["env"]);
        if (j.contains("n")) cfg.n = j["n"].get<std::size_t>();
        if (j.contains("replicates")) cfg.replicates = j["replicates"].get<std::size_t>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("annealed")) cfg.annealed = j["annealed"].get<bool>();
        if (j.contains("params")) {
            if (!j["params"].is_object()) fail(ErrorKind::ConfigError, "\"params\" must be an object");
            cfg.params = j["params"];
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::ConfigError, e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ConfigError) throw;
        fail(ErrorKind::ConfigError, e.what());
    }
    if (o.seed) cfg.seed = *o.seed;
    if (o.n) cfg.n = *o.n;
    if (o.replicates) cfg.replicates = *o.replicates;
    if (o.threads) cfg.threads = *o.threads;
    return cfg;
}

ConditionParams condition_params(const ExperimentConfig& cfg) {
    ConditionParams p;
    const json& j = cfg.params;
    if (j.contains("sigma2_target")) p.sigma2_target = j["sigma2_target"].get<double>();
    if (j.contains("c_candidate")) p.c_candidate = j["c_candidate"].get<double>();
    p.h_exponent = cfg.param("h_exponent", p.h_exponent);
    p.eps_large_degrees = cfg.param("eps_large_degrees", p.eps_large_degrees);
    p.eps_omega = cfg.param("eps_omega", p.eps_omega);
    p.n_omega = cfg.param("n_omega", p.n_omega);
    p.omega_grid = cfg.param("omega_grid", p.omega_grid);
    p.spine_seed = cfg.param("spine_seed", cfg.seed);
    p.tol_variance = cfg.param("tol_variance", p.tol_variance);
    p.tol_nondegeneracy = cfg.param("tol_nondegeneracy", p.tol_nondegeneracy);
    p.tol_large_degrees = cfg.param("tol_large_degrees", p.tol_large_degrees);
    p.tol_spine = cfg.param("tol_spine", p.tol_spine);
    p.tol_omega = cfg.param("tol_omega", p.tol_omega);
    return p;
}

/// Primary data goes to DIR/<command>.<format> with --out, otherwise to stdout.
class Sink {
public:
    Sink(const Options& o) : o_(o) {
        if (!o.out.empty()) fs::create_directories(o.out);
    }

    template <typename Writer>
    void data(Writer&& write) {
        if (o_.out.empty()) {
            write(std::cout);
            return;
        }
        const fs::path p = fs::path(o_.out) / (o_.command + "." + o_.format);
        std::ofstream f(p, std::ios::binary);
        write(f);
        if (!f) fail(ErrorKind::BadParameters, "cannot write " + p.string());
    }

    void json_data(const json& j) {
        data([&](std::ostream& os) { os << j.dump(2) << '\n'; });
    }

    void meta(const json& j) {
        if (o_.out.empty()) return;
        std::ofstream f(fs::path(o_.out) / (o_.command + ".meta.json"), std::ios::binary);
        f << j.dump(2) << '\n';
    }

    bool csv() const { return o_.format == "csv"; }

private:
    const Options& o_;
};

json host_metadata(const std::string& command, double wall) {
    return json{{"command", command},
                {"wall_seconds", wall},
                {"hardware_threads", std::thread::hardware_concurrency()}};
}

int print_checks(const Report& rep) {
    for (const auto& c : rep.checks) {
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << std::setprecision(6) << c.statistic << ' '
                  << c.relation << ' ' << c.threshold << '\n';
    }
    return rep.all_pass() ? 0 : 1;
}

int run_experiment(const Options& o, const ExperimentConfig& cfg) {
    Report rep;
    if (o.command == "donsker") rep = donsker_experiment(cfg);
    else if (o.command == "ratio") rep = ratio_experiment(cfg);
    else if (o.command == "variance-avg") rep = variance_averaging_experiment(cfg);
    else if (o.command == "spine-lln") rep = spine_lln_experiment(cfg);
    else if (o.command == "geiger-id") rep = geiger_identity_experiment(cfg);
    else rep = crt_functional_experiment(cfg);
    const int code = print_checks(rep);
    if (!o.out.empty()) {
        Sink sink(o);
        if (sink.csv()) sink.data([&](std::ostream& os) { rep.write_csv(os); });
        else sink.json_data(rep.to_json());
        json meta = rep.metadata_json();
        meta["hardware_threads"] = std::thread::hardware_concurrency();
        sink.meta(meta);
    }
    return code;
}

int run_sample_tree(const Options& o, const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const EnvStream env(cfg.env);
    Rng rng(derive_seed(cfg.seed, {0x7ee}));
    const std::size_t cap = cfg.param<std::size_t>("max_tree_size", kDefaultTreeNodeCap);
    PlaneTree tree;
    if (o.n) {
        ConditionOptions opt;
        opt.node_cap = cap;
        tree = conditioned_tree(env, *o.n, rng, opt);
    } else {
        tree = sample_tree(env, 0, cap, rng);
    }
    Sink sink(o);
    if (sink.csv()) {
        sink.data([&](std::ostream& os) {
            os << "label,parent,height,children\r\n";
            for (std::size_t v = 0; v < tree.size(); ++v) {
                const auto id = static_cast<NodeId>(v);
                os << v << ',' << tree.parent(id) << ',' << tree.height(id) << ',' << tree.child_count(id)
                   << "\r\n";
            }
        });
    } else {
        json j = to_json(tree_stats(tree));
        j["seed"] = cfg.seed;
        j["degrees"] = std::vector<std::uint32_t>(tree.degrees().begin(), tree.degrees().end());
        sink.json_data(j);
    }
    sink.meta(host_metadata(o.command, detail::seconds_since(t0)));
    return 0;
}

int run_explore(const Options& o, const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const EnvStream env(cfg.env);
    Rng rng(derive_seed(cfg.seed, {0xe8}));
    const auto path = sample_exploration(env, cfg.n, rng);
    Sink sink(o);
    if (sink.csv()) {
        sink.data([&](std::ostream& os) { write_path_csv(os, path); });
    } else {
        const double sigma2 = cfg.param("sigma2", env.sigma2());
        const auto bad = bad_vertices(path, cfg.param("eps", 0.2), sigma2, false);
        sink.json_data(json{{"seed", cfg.seed},
                            {"n", cfg.n},
                            {"L", path.L},
                            {"X", path.X},
                            {"I", path.I},
                            {"H", path.H},
                            {"excursions", to_json(excursions(path))},
                            {"bad_fraction", bad.fraction}});
    }
    sink.meta(host_metadata(o.command, detail::seconds_since(t0)));
    return 0;
}

int run_survival(const Options& o, const ExperimentConfig& cfg) {
    const EnvStream env(cfg.env);
    const std::size_t m = o.n ? *o.n : cfg.param<std::size_t>("m", cfg.n);
    const auto t = survival_exact(env, m);
    std::cout << std::setprecision(17) << "P(h≥" << m << ")=" << t.survival << '\n';
    if (!o.out.empty()) {
        Sink sink(o);
        if (sink.csv()) {
            sink.data([&](std::ostream& os) {
                os << std::setprecision(17) << "k,q,phi_term\r\n";
                for (std::size_t k = 0; k <= m; ++k) {
                    os << k << ',' << t.q[k] << ',';
                    if (k < m) os << t.phi_terms[k];
                    os << "\r\n";
                }
            });
        } else {
            sink.json_data(to_json(t));
        }
    }
    return 0;
}

int run_check_conditions(const Options& o, const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const EnvStream env(cfg.env);
    const auto r = check_conditions(env, cfg.n, condition_params(cfg));
    for (const auto& e : r.entries) {
        std::cout << (e.pass ? "PASS " : "FAIL ") << e.name << ": " << std::setprecision(6) << e.statistic
                  << " (target " << e.target << ", deviation " << e.deviation << " <= " << e.tolerance << ")\n";
    }
    if (!o.out.empty()) {
        Sink sink(o);
        if (sink.csv()) {
            sink.data([&](std::ostream& os) {
                os << std::setprecision(17) << "name,statistic,target,deviation,tolerance,pass\r\n";
                for (const auto& e : r.entries) {
                    os << '"' << e.name << "\"," << e.statistic << ',' << e.target << ',' << e.deviation << ','
                       << e.tolerance << ',' << (e.pass ? 1 : 0) << "\r\n";
                }
            });
        } else {
            sink.json_data(to_json(r));
        }
        sink.meta(host_metadata(o.command, detail::seconds_since(t0)));
    }
    return r.all_pass() ? 0 : 1;
}

int run_blocks(const Options& o, const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const EnvStream env(cfg.env);
    Rng rng(derive_seed(cfg.seed, {0xb10c}));
    const auto forest = sample_forest_until(env, cfg.n, rng);
    const auto t = blocks(forest, env, cfg.n, cfg.param("delta", 0.1), cfg.param("gamma", 0.1),
                          cfg.param("sigma2", env.sigma2()), cfg.param("eps", 0.01));
    Sink sink(o);
    if (sink.csv()) {
        sink.data([&](std::ostream& os) {
            os << std::setprecision(17) << "i,k,size,weight,good\r\n";
            for (const auto& b : t.blocks) {
                os << b.i << ',' << b.k << ',' << b.size << ',' << b.weight << ',' << (b.good ? 1 : 0) << "\r\n";
            }
        });
    } else {
        json j = to_json(t);
        j["seed"] = cfg.seed;
        j["forest"] = to_json(tree_stats(forest));
        sink.json_data(j);
    }
    sink.meta(host_metadata(o.command, detail::seconds_since(t0)));
    return 0;
}

int dispatch(const Options& o) {
    // The environment is validated while loading; experiments validate the
    // remaining fields before any sampling starts.
    const ExperimentConfig cfg = load_config(o);
    if (o.command == "sample-tree") return run_sample_tree(o, cfg);
    if (o.command == "explore") return run_explore(o, cfg);
    if (o.command == "survival") return run_survival(o, cfg);
    if (o.command == "check-conditions") return run_check_conditions(o, cfg);
    if (o.command == "blocks") return run_blocks(o, cfg);
    return run_experiment(o, cfg);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and exact analysis of critical branching processes in varying or random environment"};
    app.require_subcommand(1);
    Options o;

    const std::pair<const char*, const char*> commands[] = {
        {"sample-tree", "sample one tree (conditioned on size >= --n if given)"},
        {"explore", "depth-first exploration path of the first n vertices"},
        {"survival", "exact P(h >= m) with m = --n"},
        {"check-conditions", "numerical evidence for conditions I-V on the environment prefix"},
        {"donsker", "marginals of the rescaled Lukasiewicz path"},
        {"ratio", "height process versus (2/sigma^2)(X - I), and eps-bad vertices"},
        {"variance-avg", "variance averaging along the exploration"},
        {"spine-lln", "law of large numbers for the spine position"},
        {"geiger-id", "Geiger tree identity, shape by shape"},
        {"crt-test", "rescaled conditioned-tree functionals against an oracle environment"},
        {"blocks", "(n, delta, gamma)-block table of a sampled forest"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", o.config_path, "JSON config (see docs/config-schema.md)");
        sub->add_option("--seed", o.seed, "master seed, overrides the config");
        sub->add_option("--n", o.n, "size parameter, overrides the config");
        sub->add_option("--replicates", o.replicates, "replicate count, overrides the config");
        sub->add_option("--threads", o.threads, "worker threads (0: hardware parallelism)");
        sub->add_option("--out", o.out, "output directory; without it data goes to stdout");
        sub->add_option("--format", o.format, "output format")->check(CLI::IsMember({"json", "csv"}));
        sub->callback([&o, sub] { o.command = sub->get_name(); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        return dispatch(o);
    } catch (const Error& e) {
        std::cerr << "bpre: " << e.what() << '\n';
        return e.kind() == ErrorKind::ConfigError ? 2 : 3;
    } catch (const json::exception& e) {
        std::cerr << "bpre: ConfigError: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "bpre: " << e.what() << '\n';
        return 3;
    }
}
