#pragma once

// Monte Carlo experiments for the scaling limits of strictly critical
// branching processes in random environment. Every experiment is a pure
// function of its ExperimentConfig: replicate r draws from substreams keyed
// by (seed, experiment tag, r), so reports are bit-identical across runs
// and thread counts.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpre/env.hpp"
#include "bpre/error.hpp"
#include "bpre/explore.hpp"
#include "bpre/io.hpp"
#include "bpre/rng.hpp"
#include "bpre/stats.hpp"
#include "bpre/tree.hpp"

namespace bpre {

struct ExperimentConfig {
    EnvSpec env = ConstantEnv{OffspringDist(std::vector<double>{0.5, 0.0, 0.5})};
    std::size_t n = 10000;
    std::size_t replicates = 100;
    std::uint64_t seed = 1;
    bool annealed = false;  // resample the mixture environment per replicate
    unsigned threads = 0;   // 0: hardware concurrency
    json params = json::object();

    template <typename T>
    T param(const char* key, T fallback) const {
        if (params.contains(key)) return params.at(key).get<T>();
        return fallback;
    }

    void validate() const {
        if (replicates < 1) fail(ErrorKind::ConfigError, "replicates must be >= 1");
        if (n < 10) fail(ErrorKind::ConfigError, "n must be >= 10");
        bpre::validate(env);
    }
};

struct Check {
    std::string name;
    double statistic = 0.0;
    std::string relation;  // "<", "<=" or ">="
    double threshold = 0.0;
    bool pass = false;
};

struct Report {
    std::string experiment;
    std::uint64_t seed = 0;
    json config;
    std::vector<std::string> columns;
    std::vector<std::string> row_labels;  // optional, one per row
    std::vector<std::vector<double>> rows;
    json results = json::object();
    std::vector<Check> checks;
    double wall_seconds = 0.0;  // metadata, not part of to_json()

    bool all_pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
    }

    std::vector<double> column(const std::string& name) const {
        const auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) fail(ErrorKind::BadParameters, "no column " + name);
        const auto c = static_cast<std::size_t>(it - columns.begin());
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[c]);
        return out;
    }

    void check(std::string name, double stat, const std::string& rel, double threshold) {
        bool ok = false;
        if (rel == "<") ok = stat < threshold;
        else if (rel == "<=") ok = stat <= threshold;
        else if (rel == ">=") ok = stat >= threshold;
        else if (rel == ">") ok = stat > threshold;
        checks.push_back({std::move(name), stat, rel, threshold, ok});
    }

    /// Scientific output only; identical for identical (config, seed).
    json to_json() const {
        json j;
        j["experiment"] = experiment;
        j["seed"] = seed;
        j["config"] = config;
        json summary = json::object();
        for (std::size_t c = 0; c < columns.size(); ++c) {
            std::vector<double> col;
            for (const auto& r : rows) col.push_back(r[c]);
            const auto s = stats::summarize(col);
            summary[columns[c]] = {{"n", s.n},     {"mean", s.mean},     {"se", s.se},
                                   {"sd", s.sd},   {"min", s.min},       {"q05", s.q05},
                                   {"median", s.median}, {"q95", s.q95}, {"max", s.max}};
        }
        j["summary"] = summary;
        j["results"] = results;
        j["checks"] = json::array();
        for (const auto& c : checks) {
            j["checks"].push_back({{"name", c.name},
                                   {"statistic", c.statistic},
                                   {"relation", c.relation},
                                   {"threshold", c.threshold},
                                   {"pass", c.pass}});
        }
        j["pass"] = all_pass();
        j["note"] = "finite-n thresholds are engineering calibrations; no convergence rates are known";
        return j;
    }

    json metadata_json() const {
        return json{{"experiment", experiment}, {"wall_seconds", wall_seconds}};
    }

    void write_csv(std::ostream& os) const {
        auto old = os.precision(17);
        if (!row_labels.empty()) os << "label,";
        else os << "replicate,";
        for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
        os << "\r\n";
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (!row_labels.empty()) os << '"' << row_labels[r] << "\",";
            else os << r << ',';
            for (std::size_t c = 0; c < rows[r].size(); ++c) os << (c ? "," : "") << rows[r][c];
            os << "\r\n";
        }
        os.precision(old);
    }
};

inline json config_to_json(const ExperimentConfig& cfg) {
    return json{{"env", env_to_json(cfg.env)},  {"n", cfg.n},
                {"replicates", cfg.replicates}, {"seed", cfg.seed},
                {"annealed", cfg.annealed},     {"params", cfg.params}};
}

namespace detail {

enum Tag : std::uint64_t {
    kDonsker = 0xD0,
    kRatio = 0xD1,
    kVarianceAvg = 0xD2,
    kSpine = 0xD3,
    kGeiger = 0xD4,
    kCrt = 0xD5,
    kEnvSeed = 0xE0,
};

inline Rng replicate_rng(const ExperimentConfig& cfg, std::uint64_t tag,
                         std::initializer_list<std::uint64_t> ids) {
    std::uint64_t h = derive_seed(cfg.seed, {tag});
    for (auto id : ids) h = derive_seed(h, {id});
    return Rng(h);
}

/// Environment of replicate r: the configured (quenched) one, or a fresh
/// mixture seed per replicate when annealed.
inline EnvStream replicate_env(const ExperimentConfig& cfg, const EnvStream& env,
                               std::uint64_t tag, std::size_t r) {
    if (!cfg.annealed || !env.is_mixture()) return env;
    return env.reseeded(derive_seed(cfg.seed, {kEnvSeed, tag, r}));
}

inline double sigma2_of(const ExperimentConfig& cfg, const EnvStream& env) {
    const double s2 = cfg.param("sigma2", env.sigma2());
    if (!(s2 > 0)) fail(ErrorKind::BadParameters, "sigma^2 must be positive");
    return s2;
}

inline Report start_report(const std::string& name, const ExperimentConfig& cfg) {
    cfg.validate();
    Report r;
    r.experiment = name;
    r.seed = cfg.seed;
    r.config = config_to_json(cfg);
    return r;
}

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline double fraction_below(const std::vector<double>& xs, double bound) {
    std::size_t k = 0;
    for (double x : xs) k += std::abs(x) < bound ? 1 : 0;
    return xs.empty() ? 0.0 : static_cast<double>(k) / static_cast<double>(xs.size());
}

}  // namespace detail

/// Terminal and intermediate marginals of X_{floor(nt)} / (sigma sqrt n) and of
/// the reflected path; KS against the standard normal and half-normal laws.
inline Report donsker_experiment(const ExperimentConfig& cfg) {
    const auto t0 = detail::Clock::now();
    Report rep = detail::start_report("donsker", cfg);
    const EnvStream env(cfg.env);
    require_strictly_critical(env);
    const double sigma = std::sqrt(detail::sigma2_of(cfg, env));
    const auto grid = cfg.param<std::vector<double>>("t_grid", {0.25, 0.5, 0.75});
    const double ks_max = cfg.param("ks_threshold", 0.05);
    const std::size_t n = cfg.n;
    const double scale = sigma * std::sqrt(static_cast<double>(n));

    rep.columns = {"x_terminal", "reflected_terminal"};
    for (double t : grid) {
        std::ostringstream name;
        name << "x_t" << t;
        rep.columns.push_back(name.str());
    }
    rep.rows.assign(cfg.replicates, std::vector<double>(rep.columns.size()));
    stats::parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
        const EnvStream env_r = detail::replicate_env(cfg, env, detail::kDonsker, r);
        Rng rng = detail::replicate_rng(cfg, detail::kDonsker, {r});
        const auto path = sample_exploration(env_r, n, rng);
        auto& row = rep.rows[r];
        row[0] = static_cast<double>(path.X[n]) / scale;
        row[1] = static_cast<double>(path.reflected(n)) / scale;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const auto idx = static_cast<std::size_t>(std::floor(grid[g] * static_cast<double>(n)));
            row[2 + g] = static_cast<double>(path.X[idx]) / scale;
        }
    });

    auto x = rep.column("x_terminal");
    auto y = rep.column("reflected_terminal");
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double ks_x = stats::ks_statistic(x, stats::normal_cdf);
    const double ks_y = stats::ks_statistic(y, stats::half_normal_cdf);
    rep.results["ks_terminal_normal"] = ks_x;
    rep.results["ks_terminal_normal_pvalue"] = stats::ks_pvalue(ks_x, x.size());
    rep.results["ks_reflected_halfnormal"] = ks_y;
    rep.results["ks_reflected_halfnormal_pvalue"] = stats::ks_pvalue(ks_y, y.size());

    // E[(X_n / (sigma sqrt n))^2] -> 1.
    std::vector<double> sq;
    for (double v : x) sq.push_back(v * v);
    const auto s2 = stats::summarize(sq);
    rep.results["second_moment"] = s2.mean;
    rep.results["second_moment_se"] = s2.se;
    json marg = json::array();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto col = rep.column(rep.columns[2 + g]);
        const auto s = stats::summarize(col);
        marg.push_back({{"t", grid[g]}, {"variance", s.sd * s.sd}, {"expected", grid[g]}});
    }
    rep.results["marginal_variance"] = marg;

    rep.check("KS(X_n/(sigma sqrt n), N(0,1))", ks_x, "<", ks_max);
    rep.check("KS((X_n-I_n)/(sigma sqrt n), |N(0,1)|)", ks_y, "<", ks_max);
    rep.check("|E[(X_n/(sigma sqrt n))^2] - 1| in SE", std::abs(s2.mean - 1.0) / s2.se, "<=",
              cfg.param("second_moment_se_multiple", 3.0));
    rep.wall_seconds = detail::seconds_since(t0);
    return rep;
}

/// Discrepancy between the height process and (2/sigma^2)(X - I), plus the
/// fraction of eps-bad vertices at the largest n.
inline Report ratio_experiment(const ExperimentConfig& cfg) {
    const auto t0 = detail::Clock::now();
    Report rep = detail::start_report("ratio", cfg);
    const EnvStream env(cfg.env);
    require_strictly_critical(env);
    const double sigma2 = detail::sigma2_of(cfg, env);
    auto n_values = cfg.param<std::vector<std::size_t>>(
        "n_values", {std::max<std::size_t>(cfg.n / 100, 10), std::max<std::size_t>(cfg.n / 10, 10), cfg.n});
    std::sort(n_values.begin(), n_values.end());
    const double eps = cfg.param("eps", 0.2);
    const double bad_freq = cfg.param("bad_frequency", 0.9);

    for (auto nv : n_values) rep.columns.push_back("D_" + std::to_string(nv));
    rep.columns.push_back("bad_fraction");
    rep.columns.push_back("correlation");
    rep.rows.assign(cfg.replicates, std::vector<double>(rep.columns.size()));
    stats::parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
        const EnvStream env_r = detail::replicate_env(cfg, env, detail::kRatio, r);
        auto& row = rep.rows[r];
        for (std::size_t j = 0; j < n_values.size(); ++j) {
            Rng rng = detail::replicate_rng(cfg, detail::kRatio, {r, j});
            const auto path = sample_exploration(env_r, n_values[j], rng);
            double d = 0.0;
            for (std::size_t k = 0; k < path.steps(); ++k) {
                const double gap = static_cast<double>(path.H[k]) -
                                   2.0 / sigma2 * static_cast<double>(path.reflected(k));
                d = std::max(d, std::abs(gap));
            }
            row[j] = d / std::sqrt(static_cast<double>(n_values[j]));
            if (j + 1 == n_values.size()) {
                row[n_values.size()] = bad_vertices(path, eps, sigma2, false).fraction;
                std::vector<double> scaled(path.steps());
                for (std::size_t k = 0; k < path.steps(); ++k) {
                    scaled[k] = 2.0 / sigma2 * static_cast<double>(path.reflected(k));
                }
                row[n_values.size() + 1] = stats::correlation(path.H, scaled);
            }
        }
    });

    json med = json::array();
    std::vector<double> medians;
    for (std::size_t j = 0; j < n_values.size(); ++j) {
        medians.push_back(stats::median(rep.column(rep.columns[j])));
        med.push_back({{"n", n_values[j]}, {"median_D", medians.back()}});
    }
    rep.results["median_discrepancy"] = med;
    bool decreasing = true;
    for (std::size_t j = 1; j < medians.size(); ++j) decreasing = decreasing && medians[j] < medians[j - 1];
    rep.results["decreasing"] = decreasing;
    const auto bad = rep.column("bad_fraction");
    const double freq = detail::fraction_below(bad, eps);
    rep.results["bad_fraction_below_eps_frequency"] = freq;
    rep.results["median_correlation"] = stats::median(rep.column("correlation"));

    rep.check("median D_n strictly decreasing in n", decreasing ? 1.0 : 0.0, ">=", 1.0);
    rep.check("frequency of bad fraction < eps", freq, ">=", bad_freq);
    rep.wall_seconds = detail::seconds_since(t0);
    return rep;
}

/// (1/n) sum_{k<n} sigma^2_{H_k} along the exploration of F_n.
inline Report variance_averaging_experiment(const ExperimentConfig& cfg) {
    const auto t0 = detail::Clock::now();
    Report rep = detail::start_report("variance-avg", cfg);
    const EnvStream env(cfg.env);
    require_strictly_critical(env);
    const double sigma2 = detail::sigma2_of(cfg, env);
    const double tol = cfg.param("tolerance", 0.05);
    const double freq_min = cfg.param("frequency", 0.9);

    rep.columns = {"average", "deviation"};
    rep.rows.assign(cfg.replicates, std::vector<double>(2));
    stats::parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
        const EnvStream env_r = detail::replicate_env(cfg, env, detail::kVarianceAvg, r);
        Rng rng = detail::replicate_rng(cfg, detail::kVarianceAvg, {r});
        const auto path = sample_exploration(env_r, cfg.n, rng);
        double s = 0.0;
        for (auto h : path.H) s += env_r.sigma2_at(static_cast<std::uint64_t>(h));
        const double avg = s / static_cast<double>(cfg.n);
        rep.rows[r] = {avg, avg - sigma2};
    });
    const double freq = detail::fraction_below(rep.column("deviation"), tol);
    rep.results["sigma2"] = sigma2;
    rep.results["frequency_within_tolerance"] = freq;
    rep.check("frequency |avg - sigma^2| < tolerance", freq, ">=", freq_min);
    rep.wall_seconds = detail::seconds_since(t0);
    return rep;
}

/// (1/n) sum_{k<n} zeta_k with zeta_k uniform on {0, ..., xibar_k - 1}.
inline Report spine_lln_experiment(const ExperimentConfig& cfg) {
    const auto t0 = detail::Clock::now();
    Report rep = detail::start_report("spine-lln", cfg);
    const EnvStream env(cfg.env);
    require_strictly_critical(env);
    const double sigma2 = detail::sigma2_of(cfg, env);
    const double tol = cfg.param("tolerance", 0.03);
    const double freq_min = cfg.param("frequency", 0.95);
    std::vector<OffspringDist> biased;
    for (const auto& c : env.components()) biased.push_back(size_biased(c));

    rep.columns = {"average", "deviation"};
    rep.rows.assign(cfg.replicates, std::vector<double>(2));
    stats::parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
        const EnvStream env_r = detail::replicate_env(cfg, env, detail::kSpine, r);
        Rng rng = detail::replicate_rng(cfg, detail::kSpine, {r});
        double s = 0.0;
        for (std::size_t k = 0; k < cfg.n; ++k) {
            const auto count = biased[env_r.component_index(k)].sample(rng);
            s += static_cast<double>(rng.below(count));
        }
        const double avg = s / static_cast<double>(cfg.n);
        rep.rows[r] = {avg, avg - sigma2 / 2.0};
    });
    const double freq = detail::fraction_below(rep.column("deviation"), tol);
    rep.results["limit"] = sigma2 / 2.0;
    rep.results["frequency_within_tolerance"] = freq;
    rep.check("frequency |avg zeta - sigma^2/2| < tolerance", freq, ">=", freq_min);
    rep.wall_seconds = detail::seconds_since(t0);
    return rep;
}

/// Every plane tree of height <= m whose vertices below height m have at
/// most d children, as depth-first degree sequences (height-m vertices are
/// recorded with 0 children).
inline std::vector<std::vector<std::uint32_t>> enumerate_shapes(std::size_t m, std::size_t d,
                                                                std::size_t limit = 100000) {
    // shapes[h] = all shapes of a subtree whose root is at height h.
    std::vector<std::vector<std::vector<std::uint32_t>>> shapes(m + 1);
    shapes[m] = {{0}};
    for (std::size_t h = m; h-- > 0;) {
        std::vector<std::vector<std::uint32_t>> out;
        for (std::size_t c = 0; c <= d; ++c) {
            // All c-tuples of child shapes, in lexicographic order.
            std::vector<std::size_t> pick(c, 0);
            const std::size_t base = shapes[h + 1].size();
            while (true) {
                std::vector<std::uint32_t> s{static_cast<std::uint32_t>(c)};
                for (auto p : pick) s.insert(s.end(), shapes[h + 1][p].begin(), shapes[h + 1][p].end());
                out.push_back(std::move(s));
                if (out.size() > limit) fail(ErrorKind::EnumerationTooLarge, "too many shapes");
                std::size_t pos = c;
                while (pos > 0 && ++pick[pos - 1] == base) pick[--pos] = 0;
                if (pos == 0) break;
            }
        }
        shapes[h] = std::move(out);
    }
    return shapes[0];
}

/// Compares P(T agrees with shape up to height m) with
/// P(T* agrees with shape up to height m) / Z_m(shape), shape by shape.
inline Report geiger_identity_experiment(const ExperimentConfig& cfg) {
    const auto t0 = detail::Clock::now();
    Report rep = detail::start_report("geiger-id", cfg);
    const EnvStream env(cfg.env);
    require_strictly_critical(env);
    const auto m = cfg.param<std::size_t>("m", 1);
    const double se_mult = cfg.param("se_multiple", 4.0);
    const auto shapes = enumerate_shapes(m, env.max_support(), cfg.param<std::size_t>("max_shapes", 100000));
    std::map<std::vector<std::uint32_t>, std::size_t> index;
    for (std::size_t s = 0; s < shapes.size(); ++s) index.emplace(shapes[s], s);

    const std::size_t reps = cfg.replicates;
    std::vector<std::size_t> tree_shape(reps), geiger_shape(reps);
    stats::parallel_for(reps, cfg.threads, [&](std::size_t r) {
        Rng a = detail::replicate_rng(cfg, detail::kGeiger, {0, r});
        const auto t = sample_tree(env, 0, kDefaultTreeNodeCap, a, m);
        tree_shape[r] = index.at(std::vector<std::uint32_t>(t.degrees().begin(), t.degrees().end()));
        Rng b = detail::replicate_rng(cfg, detail::kGeiger, {1, r});
        const auto g = sample_geiger(env, m, b);
        geiger_shape[r] = index.at(std::vector<std::uint32_t>(g.tree.degrees().begin(), g.tree.degrees().end()));
    });
    std::vector<double> tree_count(shapes.size(), 0.0), geiger_count(shapes.size(), 0.0);
    for (auto s : tree_shape) tree_count[s] += 1;
    for (auto s : geiger_shape) geiger_count[s] += 1;

    rep.columns = {"z_m", "exact", "p_tree", "se_tree", "p_geiger_over_z", "se_geiger", "diff_in_se"};
    const double R = static_cast<double>(reps);
    std::size_t compared = 0, within = 0;
    for (std::size_t s = 0; s < shapes.size(); ++s) {
        const auto tree = PlaneTree::from_degrees(shapes[s]);
        const auto st = tree_stats(tree);
        const double z = st.generation_sizes.size() > m ? static_cast<double>(st.generation_sizes[m]) : 0.0;
        double exact = 1.0;
        for (std::size_t v = 0; v < tree.size(); ++v) {
            const auto h = static_cast<std::size_t>(tree.heights()[v]);
            if (h < m) exact *= env.at(h).prob(tree.degrees()[v]);
        }
        const double p = tree_count[s] / R;
        const double se_p = std::sqrt(p * (1 - p) / R);
        const double g = geiger_count[s] / R;
        double q = 0.0, se_q = 0.0, diff = 0.0;
        if (z > 0) {
            q = g / z;
            se_q = std::sqrt(g * (1 - g) / R) / z;
            const double se = std::sqrt(se_p * se_p + se_q * se_q);
            diff = se > 0 ? std::abs(p - q) / se : (p == q ? 0.0 : INFINITY);
            ++compared;
            within += diff <= se_mult ? 1 : 0;
        }
        std::ostringstream label;
        for (std::size_t v = 0; v < shapes[s].size(); ++v) label << (v ? " " : "") << shapes[s][v];
        rep.row_labels.push_back(label.str());
        rep.rows.push_back({z, exact, p, se_p, q, se_q, diff});
    }
    rep.results["shapes"] = shapes.size();
    rep.results["surviving_shapes"] = compared;
    rep.check("surviving shapes within SE multiple", static_cast<double>(within), ">=",
              static_cast<double>(compared));
    rep.wall_seconds = detail::seconds_since(t0);
    return rep;
}

/// Rescaled functionals of a tree of size N: (a) distance from the root to a
/// uniform vertex, (b) height, (c) height process at a uniform time; all
/// divided by sigma sqrt(N).
struct TreeFunctionals {
    double root_distance = 0.0;
    double height = 0.0;
    double height_at_uniform_time = 0.0;
    double size = 0.0;
};

inline TreeFunctionals tree_functionals(const PlaneTree& t, double sigma, Rng& rng) {
    TreeFunctionals f;
    const double scale = sigma * std::sqrt(static_cast<double>(t.size()));
    f.size = static_cast<double>(t.size());
    auto v = static_cast<NodeId>(rng.below(t.size()));
    std::size_t dist = 0;
    for (; t.parent(v) != kNoNode; v = t.parent(v)) ++dist;
    f.root_distance = static_cast<double>(dist) / scale;
    std::int32_t h = 0;
    for (auto x : t.heights()) h = std::max(h, x);
    f.height = static_cast<double>(h) / scale;
    f.height_at_uniform_time = static_cast<double>(t.heights()[rng.below(t.size())]) / scale;
    return f;
}

/// Two-sample comparison of rescaled functionals of trees conditioned on
/// |T| >= n, between the configured environment and an oracle environment
/// with the same sigma^2. The KS threshold is the 99th percentile of the
/// permutation distribution of a same-law control pair (two independent
/// oracle samples).
inline Report crt_functional_experiment(const ExperimentConfig& cfg) {
    const auto t0 = detail::Clock::now();
    Report rep = detail::start_report("crt-test", cfg);
    const EnvStream env(cfg.env);
    const EnvStream oracle(cfg.params.contains("oracle_env") ? env_from_json(cfg.params.at("oracle_env"))
                                                            : cfg.env);
    require_strictly_critical(env);
    require_strictly_critical(oracle);
    const double sigma2 = detail::sigma2_of(cfg, env);
    if (std::abs(oracle.sigma2() - sigma2) > 1e-9) {
        fail(ErrorKind::BadParameters, "oracle environment must have the same sigma^2");
    }
    const double sigma = std::sqrt(sigma2);
    ConditionOptions opt;
    opt.node_cap = cfg.param<std::size_t>("max_tree_size", 1'000'000);
    opt.reject_oversize = true;
    const auto permutations = cfg.param<std::size_t>("permutations", 1000);
    const double level = cfg.param("control_quantile", 0.99);

    const std::size_t R = cfg.replicates;
    // side 0: test environment, 1: oracle, 2: independent oracle control.
    std::vector<TreeFunctionals> f(3 * R);
    stats::parallel_for(3 * R, cfg.threads, [&](std::size_t idx) {
        const std::size_t side = idx / R, r = idx % R;
        const EnvStream& base = side == 0 ? env : oracle;
        const EnvStream env_r = side == 0 ? detail::replicate_env(cfg, base, detail::kCrt, r) : base;
        Rng rng = detail::replicate_rng(cfg, detail::kCrt, {side, r});
        const auto tree = conditioned_tree(env_r, cfg.n, rng, opt);
        f[idx] = tree_functionals(tree, sigma, rng);
    });

    rep.columns = {"side", "root_distance", "height", "height_at_uniform_time", "size"};
    for (std::size_t idx = 0; idx < 3 * R; ++idx) {
        rep.rows.push_back({static_cast<double>(idx / R), f[idx].root_distance, f[idx].height,
                            f[idx].height_at_uniform_time, f[idx].size});
    }
    auto pick = [&](std::size_t side, double TreeFunctionals::*field) {
        std::vector<double> out(R);
        for (std::size_t r = 0; r < R; ++r) out[r] = f[side * R + r].*field;
        return out;
    };

    struct Functional {
        const char* name;
        double TreeFunctionals::*field;
        bool gated;
    };
    const Functional fns[] = {{"root_distance", &TreeFunctionals::root_distance, true},
                              {"height", &TreeFunctionals::height, true},
                              {"height_at_uniform_time", &TreeFunctionals::height_at_uniform_time, false}};
    for (std::size_t fi = 0; fi < 3; ++fi) {
        const auto& fn = fns[fi];
        const auto test = pick(0, fn.field), orc = pick(1, fn.field), ctl = pick(2, fn.field);
        const double ks = stats::ks_two_sample(test, orc);
        const double ks_control = stats::ks_two_sample(orc, ctl);
        std::vector<double> pooled = orc;
        pooled.insert(pooled.end(), ctl.begin(), ctl.end());
        Rng prng = detail::replicate_rng(cfg, detail::kCrt, {0xC0, fi});
        std::vector<double> null_ks(permutations);
        for (std::size_t p = 0; p < permutations; ++p) {
            for (std::size_t i = pooled.size() - 1; i > 0; --i) {
                std::swap(pooled[i], pooled[prng.below(i + 1)]);
            }
            null_ks[p] = stats::ks_two_sample({pooled.begin(), pooled.begin() + static_cast<std::ptrdiff_t>(R)},
                                              {pooled.begin() + static_cast<std::ptrdiff_t>(R), pooled.end()});
        }
        const double threshold = stats::quantile(null_ks, level);
        rep.results[fn.name] = {{"ks", ks},
                                {"pvalue", stats::ks_pvalue_two_sample(ks, R, R)},
                                {"ks_control", ks_control},
                                {"control_threshold", threshold}};
        if (fn.gated) rep.check(std::string("KS(test, oracle) ") + fn.name, ks, "<", threshold);
    }
    rep.wall_seconds = detail::seconds_since(t0);
    return rep;
}

}  // namespace bpre
