// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. `acceptance 4 9` runs a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bpre/analysis.hpp"
#include "bpre/experiments.hpp"

using namespace bpre;

namespace {

OffspringDist binary() { return pmf_new({0.5, 0.0, 0.5}); }
OffspringDist geometric_like() { return pmf_new({0.25, 0.5, 0.25}); }
MixtureEnv mixture() { return MixtureEnv{{binary(), geometric_like()}, {0.5, 0.5}, 7}; }

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Scientific output of every experiment run by criteria 4-9, replayed by 10.
std::vector<std::pair<std::string, std::function<Report()>>> g_runs;
std::vector<std::string> g_outputs;

Report run_recorded(const std::string& name, std::function<Report()> fn) {
    Report r = fn();
    g_runs.emplace_back(name, std::move(fn));
    g_outputs.push_back(r.to_json().dump());
    return r;
}

ExperimentConfig config(EnvSpec env, std::size_t n, std::size_t reps, std::uint64_t seed) {
    ExperimentConfig c;
    c.env = std::move(env);
    c.n = n;
    c.replicates = reps;
    c.seed = seed;
    c.threads = 0;
    return c;
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

Outcome survival_golden() {
    const EnvStream env(ConstantEnv{binary()});
    const double expected[] = {0.5, 3.0 / 8.0, 39.0 / 128.0};
    double worst = 0, worst_routes = 0, worst_oracle = 0;
    for (std::size_t m = 1; m <= 3; ++m) {
        const auto t = survival_exact(env, m);
        worst = std::max({worst, std::abs(t.survival - expected[m - 1]), std::abs(t.survival_phi - expected[m - 1])});
        worst_routes = std::max(worst_routes, std::abs(t.survival - t.survival_phi));
        worst_oracle = std::max(worst_oracle, std::abs(survival_forward(env, m) - expected[m - 1]));
    }
    return {worst <= 1e-12 && worst_routes <= 1e-10 && worst_oracle <= 1e-12,
            "max |P - golden| = " + fmt(worst) + ", routes differ by " + fmt(worst_routes)};
}

Outcome kolmogorov_sandwich() {
    const auto b = check_kolmogorov_sandwich(EnvStream(ConstantEnv{binary()}), 100, 10000, 0.5, 1.0);
    const auto m = check_kolmogorov_sandwich(EnvStream(mixture()), 100, 10000, 0.375, 0.75);
    return {b.holds_in_range && m.holds_in_range,
            "B: max lower/P = " + fmt(b.max_lower_ratio) + ", P/upper = " + fmt(b.max_upper_ratio) +
                "; mixture: " + fmt(m.max_lower_ratio) + ", " + fmt(m.max_upper_ratio)};
}

Outcome variance_identity() {
    const EnvStream env(PeriodicEnv{{binary(), geometric_like()}});
    const double exact = variance_exact(env, 10, 0, 20);
    const std::size_t reps = 200000;
    std::vector<double> z(reps);
    stats::parallel_for(reps, 0, [&](std::size_t r) {
        Rng rng(derive_seed(0xACC3, {r}));
        z[r] = static_cast<double>(sample_generation_sizes(env, 10, 20, rng).back());
    });
    double mean = 0;
    for (double x : z) mean += x;
    mean /= static_cast<double>(reps);
    std::vector<double> dev2(reps);
    for (std::size_t r = 0; r < reps; ++r) dev2[r] = (z[r] - mean) * (z[r] - mean);
    const auto s = stats::summarize(dev2);
    const double var = s.mean * static_cast<double>(reps) / static_cast<double>(reps - 1);
    const double diff = std::abs(var - exact) / s.se;
    return {diff < 4.0, "Var = " + fmt(var) + " vs " + fmt(exact) + " (" + fmt(diff) + " SE)"};
}

Outcome donsker() {
    bool ok = true;
    std::string detail;
    for (int which = 0; which < 2; ++which) {
        const std::string label = which ? "mixture" : "B";
        auto cfg = config(which ? EnvSpec(mixture()) : EnvSpec(ConstantEnv{binary()}), 10000, 10000, 41);
        const auto r = run_recorded("donsker " + label, [cfg] { return donsker_experiment(cfg); });
        const double kx = r.results["ks_terminal_normal"].get<double>();
        const double ky = r.results["ks_reflected_halfnormal"].get<double>();
        ok = ok && kx < 0.05 && ky < 0.05;
        detail += (which ? "; " : "") + label + ": KS normal " + fmt(kx) + ", half-normal " + fmt(ky);
    }
    return {ok, detail};
}

Outcome variance_averaging() {
    auto cfg = config(mixture(), 100000, 50, 51);
    const auto r = run_recorded("variance-avg", [cfg] { return variance_averaging_experiment(cfg); });
    std::size_t within = 0;
    for (double d : r.column("deviation")) within += std::abs(d) < 0.05;
    return {within >= 45, std::to_string(within) + "/50 within 0.05"};
}

Outcome spine_lln() {
    auto cfg = config(mixture(), 100000, 20, 61);
    const auto r = run_recorded("spine-lln", [cfg] { return spine_lln_experiment(cfg); });
    std::size_t within = 0;
    for (double d : r.column("deviation")) within += std::abs(d) < 0.03;
    return {within >= 19, std::to_string(within) + "/20 within 0.03"};
}

Outcome geiger_identity() {
    auto cfg = config(ConstantEnv{geometric_like()}, 10, 100000, 71);
    cfg.params["m"] = 1;
    const auto r = run_recorded("geiger-id", [cfg] { return geiger_identity_experiment(cfg); });
    bool ok = true;
    std::size_t surviving = 0;
    std::string detail;
    for (std::size_t s = 0; s < r.rows.size(); ++s) {
        if (r.rows[s][0] == 0) continue;
        ++surviving;
        const double diff = r.rows[s][6];
        ok = ok && diff < 4.0;
        detail += (detail.empty() ? "" : "; ") + std::string("shape [") + r.row_labels[s] + "]: " + fmt(r.rows[s][2]) +
                  " vs " + fmt(r.rows[s][4]) + " (" + fmt(diff) + " SE)";
    }
    return {ok && surviving == 2, detail};
}

Outcome joint_convergence() {
    auto cfg = config(mixture(), 100000, 50, 81);
    cfg.params["n_values"] = std::vector<std::size_t>{1000, 10000, 100000};
    cfg.params["eps"] = 0.2;
    const auto r = run_recorded("ratio", [cfg] { return ratio_experiment(cfg); });
    std::vector<double> med;
    for (const char* c : {"D_1000", "D_10000", "D_100000"}) med.push_back(stats::median(r.column(c)));
    const bool decreasing = med[0] > med[1] && med[1] > med[2];
    std::size_t good = 0;
    for (double f : r.column("bad_fraction")) good += f < 0.2;
    return {decreasing && good >= 45, "median D: " + fmt(med[0]) + " > " + fmt(med[1]) + " > " + fmt(med[2]) +
                                          "; bad fraction < 0.2 in " + std::to_string(good) + "/50"};
}

Outcome crt_oracle() {
    auto cfg = config(mixture(), 2000, 2000, 91);
    cfg.params["oracle_env"] = env_to_json(ConstantEnv{pmf_new({0.375, 0.25, 0.375})});
    const auto r = run_recorded("crt-test", [cfg] { return crt_functional_experiment(cfg); });
    bool ok = true;
    std::string detail;
    for (const char* f : {"root_distance", "height"}) {
        const double ks = r.results[f]["ks"].get<double>();
        const double thr = r.results[f]["control_threshold"].get<double>();
        ok = ok && ks < thr;
        detail += (detail.empty() ? "" : "; ") + std::string(f) + ": KS " + fmt(ks) + " < q99 " + fmt(thr);
    }
    return {ok, detail};
}

Outcome determinism() {
    if (g_runs.empty()) return {false, "no experiments ran; run criteria 4-9 together with 10"};
    std::size_t same = 0;
    std::string differing;
    for (std::size_t i = 0; i < g_runs.size(); ++i) {
        if (g_runs[i].second().to_json().dump() == g_outputs[i]) ++same;
        else differing += " " + g_runs[i].first;
    }
    return {same == g_runs.size(),
            std::to_string(same) + "/" + std::to_string(g_runs.size()) + " reruns byte-identical" + differing};
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        double budget_seconds;
        Outcome (*fn)();
    };
    const Criterion criteria[] = {
        {1, "exact survival golden", 1, survival_golden},
        {2, "Kolmogorov sandwich", 10, kolmogorov_sandwich},
        {3, "variance identity", 30, variance_identity},
        {4, "Donsker marginals", 120, donsker},
        {5, "variance averaging", 120, variance_averaging},
        {6, "spine LLN", 30, spine_lln},
        {7, "Geiger identity", 30, geiger_identity},
        {8, "joint-convergence discrepancy", 300, joint_convergence},
        {9, "CRT oracle", 600, crt_oracle},
        {10, "determinism", -1, determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = c.budget_seconds < 0 || secs < c.budget_seconds;
        const bool pass = o.pass && in_time;
        failures += !pass;
        std::printf("%s %2d %s: %s [%.2f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                    in_time ? "" : ", over budget");
        std::fflush(stdout);
    }
    return failures ? 1 : 0;
}
