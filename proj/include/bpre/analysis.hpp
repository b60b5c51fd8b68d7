#pragma once

// Exact (non-Monte-Carlo) computations: survival up to a given height,
// Kolmogorov-type bounds, BPVE variance and Doob bounds, and numerical
// evidence for the averaging / non-degeneracy / large-degree / spine
// conditions on an environment.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bpre/env.hpp"
#include "bpre/error.hpp"
#include "bpre/rng.hpp"
#include "bpre/tree.hpp"

namespace bpre {

/// Survival to height m. q[k] = q_{k,m} is the probability that a vertex at
/// generation k has no descendant at generation m (q[m] = 0), and
/// phi_terms[k] = phi_k(q_{k+1,m}) for k < m.
struct SurvivalTable {
    std::size_t m = 0;
    std::vector<double> q;
    std::vector<double> phi_terms;
    double survival = 0.0;      // 1 - q_{0,m}
    double survival_phi = 0.0;  // 1 / (1 + sum_k phi_k(q_{k+1,m}))
};

namespace detail {
inline double phi_or_zero(const OffspringDist& d, double s) {
    return d.is_dirac_one() ? 0.0 : phi_eval(d, s);
}
}  // namespace detail

inline SurvivalTable survival_exact(const EnvStream& env, std::size_t m) {
    if (m == 0) fail(ErrorKind::BadParameters, "horizon m must be >= 1");
    SurvivalTable t;
    t.m = m;
    t.q.assign(m + 1, 0.0);
    t.phi_terms.assign(m, 0.0);
    double phi_sum = 0.0;
    for (std::size_t k = m; k-- > 0;) {
        const OffspringDist& mu = env.at(k);
        require_critical(mu);
        t.q[k] = pgf_eval(mu, t.q[k + 1]);
        t.phi_terms[k] = detail::phi_or_zero(mu, t.q[k + 1]);
        phi_sum += t.phi_terms[k];
    }
    t.survival = 1.0 - t.q[0];
    t.survival_phi = 1.0 / (1.0 + phi_sum);
    return t;
}

/// P(h >= m) for every m in [1, m_max], sharing the component lookups.
inline std::vector<double> survival_curve(const EnvStream& env, std::size_t m_max) {
    std::vector<const OffspringDist*> mu(m_max);
    for (std::size_t k = 0; k < m_max; ++k) {
        mu[k] = &env.at(k);
        require_critical(*mu[k]);
    }
    std::vector<double> out(m_max + 1, 1.0);
    for (std::size_t m = 1; m <= m_max; ++m) {
        double s = 0.0;
        for (std::size_t k = m; k-- > 0;) s = pgf_eval(*mu[k], s);
        out[m] = 1.0 - s;
    }
    return out;
}

/// Independent oracle: propagate the full law of Z_k forward from Z_0 = 1
/// and read off P(Z_m > 0). Exact as long as populations stay below
/// `population_limit`; throws BadParameters otherwise.
inline double survival_forward(const EnvStream& env, std::size_t m,
                               std::size_t population_limit = 4096) {
    std::vector<double> law{0.0, 1.0};  // P(Z_0 = z)
    for (std::size_t k = 0; k < m; ++k) {
        const OffspringDist& mu = env.at(k);
        const std::size_t zmax = law.size() - 1;
        const std::size_t next_max = zmax * mu.max_support();
        if (next_max > population_limit) {
            fail(ErrorKind::BadParameters, "forward oracle population limit exceeded");
        }
        std::vector<double> next(next_max + 1, 0.0);
        next[0] += law[0];
        std::vector<double> power{1.0};  // law of the sum of z offspring counts
        for (std::size_t z = 1; z <= zmax; ++z) {
            std::vector<double> conv(power.size() + mu.max_support(), 0.0);
            for (std::size_t a = 0; a < power.size(); ++a) {
                if (power[a] == 0.0) continue;
                for (std::size_t b = 0; b <= mu.max_support(); ++b) conv[a + b] += power[a] * mu.prob(b);
            }
            power = std::move(conv);
            if (law[z] == 0.0) continue;
            for (std::size_t j = 0; j < power.size(); ++j) next[j] += law[z] * power[j];
        }
        law = std::move(next);
    }
    return 1.0 - law[0];
}

struct KolmogorovBounds {
    double lower = 0.0;  // 1 / (2 sigma^2 m)
    double upper = 0.0;  // 4 / (c m)
};

inline KolmogorovBounds kolmogorov_bounds(std::size_t m, double c, double sigma2) {
    if (m == 0 || !(c > 0) || !(sigma2 > 0)) {
        fail(ErrorKind::BadParameters, "bounds need m >= 1 and positive c, sigma2");
    }
    const double md = static_cast<double>(m);
    return {1.0 / (2.0 * sigma2 * md), 4.0 / (c * md)};
}

struct SandwichReport {
    std::size_t m_lo = 0;
    std::size_t m_hi = 0;
    bool holds_in_range = true;              // for every m in [m_lo, m_hi]
    std::optional<std::size_t> threshold;    // smallest M with the sandwich for all m in [M, m_hi]
    std::vector<std::size_t> violations;     // m in [1, m_hi] where it fails
    double max_lower_ratio = 0.0;            // max over range of lower / P
    double max_upper_ratio = 0.0;            // max over range of P / upper
};

inline SandwichReport check_kolmogorov_sandwich(const EnvStream& env, std::size_t m_lo,
                                                std::size_t m_hi, double c, double sigma2) {
    if (m_lo == 0 || m_hi < m_lo) fail(ErrorKind::BadParameters, "need 1 <= m_lo <= m_hi");
    SandwichReport r;
    r.m_lo = m_lo;
    r.m_hi = m_hi;
    const auto p = survival_curve(env, m_hi);
    std::size_t last_bad = 0;
    for (std::size_t m = 1; m <= m_hi; ++m) {
        const auto b = kolmogorov_bounds(m, c, sigma2);
        const bool ok = b.lower <= p[m] && p[m] <= b.upper;
        if (!ok) {
            r.violations.push_back(m);
            last_bad = m;
            if (m >= m_lo) r.holds_in_range = false;
        }
        if (m >= m_lo) {
            r.max_lower_ratio = std::max(r.max_lower_ratio, b.lower / p[m]);
            r.max_upper_ratio = std::max(r.max_upper_ratio, p[m] / b.upper);
        }
    }
    if (last_bad < m_hi) r.threshold = last_bad + 1;
    return r;
}

/// Var(Z_{k1}) for a BPVE started with z0 individuals at generation k0.
inline double variance_exact(const EnvStream& env, std::uint64_t z0, std::uint64_t k0,
                             std::uint64_t k1) {
    if (k1 == 0) fail(ErrorKind::BadParameters, "k1 must be >= 1");
    double s = 0.0;
    for (std::uint64_t j = k0; j < k0 + k1; ++j) s += env.sigma2_at(j);
    return static_cast<double>(z0) * s;
}

/// 4 Var(Z_{k1}) / K^2, the Doob L^2 bound on P(max_{k<=k1} |Z_k - z0| > K).
inline double doob_bound(const EnvStream& env, std::uint64_t z0, std::uint64_t k0,
                         std::uint64_t k1, double K) {
    if (!(K > 0)) fail(ErrorKind::BadParameters, "K must be positive");
    return 4.0 * variance_exact(env, z0, k0, k1) / (K * K);
}

struct DoobCheck {
    double bound = 0.0;
    double probability = 0.0;  // empirical P(max |Z_k - z0| > K)
    double se = 0.0;
    bool within = false;       // probability <= bound + 4 se
};

inline DoobCheck doob_empirical(const EnvStream& env, std::uint64_t z0, std::uint64_t k0,
                                std::uint64_t k1, double K, std::size_t reps, std::uint64_t seed) {
    DoobCheck c;
    c.bound = doob_bound(env, z0, k0, k1, K);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < reps; ++r) {
        Rng rng(derive_seed(seed, {r}));
        const auto z = sample_generation_sizes(env, z0, k1, rng, k0);
        for (auto zk : z) {
            if (std::abs(static_cast<double>(zk) - static_cast<double>(z0)) > K) {
                ++hits;
                break;
            }
        }
    }
    const double n = static_cast<double>(reps);
    c.probability = static_cast<double>(hits) / n;
    c.se = std::sqrt(std::max(c.probability * (1 - c.probability), 1.0 / n) / n);
    c.within = c.probability <= c.bound + 4.0 * c.se;
    return c;
}

// ---------------------------------------------------------------------------
// Conditions on the environment

struct ConditionParams {
    std::optional<double> sigma2_target;  // default: env.sigma2()
    std::optional<double> c_candidate;    // default: env.c()
    double h_exponent = 1.0 / 6.0;        // h_n = n^h_exponent
    std::vector<double> eps_large_degrees{1.0, 0.1, 0.01};
    std::vector<double> eps_omega{0.5, 0.25, 0.1, 0.05, 0.01};
    std::vector<std::size_t> n_omega;     // default: {n/100, n/10, n}
    std::size_t omega_grid = 200;
    std::uint64_t spine_seed = 1;
    double tol_variance = 0.05;
    double tol_nondegeneracy = 0.05;
    double tol_large_degrees = 1e-12;
    double tol_spine = 0.03;
    double tol_omega = 0.05;
};

struct ConditionEntry {
    std::string name;
    double statistic = 0.0;
    double target = 0.0;
    double deviation = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct ConditionReport {
    std::size_t n = 0;
    double sigma2 = 0.0;
    double c = 0.0;
    double h_n = 0.0;
    std::vector<ConditionEntry> entries;  // I..V in order

    // Details behind the entries.
    struct Window {
        double a = 0.0, b = 0.0, average = 0.0;
    };
    std::vector<Window> windows;                      // condition II grid
    std::vector<double> large_degree_sums;            // condition III, per eps_large_degrees
    std::vector<double> large_degree_zero_from;       // n beyond which the III sum is exactly 0
    double spine_average = 0.0;                       // condition IV Monte Carlo
    double spine_expectation = 0.0;                   // condition IV exact mean of the average
    std::vector<std::size_t> omega_n;                 // condition V matrix rows
    std::vector<std::vector<double>> omega_averages;  // [row][eps index]
    bool omega_trend_ok = false;

    bool all_pass() const {
        return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass; });
    }
};

inline ConditionReport check_conditions(const EnvStream& env, std::size_t n,
                                        const ConditionParams& params = {}) {
    if (n < 1000) fail(ErrorKind::BadParameters, "n_prefix must be >= 1000");
    require_strictly_critical(env);
    ConditionReport r;
    r.n = n;
    r.sigma2 = params.sigma2_target.value_or(env.sigma2());
    r.c = params.c_candidate.value_or(env.c());
    const std::size_t ncomp = env.components().size();

    auto entry = [&](std::string name, double stat, double target, double dev, double tol) {
        r.entries.push_back({std::move(name), stat, target, dev, tol, dev <= tol});
    };

    // Component index of every generation that any condition touches.
    const double root_n = std::sqrt(static_cast<double>(n));
    r.h_n = std::pow(static_cast<double>(n), params.h_exponent);
    const auto k_large = static_cast<std::size_t>(std::floor(r.h_n * root_n));
    std::size_t k_needed = std::max<std::size_t>(2 * n + 1, k_large + 1);
    std::vector<std::size_t> n_omega = params.n_omega;
    if (n_omega.empty()) n_omega = {std::max<std::size_t>(n / 100, 1), std::max<std::size_t>(n / 10, 1), n};
    for (auto m : n_omega) k_needed = std::max(k_needed, m + 1);
    std::vector<std::uint32_t> comp(k_needed);
    for (std::size_t k = 0; k < k_needed; ++k) comp[k] = static_cast<std::uint32_t>(env.component_index(k));
    auto mu = [&](std::size_t k) -> const OffspringDist& { return env.components()[comp[k]]; };

    // (I) averaging of the variance.
    {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += mu(k).variance();
        const double avg = s / static_cast<double>(n);
        entry("I: variance averaging", avg, r.sigma2, std::abs(avg - r.sigma2), params.tol_variance);
    }

    // (II) windowed averages of mu_k({0}) on the rational grid {0, 1/4, ..., 2}.
    {
        std::vector<double> prefix(2 * n + 2, 0.0);
        for (std::size_t k = 0; k <= 2 * n; ++k) prefix[k + 1] = prefix[k] + mu(k).prob(0);
        double worst = INFINITY;
        for (int ai = 0; ai <= 8; ++ai) {
            for (int bi = ai + 1; bi <= 8; ++bi) {
                const double a = ai / 4.0, b = bi / 4.0;
                const auto lo = static_cast<std::size_t>(std::floor(a * static_cast<double>(n)));
                const auto hi = static_cast<std::size_t>(std::floor(b * static_cast<double>(n)));
                // generations k with an <= k < bn
                const double avg = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
                r.windows.push_back({a, b, avg});
                worst = std::min(worst, avg);
            }
        }
        entry("II: non-degeneracy", worst, r.c, std::max(0.0, r.c - worst), params.tol_nondegeneracy);
    }

    // (III) truncated second moments up to generation floor(h_n sqrt n).
    {
        double worst = 0.0;
        for (double eps : params.eps_large_degrees) {
            const double cut = eps * static_cast<double>(n);
            double s = 0.0;
            for (std::size_t k = 0; k <= k_large; ++k) {
                const auto& d = mu(k);
                for (std::size_t i = 0; i <= d.max_support(); ++i) {
                    const double sq = static_cast<double>(i) * static_cast<double>(i);
                    if (sq >= cut) s += sq * d.prob(i);
                }
            }
            s /= root_n;
            r.large_degree_sums.push_back(s);
            const double dmax = static_cast<double>(env.max_support());
            r.large_degree_zero_from.push_back(std::floor(dmax * dmax / eps) + 1);
            worst = std::max(worst, s);
        }
        entry("III: large degrees I", worst, 0.0, worst, params.tol_large_degrees);
    }

    // (IV) spine position: zeta_k uniform on {0, ..., xibar_k - 1}.
    {
        std::vector<OffspringDist> biased;
        for (const auto& c : env.components()) biased.push_back(size_biased(c));
        Rng rng(derive_seed(params.spine_seed, {0x5117e}));
        double s = 0.0, expect = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const auto count = biased[comp[k]].sample(rng);
            s += static_cast<double>(rng.below(count));
            expect += mu(k).variance() / 2.0;
        }
        r.spine_average = s / static_cast<double>(n);
        r.spine_expectation = expect / static_cast<double>(n);
        entry("IV: spine position", r.spine_average, r.sigma2 / 2.0,
              std::abs(r.spine_average - r.sigma2 / 2.0), params.tol_spine);
    }

    // (V) averages of omega_k(eps); omega depends only on the component.
    {
        std::vector<std::vector<double>> om(ncomp, std::vector<double>(params.eps_omega.size()));
        for (std::size_t j = 0; j < ncomp; ++j) {
            for (std::size_t e = 0; e < params.eps_omega.size(); ++e) {
                const auto& d = env.components()[j];
                om[j][e] = d.is_dirac_one() ? 0.0 : omega(d, params.eps_omega[e], params.omega_grid);
            }
        }
        r.omega_n = n_omega;
        r.omega_trend_ok = true;
        for (auto m : n_omega) {
            std::vector<double> counts(ncomp, 0.0);
            for (std::size_t k = 0; k < m; ++k) counts[comp[k]] += 1.0;
            std::vector<double> row(params.eps_omega.size(), 0.0);
            for (std::size_t e = 0; e < row.size(); ++e) {
                for (std::size_t j = 0; j < ncomp; ++j) row[e] += counts[j] * om[j][e];
                row[e] /= static_cast<double>(m);
            }
            // eps_omega is listed from large to small; the averages must not grow.
            for (std::size_t e = 1; e < row.size(); ++e) {
                if (params.eps_omega[e] < params.eps_omega[e - 1] && row[e] > row[e - 1] + 1e-15) {
                    r.omega_trend_ok = false;
                }
            }
            r.omega_averages.push_back(std::move(row));
        }
        const double last = r.omega_averages.back().empty() ? 0.0 : r.omega_averages.back().back();
        entry("V: large degrees II", last, 0.0, last, params.tol_omega);
        r.entries.back().pass = r.entries.back().pass && r.omega_trend_ok;
    }
    return r;
}

}  // namespace bpre
