#pragma once

// Offspring distributions, environments, and generating-function analytics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bpre/error.hpp"
#include "bpre/rng.hpp"

namespace bpre {

inline constexpr std::size_t kDefaultSupportCap = 64;
inline constexpr double kCriticalTolerance = 1e-9;

/// Finite-support probability mass function on {0, ..., d}.
///
/// Weights are normalized on construction and trailing zeros are trimmed, so
/// `max_support()` is the largest child count with positive probability.
/// Alongside the pmf the object keeps its CDF (for sampling) and the
/// coefficients of the two polynomials used to evaluate phi without
/// cancellation (see `phi_eval`).
class OffspringDist {
public:
    OffspringDist() : OffspringDist(std::vector<double>{1.0}) {}

    explicit OffspringDist(std::span<const double> weights,
                           std::size_t support_cap = kDefaultSupportCap) {
        if (weights.empty()) fail(ErrorKind::AllZero, "empty weight vector");
        double total = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) {
                fail(ErrorKind::NegativeWeight, "weights must be finite and >= 0");
            }
            total += w;
        }
        if (total <= 0.0) fail(ErrorKind::AllZero, "all weights are zero");
        std::size_t len = weights.size();
        while (len > 1 && weights[len - 1] == 0.0) --len;
        if (len - 1 > support_cap) {
            fail(ErrorKind::SupportTooLarge, "max support " + std::to_string(len - 1) +
                                                 " exceeds cap " + std::to_string(support_cap));
        }
        p_.assign(weights.begin(), weights.begin() + static_cast<std::ptrdiff_t>(len));
        for (double& w : p_) w /= total;
        finish();
    }

    explicit OffspringDist(const std::vector<double>& weights,
                           std::size_t support_cap = kDefaultSupportCap)
        : OffspringDist(std::span<const double>(weights), support_cap) {}

    std::span<const double> probs() const noexcept { return p_; }
    std::size_t max_support() const noexcept { return p_.size() - 1; }
    double prob(std::size_t i) const noexcept { return i < p_.size() ? p_[i] : 0.0; }
    double mean() const noexcept { return mean_; }
    double variance() const noexcept { return variance_; }

    bool is_critical(double tol = kCriticalTolerance) const noexcept {
        return std::abs(mean_ - 1.0) <= tol;
    }
    bool is_dirac_one() const noexcept { return p_.size() == 2 && p_[1] == 1.0; }

    /// Draw a child count by inverse-CDF search.
    std::size_t sample(Rng& rng) const noexcept {
        const double u = rng.uniform();
        const std::size_t d = cdf_.size();
        if (d <= 8) {
            for (std::size_t i = 0; i + 1 < d; ++i) {
                if (u < cdf_[i]) return i;
            }
            return d - 1;
        }
        auto it = std::upper_bound(cdf_.begin(), cdf_.end() - 1, u);
        return static_cast<std::size_t>(it - cdf_.begin());
    }

    /// (1 - f(s)) / (1 - s) as a polynomial in s.
    std::span<const double> ratio_coeffs() const noexcept { return a_; }
    /// (f(s) - s) / (1 - s)^2 for a mean-one pmf, as a polynomial in s.
    std::span<const double> excess_coeffs() const noexcept { return b_; }

    friend bool operator==(const OffspringDist& x, const OffspringDist& y) noexcept {
        return x.p_ == y.p_;
    }

private:
    void finish() {
        const std::size_t d = p_.size() - 1;
        cdf_.resize(p_.size());
        double acc = 0.0;
        mean_ = 0.0;
        for (std::size_t i = 0; i <= d; ++i) {
            acc += p_[i];
            cdf_[i] = acc;
            mean_ += static_cast<double>(i) * p_[i];
        }
        cdf_.back() = 1.0;
        variance_ = 0.0;
        for (std::size_t i = 0; i <= d; ++i) {
            const double dev = static_cast<double>(i) - mean_;
            variance_ += dev * dev * p_[i];
        }
        // a_j = P(xi > j); b_l = E[(xi - 1 - l)^+].
        a_.assign(std::max<std::size_t>(d, 1), 0.0);
        b_.assign(std::max<std::size_t>(d, 1), 0.0);
        for (std::size_t i = 1; i <= d; ++i) {
            for (std::size_t j = 0; j < i; ++j) a_[j] += p_[i];
            for (std::size_t l = 0; l + 1 < i; ++l) b_[l] += p_[i] * static_cast<double>(i - 1 - l);
        }
    }

    std::vector<double> p_;
    std::vector<double> cdf_;
    std::vector<double> a_;
    std::vector<double> b_;
    double mean_ = 0.0;
    double variance_ = 0.0;
};

inline OffspringDist pmf_new(std::span<const double> weights,
                             std::size_t support_cap = kDefaultSupportCap) {
    return OffspringDist(weights, support_cap);
}

inline OffspringDist pmf_new(std::initializer_list<double> weights,
                             std::size_t support_cap = kDefaultSupportCap) {
    return OffspringDist(std::span<const double>(weights.begin(), weights.size()), support_cap);
}

inline OffspringDist size_biased(const OffspringDist& dist) {
    if (!(dist.mean() > 0.0)) fail(ErrorKind::ZeroMean, "size-biasing needs a positive mean");
    std::vector<double> w(dist.probs().size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<double>(i) * dist.prob(i);
    return OffspringDist(w, w.size());
}

namespace detail {
inline double horner(std::span<const double> c, double s) noexcept {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * s + *it;
    return acc;
}
}  // namespace detail

inline double pgf_eval(const OffspringDist& dist, double s) {
    if (!(s >= 0.0 && s <= 1.0)) fail(ErrorKind::OutOfDomain, "pgf argument outside [0,1]");
    if (s == 1.0) return 1.0;
    return detail::horner(dist.probs(), s);
}

inline void require_critical(const OffspringDist& dist) {
    if (!dist.is_critical()) {
        fail(ErrorKind::NotCritical, "mean " + std::to_string(dist.mean()) + " != 1");
    }
}

/// phi(s) = 1/(1 - f(s)) - 1/(1 - s) for a mean-one pmf.
///
/// With A(s) = (1 - f(s))/(1 - s) = sum_j P(xi > j) s^j and
/// B(s) = (f(s) - s)/(1 - s)^2 = sum_l E[(xi - 1 - l)^+] s^l, phi = B/A.
/// Both polynomials have nonnegative coefficients and A >= P(xi > 0) > 0,
/// so the quotient is accurate on all of [0, 1]; A(1) = 1 and B(1) = var/2.
inline double phi_eval(const OffspringDist& dist, double s) {
    require_critical(dist);
    if (dist.is_dirac_one()) fail(ErrorKind::DegenerateAtOne, "phi undefined for Dirac(1)");
    if (!(s >= 0.0 && s <= 1.0)) fail(ErrorKind::OutOfDomain, "phi argument outside [0,1]");
    if (s == 1.0) return dist.variance() / 2.0;
    return detail::horner(dist.excess_coeffs(), s) / detail::horner(dist.ratio_coeffs(), s);
}

/// Grid approximation (from below) of sup_{1-eps <= s <= t < 1} |phi(s) - phi(t)|.
///
/// Evaluates phi at 1 - eps + j*eps/grid_points, j < grid_points, and at the
/// limit s -> 1; the supremum of pairwise differences is the range.
inline double omega(const OffspringDist& dist, double eps, std::size_t grid_points) {
    if (!(eps > 0.0 && eps <= 1.0)) fail(ErrorKind::BadEpsilon, "eps must lie in (0, 1]");
    if (grid_points == 0) fail(ErrorKind::BadParameters, "grid_points must be positive");
    double lo = phi_eval(dist, 1.0);
    double hi = lo;
    const double step = eps / static_cast<double>(grid_points);
    for (std::size_t j = 0; j < grid_points; ++j) {
        const double v = phi_eval(dist, 1.0 - eps + static_cast<double>(j) * step);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return hi - lo;
}

// ---------------------------------------------------------------------------
// Environments

struct ConstantEnv {
    OffspringDist dist;
};

struct PeriodicEnv {
    std::vector<OffspringDist> period;
};

struct MixtureEnv {
    std::vector<OffspringDist> components;
    std::vector<double> weights;
    std::uint64_t seed = 0;
};

using EnvSpec = std::variant<ConstantEnv, PeriodicEnv, MixtureEnv>;

inline void validate(const EnvSpec& spec) {
    if (const auto* p = std::get_if<PeriodicEnv>(&spec)) {
        if (p->period.empty()) fail(ErrorKind::BadParameters, "periodic environment needs a period");
    } else if (const auto* m = std::get_if<MixtureEnv>(&spec)) {
        if (m->components.empty()) fail(ErrorKind::BadParameters, "mixture needs components");
        if (m->weights.size() != m->components.size()) {
            fail(ErrorKind::BadParameters, "mixture weights/components size mismatch");
        }
        double total = 0.0;
        for (double w : m->weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) fail(ErrorKind::BadParameters, "negative mixture weight");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12) {
            fail(ErrorKind::BadParameters, "mixture weights must sum to 1");
        }
    }
}

/// Quenched environment: random access to mu_k for every k >= 0.
///
/// Mixture environments pick the component of generation k from
/// hash(seed, k), so any index is addressable in O(1) and the realization is
/// a pure function of the seed. The object is immutable and safe to share
/// between threads.
class EnvStream {
public:
    explicit EnvStream(EnvSpec spec) : spec_(std::move(spec)) {
        validate(spec_);
        std::visit([this](const auto& s) { init(s); }, spec_);
    }

    const EnvSpec& spec() const noexcept { return spec_; }
    std::span<const OffspringDist> components() const noexcept { return comps_; }

    std::size_t component_index(std::uint64_t k) const noexcept {
        switch (kind_) {
        case Kind::Constant: return 0;
        case Kind::Periodic: return static_cast<std::size_t>(k % comps_.size());
        case Kind::Mixture: {
            const double u = to_unit(derive_seed(seed_, {k}));
            for (std::size_t j = 0; j + 1 < cum_.size(); ++j) {
                if (u < cum_[j]) return j;
            }
            return cum_.size() - 1;
        }
        }
        return 0;
    }

    const OffspringDist& at(std::uint64_t k) const noexcept { return comps_[component_index(k)]; }
    double sigma2_at(std::uint64_t k) const noexcept { return at(k).variance(); }
    double mean_at(std::uint64_t k) const noexcept { return at(k).mean(); }

    /// Long-run average variance: the constant, the period average, or the
    /// annealed E[Var(mu_0)] for a mixture.
    double sigma2() const noexcept {
        double s = 0.0;
        for (std::size_t j = 0; j < comps_.size(); ++j) s += w_[j] * comps_[j].variance();
        return s;
    }

    /// Long-run average of mu_k({0}) (E[mu_0({0})] for a mixture).
    double c() const noexcept {
        double s = 0.0;
        for (std::size_t j = 0; j < comps_.size(); ++j) s += w_[j] * comps_[j].prob(0);
        return s;
    }

    bool strictly_critical(double tol = kCriticalTolerance) const noexcept {
        return std::all_of(comps_.begin(), comps_.end(),
                           [tol](const OffspringDist& d) { return d.is_critical(tol); });
    }

    std::size_t max_support() const noexcept {
        std::size_t d = 0;
        for (const auto& c : comps_) d = std::max(d, c.max_support());
        return d;
    }

    bool is_mixture() const noexcept { return kind_ == Kind::Mixture; }

    /// Same environment law with a different mixture seed (identity for
    /// deterministic environments). Used for annealed replicates.
    EnvStream reseeded(std::uint64_t seed) const {
        EnvSpec s = spec_;
        if (auto* m = std::get_if<MixtureEnv>(&s)) m->seed = seed;
        return EnvStream(std::move(s));
    }

private:
    enum class Kind { Constant, Periodic, Mixture };

    void init(const ConstantEnv& s) {
        kind_ = Kind::Constant;
        comps_ = {s.dist};
        w_ = {1.0};
    }
    void init(const PeriodicEnv& s) {
        kind_ = Kind::Periodic;
        comps_ = s.period;
        w_.assign(comps_.size(), 1.0 / static_cast<double>(comps_.size()));
    }
    void init(const MixtureEnv& s) {
        kind_ = Kind::Mixture;
        comps_ = s.components;
        w_ = s.weights;
        seed_ = s.seed;
        cum_.resize(w_.size());
        double acc = 0.0;
        for (std::size_t j = 0; j < w_.size(); ++j) {
            acc += w_[j];
            cum_[j] = acc;
        }
        cum_.back() = 1.0;
    }

    EnvSpec spec_;
    Kind kind_ = Kind::Constant;
    std::vector<OffspringDist> comps_;
    std::vector<double> w_;
    std::vector<double> cum_;
    std::uint64_t seed_ = 0;
};

inline EnvStream env_stream(EnvSpec spec) { return EnvStream(std::move(spec)); }

inline void require_strictly_critical(const EnvStream& env) {
    if (!env.strictly_critical()) {
        fail(ErrorKind::NotCritical, "environment has a component with mean != 1");
    }
}

}  // namespace bpre
