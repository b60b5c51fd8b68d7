#pragma once

// Depth-first coding of forests: Lukasiewicz path, running minimum, height
// process, the spine statistic, (n, delta, gamma)-blocks, bad vertices and
// excursion extraction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "bpre/env.hpp"
#include "bpre/error.hpp"
#include "bpre/rng.hpp"
#include "bpre/tree.hpp"

namespace bpre {

/// Coding processes of the first N depth-first steps.
///
/// L and H have N entries (one per visited vertex); X and I have N + 1
/// entries with X_0 = I_0 = 0 and X_{n+1} = X_n + L_n - 1.
struct ExplorationPath {
    std::vector<std::uint32_t> L;
    std::vector<std::int64_t> X;
    std::vector<std::int64_t> I;
    std::vector<std::int32_t> H;

    std::size_t steps() const noexcept { return L.size(); }

    void reserve(std::size_t n) {
        L.reserve(n);
        H.reserve(n);
        X.reserve(n + 1);
        I.reserve(n + 1);
    }

    void push(std::uint32_t children, std::int32_t height) {
        if (X.empty()) {
            X.push_back(0);
            I.push_back(0);
        }
        L.push_back(children);
        H.push_back(height);
        const std::int64_t next = X.back() + static_cast<std::int64_t>(children) - 1;
        X.push_back(next);
        I.push_back(std::min(I.back(), next));
    }

    /// X_n - I_n, the path reflected above its running minimum.
    std::int64_t reflected(std::size_t n) const { return X[n] - I[n]; }
};

inline ExplorationPath dfs_encode(const DfsNodes& f,
                                  std::optional<std::size_t> n_limit = std::nullopt) {
    if (f.empty()) fail(ErrorKind::BadParameters, "cannot encode an empty forest");
    const std::size_t n = std::min(f.size(), n_limit.value_or(f.size()));
    ExplorationPath p;
    p.reserve(n);
    p.X.push_back(0);
    p.I.push_back(0);
    for (std::size_t v = 0; v < n; ++v) p.push(f.degrees()[v], f.heights()[v]);
    return p;
}

/// First n depth-first steps of an i.i.d. sequence of BPVE trees, generated
/// on the fly without storing the forest. Tree i uses the same substream as
/// in sample_forest_until, so the result is the prefix of that forest's path.
inline ExplorationPath sample_exploration(const EnvStream& env, std::size_t n, Rng& rng) {
    const std::uint64_t base = rng();
    detail::LevelCursor cursor(env, 0);
    ExplorationPath p;
    p.reserve(n);
    p.X.push_back(0);
    p.I.push_back(0);
    std::vector<std::uint32_t> open;
    Rng tree_rng(0);
    std::uint64_t tree = 0;
    for (std::size_t step = 0; step < n; ++step) {
        while (!open.empty() && open.back() == 0) open.pop_back();
        std::size_t h = 0;
        if (open.empty()) {
            tree_rng.reseed(derive_seed(base, {tree++}));
        } else {
            --open.back();
            h = open.size();
        }
        const auto l = static_cast<std::uint32_t>(cursor.at(h).sample(tree_rng));
        p.push(l, static_cast<std::int32_t>(h));
        if (l > 0) open.push_back(l);
    }
    return p;
}

/// Sum over the ancestors of x of the number of children lying to the right
/// of the next ancestor (or of x itself), computed from the tree structure.
inline std::int64_t spine_statistic(const DfsNodes& f, NodeId x) {
    if (x < 0 || static_cast<std::size_t>(x) >= f.size()) {
        fail(ErrorKind::BadParameters, "node index out of range");
    }
    std::int64_t total = 0;
    for (NodeId v = x; f.parent(v) != kNoNode; v = f.parent(v)) {
        for (NodeId s = f.next_sibling(v); s != kNoNode; s = f.next_sibling(s)) ++total;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Blocks

struct Block {
    std::size_t i = 0;
    std::size_t k = 0;
    std::uint64_t size = 0;
    double weight = 0.0;  // sum of sigma^2_{h(v)} over the block
    bool good = false;    // meaningful only when size > 0
};

struct BlockTable {
    std::uint64_t roots_per_block = 0;  // ceil(delta sqrt n)
    std::uint64_t block_height = 0;     // ceil(gamma sqrt n)
    std::size_t columns = 0;            // i ranges over [0, columns)
    std::size_t rows = 0;               // k ranges over [0, rows)
    std::vector<Block> blocks;          // row-major: blocks[k * columns + i]
    std::uint64_t bad_count = 0;        // nonempty blocks that are not eps-good

    const Block& at(std::size_t i, std::size_t k) const { return blocks[k * columns + i]; }
};

/// Block B_{i,k} gathers the descendants, within heights [kG, (k+1)G), of
/// the lexicographic vertices v_{j,kG} with iD < j <= (i+1)D (1-based j),
/// where D = ceil(delta sqrt n) and G = ceil(gamma sqrt n). The table is
/// rectangular; windows beyond the width of a generation are empty.
inline BlockTable blocks(const Forest& f, const EnvStream& env, std::uint64_t n, double delta,
                         double gamma, double sigma2, double eps) {
    if (!(delta > 0) || !(gamma > 0) || !(eps > 0) || !(sigma2 > 0) || n == 0) {
        fail(ErrorKind::BadParameters, "blocks need n >= 1 and positive delta, gamma, sigma2, eps");
    }
    BlockTable t;
    const double root_n = std::sqrt(static_cast<double>(n));
    t.roots_per_block = static_cast<std::uint64_t>(std::ceil(delta * root_n));
    t.block_height = static_cast<std::uint64_t>(std::ceil(gamma * root_n));
    if (f.empty()) return t;

    const Levels lv = f.levels();
    const std::size_t hmax = lv.generations() - 1;
    t.rows = hmax / t.block_height + 1;
    for (std::size_t k = 0; k < t.rows; ++k) {
        const std::size_t width = lv.generation(k * t.block_height).size();
        t.columns = std::max<std::size_t>(t.columns, (width + t.roots_per_block - 1) / t.roots_per_block);
    }
    t.blocks.resize(t.rows * t.columns);
    for (std::size_t k = 0; k < t.rows; ++k) {
        for (std::size_t i = 0; i < t.columns; ++i) {
            t.blocks[k * t.columns + i].i = i;
            t.blocks[k * t.columns + i].k = k;
        }
    }

    std::vector<NodeId> ancestor(hmax + 1, kNoNode);
    for (std::size_t v = 0; v < f.size(); ++v) {
        const auto h = static_cast<std::size_t>(f.heights()[v]);
        ancestor[h] = static_cast<NodeId>(v);
        const std::size_t k = h / t.block_height;
        const NodeId root = ancestor[k * t.block_height];
        const std::size_t i = lv.rank[static_cast<std::size_t>(root)] / t.roots_per_block;
        Block& b = t.blocks[k * t.columns + i];
        ++b.size;
        b.weight += env.sigma2_at(h);
    }
    for (auto& b : t.blocks) {
        if (b.size == 0) continue;
        b.good = std::abs(b.weight / (static_cast<double>(b.size) * sigma2) - 1.0) <= 16.0 * eps;
        if (!b.good) ++t.bad_count;
    }
    return t;
}

// ---------------------------------------------------------------------------
// Bad vertices

struct BadVertexReport {
    std::uint64_t count = 0;
    std::vector<std::size_t> indices;              // depth-first labels
    double fraction = 0.0;                         // count / number of steps
    std::vector<double> fraction_per_generation;   // bad / Z_h, with h = 0 always 0
};

/// Vertex x (height > 0) is eps-bad when |(X_x - I_x)/h(x) - sigma2/2| >= eps,
/// using X - I at its depth-first label as the spine statistic.
inline BadVertexReport bad_vertices(const ExplorationPath& path, double eps, double sigma2,
                                    bool keep_indices = true) {
    if (!(eps > 0)) fail(ErrorKind::BadParameters, "eps must be positive");
    BadVertexReport r;
    std::vector<std::uint64_t> per_gen_bad;
    std::vector<std::uint64_t> per_gen_all;
    const double target = sigma2 / 2.0;
    for (std::size_t n = 0; n < path.steps(); ++n) {
        const auto h = static_cast<std::size_t>(path.H[n]);
        if (per_gen_all.size() <= h) {
            per_gen_all.resize(h + 1, 0);
            per_gen_bad.resize(h + 1, 0);
        }
        ++per_gen_all[h];
        if (h == 0) continue;
        const double ratio = static_cast<double>(path.reflected(n)) / static_cast<double>(h);
        if (std::abs(ratio - target) >= eps) {
            ++r.count;
            ++per_gen_bad[h];
            if (keep_indices) r.indices.push_back(n);
        }
    }
    r.fraction = path.steps() ? static_cast<double>(r.count) / static_cast<double>(path.steps()) : 0.0;
    r.fraction_per_generation.resize(per_gen_all.size(), 0.0);
    for (std::size_t h = 0; h < per_gen_all.size(); ++h) {
        if (per_gen_all[h]) {
            r.fraction_per_generation[h] =
                static_cast<double>(per_gen_bad[h]) / static_cast<double>(per_gen_all[h]);
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Excursions

struct Excursion {
    std::size_t start = 0;
    std::size_t end = 0;
    std::size_t length = 0;
    std::size_t tree_index = 0;
};

struct ExcursionSet {
    std::vector<Excursion> items;  // longest first; ties by earlier start
};

/// One excursion per tree completed inside the path. A tree starting at
/// step s ends at the first r > s with X_r = X_s - 1.
inline ExcursionSet excursions(const ExplorationPath& path) {
    ExcursionSet out;
    if (path.X.empty()) return out;
    std::size_t start = 0;
    std::size_t tree = 0;
    for (std::size_t r = 1; r < path.X.size(); ++r) {
        if (path.X[r] < path.X[start]) {
            out.items.push_back({start, r, r - start, tree++});
            start = r;
        }
    }
    std::stable_sort(out.items.begin(), out.items.end(),
                     [](const Excursion& a, const Excursion& b) { return a.length > b.length; });
    return out;
}

// ---------------------------------------------------------------------------
// Conditioning on size

struct ConditionOptions {
    std::size_t node_cap = kDefaultTreeNodeCap;
    /// Maximum number of rejected draws; 0 means 10^4 * sqrt(n).
    std::uint64_t retry_budget = 0;
    /// Treat a tree that hits node_cap as rejected instead of failing. The
    /// sample then follows the law of T given n <= |T| <= node_cap.
    bool reject_oversize = false;
};

/// Tree conditioned on |T| >= n, by rejection.
inline PlaneTree conditioned_tree(const EnvStream& env, std::size_t n, Rng& rng,
                                  const ConditionOptions& opt = {}) {
    if (n == 0) fail(ErrorKind::BadParameters, "n must be >= 1");
    const std::uint64_t budget =
        opt.retry_budget ? opt.retry_budget
                         : static_cast<std::uint64_t>(1e4 * std::sqrt(static_cast<double>(n)));
    detail::LevelCursor cursor(env, 0);
    std::vector<std::uint32_t> deg;
    for (std::uint64_t attempt = 0; attempt <= budget; ++attempt) {
        deg.clear();
        try {
            detail::sample_tree_degrees(cursor, opt.node_cap, rng, deg);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::NodeCapExceeded && opt.reject_oversize) continue;
            throw;
        }
        if (deg.size() >= n) return PlaneTree::from_degrees(deg);
    }
    fail(ErrorKind::RetryBudgetExceeded,
         "no tree of size >= " + std::to_string(n) + " in " + std::to_string(budget) + " retries");
}

// ---------------------------------------------------------------------------
// CSV export

inline void write_path_csv(std::ostream& os, const ExplorationPath& p) {
    os << "step,L,X,I,H\r\n";
    for (std::size_t n = 0; n < p.X.size(); ++n) {
        os << n << ',';
        if (n < p.steps()) os << p.L[n];
        os << ',' << p.X[n] << ',' << p.I[n] << ',';
        if (n < p.steps()) os << p.H[n];
        os << "\r\n";
    }
}

inline void write_excursions_csv(std::ostream& os, const ExcursionSet& e) {
    os << "start,end,length,tree_index\r\n";
    for (const auto& x : e.items) {
        os << x.start << ',' << x.end << ',' << x.length << ',' << x.tree_index << "\r\n";
    }
}

}  // namespace bpre
