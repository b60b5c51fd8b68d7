#pragma once

// Plane trees and forests stored as flat depth-first arrays, plus samplers
// for BPVE generation sizes, full trees/forests and the Geiger tree.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "bpre/env.hpp"
#include "bpre/error.hpp"
#include "bpre/rng.hpp"

namespace bpre {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

inline constexpr std::size_t kDefaultTreeNodeCap = 10'000'000;
inline constexpr std::size_t kDefaultForestNodeCap = 100'000'000;
inline constexpr std::uint64_t kDefaultPopulationCap = 100'000'000;

/// Structure-of-arrays storage for nodes labelled 0..N-1 in depth-first
/// order. Children of v are v+1 (if any) followed by the next_sibling chain.
class DfsNodes {
public:
    DfsNodes() = default;

    /// Rebuild parent/height/sibling links from a depth-first degree
    /// sequence. A node encountered with no open parent starts a new tree;
    /// returns the label of every root. Throws if the last tree is
    /// incomplete.
    static DfsNodes from_degrees(std::span<const std::uint32_t> degrees,
                                 std::vector<NodeId>* roots = nullptr) {
        if (degrees.size() > static_cast<std::size_t>(INT32_MAX)) {
            fail(ErrorKind::BadParameters, "too many nodes for 32-bit labels");
        }
        DfsNodes out;
        const std::size_t n = degrees.size();
        out.child_count_.assign(degrees.begin(), degrees.end());
        out.parent_.assign(n, kNoNode);
        out.height_.assign(n, 0);
        out.next_sibling_.assign(n, kNoNode);
        struct Open {
            NodeId node;
            std::uint32_t remaining;
            NodeId last_child;
        };
        std::vector<Open> stack;
        for (std::size_t idx = 0; idx < n; ++idx) {
            const auto v = static_cast<NodeId>(idx);
            while (!stack.empty() && stack.back().remaining == 0) stack.pop_back();
            if (stack.empty()) {
                if (roots) roots->push_back(v);
            } else {
                Open& top = stack.back();
                --top.remaining;
                out.parent_[idx] = top.node;
                out.height_[idx] = out.height_[static_cast<std::size_t>(top.node)] + 1;
                if (top.last_child != kNoNode) {
                    out.next_sibling_[static_cast<std::size_t>(top.last_child)] = v;
                }
                top.last_child = v;
            }
            if (degrees[idx] > 0) stack.push_back({v, degrees[idx], kNoNode});
        }
        for (const auto& o : stack) {
            if (o.remaining != 0) fail(ErrorKind::BadParameters, "degree sequence ends inside a tree");
        }
        return out;
    }

    std::size_t size() const noexcept { return child_count_.size(); }
    bool empty() const noexcept { return child_count_.empty(); }

    std::uint32_t child_count(NodeId v) const { return child_count_[idx(v)]; }
    NodeId parent(NodeId v) const { return parent_[idx(v)]; }
    std::int32_t height(NodeId v) const { return height_[idx(v)]; }
    NodeId next_sibling(NodeId v) const { return next_sibling_[idx(v)]; }
    NodeId first_child(NodeId v) const { return child_count_[idx(v)] > 0 ? v + 1 : kNoNode; }

    std::vector<NodeId> children(NodeId v) const {
        std::vector<NodeId> out;
        for (NodeId c = first_child(v); c != kNoNode; c = next_sibling(c)) out.push_back(c);
        return out;
    }

    std::span<const std::uint32_t> degrees() const noexcept { return child_count_; }
    std::span<const std::int32_t> heights() const noexcept { return height_; }
    std::span<const NodeId> parents() const noexcept { return parent_; }

private:
    static std::size_t idx(NodeId v) { return static_cast<std::size_t>(v); }

    std::vector<std::uint32_t> child_count_;
    std::vector<NodeId> parent_;
    std::vector<std::int32_t> height_;
    std::vector<NodeId> next_sibling_;
};

/// Rooted ordered tree; node 0 is the root.
class PlaneTree : public DfsNodes {
public:
    PlaneTree() : PlaneTree(from_degrees(std::vector<std::uint32_t>{0})) {}

    static PlaneTree from_degrees(std::span<const std::uint32_t> degrees) {
        if (degrees.empty()) fail(ErrorKind::BadParameters, "a tree has at least one node");
        std::vector<NodeId> roots;
        DfsNodes nodes = DfsNodes::from_degrees(degrees, &roots);
        if (roots.size() != 1) fail(ErrorKind::BadParameters, "degree sequence encodes a forest");
        return PlaneTree(std::move(nodes));
    }

    static PlaneTree from_degrees(const std::vector<std::uint32_t>& degrees) {
        return from_degrees(std::span<const std::uint32_t>(degrees));
    }

private:
    explicit PlaneTree(DfsNodes nodes) : DfsNodes(std::move(nodes)) {}
};

/// Per-generation listing of a forest in lexicographic order: generation k
/// holds v_{1,k}, v_{2,k}, ... from left to right across all trees.
struct Levels {
    std::vector<std::size_t> offsets;  // generation k occupies [offsets[k], offsets[k+1])
    std::vector<NodeId> nodes;
    std::vector<std::uint32_t> rank;   // rank[v] = position of v within its generation

    std::size_t generations() const noexcept { return offsets.empty() ? 0 : offsets.size() - 1; }
    std::span<const NodeId> generation(std::size_t k) const {
        return {nodes.data() + offsets[k], offsets[k + 1] - offsets[k]};
    }
};

/// Ordered sequence of plane trees sharing one global depth-first labelling.
class Forest : public DfsNodes {
public:
    Forest() = default;

    static Forest from_degrees(std::span<const std::uint32_t> degrees) {
        Forest f;
        std::vector<NodeId> roots;
        static_cast<DfsNodes&>(f) = DfsNodes::from_degrees(degrees, &roots);
        f.tree_start_.assign(roots.begin(), roots.end());
        f.tree_start_.push_back(static_cast<NodeId>(degrees.size()));
        return f;
    }

    static Forest from_degrees(const std::vector<std::uint32_t>& degrees) {
        return from_degrees(std::span<const std::uint32_t>(degrees));
    }

    static Forest from_trees(std::span<const PlaneTree> trees) {
        std::vector<std::uint32_t> deg;
        for (const auto& t : trees) deg.insert(deg.end(), t.degrees().begin(), t.degrees().end());
        return from_degrees(deg);
    }

    std::size_t tree_count() const noexcept {
        return tree_start_.empty() ? 0 : tree_start_.size() - 1;
    }
    NodeId tree_root(std::size_t i) const { return tree_start_[i]; }
    std::size_t tree_size(std::size_t i) const {
        return static_cast<std::size_t>(tree_start_[i + 1] - tree_start_[i]);
    }

    /// Index of the tree containing node v.
    std::size_t tree_of(NodeId v) const {
        auto it = std::upper_bound(tree_start_.begin(), tree_start_.end(), v);
        return static_cast<std::size_t>(it - tree_start_.begin()) - 1;
    }

    PlaneTree tree(std::size_t i) const {
        auto d = degrees().subspan(static_cast<std::size_t>(tree_start_[i]), tree_size(i));
        return PlaneTree::from_degrees(d);
    }

    /// Counting sort of the nodes by height; depth-first labels increase
    /// left to right within a generation, so the result is the
    /// lexicographic order.
    Levels levels() const {
        Levels lv;
        std::int32_t hmax = -1;
        for (auto h : heights()) hmax = std::max(hmax, h);
        lv.offsets.assign(static_cast<std::size_t>(hmax + 2), 0);
        for (auto h : heights()) ++lv.offsets[static_cast<std::size_t>(h) + 1];
        for (std::size_t k = 1; k < lv.offsets.size(); ++k) lv.offsets[k] += lv.offsets[k - 1];
        lv.nodes.resize(size());
        lv.rank.resize(size());
        std::vector<std::size_t> fill(lv.offsets.begin(), lv.offsets.end() - 1);
        for (std::size_t v = 0; v < size(); ++v) {
            const auto h = static_cast<std::size_t>(heights()[v]);
            lv.rank[v] = static_cast<std::uint32_t>(fill[h] - lv.offsets[h]);
            lv.nodes[fill[h]++] = static_cast<NodeId>(v);
        }
        return lv;
    }

private:
    std::vector<NodeId> tree_start_;
};

/// Spine-marked Geiger tree truncated at height m. Every vertex of height
/// <= m is present; spine[m] and the other height-m vertices are recorded
/// with zero children.
struct GeigerTree {
    PlaneTree tree;
    std::vector<NodeId> spine;                  // v_0, ..., v_m
    std::vector<std::uint32_t> spine_offspring; // size-biased counts at v_0..v_{m-1}
    std::vector<std::uint32_t> spine_rank;      // 0-based position of v_{k+1} among its siblings

    std::size_t depth() const noexcept { return spine_offspring.size(); }
    /// Number of siblings of v_{k+1} to its right.
    std::uint32_t right_siblings(std::size_t k) const {
        return spine_offspring[k] - 1 - spine_rank[k];
    }
};

struct TreeStats {
    std::int64_t height = 0;
    std::uint64_t width = 0;
    std::uint64_t size = 0;
    std::vector<std::uint64_t> generation_sizes;
    std::uint64_t tree_count = 0;
};

// ---------------------------------------------------------------------------
// Sampling

namespace detail {

/// Caches mu_{base+h} per height so the hot loop avoids rehashing.
class LevelCursor {
public:
    LevelCursor(const EnvStream& env, std::uint64_t base) : env_(env), base_(base) {}

    const OffspringDist& at(std::size_t h) {
        while (cache_.size() <= h) cache_.push_back(&env_.at(base_ + cache_.size()));
        return *cache_[h];
    }

private:
    const EnvStream& env_;
    std::uint64_t base_;
    std::vector<const OffspringDist*> cache_;
};

/// Append the depth-first degree sequence of one BPVE tree whose root sits
/// at generation `root_height`. Vertices at relative height `max_height`
/// (when set) are recorded with no children. Returns the node count.
inline std::size_t sample_tree_degrees(LevelCursor& cursor, std::size_t node_cap, Rng& rng,
                                       std::vector<std::uint32_t>& out,
                                       std::optional<std::size_t> max_height = std::nullopt) {
    const std::size_t start = out.size();
    std::vector<std::uint32_t> open;
    auto emit = [&](std::size_t h) {
        std::uint32_t l = 0;
        if (!max_height || h < *max_height) l = static_cast<std::uint32_t>(cursor.at(h).sample(rng));
        out.push_back(l);
        if (out.size() - start > node_cap) {
            fail(ErrorKind::NodeCapExceeded, "tree exceeded " + std::to_string(node_cap) + " nodes");
        }
        if (l > 0) open.push_back(l);
    };
    emit(0);
    while (!open.empty()) {
        if (open.back() == 0) {
            open.pop_back();
            continue;
        }
        --open.back();
        emit(open.size());
    }
    return out.size() - start;
}

}  // namespace detail

/// Generation sizes Z_0 = z0, ..., Z_{k_max} of a BPVE started at generation k0.
inline std::vector<std::uint64_t> sample_generation_sizes(
    const EnvStream& env, std::uint64_t z0, std::size_t k_max, Rng& rng, std::uint64_t k0 = 0,
    std::uint64_t population_cap = kDefaultPopulationCap) {
    if (z0 == 0) fail(ErrorKind::BadParameters, "z0 must be >= 1");
    std::vector<std::uint64_t> z(k_max + 1, 0);
    z[0] = z0;
    std::uint64_t simulated = 0;
    for (std::size_t k = 0; k < k_max; ++k) {
        const OffspringDist& mu = env.at(k0 + k);
        simulated += z[k];
        if (simulated > population_cap) {
            fail(ErrorKind::PopulationCapExceeded,
                 "simulated more than " + std::to_string(population_cap) + " individuals");
        }
        std::uint64_t next = 0;
        for (std::uint64_t i = 0; i < z[k]; ++i) next += mu.sample(rng);
        z[k + 1] = next;
        if (next == 0) break;
    }
    return z;
}

/// One BPVE tree in environment (mu_{root_height + k})_k.
inline PlaneTree sample_tree(const EnvStream& env, std::uint64_t root_height, std::size_t node_cap,
                             Rng& rng, std::optional<std::size_t> max_height = std::nullopt) {
    detail::LevelCursor cursor(env, root_height);
    std::vector<std::uint32_t> deg;
    detail::sample_tree_degrees(cursor, node_cap, rng, deg, max_height);
    return PlaneTree::from_degrees(deg);
}

/// I.i.d. trees (each rooted at generation 0) until at least n vertices
/// exist. Tree i draws from its own substream derived from one word of `rng`.
inline Forest sample_forest_until(const EnvStream& env, std::size_t n, Rng& rng,
                                  std::size_t tree_cap = kDefaultTreeNodeCap,
                                  std::size_t forest_cap = kDefaultForestNodeCap) {
    if (n == 0) fail(ErrorKind::BadParameters, "n must be >= 1");
    const std::uint64_t base = rng();
    detail::LevelCursor cursor(env, 0);
    std::vector<std::uint32_t> deg;
    for (std::uint64_t i = 0; deg.size() < n; ++i) {
        Rng tree_rng(derive_seed(base, {i}));
        detail::sample_tree_degrees(cursor, tree_cap, tree_rng, deg);
        if (deg.size() > forest_cap) {
            fail(ErrorKind::NodeCapExceeded, "forest exceeded " + std::to_string(forest_cap) + " nodes");
        }
    }
    return Forest::from_degrees(deg);
}

/// Geiger tree with spine v_0..v_m. Spine vertex v_k gets a size-biased
/// number of children, v_{k+1} is uniform among them, and every other child
/// at height k+1 roots an independent BPVE in (mu_{k+1+j})_j, all truncated
/// at height m.
inline GeigerTree sample_geiger(const EnvStream& env, std::size_t m, Rng& rng,
                                std::size_t node_cap = kDefaultTreeNodeCap) {
    require_strictly_critical(env);
    std::vector<OffspringDist> biased;
    for (const auto& c : env.components()) biased.push_back(size_biased(c));

    GeigerTree g;
    g.spine_offspring.resize(m);
    g.spine_rank.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        const auto count = static_cast<std::uint32_t>(biased[env.component_index(k)].sample(rng));
        g.spine_offspring[k] = count;
        g.spine_rank[k] = static_cast<std::uint32_t>(rng.below(count));
    }

    std::vector<std::uint32_t> deg;
    std::vector<NodeId> spine(m + 1);
    auto off_spine = [&](std::size_t k) {
        // Child of v_k: sits at generation k+1, may grow up to height m.
        detail::LevelCursor cursor(env, k + 1);
        detail::sample_tree_degrees(cursor, node_cap, rng, deg, m - (k + 1));
        if (deg.size() > node_cap) fail(ErrorKind::NodeCapExceeded, "Geiger tree exceeded node cap");
    };
    for (std::size_t k = 0; k < m; ++k) {
        spine[k] = static_cast<NodeId>(deg.size());
        deg.push_back(g.spine_offspring[k]);
        for (std::uint32_t c = 0; c < g.spine_rank[k]; ++c) off_spine(k);
    }
    spine[m] = static_cast<NodeId>(deg.size());
    deg.push_back(0);
    for (std::size_t k = m; k-- > 0;) {
        for (std::uint32_t c = g.spine_rank[k] + 1; c < g.spine_offspring[k]; ++c) off_spine(k);
    }
    g.tree = PlaneTree::from_degrees(deg);
    g.spine = std::move(spine);
    return g;
}

inline TreeStats tree_stats(const DfsNodes& nodes, std::uint64_t tree_count) {
    TreeStats s;
    s.size = nodes.size();
    s.tree_count = tree_count;
    for (auto h : nodes.heights()) {
        const auto k = static_cast<std::size_t>(h);
        if (s.generation_sizes.size() <= k) s.generation_sizes.resize(k + 1, 0);
        ++s.generation_sizes[k];
    }
    s.height = static_cast<std::int64_t>(s.generation_sizes.size()) - 1;
    for (auto z : s.generation_sizes) s.width = std::max(s.width, z);
    return s;
}

inline TreeStats tree_stats(const PlaneTree& t) { return tree_stats(t, 1); }
inline TreeStats tree_stats(const Forest& f) { return tree_stats(f, f.tree_count()); }

// ---------------------------------------------------------------------------
// Text dump: one "label parent height children" row per node, then the
// depth-first degree sequence, which alone reconstructs the forest.

inline void write_tree_dump(std::ostream& os, const DfsNodes& nodes) {
    os << "# label parent height children\n";
    for (std::size_t v = 0; v < nodes.size(); ++v) {
        const auto id = static_cast<NodeId>(v);
        os << v << ' ' << nodes.parent(id) << ' ' << nodes.height(id) << ' ' << nodes.child_count(id)
           << '\n';
    }
    os << "# degrees\n";
    for (std::size_t v = 0; v < nodes.size(); ++v) {
        if (v) os << ' ';
        os << nodes.degrees()[v];
    }
    os << '\n';
}

/// Parse the degree-sequence section of a dump produced by write_tree_dump.
inline std::vector<std::uint32_t> read_degree_sequence(std::istream& is) {
    std::string line;
    while (std::getline(is, line)) {
        if (line == "# degrees") break;
    }
    if (!is) fail(ErrorKind::BadParameters, "dump has no degree section");
    std::vector<std::uint32_t> deg;
    if (std::getline(is, line)) {
        std::istringstream ls(line);
        std::uint32_t d = 0;
        while (ls >> d) deg.push_back(d);
    }
    return deg;
}

}  // namespace bpre
