#pragma once

// Pattern predicates, WL digests and the per-pattern randomized samplers.

#include "pxgl/graph.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <random>
#include <string_view>
#include <unordered_set>

namespace pxgl {

/// The seven pattern families. Ordinal order is the λ index.
enum class PatternKind : std::uint8_t { Path, Tree, Graphlet, Cycle, Clique, Wheel, Star };

inline constexpr std::size_t kNumPatternKinds = 7;
inline constexpr std::array<PatternKind, kNumPatternKinds> kAllPatternKinds = {
    PatternKind::Path,   PatternKind::Tree,  PatternKind::Graphlet, PatternKind::Cycle,
    PatternKind::Clique, PatternKind::Wheel, PatternKind::Star};

constexpr std::string_view to_string(PatternKind k) noexcept {
    switch (k) {
        case PatternKind::Path: return "path";
        case PatternKind::Tree: return "tree";
        case PatternKind::Graphlet: return "graphlet";
        case PatternKind::Cycle: return "cycle";
        case PatternKind::Clique: return "clique";
        case PatternKind::Wheel: return "wheel";
        case PatternKind::Star: return "star";
    }
    return "?";
}

inline std::optional<PatternKind> parse_pattern_kind(std::string_view s) {
    for (auto k : kAllPatternKinds) {
        auto name = to_string(k);
        if (s.size() == name.size() &&
            std::equal(s.begin(), s.end(), name.begin(),
                       [](char a, char b) { return std::tolower(a) == b; }))
            return k;
    }
    // accept plural forms ("cycles")
    if (!s.empty() && (s.back() == 's' || s.back() == 'S')) return parse_pattern_kind(s.substr(0, s.size() - 1));
    return std::nullopt;
}

constexpr std::size_t index_of(PatternKind k) noexcept { return static_cast<std::size_t>(k); }

/// Largest subgraph any sampler emits.
inline constexpr std::size_t kMaxSampleNodes = 8;

namespace detail {

inline bool has_vertex_of_degree(const Graph& g, std::size_t d, std::size_t* which = nullptr) {
    for (std::size_t v = 0; v < g.num_nodes(); ++v)
        if (g.degree(v) == d) {
            if (which) *which = v;
            return true;
        }
    return false;
}

inline bool all_degrees(const Graph& g, std::size_t d) {
    for (std::size_t v = 0; v < g.num_nodes(); ++v)
        if (g.degree(v) != d) return false;
    return true;
}

}  // namespace detail

/// Structural test of `g` (an induced subgraph) against a pattern family.
/// Size floors: Path/Tree/Cycle/Clique/Star >= 3 nodes, Wheel >= 4, Graphlet 3..5.
inline bool is_pattern(const Graph& g, PatternKind kind) {
    const std::size_t n = g.num_nodes();
    const std::size_t m = g.num_edges();
    switch (kind) {
        case PatternKind::Path: {
            if (n < 3 || m != n - 1 || !is_connected(g)) return false;
            for (std::size_t v = 0; v < n; ++v)
                if (g.degree(v) > 2) return false;
            return true;
        }
        case PatternKind::Tree:
            return n >= 3 && m == n - 1 && is_connected(g);
        case PatternKind::Graphlet:
            return n >= 3 && n <= 5 && is_connected(g);
        case PatternKind::Cycle:
            return n >= 3 && detail::all_degrees(g, 2) && is_connected(g);
        case PatternKind::Clique:
            return n >= 3 && m == n * (n - 1) / 2;
        case PatternKind::Wheel: {
            if (n < 4 || m != 2 * (n - 1)) return false;
            // hub adjacent to everything; the rim must be a single cycle, i.e.
            // every rim vertex has degree 3 (two rim neighbours + hub)
            for (std::size_t hub = 0; hub < n; ++hub) {
                if (g.degree(hub) != n - 1) continue;
                bool rim_ok = true;
                for (std::size_t v = 0; v < n && rim_ok; ++v)
                    if (v != hub && g.degree(v) != 3) rim_ok = false;
                if (!rim_ok) continue;
                std::vector<std::size_t> rim;
                for (std::size_t v = 0; v < n; ++v)
                    if (v != hub) rim.push_back(v);
                if (is_connected(induced_subgraph(g, rim).graph)) return true;
            }
            return false;
        }
        case PatternKind::Star: {
            if (n < 3 || m != n - 1) return false;
            return detail::has_vertex_of_degree(g, n - 1);
        }
    }
    return false;
}

inline bool is_pattern(const Subgraph& s, PatternKind kind) { return is_pattern(s.graph, kind); }

/// 1-WL colour refinement digest. Initial colour hashes the discrete node
/// label (constant when absent); each round hashes (colour, sorted neighbour
/// colours); the digest hashes the sorted final colours with |V| and |E|.
inline std::uint64_t wl_hash(const Graph& g, int iterations) {
    if (iterations < 0) throw InputError("wl_hash: iterations must be >= 0");
    const std::size_t n = g.num_nodes();
    std::vector<std::uint64_t> colour(n), next(n), buf;
    for (std::size_t v = 0; v < n; ++v)
        colour[v] = g.has_node_labels() ? hash_combine(0x5157u, static_cast<std::uint64_t>(g.node_labels()[v]))
                                        : 0x5157u;
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t v = 0; v < n; ++v) {
            buf.clear();
            for (auto u : g.neighbors(v)) buf.push_back(colour[u]);
            std::sort(buf.begin(), buf.end());
            std::uint64_t h = hash_combine(0xA11CEu, colour[v]);
            for (auto c : buf) h = hash_combine(h, c);
            next[v] = h;
        }
        colour.swap(next);
    }
    std::sort(colour.begin(), colour.end());
    std::uint64_t h = hash_combine(hash_combine(0xD16E57u, n), g.num_edges());
    for (auto c : colour) h = hash_combine(h, c);
    return h;
}

inline std::uint64_t wl_hash(const Subgraph& s, int iterations) { return wl_hash(s.graph, iterations); }

inline constexpr int kDedupWlIterations = 3;

/// Per-(graph, pattern) set of unique sampled subgraphs.
struct PatternSampleSet {
    std::size_t graph_id = 0;
    PatternKind kind = PatternKind::Path;
    std::vector<Subgraph> samples;
    std::vector<std::uint64_t> wl_hashes;
    std::size_t requested_q = 0;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
};

namespace detail {

using Rng = std::mt19937_64;

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline std::size_t uniform_size(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Self-avoiding random walk of target length uniform in [3, min(n, 8)].
inline std::optional<std::vector<std::size_t>> grow_path(const Graph& g, Rng& rng) {
    const std::size_t n = g.num_nodes();
    if (n < 3) return std::nullopt;
    const std::size_t target = uniform_size(rng, 3, std::min(n, kMaxSampleNodes));
    std::vector<std::size_t> walk{uniform_index(rng, n)};
    std::vector<std::uint8_t> used(n, 0);
    used[walk[0]] = 1;
    std::vector<std::size_t> options;
    while (walk.size() < target) {
        options.clear();
        for (auto v : g.neighbors(walk.back()))
            if (!used[v]) options.push_back(v);
        if (options.empty()) break;
        auto v = options[uniform_index(rng, options.size())];
        used[v] = 1;
        walk.push_back(v);
    }
    if (walk.size() < 3) return std::nullopt;
    return walk;
}

// Random frontier-edge growth (tree) or frontier-node growth (graphlet).
inline std::optional<std::vector<std::size_t>> grow_connected(const Graph& g, Rng& rng,
                                                              std::size_t target) {
    const std::size_t n = g.num_nodes();
    std::vector<std::size_t> nodes{uniform_index(rng, n)};
    std::vector<std::uint8_t> in(n, 0);
    in[nodes[0]] = 1;
    std::vector<Edge> frontier;
    while (nodes.size() < target) {
        frontier.clear();
        for (auto u : nodes)
            for (auto v : g.neighbors(u))
                if (!in[v]) frontier.emplace_back(u, v);
        if (frontier.empty()) break;
        auto v = frontier[uniform_index(rng, frontier.size())].second;
        in[v] = 1;
        nodes.push_back(v);
    }
    if (nodes.size() < 3) return std::nullopt;
    return nodes;
}

inline std::optional<std::vector<std::size_t>> grow_tree(const Graph& g, Rng& rng) {
    if (g.num_nodes() < 3) return std::nullopt;
    return grow_connected(g, rng, uniform_size(rng, 3, std::min(g.num_nodes(), kMaxSampleNodes)));
}

inline std::optional<std::vector<std::size_t>> grow_graphlet(const Graph& g, Rng& rng) {
    if (g.num_nodes() < 3) return std::nullopt;
    return grow_connected(g, rng, uniform_size(rng, 3, std::min<std::size_t>(g.num_nodes(), 5)));
}

// Randomized DFS over the vertices allowed by `mask`; returns one back-edge
// cycle chosen uniformly among those found, at most `max_len` long.
inline std::optional<std::vector<std::size_t>> grow_cycle_masked(const Graph& g, Rng& rng,
                                                                 const std::vector<std::uint8_t>& mask,
                                                                 std::size_t max_len) {
    std::vector<std::size_t> allowed;
    for (std::size_t v = 0; v < g.num_nodes(); ++v)
        if (mask[v]) allowed.push_back(v);
    if (allowed.size() < 3) return std::nullopt;
    const std::size_t n = g.num_nodes();
    const std::size_t root = allowed[uniform_index(rng, allowed.size())];

    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::vector<std::size_t> depth(n, kNone), parent(n, kNone);
    std::vector<std::uint8_t> on_stack(n, 0);
    struct Frame {
        std::size_t v;
        std::vector<std::size_t> order;
        std::size_t next = 0;
    };
    auto shuffled_neighbors = [&](std::size_t v) {
        std::vector<std::size_t> nb;
        for (auto u : g.neighbors(v))
            if (mask[u]) nb.push_back(u);
        std::shuffle(nb.begin(), nb.end(), rng);
        return nb;
    };
    std::vector<std::pair<std::size_t, std::size_t>> back_edges;  // (descendant, ancestor)
    std::vector<Frame> stack;
    depth[root] = 0;
    on_stack[root] = 1;
    stack.push_back({root, shuffled_neighbors(root)});
    while (!stack.empty()) {
        auto& f = stack.back();
        if (f.next == f.order.size()) {
            on_stack[f.v] = 0;
            stack.pop_back();
            continue;
        }
        const std::size_t u = f.order[f.next++];
        const std::size_t v = f.v;
        if (depth[u] == kNone) {
            depth[u] = depth[v] + 1;
            parent[u] = v;
            on_stack[u] = 1;
            stack.push_back({u, shuffled_neighbors(u)});
        } else if (on_stack[u] && u != parent[v] && depth[v] - depth[u] + 1 <= max_len) {
            back_edges.emplace_back(v, u);
        }
    }
    if (back_edges.empty()) return std::nullopt;
    auto [desc, anc] = back_edges[uniform_index(rng, back_edges.size())];
    std::vector<std::size_t> cycle;
    for (std::size_t x = desc; x != anc; x = parent[x]) cycle.push_back(x);
    cycle.push_back(anc);
    return cycle;
}

inline std::optional<std::vector<std::size_t>> grow_cycle(const Graph& g, Rng& rng) {
    std::vector<std::uint8_t> mask(g.num_nodes(), 1);
    return grow_cycle_masked(g, rng, mask, kMaxSampleNodes);
}

// Random edge, then common neighbours in random order while they keep the set complete.
inline std::optional<std::vector<std::size_t>> grow_clique(const Graph& g, Rng& rng) {
    if (g.num_edges() == 0) return std::nullopt;
    auto [a, b] = g.edges()[uniform_index(rng, g.num_edges())];
    std::vector<std::size_t> clique{a, b};
    std::vector<std::size_t> candidates;
    for (auto v : g.neighbors(a))
        if (v != b && g.has_edge(v, b)) candidates.push_back(v);
    std::shuffle(candidates.begin(), candidates.end(), rng);
    for (auto v : candidates) {
        if (clique.size() >= kMaxSampleNodes) break;
        if (std::all_of(clique.begin(), clique.end(), [&](std::size_t c) { return g.has_edge(c, v); }))
            clique.push_back(v);
    }
    if (clique.size() < 3) return std::nullopt;
    return clique;
}

// Hub of degree >= 3 plus a back-edge cycle found inside its neighbourhood.
inline std::optional<std::vector<std::size_t>> grow_wheel(const Graph& g, Rng& rng) {
    std::vector<std::size_t> hubs;
    for (std::size_t v = 0; v < g.num_nodes(); ++v)
        if (g.degree(v) >= 3) hubs.push_back(v);
    if (hubs.empty()) return std::nullopt;
    const std::size_t hub = hubs[uniform_index(rng, hubs.size())];
    std::vector<std::uint8_t> mask(g.num_nodes(), 0);
    for (auto v : g.neighbors(hub)) mask[v] = 1;
    auto rim = grow_cycle_masked(g, rng, mask, kMaxSampleNodes - 1);
    if (!rim) return std::nullopt;
    rim->insert(rim->begin(), hub);
    return rim;
}

// Centre plus a maximal random set of pairwise non-adjacent neighbours (>= 2 leaves).
inline std::optional<std::vector<std::size_t>> grow_star(const Graph& g, Rng& rng) {
    std::vector<std::size_t> centres;
    for (std::size_t v = 0; v < g.num_nodes(); ++v)
        if (g.degree(v) >= 2) centres.push_back(v);
    if (centres.empty()) return std::nullopt;
    const std::size_t c = centres[uniform_index(rng, centres.size())];
    std::vector<std::size_t> nb = g.neighbors(c);
    std::shuffle(nb.begin(), nb.end(), rng);
    std::vector<std::size_t> star{c};
    for (auto v : nb) {
        if (star.size() >= kMaxSampleNodes) break;
        bool independent = true;
        for (std::size_t i = 1; i < star.size() && independent; ++i)
            if (g.has_edge(star[i], v)) independent = false;
        if (independent) star.push_back(v);
    }
    if (star.size() < 3) return std::nullopt;
    return star;
}

inline std::optional<std::vector<std::size_t>> grow(const Graph& g, PatternKind kind, Rng& rng) {
    switch (kind) {
        case PatternKind::Path: return grow_path(g, rng);
        case PatternKind::Tree: return grow_tree(g, rng);
        case PatternKind::Graphlet: return grow_graphlet(g, rng);
        case PatternKind::Cycle: return grow_cycle(g, rng);
        case PatternKind::Clique: return grow_clique(g, rng);
        case PatternKind::Wheel: return grow_wheel(g, rng);
        case PatternKind::Star: return grow_star(g, rng);
    }
    return std::nullopt;
}

}  // namespace detail

/// Draws up to q WL-distinct subgraphs of `kind` from g. Deterministic for
/// fixed (g, kind, seed); may return fewer than q samples, including none.
inline PatternSampleSet sample_pattern_set(const Graph& g, PatternKind kind, std::size_t q,
                                           std::uint64_t seed, std::size_t max_attempts) {
    if (q < 1) throw InputError("sample_pattern_set: q must be >= 1");
    if (max_attempts < q) throw InputError("sample_pattern_set: max_attempts must be >= q");
    PatternSampleSet set;
    set.graph_id = g.id();
    set.kind = kind;
    set.requested_q = q;
    detail::Rng rng(seed);
    for (std::size_t attempt = 0; attempt < max_attempts && set.samples.size() < q; ++attempt) {
        auto nodes = detail::grow(g, kind, rng);
        if (!nodes) continue;
        Subgraph s = induced_subgraph(g, *nodes);
        if (!is_pattern(s, kind)) continue;
        const auto h = wl_hash(s, kDedupWlIterations);
        if (std::find(set.wl_hashes.begin(), set.wl_hashes.end(), h) != set.wl_hashes.end()) continue;
        set.wl_hashes.push_back(h);
        set.samples.push_back(std::move(s));
    }
    return set;
}

inline PatternSampleSet sample_pattern_set(const Graph& g, PatternKind kind, std::size_t q,
                                           std::uint64_t seed) {
    return sample_pattern_set(g, kind, q, seed, 50 * q);
}

/// Per-graph sampling seed; independent of processing order.
inline std::uint64_t sampling_seed(std::uint64_t master, std::size_t graph_id, PatternKind kind) {
    return derive_seed(master, "patterns.sample", {graph_id, index_of(kind)});
}

/// Rebuilds a sample set from stored node-id lists (used by caches and
/// perturbation trials that must encode the same node subsets).
inline PatternSampleSet sample_set_from_node_ids(const Graph& g, PatternKind kind, std::size_t q,
                                                 const std::vector<std::vector<std::size_t>>& node_sets) {
    PatternSampleSet set;
    set.graph_id = g.id();
    set.kind = kind;
    set.requested_q = q;
    for (const auto& ids : node_sets) {
        Subgraph s = induced_subgraph(g, ids);
        set.wl_hashes.push_back(wl_hash(s, kDedupWlIterations));
        set.samples.push_back(std::move(s));
    }
    return set;
}

}  // namespace pxgl
