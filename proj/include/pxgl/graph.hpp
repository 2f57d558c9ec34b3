#pragma once

#include "pxgl/core.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pxgl {

using Edge = std::pair<std::size_t, std::size_t>;

/// Immutable undirected simple graph with node features.
///
/// Adjacency is kept both as a dense byte matrix (authoritative for matrix
/// work) and as sorted neighbour / edge lists. Self-loops are never stored.
/// `node_labels` holds the discrete node labels when the source provides
/// them; they seed WL colourings and are otherwise unused.
class Graph {
public:
    Graph() = default;

    Graph(std::size_t n, std::span<const Edge> edges, Matrix features,
          std::vector<int> node_labels = {}, std::optional<int> label = std::nullopt,
          std::size_t id = 0)
        : n_(n),
          adj_(n * n, 0),
          neighbors_(n),
          features_(std::move(features)),
          node_labels_(std::move(node_labels)),
          label_(label),
          id_(id) {
        if (n == 0) throw InputError("graph must have at least one node");
        if (static_cast<std::size_t>(features_.rows()) != n)
            throw InputError("feature row count " + std::to_string(features_.rows()) +
                             " does not match node count " + std::to_string(n));
        if (features_.cols() < 1) throw InputError("feature dimension must be >= 1");
        if (!node_labels_.empty() && node_labels_.size() != n)
            throw InputError("node label count does not match node count");
        for (auto [u, v] : edges) {
            if (u >= n || v >= n)
                throw InputError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                                 ") out of range for n=" + std::to_string(n));
            if (u == v) throw InputError("self-loop on node " + std::to_string(u));
            if (adj_[u * n + v]) continue;
            adj_[u * n + v] = adj_[v * n + u] = 1;
        }
        for (std::size_t u = 0; u < n; ++u)
            for (std::size_t v = 0; v < n; ++v)
                if (adj_[u * n + v]) {
                    neighbors_[u].push_back(v);
                    if (u < v) edges_.emplace_back(u, v);
                }
    }

    std::size_t num_nodes() const noexcept { return n_; }
    std::size_t num_edges() const noexcept { return edges_.size(); }
    std::size_t feature_dim() const noexcept { return static_cast<std::size_t>(features_.cols()); }

    bool has_edge(std::size_t u, std::size_t v) const noexcept { return adj_[u * n_ + v] != 0; }
    const std::vector<std::size_t>& neighbors(std::size_t u) const noexcept { return neighbors_[u]; }
    std::size_t degree(std::size_t u) const noexcept { return neighbors_[u].size(); }
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    const Matrix& features() const noexcept { return features_; }
    const std::vector<int>& node_labels() const noexcept { return node_labels_; }
    bool has_node_labels() const noexcept { return !node_labels_.empty(); }
    std::optional<int> label() const noexcept { return label_; }
    std::size_t id() const noexcept { return id_; }

    std::size_t min_degree() const noexcept {
        std::size_t m = n_;
        for (const auto& nb : neighbors_) m = std::min(m, nb.size());
        return m;
    }

    /// Dense 0/1 adjacency as a real matrix.
    Matrix dense_adjacency() const {
        Matrix a = Matrix::Zero(n_, n_);
        for (auto [u, v] : edges_) a(u, v) = a(v, u) = 1.0;
        return a;
    }

    Graph with_features(Matrix features) const {
        return Graph(n_, edges_, std::move(features), node_labels_, label_, id_);
    }
    Graph with_edges(std::span<const Edge> edges) const {
        return Graph(n_, edges, features_, node_labels_, label_, id_);
    }
    Graph with_label(std::optional<int> label) const {
        Graph g = *this;
        g.label_ = label;
        return g;
    }
    Graph with_id(std::size_t id) const {
        Graph g = *this;
        g.id_ = id;
        return g;
    }

    friend bool operator==(const Graph& a, const Graph& b) {
        return a.n_ == b.n_ && a.adj_ == b.adj_ && a.features_ == b.features_ &&
               a.node_labels_ == b.node_labels_ && a.label_ == b.label_;
    }

private:
    std::size_t n_ = 0;
    std::vector<std::uint8_t> adj_;
    std::vector<std::vector<std::size_t>> neighbors_;
    std::vector<Edge> edges_;
    Matrix features_;
    std::vector<int> node_labels_;
    std::optional<int> label_;
    std::size_t id_ = 0;
};

/// Induced subgraph of a parent graph. `graph` is indexed 0..|V_S|-1 in the
/// order of `node_ids`; its features and node labels are copies of the parent rows.
struct Subgraph {
    std::size_t parent_id = 0;
    std::vector<std::size_t> node_ids;
    Graph graph;

    std::size_t size() const noexcept { return node_ids.size(); }
};

inline Subgraph induced_subgraph(const Graph& g, std::span<const std::size_t> node_ids) {
    if (node_ids.empty()) throw InputError("induced_subgraph: empty node list");
    const std::size_t n = g.num_nodes();
    std::vector<std::uint8_t> seen(n, 0);
    for (auto v : node_ids) {
        if (v >= n)
            throw InputError("induced_subgraph: node " + std::to_string(v) +
                             " out of range for n=" + std::to_string(n));
        if (seen[v]) throw InputError("induced_subgraph: duplicate node " + std::to_string(v));
        seen[v] = 1;
    }
    const std::size_t k = node_ids.size();
    std::vector<Edge> edges;
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b)
            if (g.has_edge(node_ids[a], node_ids[b])) edges.emplace_back(a, b);
    Matrix feats(k, g.features().cols());
    std::vector<int> labels;
    if (g.has_node_labels()) labels.reserve(k);
    for (std::size_t a = 0; a < k; ++a) {
        feats.row(a) = g.features().row(node_ids[a]);
        if (g.has_node_labels()) labels.push_back(g.node_labels()[node_ids[a]]);
    }
    return Subgraph{g.id(), std::vector<std::size_t>(node_ids.begin(), node_ids.end()),
                    Graph(k, edges, std::move(feats), std::move(labels), std::nullopt, g.id())};
}

inline Subgraph induced_subgraph(const Graph& g, std::initializer_list<std::size_t> node_ids) {
    std::vector<std::size_t> ids(node_ids);
    return induced_subgraph(g, std::span<const std::size_t>(ids));
}

/// U = D^-1/2 (I + A) D^-1/2 with D = diag(1^T (I + A)).
inline Matrix normalized_adjacency(const Graph& g) {
    const std::size_t n = g.num_nodes();
    Vector inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i)
        inv_sqrt(i) = 1.0 / std::sqrt(static_cast<double>(g.degree(i) + 1));
    Matrix u = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i) u(i, i) = inv_sqrt(i) * inv_sqrt(i);
    for (auto [a, b] : g.edges()) u(a, b) = u(b, a) = inv_sqrt(a) * inv_sqrt(b);
    return u;
}

/// Fallback node features: one-hot of min(degree, cap); width cap + 1.
inline Matrix degree_one_hot(const Graph& g, std::size_t cap = 10) {
    Matrix x = Matrix::Zero(g.num_nodes(), cap + 1);
    for (std::size_t v = 0; v < g.num_nodes(); ++v) x(v, std::min(g.degree(v), cap)) = 1.0;
    return x;
}

inline bool is_connected(const Graph& g) {
    const std::size_t n = g.num_nodes();
    std::vector<std::uint8_t> seen(n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
        auto u = stack.back();
        stack.pop_back();
        for (auto v : g.neighbors(u))
            if (!seen[v]) {
                seen[v] = 1;
                ++count;
                stack.push_back(v);
            }
    }
    return count == n;
}

}  // namespace pxgl
