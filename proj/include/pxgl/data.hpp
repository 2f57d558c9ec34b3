#pragma once

// TUDataset ingestion and export, planted-pattern synthetic datasets, and
// stratified splits.

#include "pxgl/patterns.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace pxgl {

struct Dataset {
    std::string name;
    std::vector<Graph> graphs;
    std::size_t num_classes = 0;  // 0 when unlabeled
    std::size_t feature_dim = 0;
    std::string provenance;
    std::size_t node_label_dim = 0;  // leading one-hot columns from node labels
    bool has_attributes = false;     // trailing columns from node attributes

    std::size_t size() const noexcept { return graphs.size(); }
    bool labeled() const noexcept { return num_classes > 0; }

    std::vector<int> labels() const {
        std::vector<int> out;
        out.reserve(graphs.size());
        for (const auto& g : graphs) out.push_back(g.label().value_or(-1));
        return out;
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Non-blank lines with their 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::string>> read_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ParseError(p.string() + ":0: cannot open file");
    std::vector<std::pair<std::size_t, std::string>> out;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        auto t = trim(line);
        if (!t.empty()) out.emplace_back(no, std::move(t));
    }
    return out;
}

inline std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(s);
    while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
    return out;
}

inline long long parse_int(const std::string& tok, const std::filesystem::path& p, std::size_t line) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty())
        throw ParseError(p.string() + ":" + std::to_string(line) + ": expected integer, got '" + tok + "'");
    return v;
}

inline double parse_real(const std::string& tok, const std::filesystem::path& p, std::size_t line) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty())
        throw ParseError(p.string() + ":" + std::to_string(line) + ": expected real, got '" + tok + "'");
    return v;
}

inline std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Loads `<dir>/<name>_*.txt`. Edges are symmetrised and deduplicated,
/// self-loops dropped; graph labels remapped to [0, C) in sorted order.
inline Dataset load_tudataset(const std::filesystem::path& dir, const std::string& name) {
    namespace fs = std::filesystem;
    auto file = [&](const char* suffix) { return dir / (name + "_" + suffix + ".txt"); };
    const fs::path a_path = file("A"), ind_path = file("graph_indicator");
    for (const auto& p : {a_path, ind_path})
        if (!fs::exists(p)) throw ParseError(p.string() + ":0: missing mandatory file");

    const auto ind_lines = detail::read_lines(ind_path);
    const std::size_t total_nodes = ind_lines.size();
    std::vector<std::size_t> node_graph(total_nodes);
    std::size_t num_graphs = 0;
    for (std::size_t k = 0; k < total_nodes; ++k) {
        const auto v = detail::parse_int(ind_lines[k].second, ind_path, ind_lines[k].first);
        if (v < 1) throw ParseError(ind_path.string() + ":" + std::to_string(ind_lines[k].first) + ": graph id must be >= 1");
        node_graph[k] = static_cast<std::size_t>(v - 1);
        num_graphs = std::max(num_graphs, node_graph[k] + 1);
    }
    if (num_graphs == 0) throw ParseError(ind_path.string() + ":0: no nodes");
    std::vector<std::size_t> first_node(num_graphs, total_nodes), count(num_graphs, 0);
    for (std::size_t k = 0; k < total_nodes; ++k) {
        const auto gi = node_graph[k];
        if (count[gi] > 0 && first_node[gi] + count[gi] != k)
            throw ParseError(ind_path.string() + ":" + std::to_string(ind_lines[k].first) +
                             ": nodes of a graph must be contiguous");
        if (count[gi] == 0) first_node[gi] = k;
        ++count[gi];
    }
    for (std::size_t gi = 0; gi < num_graphs; ++gi)
        if (count[gi] == 0) throw ParseError(ind_path.string() + ":0: graph " + std::to_string(gi + 1) + " has no nodes");

    std::vector<std::vector<Edge>> edges(num_graphs);
    for (const auto& [no, line] : detail::read_lines(a_path)) {
        const auto parts = detail::split_commas(line);
        if (parts.size() != 2)
            throw ParseError(a_path.string() + ":" + std::to_string(no) + ": expected 'i, j'");
        const auto u = detail::parse_int(parts[0], a_path, no), v = detail::parse_int(parts[1], a_path, no);
        if (u < 1 || v < 1 || static_cast<std::size_t>(u) > total_nodes || static_cast<std::size_t>(v) > total_nodes)
            throw ParseError(a_path.string() + ":" + std::to_string(no) + ": node id out of range");
        const auto uu = static_cast<std::size_t>(u - 1), vv = static_cast<std::size_t>(v - 1);
        if (node_graph[uu] != node_graph[vv])
            throw ParseError(a_path.string() + ":" + std::to_string(no) + ": edge crosses two graphs");
        if (uu == vv) continue;
        const auto gi = node_graph[uu];
        edges[gi].emplace_back(uu - first_node[gi], vv - first_node[gi]);
    }

    std::vector<int> node_labels;
    std::size_t label_dim = 0;
    if (const auto p = file("node_labels"); fs::exists(p)) {
        const auto lines = detail::read_lines(p);
        if (lines.size() != total_nodes)
            throw ParseError(p.string() + ":" + std::to_string(lines.empty() ? 0 : lines.back().first) +
                             ": expected " + std::to_string(total_nodes) + " node labels");
        std::vector<long long> raw;
        for (const auto& [no, line] : lines) raw.push_back(detail::parse_int(detail::split_commas(line).front(), p, no));
        std::vector<long long> uniq(raw);
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        for (auto v : raw)
            node_labels.push_back(static_cast<int>(std::lower_bound(uniq.begin(), uniq.end(), v) - uniq.begin()));
        label_dim = uniq.size();
    }

    Matrix attributes;
    if (const auto p = file("node_attributes"); fs::exists(p)) {
        const auto lines = detail::read_lines(p);
        if (lines.size() != total_nodes)
            throw ParseError(p.string() + ":" + std::to_string(lines.empty() ? 0 : lines.back().first) +
                             ": expected " + std::to_string(total_nodes) + " attribute rows");
        for (std::size_t k = 0; k < lines.size(); ++k) {
            const auto parts = detail::split_commas(lines[k].second);
            if (k == 0) attributes.resize(static_cast<Eigen::Index>(total_nodes), static_cast<Eigen::Index>(parts.size()));
            if (static_cast<Eigen::Index>(parts.size()) != attributes.cols())
                throw ParseError(p.string() + ":" + std::to_string(lines[k].first) + ": inconsistent attribute count");
            for (std::size_t c = 0; c < parts.size(); ++c)
                attributes(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) =
                    detail::parse_real(parts[c], p, lines[k].first);
        }
    }

    std::vector<std::optional<int>> labels(num_graphs);
    std::size_t num_classes = 0;
    if (const auto p = file("graph_labels"); fs::exists(p)) {
        const auto lines = detail::read_lines(p);
        if (lines.size() != num_graphs)
            throw ParseError(p.string() + ":" + std::to_string(lines.empty() ? 0 : lines.back().first) +
                             ": expected " + std::to_string(num_graphs) + " graph labels");
        std::vector<long long> raw;
        for (const auto& [no, line] : lines) raw.push_back(detail::parse_int(line, p, no));
        std::vector<long long> uniq(raw);
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        for (std::size_t gi = 0; gi < num_graphs; ++gi)
            labels[gi] = static_cast<int>(std::lower_bound(uniq.begin(), uniq.end(), raw[gi]) - uniq.begin());
        num_classes = uniq.size();
    }

    Dataset ds;
    ds.name = name;
    ds.num_classes = num_classes;
    ds.provenance = "tudataset:" + dir.string();
    ds.node_label_dim = label_dim;
    ds.has_attributes = attributes.size() > 0;
    for (std::size_t gi = 0; gi < num_graphs; ++gi) {
        const std::size_t n = count[gi], off = first_node[gi];
        std::vector<int> nl;
        if (!node_labels.empty()) nl.assign(node_labels.begin() + off, node_labels.begin() + off + n);
        const Eigen::Index width = static_cast<Eigen::Index>(label_dim) + attributes.cols();
        Matrix x;
        if (width > 0) {
            x = Matrix::Zero(static_cast<Eigen::Index>(n), width);
            for (std::size_t k = 0; k < n; ++k) {
                if (!nl.empty()) x(k, nl[k]) = 1.0;
                if (attributes.cols() > 0)
                    x.row(k).tail(attributes.cols()) = attributes.row(static_cast<Eigen::Index>(off + k));
            }
        }
        Graph g(n, edges[gi], width > 0 ? x : Matrix(Matrix::Zero(static_cast<Eigen::Index>(n), 1)), nl, labels[gi], gi);
        if (width == 0) g = g.with_features(degree_one_hot(g));
        ds.graphs.push_back(std::move(g));
    }
    ds.feature_dim = ds.graphs.front().feature_dim();
    return ds;
}

/// Writes `ds` in TUDataset layout; node labels and attributes are written
/// when the dataset carries them.
inline void write_tudataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* suffix) {
        std::ofstream f(dir / (ds.name + "_" + suffix + ".txt"));
        if (!f) throw InputError("write_tudataset: cannot write into " + dir.string());
        return f;
    };
    auto a = open("A"), ind = open("graph_indicator");
    std::size_t offset = 0;
    for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
        const auto& g = ds.graphs[gi];
        for (std::size_t u = 0; u < g.num_nodes(); ++u) {
            ind << gi + 1 << '\n';
            for (auto v : g.neighbors(u)) a << offset + u + 1 << ", " << offset + v + 1 << '\n';
        }
        offset += g.num_nodes();
    }
    if (ds.labeled()) {
        auto gl = open("graph_labels");
        for (const auto& g : ds.graphs) gl << g.label().value_or(0) << '\n';
    }
    if (ds.node_label_dim > 0) {
        auto nl = open("node_labels");
        for (const auto& g : ds.graphs)
            for (auto l : g.node_labels()) nl << l << '\n';
    }
    if (ds.has_attributes) {
        auto at = open("node_attributes");
        const auto start = static_cast<Eigen::Index>(ds.node_label_dim);
        for (const auto& g : ds.graphs)
            for (Eigen::Index r = 0; r < g.features().rows(); ++r) {
                for (Eigen::Index c = start; c < g.features().cols(); ++c)
                    at << (c > start ? ", " : "") << detail::format_real(g.features()(r, c));
                at << '\n';
            }
    }
}

/// Two-class planted-pattern generator configuration.
struct SynthSpec {
    PatternKind pattern_a = PatternKind::Clique;
    std::size_t size_a = 5;
    PatternKind pattern_b = PatternKind::Cycle;
    std::size_t size_b = 6;
    std::size_t count_a = 50;
    std::size_t count_b = 50;
    std::size_t n_min = 12;
    std::size_t n_max = 20;
    double edge_prob = 0.1;
};

namespace detail {

// Edges that realise `kind` on `nodes` (in order); nodes[0] is the hub/centre.
inline std::vector<Edge> pattern_edges(PatternKind kind, const std::vector<std::size_t>& nodes) {
    const std::size_t k = nodes.size();
    std::vector<Edge> e;
    switch (kind) {
        case PatternKind::Clique:
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = i + 1; j < k; ++j) e.emplace_back(nodes[i], nodes[j]);
            break;
        case PatternKind::Cycle:
            for (std::size_t i = 0; i < k; ++i) e.emplace_back(nodes[i], nodes[(i + 1) % k]);
            break;
        case PatternKind::Path:
            for (std::size_t i = 0; i + 1 < k; ++i) e.emplace_back(nodes[i], nodes[i + 1]);
            break;
        case PatternKind::Star:
            for (std::size_t i = 1; i < k; ++i) e.emplace_back(nodes[0], nodes[i]);
            break;
        case PatternKind::Wheel:
            for (std::size_t i = 1; i < k; ++i) {
                e.emplace_back(nodes[0], nodes[i]);
                e.emplace_back(nodes[i], nodes[i + 1 < k ? i + 1 : 1]);
            }
            break;
        default:
            throw InputError("synth_pattern_dataset: planting '" + std::string(to_string(kind)) + "' is not supported");
    }
    return e;
}

inline std::size_t pattern_floor(PatternKind kind) { return kind == PatternKind::Wheel ? 4 : 3; }

// Plants one induced copy of the pattern. Cliques take random nodes (adding
// edges keeps them induced); sparser patterns take the lowest-degree nodes
// and replace every edge among them.
inline Graph plant(const Graph& base, PatternKind kind, std::size_t size, std::mt19937_64& rng) {
    const std::size_t n = base.num_nodes();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    if (kind != PatternKind::Clique)
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return base.degree(a) < base.degree(b); });
    std::vector<std::size_t> nodes(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(size));
    std::shuffle(nodes.begin(), nodes.end(), rng);
    std::vector<std::uint8_t> chosen(n, 0);
    for (auto v : nodes) chosen[v] = 1;
    std::vector<Edge> edges;
    for (auto [u, v] : base.edges())
        if (kind == PatternKind::Clique || !(chosen[u] && chosen[v])) edges.emplace_back(u, v);
    for (auto e : pattern_edges(kind, nodes)) edges.push_back(e);
    return base.with_edges(edges);
}

}  // namespace detail

/// Class 0 graphs carry one planted `pattern_a`, class 1 graphs one
/// `pattern_b`; base graphs are G(n, p) with n uniform in [n_min, n_max].
/// Features are degree one-hot.
inline Dataset synth_pattern_dataset(const SynthSpec& spec, std::uint64_t seed) {
    if (spec.count_a + spec.count_b == 0) throw InputError("synth_pattern_dataset: empty dataset requested");
    if (spec.n_min < 1 || spec.n_min > spec.n_max) throw InputError("synth_pattern_dataset: invalid node range");
    if (!(spec.edge_prob >= 0.0 && spec.edge_prob <= 1.0)) throw InputError("synth_pattern_dataset: edge_prob outside [0, 1]");
    for (auto [kind, size] : {std::pair{spec.pattern_a, spec.size_a}, std::pair{spec.pattern_b, spec.size_b}}) {
        detail::pattern_edges(kind, {});  // rejects unsupported kinds
        if (size < detail::pattern_floor(kind))
            throw InputError("synth_pattern_dataset: " + std::string(to_string(kind)) + " needs at least " +
                             std::to_string(detail::pattern_floor(kind)) + " nodes");
        if (size > spec.n_min) throw InputError("synth_pattern_dataset: pattern larger than the smallest graph");
    }
    Dataset ds;
    ds.name = "synth_" + std::string(to_string(spec.pattern_a)) + std::to_string(spec.size_a) + "_" +
              std::string(to_string(spec.pattern_b)) + std::to_string(spec.size_b);
    ds.num_classes = 2;
    ds.provenance = "synthetic";
    const std::size_t total = spec.count_a + spec.count_b;
    for (std::size_t i = 0; i < total; ++i) {
        std::mt19937_64 rng(derive_seed(seed, "data.synth", {i}));
        const int label = i < spec.count_a ? 0 : 1;
        const std::size_t n = spec.n_min + static_cast<std::size_t>(rng() % (spec.n_max - spec.n_min + 1));
        std::bernoulli_distribution coin(spec.edge_prob);
        std::vector<Edge> edges;
        for (std::size_t u = 0; u < n; ++u)
            for (std::size_t v = u + 1; v < n; ++v)
                if (coin(rng)) edges.emplace_back(u, v);
        Graph base(n, edges, Matrix::Zero(static_cast<Eigen::Index>(n), 1), {}, label, i);
        Graph g = label == 0 ? detail::plant(base, spec.pattern_a, spec.size_a, rng)
                             : detail::plant(base, spec.pattern_b, spec.size_b, rng);
        ds.graphs.push_back(g.with_features(degree_one_hot(g)));
    }
    ds.feature_dim = ds.graphs.front().feature_dim();
    return ds;
}

struct Split {
    std::vector<std::size_t> train, val, test;
    bool stratified = false;
    bool fallback = false;  // a class had fewer than 3 members
};

/// Seeded split with exact sizes floor(n r_val), floor(n r_test) and the
/// remainder in train. Stratified by class when `labels` is non-empty.
inline Split split(std::span<const int> labels, std::size_t n, double r_train, double r_val, double r_test,
                   std::uint64_t seed) {
    if (!(r_train > 0 && r_val > 0 && r_test > 0)) throw InputError("split: ratios must be positive");
    if (std::abs(r_train + r_val + r_test - 1.0) > 1e-9) throw InputError("split: ratios must sum to 1");
    if (!labels.empty() && labels.size() != n) throw InputError("split: label count does not match n");
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r_val + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r_test + 1e-9));
    std::mt19937_64 rng(derive_seed(seed, "data.split"));
    Split s;

    std::map<int, std::vector<std::size_t>> classes;
    for (std::size_t i = 0; i < labels.size(); ++i) classes[labels[i]].push_back(i);
    bool stratify = !labels.empty();
    for (const auto& [c, members] : classes)
        if (members.size() < 3) {
            stratify = false;
            s.fallback = true;
        }

    if (!stratify) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        s.val.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
        s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val),
                      idx.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
        s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), idx.end());
    } else {
        s.stratified = true;
        // Train share is rounded per class; the holdout of each class is then divided between val and
        // test by largest remainder against the global val target.
        std::vector<std::size_t> val_take, test_take, hold;
        std::size_t total_hold = 0;
        for (const auto& [c, members] : classes) {
            const auto m = members.size();
            const auto train_c = std::clamp<std::size_t>(
                static_cast<std::size_t>(std::llround(static_cast<double>(m) * r_train)), 1, m);
            hold.push_back(m - train_c);
            total_hold += hold.back();
        }
        const double val_share = r_val / (r_val + r_test);
        const auto val_target = static_cast<std::size_t>(std::llround(static_cast<double>(total_hold) * val_share));
        std::vector<std::pair<double, std::size_t>> rem;
        std::size_t used = 0;
        for (std::size_t k = 0; k < hold.size(); ++k) {
            const double exact = static_cast<double>(hold[k]) * val_share;
            val_take.push_back(static_cast<std::size_t>(std::floor(exact + 1e-9)));
            rem.emplace_back(exact - std::floor(exact + 1e-9), k);
            used += val_take.back();
        }
        std::stable_sort(rem.begin(), rem.end(), [](auto& x, auto& y) { return x.first > y.first; });
        for (const auto& [r, k] : rem) {
            if (used >= val_target) break;
            if (val_take[k] < hold[k]) {
                ++val_take[k];
                ++used;
            }
        }
        for (std::size_t k = 0; k < hold.size(); ++k) test_take.push_back(hold[k] - val_take[k]);
        std::size_t k = 0;
        for (auto& [c, members] : classes) {
            std::shuffle(members.begin(), members.end(), rng);
            auto it = members.begin();
            s.val.insert(s.val.end(), it, it + static_cast<std::ptrdiff_t>(val_take[k]));
            it += static_cast<std::ptrdiff_t>(val_take[k]);
            s.test.insert(s.test.end(), it, it + static_cast<std::ptrdiff_t>(test_take[k]));
            it += static_cast<std::ptrdiff_t>(test_take[k]);
            s.train.insert(s.train.end(), it, members.end());
            ++k;
        }
        for (auto* part : {&s.train, &s.val, &s.test}) std::shuffle(part->begin(), part->end(), rng);
    }
    return s;
}

inline Split split(const Dataset& ds, double r_train, double r_val, double r_test, std::uint64_t seed) {
    const auto labels = ds.labeled() ? ds.labels() : std::vector<int>{};
    return split(labels, ds.size(), r_train, r_val, r_test, seed);
}

}  // namespace pxgl
