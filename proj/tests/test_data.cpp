#include "oracles.hpp"

#include "pxgl/data.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace pxgl;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = fs::temp_directory_path() / ("pxgl_" + tag + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                             "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }
    void write(const std::string& file, const std::string& body) const { std::ofstream(path_ / file) << body; }

private:
    fs::path path_;
};

std::string parse_error_of(const fs::path& dir, const std::string& name) {
    try {
        load_tudataset(dir, name);
    } catch (const ParseError& e) {
        return e.what();
    }
    return "";
}

// Exhaustive subset searches for the planted structures.
bool has_k_clique(const Graph& g, std::size_t k) {
    const std::size_t n = g.num_nodes();
    std::vector<std::size_t> idx(k);
    std::function<bool(std::size_t, std::size_t)> rec = [&](std::size_t depth, std::size_t start) {
        if (depth == k) return true;
        for (std::size_t v = start; v < n; ++v) {
            bool ok = true;
            for (std::size_t d = 0; d < depth && ok; ++d) ok = g.has_edge(idx[d], v);
            if (!ok) continue;
            idx[depth] = v;
            if (rec(depth + 1, v + 1)) return true;
        }
        return false;
    };
    return rec(0, 0);
}

bool has_induced_cycle(const Graph& g, std::size_t k) {
    const std::size_t n = g.num_nodes();
    std::vector<std::size_t> idx;
    std::function<bool(std::size_t)> rec = [&](std::size_t start) {
        if (idx.size() == k) {
            oracle::Adj a(k, std::vector<int>(k, 0));
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j < k; ++j) a[i][j] = g.has_edge(idx[i], idx[j]) ? 1 : 0;
            if (oracle::edge_count(a) != static_cast<int>(k) || !oracle::connected(a)) return false;
            for (std::size_t i = 0; i < k; ++i)
                if (std::accumulate(a[i].begin(), a[i].end(), 0) != 2) return false;
            return true;
        }
        for (std::size_t v = start; v < n; ++v) {
            idx.push_back(v);
            if (rec(v + 1)) return true;
            idx.pop_back();
        }
        return false;
    };
    return rec(0);
}

}  // namespace

TEST(LoadTudataset, SpecFixture) {
    TempDir d("fixture");
    d.write("T_A.txt", "1, 2\n2, 1\n3, 4\n4, 3\n");
    d.write("T_graph_indicator.txt", "1\n1\n2\n2\n");
    d.write("T_graph_labels.txt", "1\n-1\n");
    const Dataset ds = load_tudataset(d.path(), "T");
    ASSERT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds.num_classes, 2u);
    for (const auto& g : ds.graphs) {
        EXPECT_EQ(g.num_nodes(), 2u);
        EXPECT_EQ(g.num_edges(), 1u);
    }
    EXPECT_EQ(ds.labels(), (std::vector<int>{1, 0}));
    // no labels or attributes: degree one-hot fallback
    EXPECT_EQ(ds.feature_dim, 11u);
    EXPECT_EQ(ds.graphs[0].features()(0, 1), 1.0);
}

TEST(LoadTudataset, ToleratesFormattingVariants) {
    TempDir d("variants");
    d.write("T_A.txt", "1,2\n  2 ,  3\n3, 3\n\n");
    d.write("T_graph_indicator.txt", "1\n1\n1\n\n");
    d.write("T_node_labels.txt", "5\n7\n5\n");
    d.write("T_node_attributes.txt", "0.5, 1\n-2, 3.25\n0, 0\n");
    const Dataset ds = load_tudataset(d.path(), "T");
    ASSERT_EQ(ds.size(), 1u);
    EXPECT_FALSE(ds.labeled());
    const Graph& g = ds.graphs[0];
    EXPECT_EQ(g.num_edges(), 2u);  // listed once each, self-loop dropped
    EXPECT_EQ(ds.feature_dim, 4u);
    EXPECT_EQ(g.features().row(1), (Eigen::RowVectorXd(4) << 0, 1, -2, 3.25).finished());
}

TEST(LoadTudataset, ErrorsCarryFileAndLine) {
    TempDir d("errors");
    d.write("T_graph_indicator.txt", "1\n1\n2\n2\n");
    d.write("T_A.txt", "1, 2\n2, x\n");
    auto msg = parse_error_of(d.path(), "T");
    EXPECT_NE(msg.find("T_A.txt:2:"), std::string::npos) << msg;
    d.write("T_A.txt", "1, 2\n1, 9\n");
    msg = parse_error_of(d.path(), "T");
    EXPECT_NE(msg.find("T_A.txt:2:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("out of range"), std::string::npos);
    d.write("T_A.txt", "1, 2\n\n2, 3\n");
    msg = parse_error_of(d.path(), "T");
    EXPECT_NE(msg.find("T_A.txt:3:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("crosses"), std::string::npos);
    msg = parse_error_of(d.path(), "Missing");
    EXPECT_NE(msg.find("missing"), std::string::npos);
}

TEST(LoadTudataset, Mutag) {
    const Dataset ds = load_tudataset(PXGL_DATA_DIR "/MUTAG", "MUTAG");
    EXPECT_EQ(ds.size(), 188u);
    EXPECT_EQ(ds.num_classes, 2u);
    EXPECT_EQ(ds.feature_dim, 7u);
    for (const auto& g : ds.graphs) {
        const Matrix a = g.dense_adjacency();
        EXPECT_EQ(a, a.transpose());
        EXPECT_EQ(a.diagonal().sum(), 0.0);
        EXPECT_EQ(g.feature_dim(), ds.feature_dim);
    }
}

TEST(WriteTudataset, RoundTrip) {
    TempDir d("roundtrip");
    std::mt19937_64 rng(100);
    Dataset ds;
    ds.name = "RT";
    ds.num_classes = 3;
    ds.node_label_dim = 2;
    ds.has_attributes = true;
    for (std::size_t i = 0; i < 12; ++i) {
        Graph g = oracle::random_graph(rng, 1 + rng() % 9, 0.4, i, 2);
        std::vector<int> nl(g.num_nodes());
        Matrix x(static_cast<Eigen::Index>(g.num_nodes()), 4);
        for (std::size_t v = 0; v < nl.size(); ++v) {
            nl[v] = static_cast<int>(rng() % 2);
            x.row(static_cast<Eigen::Index>(v)) << (nl[v] == 0), (nl[v] == 1), g.features()(v, 0), -g.features()(v, 1);
        }
        ds.graphs.push_back(Graph(g.num_nodes(), g.edges(), x, nl, static_cast<int>(i % 3), i));
    }
    ds.feature_dim = 4;
    // both labels must occur for the remap to be the identity
    write_tudataset(ds, d.path());
    const Dataset back = load_tudataset(d.path(), "RT");
    ASSERT_EQ(back.size(), ds.size());
    EXPECT_EQ(back.labels(), ds.labels());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(back.graphs[i].dense_adjacency(), ds.graphs[i].dense_adjacency());
        EXPECT_EQ(back.graphs[i].features(), ds.graphs[i].features());
    }
}

TEST(SynthDataset, PlantedStructuresPresent) {
    const Dataset ds = synth_pattern_dataset({}, 3);
    ASSERT_EQ(ds.size(), 100u);
    for (const auto& g : ds.graphs) {
        EXPECT_GE(g.num_nodes(), 12u);
        EXPECT_LE(g.num_nodes(), 20u);
        if (*g.label() == 0)
            EXPECT_TRUE(has_k_clique(g, 5)) << "graph " << g.id();
        else
            EXPECT_TRUE(has_induced_cycle(g, 6)) << "graph " << g.id();
    }
}

TEST(SynthDataset, DeterministicAndValidated) {
    const Dataset a = synth_pattern_dataset({}, 11), b = synth_pattern_dataset({}, 11);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.graphs[i].edges(), b.graphs[i].edges());
        EXPECT_EQ(a.graphs[i].features(), b.graphs[i].features());
    }
    SynthSpec none;
    none.count_a = none.count_b = 0;
    EXPECT_THROW(synth_pattern_dataset(none, 0), InputError);
    SynthSpec big;
    big.size_a = 13;
    EXPECT_THROW(synth_pattern_dataset(big, 0), InputError);
}

TEST(Split, Examples) {
    std::vector<int> labels(10, 0);
    for (std::size_t i = 5; i < 10; ++i) labels[i] = 1;
    const Split s = split(labels, 10, 0.8, 0.1, 0.1, 4);
    EXPECT_EQ(s.train.size(), 8u);
    EXPECT_EQ(s.val.size(), 1u);
    EXPECT_EQ(s.test.size(), 1u);
    EXPECT_THROW(split(labels, 10, 0.8, 0.1, 0.2, 4), InputError);
}

TEST(Split, PartitionAndStratification) {
    std::mt19937_64 rng(101);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 10 + rng() % 200;
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = i < n / 2 ? 0 : 1;
        const Split s = split(labels, n, 0.8, 0.1, 0.1, rng());
        std::vector<std::size_t> all;
        for (auto* part : {&s.train, &s.val, &s.test}) all.insert(all.end(), part->begin(), part->end());
        std::sort(all.begin(), all.end());
        for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(all[i], i);
        EXPECT_TRUE(s.stratified);
        for (int c : {0, 1}) {
            const auto members = static_cast<double>(std::count(labels.begin(), labels.end(), c));
            const auto in_train = static_cast<double>(
                std::count_if(s.train.begin(), s.train.end(), [&](std::size_t i) { return labels[i] == c; }));
            EXPECT_LE(std::abs(in_train - 0.8 * members), 1.0 + 1e-9) << "n=" << n;
        }
    }
}

TEST(Split, SmallClassFallsBack) {
    std::vector<int> labels = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1};
    const Split s = split(labels, 10, 0.8, 0.1, 0.1, 0);
    EXPECT_TRUE(s.fallback);
    EXPECT_FALSE(s.stratified);
    EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), 10u);
}
