#pragma once

// Config-driven commands behind the `pxgl` executable. Every command writes
// run_manifest.json (the fully materialised config) and metrics.json into the
// output directory; JSON and CSV outputs depend only on config and seed.

#include "pxgl/bounds.hpp"
#include "pxgl/data.hpp"
#include "pxgl/eval.hpp"
#include "pxgl/kernels.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace pxgl::cli {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr int kConfigVersion = 1;
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitViolation = 2;

struct DatasetConfig {
    std::string kind = "synthetic";  // "synthetic" | "tudataset"
    std::string dir;
    std::string name;
    SynthSpec synth;
};

struct EgkSettings {
    KernelObjective objective = KernelObjective::Scl;
    double mu = 1.0;
    EgkConfig kernels;
    OptimizerConfig optimizer;
};

struct BoundSettings {
    std::size_t trials = 100;
    PerturbConfig perturb;
    DominanceMode mode = DominanceMode::WholeGraph;
};

struct RunConfig {
    DatasetConfig dataset;
    std::vector<PatternKind> patterns{kAllPatternKinds.begin(), kAllPatternKinds.end()};
    std::size_t q = 10;
    std::size_t max_attempts = 0;  // 0: 50 q
    std::string model_preset = "desk";
    ModelConfig model;  // input_dim and num_classes filled from the dataset
    TrainConfig train;
    double split_train = 0.8, split_val = 0.1, split_test = 0.1;
    EgkSettings egk;
    BoundSettings bounds;
    std::string eval_features = "embeddings";  // "embeddings" | "kernel_rows"
    int kmeans_restarts = 10;
    std::string checkpoint;  // empty: <out>/checkpoint.json
    std::string cache_dir;   // empty: <out>/cache
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::string out = "pxgl_out";

    std::size_t attempts() const { return max_attempts ? max_attempts : 50 * q; }
    fs::path checkpoint_path() const { return checkpoint.empty() ? fs::path(out) / "checkpoint.json" : fs::path(checkpoint); }
    fs::path cache_path() const { return cache_dir.empty() ? fs::path(out) / "cache" : fs::path(cache_dir); }
};

// ---------------------------------------------------------------- parsing

namespace detail {

// A JSON object whose keys must all be consumed; anything left over is an
// unknown key and rejected.
class Section {
public:
    Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw InputError("config: " + where() + " must be an object");
    }

    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    template <class T>
    void read(const std::string& key, T& out) {
        used_.insert(key);
        if (!has(key)) return;
        const Json& v = j_.at(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) fail(key, "a boolean");
            out = v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) fail(key, "an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_unsigned() || v.get<long long>() >= 0)
                    out = v.get<T>();
                else
                    fail(key, "a non-negative integer");
            } else {
                out = v.get<T>();
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) fail(key, "a number");
            out = v.get<T>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) fail(key, "a string");
            out = v.get<std::string>();
        } else {
            static_assert(sizeof(T) == 0, "unsupported config field type");
        }
    }

    Section child(const std::string& key) {
        used_.insert(key);
        static const Json empty = Json::object();
        return Section(has(key) ? j_.at(key) : empty, where(key));
    }

    const Json* raw(const std::string& key) {
        used_.insert(key);
        return has(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!used_.count(k)) throw InputError("config: unknown key '" + where(k) + "'");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw InputError("config: " + where(key) + " must be " + what);
    }

    std::string where(const std::string& key = "") const {
        if (key.empty()) return path_.empty() ? "<root>" : path_;
        return path_.empty() ? key : path_ + "." + key;
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> used_;
};

inline PatternKind pattern_or_throw(const std::string& s, const std::string& where) {
    auto k = parse_pattern_kind(s);
    if (!k) throw InputError("config: " + where + ": unknown pattern '" + s + "'");
    return *k;
}

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw InputError("config: " + msg);
}

}  // namespace detail

inline std::string to_string(KernelObjective o) { return o == KernelObjective::Scl ? "scl" : "kl"; }
inline std::string to_string(DominanceMode m) { return m == DominanceMode::WholeGraph ? "whole_graph" : "sampled"; }

/// Parses and validates a config document. Unknown keys anywhere are errors.
inline RunConfig parse_config(const Json& j) {
    RunConfig c;
    detail::Section root(j, "");
    int version = kConfigVersion;
    root.read("version", version);
    detail::require(version == kConfigVersion, "unsupported version " + std::to_string(version));

    {
        auto d = root.child("dataset");
        d.read("kind", c.dataset.kind);
        d.read("dir", c.dataset.dir);
        d.read("name", c.dataset.name);
        std::string a = std::string(to_string(c.dataset.synth.pattern_a)), b = std::string(to_string(c.dataset.synth.pattern_b));
        d.read("pattern_a", a);
        d.read("pattern_b", b);
        c.dataset.synth.pattern_a = detail::pattern_or_throw(a, "dataset.pattern_a");
        c.dataset.synth.pattern_b = detail::pattern_or_throw(b, "dataset.pattern_b");
        d.read("size_a", c.dataset.synth.size_a);
        d.read("size_b", c.dataset.synth.size_b);
        d.read("count_a", c.dataset.synth.count_a);
        d.read("count_b", c.dataset.synth.count_b);
        d.read("n_min", c.dataset.synth.n_min);
        d.read("n_max", c.dataset.synth.n_max);
        d.read("edge_prob", c.dataset.synth.edge_prob);
        d.finish();
        detail::require(c.dataset.kind == "synthetic" || c.dataset.kind == "tudataset",
                        "dataset.kind must be 'synthetic' or 'tudataset'");
        if (c.dataset.kind == "tudataset")
            detail::require(!c.dataset.dir.empty() && !c.dataset.name.empty(),
                            "dataset.dir and dataset.name are required for a tudataset");
    }

    if (const Json* p = root.raw("patterns")) {
        detail::require(p->is_array() && !p->empty(), "patterns must be a non-empty array of names");
        c.patterns.clear();
        for (const auto& e : *p) {
            detail::require(e.is_string(), "patterns must contain strings");
            const auto k = detail::pattern_or_throw(e.get<std::string>(), "patterns");
            detail::require(std::find(c.patterns.begin(), c.patterns.end(), k) == c.patterns.end(),
                            "patterns lists '" + std::string(to_string(k)) + "' twice");
            c.patterns.push_back(k);
        }
    }
    root.read("q", c.q);
    detail::require(c.q >= 1, "q must be >= 1");
    root.read("max_attempts", c.max_attempts);
    detail::require(c.max_attempts == 0 || c.max_attempts >= c.q, "max_attempts must be 0 or >= q");

    {
        auto m = root.child("model");
        m.read("preset", c.model_preset);
        detail::require(c.model_preset == "desk" || c.model_preset == "paper", "model.preset must be 'desk' or 'paper'");
        if (c.model_preset == "paper") c.model = ModelConfig::paper_preset(0, 2);
        m.read("hidden_dim", c.model.hidden_dim);
        m.read("out_dim", c.model.out_dim);
        m.read("gcn_layers", c.model.gcn_layers);
        m.read("classifier_layers", c.model.classifier_layers);
        m.read("classifier_hidden", c.model.classifier_hidden);
        std::string act(to_string(c.model.activation));
        m.read("activation", act);
        detail::require(act == "relu" || act == "identity", "model.activation must be 'relu' or 'identity'");
        c.model.activation = act == "relu" ? Activation::Relu : Activation::Identity;
        m.finish();
        detail::require(c.model.hidden_dim >= 1 && c.model.out_dim >= 1 && c.model.classifier_hidden >= 1,
                        "model dimensions must be >= 1");
        detail::require(c.model.gcn_layers >= 1 && c.model.classifier_layers >= 1, "model layer counts must be >= 1");
    }
    c.model.kinds = c.patterns;

    {
        auto t = root.child("train");
        std::string obj = std::string(to_string(c.train.objective));
        t.read("objective", obj);
        detail::require(obj == "supervised" || obj == "unsupervised", "train.objective must be 'supervised' or 'unsupervised'");
        c.train.objective = obj == "supervised" ? Objective::Supervised : Objective::Unsupervised;
        t.read("epochs", c.train.epochs);
        t.read("step", c.train.step);
        t.read("momentum", c.train.momentum);
        t.read("batch_size", c.train.batch_size);
        t.read("alternate", c.train.alternate);
        t.read("gamma", c.train.gamma);
        t.finish();
        detail::require(c.train.step >= 0, "train.step must be >= 0");
        detail::require(c.train.momentum >= 0 && c.train.momentum < 1, "train.momentum must lie in [0, 1)");
        detail::require(c.train.batch_size >= 1, "train.batch_size must be >= 1");
        detail::require(c.train.gamma >= 0, "train.gamma must be >= 0 (0 selects the median heuristic)");
    }

    {
        auto s = root.child("split");
        s.read("train", c.split_train);
        s.read("val", c.split_val);
        s.read("test", c.split_test);
        s.finish();
        detail::require(c.split_train > 0 && c.split_val > 0 && c.split_test > 0 &&
                            std::abs(c.split_train + c.split_val + c.split_test - 1.0) <= 1e-9,
                        "split ratios must be positive and sum to 1");
    }

    {
        auto e = root.child("egk");
        std::string obj = to_string(c.egk.objective);
        e.read("objective", obj);
        detail::require(obj == "scl" || obj == "kl", "egk.objective must be 'scl' or 'kl'");
        c.egk.objective = obj == "scl" ? KernelObjective::Scl : KernelObjective::Kl;
        e.read("mu", c.egk.mu);
        e.read("l_max", c.egk.kernels.l_max);
        e.read("wl_depth", c.egk.kernels.wl_depth);
        e.read("graphlet_cap", c.egk.kernels.graphlet_cap);
        e.read("log_transform", c.egk.kernels.log_transform);
        e.read("step", c.egk.optimizer.step);
        e.read("iterations", c.egk.optimizer.iterations);
        e.read("backtracking", c.egk.optimizer.backtracking);
        e.finish();
        detail::require(c.egk.mu > 0, "egk.mu must be > 0");
        detail::require(c.egk.kernels.l_max >= 1, "egk.l_max must be >= 1");
        detail::require(c.egk.kernels.wl_depth >= 0, "egk.wl_depth must be >= 0");
        detail::require(c.egk.optimizer.step >= 0, "egk.step must be >= 0");
        detail::require(c.egk.optimizer.iterations >= 0, "egk.iterations must be >= 0");
    }

    {
        auto b = root.child("bounds");
        b.read("trials", c.bounds.trials);
        b.read("edge_flips", c.bounds.perturb.edge_flips);
        b.read("feature_noise", c.bounds.perturb.feature_noise);
        std::string mode = to_string(c.bounds.mode);
        b.read("mode", mode);
        detail::require(mode == "whole_graph" || mode == "sampled", "bounds.mode must be 'whole_graph' or 'sampled'");
        c.bounds.mode = mode == "whole_graph" ? DominanceMode::WholeGraph : DominanceMode::Sampled;
        b.finish();
        detail::require(c.bounds.perturb.feature_noise >= 0, "bounds.feature_noise must be >= 0");
    }

    {
        auto e = root.child("eval");
        e.read("features", c.eval_features);
        e.read("restarts", c.kmeans_restarts);
        e.finish();
        detail::require(c.eval_features == "embeddings" || c.eval_features == "kernel_rows",
                        "eval.features must be 'embeddings' or 'kernel_rows'");
        detail::require(c.kmeans_restarts >= 1, "eval.restarts must be >= 1");
    }

    root.read("checkpoint", c.checkpoint);
    root.read("cache_dir", c.cache_dir);
    root.read("seed", c.seed);
    root.read("threads", c.threads);
    root.read("out", c.out);
    root.finish();
    detail::require(c.threads >= 1, "threads must be >= 1");
    return c;
}

/// The fully materialised config, parseable by parse_config.
inline Json to_json(const RunConfig& c) {
    Json j;
    j["version"] = kConfigVersion;
    const auto& s = c.dataset.synth;
    j["dataset"] = {{"kind", c.dataset.kind},
                    {"dir", c.dataset.dir},
                    {"name", c.dataset.name},
                    {"pattern_a", to_string(s.pattern_a)},
                    {"size_a", s.size_a},
                    {"pattern_b", to_string(s.pattern_b)},
                    {"size_b", s.size_b},
                    {"count_a", s.count_a},
                    {"count_b", s.count_b},
                    {"n_min", s.n_min},
                    {"n_max", s.n_max},
                    {"edge_prob", s.edge_prob}};
    j["patterns"] = Json::array();
    for (auto k : c.patterns) j["patterns"].push_back(to_string(k));
    j["q"] = c.q;
    j["max_attempts"] = c.max_attempts;
    j["model"] = {{"preset", c.model_preset},
                  {"hidden_dim", c.model.hidden_dim},
                  {"out_dim", c.model.out_dim},
                  {"gcn_layers", c.model.gcn_layers},
                  {"classifier_layers", c.model.classifier_layers},
                  {"classifier_hidden", c.model.classifier_hidden},
                  {"activation", to_string(c.model.activation)}};
    j["train"] = {{"objective", to_string(c.train.objective)},
                  {"epochs", c.train.epochs},
                  {"step", c.train.step},
                  {"momentum", c.train.momentum},
                  {"batch_size", c.train.batch_size},
                  {"alternate", c.train.alternate},
                  {"gamma", c.train.gamma}};
    j["split"] = {{"train", c.split_train}, {"val", c.split_val}, {"test", c.split_test}};
    j["egk"] = {{"objective", to_string(c.egk.objective)},
                {"mu", c.egk.mu},
                {"l_max", c.egk.kernels.l_max},
                {"wl_depth", c.egk.kernels.wl_depth},
                {"graphlet_cap", c.egk.kernels.graphlet_cap},
                {"log_transform", c.egk.kernels.log_transform},
                {"step", c.egk.optimizer.step},
                {"iterations", c.egk.optimizer.iterations},
                {"backtracking", c.egk.optimizer.backtracking}};
    j["bounds"] = {{"trials", c.bounds.trials},
                   {"edge_flips", c.bounds.perturb.edge_flips},
                   {"feature_noise", c.bounds.perturb.feature_noise},
                   {"mode", to_string(c.bounds.mode)}};
    j["eval"] = {{"features", c.eval_features}, {"restarts", c.kmeans_restarts}};
    j["checkpoint"] = c.checkpoint;
    j["cache_dir"] = c.cache_dir;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["out"] = c.out;
    return j;
}

inline Json read_json_file(const fs::path& p) {
    std::ifstream f(p);
    if (!f) throw InputError("cannot open " + p.string());
    try {
        return Json::parse(f);
    } catch (const Json::parse_error& e) {
        throw ParseError(p.string() + ": " + e.what());
    }
}

inline RunConfig load_config(const fs::path& p) { return parse_config(read_json_file(p)); }

// ---------------------------------------------------------------- output

namespace detail {

inline void write_text(const fs::path& p, const std::string& body) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw InputError("cannot write " + p.string());
    f << body;
}

inline void write_json(const fs::path& p, const Json& j) { write_text(p, j.dump(2) + "\n"); }

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_matrix_csv(const fs::path& p, const Matrix& m) {
    std::ostringstream os;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << fmt17(m(i, j));
        os << '\n';
    }
    write_text(p, os.str());
}

inline Json matrix_to_json(const Matrix& m) {
    Json data = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline Matrix matrix_from_json(const Json& j, const std::string& what) {
    try {
        const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
        const auto& data = j.at("data");
        if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols))
            throw InputError("checkpoint: malformed matrix " + what);
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data.at(static_cast<std::size_t>(i * cols + c)).get<double>();
        return m;
    } catch (const Json::exception& e) {
        throw InputError("checkpoint: malformed matrix " + what + ": " + e.what());
    }
}

inline Json vector_to_json(const Vector& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(x);
    return a;
}

inline Vector vector_from_json(const Json& j) {
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
    return v;
}

}  // namespace detail

// ---------------------------------------------------------------- datasets and samples

inline Dataset load_dataset(const RunConfig& c) {
    if (c.dataset.kind == "tudataset") return load_tudataset(c.dataset.dir, c.dataset.name);
    return synth_pattern_dataset(c.dataset.synth, derive_seed(c.seed, "cli.dataset"));
}

/// Samples for every graph and configured pattern. One cache file per
/// (dataset, seed, pattern, Q) holds the node-id lists; a cache hit rebuilds
/// the identical sample sets without re-sampling.
inline std::vector<GraphSamples> load_or_sample(const Dataset& ds, const RunConfig& c) {
    std::vector<GraphSamples> out(ds.size());
    const fs::path dir = c.cache_path();
    for (auto kind : c.patterns) {
        const fs::path file = dir / (ds.name + "_s" + std::to_string(c.seed) + "_q" + std::to_string(c.q) + "_a" +
                                     std::to_string(c.attempts()) + "_" + std::string(to_string(kind)) + ".txt");
        std::vector<PatternSampleSet> sets(ds.size());
        bool hit = false;
        if (fs::exists(file)) {
            std::ifstream f(file);
            std::string line;
            std::size_t gi = 0;
            while (std::getline(f, line)) {
                if (gi >= ds.size()) throw ParseError(file.string() + ":" + std::to_string(gi + 1) + ": too many rows");
                std::vector<std::vector<std::size_t>> node_sets;
                std::stringstream ls(line);
                std::string sample;
                while (std::getline(ls, sample, ';')) {
                    if (sample.empty()) continue;
                    std::vector<std::size_t> ids;
                    std::stringstream ss(sample);
                    std::string tok;
                    while (std::getline(ss, tok, ',')) {
                        std::size_t v = 0;
                        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
                        if (ec != std::errc() || ptr != tok.data() + tok.size())
                            throw ParseError(file.string() + ":" + std::to_string(gi + 1) + ": bad node id");
                        ids.push_back(v);
                    }
                    node_sets.push_back(std::move(ids));
                }
                sets[gi] = sample_set_from_node_ids(ds.graphs[gi], kind, c.q, node_sets);
                ++gi;
            }
            if (gi != ds.size()) throw ParseError(file.string() + ": expected " + std::to_string(ds.size()) + " rows");
            hit = true;
        }
        if (!hit) {
            parallel_for(ds.size(), c.threads, [&](std::size_t i) {
                const Graph& g = ds.graphs[i];
                sets[i] = sample_pattern_set(g, kind, c.q, sampling_seed(c.seed, g.id(), kind), c.attempts());
            });
            std::ostringstream os;
            for (const auto& set : sets) {
                for (std::size_t s = 0; s < set.samples.size(); ++s) {
                    if (s) os << ';';
                    const auto& ids = set.samples[s].node_ids;
                    for (std::size_t k = 0; k < ids.size(); ++k) os << (k ? "," : "") << ids[k];
                }
                os << '\n';
            }
            detail::write_text(file, os.str());
        }
        for (std::size_t i = 0; i < ds.size(); ++i) out[i].push_back(std::move(sets[i]));
    }
    return out;
}

// ---------------------------------------------------------------- checkpoints

inline Json checkpoint_to_json(const EnsembleModel& m, const RunConfig& c) {
    Json j;
    j["format"] = "pxgl-checkpoint";
    j["version"] = 1;
    j["model"] = {{"input_dim", m.config.input_dim},
                  {"hidden_dim", m.config.hidden_dim},
                  {"out_dim", m.config.out_dim},
                  {"gcn_layers", m.config.gcn_layers},
                  {"classifier_layers", m.config.classifier_layers},
                  {"classifier_hidden", m.config.classifier_hidden},
                  {"num_classes", m.config.num_classes},
                  {"activation", to_string(m.config.activation)}};
    j["gamma"] = m.gamma;
    j["logits"] = detail::vector_to_json(m.logits);
    j["stacks"] = Json::array();
    for (const auto& s : m.stacks) {
        Json layers = Json::array();
        for (const auto& w : s.layer_weights) layers.push_back(detail::matrix_to_json(w));
        j["stacks"].push_back({{"kind", to_string(s.kind)}, {"layers", layers}});
    }
    j["classifier"] = Json::array();
    for (const auto& l : m.classifier.layers)
        j["classifier"].push_back({{"weight", detail::matrix_to_json(l.weight)}, {"bias", detail::vector_to_json(l.bias)}});
    j["sampling"] = {{"seed", c.seed}, {"q", c.q}, {"max_attempts", c.attempts()}};
    j["objective"] = to_string(c.train.objective);
    return j;
}

inline EnsembleModel checkpoint_from_json(const Json& j) {
    try {
        if (j.at("format") != "pxgl-checkpoint") throw InputError("checkpoint: not a pxgl checkpoint");
        EnsembleModel m;
        const auto& mc = j.at("model");
        m.config.input_dim = mc.at("input_dim").get<std::size_t>();
        m.config.hidden_dim = mc.at("hidden_dim").get<std::size_t>();
        m.config.out_dim = mc.at("out_dim").get<std::size_t>();
        m.config.gcn_layers = mc.at("gcn_layers").get<std::size_t>();
        m.config.classifier_layers = mc.at("classifier_layers").get<std::size_t>();
        m.config.classifier_hidden = mc.at("classifier_hidden").get<std::size_t>();
        m.config.num_classes = mc.at("num_classes").get<std::size_t>();
        m.config.activation = mc.at("activation") == "relu" ? Activation::Relu : Activation::Identity;
        m.gamma = j.at("gamma").get<double>();
        m.logits = detail::vector_from_json(j.at("logits"));
        m.config.kinds.clear();
        for (const auto& s : j.at("stacks")) {
            GcnStack st;
            st.kind = detail::pattern_or_throw(s.at("kind").get<std::string>(), "checkpoint.stacks");
            st.activation = m.config.activation;
            for (const auto& l : s.at("layers")) st.layer_weights.push_back(detail::matrix_from_json(l, "stack layer"));
            m.config.kinds.push_back(st.kind);
            m.stacks.push_back(std::move(st));
        }
        for (const auto& l : j.at("classifier"))
            m.classifier.layers.push_back(
                {detail::matrix_from_json(l.at("weight"), "classifier weight"), detail::vector_from_json(l.at("bias"))});
        if (static_cast<std::size_t>(m.logits.size()) != m.stacks.size())
            throw InputError("checkpoint: logits and stacks disagree in length");
        return m;
    } catch (const Json::exception& e) {
        throw InputError(std::string("checkpoint: ") + e.what());
    }
}

inline EnsembleModel load_checkpoint(const RunConfig& c, Json* raw = nullptr) {
    const fs::path p = c.checkpoint_path();
    if (!fs::exists(p)) throw InputError("missing checkpoint " + p.string() + " (run gnn-train first)");
    Json j = read_json_file(p);
    EnsembleModel m = checkpoint_from_json(j);
    if (raw) *raw = std::move(j);
    return m;
}

// ---------------------------------------------------------------- commands

namespace detail {

inline void write_manifest(const RunConfig& c, const std::string& command) {
    Json j;
    j["command"] = command;
    j["config"] = to_json(c);
    write_json(fs::path(c.out) / "run_manifest.json", j);
}

inline Json lambda_report(const EnsembleModel& m, std::span<const GraphSamples> samples) {
    Json rows = Json::array();
    for (const auto& e : explain(m, samples))
        rows.push_back({{"pattern", to_string(e.kind)},
                        {"lambda", e.weight},
                        {"mean_samples", e.mean_samples},
                        {"empty_fraction", e.empty_fraction}});
    return rows;
}

inline Matrix embedding_matrix(const EnsembleModel& m, const std::vector<GraphSamples>& samples, std::size_t threads) {
    Matrix e(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(m.config.out_dim));
    parallel_for(samples.size(), threads, [&](std::size_t i) { e.row(static_cast<Eigen::Index>(i)) = encode(m, samples[i]).g.transpose(); });
    return e;
}

inline Json cluster_metrics(const Matrix& points, const Dataset& ds, const RunConfig& c) {
    Json j;
    if (!ds.labeled()) return {{"acc", nullptr}, {"nmi", nullptr}};
    const auto r = kmeans(points, static_cast<int>(ds.num_classes), derive_seed(c.seed, "cli.kmeans"), c.kmeans_restarts,
                          c.threads);
    const auto labels = ds.labels();
    j["acc"] = clustering_accuracy(r.assignments, labels);
    j["nmi"] = nmi(r.assignments, labels);
    j["degenerate"] = r.degenerate;
    return j;
}

inline ModelConfig model_for(const RunConfig& c, const Dataset& ds) {
    ModelConfig m = c.model;
    m.input_dim = ds.feature_dim;
    m.num_classes = std::max<std::size_t>(ds.num_classes, 2);
    m.kinds = c.patterns;
    return m;
}

}  // namespace detail

/// synth-gen: writes the synthetic dataset in TUDataset layout.
inline int cmd_synth_gen(const RunConfig& c) {
    if (c.dataset.kind != "synthetic") throw InputError("synth-gen requires dataset.kind = 'synthetic'");
    detail::write_manifest(c, "synth-gen");
    const Dataset ds = load_dataset(c);
    write_tudataset(ds, fs::path(c.out) / ds.name);
    const Split s = split(ds, c.split_train, c.split_val, c.split_test, c.seed);
    auto ids = [](const std::vector<std::size_t>& v) { return Json(v); };
    detail::write_json(fs::path(c.out) / "split.json", {{"train", ids(s.train)}, {"val", ids(s.val)}, {"test", ids(s.test)},
                                                        {"stratified", s.stratified}});
    double nodes = 0, edges = 0;
    for (const auto& g : ds.graphs) {
        nodes += static_cast<double>(g.num_nodes());
        edges += static_cast<double>(g.num_edges());
    }
    detail::write_json(fs::path(c.out) / "metrics.json", {{"name", ds.name},
                                                          {"graphs", ds.size()},
                                                          {"classes", ds.num_classes},
                                                          {"feature_dim", ds.feature_dim},
                                                          {"mean_nodes", nodes / static_cast<double>(ds.size())},
                                                          {"mean_edges", edges / static_cast<double>(ds.size())},
                                                          {"seed", c.seed}});
    return kExitOk;
}

/// egk-fit: counting-vector Grams, fitted kernel weights, loss curve.
inline int cmd_egk_fit(const RunConfig& c) {
    detail::write_manifest(c, "egk-fit");
    const Dataset ds = load_dataset(c);
    KernelStack stack = build_egk_stack(ds.graphs, c.egk.kernels, c.threads);
    if (c.egk.objective == KernelObjective::Scl) {
        if (!ds.labeled()) throw InputError("egk-fit: the SCL objective needs graph labels");
        stack.labels = ds.labels();
    }
    OptimizerConfig opt = c.egk.optimizer;
    opt.seed = derive_seed(c.seed, "cli.egk");
    const FitReport fit = fit_ensemble_weights(stack, {c.egk.objective, c.egk.mu}, opt);
    const fs::path out(c.out);
    for (std::size_t m = 0; m < stack.size(); ++m) detail::write_matrix_csv(out / ("gram_" + stack.names[m] + ".csv"), stack.grams[m]);
    std::ostringstream curve;
    curve << "iteration,loss\n";
    for (std::size_t i = 0; i < fit.loss_curve.size(); ++i) curve << i << ',' << detail::fmt17(fit.loss_curve[i]) << '\n';
    detail::write_text(out / "loss_curve.csv", curve.str());

    std::vector<std::size_t> order(stack.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return fit.lambda(static_cast<Eigen::Index>(a)) > fit.lambda(static_cast<Eigen::Index>(b));
    });
    Json kernels = Json::array();
    for (auto m : order)
        kernels.push_back({{"kernel", stack.names[m]},
                           {"lambda", fit.lambda(static_cast<Eigen::Index>(m))},
                           {"logit", fit.logits(static_cast<Eigen::Index>(m))}});
    detail::write_json(out / "lambda.json", {{"method", "egk"}, {"objective", to_string(c.egk.objective)}, {"weights", kernels}});

    Json metrics = {{"objective", to_string(c.egk.objective)},
                    {"loss_initial", fit.loss_curve.front()},
                    {"loss_final", fit.loss_curve.back()},
                    {"iterations", fit.loss_curve.size() - 1},
                    {"seed", c.seed}};
    if (ds.labeled()) {
        const Matrix k = ensemble_gram(stack.grams, fit.lambda);
        metrics["clustering"] = detail::cluster_metrics(k, ds, c);
    }
    detail::write_json(out / "metrics.json", metrics);
    return kExitOk;
}

/// gnn-train: samples (cached), trains, writes checkpoint, history, λ and metrics.
inline int cmd_gnn_train(const RunConfig& c) {
    detail::write_manifest(c, "gnn-train");
    const Dataset ds = load_dataset(c);
    const bool supervised = c.train.objective == Objective::Supervised;
    if (supervised && !ds.labeled()) throw InputError("gnn-train: supervised training needs graph labels");
    const auto samples = load_or_sample(ds, c);
    const auto labels = ds.labels();
    std::vector<std::size_t> train_idx;
    Split s;
    if (supervised) {
        s = split(ds, c.split_train, c.split_val, c.split_test, c.seed);
        train_idx = s.train;
    } else {
        train_idx.resize(ds.size());
        std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
    }
    TrainConfig tc = c.train;
    tc.seed = c.seed;
    tc.threads = c.threads;
    const TrainResult r = train(samples, labels, train_idx, detail::model_for(c, ds), tc);

    const fs::path out(c.out);
    detail::write_json(c.checkpoint_path(), checkpoint_to_json(r.model, c));
    std::ostringstream hist;
    hist << "epoch,loss";
    for (const auto& st : r.model.stacks) hist << ",lambda_" << to_string(st.kind);
    hist << '\n';
    for (std::size_t e = 0; e < r.history.epoch_loss.size(); ++e) {
        hist << e << ',' << detail::fmt17(r.history.epoch_loss[e]);
        for (double l : r.history.lambda[e]) hist << ',' << detail::fmt17(l);
        hist << '\n';
    }
    detail::write_text(out / "history.csv", hist.str());
    detail::write_json(out / "lambda.json", {{"method", "gnn"}, {"objective", to_string(tc.objective)},
                                             {"weights", detail::lambda_report(r.model, samples)}});
    Json metrics = {{"objective", to_string(tc.objective)},
                    {"final_loss", r.history.epoch_loss.empty() ? 0.0 : r.history.epoch_loss.back()},
                    {"seed", c.seed}};
    if (supervised) {
        metrics["train_accuracy"] = classification_accuracy(r.model, samples, labels, s.train);
        metrics["val_accuracy"] = classification_accuracy(r.model, samples, labels, s.val);
        metrics["test_accuracy"] = classification_accuracy(r.model, samples, labels, s.test);
    } else {
        metrics["gamma"] = r.model.gamma;
        metrics["clustering"] = detail::cluster_metrics(detail::embedding_matrix(r.model, samples, c.threads), ds, c);
    }
    detail::write_json(out / "metrics.json", metrics);
    return kExitOk;
}

/// gnn-embed: embeddings.csv with graph_id, label, g_1..g_d.
inline int cmd_gnn_embed(const RunConfig& c) {
    detail::write_manifest(c, "gnn-embed");
    const EnsembleModel m = load_checkpoint(c);
    const Dataset ds = load_dataset(c);
    if (ds.feature_dim != m.config.input_dim) throw InputError("gnn-embed: dataset feature_dim does not match the checkpoint");
    RunConfig cc = c;
    cc.patterns = m.config.kinds;
    const auto samples = load_or_sample(ds, cc);
    const Matrix e = detail::embedding_matrix(m, samples, c.threads);
    std::ostringstream os;
    os << "graph_id,label";
    for (Eigen::Index d = 0; d < e.cols(); ++d) os << ",g_" << d + 1;
    os << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        os << ds.graphs[i].id() << ',';
        if (ds.graphs[i].label()) os << *ds.graphs[i].label();
        for (Eigen::Index d = 0; d < e.cols(); ++d) os << ',' << detail::fmt17(e(static_cast<Eigen::Index>(i), d));
        os << '\n';
    }
    detail::write_text(fs::path(c.out) / "embeddings.csv", os.str());
    detail::write_json(fs::path(c.out) / "metrics.json", {{"rows", ds.size()}, {"cols", e.cols() + 2}, {"seed", c.seed}});
    return kExitOk;
}

/// explain: ranked pattern report from a checkpoint.
inline int cmd_explain(const RunConfig& c) {
    detail::write_manifest(c, "explain");
    const EnsembleModel m = load_checkpoint(c);
    const Dataset ds = load_dataset(c);
    RunConfig cc = c;
    cc.patterns = m.config.kinds;
    const auto samples = load_or_sample(ds, cc);
    const Json rows = detail::lambda_report(m, samples);
    detail::write_json(fs::path(c.out) / "lambda.json", {{"method", "gnn"}, {"weights", rows}});
    detail::write_json(fs::path(c.out) / "explanation.json", {{"dataset", ds.name}, {"ranking", rows}});
    detail::write_json(fs::path(c.out) / "metrics.json",
                       {{"top_pattern", rows.front()["pattern"]}, {"top_lambda", rows.front()["lambda"]}, {"seed", c.seed}});
    return kExitOk;
}

/// bound-check: perturbation trials against the robustness bound. Exit code
/// kExitViolation when any trial exceeds its bound.
inline int cmd_bound_check(const RunConfig& c) {
    detail::write_manifest(c, "bound-check");
    const EnsembleModel m = load_checkpoint(c);
    const Dataset ds = load_dataset(c);
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::size_t n = ds.graphs[i].num_nodes();
        if (n * (n - 1) / 2 >= c.bounds.perturb.edge_flips) eligible.push_back(i);
    }
    if (eligible.empty()) throw InputError("bound-check: no graph has enough node pairs for the requested edge_flips");
    std::vector<DominanceTrial> trials(c.bounds.trials);
    std::vector<std::size_t> which(c.bounds.trials);
    parallel_for(trials.size(), c.threads, [&](std::size_t t) {
        const std::uint64_t seed = derive_seed(c.seed, "cli.bounds", {t});
        which[t] = eligible[mix64(seed) % eligible.size()];
        trials[t] = dominance_trial(m, ds.graphs[which[t]], c.bounds.perturb, seed, c.bounds.mode, c.q);
        trials[t].index = t;
    });
    std::size_t violations = 0;
    double max_ratio = 0.0;
    Json rows = Json::array();
    for (std::size_t t = 0; t < trials.size(); ++t) {
        const auto& tr = trials[t];
        if (tr.measured > tr.bound) ++violations;
        if (tr.bound > 0) max_ratio = std::max(max_ratio, tr.measured / tr.bound);
        rows.push_back({{"trial", t},
                        {"graph", which[t]},
                        {"measured", tr.measured},
                        {"bound", tr.bound},
                        {"delta_A", tr.delta_A_norm},
                        {"delta_X", tr.delta_X_norm},
                        {"delta_D", tr.delta_D_norm}});
    }
    detail::write_json(fs::path(c.out) / "bounds_report.json", {{"mode", to_string(c.bounds.mode)},
                                                                 {"edge_flips", c.bounds.perturb.edge_flips},
                                                                 {"feature_noise", c.bounds.perturb.feature_noise},
                                                                 {"violations", violations},
                                                                 {"max_ratio", max_ratio},
                                                                 {"trials", rows}});
    detail::write_json(fs::path(c.out) / "metrics.json",
                       {{"trials", trials.size()}, {"violations", violations}, {"max_ratio", max_ratio}, {"seed", c.seed}});
    return violations == 0 ? kExitOk : kExitViolation;
}

/// eval: classification accuracy (supervised checkpoint) or k-means ACC/NMI.
inline int cmd_eval(const RunConfig& c) {
    detail::write_manifest(c, "eval");
    const Dataset ds = load_dataset(c);
    Json metrics = {{"acc", nullptr}, {"nmi", nullptr}, {"classification_accuracy", nullptr}, {"seed", c.seed}};
    if (c.eval_features == "kernel_rows") {
        KernelStack stack = build_egk_stack(ds.graphs, c.egk.kernels, c.threads);
        OptimizerConfig opt = c.egk.optimizer;
        opt.seed = derive_seed(c.seed, "cli.egk");
        const FitReport fit = fit_ensemble_weights(stack, {KernelObjective::Kl, c.egk.mu}, opt);
        const Json cl = detail::cluster_metrics(ensemble_gram(stack.grams, fit.lambda), ds, c);
        metrics["acc"] = cl["acc"];
        metrics["nmi"] = cl["nmi"];
    } else {
        Json raw;
        const EnsembleModel m = load_checkpoint(c, &raw);
        RunConfig cc = c;
        cc.patterns = m.config.kinds;
        const auto samples = load_or_sample(ds, cc);
        const Json cl = detail::cluster_metrics(detail::embedding_matrix(m, samples, c.threads), ds, c);
        metrics["acc"] = cl["acc"];
        metrics["nmi"] = cl["nmi"];
        if (raw.value("objective", "") == "supervised" && ds.labeled()) {
            const Split s = split(ds, c.split_train, c.split_val, c.split_test, c.seed);
            metrics["classification_accuracy"] = classification_accuracy(m, samples, ds.labels(), s.test);
        }
    }
    detail::write_json(fs::path(c.out) / "metrics.json", metrics);
    return kExitOk;
}

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"egk-fit", "gnn-train", "gnn-embed", "explain",
                                                   "bound-check", "synth-gen", "eval"};
    return names;
}

inline int run_command(const std::string& name, const RunConfig& c) {
    if (name == "egk-fit") return cmd_egk_fit(c);
    if (name == "gnn-train") return cmd_gnn_train(c);
    if (name == "gnn-embed") return cmd_gnn_embed(c);
    if (name == "explain") return cmd_explain(c);
    if (name == "bound-check") return cmd_bound_check(c);
    if (name == "synth-gen") return cmd_synth_gen(c);
    if (name == "eval") return cmd_eval(c);
    throw InputError("unknown command '" + name + "'");
}

}  // namespace pxgl::cli
