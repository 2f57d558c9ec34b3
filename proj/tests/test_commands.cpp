#include "pxgl/commands.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace pxgl;
using namespace pxgl::cli;

namespace {

fs::path scratch(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("pxgl_cmd_" + tag);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

RunConfig small_config(const fs::path& out) {
    RunConfig c = parse_config(Json::parse(R"({
        "version": 1,
        "dataset": {"kind": "synthetic", "count_a": 10, "count_b": 10},
        "q": 4,
        "model": {"hidden_dim": 8, "out_dim": 8, "classifier_hidden": 8},
        "train": {"epochs": 4},
        "egk": {"iterations": 30},
        "bounds": {"trials": 12}
    })"));
    c.out = out.string();
    c.seed = 5;
    return c;
}

}  // namespace

TEST(Config, DefaultsAndRoundTrip) {
    const RunConfig c = parse_config(Json::object());
    EXPECT_EQ(c.q, 10u);
    EXPECT_EQ(c.patterns.size(), 7u);
    EXPECT_EQ(c.train.step, 0.01);
    EXPECT_EQ(c.train.momentum, 0.9);
    EXPECT_EQ(c.train.batch_size, 32u);
    EXPECT_EQ(to_json(parse_config(to_json(c))), to_json(c));
    const RunConfig paper = parse_config(Json::parse(R"({"model": {"preset": "paper"}})"));
    EXPECT_EQ(paper.model.gcn_layers, 5u);
    EXPECT_EQ(paper.model.classifier_layers, 3u);
}

TEST(Config, RejectsUnknownKeysAtAnyDepth) {
    for (const char* doc : {R"({"colour": 1})", R"({"train": {"epoch": 3}})", R"({"dataset": {"path": "x"}})",
                            R"({"bounds": {"trails": 3}})"}) {
        try {
            parse_config(Json::parse(doc));
            FAIL() << doc;
        } catch (const InputError& e) {
            EXPECT_NE(std::string(e.what()).find("unknown key"), std::string::npos) << e.what();
        }
    }
}

TEST(Config, RejectsInvalidValues) {
    for (const char* doc : {R"({"version": 2})", R"({"q": 0})", R"({"q": -3})", R"({"q": "ten"})",
                            R"({"patterns": ["cycle", "hexagon"]})", R"({"patterns": ["cycle", "cycles"]})",
                            R"({"split": {"train": 0.5}})", R"({"train": {"objective": "both"}})",
                            R"({"dataset": {"kind": "tudataset"}})", R"({"train": {"momentum": 1.0}})"})
        EXPECT_THROW(parse_config(Json::parse(doc)), InputError) << doc;
}

TEST(Checkpoint, RoundTripIsExact) {
    ModelConfig mc;
    mc.input_dim = 5;
    mc.kinds = {PatternKind::Cycle, PatternKind::Star};
    EnsembleModel m = make_model(mc, 3);
    m.logits << 0.1, -1.0 / 3.0;
    m.gamma = 0.7;
    const RunConfig c = parse_config(Json::object());
    const EnsembleModel back = checkpoint_from_json(Json::parse(checkpoint_to_json(m, c).dump()));
    ASSERT_EQ(back.stacks.size(), 2u);
    EXPECT_EQ(back.logits, m.logits);
    EXPECT_EQ(back.gamma, m.gamma);
    for (std::size_t s = 0; s < 2; ++s) {
        EXPECT_EQ(back.stacks[s].kind, m.stacks[s].kind);
        for (std::size_t l = 0; l < m.stacks[s].layer_weights.size(); ++l)
            EXPECT_EQ(back.stacks[s].layer_weights[l], m.stacks[s].layer_weights[l]);
    }
    for (std::size_t l = 0; l < m.classifier.layers.size(); ++l) {
        EXPECT_EQ(back.classifier.layers[l].weight, m.classifier.layers[l].weight);
        EXPECT_EQ(back.classifier.layers[l].bias, m.classifier.layers[l].bias);
    }
}

TEST(SampleCache, HitReproducesFreshSampling) {
    const fs::path out = scratch("cache");
    RunConfig c = small_config(out);
    const Dataset ds = load_dataset(c);
    const auto fresh = load_or_sample(ds, c);
    ASSERT_TRUE(fs::exists(c.cache_path()));
    const auto cached = load_or_sample(ds, c);
    ASSERT_EQ(fresh.size(), cached.size());
    for (std::size_t i = 0; i < fresh.size(); ++i)
        for (std::size_t m = 0; m < fresh[i].size(); ++m) {
            ASSERT_EQ(fresh[i][m].size(), cached[i][m].size());
            EXPECT_EQ(fresh[i][m].wl_hashes, cached[i][m].wl_hashes);
            for (std::size_t s = 0; s < fresh[i][m].size(); ++s)
                EXPECT_EQ(fresh[i][m].samples[s].node_ids, cached[i][m].samples[s].node_ids);
        }
    fs::remove_all(out);
}

TEST(Commands, MissingCheckpointIsInputError) {
    const RunConfig c = small_config(scratch("nockpt"));
    EXPECT_THROW(cmd_explain(c), InputError);
    EXPECT_THROW(cmd_gnn_embed(c), InputError);
    EXPECT_THROW(cmd_bound_check(c), InputError);
}

TEST(Commands, RepeatRunsAreByteIdentical) {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    for (const auto& cmd : {"synth-gen", "egk-fit", "gnn-train", "gnn-embed", "explain", "bound-check", "eval"}) {
        ASSERT_EQ(run_command(cmd, small_config(a)), kExitOk) << cmd;
        const std::string metrics = slurp(a / "metrics.json");
        const std::string lambda = fs::exists(a / "lambda.json") ? slurp(a / "lambda.json") : "";
        ASSERT_EQ(run_command(cmd, small_config(b)), kExitOk) << cmd;
        EXPECT_EQ(metrics, slurp(b / "metrics.json")) << cmd;
        if (!lambda.empty()) EXPECT_EQ(lambda, slurp(b / "lambda.json")) << cmd;
    }
    EXPECT_EQ(slurp(a / "embeddings.csv"), slurp(b / "embeddings.csv"));
    EXPECT_EQ(slurp(a / "checkpoint.json"), slurp(b / "checkpoint.json"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Commands, EmbedShapeAndExplainReport) {
    const fs::path out = scratch("embed");
    const RunConfig c = small_config(out);
    ASSERT_EQ(cmd_gnn_train(c), kExitOk);
    ASSERT_EQ(cmd_gnn_embed(c), kExitOk);
    std::ifstream f(out / "embeddings.csv");
    std::string line;
    std::size_t rows = 0;
    std::getline(f, line);
    EXPECT_EQ(std::count(line.begin(), line.end(), ',') + 1, 8 + 2);
    while (std::getline(f, line)) ++rows;
    EXPECT_EQ(rows, 20u);
    ASSERT_EQ(cmd_explain(c), kExitOk);
    const Json report = read_json_file(out / "explanation.json");
    EXPECT_EQ(report["ranking"].size(), 7u);
    fs::remove_all(out);
}

TEST(Commands, ZeroPerturbationReportsZeroPairs) {
    const fs::path out = scratch("zero");
    RunConfig c = small_config(out);
    ASSERT_EQ(cmd_gnn_train(c), kExitOk);
    c.bounds.perturb = {0, 0.0};
    ASSERT_EQ(cmd_bound_check(c), kExitOk);
    const Json report = read_json_file(out / "bounds_report.json");
    EXPECT_EQ(report["violations"], 0);
    for (const auto& t : report["trials"]) {
        EXPECT_EQ(t["measured"].get<double>(), 0.0);
        EXPECT_EQ(t["bound"].get<double>(), 0.0);
    }
    c.bounds.perturb = {1, 0.05};
    c.bounds.mode = DominanceMode::Sampled;
    EXPECT_EQ(cmd_bound_check(c), kExitOk);
    fs::remove_all(out);
}

TEST(Commands, IdenticalEmbeddingsGiveMajorityAccuracy) {
    const fs::path out = scratch("ident");
    RunConfig c = small_config(out);
    c.dataset.synth.count_a = 14;
    c.dataset.synth.count_b = 6;
    ASSERT_EQ(cmd_gnn_train(c), kExitOk);
    Json ck = read_json_file(c.checkpoint_path());
    for (auto& s : ck["stacks"])
        for (auto& l : s["layers"])
            for (auto& x : l["data"]) x = 0.0;
    pxgl::cli::detail::write_json(c.checkpoint_path(), ck);
    ASSERT_EQ(cmd_eval(c), kExitOk);
    const Json m = read_json_file(out / "metrics.json");
    EXPECT_DOUBLE_EQ(m["acc"].get<double>(), 0.7);
    fs::remove_all(out);
}
