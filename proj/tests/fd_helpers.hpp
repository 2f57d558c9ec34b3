#pragma once

// Central finite-difference checks over every trainable parameter of an
// EnsembleModel. Shared by the unit tests and the acceptance runner.

#include "oracles.hpp"

#include "pxgl/gnn.hpp"

#include <string>
#include <vector>

namespace fd {

using namespace pxgl;

struct ParamRef {
    std::string name;
    double* value;
    double grad;
};

inline void add_matrix(std::vector<ParamRef>& out, const std::string& name, Matrix& p, const Matrix& g) {
    for (Eigen::Index j = 0; j < p.cols(); ++j)
        for (Eigen::Index i = 0; i < p.rows(); ++i)
            out.push_back({name + "(" + std::to_string(i) + "," + std::to_string(j) + ")", &p(i, j), g(i, j)});
}

inline void add_vector(std::vector<ParamRef>& out, const std::string& name, Vector& p, const Vector& g) {
    for (Eigen::Index i = 0; i < p.size(); ++i) out.push_back({name + "(" + std::to_string(i) + ")", &p(i), g(i)});
}

inline std::vector<ParamRef> param_refs(EnsembleModel& m, const ModelGradient& g) {
    std::vector<ParamRef> out;
    for (std::size_t s = 0; s < m.stacks.size(); ++s)
        for (std::size_t l = 0; l < m.stacks[s].layer_weights.size(); ++l)
            add_matrix(out, "stacks[" + std::string(to_string(m.stacks[s].kind)) + "].W[" + std::to_string(l) + "]",
                       m.stacks[s].layer_weights[l], g.stacks[s][l]);
    add_vector(out, "logits", m.logits, g.logits);
    for (std::size_t l = 0; l < m.classifier.layers.size(); ++l) {
        add_matrix(out, "classifier[" + std::to_string(l) + "].weight", m.classifier.layers[l].weight,
                   g.classifier.weight[l]);
        add_vector(out, "classifier[" + std::to_string(l) + "].bias", m.classifier.layers[l].bias,
                   g.classifier.bias[l]);
    }
    return out;
}

// Relative error with a 1e-5 floor on the denominator so that entries whose
// true gradient is ~0 are judged on absolute error instead.
inline double rel_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-5});
}

struct Report {
    double max_rel = 0.0;
    std::string worst;
    std::size_t checked = 0;
    std::size_t groups = 0;
};

inline Report check_model_gradient(EnsembleModel model, const Batch& batch, Objective objective, double h = 1e-5) {
    const BatchResult r = backward(model, batch, objective);
    auto refs = param_refs(model, r.grad);
    Report rep;
    std::string last_group;
    for (auto& p : refs) {
        const double saved = *p.value;
        *p.value = saved + h;
        const double up = batch_loss(model, batch, objective);
        *p.value = saved - h;
        const double down = batch_loss(model, batch, objective);
        *p.value = saved;
        const double e = rel_error(p.grad, (up - down) / (2 * h));
        if (e > rep.max_rel) {
            rep.max_rel = e;
            rep.worst = p.name;
        }
        ++rep.checked;
        const std::string group = p.name.substr(0, p.name.find('('));
        if (group != last_group) {
            ++rep.groups;
            last_group = group;
        }
    }
    return rep;
}

// A small model and a 4-graph batch with continuous features, random logits
// and non-zero biases so no parameter group sits at a special point.
struct Fixture {
    EnsembleModel model;
    std::vector<GraphSamples> samples;
    Batch batch;
};

inline Fixture make_fixture(std::uint64_t seed, Activation act = Activation::Relu, std::size_t classes = 3) {
    std::mt19937_64 rng(seed);
    ModelConfig cfg;
    cfg.input_dim = 3;
    cfg.hidden_dim = 4;
    cfg.out_dim = 4;
    cfg.classifier_hidden = 5;
    cfg.num_classes = classes;
    cfg.activation = act;
    Fixture f{make_model(cfg, seed), {}, {}};
    std::normal_distribution<double> nd(0.0, 0.5);
    for (auto& x : f.model.logits) x = nd(rng);
    for (auto& layer : f.model.classifier.layers)
        for (auto& b : layer.bias) b = nd(rng);
    for (std::size_t i = 0; i < 4; ++i) {
        Graph g = oracle::random_graph(rng, 6 + rng() % 4, 0.5, i, 3);
        f.samples.push_back(sample_graph(g, cfg.kinds, 3, seed + i, 150));
    }
    for (std::size_t i = 0; i < 4; ++i) {
        f.batch.samples.push_back(&f.samples[i]);
        f.batch.labels.push_back(static_cast<int>(i % classes));
    }
    std::vector<Vector> g;
    for (auto& s : f.samples) g.push_back(encode(f.model, s).g);
    f.model.gamma = median_heuristic_gamma(g);
    return f;
}

}  // namespace fd
