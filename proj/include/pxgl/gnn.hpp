#pragma once

// Pattern-ensemble GNN: one GCN encoder per pattern family, λ-weighted
// ensemble representation, dense classifier, and exact reverse-mode gradients.

#include "pxgl/kernels.hpp"
#include "pxgl/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace pxgl {

enum class Activation { Relu, Identity };

constexpr std::string_view to_string(Activation a) noexcept { return a == Activation::Relu ? "relu" : "identity"; }

/// Lipschitz constant of the activation (ρ).
constexpr double lipschitz_constant(Activation) noexcept { return 1.0; }

inline Matrix activate(const Matrix& x, Activation a) {
    return a == Activation::Relu ? Matrix(x.cwiseMax(0.0)) : x;
}

inline Matrix activation_backward(const Matrix& pre, const Matrix& d_out, Activation a) {
    if (a == Activation::Identity) return d_out;
    return (pre.array() > 0.0).select(d_out, 0.0);
}

/// GCN weights W^(1..L) of one pattern channel; dimensions chain d -> ... -> d_out.
struct GcnStack {
    PatternKind kind = PatternKind::Path;
    std::vector<Matrix> layer_weights;
    Activation activation = Activation::Relu;

    std::size_t num_layers() const noexcept { return layer_weights.size(); }
    Eigen::Index input_dim() const { return layer_weights.front().rows(); }
    Eigen::Index output_dim() const { return layer_weights.back().cols(); }
};

/// Intermediates of one GCN pass, kept for the backward pass.
struct GcnTrace {
    Matrix u;
    std::vector<Matrix> propagated;  // U X^(l-1), one per layer
    std::vector<Matrix> pre;         // U X^(l-1) W^(l)
    Matrix output;                   // X^(L)
    Vector pooled;                   // column mean of X^(L)
};

/// X^(l) = σ(U X^(l-1) W^(l)) for l = 1..L, then average pooling.
inline GcnTrace gcn_forward(const Graph& s, const GcnStack& stack) {
    if (stack.layer_weights.empty()) throw InputError("gcn_forward: stack has no layers");
    if (static_cast<Eigen::Index>(s.feature_dim()) != stack.input_dim())
        throw InputError("gcn_forward: feature dimension " + std::to_string(s.feature_dim()) +
                         " does not match stack input " + std::to_string(stack.input_dim()));
    GcnTrace t;
    t.u = normalized_adjacency(s);
    Matrix x = s.features();
    t.propagated.reserve(stack.num_layers());
    t.pre.reserve(stack.num_layers());
    for (const auto& w : stack.layer_weights) {
        t.propagated.push_back(t.u * x);
        t.pre.push_back(t.propagated.back() * w);
        x = activate(t.pre.back(), stack.activation);
    }
    t.output = std::move(x);
    t.pooled = t.output.colwise().mean().transpose();
    return t;
}

inline GcnTrace gcn_forward(const Subgraph& s, const GcnStack& stack) { return gcn_forward(s.graph, stack); }

/// Accumulates dL/dW^(l) into `d_weights` given dL/d(pooled).
inline void gcn_backward(const GcnTrace& t, const GcnStack& stack, const Vector& d_pooled,
                         std::vector<Matrix>& d_weights) {
    const auto n = t.output.rows();
    Matrix d_x = Matrix::Ones(n, 1) * (d_pooled.transpose() / static_cast<double>(n));
    for (std::size_t l = stack.num_layers(); l-- > 0;) {
        const Matrix d_pre = activation_backward(t.pre[l], d_x, stack.activation);
        d_weights[l].noalias() += t.propagated[l].transpose() * d_pre;
        if (l > 0) d_x = t.u * (d_pre * stack.layer_weights[l].transpose());
    }
}

/// Mean of pooled GCN outputs over the realised samples; zero when empty.
inline Vector pattern_representation(const PatternSampleSet& set, const GcnStack& stack) {
    if (set.kind != stack.kind) throw InputError("pattern_representation: pattern kind mismatch");
    Vector z = Vector::Zero(stack.output_dim());
    if (set.empty()) return z;
    for (const auto& s : set.samples) z += gcn_forward(s, stack).pooled;
    return z / static_cast<double>(set.size());
}

/// g = Σ_m softmax(w)_m z^(m).
inline Vector ensemble_representation(std::span<const Vector> z, const Vector& logits) {
    if (z.empty() || static_cast<Eigen::Index>(z.size()) != logits.size())
        throw InputError("ensemble_representation: need one logit per pattern representation");
    const Vector lambda = softmax(logits);
    Vector g = Vector::Zero(z.front().size());
    for (std::size_t m = 0; m < z.size(); ++m) {
        if (z[m].size() != g.size()) throw InputError("ensemble_representation: dimension mismatch");
        g += lambda(static_cast<Eigen::Index>(m)) * z[m];
    }
    return g;
}

struct DenseLayer {
    Matrix weight;  // out × in
    Vector bias;
};

/// Dense stack; ReLU between layers, linear last layer producing C logits.
struct Classifier {
    std::vector<DenseLayer> layers;

    Eigen::Index num_classes() const { return layers.back().weight.rows(); }
};

struct ClassifierTrace {
    std::vector<Vector> inputs;  // input of each layer
    std::vector<Vector> pre;     // W x + b of each layer
    Vector logits;
};

inline ClassifierTrace classifier_forward(const Classifier& c, const Vector& g) {
    ClassifierTrace t;
    Vector x = g;
    for (std::size_t i = 0; i < c.layers.size(); ++i) {
        t.inputs.push_back(x);
        t.pre.push_back(c.layers[i].weight * x + c.layers[i].bias);
        x = i + 1 < c.layers.size() ? Vector(t.pre.back().cwiseMax(0.0)) : t.pre.back();
    }
    t.logits = x;
    return t;
}

struct ClassifierGrad {
    std::vector<Matrix> weight;
    std::vector<Vector> bias;

    static ClassifierGrad zeros_like(const Classifier& c) {
        ClassifierGrad g;
        for (const auto& l : c.layers) {
            g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
            g.bias.push_back(Vector::Zero(l.bias.size()));
        }
        return g;
    }
};

/// Accumulates parameter gradients; returns dL/dg.
inline Vector classifier_backward(const Classifier& c, const ClassifierTrace& t, const Vector& d_logits,
                                  ClassifierGrad& grad) {
    Vector d = d_logits;
    for (std::size_t i = c.layers.size(); i-- > 0;) {
        if (i + 1 < c.layers.size()) d = (t.pre[i].array() > 0.0).select(d, 0.0);
        grad.weight[i].noalias() += d * t.inputs[i].transpose();
        grad.bias[i] += d;
        d = c.layers[i].weight.transpose() * d;
    }
    return d;
}

struct CeResult {
    double loss = 0.0;
    Vector probabilities;
    ClassifierGrad grad;
    Vector d_g;
};

/// -log softmax(classifier(g))[label] with gradients for the classifier and g.
inline CeResult ce_loss(const Vector& g, int label, const Classifier& classifier) {
    if (classifier.num_classes() < 2) throw InputError("ce_loss: classifier needs at least 2 outputs");
    if (label < 0 || label >= classifier.num_classes()) throw InputError("ce_loss: label out of range");
    const ClassifierTrace t = classifier_forward(classifier, g);
    const double m = t.logits.maxCoeff();
    const Vector shifted = (t.logits.array() - m).matrix();
    const double log_z = std::log(shifted.array().exp().sum());
    CeResult r;
    r.loss = log_z - shifted(label);
    r.probabilities = (shifted.array() - log_z).exp().matrix();
    Vector d_logits = r.probabilities;
    d_logits(label) -= 1.0;
    r.grad = ClassifierGrad::zeros_like(classifier);
    r.d_g = classifier_backward(classifier, t, d_logits, r.grad);
    return r;
}

struct GaussianKlResult {
    double loss = 0.0;
    std::vector<Vector> d_g;
};

inline Matrix gaussian_kernel(std::span<const Vector> g, double gamma) {
    const std::size_t n = g.size();
    Matrix k(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) k(i, j) = k(j, i) = std::exp(-(g[i] - g[j]).squaredNorm() / gamma);
    }
    return k;
}

/// KL loss of the Gaussian kernel K_ij = exp(-|g_i - g_j|^2 / γ) with gradients w.r.t. each g_i.
inline GaussianKlResult gaussian_kl_loss(std::span<const Vector> g, double gamma) {
    if (g.size() < 2) throw InputError("gaussian_kl_loss: batch must contain at least 2 encodings");
    if (!(gamma > 0)) throw InputError("gaussian_kl_loss: gamma must be positive");
    const Matrix k = gaussian_kernel(g, gamma);
    const KernelLoss kl = kl_kernel_loss_with_grad(k);
    GaussianKlResult r;
    r.loss = kl.value;
    r.d_g.assign(g.size(), Vector::Zero(g.front().size()));
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (i == j) continue;
            const double coeff = (kl.grad(i, j) + kl.grad(j, i)) * k(i, j) * (-2.0 / gamma);
            r.d_g[i] += coeff * (g[i] - g[j]);
        }
    return r;
}

/// Median of pairwise squared distances; 1.0 when every pair coincides.
inline double median_heuristic_gamma(std::span<const Vector> g) {
    std::vector<double> d;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = i + 1; j < g.size(); ++j) d.push_back((g[i] - g[j]).squaredNorm());
    if (d.empty()) return 1.0;
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    return *mid > 0.0 ? *mid : 1.0;
}

struct ModelConfig {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 32;
    std::size_t out_dim = 32;
    std::size_t gcn_layers = 2;
    std::size_t classifier_layers = 2;
    std::size_t classifier_hidden = 32;
    std::size_t num_classes = 2;
    Activation activation = Activation::Relu;
    std::vector<PatternKind> kinds{kAllPatternKinds.begin(), kAllPatternKinds.end()};

    /// 5-layer GCN encoders and a 3-layer classifier.
    static ModelConfig paper_preset(std::size_t input_dim, std::size_t num_classes) {
        ModelConfig c;
        c.input_dim = input_dim;
        c.num_classes = num_classes;
        c.gcn_layers = 5;
        c.classifier_layers = 3;
        return c;
    }
};

/// All trainable state: per-pattern GCN stacks, pattern logits w, classifier.
struct EnsembleModel {
    ModelConfig config;
    std::vector<GcnStack> stacks;
    Vector logits;
    Classifier classifier;
    double gamma = 0.0;  // Gaussian bandwidth; 0 until fixed by training

    std::size_t num_patterns() const noexcept { return stacks.size(); }
    Vector lambda() const { return softmax(logits); }
};

namespace detail {

inline Matrix glorot(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-a, a);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
    return m;
}

}  // namespace detail

/// Glorot-uniform weights, zero biases, zero logits (uniform λ).
inline EnsembleModel make_model(const ModelConfig& cfg, std::uint64_t seed) {
    if (cfg.input_dim == 0) throw InputError("make_model: input_dim must be positive");
    if (cfg.gcn_layers < 1) throw InputError("make_model: need at least one GCN layer");
    if (cfg.classifier_layers < 1) throw InputError("make_model: need at least one classifier layer");
    if (cfg.num_classes < 1) throw InputError("make_model: num_classes must be positive");
    if (cfg.kinds.empty()) throw InputError("make_model: no pattern kinds selected");
    EnsembleModel m;
    m.config = cfg;
    for (auto kind : cfg.kinds) {
        GcnStack s;
        s.kind = kind;
        s.activation = cfg.activation;
        std::size_t in = cfg.input_dim;
        for (std::size_t l = 0; l < cfg.gcn_layers; ++l) {
            const std::size_t out = l + 1 == cfg.gcn_layers ? cfg.out_dim : cfg.hidden_dim;
            std::mt19937_64 rng(derive_seed(seed, "gnn.init.gcn", {index_of(kind), l}));
            s.layer_weights.push_back(detail::glorot(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out), rng));
            in = out;
        }
        m.stacks.push_back(std::move(s));
    }
    m.logits = Vector::Zero(static_cast<Eigen::Index>(cfg.kinds.size()));
    std::size_t in = cfg.out_dim;
    for (std::size_t l = 0; l < cfg.classifier_layers; ++l) {
        const std::size_t out = l + 1 == cfg.classifier_layers ? cfg.num_classes : cfg.classifier_hidden;
        std::mt19937_64 rng(derive_seed(seed, "gnn.init.classifier", {l}));
        m.classifier.layers.push_back(
            {detail::glorot(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in), rng), Vector::Zero(out)});
        in = out;
    }
    return m;
}

/// One sample set per model pattern, aligned with EnsembleModel::stacks.
using GraphSamples = std::vector<PatternSampleSet>;

inline GraphSamples sample_graph(const Graph& g, std::span<const PatternKind> kinds, std::size_t q,
                                 std::uint64_t master_seed, std::size_t max_attempts) {
    GraphSamples out;
    out.reserve(kinds.size());
    for (auto k : kinds) out.push_back(sample_pattern_set(g, k, q, sampling_seed(master_seed, g.id(), k), max_attempts));
    return out;
}

inline std::vector<GraphSamples> sample_dataset(std::span<const Graph> graphs, std::span<const PatternKind> kinds,
                                                std::size_t q, std::uint64_t master_seed, std::size_t max_attempts,
                                                std::size_t threads = 1) {
    std::vector<GraphSamples> out(graphs.size());
    parallel_for(graphs.size(), threads,
                 [&](std::size_t i) { out[i] = sample_graph(graphs[i], kinds, q, master_seed, max_attempts); });
    return out;
}

/// Per-graph pattern representations and the ensemble vector.
struct GraphEncoding {
    std::size_t graph_id = 0;
    std::vector<Vector> z;
    Vector g;
    std::vector<std::size_t> sample_counts;
};

struct GraphForward {
    std::vector<std::vector<GcnTrace>> traces;  // [pattern][sample]
    GraphEncoding encoding;
};

inline GraphForward forward_graph(const EnsembleModel& model, const GraphSamples& samples) {
    if (samples.size() != model.num_patterns())
        throw InputError("forward_graph: expected " + std::to_string(model.num_patterns()) + " sample sets, got " +
                         std::to_string(samples.size()));
    GraphForward f;
    f.traces.resize(model.num_patterns());
    f.encoding.graph_id = samples.empty() ? 0 : samples.front().graph_id;
    for (std::size_t m = 0; m < model.num_patterns(); ++m) {
        const auto& set = samples[m];
        const auto& stack = model.stacks[m];
        if (set.kind != stack.kind) throw InputError("forward_graph: sample set kind does not match stack kind");
        Vector z = Vector::Zero(stack.output_dim());
        for (const auto& s : set.samples) {
            f.traces[m].push_back(gcn_forward(s, stack));
            z += f.traces[m].back().pooled;
        }
        if (!set.empty()) z /= static_cast<double>(set.size());
        f.encoding.z.push_back(std::move(z));
        f.encoding.sample_counts.push_back(set.size());
    }
    f.encoding.g = ensemble_representation(f.encoding.z, model.logits);
    return f;
}

inline GraphEncoding encode(const EnsembleModel& model, const GraphSamples& samples) {
    return forward_graph(model, samples).encoding;
}

/// Arg-max class; ties resolved towards the lowest index.
inline int predict(const EnsembleModel& model, const GraphSamples& samples) {
    const Vector logits = classifier_forward(model.classifier, encode(model, samples).g).logits;
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.size(); ++c)
        if (logits(c) > logits(best)) best = c;
    return static_cast<int>(best);
}

/// Gradient buffers shaped like the model's parameters.
struct ModelGradient {
    std::vector<std::vector<Matrix>> stacks;
    Vector logits;
    ClassifierGrad classifier;

    static ModelGradient zeros_like(const EnsembleModel& m) {
        ModelGradient g;
        for (const auto& s : m.stacks) {
            std::vector<Matrix> layers;
            for (const auto& w : s.layer_weights) layers.push_back(Matrix::Zero(w.rows(), w.cols()));
            g.stacks.push_back(std::move(layers));
        }
        g.logits = Vector::Zero(m.logits.size());
        g.classifier = ClassifierGrad::zeros_like(m.classifier);
        return g;
    }

    void scale(double s) {
        for (auto& layers : stacks)
            for (auto& w : layers) w *= s;
        logits *= s;
        for (auto& w : classifier.weight) w *= s;
        for (auto& b : classifier.bias) b *= s;
    }
};

enum class Objective { Supervised, Unsupervised };

constexpr std::string_view to_string(Objective o) noexcept {
    return o == Objective::Supervised ? "supervised" : "unsupervised";
}

/// A minibatch: sample sets of each graph plus labels (ignored when unsupervised).
struct Batch {
    std::vector<const GraphSamples*> samples;
    std::vector<int> labels;
};

struct BatchResult {
    double loss = 0.0;
    ModelGradient grad;
    std::vector<GraphEncoding> encodings;
};

namespace detail {

inline void require_finite(const Matrix& m, const std::string& path) {
    if (!m.allFinite()) throw NumericError("non-finite gradient at " + path);
}

inline void check_gradient(const EnsembleModel& model, const ModelGradient& g) {
    for (std::size_t m = 0; m < g.stacks.size(); ++m)
        for (std::size_t l = 0; l < g.stacks[m].size(); ++l)
            require_finite(g.stacks[m][l], "stacks[" + std::string(to_string(model.stacks[m].kind)) + "].W[" +
                                               std::to_string(l) + "]");
    require_finite(g.logits, "logits");
    for (std::size_t l = 0; l < g.classifier.weight.size(); ++l) {
        require_finite(g.classifier.weight[l], "classifier[" + std::to_string(l) + "].weight");
        require_finite(g.classifier.bias[l], "classifier[" + std::to_string(l) + "].bias");
    }
}

// Backprop from dL/dg of one graph into the stacks and logits.
inline void backward_ensemble(const EnsembleModel& model, const GraphForward& f, const Vector& d_g,
                              ModelGradient& grad) {
    const Vector lambda = model.lambda();
    Vector d_lambda(model.num_patterns());
    for (std::size_t m = 0; m < model.num_patterns(); ++m) {
        const auto mi = static_cast<Eigen::Index>(m);
        d_lambda(mi) = d_g.dot(f.encoding.z[m]);
        const auto count = f.traces[m].size();
        if (count == 0) continue;
        const Vector d_pooled = d_g * (lambda(mi) / static_cast<double>(count));
        for (const auto& t : f.traces[m]) gcn_backward(t, model.stacks[m], d_pooled, grad.stacks[m]);
    }
    grad.logits += softmax_backward(lambda, d_lambda);
}

}  // namespace detail

/// Batch loss (mean CE, or Gaussian-KL over the batch) and exact gradients
/// for every parameter group. Per-graph work may run in parallel; gradients
/// are accumulated in batch order.
inline BatchResult backward(const EnsembleModel& model, const Batch& batch, Objective objective,
                            std::size_t threads = 1) {
    const std::size_t b = batch.samples.size();
    if (b == 0) throw InputError("backward: empty batch");
    std::vector<GraphForward> fwd(b);
    parallel_for(b, threads, [&](std::size_t i) { fwd[i] = forward_graph(model, *batch.samples[i]); });

    BatchResult r;
    r.grad = ModelGradient::zeros_like(model);
    std::vector<Vector> d_g(b);
    if (objective == Objective::Supervised) {
        if (batch.labels.size() != b) throw InputError("backward: supervised batch needs one label per graph");
        const double inv_b = 1.0 / static_cast<double>(b);
        for (std::size_t i = 0; i < b; ++i) {
            CeResult ce = ce_loss(fwd[i].encoding.g, batch.labels[i], model.classifier);
            r.loss += ce.loss * inv_b;
            for (std::size_t l = 0; l < ce.grad.weight.size(); ++l) {
                r.grad.classifier.weight[l] += ce.grad.weight[l] * inv_b;
                r.grad.classifier.bias[l] += ce.grad.bias[l] * inv_b;
            }
            d_g[i] = ce.d_g * inv_b;
        }
    } else {
        if (!(model.gamma > 0)) throw InputError("backward: unsupervised objective needs a positive gamma");
        std::vector<Vector> g(b);
        for (std::size_t i = 0; i < b; ++i) g[i] = fwd[i].encoding.g;
        GaussianKlResult kl = gaussian_kl_loss(g, model.gamma);
        r.loss = kl.loss;
        d_g = std::move(kl.d_g);
    }
    for (std::size_t i = 0; i < b; ++i) detail::backward_ensemble(model, fwd[i], d_g[i], r.grad);
    detail::check_gradient(model, r.grad);
    r.encodings.reserve(b);
    for (auto& f : fwd) r.encodings.push_back(std::move(f.encoding));
    return r;
}

/// Batch loss only.
inline double batch_loss(const EnsembleModel& model, const Batch& batch, Objective objective) {
    const std::size_t b = batch.samples.size();
    std::vector<Vector> g;
    for (std::size_t i = 0; i < b; ++i) g.push_back(encode(model, *batch.samples[i]).g);
    if (objective == Objective::Unsupervised) return gaussian_kl_loss(g, model.gamma).loss;
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const Vector logits = classifier_forward(model.classifier, g[i]).logits;
        const double m = logits.maxCoeff();
        loss += (std::log((logits.array() - m).exp().sum()) + m - logits(batch.labels[i])) / static_cast<double>(b);
    }
    return loss;
}

struct TrainConfig {
    Objective objective = Objective::Supervised;
    std::size_t epochs = 100;
    double step = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    bool alternate = false;  // alternate epochs between w and (W, classifier)
    double gamma = 0.0;      // <= 0: median heuristic on the first batch
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct TrainHistory {
    std::vector<double> epoch_loss;  // mean minibatch loss per epoch
    std::vector<Vector> lambda;      // λ after each epoch
};

struct TrainResult {
    EnsembleModel model;
    TrainHistory history;
};

namespace detail {

struct Momentum {
    ModelGradient velocity;

    void apply(EnsembleModel& m, const ModelGradient& g, double step, double mu, bool update_logits,
               bool update_rest) {
        auto upd = [&](auto& param, auto& vel, const auto& grad) {
            vel = mu * vel + grad;
            param -= step * vel;
        };
        if (update_rest) {
            for (std::size_t s = 0; s < m.stacks.size(); ++s)
                for (std::size_t l = 0; l < m.stacks[s].layer_weights.size(); ++l)
                    upd(m.stacks[s].layer_weights[l], velocity.stacks[s][l], g.stacks[s][l]);
            for (std::size_t l = 0; l < m.classifier.layers.size(); ++l) {
                upd(m.classifier.layers[l].weight, velocity.classifier.weight[l], g.classifier.weight[l]);
                upd(m.classifier.layers[l].bias, velocity.classifier.bias[l], g.classifier.bias[l]);
            }
        }
        if (update_logits) upd(m.logits, velocity.logits, g.logits);
    }
};

}  // namespace detail

/// Joint minibatch momentum-SGD over (W, w, classifier). Deterministic per seed.
inline TrainResult train(const std::vector<GraphSamples>& samples, std::span<const int> labels,
                         std::span<const std::size_t> train_indices, const ModelConfig& model_cfg,
                         const TrainConfig& cfg) {
    if (train_indices.empty() || samples.empty()) throw InputError("train: empty dataset");
    if (cfg.objective == Objective::Supervised && labels.size() != samples.size())
        throw InputError("train: supervised training requires a label for every graph");
    if (cfg.batch_size == 0) throw InputError("train: batch_size must be positive");
    for (auto i : train_indices)
        if (i >= samples.size()) throw InputError("train: index out of range");

    TrainResult result{make_model(model_cfg, derive_seed(cfg.seed, "gnn.model")), {}};
    EnsembleModel& model = result.model;
    detail::Momentum opt{ModelGradient::zeros_like(model)};
    std::vector<std::size_t> order(train_indices.begin(), train_indices.end());
    std::mt19937_64 rng(derive_seed(cfg.seed, "gnn.shuffle"));

    auto make_batch = [&](std::size_t begin, std::size_t end) {
        Batch b;
        for (std::size_t k = begin; k < end; ++k) {
            b.samples.push_back(&samples[order[k]]);
            if (cfg.objective == Objective::Supervised) b.labels.push_back(labels[order[k]]);
        }
        return b;
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            if (cfg.objective == Objective::Unsupervised && end - begin < 2) continue;
            Batch batch = make_batch(begin, end);
            if (cfg.objective == Objective::Unsupervised && !(model.gamma > 0)) {
                if (cfg.gamma > 0) {
                    model.gamma = cfg.gamma;
                } else {
                    std::vector<Vector> g;
                    for (auto* s : batch.samples) g.push_back(encode(model, *s).g);
                    model.gamma = median_heuristic_gamma(g);
                }
            }
            BatchResult r = backward(model, batch, cfg.objective, cfg.threads);
            const bool logits_phase = !cfg.alternate || epoch % 2 == 1;
            const bool rest_phase = !cfg.alternate || epoch % 2 == 0;
            opt.apply(model, r.grad, cfg.step, cfg.momentum, logits_phase, rest_phase);
            total += r.loss;
            ++batches;
        }
        result.history.epoch_loss.push_back(batches ? total / static_cast<double>(batches) : 0.0);
        result.history.lambda.push_back(model.lambda());
    }
    return result;
}

/// One row of the explanation report.
struct PatternExplanation {
    PatternKind kind = PatternKind::Path;
    double weight = 0.0;
    double mean_samples = 0.0;    // average realised sample count per graph
    double empty_fraction = 0.0;  // fraction of graphs with no sample of this pattern
};

/// Patterns ranked by λ, descending; ties keep pattern ordinal order.
inline std::vector<PatternExplanation> explain(const EnsembleModel& model,
                                               std::span<const GraphSamples> samples = {}) {
    const Vector lambda = model.lambda();
    std::vector<PatternExplanation> rows;
    for (std::size_t m = 0; m < model.num_patterns(); ++m) {
        PatternExplanation e{model.stacks[m].kind, lambda(static_cast<Eigen::Index>(m)), 0.0, 0.0};
        if (!samples.empty()) {
            for (const auto& gs : samples) {
                e.mean_samples += static_cast<double>(gs[m].size());
                e.empty_fraction += gs[m].empty() ? 1.0 : 0.0;
            }
            e.mean_samples /= static_cast<double>(samples.size());
            e.empty_fraction /= static_cast<double>(samples.size());
        }
        rows.push_back(e);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        return index_of(a.kind) < index_of(b.kind);
    });
    return rows;
}

}  // namespace pxgl
