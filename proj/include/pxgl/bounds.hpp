#pragma once

// Robustness bound, stability constant η, generalization bound, and an
// empirical perturbation harness that checks the robustness bound.

#include "pxgl/gnn.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace pxgl {

/// Largest singular value by power iteration on MᵀM.
inline double spectral_norm(const Matrix& m, int iterations = 200, double tol = 1e-10) {
    if (m.size() == 0) return 0.0;
    Vector v(m.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i)  // fixed start with no symmetric blind spots
        v(i) = 1.0 + 0.5 * static_cast<double>(mix64(static_cast<std::uint64_t>(i)) % 1000) / 1000.0;
    v.normalize();
    double sigma = (m * v).norm();
    for (int it = 0; it < iterations; ++it) {
        Vector w = m.transpose() * (m * v);
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        v = w / norm;
        const double next = (m * v).norm();
        const bool done = std::abs(next - sigma) <= tol * std::max(1.0, next);
        sigma = next;
        if (done) break;
    }
    return sigma;
}

struct BoundInputs {
    double beta_A = 0.0;
    double beta_X = 0.0;
    double beta_W = 0.0;
    double alpha = 0.0;
    double kappa = 0.0;
    double rho = 1.0;
    double tau = 1.0;
    int L = 1;
    std::size_t n = 1;
    double delta_A_norm = 0.0;
    double delta_X_norm = 0.0;
    double delta_D_norm = 0.0;
};

inline void validate(const BoundInputs& b) {
    if (b.beta_A < 0 || b.beta_X < 0 || b.beta_W < 0 || b.alpha < 0 || b.rho < 0 || b.tau < 0 ||
        b.delta_A_norm < 0 || b.delta_X_norm < 0 || b.delta_D_norm < 0)
        throw InputError("BoundInputs: norms and constants must be non-negative");
    if (b.L < 1) throw InputError("BoundInputs: L must be >= 1");
    if (b.n < 1) throw InputError("BoundInputs: n must be >= 1");
}

/// Upper bound on ‖g̃ − g‖ for an L-layer GCN with average pooling.
inline double robustness_bound(const BoundInputs& b) {
    validate(b);
    const double L = b.L;
    const double prefactor = std::pow(b.rho, L) * std::pow(b.beta_W, L) *
                             std::pow(1.0 + b.beta_A + b.delta_A_norm, L - 1.0) * std::pow(1.0 + b.alpha, -L) /
                             std::sqrt(static_cast<double>(b.n));
    const double bracket = (1.0 + b.beta_A + 2.0 * b.delta_A_norm) * b.delta_X_norm +
                           2.0 * L * b.beta_X * (1.0 + b.beta_A) * b.delta_D_norm;
    return prefactor * bracket;
}

struct StabilityInputs {
    double beta_hat_W = 0.0;
    double beta_hat_dW = 0.0;
    double gamma_C = 0.0;   // ‖W_C\i‖₂
    double gamma_dC = 0.0;  // ‖W_C − W_C\i‖₂
    double lambda_diff_norm = 0.0;
    double lambda_norm = 0.0;
    double rho = 1.0;
    double tau = 1.0;
    int L = 1;
    std::size_t n = 1;
    double beta_A = 0.0;
    double beta_X = 0.0;
    double alpha = 0.0;
};

/// `MainText` uses the constant 2 in place of the λ terms; `Appendix` keeps
/// the measured ‖λ_D − λ_D\i‖ and ‖λ_D\i‖ factors.
enum class StabilityMode { MainText, Appendix };

inline double stability_eta(const StabilityInputs& s, StabilityMode mode) {
    if (s.beta_hat_W < 0 || s.beta_hat_dW < 0 || s.gamma_C < 0 || s.gamma_dC < 0 || s.lambda_diff_norm < 0 ||
        s.lambda_norm < 0 || s.rho < 0 || s.tau < 0 || s.beta_A < 0 || s.beta_X < 0 || s.alpha < 0)
        throw InputError("StabilityInputs: all quantities must be non-negative");
    if (s.L < 1 || s.n < 1) throw InputError("StabilityInputs: L and n must be >= 1");
    const double L = s.L;
    const double prefactor = s.tau / std::sqrt(static_cast<double>(s.n)) * std::pow(s.rho, L) *
                             std::pow(s.beta_hat_W, L - 1.0) * s.beta_X * std::pow(1.0 + s.beta_A, L) *
                             std::pow(1.0 + s.alpha, -L);
    const double inner = mode == StabilityMode::MainText
                             ? 2.0 * s.beta_hat_W + L * s.beta_hat_dW
                             : s.beta_hat_W * s.lambda_diff_norm + L * s.beta_hat_dW * s.lambda_norm;
    return prefactor * (s.beta_hat_W * s.gamma_dC + s.gamma_C * inner);
}

/// c (η log N log(N/δ) + sqrt(log(1/δ)/N)).
inline double generalization_bound(double eta, std::size_t n_graphs, double c, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw InputError("generalization_bound: delta must lie in (0, 1)");
    if (n_graphs < 2) throw InputError("generalization_bound: need at least 2 graphs");
    if (!(c > 0.0)) throw InputError("generalization_bound: c must be positive");
    if (!(eta >= 0.0)) throw InputError("generalization_bound: eta must be non-negative");
    const double n = static_cast<double>(n_graphs);
    return c * (eta * std::log(n) * std::log(n / delta) + std::sqrt(std::log(1.0 / delta) / n));
}

struct PerturbConfig {
    std::size_t edge_flips = 1;
    double feature_noise = 0.05;
};

struct Perturbation {
    Graph graph;
    Matrix delta_A;
    Matrix delta_X;
    double delta_A_norm = 0.0;  // spectral
    double delta_X_norm = 0.0;  // Frobenius
    double delta_D_norm = 0.0;  // spectral of I − D̂'^{1/2} D̂^{-1/2}
    double kappa = 0.0;         // min column sum of Δ_A
};

/// Flips `edge_flips` distinct node pairs and adds uniform feature noise.
inline Perturbation perturb(const Graph& g, std::size_t edge_flips, double feature_noise, std::uint64_t seed) {
    const std::size_t n = g.num_nodes();
    const std::size_t pairs = n * (n - 1) / 2;
    if (edge_flips > pairs) throw InputError("perturb: edge_flips exceeds the number of node pairs");
    if (feature_noise < 0) throw InputError("perturb: feature_noise must be non-negative");
    std::mt19937_64 rng(seed);
    std::vector<Edge> all;
    all.reserve(pairs);
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = u + 1; v < n; ++v) all.emplace_back(u, v);
    for (std::size_t k = 0; k < edge_flips; ++k) {  // partial Fisher-Yates
        std::uniform_int_distribution<std::size_t> pick(k, all.size() - 1);
        std::swap(all[k], all[pick(rng)]);
    }
    Matrix a = g.dense_adjacency();
    Matrix a_new = a;
    for (std::size_t k = 0; k < edge_flips; ++k) {
        auto [u, v] = all[k];
        a_new(u, v) = a_new(v, u) = 1.0 - a(u, v);
    }
    std::vector<Edge> edges;
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = u + 1; v < n; ++v)
            if (a_new(u, v) != 0.0) edges.emplace_back(u, v);

    Matrix noise = Matrix::Zero(g.features().rows(), g.features().cols());
    if (feature_noise > 0) {
        std::uniform_real_distribution<double> dist(-feature_noise, feature_noise);
        for (Eigen::Index j = 0; j < noise.cols(); ++j)
            for (Eigen::Index i = 0; i < noise.rows(); ++i) noise(i, j) = dist(rng);
    }

    Perturbation p{Graph(n, edges, g.features() + noise, g.node_labels(), g.label(), g.id()), a_new - a, noise};
    p.delta_A_norm = spectral_norm(p.delta_A);
    p.delta_X_norm = noise.norm();
    double dd = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d_old = static_cast<double>(g.degree(i) + 1);
        const double d_new = static_cast<double>(p.graph.degree(i) + 1);
        dd = std::max(dd, std::abs(1.0 - std::sqrt(d_new / d_old)));
    }
    p.delta_D_norm = dd;
    p.kappa = p.delta_A.colwise().sum().minCoeff();
    return p;
}

/// max over stacks and layers of ‖W^(m,l)‖₂.
inline double max_weight_spectral_norm(const EnsembleModel& model) {
    double beta = 0.0;
    for (const auto& s : model.stacks)
        for (const auto& w : s.layer_weights) beta = std::max(beta, spectral_norm(w));
    return beta;
}

/// Bound inputs for an (original, perturbed) pair. α is the minimum degree
/// over both graphs so the bound covers either direction of the perturbation.
inline BoundInputs make_bound_inputs(const Graph& g, const Perturbation& p, const EnsembleModel& model) {
    BoundInputs b;
    b.beta_A = spectral_norm(g.dense_adjacency());
    b.beta_X = g.features().norm();
    b.beta_W = max_weight_spectral_norm(model);
    b.alpha = static_cast<double>(std::min(g.min_degree(), p.graph.min_degree()));
    b.kappa = p.kappa;
    b.rho = lipschitz_constant(model.config.activation);
    b.L = static_cast<int>(model.config.gcn_layers);
    b.n = g.num_nodes();
    b.delta_A_norm = p.delta_A_norm;
    b.delta_X_norm = p.delta_X_norm;
    b.delta_D_norm = p.delta_D_norm;
    return b;
}

/// WholeGraph encodes each graph as the single sample of every pattern
/// channel; Sampled reuses pattern samples' node-id lists on both graphs.
enum class DominanceMode { WholeGraph, Sampled };

struct DominanceTrial {
    std::size_t index = 0;
    double measured = 0.0;
    double bound = 0.0;
    double delta_A_norm = 0.0;
    double delta_X_norm = 0.0;
    double delta_D_norm = 0.0;
};

struct DominanceReport {
    std::vector<DominanceTrial> trials;
    std::size_t violations = 0;
    double max_ratio = 0.0;  // measured / bound over trials with bound > 0
};

namespace detail {

inline GraphSamples whole_graph_samples(const Graph& g, const EnsembleModel& model) {
    std::vector<std::size_t> all(g.num_nodes());
    std::iota(all.begin(), all.end(), std::size_t{0});
    GraphSamples out;
    for (const auto& s : model.stacks) out.push_back(sample_set_from_node_ids(g, s.kind, 1, {all}));
    return out;
}

inline GraphSamples rebuild_samples(const Graph& g, const GraphSamples& reference) {
    GraphSamples out;
    for (const auto& set : reference) {
        std::vector<std::vector<std::size_t>> ids;
        for (const auto& s : set.samples) ids.push_back(s.node_ids);
        out.push_back(sample_set_from_node_ids(g, set.kind, set.requested_q, ids));
    }
    return out;
}

// Σ_m λ_m mean_S bound(S): triangle inequality over the sample average.
inline double sampled_bound(const Graph& g, const Perturbation& p, const GraphSamples& ref,
                            const EnsembleModel& model) {
    const Vector lambda = model.lambda();
    const double beta_W = max_weight_spectral_norm(model);
    double total = 0.0;
    for (std::size_t m = 0; m < ref.size(); ++m) {
        if (ref[m].empty()) continue;
        double sum = 0.0;
        for (const auto& s : ref[m].samples) {
            const Subgraph orig = induced_subgraph(g, s.node_ids);
            const Subgraph pert = induced_subgraph(p.graph, s.node_ids);
            const Matrix da = pert.graph.dense_adjacency() - orig.graph.dense_adjacency();
            BoundInputs b;
            b.beta_A = spectral_norm(orig.graph.dense_adjacency());
            b.beta_X = orig.graph.features().norm();
            b.beta_W = beta_W;
            b.alpha = static_cast<double>(std::min(orig.graph.min_degree(), pert.graph.min_degree()));
            b.rho = lipschitz_constant(model.config.activation);
            b.L = static_cast<int>(model.config.gcn_layers);
            b.n = s.size();
            b.delta_A_norm = spectral_norm(da);
            b.delta_X_norm = (pert.graph.features() - orig.graph.features()).norm();
            double dd = 0.0;
            for (std::size_t i = 0; i < s.size(); ++i) {
                const double d0 = static_cast<double>(orig.graph.degree(i) + 1);
                const double d1 = static_cast<double>(pert.graph.degree(i) + 1);
                dd = std::max(dd, std::abs(1.0 - std::sqrt(d1 / d0)));
            }
            b.delta_D_norm = dd;
            sum += robustness_bound(b);
        }
        total += lambda(static_cast<Eigen::Index>(m)) * sum / static_cast<double>(ref[m].size());
    }
    return total;
}

}  // namespace detail

/// One perturbation trial: re-encode on identical node subsets and compare
/// ‖g̃ − g‖ with the bound evaluated on measured norms and actual weights.
inline DominanceTrial dominance_trial(const EnsembleModel& model, const Graph& g, const PerturbConfig& cfg,
                                      std::uint64_t seed, DominanceMode mode, std::size_t q = 10) {
    const Perturbation p = perturb(g, cfg.edge_flips, cfg.feature_noise, seed);
    DominanceTrial t;
    t.delta_A_norm = p.delta_A_norm;
    t.delta_X_norm = p.delta_X_norm;
    t.delta_D_norm = p.delta_D_norm;
    if (mode == DominanceMode::WholeGraph) {
        const Vector g0 = encode(model, detail::whole_graph_samples(g, model)).g;
        const Vector g1 = encode(model, detail::whole_graph_samples(p.graph, model)).g;
        t.measured = (g1 - g0).norm();
        t.bound = robustness_bound(make_bound_inputs(g, p, model));
    } else {
        std::vector<PatternKind> kinds;
        for (const auto& s : model.stacks) kinds.push_back(s.kind);
        const GraphSamples ref = sample_graph(g, kinds, q, derive_seed(seed, "bounds.sample"), 50 * q);
        const Vector g0 = encode(model, ref).g;
        const Vector g1 = encode(model, detail::rebuild_samples(p.graph, ref)).g;
        t.measured = (g1 - g0).norm();
        t.bound = detail::sampled_bound(g, p, ref, model);
    }
    return t;
}

/// Runs `trials` perturbation trials on `g` with per-trial derived seeds.
inline DominanceReport bound_dominance_trial(const EnsembleModel& model, const Graph& g, const PerturbConfig& cfg,
                                             std::size_t trials, std::uint64_t seed,
                                             DominanceMode mode = DominanceMode::WholeGraph,
                                             std::size_t threads = 1) {
    DominanceReport r;
    r.trials.resize(trials);
    parallel_for(trials, threads, [&](std::size_t i) {
        r.trials[i] = dominance_trial(model, g, cfg, derive_seed(seed, "bounds.trial", {i}), mode);
        r.trials[i].index = i;
    });
    for (const auto& t : r.trials) {
        if (t.measured > t.bound) ++r.violations;
        if (t.bound > 0) r.max_ratio = std::max(r.max_ratio, t.measured / t.bound);
    }
    return r;
}

}  // namespace pxgl
