#pragma once

// Ensemble graph kernel: pattern counting vectors, Gram matrices, the
// softmax-weighted ensemble kernel and the optimisation of its weights.

#include "pxgl/patterns.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pxgl {

/// Non-negative pattern-count features of one graph for one pattern family.
struct CountingVector {
    std::size_t graph_id = 0;
    PatternKind kind = PatternKind::Path;
    Vector values;
};

/// Entry i (1-based) is the number of walks of length i, 1^T A^i 1.
inline CountingVector path_counting_vector(const Graph& g, int l_max) {
    if (l_max < 1) throw InputError("path_counting_vector: l_max must be >= 1");
    const std::size_t n = g.num_nodes();
    CountingVector cv{g.id(), PatternKind::Path, Vector::Zero(l_max)};
    Vector x = Vector::Ones(n), next(n);
    for (int i = 0; i < l_max; ++i) {
        next.setZero();
        for (auto [a, b] : g.edges()) {
            next(a) += x(b);
            next(b) += x(a);
        }
        x.swap(next);
        cv.values(i) = x.sum();
    }
    return cv;
}

/// Shared WL colour dictionary, fit over a whole dataset before any vector
/// is built. Index `size()` is the overflow bucket for unseen colours.
class WlVocabulary {
public:
    WlVocabulary() = default;
    explicit WlVocabulary(int depth) : depth_(depth) {
        if (depth < 0) throw InputError("WL depth must be >= 0");
    }

    int depth() const noexcept { return depth_; }
    std::size_t size() const noexcept { return index_.size(); }
    std::size_t dimension() const noexcept { return index_.size() + 1; }

    void fit(std::span<const Graph> graphs) {
        for (const auto& g : graphs)
            for (auto key : colour_keys(g, depth_))
                index_.try_emplace(key, index_.size());
    }

    std::size_t lookup(std::uint64_t key) const {
        auto it = index_.find(key);
        return it == index_.end() ? index_.size() : it->second;
    }

    /// One key per (node, refinement depth), depth-tagged.
    static std::vector<std::uint64_t> colour_keys(const Graph& g, int depth) {
        const std::size_t n = g.num_nodes();
        std::vector<std::uint64_t> colour(n), next(n), buf, keys;
        keys.reserve(n * static_cast<std::size_t>(depth + 1));
        for (std::size_t v = 0; v < n; ++v)
            colour[v] = g.has_node_labels() ? hash_combine(0x5157u, static_cast<std::uint64_t>(g.node_labels()[v]))
                                            : 0x5157u;
        for (int d = 0;; ++d) {
            for (auto c : colour) keys.push_back(hash_combine(static_cast<std::uint64_t>(d), c));
            if (d == depth) break;
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
        return keys;
    }

private:
    int depth_ = 0;
    std::map<std::uint64_t, std::size_t> index_;
};

/// Histogram of WL colours over depths 0..vocab.depth(), indexed by the shared vocabulary.
inline CountingVector wl_subtree_vector(const Graph& g, const WlVocabulary& vocab) {
    CountingVector cv{g.id(), PatternKind::Tree, Vector::Zero(vocab.dimension())};
    for (auto key : WlVocabulary::colour_keys(g, vocab.depth())) cv.values(vocab.lookup(key)) += 1.0;
    return cv;
}

/// Same histogram truncated at `depth` (<= vocab.depth()).
inline CountingVector wl_subtree_vector(const Graph& g, int depth, const WlVocabulary& vocab) {
    if (depth < 0 || depth > vocab.depth())
        throw InputError("wl_subtree_vector: depth must lie in [0, vocabulary depth]");
    CountingVector cv{g.id(), PatternKind::Tree, Vector::Zero(vocab.dimension())};
    for (auto key : WlVocabulary::colour_keys(g, depth)) cv.values(vocab.lookup(key)) += 1.0;
    return cv;
}

/// Graphlet slots: size-3 {wedge, triangle}, size-4 {path4, star4, cycle4, tadpole, diamond, K4}.
enum class GraphletClass : std::uint8_t { Wedge, Triangle, Path4, Star4, Cycle4, Tadpole, Diamond, K4 };
inline constexpr std::size_t kGraphletClasses = 8;
inline constexpr std::size_t kDefaultGraphletNodeCap = 200;

/// Exact induced counts of connected 3- and 4-node graphlets by exhaustive enumeration.
inline CountingVector graphlet_counting_vector(const Graph& g, std::size_t node_cap = kDefaultGraphletNodeCap) {
    const std::size_t n = g.num_nodes();
    if (n > node_cap)
        throw CapabilityError("graphlet_counting_vector: n=" + std::to_string(n) + " exceeds the exhaustive-enumeration cap " +
                              std::to_string(node_cap) + "; sampling-based graphlet estimates are not supported");
    CountingVector cv{g.id(), PatternKind::Graphlet, Vector::Zero(kGraphletClasses)};
    auto bump = [&](GraphletClass c) { cv.values(static_cast<Eigen::Index>(c)) += 1.0; };
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            for (std::size_t c = b + 1; c < n; ++c) {
                const int e = g.has_edge(a, b) + g.has_edge(a, c) + g.has_edge(b, c);
                if (e == 2) bump(GraphletClass::Wedge);
                else if (e == 3) bump(GraphletClass::Triangle);
                for (std::size_t d = c + 1; d < n; ++d) {
                    const std::array<std::size_t, 4> v{a, b, c, d};
                    std::array<int, 4> deg{};
                    int edges = 0;
                    for (int i = 0; i < 4; ++i)
                        for (int j = i + 1; j < 4; ++j)
                            if (g.has_edge(v[i], v[j])) {
                                ++deg[i];
                                ++deg[j];
                                ++edges;
                            }
                    const int max_deg = *std::max_element(deg.begin(), deg.end());
                    const int min_deg = *std::min_element(deg.begin(), deg.end());
                    switch (edges) {
                        case 3:
                            if (min_deg == 0) break;  // triangle + isolated vertex
                            bump(max_deg == 3 ? GraphletClass::Star4 : GraphletClass::Path4);
                            break;
                        case 4: bump(max_deg == 3 ? GraphletClass::Tadpole : GraphletClass::Cycle4); break;
                        case 5: bump(GraphletClass::Diamond); break;
                        case 6: bump(GraphletClass::K4); break;
                        default: break;
                    }
                }
            }
    return cv;
}

/// Monotone log(1 + x) squashing applied to counts before Gram assembly.
inline CountingVector log1p_transform(CountingVector cv) {
    cv.values = cv.values.array().log1p().matrix();
    return cv;
}

/// K[i][j] = <h_i, h_j>.
inline Matrix gram_from_vectors(std::span<const CountingVector> vectors) {
    const std::size_t n = vectors.size();
    if (n == 0) return Matrix(0, 0);
    Matrix h(vectors[0].values.size(), n);
    for (std::size_t i = 0; i < n; ++i) {
        if (vectors[i].values.size() != h.rows() || vectors[i].kind != vectors[0].kind)
            throw InputError("gram_from_vectors: vector " + std::to_string(i) + " has kind/dimension mismatch");
        h.col(i) = vectors[i].values;
    }
    Matrix k = h.transpose() * h;
    // exact symmetry regardless of the BLAS kernel's summation order
    for (Eigen::Index i = 0; i < k.rows(); ++i)
        for (Eigen::Index j = i + 1; j < k.cols(); ++j) k(j, i) = k(i, j);
    return k;
}

inline constexpr double kDiagonalFloor = 1e-12;

/// Cosine normalisation; zero diagonals are floored at 1e-12.
inline Matrix normalize_gram(const Matrix& k) {
    const Eigen::Index n = k.rows();
    Vector inv(n);
    for (Eigen::Index i = 0; i < n; ++i) inv(i) = 1.0 / std::sqrt(std::max(k(i, i), kDiagonalFloor));
    Matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j) out(i, j) = out(j, i) = k(i, j) * inv(i) * inv(j);
    }
    return out;
}

inline Vector softmax(const Vector& w) {
    if (w.size() == 0) return w;
    const double m = w.maxCoeff();
    Vector e = (w.array() - m).exp().matrix();
    return e / e.sum();
}

/// Back-propagates dL/dλ through λ = softmax(w).
inline Vector softmax_backward(const Vector& lambda, const Vector& d_lambda) {
    const double dot = lambda.dot(d_lambda);
    return (lambda.array() * (d_lambda.array() - dot)).matrix();
}

/// M normalised Gram matrices with learnable logits w; λ = softmax(w).
struct KernelStack {
    std::vector<std::string> names;
    std::vector<Matrix> grams;
    Vector logits;
    std::optional<std::vector<int>> labels;

    std::size_t size() const noexcept { return grams.size(); }
    Eigen::Index num_graphs() const noexcept { return grams.empty() ? 0 : grams.front().rows(); }
    Vector lambda() const { return softmax(logits); }
};

inline Matrix ensemble_gram(const std::vector<Matrix>& grams, const Vector& lambda) {
    Matrix k = Matrix::Zero(grams.front().rows(), grams.front().cols());
    for (std::size_t m = 0; m < grams.size(); ++m) k += lambda(static_cast<Eigen::Index>(m)) * grams[m];
    return k;
}

/// K(λ) = Σ_m softmax(w)_m K_m.
inline Matrix ensemble_gram(const KernelStack& stack) {
    if (stack.grams.empty()) throw InputError("ensemble_gram: empty kernel stack");
    return ensemble_gram(stack.grams, stack.lambda());
}

inline constexpr double kLogFloor = 1e-12;

/// Loss value plus dL/dK (entrywise, K treated as N×N free variables).
struct KernelLoss {
    double value = 0.0;
    Matrix grad;
};

/// Supervised contrastive loss over a kernel matrix:
///   -Σ_{i≠j, y_i=y_j} ( log K_ij - log[ Σ_{k≠i, y_k=y_i} K_ik + μ Σ_{y_k≠y_i} K_ik ] ).
/// Entries are floored at 1e-12 before the log. No positive pairs gives 0.
inline KernelLoss scl_loss_with_grad(const Matrix& k, std::span<const int> labels, double mu) {
    const Eigen::Index n = k.rows();
    if (static_cast<std::size_t>(n) != labels.size()) throw InputError("scl_loss: label count does not match kernel size");
    if (!(mu > 0)) throw InputError("scl_loss: mu must be positive");
    KernelLoss out{0.0, Matrix::Zero(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        double denom = 0.0;
        std::size_t positives = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double kij = std::max(k(i, j), kLogFloor);
            if (labels[i] == labels[j]) {
                denom += kij;
                ++positives;
            } else {
                denom += mu * kij;
            }
        }
        if (positives == 0) continue;
        const double log_denom = std::log(denom);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const bool floored = k(i, j) < kLogFloor;
            const double kij = std::max(k(i, j), kLogFloor);
            const double coeff = labels[i] == labels[j] ? 1.0 : mu;
            if (labels[i] == labels[j]) {
                out.value -= std::log(kij) - log_denom;
                if (!floored) out.grad(i, j) -= 1.0 / kij;
            }
            if (!floored) out.grad(i, j) += static_cast<double>(positives) * coeff / denom;
        }
    }
    return out;
}

inline double scl_loss(const Matrix& k, std::span<const int> labels, double mu) {
    return scl_loss_with_grad(k, labels, mu).value;
}

/// Unsupervised KL loss KL(P || Q): Q row-normalises K; the sharpened target
/// P_ij ∝ K_ij^2 / r_j uses column sums r_j = Σ_i K_ij and is row-normalised.
/// The gradient differentiates through both P and Q.
inline KernelLoss kl_kernel_loss_with_grad(const Matrix& k_in) {
    const Eigen::Index n = k_in.rows();
    Matrix k = k_in.cwiseMax(kLogFloor);
    const Vector row_sum = k.rowwise().sum();
    const Vector col_sum = k.colwise().sum().transpose();
    Matrix t(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) t(i, j) = k(i, j) * k(i, j) / col_sum(j);
    const Vector z = t.rowwise().sum();

    KernelLoss out{0.0, Matrix::Zero(n, n)};
    Matrix p(n, n), a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            p(i, j) = t(i, j) / z(i);
            const double log_p = std::log(p(i, j));
            const double log_q = std::log(k(i, j)) - std::log(row_sum(i));
            out.value += p(i, j) * (log_p - log_q);
            a(i, j) = log_p + 1.0 - log_q;
        }

    Matrix& dk = out.grad;
    // through log Q_ij = log K_ij - log R_i  (Σ_j P_ij = 1)
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) dk(i, j) += -p(i, j) / k(i, j) + 1.0 / row_sum(i);
    // through P = T / Z and T_ij = K_ij^2 / r_j
    Matrix dt(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = (a.row(i).array() * p.row(i).array()).sum();
        for (Eigen::Index j = 0; j < n; ++j) dt(i, j) = (a(i, j) - s) / z(i);
    }
    Vector dr = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            dk(i, j) += dt(i, j) * 2.0 * k(i, j) / col_sum(j);
            dr(j) -= dt(i, j) * k(i, j) * k(i, j) / (col_sum(j) * col_sum(j));
        }
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) dk(i, j) += dr(j);
    // floored entries are constants
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (k_in(i, j) < kLogFloor) dk(i, j) = 0.0;
    return out;
}

inline double kl_kernel_loss(const Matrix& k) { return kl_kernel_loss_with_grad(k).value; }

enum class KernelObjective { Scl, Kl };

struct ObjectiveSpec {
    KernelObjective kind = KernelObjective::Scl;
    double mu = 1.0;
};

struct OptimizerConfig {
    double step = 0.05;
    int iterations = 500;
    bool backtracking = true;
    std::uint64_t seed = 0;
};

struct FitReport {
    Vector logits;
    Vector lambda;
    std::vector<double> loss_curve;  // loss before the first step, then after every step
};

/// Loss of the stack at logits w and its gradient with respect to w.
inline std::pair<double, Vector> ensemble_loss_and_grad(const KernelStack& stack, const ObjectiveSpec& objective,
                                                        const Vector& logits) {
    const Vector lambda = softmax(logits);
    const Matrix k = ensemble_gram(stack.grams, lambda);
    KernelLoss loss;
    if (objective.kind == KernelObjective::Scl) {
        if (!stack.labels) throw InputError("SCL objective requires labels");
        loss = scl_loss_with_grad(k, *stack.labels, objective.mu);
    } else {
        loss = kl_kernel_loss_with_grad(k);
    }
    Vector d_lambda(stack.size());
    for (std::size_t m = 0; m < stack.size(); ++m)
        d_lambda(static_cast<Eigen::Index>(m)) = (loss.grad.array() * stack.grams[m].array()).sum();
    return {loss.value, softmax_backward(lambda, d_lambda)};
}

/// Full-batch gradient descent on the logits; with backtracking the step is
/// halved until the loss does not increase, so the curve is non-increasing.
inline FitReport fit_ensemble_weights(const KernelStack& stack, const ObjectiveSpec& objective,
                                      const OptimizerConfig& opt) {
    if (stack.grams.empty()) throw InputError("fit_ensemble_weights: empty kernel stack");
    for (std::size_t m = 0; m < stack.size(); ++m)
        if (!stack.grams[m].allFinite())
            throw InputError("fit_ensemble_weights: gram '" + stack.names.at(m) + "' has non-finite entries");
    Vector w = stack.logits.size() == static_cast<Eigen::Index>(stack.size()) ? stack.logits
                                                                              : Vector::Zero(stack.size());
    auto [loss, grad] = ensemble_loss_and_grad(stack, objective, w);
    if (!std::isfinite(loss)) {
        for (std::size_t m = 0; m < stack.size(); ++m) {
            Vector one_hot = Vector::Constant(stack.size(), -60.0);
            one_hot(static_cast<Eigen::Index>(m)) = 60.0;
            if (!std::isfinite(ensemble_loss_and_grad(stack, objective, one_hot).first))
                throw InputError("fit_ensemble_weights: non-finite initial loss from gram '" + stack.names.at(m) + "'");
        }
        throw InputError("fit_ensemble_weights: non-finite initial loss");
    }
    FitReport report;
    report.loss_curve.push_back(loss);
    for (int it = 0; it < opt.iterations; ++it) {
        if (opt.step == 0.0) {
            report.loss_curve.push_back(loss);
            continue;
        }
        double step = opt.step;
        Vector candidate = w - step * grad;
        auto [next_loss, next_grad] = ensemble_loss_and_grad(stack, objective, candidate);
        if (opt.backtracking) {
            int halvings = 0;
            while (!(next_loss <= loss) && halvings < 50) {
                step *= 0.5;
                ++halvings;
                candidate = w - step * grad;
                std::tie(next_loss, next_grad) = ensemble_loss_and_grad(stack, objective, candidate);
            }
            if (!(next_loss <= loss)) {  // no descent direction left at machine precision
                report.loss_curve.push_back(loss);
                continue;
            }
        }
        if (!std::isfinite(next_loss)) throw NumericError("fit_ensemble_weights: loss became non-finite");
        w = candidate;
        loss = next_loss;
        grad = next_grad;
        report.loss_curve.push_back(loss);
    }
    report.logits = w;
    report.lambda = softmax(w);
    return report;
}

struct EgkConfig {
    int l_max = 4;
    int wl_depth = 3;
    std::size_t graphlet_cap = kDefaultGraphletNodeCap;
    bool log_transform = true;
};

/// Path / tree / graphlet kernel stack over a dataset (normalised Grams, zero logits).
inline KernelStack build_egk_stack(std::span<const Graph> graphs, const EgkConfig& cfg, std::size_t threads = 1) {
    if (graphs.empty()) throw InputError("build_egk_stack: no graphs");
    WlVocabulary vocab(cfg.wl_depth);
    vocab.fit(graphs);
    const std::size_t n = graphs.size();
    std::vector<CountingVector> path(n), tree(n), graphlet(n);
    parallel_for(n, threads, [&](std::size_t i) {
        path[i] = path_counting_vector(graphs[i], cfg.l_max);
        tree[i] = wl_subtree_vector(graphs[i], vocab);
        graphlet[i] = graphlet_counting_vector(graphs[i], cfg.graphlet_cap);
        if (cfg.log_transform) {
            path[i] = log1p_transform(std::move(path[i]));
            tree[i] = log1p_transform(std::move(tree[i]));
            graphlet[i] = log1p_transform(std::move(graphlet[i]));
        }
    });
    KernelStack stack;
    stack.names = {"path", "tree", "graphlet"};
    stack.grams = {normalize_gram(gram_from_vectors(path)), normalize_gram(gram_from_vectors(tree)),
                   normalize_gram(gram_from_vectors(graphlet))};
    stack.logits = Vector::Zero(3);
    std::vector<int> labels;
    for (const auto& g : graphs)
        if (g.label()) labels.push_back(*g.label());
    if (labels.size() == n) stack.labels = std::move(labels);
    return stack;
}

}  // namespace pxgl
