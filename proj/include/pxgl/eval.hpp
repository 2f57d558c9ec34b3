#pragma once

// k-means, Hungarian-matched clustering accuracy, NMI, classification accuracy.

#include "pxgl/gnn.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <vector>

namespace pxgl {

struct ClusterResult {
    std::vector<int> assignments;
    Matrix centroids;  // c × d
    double inertia = 0.0;
    bool degenerate = false;              // fewer than c distinct points
    std::vector<double> inertia_history;  // per Lloyd iteration of the winning restart
};

namespace detail {

inline double sq_dist(const Matrix& p, Eigen::Index i, const Matrix& c, Eigen::Index k) {
    return (p.row(i) - c.row(k)).squaredNorm();
}

inline ClusterResult kmeans_once(const Matrix& points, int c, std::uint64_t seed, int max_iter, double tol) {
    const Eigen::Index n = points.rows();
    std::mt19937_64 rng(seed);
    ClusterResult r;
    r.centroids.resize(c, points.cols());
    // k-means++ seeding
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    r.centroids.row(0) = points.row(first(rng));
    Vector d2(n);
    for (Eigen::Index i = 0; i < n; ++i) d2(i) = sq_dist(points, i, r.centroids, 0);
    for (int k = 1; k < c; ++k) {
        const double total = d2.sum();
        Eigen::Index pick = 0;
        if (total > 0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng), acc = 0.0;
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2(i);
                if (acc >= target && d2(i) > 0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = first(rng);
        }
        r.centroids.row(k) = points.row(pick);
        for (Eigen::Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), sq_dist(points, i, r.centroids, k));
    }

    r.assignments.assign(static_cast<std::size_t>(n), 0);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        double inertia = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double bd = sq_dist(points, i, r.centroids, 0);
            for (int k = 1; k < c; ++k) {
                const double d = sq_dist(points, i, r.centroids, k);
                if (d < bd) {
                    bd = d;
                    best = k;
                }
            }
            r.assignments[static_cast<std::size_t>(i)] = best;
            inertia += bd;
        }
        r.inertia_history.push_back(inertia);
        r.inertia = inertia;
        Matrix sums = Matrix::Zero(c, points.cols());
        std::vector<int> counts(static_cast<std::size_t>(c), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(r.assignments[static_cast<std::size_t>(i)]) += points.row(i);
            ++counts[static_cast<std::size_t>(r.assignments[static_cast<std::size_t>(i)])];
        }
        for (int k = 0; k < c; ++k)
            if (counts[static_cast<std::size_t>(k)] > 0) r.centroids.row(k) = sums.row(k) / counts[static_cast<std::size_t>(k)];
        if (prev - inertia <= tol * std::max(1.0, inertia)) break;
        prev = inertia;
    }
    // inertia w.r.t. the final centroids
    r.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) r.inertia += sq_dist(points, i, r.centroids, r.assignments[static_cast<std::size_t>(i)]);
    return r;
}

inline std::size_t distinct_rows(const Matrix& p) {
    std::vector<std::vector<double>> uniq;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(p.cols()));
        for (Eigen::Index j = 0; j < p.cols(); ++j) r[static_cast<std::size_t>(j)] = p(i, j);
        uniq.push_back(std::move(r));
    }
    std::sort(uniq.begin(), uniq.end());
    return static_cast<std::size_t>(std::unique(uniq.begin(), uniq.end()) - uniq.begin());
}

}  // namespace detail

/// k-means++ seeding, Lloyd iterations (tol 1e-8, ≤ 300 iterations),
/// best of `restarts` by (inertia, restart index).
inline ClusterResult kmeans(const Matrix& points, int c, std::uint64_t seed, int restarts = 10,
                            std::size_t threads = 1, int max_iter = 300, double tol = 1e-8) {
    if (c < 1 || points.rows() < c) throw InputError("kmeans: need N >= c >= 1");
    if (restarts < 1) throw InputError("kmeans: restarts must be >= 1");
    std::vector<ClusterResult> runs(static_cast<std::size_t>(restarts));
    parallel_for(runs.size(), threads, [&](std::size_t r) {
        runs[r] = detail::kmeans_once(points, c, derive_seed(seed, "eval.kmeans", {r}), max_iter, tol);
    });
    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
        if (runs[r].inertia < runs[best].inertia) best = r;
    ClusterResult out = std::move(runs[best]);
    out.degenerate = detail::distinct_rows(points) < static_cast<std::size_t>(c);
    return out;
}

/// Maximum-weight perfect matching on a square matrix (Hungarian, O(n³)).
/// Returns assignment[row] = column.
inline std::vector<int> hungarian_max(const Matrix& weight) {
    const int n = static_cast<int>(weight.rows());
    if (weight.cols() != n) throw InputError("hungarian_max: matrix must be square");
    const double big = weight.size() ? weight.maxCoeff() : 0.0;
    // minimise cost = big - weight; 1-based potentials formulation
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = std::numeric_limits<double>::infinity();
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = (big - weight(i0 - 1, j - 1)) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> assignment(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) assignment[static_cast<std::size_t>(p[j] - 1)] = j - 1;
    return assignment;
}

namespace detail {

inline std::vector<int> compact(std::span<const int> x) {
    std::map<int, int> ids;
    for (int v : x) ids.emplace(v, 0);
    int k = 0;
    for (auto& [key, id] : ids) id = k++;
    std::vector<int> out;
    out.reserve(x.size());
    for (int v : x) out.push_back(ids[v]);
    return out;
}

}  // namespace detail

/// Fraction matched under the best one-to-one cluster→class assignment.
inline double clustering_accuracy(std::span<const int> pred, std::span<const int> truth) {
    if (pred.size() != truth.size()) throw InputError("clustering_accuracy: length mismatch");
    if (pred.empty()) return 0.0;
    const auto p = detail::compact(pred), t = detail::compact(truth);
    const int kp = *std::max_element(p.begin(), p.end()) + 1, kt = *std::max_element(t.begin(), t.end()) + 1;
    const int k = std::max(kp, kt);
    Matrix contingency = Matrix::Zero(k, k);
    for (std::size_t i = 0; i < p.size(); ++i) contingency(p[i], t[i]) += 1.0;
    const auto match = hungarian_max(contingency);
    double hit = 0.0;
    for (int r = 0; r < k; ++r) hit += contingency(r, match[static_cast<std::size_t>(r)]);
    return hit / static_cast<double>(pred.size());
}

/// I(pred; truth) / sqrt(H(pred) H(truth)), natural logs.
inline double nmi(std::span<const int> pred, std::span<const int> truth) {
    if (pred.size() != truth.size()) throw InputError("nmi: length mismatch");
    if (pred.empty()) throw InputError("nmi: empty input");
    const auto p = detail::compact(pred), t = detail::compact(truth);
    const int kp = *std::max_element(p.begin(), p.end()) + 1, kt = *std::max_element(t.begin(), t.end()) + 1;
    const double n = static_cast<double>(p.size());
    Matrix joint = Matrix::Zero(kp, kt);
    for (std::size_t i = 0; i < p.size(); ++i) joint(p[i], t[i]) += 1.0;
    const Vector pp = joint.rowwise().sum() / n, pt = joint.colwise().sum().transpose() / n;
    auto entropy = [](const Vector& q) {
        double h = 0.0;
        for (Eigen::Index i = 0; i < q.size(); ++i)
            if (q(i) > 0) h -= q(i) * std::log(q(i));
        return h;
    };
    const double hp = entropy(pp), ht = entropy(pt);
    if (hp == 0.0 || ht == 0.0) return (hp == 0.0 && ht == 0.0) ? 1.0 : 0.0;
    double mi = 0.0;
    for (int a = 0; a < kp; ++a)
        for (int b = 0; b < kt; ++b) {
            const double pab = joint(a, b) / n;
            if (pab > 0) mi += pab * std::log(pab / (pp(a) * pt(b)));
        }
    return std::clamp(mi / std::sqrt(hp * ht), 0.0, 1.0);
}

/// Fraction of indices whose arg-max prediction equals the label.
inline double classification_accuracy(std::span<const int> predicted, std::span<const int> labels) {
    if (predicted.size() != labels.size()) throw InputError("classification_accuracy: length mismatch");
    if (predicted.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hit += predicted[i] == labels[i];
    return static_cast<double>(hit) / static_cast<double>(predicted.size());
}

inline double classification_accuracy(const EnsembleModel& model, std::span<const GraphSamples> samples,
                                      std::span<const int> labels, std::span<const std::size_t> indices) {
    std::vector<int> pred, truth;
    for (auto i : indices) {
        if (i >= samples.size() || i >= labels.size()) throw InputError("classification_accuracy: index out of range");
        pred.push_back(predict(model, samples[i]));
        truth.push_back(labels[i]);
    }
    return classification_accuracy(pred, truth);
}

}  // namespace pxgl
