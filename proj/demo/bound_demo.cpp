// Perturbs a random graph with growing feature noise and edge flips and
// prints the measured representation change next to the robustness bound.

#include "pxgl/bounds.hpp"

#include <cstdio>

int main() {
    using namespace pxgl;
    std::mt19937_64 rng(7);
    const std::size_t n = 10;
    std::bernoulli_distribution coin(0.35);
    std::vector<Edge> edges;
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = u + 1; v < n; ++v)
            if (coin(rng)) edges.emplace_back(u, v);
    Matrix x(n, 4);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& v : x.reshaped()) v = unit(rng);
    const Graph g(n, edges, x);

    ModelConfig mc;
    mc.input_dim = 4;
    mc.hidden_dim = mc.out_dim = 16;
    const EnsembleModel model = make_model(mc, 1);

    std::printf("%5s %6s %12s %12s %8s\n", "flips", "noise", "measured", "bound", "ratio");
    for (std::size_t flips : {0, 1, 2, 4})
        for (double noise : {0.0, 0.01, 0.1}) {
            const auto t = dominance_trial(model, g, {flips, noise}, 3, DominanceMode::WholeGraph);
            std::printf("%5zu %6.2f %12.4e %12.4e %8.4f\n", flips, noise, t.measured, t.bound,
                        t.bound > 0 ? t.measured / t.bound : 0.0);
        }
}
