#include "dspi/garnet.hpp"

#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace dspi {

namespace {

// first `count` entries of a seeded partial Fisher-Yates shuffle of 0..n-1
std::vector<int> sample_without_replacement(int n, int count, std::mt19937_64& engine) {
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(pool[i], pool[pick(engine)]);
    }
    pool.resize(count);
    return pool;
}

std::vector<double> normalized_uniform(int count, std::mt19937_64& engine) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<double> weights(count);
    double total = 0.0;
    for (double& w : weights) {
        w = uniform(engine);
        total += w;
    }
    for (double& w : weights) w /= total;
    return weights;
}

}  // namespace

TabularMdp generate_garnet(const GarnetSpec& spec) {
    if (spec.branching < 1 || spec.branching > spec.n)
        throw std::invalid_argument("garnet: branching must lie in [1, n]");
    if (spec.n < 1 || spec.m < 1) throw std::invalid_argument("garnet: n and m must be positive");
    if (!(spec.gamma > 0.0 && spec.gamma < 1.0))
        throw std::invalid_argument("garnet: gamma must lie strictly inside (0,1)");

    std::mt19937_64 engine(spec.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    TabularMdp mdp;
    mdp.n = spec.n;
    mdp.m = spec.m;
    mdp.gamma = spec.gamma;
    mdp.reward.resize(spec.n, spec.m);
    mdp.transition.assign(static_cast<std::size_t>(spec.n) * spec.m * spec.n, 0.0);
    for (int s = 0; s < spec.n; ++s) {
        for (int a = 0; a < spec.m; ++a) {
            mdp.reward(s, a) = uniform(engine);
            std::vector<int> successors = sample_without_replacement(spec.n, spec.branching, engine);
            std::vector<double> weights = normalized_uniform(spec.branching, engine);
            for (int i = 0; i < spec.branching; ++i) mdp.p(s, a, successors[i]) = weights[i];
        }
    }
    validate(mdp);
    return mdp;
}

SspMdp generate_garnet_ssp(const GarnetSspSpec& spec) {
    if (spec.branching < 1 || spec.branching > spec.n)
        throw std::invalid_argument("garnet ssp: branching must lie in [1, n]");
    if (spec.n < 1 || spec.m < 1)
        throw std::invalid_argument("garnet ssp: n and m must be positive");
    if (!(spec.termination_prob > 0.0 && spec.termination_prob <= 1.0))
        throw std::invalid_argument("garnet ssp: termination_prob must lie in (0,1]");

    std::mt19937_64 engine(spec.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    SspMdp ssp;
    ssp.n = spec.n;
    ssp.m = spec.m;
    ssp.reward.resize(spec.n, spec.m);
    ssp.transition.assign(static_cast<std::size_t>(spec.n) * spec.m * (spec.n + 1), 0.0);
    for (int s = 0; s < spec.n; ++s) {
        for (int a = 0; a < spec.m; ++a) {
            ssp.reward(s, a) = -uniform(engine);
            ssp.p(s, a, spec.n) = spec.termination_prob;
            if (spec.termination_prob < 1.0) {
                std::vector<int> successors =
                    sample_without_replacement(spec.n, spec.branching, engine);
                std::vector<double> weights = normalized_uniform(spec.branching, engine);
                const double mass = 1.0 - spec.termination_prob;
                for (int i = 0; i < spec.branching; ++i)
                    ssp.p(s, a, successors[i]) = mass * weights[i];
            }
        }
    }
    validate(ssp);
    ssp.cert = compute_weighted_norm(ssp);
    return ssp;
}

SspMdp generate_layered_ssp(const LayeredSspSpec& spec) {
    if (spec.layers < 1 || spec.width < 1 || spec.m < 1)
        throw std::invalid_argument("layered ssp: layers, width, and m must be positive");
    if (spec.branching < 1 || spec.branching > spec.width)
        throw std::invalid_argument("layered ssp: branching must lie in [1, width]");

    std::mt19937_64 engine(spec.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    SspMdp ssp;
    ssp.n = spec.layers * spec.width;
    ssp.m = spec.m;
    ssp.reward.resize(ssp.n, ssp.m);
    ssp.transition.assign(static_cast<std::size_t>(ssp.n) * ssp.m * (ssp.n + 1), 0.0);
    for (int layer = 0; layer < spec.layers; ++layer) {
        for (int j = 0; j < spec.width; ++j) {
            const int s = layer * spec.width + j;
            for (int a = 0; a < spec.m; ++a) {
                ssp.reward(s, a) = -uniform(engine);
                if (layer + 1 == spec.layers) {
                    ssp.p(s, a, ssp.n) = 1.0;
                    continue;
                }
                std::vector<int> slots =
                    sample_without_replacement(spec.width, spec.branching, engine);
                std::vector<double> weights = normalized_uniform(spec.branching, engine);
                for (int i = 0; i < spec.branching; ++i)
                    ssp.p(s, a, (layer + 1) * spec.width + slots[i]) = weights[i];
            }
        }
    }
    validate(ssp);
    ssp.cert = compute_weighted_norm(ssp);
    return ssp;
}

}  // namespace dspi
