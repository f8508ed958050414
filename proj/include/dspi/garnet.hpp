#pragma once

#include "dspi/mdp.hpp"
#include "dspi/ssp.hpp"

#include <cstdint>

namespace dspi {

/**
 * Seeded random discounted MDP: every (s,a) reaches `branching` successors
 * chosen without replacement, with probabilities drawn as normalized uniform
 * variates; rewards are uniform on [0,1]. Deterministic function of the seed.
 */
struct GarnetSpec {
    int n = 5;
    int m = 3;
    int branching = 2;
    double gamma = 0.9;
    std::uint64_t seed = 0;
};

TabularMdp generate_garnet(const GarnetSpec& spec);

/**
 * Terminal-state variant: every (s,a) places `termination_prob` mass on the
 * terminal state and distributes the rest over `branching` non-terminal
 * successors, so every stationary policy is proper by construction. Rewards
 * are uniform on [-1,0].
 */
struct GarnetSspSpec {
    int n = 5;
    int m = 3;
    int branching = 2;
    double termination_prob = 0.1;
    std::uint64_t seed = 0;
};

SspMdp generate_garnet_ssp(const GarnetSspSpec& spec);

/**
 * Layered terminal-state instance: `layers` layers of `width` states, all
 * transition mass flowing from each layer to the next and from the last
 * layer to the terminal state. Termination within `layers` steps under any
 * policy. Rewards uniform on [-1,0].
 */
struct LayeredSspSpec {
    int layers = 3;
    int width = 3;
    int m = 2;
    int branching = 2;  // successors per (s,a) in the next layer
    std::uint64_t seed = 0;
};

SspMdp generate_layered_ssp(const LayeredSspSpec& spec);

}  // namespace dspi
