#pragma once

#include "ropo/mdp_core.hpp"

#include "test_support.hpp"

namespace testing_support {

/// Random strictly positive kernel with rewards in [0, 1].
inline ropo::RobustMdpSpec random_spec(std::mt19937_64& gen, ropo::Shape shape,
                                       ropo::UncertaintySet set) {
    ropo::RobustMdpSpec spec;
    spec.shape = shape;
    spec.nominal = ropo::Kernel(shape);
    spec.reward_mean = ropo::StepActionTable(shape.horizon, shape.states, shape.actions);
    spec.uncertainty = set;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t h = 0; h < shape.horizon; ++h)
        for (std::size_t s = 0; s < shape.states; ++s)
            for (std::size_t a = 0; a < shape.actions; ++a) {
                const auto p = random_distribution(gen, shape.states, 0.02);
                std::copy(p.begin(), p.end(), spec.nominal.row(h, s, a).begin());
                spec.reward_mean.at(h, s, a) = u(gen);
            }
    spec.validate();
    return spec;
}

inline ropo::StochasticPolicy random_policy(std::mt19937_64& gen, const ropo::Shape& shape) {
    ropo::StepActionTable table(shape.horizon, shape.states, shape.actions);
    for (std::size_t h = 0; h < shape.horizon; ++h)
        for (std::size_t s = 0; s < shape.states; ++s) {
            const auto p = random_distribution(gen, shape.actions, 0.0);
            std::copy(p.begin(), p.end(), table.row(h, s).begin());
        }
    return ropo::StochasticPolicy(std::move(table));
}

} // namespace testing_support
