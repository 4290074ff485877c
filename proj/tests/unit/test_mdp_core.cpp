#include "ropo/mdp_core.hpp"

#include "spec_fixtures.hpp"

#include <doctest.h>

using namespace ropo;

namespace {

// Two states, two actions, two steps; same kernel and rewards at both steps.
RobustMdpSpec hand_spec() {
    const Shape shape{2, 2, 2};
    RobustMdpSpec spec;
    spec.shape = shape;
    spec.nominal = Kernel(shape);
    spec.reward_mean = StepActionTable(2, 2, 2);
    spec.reward_noise = RewardNoise::deterministic;
    const double rows[4][2] = {{0.8, 0.2}, {0.3, 0.7}, {0.5, 0.5}, {0.1, 0.9}};
    const double rewards[4] = {0.2, 0.6, 1.0, 0.0};
    for (std::size_t h = 0; h < 2; ++h)
        for (std::size_t s = 0; s < 2; ++s)
            for (std::size_t a = 0; a < 2; ++a) {
                auto row = spec.nominal.row(h, s, a);
                row[0] = rows[s * 2 + a][0];
                row[1] = rows[s * 2 + a][1];
                spec.reward_mean.at(h, s, a) = rewards[s * 2 + a];
            }
    spec.validate();
    return spec;
}

} // namespace

TEST_CASE("hand backward pass under the uniform policy") {
    const RobustMdpSpec spec = hand_spec();
    const auto table = evaluate_under_kernel(spec, StochasticPolicy::uniform(spec.shape), spec.nominal);
    // last step: V(0) = (0.2 + 0.6)/2, V(1) = (1 + 0)/2
    CHECK(table.value(1, 0) == doctest::Approx(0.4));
    CHECK(table.value(1, 1) == doctest::Approx(0.5));
    // first step: Q(0,.) = 0.62, 1.07 and Q(1,.) = 1.45, 0.49
    CHECK(table.q.at(0, 0, 0) == doctest::Approx(0.62));
    CHECK(table.q.at(0, 0, 1) == doctest::Approx(1.07));
    CHECK(table.q.at(0, 1, 0) == doctest::Approx(1.45));
    CHECK(table.q.at(0, 1, 1) == doctest::Approx(0.49));
    CHECK(table.value(0, 0) == doctest::Approx(0.845));
    CHECK(table.value(0, 1) == doctest::Approx(0.97));
    CHECK(table.value(2, 0) == 0.0);
    CHECK(policy_value_under_kernel(spec, StochasticPolicy::uniform(spec.shape), spec.nominal) ==
          doctest::Approx(0.845));
}

TEST_CASE("kernel validation") {
    Kernel k(Shape{2, 1, 1});
    CHECK_THROWS_AS(k.validate(false), ConfigError);
    k.row(0, 0, 0)[0] = 1.0;
    k.row(0, 1, 0)[1] = 1.0;
    CHECK_NOTHROW(k.validate(false));
    CHECK_THROWS_AS(k.validate(true), ConfigError);
    CHECK(k.min_entry() == 0.0);
}

TEST_CASE("uncertainty set validation and names") {
    CHECK_THROWS_AS((UncertaintySet{UncertaintyKind::l1_sa, -0.1}.validate()), DomainError);
    CHECK_THROWS_AS((UncertaintySet{UncertaintyKind::l1_s, 2.5}.validate()), DomainError);
    CHECK_NOTHROW((UncertaintySet{UncertaintyKind::kl, 5.0}.validate()));
    for (auto kind : {UncertaintyKind::l1_sa, UncertaintyKind::l1_s, UncertaintyKind::kl})
        CHECK(uncertainty_kind_from_string(to_string(kind)) == kind);
    CHECK_THROWS_AS(uncertainty_kind_from_string("wasserstein"), ConfigError);
}

TEST_CASE("spec validation") {
    RobustMdpSpec spec = hand_spec();
    spec.uncertainty = {UncertaintyKind::l1_sa, 0.1};
    CHECK_NOTHROW(spec.validate());

    RobustMdpSpec zero = spec;
    zero.nominal.row(0, 0, 0)[0] = 1.0;
    zero.nominal.row(0, 0, 0)[1] = 0.0;
    CHECK_THROWS_AS(zero.validate(), ConfigError); // robust sets need P > 0
    zero.allow_zero_transitions = true;
    CHECK_NOTHROW(zero.validate());

    RobustMdpSpec signed_reward = spec;
    signed_reward.reward_mean.at(0, 0, 0) = -0.5;
    CHECK_THROWS_AS(signed_reward.validate(), ConfigError);
    signed_reward.allow_signed_rewards = true;
    CHECK_NOTHROW(signed_reward.validate());
    signed_reward.reward_noise = RewardNoise::bernoulli;
    CHECK_THROWS_AS(signed_reward.validate(), ConfigError);

    RobustMdpSpec mask = spec;
    mask.robust_cells.assign(3, 1);
    CHECK_THROWS_AS(mask.validate(), ConfigError);
    mask.robust_cells.assign(8, 0);
    mask.robust_cells[1] = 1;
    CHECK(mask.is_robust_cell(0, 0, 1));
    CHECK_FALSE(mask.is_robust_cell(0, 0, 0));

    RobustMdpSpec start = spec;
    start.initial_state = 2;
    CHECK_THROWS_AS(start.validate(), ConfigError);
}

TEST_CASE("policies") {
    const Shape shape{3, 2, 2};
    const auto u = StochasticPolicy::uniform(shape);
    CHECK(u.prob(1, 2, 1) == 0.5);
    const std::vector<std::size_t> actions{0, 1, 1, 0, 0, 1};
    const auto d = StochasticPolicy::deterministic(shape, actions);
    CHECK(d.prob(0, 1, 1) == 1.0);
    CHECK(d.prob(1, 0, 0) == 1.0);
    CHECK_THROWS_AS(StochasticPolicy::deterministic(shape, std::vector<std::size_t>{0, 1}), ConfigError);
    CHECK_THROWS_AS(StochasticPolicy::deterministic(shape, std::vector<std::size_t>(6, 2)), ConfigError);
    StepActionTable bad(2, 3, 2, 0.4);
    CHECK_THROWS_AS(StochasticPolicy{bad}, ConfigError);
    CHECK_THROWS_AS(u.check_shape(Shape{3, 3, 2}), ConfigError);
}

TEST_CASE("sampled returns average to the exact value") {
    std::mt19937_64 gen(1);
    const Shape shape{4, 3, 5};
    const RobustMdpSpec spec = testing_support::random_spec(gen, shape, {});
    const auto policy = testing_support::random_policy(gen, shape);
    const double exact = policy_value_under_kernel(spec, policy, spec.nominal);
    double sum = 0.0;
    const int n = 20000;
    for (int k = 0; k < n; ++k) {
        Rng rng = Rng::derive(5, static_cast<std::uint64_t>(k), StreamPurpose::testing);
        const Trajectory t = sample_episode(spec, policy, spec.nominal, rng);
        REQUIRE(t.steps.size() == shape.horizon);
        CHECK(t.steps.front().state == spec.initial_state);
        for (std::size_t h = 1; h < t.steps.size(); ++h) CHECK(t.steps[h].state == t.steps[h - 1].next_state);
        sum += t.total_reward();
    }
    // Bernoulli rewards over 5 steps: per-episode variance <= 5/4
    CHECK(std::abs(sum / n - exact) < 4.0 * std::sqrt(1.25 / n));

    Rng a = Rng::derive(3, 1, StreamPurpose::testing);
    Rng b = Rng::derive(3, 1, StreamPurpose::testing);
    const auto ta = sample_episode(spec, policy, spec.nominal, a);
    const auto tb = sample_episode(spec, policy, spec.nominal, b);
    for (std::size_t h = 0; h < shape.horizon; ++h) {
        CHECK(ta.steps[h].action == tb.steps[h].action);
        CHECK(ta.steps[h].next_state == tb.steps[h].next_state);
        CHECK(ta.steps[h].reward == tb.steps[h].reward);
    }
}
