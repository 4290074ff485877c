#include "ropo/environments.hpp"
#include "ropo/planner.hpp"

#include "spec_fixtures.hpp"

#include <doctest.h>

using namespace ropo;
using namespace testing_support;

namespace {

// Best robust value over all deterministic Markov policies, by enumeration.
double enumerate_best(const RobustMdpSpec& spec) {
    const Shape& shape = spec.shape;
    const std::size_t cells = shape.horizon * shape.states;
    std::size_t total = 1;
    for (std::size_t i = 0; i < cells; ++i) total *= shape.actions;
    double best = -1e300;
    std::vector<std::size_t> actions(cells);
    for (std::size_t code = 0; code < total; ++code) {
        std::size_t c = code;
        for (auto& a : actions) {
            a = c % shape.actions;
            c /= shape.actions;
        }
        best = std::max(best, robust_value(spec, StochasticPolicy::deterministic(shape, actions)));
    }
    return best;
}

} // namespace

TEST_CASE("robust value iteration matches enumeration of deterministic policies") {
    std::mt19937_64 gen(53);
    const Shape shape{2, 2, 3};
    for (auto set : {UncertaintySet{UncertaintyKind::l1_sa, 0.0}, UncertaintySet{UncertaintyKind::l1_sa, 0.4},
                     UncertaintySet{UncertaintyKind::l1_sa, 1.5}, UncertaintySet{UncertaintyKind::kl, 0.2}}) {
        for (int i = 0; i < 4; ++i) {
            const RobustMdpSpec spec = random_spec(gen, shape, set);
            const PlanResult plan = robust_value_iteration(spec);
            CHECK(plan.values.value(0, 0) == doctest::Approx(enumerate_best(spec)).epsilon(1e-10));
            CHECK(robust_value(spec, plan.policy) == doctest::Approx(plan.values.value(0, 0)).epsilon(1e-12));
        }
    }
}

TEST_CASE("V* dominates random stochastic policies") {
    std::mt19937_64 gen(59);
    const Shape shape{4, 3, 5};
    for (auto set : {UncertaintySet{UncertaintyKind::l1_sa, 0.3}, UncertaintySet{UncertaintyKind::kl, 0.5}}) {
        const RobustMdpSpec spec = random_spec(gen, shape, set);
        const double v_star = robust_value_iteration(spec).values.value(0, 0);
        for (int i = 0; i < 30; ++i) CHECK(robust_value(spec, random_policy(gen, shape)) <= v_star + 1e-12);
    }
}

TEST_CASE("robust evaluation uses the exact inner solution") {
    std::mt19937_64 gen(61);
    const Shape shape{3, 2, 2};
    const RobustMdpSpec spec = random_spec(gen, shape, {UncertaintyKind::l1_sa, 0.6});
    const auto policy = random_policy(gen, shape);
    const auto table = robust_evaluate(spec, policy);
    for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t a = 0; a < 2; ++a) {
            const auto p = spec.nominal.row(0, s, a);
            const std::vector<double> row(p.begin(), p.end());
            std::vector<double> last(3);
            for (std::size_t t = 0; t < 3; ++t) last[t] = table.value(1, t);
            const double expected = spec.reward_mean.at(0, s, a) + sigma_l1_sa_oracle({row, last, 0.6});
            CHECK(table.q.at(0, s, a) == doctest::Approx(expected).epsilon(1e-12));
            CHECK(exact_sigma(spec, 0, s, a, last) == doctest::Approx(expected - spec.reward_mean.at(0, s, a)));
        }
}

TEST_CASE("hard MDP: robust optimum switches at rho = 2 epsilon - 1") {
    HardMdpConfig config;
    config.epsilon = 0.75;
    config.radius = 1.0;
    const HardMdp hard = build_hard_mdp(config);
    const Shape& shape = hard.spec.shape;
    std::vector<std::size_t> take_a0(shape.horizon * shape.states, 0), take_a1(shape.horizon * shape.states, 1);
    // a0 reaches s1 with 0.75 - 0.5 = 0.25 in the worst case: 0.25 - 0.75 = -0.5
    CHECK(robust_value(hard.spec, StochasticPolicy::deterministic(shape, take_a0)) == doctest::Approx(-0.5));
    CHECK(robust_value(hard.spec, StochasticPolicy::deterministic(shape, take_a1)) == doctest::Approx(0.0));
    CHECK(robust_value(hard.spec, StochasticPolicy::uniform(shape)) == doctest::Approx(-0.25));
    CHECK(policy_value_under_kernel(hard.spec, StochasticPolicy::deterministic(shape, take_a0), hard.worst_case) ==
          doctest::Approx(-0.5));
    CHECK(regret_reference_value(hard.spec) == doctest::Approx(0.0));

    for (double rho : {0.1, 0.3, 0.45, 0.55, 0.8}) {
        config.radius = rho;
        const HardMdp h = build_hard_mdp(config);
        const PlanResult plan = robust_value_iteration(h.spec);
        const double a0 = 2.0 * config.epsilon - 1.0 - rho;
        CHECK(plan.values.value(0, 0) == doctest::Approx(std::max(a0, 0.0)).epsilon(1e-12));
        CHECK(plan.policy.prob(0, 0, 0) == (rho < 0.5 ? 1.0 : 0.0));
    }
}

TEST_CASE("s-rectangular L1 planning goes through the surrogate") {
    std::mt19937_64 gen(67);
    const Shape shape{3, 3, 3};
    const RobustMdpSpec spec = random_spec(gen, shape, {UncertaintyKind::l1_s, 0.3});
    CHECK_THROWS_AS(robust_value_iteration(spec), UnsupportedError);
    const RobustMdpSpec surrogate = decoupled_s_rect_surrogate(spec);
    CHECK(surrogate.uncertainty.kind == UncertaintyKind::l1_sa);
    CHECK(surrogate.uncertainty.radius == doctest::Approx(0.9));
    CHECK(decoupled_s_rect_surrogate(random_spec(gen, shape, {UncertaintyKind::l1_s, 0.8})).uncertainty.radius ==
          2.0);
    CHECK(regret_reference_value(spec) ==
          doctest::Approx(robust_value_iteration(surrogate).values.value(0, 0)).epsilon(1e-14));
}

TEST_CASE("regret curve holds snapshot values between snapshots") {
    HardMdpConfig config;
    config.epsilon = 0.75;
    config.radius = 1.0;
    const HardMdp hard = build_hard_mdp(config);
    const Shape& shape = hard.spec.shape;
    std::vector<std::size_t> take_a0(shape.horizon * shape.states, 0), take_a1(shape.horizon * shape.states, 1);
    const std::vector<PolicySnapshot> snapshots{{1, StochasticPolicy::deterministic(shape, take_a0)},
                                                {3, StochasticPolicy::uniform(shape)},
                                                {4, StochasticPolicy::deterministic(shape, take_a1)}};
    const RegretLedger ledger = regret_curve(hard.spec, snapshots, 5);
    CHECK(ledger.v_star == doctest::Approx(0.0));
    const std::vector<double> instant{0.5, 0.5, 0.25, 0.0, 0.0};
    double cumulative = 0.0;
    for (std::size_t k = 0; k < 5; ++k) {
        cumulative += instant[k];
        CHECK(ledger.instant[k] == doctest::Approx(instant[k]));
        CHECK(ledger.cumulative[k] == doctest::Approx(cumulative));
    }
    CHECK(ledger.held_snapshots);
    CHECK_FALSE(ledger.s_rect_decoupled);

    const std::vector<PolicySnapshot> late{{2, StochasticPolicy::uniform(shape)}};
    CHECK_THROWS_AS(regret_curve(hard.spec, late, 3), ConfigError);
}
