#include "ropo/ropo_learner.hpp"

#include "spec_fixtures.hpp"

#include <doctest.h>

#include <cmath>

using namespace ropo;
using namespace testing_support;

namespace {

// Learner state with a model filled by `n` uniform-policy episodes on `spec`.
LearnerState trained_state(const RobustMdpSpec& spec, int n, std::uint64_t seed) {
    LearnerState state = LearnerState::initial(spec.shape, 0.1);
    for (int k = 0; k < n; ++k) {
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(k), StreamPurpose::testing);
        state.model.update(sample_episode(spec, state.policy, spec.nominal, rng));
    }
    return state;
}

} // namespace

TEST_CASE("default learning rate") {
    CHECK(default_learning_rate(4, 20, 3000) ==
          doctest::Approx(std::sqrt(2.0 * std::log(4.0) / (400.0 * 3000.0))).epsilon(1e-14));
    CHECK_THROWS_AS(default_learning_rate(1, 20, 10), DomainError);
    CHECK_THROWS_AS(default_learning_rate(2, 20, 0), DomainError);
}

TEST_CASE("exponential weights step from uniform") {
    StochasticPolicy uniform = StochasticPolicy::uniform(Shape{1, 2, 1});
    StepActionTable q(1, 1, 2);
    q.at(0, 0, 0) = 3.0;
    q.at(0, 0, 1) = 1.0;
    // beta * (Q0 - Q1) = 2: softmax(2, 0) = (0.880797, 0.119203)
    const auto up = omd_improve(uniform, q, 1.0, MirrorSign::ascent);
    CHECK(up.prob(0, 0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-14));
    CHECK(up.prob(0, 0, 1) == doctest::Approx(1.0 / (1.0 + std::exp(2.0))).epsilon(1e-14));
    const auto down = omd_improve(uniform, q, 1.0, MirrorSign::descent);
    CHECK(down.prob(0, 0, 1) == doctest::Approx(up.prob(0, 0, 0)).epsilon(1e-14));

    // huge steps stay finite, zero-probability actions stay at zero
    StepActionTable t(1, 1, 3);
    t.at(0, 0, 0) = 0.5;
    t.at(0, 0, 2) = 0.5;
    StepActionTable big(1, 1, 3);
    big.at(0, 0, 1) = 1e6;
    big.at(0, 0, 2) = 2e3;
    const auto stable = omd_improve(StochasticPolicy(t), big, 1.0);
    CHECK(stable.prob(0, 0, 1) == 0.0);
    CHECK(stable.prob(0, 0, 2) == doctest::Approx(1.0));
    CHECK_THROWS_AS(omd_improve(uniform, q, -1.0), DomainError);
}

TEST_CASE("evaluation without bonus matches a direct robust backward pass") {
    std::mt19937_64 gen(29);
    const Shape shape{4, 3, 5};
    const RobustMdpSpec spec = random_spec(gen, shape, {});
    LearnerState state = trained_state(spec, 300, 4);
    state.policy = random_policy(gen, shape);

    for (double rho : {0.0, 0.3, 1.2}) {
        EvaluationOptions options;
        options.bonus_override = 0.0;
        const auto table = robust_policy_evaluation(state, {UncertaintyKind::l1_sa, rho}, BonusParams{}, options);

        std::vector<double> next(shape.states, 0.0);
        for (std::size_t h = shape.horizon; h-- > 0;) {
            std::vector<double> current(shape.states, 0.0);
            for (std::size_t s = 0; s < shape.states; ++s)
                for (std::size_t a = 0; a < shape.actions; ++a) {
                    const auto p = state.model.transition_estimate(h, s, a);
                    // the oracle needs P > 0; keep only the observed support
                    std::vector<double> ps, vs;
                    for (std::size_t t = 0; t < p.size(); ++t)
                        if (p[t] > 0.0) {
                            ps.push_back(p[t]);
                            vs.push_back(next[t]);
                        }
                    const double sigma = rho == 0.0 || ps.size() == 1 ? dot(ps, vs)
                                                                      : sigma_l1_sa_oracle({ps, vs, rho});
                    const double q = std::clamp(state.model.reward_estimate(h, s, a) + sigma, 0.0,
                                                static_cast<double>(shape.horizon));
                    CHECK(table.q.at(h, s, a) == doctest::Approx(q).epsilon(1e-12));
                    current[s] += state.policy.prob(h, s, a) * q;
                }
            next = current;
        }
        CHECK(table.value(0, 0) == doctest::Approx(next[0]).epsilon(1e-12));
    }
}

TEST_CASE("optimistic values are clipped to [0, H]") {
    std::mt19937_64 gen(31);
    const Shape shape{3, 2, 4};
    const RobustMdpSpec spec = random_spec(gen, shape, {});
    const LearnerState state = trained_state(spec, 5, 1);

    EvaluationOptions options;
    options.bonus_override = 100.0;
    auto table = robust_policy_evaluation(state, {UncertaintyKind::kl, 0.2}, BonusParams{}, options);
    for (std::size_t h = 0; h < shape.horizon; ++h)
        for (std::size_t s = 0; s < shape.states; ++s)
            for (double q : table.q.row(h, s)) CHECK(q == 4.0);

    // theoretical bonuses at small counts saturate as well
    BonusParams params;
    params.episodes = 1000;
    params.kl_min_prob = 0.1;
    table = robust_policy_evaluation(state, {UncertaintyKind::l1_s, 0.2}, params);
    for (double q : table.q.values()) {
        CHECK(q >= 0.0);
        CHECK(q <= 4.0);
    }

    options.bonus_override = -100.0;
    table = robust_policy_evaluation(state, {UncertaintyKind::l1_sa, 0.2}, BonusParams{}, options);
    for (double q : table.q.values()) CHECK(q == 0.0);
}

TEST_CASE("radius zero reduces to optimistic evaluation on the empirical model") {
    std::mt19937_64 gen(37);
    const Shape shape{3, 3, 4};
    RobustMdpSpec spec = random_spec(gen, shape, {});
    const LearnerState state = trained_state(spec, 200, 9);
    EvaluationOptions options;
    options.bonus_override = 0.0;
    const auto robust = robust_policy_evaluation(state, {UncertaintyKind::l1_sa, 0.0}, BonusParams{}, options);

    RobustMdpSpec empirical = spec;
    empirical.nominal = state.model.empirical_kernel();
    empirical.allow_zero_transitions = true;
    for (std::size_t h = 0; h < shape.horizon; ++h)
        for (std::size_t s = 0; s < shape.states; ++s)
            for (std::size_t a = 0; a < shape.actions; ++a)
                empirical.reward_mean.at(h, s, a) = state.model.reward_estimate(h, s, a);
    const auto plain = evaluate_under_kernel(empirical, state.policy, empirical.nominal);
    for (std::size_t s = 0; s < shape.states; ++s)
        CHECK(robust.value(0, s) == doctest::Approx(plain.value(0, s)).epsilon(1e-12));

    // with the regular bonus the radius-zero path uses the (s,a)-rectangular L1 bonus
    BonusParams params;
    params.episodes = 50;
    params.scale = 1e-3;
    const auto a = robust_policy_evaluation(state, {UncertaintyKind::kl, 0.0}, params);
    const auto b = robust_policy_evaluation(state, {UncertaintyKind::l1_sa, 0.0}, params);
    CHECK(a.v == b.v);
}

TEST_CASE("robust cell mask restricts the adversary") {
    std::mt19937_64 gen(41);
    const Shape shape{3, 2, 3};
    const RobustMdpSpec spec = random_spec(gen, shape, {});
    const LearnerState state = trained_state(spec, 100, 2);
    std::vector<unsigned char> none(shape.horizon * shape.states * shape.actions, 0);
    EvaluationOptions masked;
    masked.bonus_override = 0.0;
    masked.robust_cells = none;
    EvaluationOptions plain;
    plain.bonus_override = 0.0;
    const auto off = robust_policy_evaluation(state, {UncertaintyKind::l1_sa, 0.8}, BonusParams{}, masked);
    const auto nominal = robust_policy_evaluation(state, {UncertaintyKind::l1_sa, 0.0}, BonusParams{}, plain);
    const auto robust = robust_policy_evaluation(state, {UncertaintyKind::l1_sa, 0.8}, BonusParams{}, plain);
    CHECK(off.v == nominal.v);
    CHECK(robust.value(0, 0) < nominal.value(0, 0));

    std::vector<unsigned char> wrong(3, 1);
    masked.robust_cells = wrong;
    CHECK_THROWS_AS(robust_policy_evaluation(state, {UncertaintyKind::l1_sa, 0.8}, BonusParams{}, masked),
                    ConfigError);
}

TEST_CASE("run_ropo is deterministic and keeps snapshots on cadence") {
    std::mt19937_64 gen(43);
    const Shape shape{4, 3, 6};
    const RobustMdpSpec spec = random_spec(gen, shape, {UncertaintyKind::l1_sa, 0.2});
    RopoConfig config;
    config.uncertainty = spec.uncertainty;
    config.bonus.scale = 0.01;
    config.snapshot_every = 7;

    std::size_t calls = 0;
    const auto a = run_ropo(spec, 30, config, 5, [&](const EpisodeRecord& r, const StochasticPolicy&) {
        CHECK(r.episode == ++calls);
    });
    const auto b = run_ropo(spec, 30, config, 5);
    CHECK(calls == 30);
    REQUIRE(a.records.size() == 30);
    for (std::size_t k = 0; k < 30; ++k) {
        CHECK(a.records[k].v_hat == b.records[k].v_hat);
        CHECK(a.records[k].training_return == b.records[k].training_return);
    }
    CHECK(a.final_policy.table() == b.final_policy.table());

    std::vector<std::size_t> episodes;
    for (const auto& snap : a.snapshots) episodes.push_back(snap.episode);
    CHECK(episodes == std::vector<std::size_t>{1, 8, 15, 22, 29, 30});
    CHECK(a.snapshots.front().policy.table() == StochasticPolicy::uniform(shape).table());

    const auto c = run_ropo(spec, 30, config, 6);
    CHECK(c.final_policy.table() != a.final_policy.table());
    CHECK_THROWS_AS(run_ropo(spec, 0, config, 5), ConfigError);
}

TEST_CASE("learning moves probability towards the better action") {
    // One state, two actions, rewards 1 and 0: the policy must favour action 0.
    const Shape shape{1, 2, 3};
    RobustMdpSpec spec;
    spec.shape = shape;
    spec.nominal = Kernel(shape);
    spec.reward_mean = StepActionTable(3, 1, 2);
    spec.reward_noise = RewardNoise::deterministic;
    for (std::size_t h = 0; h < 3; ++h) {
        spec.nominal.row(h, 0, 0)[0] = 1.0;
        spec.nominal.row(h, 0, 1)[0] = 1.0;
        spec.reward_mean.at(h, 0, 0) = 1.0;
    }
    spec.validate();
    RopoConfig config;
    config.uncertainty = {UncertaintyKind::l1_sa, 0.0};
    config.bonus_override = 0.0;
    config.learning_rate = 0.5;
    const auto run = run_ropo(spec, 20, config, 1);
    for (std::size_t h = 0; h < 3; ++h) CHECK(run.final_policy.prob(h, 0, 0) > 0.99);
    CHECK(run.records.back().training_return > 2.9);
}
