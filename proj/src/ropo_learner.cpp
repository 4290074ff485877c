#include "ropo/ropo_learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ropo {

double default_learning_rate(std::size_t actions, std::size_t horizon, std::size_t episodes) {
    if (actions < 2) throw DomainError("learning rate needs at least two actions");
    if (horizon == 0 || episodes == 0) throw DomainError("learning rate needs H, K >= 1");
    const double H = static_cast<double>(horizon);
    return std::sqrt(2.0 * std::log(static_cast<double>(actions)) /
                     (H * H * static_cast<double>(episodes)));
}

LearnerState LearnerState::initial(const Shape& shape, double learning_rate) {
    return {StochasticPolicy::uniform(shape), EmpiricalModel(shape), ValueTable(shape), 0,
            learning_rate};
}

ValueTable robust_policy_evaluation(const LearnerState& state, const UncertaintySet& set,
                                    const BonusParams& params, const EvaluationOptions& options) {
    const EmpiricalModel& model = state.model;
    const Shape& shape = model.shape();
    state.policy.check_shape(shape);
    set.validate();

    const std::size_t S = shape.states;
    const std::size_t A = shape.actions;
    const double cap = static_cast<double>(shape.horizon);
    if (!options.robust_cells.empty() && options.robust_cells.size() != shape.horizon * S * A)
        throw ConfigError("robust cell mask has the wrong size");

    BonusCoefficients bonus;
    if (!options.bonus_override) {
        const UncertaintyKind bonus_kind = set.is_nominal() ? UncertaintyKind::l1_sa : set.kind;
        bonus = bonus_coefficients(bonus_kind, params, shape, set.radius);
    }
    const UncertaintySet nominal{set.kind, 0.0};
    const bool s_rect = set.kind == UncertaintyKind::l1_s;
    const bool warm = options.dual_cache != nullptr && s_rect &&
                      options.l1s.method == L1sMethod::subgradient;
    if (warm) options.dual_cache->resize(shape.horizon * S * A * A, 0.0);

    ValueTable table(shape);
    std::vector<double> row(S);
    std::vector<double> block(s_rect ? A * S : 0);
    for (std::size_t h = shape.horizon; h-- > 0;) {
        const auto next = table.layer(h + 1);
        for (std::size_t s = 0; s < S; ++s) {
            if (s_rect)
                for (std::size_t a = 0; a < A; ++a)
                    model.transition_estimate(h, s, a, std::span(block).subspan(a * S, S));
            double v = 0.0;
            for (std::size_t a = 0; a < A; ++a) {
                const std::size_t cell = (h * S + s) * A + a;
                const bool robust = options.robust_cells.empty() || options.robust_cells[cell];
                const UncertaintySet& active = robust ? set : nominal;

                double sigma = 0.0;
                try {
                    if (s_rect) {
                        InnerProblem problem{block, next, active.radius, A, a};
                        L1sOptions l1s = options.l1s;
                        if (warm) l1s.warm_start = std::span(*options.dual_cache).subspan(cell * A, A);
                        const auto result = solve_dispatch(active, problem, l1s);
                        if (warm && result.dual_point.size() == A)
                            std::copy(result.dual_point.begin(), result.dual_point.end(),
                                      options.dual_cache->begin() + static_cast<std::ptrdiff_t>(cell * A));
                        sigma = result.sigma;
                    } else {
                        model.transition_estimate(h, s, a, row);
                        sigma = sigma_dispatch(active, InnerProblem{row, next, active.radius});
                    }
                } catch (const DomainError& e) {
                    std::ostringstream where;
                    where << e.what() << " at (h=" << h << ", s=" << s << ", a=" << a << ")";
                    throw DomainError(where.str());
                }

                const double b = options.bonus_override
                                     ? *options.bonus_override
                                     : bonus.at(std::max<std::uint64_t>(model.count(h, s, a), 1));
                const double q =
                    std::clamp(model.reward_estimate(h, s, a) + sigma + b, 0.0, cap);
                table.q.at(h, s, a) = q;
                v += state.policy.prob(h, s, a) * q;
            }
            table.value(h, s) = v;
        }
    }
    return table;
}

StochasticPolicy omd_improve(const StochasticPolicy& policy, const StepActionTable& q,
                             double learning_rate, MirrorSign sign) {
    if (!(learning_rate >= 0.0)) throw DomainError("learning rate must be nonnegative");
    const double direction = sign == MirrorSign::ascent ? 1.0 : -1.0;
    StepActionTable next = policy.table();
    const std::size_t A = policy.actions();
    for (std::size_t h = 0; h < policy.horizon(); ++h)
        for (std::size_t s = 0; s < policy.states(); ++s) {
            auto out = next.row(h, s);
            double shift = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < A; ++a)
                if (out[a] > 0.0) shift = std::max(shift, direction * learning_rate * q.at(h, s, a));
            double total = 0.0;
            for (std::size_t a = 0; a < A; ++a) {
                if (out[a] > 0.0)
                    out[a] *= std::exp(direction * learning_rate * q.at(h, s, a) - shift);
                total += out[a];
            }
            for (double& p : out) p /= total;
        }
    return StochasticPolicy(std::move(next));
}

StochasticPolicy omd_improve(const LearnerState& state, MirrorSign sign) {
    return omd_improve(state.policy, state.optimistic_values.q, state.learning_rate, sign);
}

RopoRun run_ropo(const RobustMdpSpec& spec, std::size_t episodes, const RopoConfig& config,
                 std::uint64_t seed, const EpisodeObserver& observer) {
    if (episodes == 0) throw ConfigError("run needs at least one episode");
    spec.validate();
    const Shape& shape = spec.shape;
    const double beta = config.learning_rate > 0.0
                            ? config.learning_rate
                            : default_learning_rate(shape.actions, shape.horizon, episodes);
    const std::size_t every = std::max<std::size_t>(config.snapshot_every, 1);

    BonusParams bonus = config.bonus;
    bonus.episodes = episodes;

    EvaluationOptions options;
    options.bonus_override = config.bonus_override;
    options.robust_cells = spec.robust_cells;
    options.l1s.method = config.l1s_method;
    std::vector<double> dual_cache;
    options.dual_cache = &dual_cache;

    LearnerState state = LearnerState::initial(shape, beta);
    RopoRun run;
    run.records.reserve(episodes);
    for (std::size_t k = 1; k <= episodes; ++k) {
        state.episode = k;
        if ((k - 1) % every == 0 || k == episodes) run.snapshots.push_back({k, state.policy});

        Rng rng = Rng::derive(seed, k, StreamPurpose::training);
        const Trajectory trajectory = sample_episode(spec, state.policy, spec.nominal, rng);

        try {
            state.optimistic_values =
                robust_policy_evaluation(state, config.uncertainty, bonus, options);
        } catch (const std::exception& e) {
            throw std::runtime_error("episode " + std::to_string(k) + ": " + e.what());
        }

        EpisodeRecord record{k, state.optimistic_values.value(0, spec.initial_state),
                             trajectory.total_reward()};
        if (observer) observer(record, state.policy);
        run.records.push_back(record);

        state.policy = omd_improve(state, config.mirror_sign);
        state.model.update(trajectory);
    }
    run.final_policy = state.policy;
    return run;
}

} // namespace ropo
