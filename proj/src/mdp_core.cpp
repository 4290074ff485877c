#include "ropo/mdp_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ropo {

namespace {

std::string cell_name(std::size_t h, std::size_t s, std::size_t a) {
    std::ostringstream out;
    out << "(h=" << h << ", s=" << s << ", a=" << a << ")";
    return out.str();
}

} // namespace

// Kernel ------------------------------------------------------------------

Kernel::Kernel(Shape shape, double fill)
    : shape_(shape),
      data_(shape.horizon * shape.states * shape.actions * shape.states, fill) {}

double Kernel::min_entry() const {
    return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

void Kernel::validate(bool require_positive) const {
    if (shape_.states == 0 || shape_.actions == 0 || shape_.horizon == 0)
        throw ConfigError("kernel has an empty dimension");
    for (std::size_t h = 0; h < shape_.horizon; ++h)
        for (std::size_t s = 0; s < shape_.states; ++s)
            for (std::size_t a = 0; a < shape_.actions; ++a) {
                const auto p = row(h, s, a);
                double total = 0.0;
                for (double x : p) {
                    if (!(x >= 0.0) || (require_positive && x <= 0.0))
                        throw ConfigError("kernel row " + cell_name(h, s, a) +
                                          (require_positive ? " has a non-positive entry"
                                                            : " has a negative entry"));
                    total += x;
                }
                if (std::abs(total - 1.0) > kRowSumTolerance)
                    throw ConfigError("kernel row " + cell_name(h, s, a) + " does not sum to 1");
            }
}

// UncertaintySet ------------------------------------------------------------

const char* to_string(UncertaintyKind kind) {
    switch (kind) {
    case UncertaintyKind::l1_sa: return "l1_sa";
    case UncertaintyKind::l1_s: return "l1_s";
    case UncertaintyKind::kl: return "kl";
    }
    return "?";
}

UncertaintyKind uncertainty_kind_from_string(const std::string& name) {
    if (name == "l1_sa") return UncertaintyKind::l1_sa;
    if (name == "l1_s") return UncertaintyKind::l1_s;
    if (name == "kl") return UncertaintyKind::kl;
    throw ConfigError("unknown uncertainty kind '" + name + "' (expected l1_sa, l1_s or kl)");
}

void UncertaintySet::validate() const {
    if (!(radius >= 0.0) || !std::isfinite(radius))
        throw DomainError("uncertainty radius must be a finite nonnegative number");
    if (kind != UncertaintyKind::kl && radius > 2.0)
        throw DomainError("L1 radius beyond the simplex diameter 2");
}

// RobustMdpSpec -------------------------------------------------------------

double RobustMdpSpec::reward_bound() const {
    double bound = 0.0;
    for (double r : reward_mean.values()) bound = std::max(bound, std::abs(r));
    return bound;
}

void RobustMdpSpec::validate() const {
    if (shape.states == 0 || shape.actions == 0 || shape.horizon == 0)
        throw ConfigError("spec has an empty dimension");
    if (nominal.shape() != shape) throw ConfigError("nominal kernel shape does not match spec");
    if (reward_mean.layers() != shape.horizon || reward_mean.states() != shape.states ||
        reward_mean.actions() != shape.actions)
        throw ConfigError("reward table shape does not match spec");
    if (initial_state >= shape.states) throw ConfigError("initial state out of range");
    if (!robust_cells.empty() &&
        robust_cells.size() != shape.horizon * shape.states * shape.actions)
        throw ConfigError("robust cell mask has the wrong size");
    uncertainty.validate();

    const bool robust = !uncertainty.is_nominal();
    nominal.validate(robust && !allow_zero_transitions);

    for (double r : reward_mean.values()) {
        if (!std::isfinite(r)) throw ConfigError("reward mean is not finite");
        if (!allow_signed_rewards && (r < 0.0 || r > 1.0))
            throw ConfigError("reward mean outside [0, 1]");
        if (reward_noise == RewardNoise::bernoulli && (r < 0.0 || r > 1.0))
            throw ConfigError("bernoulli reward noise needs means in [0, 1]");
    }
}

// StochasticPolicy ----------------------------------------------------------

StochasticPolicy::StochasticPolicy(StepActionTable probs) : probs_(std::move(probs)) { validate(); }

StochasticPolicy StochasticPolicy::uniform(const Shape& shape) {
    return StochasticPolicy(StepActionTable(shape.horizon, shape.states, shape.actions,
                                            1.0 / static_cast<double>(shape.actions)));
}

StochasticPolicy StochasticPolicy::deterministic(const Shape& shape,
                                                 std::span<const std::size_t> actions) {
    if (actions.size() != shape.horizon * shape.states)
        throw ConfigError("deterministic policy needs one action per (h, s)");
    StepActionTable probs(shape.horizon, shape.states, shape.actions, 0.0);
    for (std::size_t h = 0; h < shape.horizon; ++h)
        for (std::size_t s = 0; s < shape.states; ++s) {
            const std::size_t a = actions[h * shape.states + s];
            if (a >= shape.actions) throw ConfigError("action index out of range");
            probs.at(h, s, a) = 1.0;
        }
    return StochasticPolicy(std::move(probs));
}

void StochasticPolicy::validate() const {
    for (std::size_t h = 0; h < probs_.layers(); ++h)
        for (std::size_t s = 0; s < probs_.states(); ++s) {
            double total = 0.0;
            for (double p : probs_.row(h, s)) {
                if (!(p >= 0.0)) throw ConfigError("policy has a negative probability");
                total += p;
            }
            if (std::abs(total - 1.0) > kRowSumTolerance)
                throw ConfigError("policy row does not sum to 1");
        }
}

void StochasticPolicy::check_shape(const Shape& shape) const {
    if (probs_.layers() != shape.horizon || probs_.states() != shape.states ||
        probs_.actions() != shape.actions)
        throw ConfigError("policy shape does not match spec");
}

// ValueTable ----------------------------------------------------------------

ValueTable::ValueTable(const Shape& shape)
    : shape(shape), v((shape.horizon + 1) * shape.states, 0.0),
      q(shape.horizon + 1, shape.states, shape.actions, 0.0) {}

double Trajectory::total_reward() const {
    double total = 0.0;
    for (const auto& step : steps) total += step.reward;
    return total;
}

// Simulation ----------------------------------------------------------------

Trajectory sample_episode(const RobustMdpSpec& spec, const StochasticPolicy& policy,
                          const Kernel& dynamics, Rng& rng) {
    policy.check_shape(spec.shape);
    if (dynamics.shape() != spec.shape) throw ConfigError("dynamics shape does not match spec");

    Trajectory trajectory;
    trajectory.steps.reserve(spec.shape.horizon);
    std::size_t state = spec.initial_state;
    for (std::size_t h = 0; h < spec.shape.horizon; ++h) {
        const std::size_t action = rng.categorical(policy.row(h, state));
        const double mean = spec.reward_mean.at(h, state, action);
        const double reward = spec.reward_noise == RewardNoise::bernoulli
                                  ? (rng.bernoulli(mean) ? 1.0 : 0.0)
                                  : mean;
        const std::size_t next = rng.categorical(dynamics.row(h, state, action));
        trajectory.steps.push_back({h, state, action, reward, next});
        state = next;
    }
    return trajectory;
}

ValueTable evaluate_under_kernel(const RobustMdpSpec& spec, const StochasticPolicy& policy,
                                 const Kernel& dynamics) {
    policy.check_shape(spec.shape);
    if (dynamics.shape() != spec.shape) throw ConfigError("dynamics shape does not match spec");

    const auto& shape = spec.shape;
    ValueTable table(shape);
    for (std::size_t h = shape.horizon; h-- > 0;) {
        const auto next = table.layer(h + 1);
        for (std::size_t s = 0; s < shape.states; ++s) {
            double v = 0.0;
            for (std::size_t a = 0; a < shape.actions; ++a) {
                const auto p = dynamics.row(h, s, a);
                double expected = 0.0;
                for (std::size_t t = 0; t < shape.states; ++t) expected += p[t] * next[t];
                const double q = spec.reward_mean.at(h, s, a) + expected;
                table.q.at(h, s, a) = q;
                v += policy.prob(h, s, a) * q;
            }
            table.value(h, s) = v;
        }
    }
    return table;
}

double policy_value_under_kernel(const RobustMdpSpec& spec, const StochasticPolicy& policy,
                                 const Kernel& dynamics) {
    return evaluate_under_kernel(spec, policy, dynamics).value(0, spec.initial_state);
}

} // namespace ropo
