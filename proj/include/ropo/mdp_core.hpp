#pragma once

// Tabular episodic MDP types shared by every module.
//
// Indices are dense and 0-based: step h in [0, H) corresponds to the usual
// 1-based step h+1, states in [0, S), actions in [0, A). Value tables carry one
// extra terminal layer h = H that is identically zero.

#include "ropo/errors.hpp"
#include "ropo/rng.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ropo {

inline constexpr double kRowSumTolerance = 1e-12;

struct Shape {
    std::size_t states = 0;
    std::size_t actions = 0;
    std::size_t horizon = 0;

    bool operator==(const Shape&) const = default;
};

/// Per (h, s, a) distribution over next states.
class Kernel {
public:
    Kernel() = default;
    explicit Kernel(Shape shape, double fill = 0.0);

    const Shape& shape() const { return shape_; }

    std::span<double> row(std::size_t h, std::size_t s, std::size_t a) {
        return {data_.data() + offset(h, s, a), shape_.states};
    }
    std::span<const double> row(std::size_t h, std::size_t s, std::size_t a) const {
        return {data_.data() + offset(h, s, a), shape_.states};
    }

    /// All A rows of state s at step h, laid out action-major (A x S).
    std::span<const double> block(std::size_t h, std::size_t s) const {
        return {data_.data() + offset(h, s, 0), shape_.actions * shape_.states};
    }

    double min_entry() const;

    /// Throws ConfigError when a row is not a distribution, or (when
    /// require_positive) when any entry is not strictly positive.
    void validate(bool require_positive) const;

private:
    std::size_t offset(std::size_t h, std::size_t s, std::size_t a) const {
        return ((h * shape_.states + s) * shape_.actions + a) * shape_.states;
    }

    Shape shape_;
    std::vector<double> data_;
};

/// Scalar per (h, s, a); used for rewards, Q tables and policies.
class StepActionTable {
public:
    StepActionTable() = default;
    StepActionTable(std::size_t layers, std::size_t states, std::size_t actions, double fill = 0.0)
        : layers_(layers), states_(states), actions_(actions),
          data_(layers * states * actions, fill) {}

    std::size_t layers() const { return layers_; }
    std::size_t states() const { return states_; }
    std::size_t actions() const { return actions_; }

    double& at(std::size_t h, std::size_t s, std::size_t a) { return data_[index(h, s, a)]; }
    double at(std::size_t h, std::size_t s, std::size_t a) const { return data_[index(h, s, a)]; }

    std::span<double> row(std::size_t h, std::size_t s) {
        return {data_.data() + index(h, s, 0), actions_};
    }
    std::span<const double> row(std::size_t h, std::size_t s) const {
        return {data_.data() + index(h, s, 0), actions_};
    }

    std::span<const double> values() const { return data_; }
    std::span<double> values() { return data_; }

    bool operator==(const StepActionTable&) const = default;

private:
    std::size_t index(std::size_t h, std::size_t s, std::size_t a) const {
        return (h * states_ + s) * actions_ + a;
    }

    std::size_t layers_ = 0;
    std::size_t states_ = 0;
    std::size_t actions_ = 0;
    std::vector<double> data_;
};

enum class UncertaintyKind { l1_sa, l1_s, kl };

const char* to_string(UncertaintyKind kind);
UncertaintyKind uncertainty_kind_from_string(const std::string& name);

struct UncertaintySet {
    UncertaintyKind kind = UncertaintyKind::l1_sa;
    double radius = 0.0;

    /// Radius 0 collapses every set to the nominal kernel.
    bool is_nominal() const { return radius == 0.0; }
    void validate() const;
};

enum class RewardNoise { deterministic, bernoulli };

/**
 * Full tabular robust MDP.
 *
 * `robust_cells` optionally restricts the adversary to a subset of (h, s, a)
 * cells (row-major h, s, a; nonzero = uncertain). Empty means every cell is
 * uncertain. Diagnostic instances also relax the reward range and the strict
 * positivity of the nominal kernel; the robust backup then acts on the
 * support of each nominal row.
 */
struct RobustMdpSpec {
    Shape shape;
    Kernel nominal;
    StepActionTable reward_mean;
    RewardNoise reward_noise = RewardNoise::bernoulli;
    UncertaintySet uncertainty;
    std::size_t initial_state = 0;
    std::vector<unsigned char> robust_cells;
    bool allow_signed_rewards = false;
    bool allow_zero_transitions = false;

    bool is_robust_cell(std::size_t h, std::size_t s, std::size_t a) const {
        return robust_cells.empty() ||
               robust_cells[(h * shape.states + s) * shape.actions + a] != 0;
    }

    /// Largest absolute per-step reward; 1 for well-formed [0, 1] rewards.
    double reward_bound() const;

    void validate() const;
};

/// Time-indexed action distributions pi_h(. | s).
class StochasticPolicy {
public:
    StochasticPolicy() = default;
    explicit StochasticPolicy(StepActionTable probs);

    static StochasticPolicy uniform(const Shape& shape);
    /// Point-mass policy; actions[h * S + s] is the action taken.
    static StochasticPolicy deterministic(const Shape& shape, std::span<const std::size_t> actions);

    std::size_t horizon() const { return probs_.layers(); }
    std::size_t states() const { return probs_.states(); }
    std::size_t actions() const { return probs_.actions(); }

    std::span<const double> row(std::size_t h, std::size_t s) const { return probs_.row(h, s); }
    double prob(std::size_t h, std::size_t s, std::size_t a) const { return probs_.at(h, s, a); }
    const StepActionTable& table() const { return probs_; }

    void validate() const;
    void check_shape(const Shape& shape) const;

    bool operator==(const StochasticPolicy&) const = default;

private:
    StepActionTable probs_;
};

/// V and Q over steps 0..H; layer H is the zero terminal layer.
struct ValueTable {
    Shape shape;
    std::vector<double> v;
    StepActionTable q;

    explicit ValueTable(const Shape& shape = {});

    double& value(std::size_t h, std::size_t s) { return v[h * shape.states + s]; }
    double value(std::size_t h, std::size_t s) const { return v[h * shape.states + s]; }
    std::span<const double> layer(std::size_t h) const {
        return {v.data() + h * shape.states, shape.states};
    }
};

struct Step {
    std::size_t h = 0;
    std::size_t state = 0;
    std::size_t action = 0;
    double reward = 0.0;
    std::size_t next_state = 0;
};

struct Trajectory {
    std::vector<Step> steps;

    double total_reward() const;
};

/// Runs one episode of `policy` on `dynamics` from spec.initial_state.
Trajectory sample_episode(const RobustMdpSpec& spec, const StochasticPolicy& policy,
                          const Kernel& dynamics, Rng& rng);

/// Exact V^pi and Q^pi under a fixed kernel by backward induction on reward means.
ValueTable evaluate_under_kernel(const RobustMdpSpec& spec, const StochasticPolicy& policy,
                                 const Kernel& dynamics);

/// Expected return of `policy` from the initial state under `dynamics`.
double policy_value_under_kernel(const RobustMdpSpec& spec, const StochasticPolicy& policy,
                                 const Kernel& dynamics);

} // namespace ropo
