#pragma once

// Robust optimistic policy optimization: optimistic robust policy evaluation on
// the empirical model, followed by an exponential-weights (KL mirror descent)
// policy update, one episode at a time.

#include "ropo/estimation.hpp"
#include "ropo/mdp_core.hpp"
#include "ropo/uncertainty_solvers.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace ropo {

/// sqrt(2 log A / (H^2 K)); requires A >= 2.
double default_learning_rate(std::size_t actions, std::size_t horizon, std::size_t episodes);

/// Direction of the exponential-weights step. `ascent` multiplies by exp(+beta Q)
/// and is the default; `descent` reproduces the exp(-beta Q) form for comparison.
enum class MirrorSign { ascent, descent };

struct LearnerState {
    StochasticPolicy policy;
    EmpiricalModel model;
    ValueTable optimistic_values;
    std::size_t episode = 0;
    double learning_rate = 0.0;

    static LearnerState initial(const Shape& shape, double learning_rate);
};

struct EvaluationOptions {
    /// Replaces the bonus with a constant (tests and ablations).
    std::optional<double> bonus_override;
    /// Cells where the adversary acts; empty means all (see RobustMdpSpec).
    std::span<const unsigned char> robust_cells = {};
    L1sOptions l1s;
    /// Per (h, s, a) dual points reused as warm starts by the subgradient L1-S solver.
    std::vector<double>* dual_cache = nullptr;
};

/**
 * Backward pass h = H-1 .. 0 on the empirical model:
 *   Q(h,s,a) = clip(r_hat + sigma_{P_hat}(V(h+1))(s,a) + b(h,s,a), 0, H)
 *   V(h,s)   = <Q(h,s,.), pi_h(.|s)>
 * Radius 0 uses the (s,a)-rectangular bonus, i.e. plain optimistic policy evaluation.
 */
ValueTable robust_policy_evaluation(const LearnerState& state, const UncertaintySet& set,
                                    const BonusParams& params,
                                    const EvaluationOptions& options = {});

/// pi'(a|s) proportional to pi(a|s) exp(+-beta Q(s,a)) for every (h, s).
StochasticPolicy omd_improve(const StochasticPolicy& policy, const StepActionTable& q,
                             double learning_rate, MirrorSign sign = MirrorSign::ascent);

StochasticPolicy omd_improve(const LearnerState& state, MirrorSign sign = MirrorSign::ascent);

struct RopoConfig {
    UncertaintySet uncertainty;
    BonusParams bonus;
    /// 0 selects default_learning_rate(A, H, K).
    double learning_rate = 0.0;
    MirrorSign mirror_sign = MirrorSign::ascent;
    /// Keep pi_k when (k - 1) % snapshot_every == 0, plus the last episode.
    std::size_t snapshot_every = 10;
    std::optional<double> bonus_override;
    L1sMethod l1s_method = L1sMethod::level_set;
};

struct PolicySnapshot {
    std::size_t episode = 0; ///< 1-based episode in which the policy was executed
    StochasticPolicy policy;
};

struct EpisodeRecord {
    std::size_t episode = 0;
    /// Optimistic value V_hat_1(s_0) computed in this episode.
    double v_hat = 0.0;
    /// Realised return of the training trajectory on the nominal kernel.
    double training_return = 0.0;
};

struct RopoRun {
    std::vector<PolicySnapshot> snapshots;
    std::vector<EpisodeRecord> records;
    /// The policy after the last improvement step (pi_{K+1}).
    StochasticPolicy final_policy;
};

/// Called once per episode with the executed policy pi_k.
using EpisodeObserver =
    std::function<void(const EpisodeRecord& record, const StochasticPolicy& executed)>;

/**
 * Runs K episodes on the nominal kernel of `spec`. All randomness comes from
 * Rng::derive(seed, k, training), so a (spec, config, seed) triple fully
 * determines the result.
 */
RopoRun run_ropo(const RobustMdpSpec& spec, std::size_t episodes, const RopoConfig& config,
                 std::uint64_t seed, const EpisodeObserver& observer = {});

} // namespace ropo
