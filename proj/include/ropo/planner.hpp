#pragma once

// Ground-truth robust quantities on the true nominal model. Used to measure
// learners, never by them.

#include "ropo/mdp_core.hpp"
#include "ropo/ropo_learner.hpp"

#include <span>
#include <vector>

namespace ropo {

/// Exact worst-case expectation of `next_values` for cell (h, s, a) of `spec`
/// (greedy oracles for the L1 sets, the KL dual otherwise).
double exact_sigma(const RobustMdpSpec& spec, std::size_t h, std::size_t s, std::size_t a,
                   std::span<const double> next_values);

/// Robust V^pi and Q^pi: backward induction with exact sigma, no bonus, no clipping.
ValueTable robust_evaluate(const RobustMdpSpec& spec, const StochasticPolicy& policy);

/// Robust value of `policy` at (h = 0, initial state).
double robust_value(const RobustMdpSpec& spec, const StochasticPolicy& policy);

struct PlanResult {
    ValueTable values;
    /// Deterministic, ties broken towards the lowest action index.
    StochasticPolicy policy;
};

/// Greedy robust backward induction. Exact for (s,a)-rectangular sets (L1-SA, KL);
/// throws UnsupportedError for L1-S.
PlanResult robust_value_iteration(const RobustMdpSpec& spec);

/// The (s,a)-rectangular L1 spec with radius min(A rho, 2) whose per-cell worst
/// case coincides with the s-rectangular one.
RobustMdpSpec decoupled_s_rect_surrogate(const RobustMdpSpec& spec);

struct RegretLedger {
    std::vector<double> robust_value; ///< V^{pi_k}_1(s_0), k = 1..K
    std::vector<double> instant;      ///< V*_1(s_0) - V^{pi_k}_1(s_0)
    std::vector<double> cumulative;
    double v_star = 0.0;
    /// Some episodes reuse the previous snapshot's value (snapshot cadence > 1).
    bool held_snapshots = false;
    /// V* was computed on decoupled_s_rect_surrogate (L1-S specs).
    bool s_rect_decoupled = false;
};

/// Per-episode and cumulative regret of the policies executed in episodes 1..K.
RegretLedger regret_curve(const RobustMdpSpec& spec, std::span<const PolicySnapshot> snapshots,
                          std::size_t episodes);

/// V* for regret purposes: robust value iteration, via the surrogate for L1-S.
double regret_reference_value(const RobustMdpSpec& spec);

} // namespace ropo
