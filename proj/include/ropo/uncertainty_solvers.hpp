#pragma once

// Worst-case expected next-state value sigma(V) = min_{q in P} <q, V> over
// L1 (s,a)-rectangular, L1 s-rectangular and KL uncertainty sets, computed
// through their Fenchel duals, plus exact primal oracles for the L1 sets.
//
// All solvers are translation equivariant, so they internally shift V to have
// minimum 0; reported dual points are in the caller's coordinates.

#include "ropo/mdp_core.hpp"

#include <span>
#include <vector>

namespace ropo {

struct DualSolverResult {
    double sigma = 0.0;
    /// eta (length 1) for L1-SA, eta (length A) for L1-S, lambda (length 1) for KL.
    std::vector<double> dual_point;
    int iterations = 0;
    double residual = 0.0;
};

/**
 * Arguments of one inner minimization. Non-owning.
 *
 * For L1-SA and KL `nominal` is a single distribution over next states. For
 * L1-S it is the A x S block P(. | s, .) in action-major order and `action`
 * selects the queried row.
 */
struct InnerProblem {
    std::span<const double> nominal;
    std::span<const double> value;
    double radius = 0.0;
    std::size_t actions = 1;
    std::size_t action = 0;

    std::span<const double> queried_row() const {
        const std::size_t n = value.size();
        return nominal.subspan(action * n, n);
    }
};

// L1, (s,a)-rectangular -----------------------------------------------------

/// g(eta) = sum_s p(s)(eta - V(s))_+ - eta + (rho/2)(eta - min V)_+ ; sigma = -min g.
double l1_sa_dual_objective(std::span<const double> p, std::span<const double> v, double radius,
                            double eta);

/// Exact minimization of the piecewise-linear dual over its breakpoints.
DualSolverResult sigma_l1_sa(const InnerProblem& problem);

/// Greedy mass transport: the exact LP optimum over the L1 ball intersected with the simplex.
double sigma_l1_sa_oracle(const InnerProblem& problem);

/// The minimizing distribution found by the greedy oracle.
std::vector<double> worst_case_l1(std::span<const double> p, std::span<const double> v,
                                  double radius);

// L1, s-rectangular ---------------------------------------------------------

enum class L1sMethod {
    /// Exact: reduce to the level t = max eta and enumerate the breakpoints of the
    /// resulting one-dimensional piecewise-linear function.
    level_set,
    /// Projected subgradient with step D / (G sqrt(t)), G = A(4 + rho)/2.
    subgradient,
};

struct L1sOptions {
    L1sMethod method = L1sMethod::level_set;
    int max_iterations = 5000;
    /// Stop once the best objective improved by at most this over the last 50 steps.
    double tolerance = 1e-8;
    /// Optional starting point for the subgradient method (length A).
    std::span<const double> warm_start = {};
};

/// g(eta) = -sum eta_a' + sum_{s',a'} P(s'|a')(eta_a' - [a'=a]V(s'))_+
///          + (A rho / 2) max_{s',a'} (eta_a' - [a'=a]V(s'))_+ ; sigma = -min g.
double l1_s_dual_objective(const InnerProblem& problem, std::span<const double> eta);

DualSolverResult sigma_l1_s(const InnerProblem& problem, const L1sOptions& options = {});

/// Exact primal value. The objective only involves the queried action, so the
/// optimum spends the whole budget A*rho on that row.
double sigma_l1_s_oracle(const InnerProblem& problem);

// KL --------------------------------------------------------------------------

/// g(lambda) = lambda rho + lambda log sum_s p(s) exp(-V(s)/lambda); g(0) = -min V.
double kl_dual_objective(std::span<const double> p, std::span<const double> v, double radius,
                         double lambda);

struct KlOptions {
    int max_iterations = 200;
    double lambda_floor = 1e-12;
    /// Golden-section stops once the bracket is narrower than this (relative).
    double bracket_tolerance = 1e-14;
};

DualSolverResult sigma_kl(const InnerProblem& problem, const KlOptions& options = {});

// Dispatch --------------------------------------------------------------------

/**
 * Routes to the solver for `set`. Radius 0 returns the nominal expectation
 * without invoking a solver. Zero entries of the nominal row are dropped
 * before solving: the uncertainty sets only reweight next states the nominal
 * kernel can reach.
 */
double sigma_dispatch(const UncertaintySet& set, const InnerProblem& problem,
                      const L1sOptions& l1s_options = {});

/// As sigma_dispatch, keeping the dual point (empty when no solver ran).
DualSolverResult solve_dispatch(const UncertaintySet& set, const InnerProblem& problem,
                                const L1sOptions& l1s_options = {});

/// <p, V>
double nominal_expectation(std::span<const double> p, std::span<const double> v);

} // namespace ropo
