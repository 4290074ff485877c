#pragma once

// Plain-text form of one inner problem, used by `ropo_cli solve-inner`.
//
//   # comment
//   kind    l1_sa | l1_s | kl
//   radius  0.5
//   value   0 1 2
//   nominal 0.2 0.3 0.5      (one line per action for l1_s)
//   action  0                (l1_s only; queried row)
//   method  level_set | subgradient   (l1_s only)

#include "ropo/mdp_core.hpp"
#include "ropo/uncertainty_solvers.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace ropo {

struct InnerProblemText {
    UncertaintySet set;
    std::vector<double> nominal; ///< actions x states, action-major
    std::vector<double> value;
    std::size_t actions = 0;
    std::size_t action = 0;
    L1sOptions l1s;

    InnerProblem problem() const { return {nominal, value, set.radius, actions, action}; }
};

/// Throws ParseError with the offending line and field.
InnerProblemText parse_inner_problem(std::istream& in);

/// sigma, dual_point, iterations and residual, one per line, 12 decimals.
std::string format_inner_result(const DualSolverResult& result);

} // namespace ropo
