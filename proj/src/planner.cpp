#include "ropo/planner.hpp"

#include "ropo/uncertainty_solvers.hpp"

#include <algorithm>

namespace ropo {

double exact_sigma(const RobustMdpSpec& spec, std::size_t h, std::size_t s, std::size_t a,
                   std::span<const double> next_values) {
    const auto row = spec.nominal.row(h, s, a);
    const auto& set = spec.uncertainty;
    if (set.is_nominal() || !spec.is_robust_cell(h, s, a)) return nominal_expectation(row, next_values);

    std::vector<double> p;
    std::vector<double> v;
    for (std::size_t t = 0; t < row.size(); ++t)
        if (row[t] > 0.0) {
            p.push_back(row[t]);
            v.push_back(next_values[t]);
        }
    if (p.size() == 1) return v.front();

    switch (set.kind) {
    case UncertaintyKind::l1_sa:
        return sigma_l1_sa_oracle({p, v, set.radius});
    case UncertaintyKind::l1_s: {
        const double budget = std::min(static_cast<double>(spec.shape.actions) * set.radius, 2.0);
        return sigma_l1_sa_oracle({p, v, budget});
    }
    case UncertaintyKind::kl:
        return sigma_kl({p, v, set.radius}).sigma;
    }
    return 0.0;
}

ValueTable robust_evaluate(const RobustMdpSpec& spec, const StochasticPolicy& policy) {
    policy.check_shape(spec.shape);
    const Shape& shape = spec.shape;
    ValueTable table(shape);
    for (std::size_t h = shape.horizon; h-- > 0;) {
        const auto next = table.layer(h + 1);
        for (std::size_t s = 0; s < shape.states; ++s) {
            double v = 0.0;
            for (std::size_t a = 0; a < shape.actions; ++a) {
                const double q = spec.reward_mean.at(h, s, a) + exact_sigma(spec, h, s, a, next);
                table.q.at(h, s, a) = q;
                v += policy.prob(h, s, a) * q;
            }
            table.value(h, s) = v;
        }
    }
    return table;
}

double robust_value(const RobustMdpSpec& spec, const StochasticPolicy& policy) {
    return robust_evaluate(spec, policy).value(0, spec.initial_state);
}

PlanResult robust_value_iteration(const RobustMdpSpec& spec) {
    if (spec.uncertainty.kind == UncertaintyKind::l1_s && !spec.uncertainty.is_nominal())
        throw UnsupportedError(
            "greedy robust value iteration is not exact for s-rectangular sets; use "
            "decoupled_s_rect_surrogate for a per-(s,a) equivalent");
    const Shape& shape = spec.shape;
    ValueTable table(shape);
    std::vector<std::size_t> greedy(shape.horizon * shape.states, 0);
    for (std::size_t h = shape.horizon; h-- > 0;) {
        const auto next = table.layer(h + 1);
        for (std::size_t s = 0; s < shape.states; ++s) {
            std::size_t best_action = 0;
            for (std::size_t a = 0; a < shape.actions; ++a) {
                const double q = spec.reward_mean.at(h, s, a) + exact_sigma(spec, h, s, a, next);
                table.q.at(h, s, a) = q;
                if (q > table.q.at(h, s, best_action)) best_action = a;
            }
            greedy[h * shape.states + s] = best_action;
            table.value(h, s) = table.q.at(h, s, best_action);
        }
    }
    return {std::move(table), StochasticPolicy::deterministic(shape, greedy)};
}

RobustMdpSpec decoupled_s_rect_surrogate(const RobustMdpSpec& spec) {
    RobustMdpSpec surrogate = spec;
    if (spec.uncertainty.kind == UncertaintyKind::l1_s) {
        surrogate.uncertainty.kind = UncertaintyKind::l1_sa;
        surrogate.uncertainty.radius =
            std::min(static_cast<double>(spec.shape.actions) * spec.uncertainty.radius, 2.0);
    }
    return surrogate;
}

double regret_reference_value(const RobustMdpSpec& spec) {
    const RobustMdpSpec reference = decoupled_s_rect_surrogate(spec);
    return robust_value_iteration(reference).values.value(0, spec.initial_state);
}

RegretLedger regret_curve(const RobustMdpSpec& spec, std::span<const PolicySnapshot> snapshots,
                          std::size_t episodes) {
    if (snapshots.empty() || snapshots.front().episode != 1)
        throw ConfigError("regret needs a snapshot of the first episode");
    RegretLedger ledger;
    ledger.s_rect_decoupled = spec.uncertainty.kind == UncertaintyKind::l1_s;
    ledger.v_star = regret_reference_value(spec);

    std::vector<double> snapshot_values;
    snapshot_values.reserve(snapshots.size());
    for (const auto& snapshot : snapshots) snapshot_values.push_back(robust_value(spec, snapshot.policy));

    std::size_t current = 0;
    double cumulative = 0.0;
    for (std::size_t k = 1; k <= episodes; ++k) {
        while (current + 1 < snapshots.size() && snapshots[current + 1].episode <= k) ++current;
        if (snapshots[current].episode != k) ledger.held_snapshots = true;
        const double value = snapshot_values[current];
        const double instant = ledger.v_star - value;
        cumulative += instant;
        ledger.robust_value.push_back(value);
        ledger.instant.push_back(instant);
        ledger.cumulative.push_back(cumulative);
    }
    return ledger;
}

} // namespace ropo
