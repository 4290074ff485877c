#include "ropo/uncertainty_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace ropo {

namespace {

constexpr double kInputSumTolerance = 1e-9;

void check_distribution(std::span<const double> p, bool strictly_positive, const char* what) {
    if (p.empty()) throw DomainError(std::string(what) + " is empty");
    double total = 0.0;
    for (double x : p) {
        if (!std::isfinite(x) || x < 0.0)
            throw DomainError(std::string(what) + " has a negative or non-finite entry");
        if (strictly_positive && x <= 0.0)
            throw DomainError(std::string(what) + " must be strictly positive");
        total += x;
    }
    if (std::abs(total - 1.0) > kInputSumTolerance)
        throw DomainError(std::string(what) + " does not sum to 1");
}

void check_values(std::span<const double> v, std::size_t expected) {
    if (v.size() != expected) throw DomainError("value vector length does not match the kernel row");
    for (double x : v)
        if (!std::isfinite(x)) throw DomainError("value vector has a non-finite entry");
}

void check_l1_radius(double radius) {
    if (!(radius >= 0.0) || radius > 2.0)
        throw DomainError("L1 radius must lie in [0, 2]");
}

double min_of(std::span<const double> v) { return *std::min_element(v.begin(), v.end()); }
double max_of(std::span<const double> v) { return *std::max_element(v.begin(), v.end()); }

double positive_part(double x) { return x > 0.0 ? x : 0.0; }

// log sum_s p(s) exp(-w(s)/lambda) for w >= 0 with min w = 0: every exponent is
// nonpositive, so the sum is bounded below by the mass on argmin w.
double shifted_log_mgf(std::span<const double> p, std::span<const double> w, double lambda) {
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) total += p[i] * std::exp(-w[i] / lambda);
    return std::log(total);
}

double kl_shifted_objective(std::span<const double> p, std::span<const double> w, double radius,
                            double lambda) {
    if (lambda <= 0.0) return 0.0;
    return lambda * radius + lambda * shifted_log_mgf(p, w, lambda);
}

// min over x in [0, upper] of f(x) = -x + sum_s row(s) (x - w(s))_+ (w >= 0).
// f is convex piecewise linear with kinks at w, so the minimum sits at 0,
// at `upper`, or at a kink inside the interval.
std::pair<double, double> min_row_objective(std::span<const double> row,
                                            std::span<const double> w, bool uses_value,
                                            double upper) {
    auto f = [&](double x) {
        double total = -x;
        for (std::size_t s = 0; s < row.size(); ++s)
            total += row[s] * positive_part(x - (uses_value ? w[s] : 0.0));
        return total;
    };
    double best_x = 0.0;
    double best = f(0.0);
    auto consider = [&](double x) {
        const double fx = f(x);
        if (fx < best) {
            best = fx;
            best_x = x;
        }
    };
    consider(upper);
    if (uses_value)
        for (double kink : w)
            if (kink > 0.0 && kink < upper) consider(kink);
    return {best, best_x};
}

} // namespace

double nominal_expectation(std::span<const double> p, std::span<const double> v) {
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) total += p[i] * v[i];
    return total;
}

// L1, (s,a)-rectangular -----------------------------------------------------

double l1_sa_dual_objective(std::span<const double> p, std::span<const double> v, double radius,
                            double eta) {
    const double v_min = min_of(v);
    double total = -eta + 0.5 * radius * positive_part(eta - v_min);
    for (std::size_t i = 0; i < p.size(); ++i) total += p[i] * positive_part(eta - v[i]);
    return total;
}

DualSolverResult sigma_l1_sa(const InnerProblem& problem) {
    const auto p = problem.nominal;
    const auto v = problem.value;
    check_l1_radius(problem.radius);
    check_distribution(p, true, "nominal row");
    check_values(v, p.size());

    const double v_min = min_of(v);
    const std::size_t n = p.size();

    // g(eta) in shifted coordinates w = V - min V. On the sorted breakpoints
    // w_(0) = 0 <= ... <= w_(n-1) = max w:
    //   g(w_(k)) = w_(k) * P_k - W_k - w_(k) * (1 - rho/2),
    // with P_k, W_k the prefix sums of p and p*w over the first k+1 breakpoints.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return v[i] < v[j] || (v[i] == v[j] && i < j);
    });

    const double slope_tail = 1.0 - 0.5 * problem.radius;
    double prefix_p = 0.0;
    double prefix_pw = 0.0;
    double best = 0.0; // g(0) = 0
    double best_eta = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = order[k];
        const double w = v[i] - v_min;
        prefix_p += p[i];
        prefix_pw += p[i] * w;
        const double g = w * prefix_p - prefix_pw - w * slope_tail;
        if (g < best) {
            best = g;
            best_eta = w;
        }
    }

    DualSolverResult result;
    result.sigma = v_min - best;
    result.dual_point = {best_eta + v_min};
    result.iterations = static_cast<int>(n);
    result.residual = 0.0;
    return result;
}

std::vector<double> worst_case_l1(std::span<const double> p, std::span<const double> v,
                                  double radius) {
    std::vector<double> q(p.begin(), p.end());
    const std::size_t target = static_cast<std::size_t>(
        std::min_element(v.begin(), v.end()) - v.begin()); // lowest index on ties
    const double moved = std::min(0.5 * radius, 1.0 - q[target]);
    if (moved <= 0.0) return q;

    std::vector<std::size_t> donors;
    for (std::size_t i = 0; i < q.size(); ++i)
        if (i != target) donors.push_back(i);
    std::stable_sort(donors.begin(), donors.end(),
                     [&](std::size_t i, std::size_t j) { return v[i] > v[j]; });

    double remaining = moved;
    for (std::size_t i : donors) {
        if (remaining <= 0.0) break;
        const double take = std::min(remaining, q[i]);
        q[i] -= take;
        remaining -= take;
    }
    q[target] += moved - remaining;
    return q;
}

double sigma_l1_sa_oracle(const InnerProblem& problem) {
    check_l1_radius(problem.radius);
    check_distribution(problem.nominal, true, "nominal row");
    check_values(problem.value, problem.nominal.size());
    const auto q = worst_case_l1(problem.nominal, problem.value, problem.radius);
    return nominal_expectation(q, problem.value);
}

// L1, s-rectangular ---------------------------------------------------------

namespace {

void check_block(const InnerProblem& problem) {
    check_l1_radius(problem.radius);
    const std::size_t n = problem.value.size();
    if (problem.actions == 0 || problem.action >= problem.actions)
        throw DomainError("queried action out of range");
    if (n == 0 || problem.nominal.size() != problem.actions * n)
        throw DomainError("s-rectangular block must hold A rows of length S");
    check_values(problem.value, n);
    for (std::size_t a = 0; a < problem.actions; ++a)
        check_distribution(problem.nominal.subspan(a * n, n), a == problem.action,
                           a == problem.action ? "queried nominal row" : "nominal row");
}

// Dual objective in shifted coordinates (w = V - min V >= 0, min w = 0).
double l1_s_shifted_objective(std::span<const double> block, std::span<const double> w,
                              std::size_t actions, std::size_t action, double radius,
                              std::span<const double> eta) {
    const std::size_t n = w.size();
    double total = 0.0;
    double level = 0.0;
    for (std::size_t a = 0; a < actions; ++a) {
        const auto row = block.subspan(a * n, n);
        total -= eta[a];
        for (std::size_t s = 0; s < n; ++s)
            total += row[s] * positive_part(eta[a] - (a == action ? w[s] : 0.0));
        level = std::max(level, eta[a]);
    }
    return total + 0.5 * static_cast<double>(actions) * radius * level;
}

} // namespace

double l1_s_dual_objective(const InnerProblem& problem, std::span<const double> eta) {
    const std::size_t n = problem.value.size();
    const auto v = problem.value;
    double total = 0.0;
    double level = 0.0;
    for (std::size_t a = 0; a < problem.actions; ++a) {
        const auto row = problem.nominal.subspan(a * n, n);
        total -= eta[a];
        for (std::size_t s = 0; s < n; ++s) {
            const double gap = eta[a] - (a == problem.action ? v[s] : 0.0);
            total += row[s] * positive_part(gap);
            level = std::max(level, gap);
        }
    }
    return total + 0.5 * static_cast<double>(problem.actions) * problem.radius * level;
}

DualSolverResult sigma_l1_s(const InnerProblem& problem, const L1sOptions& options) {
    check_block(problem);
    const std::size_t n = problem.value.size();
    const std::size_t actions = problem.actions;
    const std::size_t queried = problem.action;
    const double v_min = min_of(problem.value);
    std::vector<double> w(n);
    for (std::size_t s = 0; s < n; ++s) w[s] = problem.value[s] - v_min;
    const double w_max = max_of(w);
    const double penalty = 0.5 * static_cast<double>(actions) * problem.radius;

    DualSolverResult result;
    std::vector<double> best_eta(actions, 0.0);
    double best = 0.0; // g(0) = 0

    if (w_max > 0.0 && options.method == L1sMethod::level_set) {
        // min_eta g = min_t [ penalty * t + sum_a min_{x in [0,t]} f_a(x) ]; the outer
        // function is convex piecewise linear with kinks only where t crosses a kink of
        // some f_a, i.e. t in {0, max w} U {w(s)}.
        std::vector<double> levels(w.begin(), w.end());
        levels.push_back(0.0);
        std::sort(levels.begin(), levels.end());
        levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
        std::vector<double> eta(actions);
        for (double t : levels) {
            double total = penalty * t;
            for (std::size_t a = 0; a < actions; ++a) {
                const auto [fa, xa] =
                    min_row_objective(problem.nominal.subspan(a * n, n), w, a == queried, t);
                total += fa;
                eta[a] = xa;
            }
            ++result.iterations;
            if (total < best) {
                best = total;
                best_eta = eta;
            }
        }
        result.residual = 0.0;
    } else if (w_max > 0.0) {
        const double a_count = static_cast<double>(actions);
        const double diameter = w_max * std::sqrt(a_count);
        const double lipschitz = a_count * (4.0 + problem.radius) / 2.0;
        std::vector<double> eta(actions, 0.0);
        if (options.warm_start.size() == actions) {
            for (std::size_t a = 0; a < actions; ++a)
                eta[a] = std::clamp(options.warm_start[a] - (a == queried ? v_min : 0.0), 0.0,
                                    w_max);
        }
        auto objective = [&](std::span<const double> x) {
            return l1_s_shifted_objective(problem.nominal, w, actions, queried, problem.radius, x);
        };
        if (const double start = objective(eta); start < best) {
            best = start;
            best_eta = eta;
        }

        constexpr int kWindow = 50;
        std::vector<double> history;
        history.reserve(static_cast<std::size_t>(options.max_iterations) + 1);
        history.push_back(best);
        std::vector<double> grad(actions);
        for (int t = 1; t <= options.max_iterations; ++t) {
            std::size_t top = 0;
            for (std::size_t a = 1; a < actions; ++a)
                if (eta[a] > eta[top]) top = a;
            for (std::size_t a = 0; a < actions; ++a) {
                const auto row = problem.nominal.subspan(a * n, n);
                double g = -1.0;
                for (std::size_t s = 0; s < n; ++s)
                    if (eta[a] - (a == queried ? w[s] : 0.0) > 0.0) g += row[s];
                if (a == top && eta[a] > 0.0) g += penalty;
                grad[a] = g;
            }
            const double step = diameter / (lipschitz * std::sqrt(static_cast<double>(t)));
            for (std::size_t a = 0; a < actions; ++a)
                eta[a] = std::clamp(eta[a] - step * grad[a], 0.0, w_max);
            const double value = objective(eta);
            if (value < best) {
                best = value;
                best_eta = eta;
            }
            history.push_back(best);
            result.iterations = t;
            if (t >= kWindow) {
                result.residual = history[static_cast<std::size_t>(t - kWindow)] - best;
                if (result.residual <= options.tolerance) break;
            }
        }
    }

    result.sigma = v_min - best;
    result.dual_point = best_eta;
    result.dual_point[queried] += v_min;
    return result;
}

double sigma_l1_s_oracle(const InnerProblem& problem) {
    check_block(problem);
    InnerProblem row{problem.queried_row(), problem.value,
                     std::min(static_cast<double>(problem.actions) * problem.radius, 2.0)};
    return sigma_l1_sa_oracle(row);
}

// KL --------------------------------------------------------------------------

double kl_dual_objective(std::span<const double> p, std::span<const double> v, double radius,
                         double lambda) {
    const double v_min = min_of(v);
    if (lambda <= 0.0) return -v_min;
    std::vector<double> w(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) w[i] = v[i] - v_min;
    return kl_shifted_objective(p, w, radius, lambda) - v_min;
}

DualSolverResult sigma_kl(const InnerProblem& problem, const KlOptions& options) {
    const auto p = problem.nominal;
    if (!(problem.radius > 0.0) || !std::isfinite(problem.radius))
        throw DomainError("KL radius must be positive");
    check_distribution(p, true, "nominal row");
    check_values(problem.value, p.size());

    const double v_min = min_of(problem.value);
    std::vector<double> w(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) w[i] = problem.value[i] - v_min;
    const double w_max = max_of(w);

    DualSolverResult result;
    result.dual_point = {0.0};
    if (w_max == 0.0) {
        result.sigma = v_min;
        return result;
    }

    // g is convex on (0, max w / rho]; golden-section needs no derivative and never
    // touches the lambda -> 0 singularity, which is compared separately (g(0) = 0 here).
    constexpr double kInvPhi = 0.6180339887498948482;
    double lo = options.lambda_floor;
    double hi = std::max(w_max / problem.radius, lo);
    auto g = [&](double lambda) { return kl_shifted_objective(p, w, problem.radius, lambda); };
    double x1 = hi - kInvPhi * (hi - lo);
    double x2 = lo + kInvPhi * (hi - lo);
    double g1 = g(x1);
    double g2 = g(x2);
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        if (hi - lo <= options.bracket_tolerance * std::max(1.0, hi)) break;
        if (g1 <= g2) {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - kInvPhi * (hi - lo);
            g1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + kInvPhi * (hi - lo);
            g2 = g(x2);
        }
    }
    double best_lambda = g1 <= g2 ? x1 : x2;
    double best = std::min(g1, g2);
    for (double edge : {options.lambda_floor, w_max / problem.radius}) {
        const double ge = g(edge);
        if (ge < best) {
            best = ge;
            best_lambda = edge;
        }
    }
    if (best >= 0.0) { // the lambda = 0 limit, sigma = min V
        best = 0.0;
        best_lambda = 0.0;
    }

    result.sigma = v_min - best;
    result.dual_point = {best_lambda};
    result.iterations = it;
    result.residual = std::abs(g1 - g2);
    return result;
}

// Dispatch --------------------------------------------------------------------

DualSolverResult solve_dispatch(const UncertaintySet& set, const InnerProblem& problem,
                                const L1sOptions& l1s_options) {
    const std::size_t n = problem.value.size();
    const auto row = set.kind == UncertaintyKind::l1_s ? problem.queried_row() : problem.nominal;
    if (row.size() != n) throw DomainError("value vector length does not match the kernel row");

    DualSolverResult trivial;
    if (set.is_nominal()) {
        trivial.sigma = nominal_expectation(row, problem.value);
        return trivial;
    }

    std::vector<std::size_t> support;
    support.reserve(n);
    for (std::size_t s = 0; s < n; ++s)
        if (row[s] > 0.0) support.push_back(s);
    if (support.empty()) throw DomainError("nominal row has no support");
    if (support.size() == 1) {
        trivial.sigma = problem.value[support.front()];
        return trivial;
    }

    std::vector<double> v(support.size());
    for (std::size_t i = 0; i < support.size(); ++i) v[i] = problem.value[support[i]];

    if (set.kind != UncertaintyKind::l1_s) {
        std::vector<double> p(support.size());
        for (std::size_t i = 0; i < support.size(); ++i) p[i] = row[support[i]];
        InnerProblem reduced{p, v, set.radius};
        return set.kind == UncertaintyKind::kl ? sigma_kl(reduced) : sigma_l1_sa(reduced);
    }

    // Other actions only enter the s-rectangular dual through their row sums and
    // their own level eta_a', so restricting them to the queried support and
    // renormalising leaves the objective unchanged.
    const std::size_t m = support.size();
    std::vector<double> block(problem.actions * m);
    for (std::size_t a = 0; a < problem.actions; ++a) {
        const auto full = problem.nominal.subspan(a * n, n);
        double total = 0.0;
        for (std::size_t i = 0; i < m; ++i) total += full[support[i]];
        for (std::size_t i = 0; i < m; ++i)
            block[a * m + i] = total > 0.0 ? full[support[i]] / total : 1.0 / static_cast<double>(m);
    }
    InnerProblem reduced{block, v, set.radius, problem.actions, problem.action};
    return sigma_l1_s(reduced, l1s_options);
}

double sigma_dispatch(const UncertaintySet& set, const InnerProblem& problem,
                      const L1sOptions& l1s_options) {
    return solve_dispatch(set, problem, l1s_options).sigma;
}

} // namespace ropo
