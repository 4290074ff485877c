#pragma once

#include "ropo/mdp_core.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace ropo {

/**
 * Visitation counts with the empirical reward and transition estimates built
 * from them. Unvisited cells report a zero reward estimate and a uniform
 * transition row, so every row handed to a robust solver is a valid,
 * strictly positive-on-support distribution.
 */
class EmpiricalModel {
public:
    EmpiricalModel() = default;
    explicit EmpiricalModel(const Shape& shape);

    const Shape& shape() const { return shape_; }

    /// Adds one visit per step of the trajectory.
    void update(const Trajectory& trajectory);

    std::uint64_t count(std::size_t h, std::size_t s, std::size_t a) const {
        return counts_[cell(h, s, a)];
    }
    double reward_sum(std::size_t h, std::size_t s, std::size_t a) const {
        return reward_sums_[cell(h, s, a)];
    }
    std::uint64_t transition_count(std::size_t h, std::size_t s, std::size_t a,
                                   std::size_t next) const {
        return transition_counts_[cell(h, s, a) * shape_.states + next];
    }

    /// reward_sum / max(N, 1)
    double reward_estimate(std::size_t h, std::size_t s, std::size_t a) const;

    /// transition_counts / N, or uniform when N = 0. `out` has length S.
    void transition_estimate(std::size_t h, std::size_t s, std::size_t a,
                             std::span<double> out) const;
    std::vector<double> transition_estimate(std::size_t h, std::size_t s, std::size_t a) const;

    Kernel empirical_kernel() const;

    /// Flat text checkpoint: one record per visited cell.
    void save(std::ostream& out) const;
    static EmpiricalModel load(std::istream& in);

    bool operator==(const EmpiricalModel&) const = default;

private:
    std::size_t cell(std::size_t h, std::size_t s, std::size_t a) const {
        return (h * shape_.states + s) * shape_.actions + a;
    }

    Shape shape_;
    std::vector<std::uint64_t> counts_;
    std::vector<double> reward_sums_;
    std::vector<std::uint64_t> transition_counts_;
};

struct BonusParams {
    /// Total number of episodes K.
    std::size_t episodes = 1;
    /// Failure probability delta in (0, 1).
    double failure_prob = 0.05;
    /// Smallest nominal transition probability c (KL bonus only).
    double kl_min_prob = 1.0;
    /// Multiplier on the whole bonus; 1 is the analysed form.
    double scale = 1.0;

    void validate() const;
};

/**
 * Every bonus has the shape scale * (coefficient / sqrt(N) + 1 / sqrt(K)).
 * Precomputing the coefficient keeps the per-cell cost to one square root.
 */
struct BonusCoefficients {
    double per_inverse_sqrt_count = 0.0;
    double constant = 0.0;

    double at(std::uint64_t visits) const;
};

BonusCoefficients bonus_coefficients(UncertaintyKind kind, const BonusParams& params,
                                     const Shape& shape, double radius);

/// sqrt(2 log(3SAH^2K/d)/N) + H sqrt(4S log(3SAH^2K^{3/2}(4+rho)/d)/N) + 1/sqrt(K)
double bonus_l1_sa(std::uint64_t visits, const BonusParams& params, const Shape& shape,
                   double radius);

/// AH sqrt(4SA log(3SA^2H^2K^{3/2}(4+rho)/d)/N) + 1/sqrt(K) + sqrt(2 log(3SAH^2K/d)/N)
double bonus_l1_s(std::uint64_t visits, const BonusParams& params, const Shape& shape,
                  double radius);

/// (2H/(rho c)) sqrt(4S log(8SAH^4K^2/(d rho))/N) + 1/sqrt(K) + sqrt(2 log(3SAH^2K/d)/N)
double bonus_kl(std::uint64_t visits, const BonusParams& params, const Shape& shape,
                double radius);

} // namespace ropo
