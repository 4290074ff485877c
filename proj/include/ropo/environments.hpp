#pragma once

#include "ropo/mdp_core.hpp"

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace ropo {

enum class CellType { road, wall, reward };

/// Actions of the grid, in index order.
enum class Direction : std::size_t { up = 0, down = 1, left = 2, right = 3 };

inline constexpr std::size_t kGridActions = 4;

Direction opposite(Direction d);

struct GridworldConfig {
    std::size_t width = 5;
    std::size_t height = 5;
    /// Row-major, height x width. Start is the upper-left cell.
    std::vector<CellType> layout;
    /// Probability of moving in the chosen direction; the rest splits evenly over
    /// the other three directions.
    double slip_success = 0.9;
    std::size_t horizon = 20;
    /// Weight of the uniform mixture that makes every nominal row strictly positive.
    double smoothing = 1e-6;
    UncertaintySet uncertainty{UncertaintyKind::l1_sa, 0.1};
    RewardNoise reward_noise = RewardNoise::bernoulli;

    void validate() const;
};

/// Parses a plain-text grid: one row per line, 'o' road, 'x' wall, '+' reward.
/// Blank lines and lines starting with '#' are ignored.
GridworldConfig parse_layout(std::istream& in);
GridworldConfig load_layout(const std::string& path);
std::string format_layout(const GridworldConfig& config);

/// The shipped 5x5 layout (see layouts/default.txt).
GridworldConfig default_gridworld();

struct Gridworld {
    GridworldConfig config;
    RobustMdpSpec spec;

    /// Cell reached by moving from `state` in `d`; walls and edges reflect.
    std::size_t landing(std::size_t state, Direction d) const;
};

Gridworld build_gridworld(const GridworldConfig& config);

enum class PerturbationMetric { l1, kl };

const char* to_string(PerturbationMetric metric);
PerturbationMetric perturbation_metric_from_string(const std::string& name);

struct PerturbedKernel {
    Kernel kernel;
    /// Rows where the requested deviation exceeded the movable intended mass.
    std::size_t clipped_rows = 0;
    /// Rows whose intended and opposite moves land on the same cell (no deviation possible).
    std::size_t degenerate_rows = 0;

    bool clipped() const { return clipped_rows > 0; }
};

/**
 * Moves probability from the intended landing cell to the landing cell of the
 * opposite direction. For L1 the moved mass is radius/2 (L1 deviation = radius);
 * for KL it is found by bisection so that KL(perturbed || nominal) = radius.
 */
PerturbedKernel perturb_gridworld(const Gridworld& world, double radius, PerturbationMetric metric);

struct HardMdpConfig {
    double epsilon = 0.75;
    double radius = 1.0;
    std::size_t horizon = 20;

    void validate() const;
};

/**
 * Three states (s0 start, s1 and s2 absorbing), two actions. From s0, a0 reaches
 * s1 with probability epsilon and s2 otherwise; a1 splits evenly. Per-step
 * rewards are 0 on s0, +1/(H-1) on s1 and -1/(H-1) on s2. Only (s0, a0) is
 * uncertain, with an L1 (s,a)-rectangular set of the configured radius.
 */
struct HardMdp {
    HardMdpConfig config;
    RobustMdpSpec spec;
    /// Nominal kernel with a0's split moved to (epsilon - rho/2, 1 - epsilon + rho/2).
    Kernel worst_case;
};

HardMdp build_hard_mdp(const HardMdpConfig& config);

} // namespace ropo
