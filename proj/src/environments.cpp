#include "ropo/environments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ropo {

namespace {

constexpr std::array<Direction, kGridActions> kDirections{Direction::up, Direction::down,
                                                          Direction::left, Direction::right};

const char* kDefaultLayout = "ooooo\n"
                             "oooxo\n"
                             "oo+xo\n"
                             "ooxoo\n"
                             "ooooo\n";

double kl_divergence(std::span<const double> q, std::span<const double> p) {
    double total = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
        if (q[i] > 0.0) total += q[i] * std::log(q[i] / p[i]);
    return total;
}

} // namespace

Direction opposite(Direction d) {
    switch (d) {
    case Direction::up: return Direction::down;
    case Direction::down: return Direction::up;
    case Direction::left: return Direction::right;
    case Direction::right: return Direction::left;
    }
    return d;
}

// Layouts -------------------------------------------------------------------------

void GridworldConfig::validate() const {
    if (width == 0 || height == 0) throw ConfigError("grid needs positive width and height");
    if (layout.size() != width * height) throw ConfigError("layout size does not match the grid");
    if (layout.front() == CellType::wall) throw ConfigError("start cell (upper left) is a wall");
    if (std::none_of(layout.begin(), layout.end(), [](CellType c) { return c == CellType::reward; }))
        throw ConfigError("layout has no reward cell");
    if (!(slip_success > 0.0 && slip_success <= 1.0))
        throw ConfigError("slip success probability must lie in (0, 1]");
    if (horizon == 0) throw ConfigError("horizon must be positive");
    if (!(smoothing > 0.0 && smoothing < 1.0)) throw ConfigError("smoothing must lie in (0, 1)");
    uncertainty.validate();
}

GridworldConfig parse_layout(std::istream& in) {
    GridworldConfig config;
    config.layout.clear();
    std::string line;
    std::size_t line_no = 0;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line.erase(std::remove_if(line.begin(), line.end(),
                                  [](char c) { return c == ' ' || c == '\t' || c == '\r'; }),
                   line.end());
        if (line.empty() || line.front() == '#') continue;
        if (rows == 0) config.width = line.size();
        if (line.size() != config.width)
            throw ParseError("row has " + std::to_string(line.size()) + " cells, expected " +
                                 std::to_string(config.width),
                             line_no);
        for (char c : line) {
            switch (c) {
            case 'o': config.layout.push_back(CellType::road); break;
            case 'x': config.layout.push_back(CellType::wall); break;
            case '+': config.layout.push_back(CellType::reward); break;
            default: throw ParseError(std::string("unknown cell label '") + c + "'", line_no);
            }
        }
        ++rows;
    }
    if (rows == 0) throw ParseError("layout is empty", line_no);
    config.height = rows;
    config.validate();
    return config;
}

GridworldConfig load_layout(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open layout file '" + path + "'");
    return parse_layout(in);
}

std::string format_layout(const GridworldConfig& config) {
    std::string out;
    for (std::size_t r = 0; r < config.height; ++r) {
        for (std::size_t c = 0; c < config.width; ++c) {
            switch (config.layout[r * config.width + c]) {
            case CellType::road: out += 'o'; break;
            case CellType::wall: out += 'x'; break;
            case CellType::reward: out += '+'; break;
            }
        }
        out += '\n';
    }
    return out;
}

GridworldConfig default_gridworld() {
    std::istringstream in(kDefaultLayout);
    return parse_layout(in);
}

// Gridworld ----------------------------------------------------------------------

std::size_t Gridworld::landing(std::size_t state, Direction d) const {
    const std::size_t row = state / config.width;
    const std::size_t col = state % config.width;
    std::size_t r = row;
    std::size_t c = col;
    switch (d) {
    case Direction::up:
        if (row == 0) return state;
        r = row - 1;
        break;
    case Direction::down:
        if (row + 1 == config.height) return state;
        r = row + 1;
        break;
    case Direction::left:
        if (col == 0) return state;
        c = col - 1;
        break;
    case Direction::right:
        if (col + 1 == config.width) return state;
        c = col + 1;
        break;
    }
    const std::size_t target = r * config.width + c;
    return config.layout[target] == CellType::wall ? state : target;
}

Gridworld build_gridworld(const GridworldConfig& config) {
    config.validate();
    Gridworld world{config, {}};
    const std::size_t S = config.width * config.height;
    const Shape shape{S, kGridActions, config.horizon};

    RobustMdpSpec& spec = world.spec;
    spec.shape = shape;
    spec.nominal = Kernel(shape);
    spec.reward_mean = StepActionTable(shape.horizon, S, kGridActions, 0.0);
    spec.reward_noise = config.reward_noise;
    spec.uncertainty = config.uncertainty;
    spec.initial_state = 0;

    const double slip = (1.0 - config.slip_success) / 3.0;
    const double mix = config.smoothing;
    std::vector<double> row(S);
    for (std::size_t s = 0; s < S; ++s) {
        const bool wall = config.layout[s] == CellType::wall;
        const double reward = config.layout[s] == CellType::reward ? 1.0 : 0.0;
        for (Direction intended : kDirections) {
            std::fill(row.begin(), row.end(), 0.0);
            if (wall) {
                row[s] = 1.0; // never entered; kept as a self-loop
            } else {
                for (Direction d : kDirections)
                    row[world.landing(s, d)] += d == intended ? config.slip_success : slip;
            }
            double total = 0.0;
            for (double& x : row) {
                x = (1.0 - mix) * x + mix / static_cast<double>(S);
                total += x;
            }
            const auto a = static_cast<std::size_t>(intended);
            for (std::size_t h = 0; h < shape.horizon; ++h) {
                auto out = spec.nominal.row(h, s, a);
                for (std::size_t t = 0; t < S; ++t) out[t] = row[t] / total;
                spec.reward_mean.at(h, s, a) = reward;
            }
        }
    }
    spec.validate();
    return world;
}

// Perturbation ---------------------------------------------------------------------

const char* to_string(PerturbationMetric metric) {
    return metric == PerturbationMetric::l1 ? "l1" : "kl";
}

PerturbationMetric perturbation_metric_from_string(const std::string& name) {
    if (name == "l1") return PerturbationMetric::l1;
    if (name == "kl") return PerturbationMetric::kl;
    throw ConfigError("unknown perturbation metric '" + name + "' (expected l1 or kl)");
}

PerturbedKernel perturb_gridworld(const Gridworld& world, double radius,
                                  PerturbationMetric metric) {
    if (!(radius >= 0.0) || !std::isfinite(radius))
        throw DomainError("perturbation radius must be a finite nonnegative number");
    const RobustMdpSpec& spec = world.spec;
    PerturbedKernel result{spec.nominal};
    if (radius == 0.0) return result;

    const std::size_t S = spec.shape.states;
    std::vector<double> moved(S);
    for (std::size_t s = 0; s < S; ++s) {
        if (world.config.layout[s] == CellType::wall) continue;
        for (Direction intended : kDirections) {
            const std::size_t from = world.landing(s, intended);
            const std::size_t to = world.landing(s, opposite(intended));
            const auto a = static_cast<std::size_t>(intended);
            for (std::size_t h = 0; h < spec.shape.horizon; ++h) {
                if (from == to) {
                    if (h == 0) ++result.degenerate_rows;
                    continue;
                }
                const auto nominal = spec.nominal.row(h, s, a);
                auto row = result.kernel.row(h, s, a);
                const double available = nominal[from];
                double mass = 0.0;
                if (metric == PerturbationMetric::l1) {
                    mass = 0.5 * radius;
                    if (mass > available) {
                        mass = available;
                        if (h == 0) ++result.clipped_rows;
                    }
                } else {
                    auto divergence = [&](double m) {
                        std::copy(nominal.begin(), nominal.end(), moved.begin());
                        moved[from] -= m;
                        moved[to] += m;
                        return kl_divergence(moved, nominal);
                    };
                    if (divergence(available) <= radius) {
                        mass = available;
                        if (h == 0) ++result.clipped_rows;
                    } else {
                        double lo = 0.0;
                        double hi = available;
                        for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
                            const double mid = 0.5 * (lo + hi);
                            const double kl = divergence(mid);
                            if (std::abs(kl - radius) <= 1e-12) {
                                lo = hi = mid;
                                break;
                            }
                            (kl < radius ? lo : hi) = mid;
                        }
                        mass = lo; // stays inside the ball
                    }
                }
                row[from] -= mass;
                row[to] += mass;
                if (row[from] < 0.0) row[from] = 0.0;
            }
        }
    }
    return result;
}

// Hard instance -----------------------------------------------------------------------

void HardMdpConfig::validate() const {
    if (!(epsilon > 0.5 && epsilon <= 1.0)) throw ConfigError("hard MDP needs epsilon in (0.5, 1]");
    if (!(radius >= 0.0 && radius <= 1.0)) throw ConfigError("hard MDP needs radius in [0, 1]");
    if (horizon < 2) throw ConfigError("hard MDP needs H >= 2");
    if (epsilon - radius / 2.0 <= 0.0) throw ConfigError("hard MDP needs epsilon - rho/2 > 0");
}

HardMdp build_hard_mdp(const HardMdpConfig& config) {
    config.validate();
    const Shape shape{3, 2, config.horizon};
    HardMdp result{config, {}, Kernel(shape)};
    RobustMdpSpec& spec = result.spec;
    spec.shape = shape;
    spec.nominal = Kernel(shape);
    spec.reward_mean = StepActionTable(shape.horizon, 3, 2, 0.0);
    spec.reward_noise = RewardNoise::deterministic;
    spec.uncertainty = {UncertaintyKind::l1_sa, config.radius};
    spec.initial_state = 0;
    spec.allow_signed_rewards = true;
    spec.allow_zero_transitions = true;
    spec.robust_cells.assign(shape.horizon * 3 * 2, 0);

    const double per_step = 1.0 / static_cast<double>(config.horizon - 1);
    const double eps = config.epsilon;
    for (std::size_t h = 0; h < shape.horizon; ++h) {
        auto a0 = spec.nominal.row(h, 0, 0);
        a0[1] = eps;
        a0[2] = 1.0 - eps;
        auto a1 = spec.nominal.row(h, 0, 1);
        a1[1] = 0.5;
        a1[2] = 0.5;
        for (std::size_t a = 0; a < 2; ++a) {
            spec.nominal.row(h, 1, a)[1] = 1.0;
            spec.nominal.row(h, 2, a)[2] = 1.0;
            spec.reward_mean.at(h, 1, a) = per_step;
            spec.reward_mean.at(h, 2, a) = -per_step;
        }
        spec.robust_cells[(h * 3 + 0) * 2 + 0] = 1;
    }
    spec.validate();

    result.worst_case = spec.nominal;
    for (std::size_t h = 0; h < shape.horizon; ++h) {
        auto a0 = result.worst_case.row(h, 0, 0);
        a0[1] = eps - config.radius / 2.0;
        a0[2] = 1.0 - eps + config.radius / 2.0;
    }
    return result;
}

} // namespace ropo
