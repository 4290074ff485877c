#include "ropo/estimation.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace ropo {

EmpiricalModel::EmpiricalModel(const Shape& shape)
    : shape_(shape), counts_(shape.horizon * shape.states * shape.actions, 0),
      reward_sums_(counts_.size(), 0.0), transition_counts_(counts_.size() * shape.states, 0) {}

void EmpiricalModel::update(const Trajectory& trajectory) {
    for (const auto& step : trajectory.steps) {
        if (step.h >= shape_.horizon || step.state >= shape_.states ||
            step.action >= shape_.actions || step.next_state >= shape_.states)
            throw ConfigError("trajectory step outside the model shape");
        const std::size_t c = cell(step.h, step.state, step.action);
        ++counts_[c];
        reward_sums_[c] += step.reward;
        ++transition_counts_[c * shape_.states + step.next_state];
    }
}

double EmpiricalModel::reward_estimate(std::size_t h, std::size_t s, std::size_t a) const {
    const std::size_t c = cell(h, s, a);
    return reward_sums_[c] / static_cast<double>(std::max<std::uint64_t>(counts_[c], 1));
}

void EmpiricalModel::transition_estimate(std::size_t h, std::size_t s, std::size_t a,
                                         std::span<double> out) const {
    const std::size_t c = cell(h, s, a);
    const std::uint64_t n = counts_[c];
    if (n == 0) {
        std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(shape_.states));
        return;
    }
    const double inv = 1.0 / static_cast<double>(n);
    const std::uint64_t* row = transition_counts_.data() + c * shape_.states;
    for (std::size_t t = 0; t < shape_.states; ++t) out[t] = static_cast<double>(row[t]) * inv;
}

std::vector<double> EmpiricalModel::transition_estimate(std::size_t h, std::size_t s,
                                                        std::size_t a) const {
    std::vector<double> out(shape_.states);
    transition_estimate(h, s, a, out);
    return out;
}

Kernel EmpiricalModel::empirical_kernel() const {
    Kernel kernel(shape_);
    for (std::size_t h = 0; h < shape_.horizon; ++h)
        for (std::size_t s = 0; s < shape_.states; ++s)
            for (std::size_t a = 0; a < shape_.actions; ++a)
                transition_estimate(h, s, a, kernel.row(h, s, a));
    return kernel;
}

// Checkpoint format:
//   ropo-empirical-model 1
//   shape <S> <A> <H>
//   cell <h> <s> <a> <N> <reward_sum> <next>:<count> ...
//   end
void EmpiricalModel::save(std::ostream& out) const {
    out << "ropo-empirical-model 1\n";
    out << "shape " << shape_.states << ' ' << shape_.actions << ' ' << shape_.horizon << '\n';
    char number[32];
    for (std::size_t h = 0; h < shape_.horizon; ++h)
        for (std::size_t s = 0; s < shape_.states; ++s)
            for (std::size_t a = 0; a < shape_.actions; ++a) {
                const std::size_t c = cell(h, s, a);
                if (counts_[c] == 0) continue;
                std::snprintf(number, sizeof number, "%.17g", reward_sums_[c]);
                out << "cell " << h << ' ' << s << ' ' << a << ' ' << counts_[c] << ' ' << number;
                for (std::size_t t = 0; t < shape_.states; ++t)
                    if (const auto k = transition_counts_[c * shape_.states + t]; k != 0)
                        out << ' ' << t << ':' << k;
                out << '\n';
            }
    out << "end\n";
}

EmpiricalModel EmpiricalModel::load(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty()) return true;
        }
        return false;
    };

    if (!next_line() || line != "ropo-empirical-model 1")
        throw ParseError("expected header 'ropo-empirical-model 1'", line_no);
    if (!next_line()) throw ParseError("missing shape record", line_no);
    Shape shape;
    {
        std::istringstream fields(line);
        std::string tag;
        if (!(fields >> tag >> shape.states >> shape.actions >> shape.horizon) || tag != "shape")
            throw ParseError("malformed shape record", line_no);
    }
    EmpiricalModel model(shape);
    while (next_line()) {
        if (line == "end") return model;
        std::istringstream fields(line);
        std::string tag;
        std::size_t h, s, a;
        std::uint64_t n;
        double reward_sum;
        if (!(fields >> tag >> h >> s >> a >> n >> reward_sum) || tag != "cell")
            throw ParseError("malformed cell record", line_no);
        if (h >= shape.horizon || s >= shape.states || a >= shape.actions)
            throw ParseError("cell index out of range", line_no);
        const std::size_t c = model.cell(h, s, a);
        model.counts_[c] = n;
        model.reward_sums_[c] = reward_sum;
        std::uint64_t total = 0;
        std::string pair;
        while (fields >> pair) {
            const auto colon = pair.find(':');
            if (colon == std::string::npos) throw ParseError("expected next:count", line_no);
            std::size_t next;
            std::uint64_t k;
            try {
                next = std::stoul(pair.substr(0, colon));
                k = std::stoull(pair.substr(colon + 1));
            } catch (const std::exception&) {
                throw ParseError("expected next:count", line_no);
            }
            if (next >= shape.states) throw ParseError("next state out of range", line_no);
            model.transition_counts_[c * shape.states + next] = k;
            total += k;
        }
        if (total != n) throw ParseError("transition counts do not add up to the visit count", line_no);
    }
    throw ParseError("missing 'end' record", line_no);
}

// Bonuses -----------------------------------------------------------------------

void BonusParams::validate() const {
    if (episodes == 0) throw DomainError("bonus needs K >= 1");
    if (!(failure_prob > 0.0 && failure_prob < 1.0))
        throw DomainError("failure probability must lie in (0, 1)");
    if (!(scale >= 0.0)) throw DomainError("bonus scale must be nonnegative");
}

double BonusCoefficients::at(std::uint64_t visits) const {
    if (visits == 0) throw DomainError("bonus requires a positive visit count");
    return per_inverse_sqrt_count / std::sqrt(static_cast<double>(visits)) + constant;
}

BonusCoefficients bonus_coefficients(UncertaintyKind kind, const BonusParams& params,
                                     const Shape& shape, double radius) {
    params.validate();
    if (shape.states == 0 || shape.actions == 0 || shape.horizon == 0)
        throw DomainError("bonus needs positive S, A, H");
    if (!(radius >= 0.0)) throw DomainError("bonus needs a nonnegative radius");

    const double S = static_cast<double>(shape.states);
    const double A = static_cast<double>(shape.actions);
    const double H = static_cast<double>(shape.horizon);
    const double K = static_cast<double>(params.episodes);
    const double d = params.failure_prob;

    const double reward_term = std::sqrt(2.0 * std::log(3.0 * S * A * H * H * K / d));
    double transition_term = 0.0;
    switch (kind) {
    case UncertaintyKind::l1_sa:
        transition_term =
            H * std::sqrt(4.0 * S *
                          std::log(3.0 * S * A * H * H * std::pow(K, 1.5) * (4.0 + radius) / d));
        break;
    case UncertaintyKind::l1_s:
        transition_term =
            A * H *
            std::sqrt(4.0 * S * A *
                      std::log(3.0 * S * A * A * H * H * std::pow(K, 1.5) * (4.0 + radius) / d));
        break;
    case UncertaintyKind::kl:
        if (!(radius > 0.0)) throw DomainError("KL bonus needs a positive radius");
        if (!(params.kl_min_prob > 0.0 && params.kl_min_prob <= 1.0))
            throw DomainError("KL bonus needs a minimum nominal probability in (0, 1]");
        transition_term =
            2.0 * H / (radius * params.kl_min_prob) *
            std::sqrt(4.0 * S * std::log(8.0 * S * A * std::pow(H, 4) * K * K / (d * radius)));
        break;
    }
    return {params.scale * (reward_term + transition_term), params.scale / std::sqrt(K)};
}

double bonus_l1_sa(std::uint64_t visits, const BonusParams& params, const Shape& shape,
                   double radius) {
    return bonus_coefficients(UncertaintyKind::l1_sa, params, shape, radius).at(visits);
}

double bonus_l1_s(std::uint64_t visits, const BonusParams& params, const Shape& shape,
                  double radius) {
    return bonus_coefficients(UncertaintyKind::l1_s, params, shape, radius).at(visits);
}

double bonus_kl(std::uint64_t visits, const BonusParams& params, const Shape& shape,
                double radius) {
    return bonus_coefficients(UncertaintyKind::kl, params, shape, radius).at(visits);
}

} // namespace ropo
