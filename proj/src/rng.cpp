#include "ropo/rng.hpp"

namespace ropo {

std::uint64_t Rng::mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Rng Rng::derive(std::uint64_t seed, std::uint64_t episode, StreamPurpose purpose) {
    std::uint64_t key = mix(seed);
    key = mix(key ^ (episode * 0xd1b54a32d192ed03ULL));
    key = mix(key ^ static_cast<std::uint64_t>(purpose));
    return Rng(key);
}

std::size_t Rng::categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    const double u = uniform() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        acc += weights[i];
        last_positive = i;
        if (u < acc) return i;
    }
    // rounding left u at or above the accumulated total
    return last_positive;
}

} // namespace ropo
