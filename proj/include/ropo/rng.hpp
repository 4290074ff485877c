#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace ropo {

/// Purposes used to carve independent substreams out of one experiment seed.
enum class StreamPurpose : std::uint64_t {
    training = 1,
    evaluation = 2,
    testing = 3,
};

/**
 * Counter-based generator (SplitMix64 output function over a keyed counter).
 *
 * Each stream is identified by a 64-bit key; the n-th draw is mix(key + n * gamma),
 * so streams derived from (seed, episode, purpose) never interact and adding draws
 * to one stream leaves every other stream untouched. Satisfies
 * UniformRandomBitGenerator, but the sampling helpers below are preferred because
 * their output does not depend on the standard library implementation.
 */
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t key) : key_(mix(key)) {}

    static Rng derive(std::uint64_t seed, std::uint64_t episode, StreamPurpose purpose);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix(key_ + (++counter_) * kGamma); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Index drawn from an (unnormalised is fine) nonnegative weight vector.
    std::size_t categorical(std::span<const double> weights);

    std::uint64_t draws() const { return counter_; }

    static std::uint64_t mix(std::uint64_t z);

private:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace ropo
