#include "ropo/rng.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

using namespace ropo;

TEST_CASE("splitmix reference outputs") {
    // SplitMix64 finaliser from state 0: the first output of the reference generator.
    CHECK(Rng::mix(0) == 0xe220a8397b1dcdafULL);
}

TEST_CASE("streams are reproducible and independent of other streams") {
    Rng a = Rng::derive(42, 7, StreamPurpose::training);
    Rng b = Rng::derive(42, 7, StreamPurpose::training);
    for (int i = 0; i < 100; ++i) CHECK(a() == b());

    // draining an evaluation stream leaves the training stream untouched
    Rng eval = Rng::derive(42, 7, StreamPurpose::evaluation);
    for (int i = 0; i < 1000; ++i) eval();
    Rng c = Rng::derive(42, 7, StreamPurpose::training);
    Rng d = Rng::derive(42, 7, StreamPurpose::training);
    CHECK(c() == d());

    CHECK(Rng::derive(42, 7, StreamPurpose::training)() != Rng::derive(42, 8, StreamPurpose::training)());
    CHECK(Rng::derive(42, 7, StreamPurpose::training)() != Rng::derive(43, 7, StreamPurpose::training)());
    CHECK(Rng::derive(42, 7, StreamPurpose::training)() != Rng::derive(42, 7, StreamPurpose::testing)());
}

TEST_CASE("uniform lies in [0, 1) and has the right mean") {
    Rng rng(1);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 0.005);
    CHECK(rng.draws() == static_cast<std::uint64_t>(n));
}

TEST_CASE("categorical frequencies and zero weights") {
    Rng rng(9);
    const std::array<double, 4> w{0.1, 0.0, 0.6, 0.3};
    std::array<int, 4> counts{};
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[rng.categorical(w)];
    CHECK(counts[1] == 0);
    CHECK(std::abs(counts[0] / double(n) - 0.1) < 0.01);
    CHECK(std::abs(counts[2] / double(n) - 0.6) < 0.01);
    CHECK(std::abs(counts[3] / double(n) - 0.3) < 0.01);

    const std::array<double, 3> point{0.0, 0.0, 1.0};
    for (int i = 0; i < 100; ++i) CHECK(rng.categorical(point) == 2);
}
