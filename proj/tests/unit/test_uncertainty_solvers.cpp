#include "ropo/uncertainty_solvers.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace ropo;
using namespace testing_support;

namespace {

const std::vector<double> kHalf{0.5, 0.5};
const std::vector<double> kZeroOne{0.0, 1.0};

} // namespace

TEST_CASE("l1_sa: two-point example") {
    // Moving rho/2 = 0.25 of the mass onto the low state gives 0.25 * 1.
    const auto r = sigma_l1_sa({kHalf, kZeroOne, 0.5});
    CHECK(r.sigma == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(sigma_l1_sa_oracle({kHalf, kZeroOne, 0.5}) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(r.dual_point.size() == 1);
}

TEST_CASE("l1_sa: radius extremes") {
    std::mt19937_64 gen(7);
    for (int i = 0; i < 50; ++i) {
        const auto p = random_distribution(gen, 6);
        const auto v = random_values(gen, 6, -3.0, 5.0);
        CHECK(sigma_l1_sa({p, v, 0.0}).sigma == doctest::Approx(dot(p, v)).epsilon(1e-12));
        CHECK(sigma_l1_sa({p, v, 2.0}).sigma ==
              doctest::Approx(*std::min_element(v.begin(), v.end())).epsilon(1e-12));
    }
}

TEST_CASE("l1_sa: dual matches simplex grid search") {
    std::mt19937_64 gen(11);
    for (int i = 0; i < 40; ++i) {
        const std::size_t n = 2 + i % 2;
        const auto p = random_distribution(gen, n, 0.05);
        const auto v = random_values(gen, n, 0.0, 1.0);
        const double rho = std::uniform_real_distribution<double>(0.0, 2.0)(gen);
        const double grid = l1_grid_search(p, v, rho, 600);
        const double sigma = sigma_l1_sa({p, v, rho}).sigma;
        CHECK(sigma <= grid + 1e-9);
        CHECK(sigma >= grid - 5e-3);
    }
}

TEST_CASE("l1_sa: dual objective at the reported point equals -sigma") {
    std::mt19937_64 gen(3);
    for (int i = 0; i < 100; ++i) {
        const auto p = random_distribution(gen, 5);
        const auto v = random_values(gen, 5, -2.0, 2.0);
        const double rho = 0.3 + 0.01 * i;
        const auto r = sigma_l1_sa({p, v, rho});
        CHECK(-l1_sa_dual_objective(p, v, rho, r.dual_point[0]) == doctest::Approx(r.sigma).epsilon(1e-12));
        // and no grid point does better
        for (double eta = -2.0; eta <= 2.0; eta += 0.05)
            CHECK(l1_sa_dual_objective(p, v, rho, eta) >= -r.sigma - 1e-12);
    }
}

TEST_CASE("worst_case_l1 stays in the ball and attains sigma") {
    std::mt19937_64 gen(5);
    for (int i = 0; i < 200; ++i) {
        const auto p = random_distribution(gen, 7);
        const auto v = random_values(gen, 7, 0.0, 10.0);
        const double rho = 2.0 * i / 199.0;
        const auto q = worst_case_l1(p, v, rho);
        double dist = 0.0, mass = 0.0;
        for (std::size_t s = 0; s < q.size(); ++s) {
            CHECK(q[s] >= 0.0);
            dist += std::abs(q[s] - p[s]);
            mass += q[s];
        }
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(dist <= rho + 1e-12);
        CHECK(dot(q, v) == doctest::Approx(sigma_l1_sa({p, v, rho}).sigma).epsilon(1e-9));
    }
}

TEST_CASE("l1_sa: ties go to the lowest index") {
    const std::vector<double> p{0.25, 0.25, 0.5};
    const std::vector<double> v{1.0, 1.0, 3.0};
    const auto q = worst_case_l1(p, v, 0.4);
    CHECK(q[0] == doctest::Approx(0.45));
    CHECK(q[1] == doctest::Approx(0.25));
    CHECK(q[2] == doctest::Approx(0.3));
}

TEST_CASE("l1_s: two-state two-action example") {
    // Budget A*rho = 0.6 all spent on the queried row: 0.3 of mass moves to V = 0.
    // Cross-checked against a linear program over both rows and their joint budget.
    const std::vector<double> block{0.5, 0.5, 0.3, 0.7};
    const InnerProblem problem{block, kZeroOne, 0.3, 2, 0};
    CHECK(sigma_l1_s(problem).sigma == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(sigma_l1_s_oracle(problem) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("l1_s: level set and subgradient agree with the oracle") {
    std::mt19937_64 gen(13);
    for (int i = 0; i < 60; ++i) {
        const std::size_t S = 2 + i % 5;
        const std::size_t A = 1 + i % 4;
        std::vector<double> block;
        for (std::size_t a = 0; a < A; ++a) {
            const auto row = random_distribution(gen, S);
            block.insert(block.end(), row.begin(), row.end());
        }
        const auto v = random_values(gen, S, -1.0, 4.0);
        const double rho = std::uniform_real_distribution<double>(0.0, 2.0 / A)(gen);
        const InnerProblem problem{block, v, rho, A, i % A};
        const double oracle = sigma_l1_s_oracle(problem);
        const auto exact = sigma_l1_s(problem);
        CHECK(exact.sigma == doctest::Approx(oracle).epsilon(1e-10));
        CHECK(-l1_s_dual_objective(problem, exact.dual_point) == doctest::Approx(exact.sigma).epsilon(1e-10));

        L1sOptions sub;
        sub.method = L1sMethod::subgradient;
        const auto approx = sigma_l1_s(problem, sub);
        // any dual point gives a lower bound on sigma
        CHECK(approx.sigma <= oracle + 1e-9);
        CHECK(approx.sigma >= oracle - 0.05);
        CHECK(approx.iterations <= sub.max_iterations);
    }
}

TEST_CASE("l1_s: subgradient warm start at the optimum stops early") {
    const std::vector<double> block{0.2, 0.3, 0.5, 0.6, 0.2, 0.2};
    const std::vector<double> v{0.0, 2.0, 5.0};
    const InnerProblem problem{block, v, 0.4, 2, 1};
    const auto exact = sigma_l1_s(problem);
    L1sOptions sub;
    sub.method = L1sMethod::subgradient;
    sub.warm_start = exact.dual_point;
    const auto warm = sigma_l1_s(problem, sub);
    CHECK(warm.sigma == doctest::Approx(exact.sigma).epsilon(1e-12));
    CHECK(warm.iterations <= 60);
}

TEST_CASE("kl: two-point example and the lambda = 0 limit") {
    // sigma = -min_lambda [0.1 lambda + lambda log((1 + e^{-1/lambda})/2)], solved to 40 digits.
    const auto r = sigma_kl({kHalf, kZeroOne, 0.1});
    CHECK(r.sigma == doctest::Approx(0.28020537383859027).epsilon(1e-11));
    CHECK(r.dual_point[0] == doctest::Approx(1.0599473157).epsilon(1e-6));
    CHECK(kl_dual_objective(kHalf, kZeroOne, 0.1, 0.0) == 0.0);

    // A radius beyond -log p(argmin) lets the adversary put all mass on min V.
    const std::vector<double> p{0.9, 0.1};
    const std::vector<double> v{3.0, -2.0};
    CHECK(sigma_kl({p, v, 5.0}).sigma == -2.0);
}

TEST_CASE("kl: matches the independent dual oracle") {
    std::mt19937_64 gen(17);
    for (int i = 0; i < 200; ++i) {
        const std::size_t n = 2 + i % 7;
        const auto p = random_distribution(gen, n);
        const auto v = random_values(gen, n, 0.0, 20.0);
        const double rho = std::exp(std::uniform_real_distribution<double>(-5.0, 1.5)(gen));
        CHECK(sigma_kl({p, v, rho}).sigma == doctest::Approx(kl_oracle(p, v, rho)).epsilon(1e-8));
    }
}

TEST_CASE("dispatch: nominal radius, support compression, single support") {
    const std::vector<double> p{0.0, 0.5, 0.5, 0.0};
    const std::vector<double> v{-10.0, 0.0, 1.0, -10.0};
    CHECK(sigma_dispatch({UncertaintyKind::l1_sa, 0.0}, {p, v, 0.0}) == doctest::Approx(0.5));
    CHECK(sigma_dispatch({UncertaintyKind::l1_sa, 0.5}, {p, v, 0.5}) == doctest::Approx(0.25));
    CHECK(sigma_dispatch({UncertaintyKind::kl, 0.1}, {p, v, 0.1}) ==
          doctest::Approx(0.28020537383859027).epsilon(1e-11));

    const std::vector<double> point{0.0, 1.0, 0.0};
    const std::vector<double> w{5.0, 2.0, -1.0};
    for (auto kind : {UncertaintyKind::l1_sa, UncertaintyKind::l1_s, UncertaintyKind::kl})
        CHECK(sigma_dispatch({kind, 0.7}, {point, w, 0.7}) == 2.0);

    // s-rectangular block whose other row lives elsewhere
    const std::vector<double> block{0.0, 0.5, 0.5, 0.0, 0.7, 0.0, 0.0, 0.3};
    const InnerProblem s_problem{block, v, 0.25, 2, 0};
    CHECK(sigma_dispatch({UncertaintyKind::l1_s, 0.25}, s_problem) == doctest::Approx(0.25));
}

TEST_CASE("invalid inputs are rejected") {
    const std::vector<double> bad_sum{0.5, 0.6};
    const std::vector<double> zero{1.0, 0.0};
    CHECK_THROWS_AS(sigma_l1_sa({bad_sum, kZeroOne, 0.5}), DomainError);
    CHECK_THROWS_AS(sigma_l1_sa({zero, kZeroOne, 0.5}), DomainError);
    CHECK_THROWS_AS(sigma_l1_sa({kHalf, kZeroOne, -0.1}), DomainError);
    CHECK_THROWS_AS(sigma_l1_sa({kHalf, kZeroOne, 2.5}), DomainError);
    CHECK_THROWS_AS(sigma_kl({kHalf, kZeroOne, 0.0}), DomainError);
    CHECK_THROWS_AS(sigma_kl({zero, kZeroOne, 0.1}), DomainError);
    const std::vector<double> short_v{1.0};
    CHECK_THROWS_AS(sigma_l1_sa({kHalf, short_v, 0.5}), DomainError);
    const std::vector<double> block{0.5, 0.5, 0.3, 0.7};
    CHECK_THROWS_AS(sigma_l1_s({block, kZeroOne, 0.3, 2, 2}), DomainError);
    CHECK_THROWS_AS(sigma_dispatch({UncertaintyKind::l1_sa, 0.5}, {bad_sum, kZeroOne, 0.5}), DomainError);
}

TEST_CASE("sigma properties on small random cases") {
    std::mt19937_64 gen(23);
    for (auto kind : {UncertaintyKind::l1_sa, UncertaintyKind::kl}) {
        for (int i = 0; i < 100; ++i) {
            const auto p = random_distribution(gen, 5);
            const auto v = random_values(gen, 5, 0.0, 10.0);
            const double rho = kind == UncertaintyKind::kl ? 0.05 + 0.01 * i : 0.02 * i / 1.01;
            const UncertaintySet set{kind, rho};
            const double sigma = sigma_dispatch(set, {p, v, rho});
            CHECK(sigma >= *std::min_element(v.begin(), v.end()) - 1e-9);
            CHECK(sigma <= dot(p, v) + 1e-9);
            auto shifted = v;
            for (double& x : shifted) x += 3.5;
            CHECK(sigma_dispatch(set, {p, shifted, rho}) == doctest::Approx(sigma + 3.5).epsilon(1e-9));
        }
    }
}
