#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mmab/theory.hpp"

using namespace mmab;

TEST(RegretBound, Examples) {
  EXPECT_NEAR(regret_upper_bound(GroupVector{1}, 50.0, 1.0), std::sqrt(50.0 * std::log(2.0)), 1e-13);
  EXPECT_EQ(regret_upper_bound(GroupVector{4, 2}, 0.0, 1.0), 0.0);
  EXPECT_NEAR(regret_upper_bound(GroupVector{3, 3}, 100.0, 1.0), 16.651092223153956, 1e-12);
  EXPECT_THROW(regret_upper_bound(GroupVector{2}, 10.0, 0.0), ParameterError);
}

TEST(Sigma0, Examples) {
  EXPECT_NEAR(solve_sigma0(0.1), 0.39471538755427462, 1e-12);
  EXPECT_NEAR(solve_sigma0(1e-6), 1.0 / std::sqrt(2.0 * M_PI), 1e-3);
  // The residual's slope in sigma is ~2.5e-6 here, so a 1e-13 residual pins sigma to ~4e-8.
  EXPECT_NEAR(solve_sigma0(1e-6), 0.39894228040101, 1e-7);
  EXPECT_THROW(solve_sigma0(0.125), ParameterError);
  EXPECT_THROW(solve_sigma0(0.0), ParameterError);
}

TEST(Sigma0, GridResidualAndInterval) {
  for (int i = 1; i <= 12; ++i) {
    const double eps = 0.01 * i;
    const double s = solve_sigma0(eps);
    EXPECT_GT(s, 1.0 / (2.0 * std::sqrt(2.0 * M_PI)));
    EXPECT_LT(s, 1.0 / std::sqrt(2.0 * M_PI));
    EXPECT_LE(std::abs(normal_cdf(eps / s) - 0.5 - eps), 1e-10);
  }
}

TEST(NormalCdf, KnownValues) {
  EXPECT_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_cdf(0.2533471031357997), 0.6, 1e-15);
  EXPECT_NEAR(normal_cdf(-1.959963984540054), 0.025, 1e-15);
}

TEST(KlGaussian, Examples) {
  EXPECT_EQ(kl_bound_gaussian(3, 0.1, 0.0, 0.39), 0.0);
  EXPECT_NEAR(kl_bound_gaussian(1, 0.1, 7.0, 0.39), 0.01 * 7.0 / (0.39 * 0.39), 1e-15);
  EXPECT_NEAR(kl_bound_gaussian(2, 0.1, 100.0, 0.394716), 5.7269382129, 1e-9);
  EXPECT_NEAR(kl_bound_gaussian(2, 0.1, 100.0, solve_sigma0(0.1)), 5.7269580984, 1e-9);
  // Large exponents stay finite.
  const double big = kl_bound_gaussian(5, 0.5, 1e6, 0.3);
  EXPECT_TRUE(std::isfinite(big));
  EXPECT_NEAR(big, 0.25 * 1e6 / 0.09 - std::log(5.0), 1e-6 * big);
  EXPECT_THROW(kl_bound_gaussian(0, 0.1, 1.0, 0.3), ParameterError);
}

TEST(KlGaussian, Monotonicity) {
  for (std::size_t m : {1, 2, 3, 5, 10}) {
    for (double eps : {0.02, 0.05, 0.1}) {
      for (double t = 1.0; t <= 200.0; t *= 2.0) {
        const double v = kl_bound_gaussian(m, eps, t, 0.39);
        EXPECT_LT(v, kl_bound_gaussian(m, eps, 2.0 * t, 0.39));
        EXPECT_LT(v, kl_bound_gaussian(m, eps * 1.5, t, 0.39));
        EXPECT_GT(v, kl_bound_gaussian(m + 1, eps, t, 0.39));
      }
    }
  }
}

TEST(KlBernoulli, Examples) {
  EXPECT_EQ(kl_bound_bernoulli(4, 0.1, 0.0), 0.0);
  EXPECT_NEAR(kl_bound_bernoulli(2, 0.1, 3.0), 0.0605606197683, 1e-12);
  EXPECT_NEAR(kl_bound_bernoulli(1, 0.1, 1.0), 0.0392207131533, 1e-12);
}

TEST(KlExact, Examples) {
  EXPECT_EQ(kl_exact_bruteforce(3, 0.1, 0), 0.0);
  EXPECT_NEAR(kl_exact_bruteforce(1, 0.1, 1), 0.4 * std::log(0.8) + 0.6 * std::log(1.2), 1e-15);
  EXPECT_NEAR(kl_exact_bruteforce(1, 0.1, 1), 0.0201355135506889, 1e-15);
  EXPECT_LE(kl_exact_bruteforce(2, 0.1, 3), kl_bound_bernoulli(2, 0.1, 3.0));
  EXPECT_THROW(kl_exact_bruteforce(3, 0.1, 7), ParameterError);
  EXPECT_NO_THROW(kl_exact_bruteforce(4, 0.1, 5));
}

TEST(KlExact, SingleArmIsProductKl) {
  // With m = 1 the mixture is the alternative itself: t * KL(Ber(1/2 - eps) || Ber(1/2)).
  for (std::size_t t = 1; t <= 10; ++t) {
    const double eps = 0.15;
    const double one = (0.5 - eps) * std::log(1.0 - 2.0 * eps) + (0.5 + eps) * std::log(1.0 + 2.0 * eps);
    EXPECT_NEAR(kl_exact_bruteforce(1, eps, t), t * one, 1e-13);
  }
}

TEST(KlExact, BoundDominatesOnGrid) {
  for (std::size_t m : {2, 3})
    for (std::size_t t = 1; t <= 5; ++t)
      for (double eps : {0.05, 0.1}) {
        EXPECT_LE(kl_exact_bruteforce(m, eps, t), kl_bound_bernoulli(m, eps, static_cast<double>(t)) + 1e-12)
            << "m=" << m << " t=" << t << " eps=" << eps;
      }
}

TEST(Thresholds, Examples) {
  EXPECT_NEAR(t_star_threshold(1, 1.0, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(t_star_threshold(3, 0.05, 0.2) / t_star_threshold(3, 0.2, 0.2), 16.0, 1e-12);
  EXPECT_NEAR(weakly_lb_value({4, 4}, {1.0, 1.0}, 1000.0, 1.0), 200.0, 1e-10);
  EXPECT_NEAR(weakly_lb_value({2}, {4.0}, 8.0, 1.0), 4.0 * std::cbrt(std::log(2.0)), 1e-12);
  EXPECT_THROW(weakly_lb_value({4}, {1.0, 1.0}, 10.0, 1.0), ShapeError);
}

TEST(Ode, ZeroLossIsExact) {
  auto s = init(GroupVector{2, 3}, 100);
  const auto r = ode_consistency_check(s, 1, std::vector<double>{0.0, 0.0, 0.0});
  EXPECT_EQ(r.max_deviation, 0.0);
}

TEST(Ode, WorkedExample) {
  auto s = init(GroupVector{2, 2}, 100, LearningRates{0.1, {0.2, 0.2}});
  const auto r = ode_consistency_check(s, 0, std::vector<double>{2.0, 2.0});
  EXPECT_LE(r.max_deviation, 1e-6);
  EXPECT_NEAR(r.y_end[0], 0.40105717385231396, 1e-6);
  EXPECT_EQ(r.y_end[1], 0.5);
}

TEST(Ode, SingleGroupPreProjection) {
  auto s = init(GroupVector{4}, 100);
  const std::vector<double> est{0.3, 0.9, 0.0, 1.0};
  const auto r = ode_consistency_check(s, 0, est);
  EXPECT_LE(r.max_deviation, 1e-6);
  EXPECT_LT(r.y_end[0], 1.0);
  EXPECT_EQ(y_update(s, 0, est)[0], 1.0);
}

TEST(Ode, RandomStates) {
  Rng rng(14);
  for (const GroupVector& g : {GroupVector{2, 2}, GroupVector{3, 1}}) {
    for (int rep = 0; rep < 10; ++rep) {
      auto s = init(g, 1000);
      std::vector<double> w(g.groups());
      for (auto& v : w) v = 0.05 + uniform01(rng);
      s.y = SimplexDist::normalized(w);
      const std::size_t k = rng() % g.groups();
      std::vector<double> est(g.size(k));
      for (auto& e : est) e = (uniform01(rng) < 0.5 ? 1.0 : 0.0) / s.y[k];
      ASSERT_LE(ode_consistency_check(s, k, est).max_deviation, 1e-6);
    }
  }
}
