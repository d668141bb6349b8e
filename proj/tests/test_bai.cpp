#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mmab/bai.hpp"

using namespace mmab;

TEST(Budget, TheoreticalTStar) {
  EXPECT_EQ(theoretical_T_star(GroupVector{2, 2}, 0.1, 1.0), 1'373'265'361u);
  EXPECT_EQ(theoretical_T_star(GroupVector{1}, 0.999999, 1.0 / 2500.0), 1u);
  // Doubling eps quarters the pre-ceiling value.
  const GroupVector g{3, 5, 1};
  const double a = static_cast<double>(theoretical_T_star(g, 0.05, 0.01));
  const double b = static_cast<double>(theoretical_T_star(g, 0.10, 0.01));
  EXPECT_NEAR(a / b, 4.0, 4.0 / b);
  EXPECT_THROW(theoretical_T_star(g, 1.0, 1.0), ParameterError);
  EXPECT_THROW(theoretical_T_star(g, 0.1, 0.0), ParameterError);
}

TEST(Budget, ScalingInvariance) {
  const GroupVector g{4, 4};
  const double c = 0.002;
  const double scale = 2500.0 * c;
  for (double eps : {0.05, 0.1, 0.2, 0.4}) {
    const double exact = scale * scale * g.log_size_sum() / (eps * eps);
    const auto t = theoretical_T_star(g, eps, c);
    EXPECT_GE(static_cast<double>(t), exact);
    EXPECT_LT(static_cast<double>(t), exact + 1.0);
  }
}

TEST(Budget, Calibrated) {
  const GroupVector g{4, 4};
  const double s = g.log_size_sum();
  EXPECT_EQ(calibrated_budget(g, 0.15, 0.5, 0.05, 2.0),
            static_cast<std::uint64_t>(std::ceil(2.0 * std::pow(0.5 / (0.05 * 0.15), 2) * s)));
  PacConfig cfg;
  cfg.eps = 0.15;
  cfg.regret_constant = 0.5;
  EXPECT_EQ(pac_budget(g, cfg), calibrated_budget(g, 0.15, 0.5));
  cfg.mode = BudgetMode::kTheoretical;
  EXPECT_EQ(pac_budget(g, cfg), theoretical_T_star(g, 0.15, 0.5));
  cfg.eps = 1.5;
  EXPECT_THROW(pac_budget(g, cfg), ParameterError);
}

TEST(Budget, Hoeffding) {
  EXPECT_EQ(hoeffding_rounds(0.1, 0.025), 738u);
  EXPECT_EQ(hoeffding_rounds(0.3, 1.0), 0u);
  EXPECT_EQ(hoeffding_rounds(1.0, std::exp(-1.0)), 2u);
  EXPECT_THROW(hoeffding_rounds(0.0, 0.1), ParameterError);
}

TEST(PullCountsTest, Bookkeeping) {
  const GroupVector g{2, 3};
  PullCounts c(g);
  c.record(g.unflatten(4), 4);
  c.record(g.unflatten(4), 4);
  c.record(g.unflatten(0), 0);
  EXPECT_TRUE(c.consistent(g));
  EXPECT_EQ(c.total, 3u);
  EXPECT_EQ(c.observations(g, 2), 2u);
  EXPECT_EQ(c.observations(g, 1), 1u);
  c.per_arm[1] = 7;
  EXPECT_FALSE(c.consistent(g));
}

TEST(Pac, SingleArm) {
  const auto inst = make_h0(1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Streams st(seed);
    EXPECT_EQ(run_pac(inst, 10, st).selected, 0u);
  }
}

TEST(Pac, FindsZeroLossArm) {
  const GroupVector g{3, 3};
  std::vector<double> means(6, 1.0);
  means[4] = 0.0;
  const auto inst = make_bernoulli(g, means);
  // P(wrong output) is the expected fraction of pulls on loss-1 arms, about
  // 1.4 sqrt(S / T) with the default rates; 2^18 rounds puts it near 0.005.
  const std::uint64_t budget = 1u << 18;
  int hits = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    Streams st(trial_seed(31, t));
    const auto run = run_pac(inst, budget, st);
    ASSERT_TRUE(run.counts.consistent(g));
    ASSERT_EQ(run.counts.total, budget);
    hits += run.selected == 4 ? 1 : 0;
  }
  EXPECT_GE(static_cast<double>(hits) / trials, 0.99);
}

TEST(Pac, RejectsUnboundedAndZeroBudget) {
  Streams st(1);
  EXPECT_THROW(run_pac(make_gaussian_nj(2, 1, 0.1, 0.39), 10, st), ParameterError);
  EXPECT_THROW(run_pac(make_h0(2), 0, st), ParameterError);
}

TEST(Pac, OutputMatchesPullFrequencies) {
  const auto inst = make_block_hj(GroupVector{2, 2}, 1, 0.2);
  Streams st(5);
  const auto run = run_pac(inst, 400, st);
  Rng aux(6);
  const int draws = 200'000;
  std::vector<int> hits(4, 0);
  for (int i = 0; i < draws; ++i) ++hits[sample_from_counts(run.counts, aux)];
  for (std::size_t i = 0; i < 4; ++i) {
    const double p = static_cast<double>(run.counts.per_arm[i]) / static_cast<double>(run.counts.total);
    EXPECT_NEAR(static_cast<double>(hits[i]) / draws, p, 3.0 * std::sqrt(p * (1 - p) / draws) + 1e-12);
  }
}

TEST(Pac, DeterministicPerSeed) {
  const auto inst = make_block_hj(GroupVector{4, 4}, 6, 0.15);
  Streams a(trial_seed(9, 3)), b(trial_seed(9, 3));
  const auto ra = run_pac(inst, 2000, a);
  const auto rb = run_pac(inst, 2000, b);
  EXPECT_EQ(ra.selected, rb.selected);
  EXPECT_EQ(ra.counts.per_arm, rb.counts.per_arm);
  EXPECT_EQ(ra.pseudo_regret, rb.pseudo_regret);
}

TEST(Distinguisher, RequiresSingleGroup) {
  Streams st(1);
  EXPECT_THROW(distinguisher(make_block_h0(GroupVector{2, 2}), 0.1, 10, st), ParameterError);
}

TEST(Distinguisher, ThresholdRule) {
  // Deterministic coins make the empirical mean exact.
  const auto all_one = make_bernoulli(GroupVector{3}, {1.0, 1.0, 1.0});
  Streams a(2);
  const auto r0 = distinguisher(all_one, 0.1, 50, a);
  EXPECT_EQ(r0.hypothesis, 0u);
  EXPECT_EQ(r0.extra_rounds, 738u);
  const auto one_zero = make_bernoulli(GroupVector{3}, {1.0, 0.0, 1.0});
  Streams b(3);
  const auto r1 = distinguisher(one_zero, 0.1, 300, b);
  EXPECT_EQ(r1.hypothesis, r1.pac_arm + 1);
  EXPECT_EQ(r1.pac_arm, 1u);
  EXPECT_EQ(r1.empirical_mean, 0.0);
}
