#include "able/metrics.hpp"

#include <algorithm>
#include <bitset>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"

namespace able {
namespace {

TEST(Fidelity, WorkedExamples) {
  const std::vector<double> f{0.2, 0.4, 0.6, 0.8};
  EXPECT_NEAR(fidelity_r2(f, f), 1.0, 1e-15);
  const std::vector<double> mean(4, 0.5);
  EXPECT_NEAR(fidelity_r2(f, mean), 0.0, 1e-15);
  const std::vector<double> g{0.3, 0.4, 0.5, 0.9};
  EXPECT_NEAR(fidelity_r2(f, g), 0.85, 1e-12);
  const FidelityReport r = fidelity_report(f, g);
  EXPECT_EQ(r.n_eval, 4u);
  EXPECT_NEAR(r.target_mean, 0.5, 1e-15);
}

TEST(Fidelity, NeverAboveOneAndCanBeNegative) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> f(10), g(10);
    for (auto& v : f) v = u(rng);
    for (auto& v : g) v = u(rng);
    EXPECT_LE(fidelity_r2(f, g), 1.0);
  }
  EXPECT_LT(fidelity_r2(std::vector<double>{0, 1}, std::vector<double>{1, 0}), 0.0);
}

TEST(Fidelity, Preconditions) {
  const std::vector<double> flat(5, 0.3);
  EXPECT_THROW(fidelity_r2(flat, flat), DegenerateNeighborhood);
  try {
    fidelity_r2(flat, flat);
  } catch (const DegenerateNeighborhood& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate"), std::string::npos) << e.what();
  }
  EXPECT_THROW(fidelity_r2(std::vector<double>{1.0}, std::vector<double>{1.0}), PreconditionError);
  EXPECT_THROW(fidelity_r2(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), PreconditionError);
}

TEST(Jaccard, WorkedExamples) {
  const std::vector<Eigen::Index> a{1, 2, 3, 4, 5}, b{1, 2, 3, 4, 6}, c{6, 7, 8, 9, 10};
  EXPECT_DOUBLE_EQ(jaccard_top_k(a, a), 1.0);
  EXPECT_DOUBLE_EQ(jaccard_top_k(a, c), 0.0);
  EXPECT_DOUBLE_EQ(jaccard_top_k(a, b), 4.0 / 6.0);
  EXPECT_THROW(jaccard_top_k(a, std::vector<Eigen::Index>{}), PreconditionError);
  EXPECT_THROW(jaccard_top_k(std::vector<Eigen::Index>{}, a), PreconditionError);
}

TEST(Jaccard, MatchesBitsetOracleAndIsSymmetric) {
  Rng rng(99);
  std::uniform_int_distribution<int> size(1, 8), index(0, 15);
  for (int t = 0; t < 1000; ++t) {
    std::vector<Eigen::Index> a(static_cast<std::size_t>(size(rng))), b(static_cast<std::size_t>(size(rng)));
    std::bitset<16> ba, bb;
    for (auto& v : a) ba.set(static_cast<std::size_t>(v = index(rng)));
    for (auto& v : b) bb.set(static_cast<std::size_t>(v = index(rng)));
    const double oracle = static_cast<double>((ba & bb).count()) / static_cast<double>((ba | bb).count());
    EXPECT_NEAR(jaccard_top_k(a, b), oracle, 1e-12);
    EXPECT_EQ(jaccard_top_k(a, b), jaccard_top_k(b, a));
  }
}

TEST(Stability, ZeroRadiusIsPerfect) {
  const auto& f = testing::moons();
  AbleConfig cfg;
  const AbleExplainer ex(cfg);
  const StabilityReport s = stability_eval(ex, f.bundle.model, testing::test_row(f, 0), 5, 0.0, 3);
  EXPECT_DOUBLE_EQ(s.jaccard, 1.0);
  EXPECT_EQ(s.k, 5u);
  EXPECT_EQ(s.features_original.size(), 5u);
}

TEST(Stability, LinearTargetIsPerfectForSmallRadii) {
  const Vector w = testing::vec({2.0, -1.0, 0.5, 0.0, 0.05, 1.2});
  const auto m = testing::linear_binary(w, 0.0);
  LimeConfig cfg;
  cfg.top_k = 3;
  const LimeExplainer lime(cfg);
  const Vector x = Vector::Constant(6, 0.01);
  for (double radius : {0.05, 0.1, 0.2}) {
    const StabilityReport s = stability_eval(lime, m, x, 3, radius, 1);
    EXPECT_DOUBLE_EQ(s.jaccard, 1.0) << radius;
  }
}

TEST(Stability, PerturbationRespectsTheRadius) {
  const Vector x = Vector::Zero(4);
  for (std::uint64_t s = 0; s < 50; ++s) EXPECT_LE(stability_perturbation(x, 0.1, s).norm(), 0.1 + 1e-12);
  EXPECT_EQ(stability_perturbation(x, 0.1, 3), stability_perturbation(x, 0.1, 3));
}

TEST(Stability, RejectsOversizedK) {
  const auto m = testing::linear_binary(testing::vec({1, 1}), 0.0);
  const LimeExplainer lime{LimeConfig{}};
  EXPECT_THROW(stability_eval(lime, m, testing::vec({0, 0}), 3, 0.1, 0), PreconditionError);
}

TEST(Timed, NoOpIsFast) {
  const double ms = timed([] {});
  EXPECT_GE(ms, 0.0);
  EXPECT_LT(ms, 1.0);
  const auto [value, ms2] = timed([] { return 42; });
  EXPECT_EQ(value, 42);
  EXPECT_LT(ms2, 1.0);
}

}  // namespace
}  // namespace able
