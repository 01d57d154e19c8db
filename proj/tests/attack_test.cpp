#include "able/attack.hpp"

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"

namespace able {
namespace {

using testing::linear_binary;
using testing::vec;

AttackConfig config(AttackKind kind) {
  AttackConfig cfg;
  cfg.kind = kind;
  return cfg;
}

// Three classes whose logits are x0, x1 and 0.
MlpClassifier three_class_linear() {
  Matrix w = Matrix::Zero(3, 2);
  w(0, 0) = 1.0;
  w(1, 1) = 1.0;
  return testing::linear_softmax(w, Vector::Zero(3));
}

TEST(AttackKind, NamesRoundTrip) {
  for (AttackKind k : {AttackKind::kFgsm, AttackKind::kPgd, AttackKind::kDeepFool, AttackKind::kHopSkipJump}) {
    EXPECT_EQ(attack_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(attack_kind_from_string("CW"), PreconditionError);
  EXPECT_FALSE(is_white_box(AttackKind::kHopSkipJump));
}

TEST(AttackConfig, Validation) {
  AttackConfig cfg;
  cfg.epsilon0 = 20.0;
  EXPECT_THROW(cfg.validate(), PreconditionError);
  cfg = AttackConfig{};
  cfg.pgd_steps = 0;
  EXPECT_THROW(cfg.validate(), PreconditionError);
}

TEST(Fgsm, EscalatesUntilTheBoundaryIsCrossed) {
  // Class 1 iff 3 x0 > 0. Stepping x0 down by eps reaches a tie at eps = 0.5,
  // and ties resolve to class 0, so 0.5 already flips.
  const auto m = linear_binary(vec({3, 0}), 0);
  const auto r = fgsm_attack(m, vec({0.5, 0.1}), std::nullopt, config(AttackKind::kFgsm));
  EXPECT_EQ(r.label_before, 1);
  EXPECT_EQ(r.label_after, 0);
  EXPECT_DOUBLE_EQ(r.epsilon_used, 0.5);
  EXPECT_EQ(r.escalations, 4);
  EXPECT_DOUBLE_EQ(r.x_perturbed(0), 0.0);
  EXPECT_DOUBLE_EQ(r.x_perturbed(1), 0.1);  // zero gradient component stays put
  EXPECT_EQ(r.gradient_calls, 1u);
}

TEST(Fgsm, StrictCrossingNeedsOneMoreStep) {
  const auto m = linear_binary(vec({3, 0}), 0);
  const auto r = fgsm_attack(m, vec({0.52, 0.1}), std::nullopt, config(AttackKind::kFgsm));
  EXPECT_NEAR(r.epsilon_used, 0.6, 1e-12);
  EXPECT_NEAR(r.x_perturbed(0), -0.08, 1e-12);
  EXPECT_EQ(m.predict_label(r.x_perturbed), 0);
}

TEST(Fgsm, FirstBudgetSucceeds) {
  const auto m = linear_binary(vec({3, 0}), 0);
  const auto r = fgsm_attack(m, vec({0.05, 0.0}), std::nullopt, config(AttackKind::kFgsm));
  EXPECT_EQ(r.epsilon_used, 0.1);
  EXPECT_EQ(r.gradient_calls, 1u);
  EXPECT_EQ(r.escalations, 0);
  EXPECT_EQ(r.queries, 2u);
}

TEST(Fgsm, ZeroGradientFails) {
  const auto m = testing::linear_softmax(Matrix::Zero(2, 2), Vector::Zero(2));
  try {
    fgsm_attack(m, vec({1, 1}), std::nullopt, config(AttackKind::kFgsm));
    FAIL() << "expected AttackFailed";
  } catch (const AttackFailed& e) {
    EXPECT_EQ(e.gradient_calls(), 1u);
    EXPECT_EQ(e.queries(), 101u);  // initial label + 100 budgets
  }
}

TEST(Fgsm, Targeted) {
  const auto m = three_class_linear();
  const Vector x = vec({1.0, 0.5});  // class 0
  const auto r = fgsm_attack(m, x, 1, config(AttackKind::kFgsm));
  EXPECT_EQ(r.label_after, 1);
  EXPECT_EQ(m.predict_label(r.x_perturbed), 1);
}

TEST(Pgd, IteratesStayInTheBall) {
  const auto& f = testing::moons();
  AttackConfig cfg = config(AttackKind::kPgd);
  for (Eigen::Index i = 0; i < 10; ++i) {
    const Vector x = testing::test_row(f, i);
    std::vector<Vector> iterates;
    const auto r = pgd_attack(f.bundle.model, x, std::nullopt, cfg, [&](const Vector& p) { iterates.push_back(p); });
    ASSERT_FALSE(iterates.empty());
    for (const auto& p : iterates) EXPECT_LE((p - x).cwiseAbs().maxCoeff(), r.epsilon_used + 1e-9);
    EXPECT_NE(f.bundle.model.predict_label(r.x_perturbed), r.label_before);
  }
}

TEST(Pgd, SingleFullStepIsFgsm) {
  const auto& f = testing::moons();
  AttackConfig pgd = config(AttackKind::kPgd);
  pgd.pgd_steps = 1;
  pgd.pgd_alpha_fraction = 1.0;
  for (Eigen::Index i = 0; i < 10; ++i) {
    const Vector x = testing::test_row(f, i);
    const auto a = pgd_attack(f.bundle.model, x, std::nullopt, pgd);
    const auto b = fgsm_attack(f.bundle.model, x, std::nullopt, config(AttackKind::kFgsm));
    EXPECT_EQ(a.x_perturbed, b.x_perturbed);
    EXPECT_EQ(a.epsilon_used, b.epsilon_used);
  }
}

TEST(Pgd, NeverNeedsMoreBudgetThanFgsmOnALinearModel) {
  const auto m = linear_binary(vec({3, -1, 0.5}), 0.2);
  Rng rng(4);
  for (int i = 0; i < 30; ++i) {
    const Vector x = testing::random_point(rng, 3);
    const auto a = pgd_attack(m, x, std::nullopt, config(AttackKind::kPgd));
    const auto b = fgsm_attack(m, x, std::nullopt, config(AttackKind::kFgsm));
    EXPECT_LE(a.epsilon_used, b.epsilon_used + 1e-12);
  }
}

TEST(DeepFool, ClosedFormDistanceOnALinearModel) {
  const auto m = linear_binary(vec({1, 0}), 0);
  AttackConfig cfg = config(AttackKind::kDeepFool);
  const auto r = deepfool_attack(m, vec({0.5, 0.3}), std::nullopt, cfg);
  EXPECT_NEAR(r.epsilon_used, 0.5 * 1.02, 1e-4);
  EXPECT_NEAR(r.x_perturbed(0), -0.01, 1e-4);
  EXPECT_NEAR(r.x_perturbed(1), 0.3, 1e-12);
  EXPECT_EQ(r.iterations, 1);
}

TEST(DeepFool, RandomHyperplanes) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index d = 2 + trial % 9;
    const Vector w = testing::random_point(rng, d);
    const double b = 0.3 * testing::random_point(rng, 1)(0);
    const Vector x = testing::random_point(rng, d);
    const auto m = linear_binary(w, b);
    const auto r = deepfool_attack(m, x, std::nullopt, config(AttackKind::kDeepFool));
    const double dist = std::abs(testing::plane_distance(w, b, x));
    EXPECT_NEAR(r.epsilon_used / (1.02 * dist), 1.0, 1e-3);
  }
}

TEST(DeepFool, TargetedRestrictsTheCandidate) {
  const auto m = three_class_linear();
  const Vector x = vec({1.0, -3.0});  // class 0; class 2 (logit 0) is nearer than class 1
  const auto untargeted = deepfool_attack(m, x, std::nullopt, config(AttackKind::kDeepFool));
  EXPECT_EQ(untargeted.label_after, 2);
  const auto targeted = deepfool_attack(m, x, 1, config(AttackKind::kDeepFool));
  EXPECT_EQ(targeted.label_after, 1);
}

TEST(DeepFool, AlreadyAdversarialReturnsImmediately) {
  const auto m = three_class_linear();
  const auto r = deepfool_attack(m, vec({0.0, 2.0}), 1, config(AttackKind::kDeepFool));
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.gradient_calls, 0u);
  EXPECT_EQ(r.x_perturbed, vec({0.0, 2.0}));
}

TEST(DeepFool, SmallerThanFgsmOnMostMlpPoints) {
  const auto& f = testing::moons();
  int smaller = 0, total = 0;
  std::vector<double> df_norms, fgsm_norms;
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(100, f.test.rows()); ++i) {
    const Vector x = testing::test_row(f, i);
    const auto a = deepfool_attack(f.bundle.model, x, std::nullopt, config(AttackKind::kDeepFool));
    const auto b = fgsm_attack(f.bundle.model, x, std::nullopt, config(AttackKind::kFgsm));
    const double na = (a.x_perturbed - x).norm(), nb = (b.x_perturbed - x).norm();
    smaller += na <= nb;
    ++total;
    df_norms.push_back(na);
    fgsm_norms.push_back(nb);
  }
  EXPECT_GE(smaller, static_cast<int>(std::ceil(0.8 * total)));
  std::nth_element(df_norms.begin(), df_norms.begin() + total / 2, df_norms.end());
  std::nth_element(fgsm_norms.begin(), fgsm_norms.begin() + total / 2, fgsm_norms.end());
  EXPECT_LE(df_norms[total / 2], fgsm_norms[total / 2]);
}

TEST(HopSkipJump, CloseToTheBoundaryOnALinearModel) {
  Rng rng(8);
  AttackConfig cfg = config(AttackKind::kHopSkipJump);
  cfg.hsj_max_queries = 5000;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index d = trial < 5 ? 2 : 10;
    const Vector w = testing::random_point(rng, d);
    const Vector x = testing::random_point(rng, d);
    const auto m = linear_binary(w, 0.1);
    cfg.seed = static_cast<std::uint64_t>(trial);
    const auto r = hopskipjump_attack(m, x, std::nullopt, cfg);
    const double dist = std::abs(testing::plane_distance(w, 0.1, x));
    EXPECT_LE(r.queries, 5000u);
    EXPECT_NEAR((r.x_perturbed - x).norm() / dist, 1.0, 0.15) << "trial " << trial;
    EXPECT_NE(m.predict_label(r.x_perturbed), r.label_before);
  }
}

TEST(HopSkipJump, OnlyAsksForLabelsAndCountsThemExactly) {
  const auto& f = testing::moons();
  CountingClassifier counted(f.bundle.model);
  AttackConfig cfg = config(AttackKind::kHopSkipJump);
  cfg.hsj_max_queries = 2000;
  const auto r = run_attack(counted, testing::test_row(f, 0), std::nullopt, cfg);
  const QueryCounts c = counted.counts();
  EXPECT_EQ(c.gradients, 0u);
  EXPECT_EQ(c.probabilities, 0u);
  EXPECT_EQ(c.logits, 0u);
  EXPECT_EQ(c.labels, r.queries);
  EXPECT_LE(r.queries, 2000u);
}

TEST(HopSkipJump, BracketMidpointIsWithinTolerance) {
  const auto m = linear_binary(vec({1, 2, -1}), 0.0);
  AttackConfig cfg = config(AttackKind::kHopSkipJump);
  cfg.hsj_max_queries = 3000;
  const auto r = hopskipjump_attack(m, vec({1, 1, 1}), std::nullopt, cfg);
  ASSERT_TRUE(r.last_bracket.has_value());
  const Vector mid = 0.5 * (r.last_bracket->inside + r.last_bracket->outside);
  EXPECT_LE((mid - r.x_perturbed).norm(), hsj_tolerance(cfg, 3));
  EXPECT_EQ(r.last_bracket->outside, r.x_perturbed);
}

TEST(HopSkipJump, Targeted) {
  const auto m = three_class_linear();
  AttackConfig cfg = config(AttackKind::kHopSkipJump);
  cfg.hsj_max_queries = 3000;
  const auto r = hopskipjump_attack(m, vec({1.0, -3.0}), 1, cfg);
  EXPECT_EQ(r.label_after, 1);
  EXPECT_EQ(m.predict_label(r.x_perturbed), 1);
}

TEST(HopSkipJump, ConstantModelFails) {
  const auto m = testing::linear_softmax(Matrix::Zero(2, 2), Vector::Zero(2));
  AttackConfig cfg = config(AttackKind::kHopSkipJump);
  cfg.hsj_max_queries = 500;
  EXPECT_THROW(hopskipjump_attack(m, vec({0, 0}), std::nullopt, cfg), AttackFailed);
}

class AttackContract : public ::testing::TestWithParam<AttackKind> {};

TEST_P(AttackContract, SuccessHoldsOnRequeryAndIsDeterministic) {
  const auto& f = testing::moons();
  AttackConfig cfg = config(GetParam());
  cfg.hsj_max_queries = 1500;
  for (Eigen::Index i = 0; i < 8; ++i) {
    const Vector x = testing::test_row(f, i);
    const auto a = run_attack(f.bundle.model, x, std::nullopt, cfg);
    const auto b = run_attack(f.bundle.model, x, std::nullopt, cfg);
    EXPECT_EQ(a.x_perturbed, b.x_perturbed);
    EXPECT_EQ(a.queries, b.queries);
    EXPECT_EQ(f.bundle.model.predict_label(a.x_perturbed), a.label_after);
    EXPECT_NE(a.label_after, a.label_before);
  }
}

INSTANTIATE_TEST_SUITE_P(AllAttacks, AttackContract,
                         ::testing::Values(AttackKind::kFgsm, AttackKind::kPgd, AttackKind::kDeepFool,
                                           AttackKind::kHopSkipJump),
                         [](const auto& info) { return std::string(to_string(info.param)); });

}  // namespace
}  // namespace able
