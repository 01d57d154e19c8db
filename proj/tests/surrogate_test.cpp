#include "able/surrogate.hpp"

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "lbfgs.hpp"
#include "support.hpp"

namespace able {
namespace {

using testing::vec;

LabeledPoints points(std::initializer_list<std::pair<std::pair<double, double>, ClassId>> rows) {
  LabeledPoints p;
  p.x.resize(static_cast<Eigen::Index>(rows.size()), 2);
  Eigen::Index i = 0;
  for (const auto& [xy, y] : rows) {
    p.x(i, 0) = xy.first;
    p.x(i, 1) = xy.second;
    p.y.push_back(y);
    ++i;
  }
  return p;
}

LabeledPoints noisy_binary(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabeledPoints p;
  p.x.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) p.x(i, j) = z(rng);
    const double logit = 2.0 * p.x(i, 0) - p.x(i, 2) + 0.3;
    p.y.push_back(u(rng) < 1.0 / (1.0 + std::exp(-logit)) ? 1 : 0);
  }
  return p;
}

// Independent re-statement of the training objective: mean cross-entropy
// plus (l2/2)|W|^2, intercepts free. Parameters are packed row by row as
// [w_c, b_c] per modelled row.
double objective(const SurrogateModel& m, const LabeledPoints& data, double l2) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const FeatureVector x = data.x.row(i).transpose();
    const double p = m.kind == SurrogateKind::kLogistic
                         ? (data.y[static_cast<std::size_t>(i)] == m.classes[1]
                                ? m.class_probabilities(x)(1)
                                : m.class_probabilities(x)(0))
                         : m.probability_of(x, data.y[static_cast<std::size_t>(i)]);
    loss -= std::log(p);
  }
  return loss / static_cast<double>(data.size()) + 0.5 * l2 * m.weights.squaredNorm();
}

double max_numeric_gradient(SurrogateModel m, const LabeledPoints& data, double l2) {
  const double h = 1e-6;
  double worst = 0.0;
  auto probe = [&](double& param) {
    const double keep = param;
    param = keep + h;
    const double up = objective(m, data, l2);
    param = keep - h;
    const double down = objective(m, data, l2);
    param = keep;
    worst = std::max(worst, std::abs(up - down) / (2 * h));
  };
  for (Eigen::Index k = 0; k < m.weights.size(); ++k) probe(m.weights.data()[k]);
  for (Eigen::Index k = 0; k < m.intercepts.size(); ++k) probe(m.intercepts.data()[k]);
  return worst;
}

TEST(Lbfgs, MinimizesAQuadratic) {
  Matrix a(3, 3);
  a << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
  const Vector b = vec({1, -2, 0.5});
  auto f = [&](const Vector& x, Vector& g) {
    g = a * x - b;
    return 0.5 * x.dot(a * x) - b.dot(x);
  };
  const auto r = detail::minimize_lbfgs(f, Vector::Zero(3), 1e-10, 200);
  EXPECT_TRUE(r.converged);
  EXPECT_LT((r.x - a.ldlt().solve(b)).norm(), 1e-8);
}

TEST(BinarySurrogate, SeparableAlongOneAxis) {
  const auto data = points({{{-1, 0.2}, 0}, {{-1, -0.3}, 0}, {{1, 0.1}, 1}, {{1, -0.2}, 1}});
  const auto m = fit_binary_surrogate(data);
  EXPECT_GT(m.weights(0, 0), 0.0);
  EXPECT_LT(std::abs(m.weights(0, 1)), std::abs(m.weights(0, 0)) / 10);
  EXPECT_EQ(m.trained_on, 4u);
}

TEST(BinarySurrogate, StationaryPointOfTheStatedObjective) {
  const auto data = noisy_binary(300, 2);
  SurrogateFitOptions opts;
  opts.l2 = 3e-3;
  const auto m = fit_binary_surrogate(data, opts);
  EXPECT_LT(max_numeric_gradient(m, data, opts.l2), 1e-5);
}

TEST(BinarySurrogate, StrongRegularizationShrinksWeights) {
  const auto data = noisy_binary(200, 3);
  double previous = std::numeric_limits<double>::infinity();
  for (double l2 : {1e-3, 1e-1, 10.0, 1e3}) {
    SurrogateFitOptions opts;
    opts.l2 = l2;
    const double norm = fit_binary_surrogate(data, opts).weights.norm();
    EXPECT_LT(norm, previous);
    previous = norm;
  }
  EXPECT_LT(previous, 1e-3);
}

TEST(BinarySurrogate, RejectsOneClass) {
  const auto data = points({{{0, 0}, 1}, {{1, 1}, 1}});
  EXPECT_THROW(fit_binary_surrogate(data), PreconditionError);
  EXPECT_THROW(fit_multinomial_surrogate(data), PreconditionError);
}

TEST(BinarySurrogate, AttributionSigns) {
  const auto data = points({{{-1, 0}, 3}, {{-2, 0}, 3}, {{1, 0}, 5}, {{2, 0}, 5}});
  const auto m = fit_binary_surrogate(data);
  EXPECT_EQ(m.classes, (std::vector<ClassId>{3, 5}));
  EXPECT_GT(m.attribution_for(5)(0), 0.0);
  EXPECT_LT(m.attribution_for(3)(0), 0.0);
  EXPECT_THROW(m.attribution_for(4), PreconditionError);
  EXPECT_EQ(m.probability_of(vec({0, 0}), 4), 0.0);
}

TEST(MultinomialSurrogate, TwoClassesMatchBinaryDecisions) {
  const auto data = noisy_binary(300, 5);
  const auto a = fit_binary_surrogate(data);
  const auto b = fit_multinomial_surrogate(data);
  Rng rng(6);
  int agree = 0;
  for (int i = 0; i < 100; ++i) {
    const Vector x = testing::random_point(rng, 3, 2.0);
    agree += a.predict(x) == b.predict(x);
  }
  EXPECT_EQ(agree, 100);
}

TEST(MultinomialSurrogate, ThreeClustersAndNormalization) {
  LabeledPoints data;
  data.x.resize(90, 2);
  Rng rng(1);
  std::normal_distribution<double> z(0.0, 0.3);
  const double centers[3][2] = {{0, 4}, {4, -2}, {-4, -2}};
  for (int i = 0; i < 90; ++i) {
    const int c = i % 3;
    data.x(i, 0) = centers[c][0] + z(rng);
    data.x(i, 1) = centers[c][1] + z(rng);
    data.y.push_back(c);
  }
  SurrogateFitOptions opts;
  opts.l2 = 3e-3;
  const auto m = fit_multinomial_surrogate(data, opts);
  int correct = 0;
  for (int i = 0; i < 90; ++i) correct += m.predict(data.x.row(i).transpose()) == data.y[static_cast<std::size_t>(i)];
  EXPECT_EQ(correct, 90);
  for (int i = 0; i < 50; ++i) {
    EXPECT_NEAR(m.class_probabilities(testing::random_point(rng, 2, 5.0)).sum(), 1.0, 1e-6);
  }
  EXPECT_LT(max_numeric_gradient(m, data, opts.l2), 1e-5);
}

TEST(MultinomialSurrogate, OnlyModelsPresentClasses) {
  const auto data = points({{{0, 0}, 0}, {{1, 0}, 2}, {{0, 1}, 0}, {{1, 1}, 2}});
  const auto m = fit_multinomial_surrogate(data);
  EXPECT_EQ(m.classes, (std::vector<ClassId>{0, 2}));
  EXPECT_FALSE(m.has_class(1));
}

TEST(Surrogate, DeterministicFromZeroInit) {
  const auto data = noisy_binary(150, 9);
  const auto a = fit_multinomial_surrogate(data);
  const auto b = fit_multinomial_surrogate(data);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.intercepts, b.intercepts);
}

}  // namespace
}  // namespace able
