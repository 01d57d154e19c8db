#include "able/mlp.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "able/synthetic.hpp"
#include "support.hpp"

namespace able {
namespace {

using testing::linear_softmax;
using testing::vec;

// Central differences of either the target logit or the cross-entropy
// against the target class.
Vector finite_difference(const MlpClassifier& m, const Vector& x, ClassId c, GradientMode mode, double h) {
  auto value = [&](const Vector& p) {
    const Vector z = m.logits(p);
    if (mode == GradientMode::kLogit) return z(c);
    return -std::log(softmax(z)(c));
  };
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector up = x, down = x;
    up(i) += h;
    down(i) -= h;
    g(i) = (value(up) - value(down)) / (2 * h);
  }
  return g;
}

double max_relative_error(const Vector& a, const Vector& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a(i)), std::abs(b(i)), 1e-6});
    worst = std::max(worst, std::abs(a(i) - b(i)) / scale);
  }
  return worst;
}

Dataset two_blobs(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds;
  ds.x.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    const int c = i % 2;
    // Centers 4 sigma apart: a margin of 2 sigma on either side.
    ds.x(i, 0) = (c ? 2.0 : -2.0) + noise(rng);
    ds.x(i, 1) = noise(rng);
    ds.y.push_back(c);
  }
  return ds;
}

TEST(Mlp, ProbabilitiesSumToOne) {
  const auto m = MlpClassifier::initialize({5, 8, 16, 3}, 4);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vector p = m.predict_proba(testing::random_point(rng, 5, 3.0));
    EXPECT_NEAR(p.sum(), 1.0, 1e-6);
    EXPECT_GE(p.minCoeff(), 0.0);
    EXPECT_LE(p.maxCoeff(), 1.0);
  }
}

TEST(Mlp, ZeroWeightsGiveUniformAndClassZero) {
  const auto m = linear_softmax(Matrix::Zero(3, 4), Vector::Zero(3));
  const Vector x = vec({1, 2, 3, 4});
  EXPECT_TRUE(m.predict_proba(x).isApprox(Vector::Constant(3, 1.0 / 3.0)));
  EXPECT_EQ(m.predict_label(x), 0);
  EXPECT_EQ(m.input_gradient(x, 1, GradientMode::kLoss).norm(), 0.0);
  EXPECT_EQ(m.input_gradient(x, 1, GradientMode::kLogit).norm(), 0.0);
}

TEST(Mlp, HandBuiltSoftmax) {
  const auto m = linear_softmax(Matrix::Zero(2, 1), vec({2.0, 0.0}));
  const Vector p = m.predict_proba(vec({0.0}));
  EXPECT_NEAR(p(0), 0.8808, 1e-4);
  EXPECT_NEAR(p(1), 0.1192, 1e-4);
  EXPECT_EQ(m.predict_label(vec({0.0})), 0);
}

TEST(Mlp, ArgmaxTieGoesLow) {
  EXPECT_EQ(argmax(vec({0.1, 0.9})), 1);
  EXPECT_EQ(argmax(vec({0.5, 0.5})), 0);
  EXPECT_EQ(argmax(vec({0.2, 0.4, 0.4})), 1);
}

TEST(Mlp, DimensionMismatch) {
  const auto m = MlpClassifier::initialize({3, 4, 2}, 0);
  EXPECT_THROW(m.predict_proba(vec({1, 2})), PreconditionError);
  EXPECT_THROW(m.input_gradient(vec({1, 2, 3}), 2, GradientMode::kLoss), PreconditionError);
}

class GradientCheck : public ::testing::TestWithParam<std::vector<Eigen::Index>> {};

TEST_P(GradientCheck, MatchesFiniteDifferences) {
  const auto m = MlpClassifier::initialize(GetParam(), 21);
  const Eigen::Index d = GetParam().front();
  Rng rng(5);
  int checked = 0;
  while (checked < 20) {
    const Vector x = testing::random_point(rng, d, 1.5);
    if (m.min_abs_preactivation(x) < 1e-3) continue;
    for (ClassId c = 0; c < m.num_classes(); ++c) {
      for (GradientMode mode : {GradientMode::kLoss, GradientMode::kLogit}) {
        const Vector g = m.input_gradient(x, c, mode);
        EXPECT_LT(max_relative_error(g, finite_difference(m, x, c, mode, 1e-4)), 1e-3);
      }
    }
    ++checked;
  }
}

INSTANTIATE_TEST_SUITE_P(HiddenSizes, GradientCheck,
                         ::testing::Values(std::vector<Eigen::Index>{6, 8, 8, 2},
                                           std::vector<Eigen::Index>{6, 16, 16, 3},
                                           std::vector<Eigen::Index>{4, 8, 16, 2}));

TEST(Mlp, LossGradientIsSoftmaxWeightedLogitGradients) {
  const auto m = MlpClassifier::initialize({4, 16, 8, 3}, 2);
  Rng rng(9);
  for (int i = 0; i < 10; ++i) {
    const Vector x = testing::random_point(rng, 4);
    const Vector p = m.predict_proba(x);
    for (ClassId c = 0; c < 3; ++c) {
      Vector expected = -m.input_gradient(x, c, GradientMode::kLogit);
      for (ClassId k = 0; k < 3; ++k) expected += p(k) * m.input_gradient(x, k, GradientMode::kLogit);
      EXPECT_LT((m.input_gradient(x, c, GradientMode::kLoss) - expected).norm(), 1e-10);
    }
  }
}

TEST(Mlp, InvalidClassIndex) {
  const auto m = MlpClassifier::initialize({2, 4, 2}, 0);
  EXPECT_THROW(m.input_gradient(vec({0, 0}), 2, GradientMode::kLogit), PreconditionError);
  EXPECT_THROW(m.input_gradient(vec({0, 0}), -1, GradientMode::kLogit), PreconditionError);
}

TEST(Train, SeparableBlobs) {
  const Dataset train = two_blobs(200, 1);
  const Dataset val = two_blobs(100, 2);
  TrainConfig cfg;
  cfg.epochs = 20;
  const auto m = train_mlp(train, val, cfg);
  EXPECT_GE(m.accuracy(val), 0.95);
}

TEST(Train, Deterministic) {
  const Dataset train = two_blobs(100, 1);
  const Dataset val = two_blobs(40, 2);
  TrainConfig cfg;
  cfg.epochs = 5;
  const auto a = train_mlp(train, val, cfg);
  const auto b = train_mlp(train, val, cfg);
  ASSERT_EQ(a.layers().size(), b.layers().size());
  for (std::size_t l = 0; l < a.layers().size(); ++l) {
    EXPECT_EQ(a.layers()[l].weights, b.layers()[l].weights);
    EXPECT_EQ(a.layers()[l].bias, b.layers()[l].bias);
  }
}

TEST(Train, RejectsBadConfig) {
  TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), PreconditionError);
  const Dataset ds = two_blobs(20, 0);
  EXPECT_THROW(train_mlp(ds, ds, cfg), PreconditionError);
}

TEST(Train, DivergenceAdvisesSmallerRate) {
  const Dataset ds = two_blobs(50, 0);
  TrainConfig cfg;
  cfg.learning_rate = 1e12;
  cfg.epochs = 5;
  try {
    train_mlp(ds, ds, cfg);
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_NE(std::string(e.what()).find("smaller learning rate"), std::string::npos);
  }
}

TEST(ModelIo, RoundTrip) {
  SyntheticConfig sc;
  sc.samples = 60;
  sc.dim = 3;
  const LoadedTable table = synthetic_table(make_synthetic(sc));
  EncodedData enc = encode_and_standardize(table.table, table.schema);
  ModelBundle bundle;
  bundle.model = MlpClassifier::initialize({3, 5, 2}, 8);
  bundle.schema = enc.dataset.schema;
  bundle.standardizer = enc.standardizer;
  bundle.split_seed = 17;
  bundle.test_accuracy = 0.75;

  const ModelBundle back = deserialize_model(serialize_model(bundle));
  EXPECT_EQ(back.split_seed, 17u);
  EXPECT_EQ(back.test_accuracy, 0.75);
  EXPECT_EQ(back.schema.feature_names(), bundle.schema.feature_names());
  EXPECT_EQ(back.standardizer.means, bundle.standardizer.means);
  EXPECT_EQ(back.standardizer.stds, bundle.standardizer.stds);
  const Vector x = vec({0.3, -1.0, 2.0});
  EXPECT_EQ(back.model.logits(x), bundle.model.logits(x));
}

TEST(ModelIo, VersionMismatchIsHardError) {
  ModelBundle bundle;
  bundle.model = MlpClassifier::initialize({2, 2}, 0);
  std::string text = serialize_model(bundle);
  const std::string tag = "\"version\": " + std::to_string(kModelFormatVersion);
  const auto pos = text.find(tag);
  ASSERT_NE(pos, std::string::npos) << text.substr(0, 200);
  text.replace(pos, tag.size(), "\"version\": 99");
  EXPECT_THROW(deserialize_model(text), DataError);
  EXPECT_THROW(deserialize_model("{\"layers\":[]}"), DataError);
  EXPECT_THROW(deserialize_model("not json"), DataError);
}

}  // namespace
}  // namespace able
