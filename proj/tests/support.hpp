#pragma once

#include <cmath>
#include <vector>

#include "able/harness.hpp"
#include "able/mlp.hpp"
#include "able/random.hpp"

namespace able::testing {

// Two-class softmax model whose logit difference is w.x + b: class 1 when
// w.x + b > 0, class 0 otherwise (ties go to class 0).
inline MlpClassifier linear_binary(const Vector& w, double b) {
  DenseLayer layer;
  layer.weights = Matrix::Zero(2, w.size());
  layer.weights.row(1) = w.transpose();
  layer.bias = Vector::Zero(2);
  layer.bias(1) = b;
  return MlpClassifier({layer});
}

// One linear softmax row per class.
inline MlpClassifier linear_softmax(const Matrix& w, const Vector& b) {
  DenseLayer layer;
  layer.weights = w;
  layer.bias = b;
  return MlpClassifier({layer});
}

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

inline Vector random_point(Rng& rng, Eigen::Index d, double scale = 1.0) {
  return scale * gaussian_vector(rng, d);
}

inline double cosine(const Vector& a, const Vector& b) { return a.dot(b) / (a.norm() * b.norm()); }

// Signed distance from x to the hyperplane w.x + b = 0.
inline double plane_distance(const Vector& w, double b, const Vector& x) { return (w.dot(x) + b) / w.norm(); }

// Default synthetic moons problem with a trained default-size MLP, built
// once per test binary.
struct MoonsFixture {
  ModelBundle bundle;
  Dataset test;
};

inline const MoonsFixture& moons() {
  static const MoonsFixture fixture = [] {
    const LoadedTable table = synthetic_table(make_synthetic(SyntheticConfig{}));
    MoonsFixture f;
    f.bundle = train_bundle(table, TrainConfig{}, 0);
    const Dataset full = apply_encoding(table.table, f.bundle.schema, f.bundle.standardizer);
    f.test = split_dataset(full, kDefaultSplit, 0).test;
    return f;
  }();
  return fixture;
}

inline Vector test_row(const MoonsFixture& f, Eigen::Index i) { return f.test.x.row(i).transpose(); }

}  // namespace able::testing
