#pragma once

#include <cstddef>
#include <vector>

#include "able/common.hpp"

namespace able {

/// Points with hard class labels, e.g. the bracketing set built from
/// adversarial pairs.
struct LabeledPoints {
  Matrix x;  // rows x d
  std::vector<ClassId> y;

  Eigen::Index size() const { return x.rows(); }
  std::vector<ClassId> distinct_labels() const;
};

enum class SurrogateKind {
  kLogistic,  // one row: P(classes[1]) = sigmoid(w.x + b)
  kSoftmax,   // one row per class in `classes`
  kLinear,    // one row: regression of a probability, no link function
};

struct SurrogateModel {
  SurrogateKind kind = SurrogateKind::kLogistic;
  Matrix weights;  // rows x d
  Vector intercepts;
  std::vector<ClassId> classes;
  std::size_t trained_on = 0;

  // Optimizer diagnostics (zero for closed-form fits).
  int iterations = 0;
  double gradient_norm = 0.0;

  Eigen::Index dim() const { return weights.cols(); }
  bool has_class(ClassId c) const;
  /// Probabilities aligned with `classes` (logistic/softmax only).
  Vector class_probabilities(const FeatureVector& x) const;
  /// Model estimate for class `c`; zero when `c` was never seen. For the
  /// linear kind this is the raw regression output.
  double probability_of(const FeatureVector& x, ClassId c) const;
  /// Signed per-feature weights in favour of class `c`.
  Vector attribution_for(ClassId c) const;
  ClassId predict(const FeatureVector& x) const;
  void validate() const;
};

struct SurrogateFitOptions {
  double l2 = 1e-3;
  double gradient_tolerance = 1e-6;
  int max_iterations = 5000;
};

/// Binary logistic regression on mean cross-entropy + (l2/2)|w|^2, intercept
/// unpenalized, zero initialization. Requires exactly two labels.
SurrogateModel fit_binary_surrogate(const LabeledPoints& data, const SurrogateFitOptions& opts = {});

/// Softmax regression over the labels present; same objective and solver.
SurrogateModel fit_multinomial_surrogate(const LabeledPoints& data, const SurrogateFitOptions& opts = {});

}  // namespace able
