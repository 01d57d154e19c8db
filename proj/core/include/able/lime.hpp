#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "able/explanation.hpp"

namespace able {

struct LimeConfig {
  int num_samples = 5000;
  /// Kernel width; values <= 0 select 0.75 * sqrt(d).
  double kernel_width = 0.0;
  double perturb_std = 1.0;
  std::size_t top_k = 5;
  std::uint64_t seed = 0;
  double ridge = 1e-4;
  std::vector<std::string> feature_names;

  double kernel_width_for(Eigen::Index dim) const;
  void validate() const;
};

/// x_test followed by num_samples-1 Gaussian perturbations of it.
Matrix lime_sample(const FeatureVector& x_test, const LimeConfig& cfg);

/// exp(-|x - x_test|^2 / sigma^2)
double kernel_weight(const FeatureVector& x, const FeatureVector& x_test, double sigma);

struct RidgeSolution {
  Vector coefficients;
  double intercept = 0.0;
  int iterations = 0;
};

/// argmin sum_i w_i (y_i - b - beta.x_i)^2 + ridge |beta|^2 via the normal
/// equations (LDLT).
RidgeSolution weighted_ridge_closed_form(const Matrix& x, const Vector& y, const Vector& weights, double ridge);

/// Same problem solved by conjugate gradients on the normal equations.
RidgeSolution weighted_ridge_cg(const Matrix& x, const Vector& y, const Vector& weights, double ridge,
                                double tolerance = 1e-12, int max_iterations = 1000);

/// Weighted linear regression of the model's probability for the class it
/// predicts at x_test. The last third of the samples is held out for R^2.
Explanation lime_explain(const ProbabilisticClassifier& model, const FeatureVector& x_test, const LimeConfig& cfg);

class LimeExplainer final : public Explainer {
 public:
  explicit LimeExplainer(LimeConfig cfg);
  std::string name() const override { return "LIME"; }
  Eigen::Index top_k() const override { return static_cast<Eigen::Index>(cfg_.top_k); }
  Explanation explain(const DifferentiableClassifier& model, const FeatureVector& x,
                      std::uint64_t seed) const override;
  const LimeConfig& config() const { return cfg_; }

 private:
  LimeConfig cfg_;
};

}  // namespace able
