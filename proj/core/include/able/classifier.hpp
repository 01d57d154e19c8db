#pragma once

#include <atomic>
#include <cstdint>

#include "able/common.hpp"

namespace able {

/// Black-box capability: the model can only be asked for a label.
class LabelOracle {
 public:
  virtual ~LabelOracle() = default;
  virtual Eigen::Index num_features() const = 0;
  virtual int num_classes() const = 0;
  virtual ClassId predict_label(const FeatureVector& x) const = 0;
};

class ProbabilisticClassifier : public LabelOracle {
 public:
  virtual Vector predict_proba(const FeatureVector& x) const = 0;

  /// Argmax of predict_proba; ties resolve to the lower class index.
  ClassId predict_label(const FeatureVector& x) const override;
};

enum class GradientMode {
  kLoss,   // d/dx of cross-entropy against the target class
  kLogit,  // d/dx of the target class's raw logit
};

/// White-box capability: logits and exact input gradients.
class DifferentiableClassifier : public ProbabilisticClassifier {
 public:
  virtual Vector logits(const FeatureVector& x) const = 0;
  virtual Vector input_gradient(const FeatureVector& x, ClassId target_class,
                                GradientMode mode) const = 0;
};

/// Argmax with lowest-index tie breaking.
ClassId argmax(const Vector& v);

/// Numerically stable softmax.
Vector softmax(const Vector& logits);

struct QueryCounts {
  std::uint64_t labels = 0;
  std::uint64_t probabilities = 0;
  std::uint64_t gradients = 0;
  std::uint64_t logits = 0;

  std::uint64_t total() const { return labels + probabilities + gradients + logits; }
};

/// Forwards every call to a wrapped model and counts it. Counters are atomic,
/// so a single instance can be shared across threads.
class CountingClassifier final : public DifferentiableClassifier {
 public:
  explicit CountingClassifier(const DifferentiableClassifier& inner) : inner_(inner) {}

  Eigen::Index num_features() const override { return inner_.num_features(); }
  int num_classes() const override { return inner_.num_classes(); }
  ClassId predict_label(const FeatureVector& x) const override;
  Vector predict_proba(const FeatureVector& x) const override;
  Vector logits(const FeatureVector& x) const override;
  Vector input_gradient(const FeatureVector& x, ClassId target_class,
                        GradientMode mode) const override;

  QueryCounts counts() const;
  void reset();

 private:
  const DifferentiableClassifier& inner_;
  mutable std::atomic<std::uint64_t> labels_{0};
  mutable std::atomic<std::uint64_t> probabilities_{0};
  mutable std::atomic<std::uint64_t> gradients_{0};
  mutable std::atomic<std::uint64_t> logits_{0};
};

/// Narrows any model to the label-only interface. Decision-based attacks
/// receive this view and therefore cannot reach gradients.
class LabelOnlyView final : public LabelOracle {
 public:
  explicit LabelOnlyView(const LabelOracle& inner) : inner_(inner) {}
  Eigen::Index num_features() const override { return inner_.num_features(); }
  int num_classes() const override { return inner_.num_classes(); }
  ClassId predict_label(const FeatureVector& x) const override { return inner_.predict_label(x); }

 private:
  const LabelOracle& inner_;
};

}  // namespace able
