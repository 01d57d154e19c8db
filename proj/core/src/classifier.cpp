#include "able/classifier.hpp"

namespace able {

ClassId argmax(const Vector& v) {
  if (v.size() == 0) throw PreconditionError("argmax of an empty vector");
  ClassId best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = static_cast<ClassId>(i);
  }
  return best;
}

Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp();
  return e / e.sum();
}

ClassId ProbabilisticClassifier::predict_label(const FeatureVector& x) const {
  return argmax(predict_proba(x));
}

ClassId CountingClassifier::predict_label(const FeatureVector& x) const {
  labels_.fetch_add(1, std::memory_order_relaxed);
  return inner_.predict_label(x);
}

Vector CountingClassifier::predict_proba(const FeatureVector& x) const {
  probabilities_.fetch_add(1, std::memory_order_relaxed);
  return inner_.predict_proba(x);
}

Vector CountingClassifier::logits(const FeatureVector& x) const {
  logits_.fetch_add(1, std::memory_order_relaxed);
  return inner_.logits(x);
}

Vector CountingClassifier::input_gradient(const FeatureVector& x, ClassId target_class,
                                          GradientMode mode) const {
  gradients_.fetch_add(1, std::memory_order_relaxed);
  return inner_.input_gradient(x, target_class, mode);
}

QueryCounts CountingClassifier::counts() const {
  QueryCounts c;
  c.labels = labels_.load();
  c.probabilities = probabilities_.load();
  c.gradients = gradients_.load();
  c.logits = logits_.load();
  return c;
}

void CountingClassifier::reset() {
  labels_ = 0;
  probabilities_ = 0;
  gradients_ = 0;
  logits_ = 0;
}

}  // namespace able
