#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "able/classifier.hpp"
#include "able/surrogate.hpp"

namespace able {

struct FeatureAttribution {
  Eigen::Index index = 0;
  std::string name;
  double weight = 0.0;
};

/// Model calls spent on one explanation, split by purpose.
struct QueryStats {
  std::uint64_t neighborhood_labels = 0;
  std::uint64_t attack_labels = 0;
  std::uint64_t attack_gradients = 0;
  /// Label queries that produce the surrogate's training labels: two per
  /// kept pair for ABLE, one per training sample for LIME.
  std::uint64_t labeling = 0;
  /// Everything spent on fidelity evaluation.
  std::uint64_t evaluation = 0;

  std::uint64_t total() const {
    return neighborhood_labels + attack_labels + attack_gradients + labeling + evaluation;
  }
};

struct EpsilonStats {
  double forward_mean = 0.0;
  double forward_max = 0.0;
  double reverse_mean = 0.0;
  double reverse_max = 0.0;
  /// Total budget increases across all kept attacks.
  std::uint64_t escalations = 0;
};

struct Explanation {
  std::string explainer;
  FeatureVector instance;
  ClassId predicted_class = 0;
  /// Sorted by |weight| descending, ties to the lower feature index.
  std::vector<FeatureAttribution> top_features;
  /// Signed weight of every feature towards predicted_class.
  Vector attribution;
  SurrogateModel surrogate;
  std::optional<double> fidelity_r2;
  std::string fidelity_note;
  std::size_t fidelity_points = 0;
  std::size_t pairs_used = 0;
  std::size_t failed_points = 0;
  double runtime_ms = 0.0;
  std::uint64_t seed = 0;
  QueryStats queries;
  EpsilonStats epsilons;
};

/// Raised when no usable surrogate can be built; carries how many
/// neighborhood points were lost to failed attacks.
class ExplanationFailed : public Error {
 public:
  ExplanationFailed(const std::string& what, std::size_t failed_points)
      : Error(what), failed_points_(failed_points) {}
  std::size_t failed_points() const { return failed_points_; }

 private:
  std::size_t failed_points_;
};

/// Indices of the k largest |attribution| entries, ties to the lower index.
std::vector<Eigen::Index> top_k_indices(const Vector& attribution, std::size_t k);

std::vector<FeatureAttribution> top_k_features(const Vector& attribution, std::size_t k,
                                               const std::vector<std::string>& names);

/// Name for feature i: names[i] if present, otherwise "f<i>".
std::string feature_name(const std::vector<std::string>& names, Eigen::Index i);

/// One JSON object per line. `instance_id` is echoed when non-negative.
std::string to_json_line(const Explanation& e, long long instance_id = -1, bool include_runtime = true);
std::string failure_json_line(const std::string& explainer, long long instance_id, std::uint64_t seed,
                              const std::string& message, std::size_t failed_points);

/// Common interface for ABLE and the LIME baseline.
class Explainer {
 public:
  virtual ~Explainer() = default;
  virtual std::string name() const = 0;
  virtual Eigen::Index top_k() const = 0;
  virtual Explanation explain(const DifferentiableClassifier& model, const FeatureVector& x,
                              std::uint64_t seed) const = 0;
};

}  // namespace able
