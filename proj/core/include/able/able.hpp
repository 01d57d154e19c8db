#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "able/attack.hpp"
#include "able/explanation.hpp"
#include "able/random.hpp"
#include "able/surrogate.hpp"

namespace able {

struct NeighborhoodConfig {
  double radius = 0.2;
  /// Total neighborhood size, the test point included.
  int count = 150;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Neighborhood {
  /// Row 0 is the test point itself.
  Matrix points;
  std::vector<ClassId> labels;
  bool includes_test = true;

  Eigen::Index size() const { return points.rows(); }
};

/// z * min(1, radius / |z|) with z ~ N(0, I).
Vector bounded_gaussian_perturbation(Rng& rng, Eigen::Index dim, double radius);

/// The test point plus count-1 bounded-noise neighbors, each labelled by the
/// model (one label query per point).
Neighborhood sample_neighborhood(const LabelOracle& model, const FeatureVector& x_test,
                                 const NeighborhoodConfig& cfg);

/// Fresh bounded-noise points without the test point and without labels.
Matrix sample_ball(const FeatureVector& center, double radius, int count, std::uint64_t seed);

struct AdversarialPair {
  FeatureVector x_adv;
  ClassId label_adv = 0;
  FeatureVector x_rev;
  ClassId label_rev = 0;
  std::size_t source_index = 0;
  double epsilon_forward = 0.0;
  double epsilon_reverse = 0.0;

  std::uint64_t attack_queries = 0;
  std::uint64_t attack_gradients = 0;
  std::uint64_t escalations = 0;
};

/// Forward untargeted attack away from y_i, then a reverse attack back
/// (untargeted for two classes, targeted at y_i otherwise). Both labels are
/// re-queried before returning. Throws AttackFailed if either leg fails.
AdversarialPair generate_pair(const DifferentiableClassifier& model, const FeatureVector& x_i, ClassId y_i,
                              const AttackConfig& attack, int num_classes, std::size_t source_index = 0);

/// Two labelled points per pair, in pair order: (x_adv, label_adv), (x_rev, label_rev).
LabeledPoints build_pair_dataset(std::span<const AdversarialPair> pairs);

/// Where fidelity is measured. kPairs draws the evaluation set with the
/// explainer's own sampling procedure: bracketing pairs grown from a fresh,
/// disjoint neighborhood. kNeighborhood scores the fresh points directly.
enum class FidelityDomain { kPairs, kNeighborhood };

std::string_view to_string(FidelityDomain domain);
FidelityDomain fidelity_domain_from_string(std::string_view name);

inline constexpr double kDefaultSurrogateL2 = 3e-3;

struct AbleConfig {
  NeighborhoodConfig neighborhood;
  AttackConfig attack;
  std::size_t top_k = 5;
  SurrogateFitOptions surrogate{kDefaultSurrogateL2, 1e-6, 5000};
  FidelityDomain fidelity_domain = FidelityDomain::kPairs;
  /// Evaluation neighborhood size as a fraction of the training count.
  double evaluation_fraction = 0.5;
  std::vector<std::string> feature_names;

  void validate() const;
};

/// Runs the full pipeline for one instance. All randomness derives from
/// `seed`; the neighborhood and attack seeds inside `cfg` are ignored.
Explanation explain(const DifferentiableClassifier& model, const FeatureVector& x_test, const AbleConfig& cfg,
                    std::uint64_t seed);

class AbleExplainer final : public Explainer {
 public:
  explicit AbleExplainer(AbleConfig cfg);
  std::string name() const override;
  Eigen::Index top_k() const override { return static_cast<Eigen::Index>(cfg_.top_k); }
  Explanation explain(const DifferentiableClassifier& model, const FeatureVector& x,
                      std::uint64_t seed) const override;
  const AbleConfig& config() const { return cfg_; }

 private:
  AbleConfig cfg_;
};

}  // namespace able
