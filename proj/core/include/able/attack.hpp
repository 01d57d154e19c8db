#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "able/classifier.hpp"

namespace able {

enum class AttackKind { kFgsm, kPgd, kDeepFool, kHopSkipJump };

std::string_view to_string(AttackKind kind);
AttackKind attack_kind_from_string(std::string_view name);
/// True for attacks that need input gradients.
bool is_white_box(AttackKind kind);

struct AttackConfig {
  AttackKind kind = AttackKind::kFgsm;

  // FGSM / PGD: L-infinity budget with linear escalation on failure.
  double epsilon0 = 0.1;
  double epsilon_step = 0.1;
  double epsilon_max = 10.0;

  int pgd_steps = 40;
  /// Step size as a fraction of the current budget (alpha = fraction * eps).
  double pgd_alpha_fraction = 2.5 / 40.0;

  double df_overshoot = 0.02;
  int df_max_iters = 50;

  int hsj_max_queries = 10000;
  /// Binary-search tolerance per unit sqrt(d); the L2 tolerance along the
  /// search segment is hsj_theta * sqrt(d).
  double hsj_theta = 1e-2;
  int hsj_iterations = 30;
  int hsj_initial_evals = 100;
  int hsj_max_evals = 1000;

  std::uint64_t seed = 0;

  void validate() const;
};

/// Endpoints of a boundary bracket: `inside` keeps the source label,
/// `outside` satisfies the attack goal.
struct SegmentBracket {
  FeatureVector inside;
  FeatureVector outside;
};

struct AttackResult {
  FeatureVector x_perturbed;
  ClassId label_before = 0;
  ClassId label_after = 0;
  /// L-infinity budget that succeeded for FGSM/PGD; achieved L2 perturbation
  /// norm for DeepFool and HopSkipJump, which have no preset budget.
  double epsilon_used = 0.0;
  /// Label queries issued by the attack (including the initial one).
  std::uint64_t queries = 0;
  std::uint64_t gradient_calls = 0;
  /// Budget tries (FGSM), total steps (PGD), linearization steps (DeepFool)
  /// or refinement rounds (HopSkipJump).
  int iterations = 0;
  /// Number of budget increases beyond epsilon0.
  int escalations = 0;
  std::optional<SegmentBracket> last_bracket;
};

/// No adversarial point was found within the configured budget.
class AttackFailed : public Error {
 public:
  AttackFailed(const std::string& what, std::uint64_t queries, std::uint64_t gradient_calls)
      : Error(what), queries_(queries), gradient_calls_(gradient_calls) {}
  std::uint64_t queries() const { return queries_; }
  std::uint64_t gradient_calls() const { return gradient_calls_; }

 private:
  std::uint64_t queries_;
  std::uint64_t gradient_calls_;
};

/// Attack goal: any label other than the source label, or a specific class.
struct AttackGoal {
  std::optional<ClassId> target;

  bool satisfied(ClassId source, ClassId label) const {
    return target ? label == *target : label != source;
  }
};

using IterateObserver = std::function<void(const FeatureVector&)>;

AttackResult fgsm_attack(const DifferentiableClassifier& model, const FeatureVector& x,
                         std::optional<ClassId> target, const AttackConfig& cfg);

/// Every iterate, before the label check, is passed to `observer` if set.
AttackResult pgd_attack(const DifferentiableClassifier& model, const FeatureVector& x,
                        std::optional<ClassId> target, const AttackConfig& cfg,
                        const IterateObserver& observer = {});

AttackResult deepfool_attack(const DifferentiableClassifier& model, const FeatureVector& x,
                             std::optional<ClassId> target, const AttackConfig& cfg);

/// Decision-based attack; only ever sees labels.
AttackResult hopskipjump_attack(const LabelOracle& oracle, const FeatureVector& x,
                                std::optional<ClassId> target, const AttackConfig& cfg);

/// L2 tolerance the HopSkipJump binary search stops at.
double hsj_tolerance(const AttackConfig& cfg, Eigen::Index dim);

/// Dispatches on cfg.kind. HopSkipJump receives a label-only view.
AttackResult run_attack(const DifferentiableClassifier& model, const FeatureVector& x,
                        std::optional<ClassId> target, const AttackConfig& cfg);

}  // namespace able
