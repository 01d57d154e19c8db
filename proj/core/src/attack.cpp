#include "able/attack.hpp"

#include <cmath>
#include <limits>

#include "able/random.hpp"

namespace able {

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kFgsm: return "FGSM";
    case AttackKind::kPgd: return "PGD";
    case AttackKind::kDeepFool: return "DEEPFOOL";
    case AttackKind::kHopSkipJump: return "HSJ";
  }
  return "?";
}

AttackKind attack_kind_from_string(std::string_view name) {
  if (name == "FGSM") return AttackKind::kFgsm;
  if (name == "PGD") return AttackKind::kPgd;
  if (name == "DEEPFOOL" || name == "DF") return AttackKind::kDeepFool;
  if (name == "HSJ" || name == "HOPSKIPJUMP") return AttackKind::kHopSkipJump;
  throw PreconditionError("unknown attack '" + std::string(name) + "'");
}

bool is_white_box(AttackKind kind) { return kind != AttackKind::kHopSkipJump; }

void AttackConfig::validate() const {
  if (!(epsilon0 > 0.0)) throw PreconditionError("epsilon0 must be > 0");
  if (!(epsilon_step > 0.0)) throw PreconditionError("epsilon_step must be > 0");
  if (epsilon0 > epsilon_max) throw PreconditionError("epsilon0 must not exceed epsilon_max");
  if (pgd_steps < 1 || df_max_iters < 1 || hsj_max_queries < 1 || hsj_iterations < 1 ||
      hsj_initial_evals < 1 || hsj_max_evals < 1) {
    throw PreconditionError("attack iteration and query counts must be >= 1");
  }
  if (!(pgd_alpha_fraction > 0.0)) throw PreconditionError("pgd_alpha_fraction must be > 0");
  if (df_overshoot < 0.0) throw PreconditionError("df_overshoot must be >= 0");
  if (!(hsj_theta > 0.0)) throw PreconditionError("hsj_theta must be > 0");
}

namespace {

Vector sign(const Vector& v) {
  return v.unaryExpr([](double a) { return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); });
}

/// Budgets epsilon0, epsilon0 + step, ... up to and including epsilon_max.
template <typename TryBudget>
bool escalate(const AttackConfig& cfg, TryBudget&& try_budget) {
  for (int k = 0;; ++k) {
    const double eps = cfg.epsilon0 + k * cfg.epsilon_step;
    if (eps > cfg.epsilon_max * (1.0 + 1e-12)) return false;
    if (try_budget(eps, k)) return true;
  }
}

void check_target(const LabelOracle& model, const FeatureVector& x, std::optional<ClassId> target) {
  if (x.size() != model.num_features()) throw PreconditionError("attack input has the wrong dimension");
  if (target && (*target < 0 || *target >= model.num_classes())) {
    throw PreconditionError("attack target class out of range");
  }
}

std::string failure_message(AttackKind kind, const std::string& detail) {
  return std::string(to_string(kind)) + " attack failed: " + detail;
}

}  // namespace

AttackResult fgsm_attack(const DifferentiableClassifier& model, const FeatureVector& x,
                         std::optional<ClassId> target, const AttackConfig& cfg) {
  cfg.validate();
  check_target(model, x, target);
  const AttackGoal goal{target};
  AttackResult res;
  res.label_before = model.predict_label(x);
  res.queries = 1;
  if (goal.satisfied(res.label_before, res.label_before)) {
    res.x_perturbed = x;
    res.label_after = res.label_before;
    return res;
  }

  const ClassId loss_class = target ? *target : res.label_before;
  const Vector grad = model.input_gradient(x, loss_class, GradientMode::kLoss);
  res.gradient_calls = 1;
  // Untargeted: climb the loss of the current label. Targeted: descend the
  // loss of the target label.
  const Vector direction = target ? Vector(-sign(grad)) : sign(grad);

  const bool ok = escalate(cfg, [&](double eps, int k) {
    FeatureVector candidate = x + eps * direction;
    const ClassId label = model.predict_label(candidate);
    ++res.queries;
    ++res.iterations;
    if (!goal.satisfied(res.label_before, label)) return false;
    res.x_perturbed = std::move(candidate);
    res.label_after = label;
    res.epsilon_used = eps;
    res.escalations = k;
    return true;
  });
  if (!ok) {
    throw AttackFailed(failure_message(AttackKind::kFgsm, "no label change up to epsilon_max"),
                       res.queries, res.gradient_calls);
  }
  return res;
}

AttackResult pgd_attack(const DifferentiableClassifier& model, const FeatureVector& x,
                        std::optional<ClassId> target, const AttackConfig& cfg,
                        const IterateObserver& observer) {
  cfg.validate();
  check_target(model, x, target);
  const AttackGoal goal{target};
  AttackResult res;
  res.label_before = model.predict_label(x);
  res.queries = 1;
  if (goal.satisfied(res.label_before, res.label_before)) {
    res.x_perturbed = x;
    res.label_after = res.label_before;
    return res;
  }
  const ClassId loss_class = target ? *target : res.label_before;
  const double direction_sign = target ? -1.0 : 1.0;

  const bool ok = escalate(cfg, [&](double eps, int k) {
    const double alpha = cfg.pgd_alpha_fraction * eps;
    const Vector lower = x.array() - eps;
    const Vector upper = x.array() + eps;
    FeatureVector current = x;
    for (int step = 0; step < cfg.pgd_steps; ++step) {
      const Vector grad = model.input_gradient(current, loss_class, GradientMode::kLoss);
      ++res.gradient_calls;
      current = (current + direction_sign * alpha * sign(grad)).cwiseMax(lower).cwiseMin(upper);
      ++res.iterations;
      if (observer) observer(current);
      const ClassId label = model.predict_label(current);
      ++res.queries;
      if (goal.satisfied(res.label_before, label)) {
        res.x_perturbed = std::move(current);
        res.label_after = label;
        res.epsilon_used = eps;
        res.escalations = k;
        return true;
      }
    }
    return false;
  });
  if (!ok) {
    throw AttackFailed(failure_message(AttackKind::kPgd, "no label change up to epsilon_max"),
                       res.queries, res.gradient_calls);
  }
  return res;
}

AttackResult deepfool_attack(const DifferentiableClassifier& model, const FeatureVector& x,
                             std::optional<ClassId> target, const AttackConfig& cfg) {
  cfg.validate();
  check_target(model, x, target);
  const AttackGoal goal{target};
  AttackResult res;
  res.label_before = model.predict_label(x);
  res.queries = 1;
  const ClassId source = res.label_before;
  const double inflate = 1.0 + cfg.df_overshoot;

  Vector total = Vector::Zero(x.size());
  FeatureVector current = x;
  ClassId label = source;
  while (!goal.satisfied(source, label)) {
    if (res.iterations >= cfg.df_max_iters) {
      throw AttackFailed(failure_message(AttackKind::kDeepFool, "iteration limit reached"),
                         res.queries, res.gradient_calls);
    }
    const Vector z = model.logits(current);
    ++res.queries;
    // Untargeted steps linearize against the source logit. Targeted steps
    // linearize against whichever class currently wins, so an intermediate
    // detour through a third class still heads for the target.
    const ClassId reference = target ? label : source;
    const Vector grad_reference = model.input_gradient(current, reference, GradientMode::kLogit);
    ++res.gradient_calls;

    double best_distance = std::numeric_limits<double>::infinity();
    Vector best_step;
    for (ClassId k = 0; k < model.num_classes(); ++k) {
      if (k == reference || (target && k != *target)) continue;
      const Vector w = model.input_gradient(current, k, GradientMode::kLogit) - grad_reference;
      ++res.gradient_calls;
      const double w_norm_sq = w.squaredNorm();
      if (w_norm_sq <= 0.0) continue;
      const double gap = std::abs(z(k) - z(reference));
      const double distance = gap / std::sqrt(w_norm_sq);
      if (distance < best_distance) {
        best_distance = distance;
        // Tiny additive nudge so an exact linear step does not stop on the boundary.
        best_step = ((gap + 1e-6) / w_norm_sq) * w;
      }
    }
    if (best_step.size() == 0) {
      throw AttackFailed(failure_message(AttackKind::kDeepFool, "logit differences have zero gradient"),
                         res.queries, res.gradient_calls);
    }
    total += best_step;
    current = x + inflate * total;
    ++res.iterations;
    label = model.predict_label(current);
    ++res.queries;
  }

  res.x_perturbed = current;
  res.label_after = label;
  res.epsilon_used = (current - x).norm();
  return res;
}

double hsj_tolerance(const AttackConfig& cfg, Eigen::Index dim) {
  return cfg.hsj_theta * std::sqrt(static_cast<double>(dim));
}

namespace {

struct QueryBudgetExhausted {};

class BudgetedOracle {
 public:
  BudgetedOracle(const LabelOracle& oracle, int budget) : oracle_(oracle), budget_(budget) {}

  ClassId label(const FeatureVector& x) {
    if (used_ >= static_cast<std::uint64_t>(budget_)) throw QueryBudgetExhausted{};
    ++used_;
    return oracle_.predict_label(x);
  }
  std::uint64_t used() const { return used_; }
  std::uint64_t remaining() const { return static_cast<std::uint64_t>(budget_) - used_; }

 private:
  const LabelOracle& oracle_;
  int budget_;
  std::uint64_t used_ = 0;
};

}  // namespace

AttackResult hopskipjump_attack(const LabelOracle& oracle, const FeatureVector& x,
                                std::optional<ClassId> target, const AttackConfig& cfg) {
  cfg.validate();
  check_target(oracle, x, target);
  const AttackGoal goal{target};
  const Eigen::Index d = x.size();
  const double tol = hsj_tolerance(cfg, d);
  BudgetedOracle budget(oracle, cfg.hsj_max_queries);
  Rng rng(derive_seed(derive_seed(cfg.seed, hash_vector(x)), target ? static_cast<std::uint64_t>(*target) + 1 : 0));

  AttackResult res;
  ClassId source = 0;
  try {
    source = budget.label(x);
  } catch (const QueryBudgetExhausted&) {
    throw AttackFailed(failure_message(AttackKind::kHopSkipJump, "query budget exhausted"), 0, 0);
  }
  res.label_before = source;
  if (goal.satisfied(source, source)) {
    res.x_perturbed = x;
    res.label_after = source;
    res.queries = budget.used();
    return res;
  }

  auto query = [&](const FeatureVector& v) { return budget.label(v); };
  auto is_adversarial = [&](const FeatureVector& v) { return goal.satisfied(source, query(v)); };

  struct Located {
    SegmentBracket bracket;
    ClassId outside_label;
  };

  // Shrinks the segment [x, outside] until the boundary is pinned within tol.
  auto binary_search = [&](const FeatureVector& outside, ClassId outside_label) {
    const Vector span = outside - x;
    const double length = span.norm();
    double lo = 0.0, hi = 1.0;
    ClassId hi_label = outside_label;
    while ((hi - lo) * length > tol) {
      const double mid = 0.5 * (lo + hi);
      const ClassId label = query(x + mid * span);
      if (goal.satisfied(source, label)) {
        hi = mid;
        hi_label = label;
      } else {
        lo = mid;
      }
    }
    return Located{SegmentBracket{x + lo * span, x + hi * span}, hi_label};
  };

  std::optional<Located> best;
  try {
    // Seeded random search at geometrically growing radii.
    FeatureVector start;
    ClassId start_label = source;
    for (double radius = 0.25; radius <= 1024.0 && start.size() == 0; radius *= 2.0) {
      for (int attempt = 0; attempt < 20; ++attempt) {
        Vector u = gaussian_vector(rng, d);
        u /= u.norm();
        FeatureVector candidate = x + radius * u;
        const ClassId label = query(candidate);
        if (goal.satisfied(source, label)) {
          start = std::move(candidate);
          start_label = label;
          break;
        }
      }
    }
    if (start.size() == 0) {
      throw AttackFailed(failure_message(AttackKind::kHopSkipJump, "no adversarial starting point found"),
                         budget.used(), 0);
    }
    best = binary_search(start, start_label);
    FeatureVector boundary = best->bracket.outside;
    double best_distance = (boundary - x).norm();

    for (int round = 1; round <= cfg.hsj_iterations; ++round) {
      const double distance = (boundary - x).norm();
      if (distance <= 0.0) break;
      const double probe = std::max(tol, distance / static_cast<double>(d));
      const int evals = std::min<int>(cfg.hsj_max_evals,
                                      static_cast<int>(cfg.hsj_initial_evals * std::sqrt(static_cast<double>(round))));

      // Monte-Carlo estimate of the boundary normal at `boundary`.
      Matrix directions(d, evals);
      Vector votes(evals);
      for (int b = 0; b < evals; ++b) {
        Vector u = gaussian_vector(rng, d);
        u /= u.norm();
        directions.col(b) = u;
        votes(b) = is_adversarial(boundary + probe * u) ? 1.0 : -1.0;
      }
      const double mean_vote = votes.mean();
      if (std::abs(mean_vote) < 1.0) votes.array() -= mean_vote;
      Vector normal = directions * votes;
      const double normal_norm = normal.norm();
      if (normal_norm <= 0.0) break;
      normal /= normal_norm;

      // Geometric step-size search along the estimated normal.
      double step = distance / std::sqrt(static_cast<double>(round));
      std::optional<ClassId> stepped_label;
      for (int halvings = 0; halvings < 30; ++halvings) {
        const ClassId label = query(boundary + step * normal);
        if (goal.satisfied(source, label)) {
          stepped_label = label;
          break;
        }
        step *= 0.5;
      }
      ++res.iterations;
      if (!stepped_label) break;

      Located located = binary_search(boundary + step * normal, *stepped_label);
      boundary = located.bracket.outside;
      const double new_distance = (boundary - x).norm();
      if (new_distance < best_distance) {
        best_distance = new_distance;
        best = std::move(located);
      }
    }
  } catch (const QueryBudgetExhausted&) {
    if (!best) {
      throw AttackFailed(failure_message(AttackKind::kHopSkipJump, "query budget exhausted"),
                         budget.used(), 0);
    }
  }

  // Every outside end was labelled by the oracle during the search.
  res.x_perturbed = best->bracket.outside;
  res.label_after = best->outside_label;
  res.last_bracket = best->bracket;
  res.queries = budget.used();
  res.epsilon_used = (res.x_perturbed - x).norm();
  return res;
}

AttackResult run_attack(const DifferentiableClassifier& model, const FeatureVector& x,
                        std::optional<ClassId> target, const AttackConfig& cfg) {
  switch (cfg.kind) {
    case AttackKind::kFgsm: return fgsm_attack(model, x, target, cfg);
    case AttackKind::kPgd: return pgd_attack(model, x, target, cfg);
    case AttackKind::kDeepFool: return deepfool_attack(model, x, target, cfg);
    case AttackKind::kHopSkipJump: {
      const LabelOnlyView view(model);
      return hopskipjump_attack(view, x, target, cfg);
    }
  }
  throw PreconditionError("unknown attack kind");
}

}  // namespace able
