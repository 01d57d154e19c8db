#include "able/able.hpp"

#include <chrono>
#include <cmath>

#include "able/metrics.hpp"

namespace able {

void NeighborhoodConfig::validate() const {
  if (!(radius > 0.0)) throw PreconditionError("neighborhood radius must be > 0");
  if (count < 1) throw PreconditionError("neighborhood count must be >= 1");
}

Vector bounded_gaussian_perturbation(Rng& rng, Eigen::Index dim, double radius) {
  Vector z = gaussian_vector(rng, dim);
  const double norm = z.norm();
  if (norm > radius) z *= radius / norm;
  return z;
}

Matrix sample_ball(const FeatureVector& center, double radius, int count, std::uint64_t seed) {
  if (radius < 0.0) throw PreconditionError("radius must be >= 0");
  Rng rng(seed);
  Matrix points(count, center.size());
  for (int i = 0; i < count; ++i) {
    points.row(i) = (center + bounded_gaussian_perturbation(rng, center.size(), radius)).transpose();
  }
  return points;
}

Neighborhood sample_neighborhood(const LabelOracle& model, const FeatureVector& x_test,
                                 const NeighborhoodConfig& cfg) {
  cfg.validate();
  if (x_test.size() != model.num_features()) throw PreconditionError("test point has the wrong dimension");
  Neighborhood nb;
  nb.points.resize(cfg.count, x_test.size());
  nb.points.row(0) = x_test.transpose();
  if (cfg.count > 1) {
    nb.points.bottomRows(cfg.count - 1) = sample_ball(x_test, cfg.radius, cfg.count - 1, cfg.seed);
  }
  nb.labels.reserve(static_cast<std::size_t>(cfg.count));
  for (Eigen::Index i = 0; i < nb.points.rows(); ++i) {
    nb.labels.push_back(model.predict_label(nb.points.row(i).transpose()));
  }
  return nb;
}

AdversarialPair generate_pair(const DifferentiableClassifier& model, const FeatureVector& x_i, ClassId y_i,
                              const AttackConfig& attack, int num_classes, std::size_t source_index) {
  AdversarialPair pair;
  pair.source_index = source_index;

  const AttackResult forward = run_attack(model, x_i, std::nullopt, attack);
  pair.attack_queries += forward.queries;
  pair.attack_gradients += forward.gradient_calls;
  pair.escalations += static_cast<std::uint64_t>(forward.escalations);
  if (forward.label_before != y_i) {
    throw PreconditionError("generate_pair: y_i does not match the model's label for x_i");
  }

  const std::optional<ClassId> reverse_target =
      num_classes > 2 ? std::optional<ClassId>(y_i) : std::nullopt;
  AttackResult reverse;
  try {
    reverse = run_attack(model, forward.x_perturbed, reverse_target, attack);
  } catch (const AttackFailed& e) {
    throw AttackFailed(std::string("reverse ") + e.what(), pair.attack_queries + e.queries(),
                       pair.attack_gradients + e.gradient_calls());
  }
  pair.attack_queries += reverse.queries;
  pair.attack_gradients += reverse.gradient_calls;
  pair.escalations += static_cast<std::uint64_t>(reverse.escalations);

  pair.x_adv = forward.x_perturbed;
  pair.x_rev = reverse.x_perturbed;
  pair.epsilon_forward = forward.epsilon_used;
  pair.epsilon_reverse = reverse.epsilon_used;
  // These two queries are the labels the surrogate is trained on.
  pair.label_adv = model.predict_label(pair.x_adv);
  pair.label_rev = model.predict_label(pair.x_rev);
  if (pair.label_adv == y_i || pair.label_rev != y_i) {
    throw AttackFailed("pair does not bracket the boundary on re-query", pair.attack_queries,
                       pair.attack_gradients);
  }
  return pair;
}

LabeledPoints build_pair_dataset(std::span<const AdversarialPair> pairs) {
  if (pairs.empty()) throw ExplanationFailed("no adversarial pairs; cannot build a surrogate", 0);
  LabeledPoints data;
  const Eigen::Index d = pairs.front().x_adv.size();
  data.x.resize(static_cast<Eigen::Index>(2 * pairs.size()), d);
  data.y.reserve(2 * pairs.size());
  Eigen::Index row = 0;
  for (const auto& pair : pairs) {
    data.x.row(row++) = pair.x_adv.transpose();
    data.y.push_back(pair.label_adv);
    data.x.row(row++) = pair.x_rev.transpose();
    data.y.push_back(pair.label_rev);
  }
  return data;
}

std::string_view to_string(FidelityDomain domain) {
  return domain == FidelityDomain::kPairs ? "pairs" : "neighborhood";
}

FidelityDomain fidelity_domain_from_string(std::string_view name) {
  if (name == "pairs") return FidelityDomain::kPairs;
  if (name == "neighborhood") return FidelityDomain::kNeighborhood;
  throw PreconditionError("unknown fidelity domain '" + std::string(name) + "'");
}

void AbleConfig::validate() const {
  neighborhood.validate();
  attack.validate();
  if (top_k < 1) throw PreconditionError("top_k must be >= 1");
  if (!(evaluation_fraction > 0.0)) throw PreconditionError("evaluation_fraction must be > 0");
  if (surrogate.l2 < 0.0) throw PreconditionError("surrogate l2 must be >= 0");
}

namespace {

struct PairRun {
  std::vector<AdversarialPair> pairs;
  std::size_t failed = 0;
  std::uint64_t failed_queries = 0;
  std::uint64_t failed_gradients = 0;
};

PairRun generate_pairs(const DifferentiableClassifier& model, const Neighborhood& nb, const AttackConfig& attack) {
  PairRun run;
  for (Eigen::Index i = 0; i < nb.size(); ++i) {
    try {
      run.pairs.push_back(generate_pair(model, nb.points.row(i).transpose(), nb.labels[static_cast<std::size_t>(i)],
                                        attack, model.num_classes(), static_cast<std::size_t>(i)));
    } catch (const AttackFailed& e) {
      ++run.failed;
      run.failed_queries += e.queries();
      run.failed_gradients += e.gradient_calls();
    }
  }
  return run;
}

}  // namespace

Explanation explain(const DifferentiableClassifier& model, const FeatureVector& x_test, const AbleConfig& cfg,
                    std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  const Eigen::Index d = model.num_features();
  if (x_test.size() != d) throw PreconditionError("test point has the wrong dimension");
  if (static_cast<Eigen::Index>(cfg.top_k) > d) throw PreconditionError("top_k exceeds the number of features");

  NeighborhoodConfig nb_cfg = cfg.neighborhood;
  nb_cfg.seed = derive_seed(seed, "neighborhood");
  AttackConfig attack = cfg.attack;
  attack.seed = derive_seed(seed, "attack");

  Explanation e;
  e.explainer = "ABLE_" + std::string(to_string(attack.kind));
  e.instance = x_test;
  e.seed = seed;

  // Step 1: bounded neighborhood, test point first.
  const Neighborhood nb = sample_neighborhood(model, x_test, nb_cfg);
  e.queries.neighborhood_labels = static_cast<std::uint64_t>(nb.size());
  e.predicted_class = nb.labels.front();

  // Step 2: bracketing pairs.
  PairRun run = generate_pairs(model, nb, attack);
  e.pairs_used = run.pairs.size();
  e.failed_points = run.failed;
  e.queries.attack_labels = run.failed_queries;
  e.queries.attack_gradients = run.failed_gradients;
  for (const auto& p : run.pairs) {
    e.queries.attack_labels += p.attack_queries;
    e.queries.attack_gradients += p.attack_gradients;
    e.epsilons.escalations += p.escalations;
    e.epsilons.forward_mean += p.epsilon_forward;
    e.epsilons.reverse_mean += p.epsilon_reverse;
    e.epsilons.forward_max = std::max(e.epsilons.forward_max, p.epsilon_forward);
    e.epsilons.reverse_max = std::max(e.epsilons.reverse_max, p.epsilon_reverse);
  }
  if (run.pairs.empty()) {
    throw ExplanationFailed("all " + std::to_string(run.failed) + " neighborhood points failed to produce a pair",
                            run.failed);
  }
  e.epsilons.forward_mean /= static_cast<double>(run.pairs.size());
  e.epsilons.reverse_mean /= static_cast<double>(run.pairs.size());
  e.queries.labeling = 2 * static_cast<std::uint64_t>(run.pairs.size());

  // Step 3: surrogate on the bracketing set.
  const LabeledPoints data = build_pair_dataset(run.pairs);
  e.surrogate = data.distinct_labels().size() == 2 ? fit_binary_surrogate(data, cfg.surrogate)
                                                   : fit_multinomial_surrogate(data, cfg.surrogate);
  if (!e.surrogate.has_class(e.predicted_class)) {
    throw ExplanationFailed("the predicted class never appears in the bracketing set", run.failed);
  }
  e.attribution = e.surrogate.attribution_for(e.predicted_class);
  e.top_features = top_k_features(e.attribution, cfg.top_k, cfg.feature_names);

  // Fidelity on a disjoint, freshly sampled evaluation neighborhood.
  const int eval_count = static_cast<int>(std::ceil(cfg.evaluation_fraction * cfg.neighborhood.count));
  const Matrix fresh = sample_ball(x_test, cfg.neighborhood.radius, eval_count, derive_seed(seed, "evaluation"));
  Matrix eval_points;
  if (cfg.fidelity_domain == FidelityDomain::kNeighborhood) {
    eval_points = fresh;
  } else {
    Neighborhood eval_nb;
    eval_nb.points = fresh;
    eval_nb.includes_test = false;
    for (Eigen::Index i = 0; i < fresh.rows(); ++i) eval_nb.labels.push_back(model.predict_label(fresh.row(i).transpose()));
    e.queries.evaluation += static_cast<std::uint64_t>(fresh.rows());
    AttackConfig eval_attack = attack;
    eval_attack.seed = derive_seed(seed, "evaluation-attack");
    const PairRun eval_run = generate_pairs(model, eval_nb, eval_attack);
    e.queries.evaluation += eval_run.failed_queries + eval_run.failed_gradients;
    for (const auto& p : eval_run.pairs) e.queries.evaluation += p.attack_queries + p.attack_gradients + 2;
    if (!eval_run.pairs.empty()) eval_points = build_pair_dataset(eval_run.pairs).x;
  }

  std::vector<double> f, g;
  for (Eigen::Index i = 0; i < eval_points.rows(); ++i) {
    const FeatureVector p = eval_points.row(i).transpose();
    f.push_back(model.predict_proba(p)(e.predicted_class));
    g.push_back(e.surrogate.probability_of(p, e.predicted_class));
  }
  e.queries.evaluation += static_cast<std::uint64_t>(eval_points.rows());
  e.fidelity_points = f.size();
  if (f.size() < 2) {
    e.fidelity_note = "fewer than two evaluation points";
  } else {
    try {
      e.fidelity_r2 = fidelity_r2(f, g);
    } catch (const DegenerateNeighborhood& err) {
      e.fidelity_note = err.what();
    }
  }

  e.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return e;
}

AbleExplainer::AbleExplainer(AbleConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::string AbleExplainer::name() const { return "ABLE_" + std::string(to_string(cfg_.attack.kind)); }

Explanation AbleExplainer::explain(const DifferentiableClassifier& model, const FeatureVector& x,
                                   std::uint64_t seed) const {
  return able::explain(model, x, cfg_, seed);
}

}  // namespace able
