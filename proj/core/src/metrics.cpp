#include "able/metrics.hpp"

#include <algorithm>
#include <set>

#include "able/able.hpp"

namespace able {

FidelityReport fidelity_report(std::span<const double> f, std::span<const double> g) {
  if (f.size() != g.size()) throw PreconditionError("fidelity: f and g differ in length");
  if (f.size() < 2) throw PreconditionError("fidelity: need at least two evaluation points");
  double mean = 0.0;
  for (double v : f) mean += v;
  mean /= static_cast<double>(f.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    ss_tot += (f[i] - mean) * (f[i] - mean);
    ss_res += (f[i] - g[i]) * (f[i] - g[i]);
  }
  if (ss_tot / static_cast<double>(f.size()) < kMinFidelityVariance) {
    throw DegenerateNeighborhood("degenerate neighborhood: target outputs are constant over the evaluation points, R^2 is undefined");
  }
  return {1.0 - ss_res / ss_tot, f.size(), mean};
}

double fidelity_r2(std::span<const double> f, std::span<const double> g) { return fidelity_report(f, g).r2; }

double jaccard_top_k(std::span<const Eigen::Index> a, std::span<const Eigen::Index> b) {
  const std::set<Eigen::Index> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  if (sa.empty() || sb.empty()) throw PreconditionError("jaccard: feature sets must be non-empty");
  std::size_t inter = 0;
  for (Eigen::Index v : sa) inter += sb.count(v);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

FeatureVector stability_perturbation(const FeatureVector& x_test, double perturb_radius, std::uint64_t seed) {
  if (perturb_radius < 0.0) throw PreconditionError("perturbation radius must be >= 0");
  Rng rng(derive_seed(seed, "stability"));
  return x_test + bounded_gaussian_perturbation(rng, x_test.size(), perturb_radius);
}

StabilityReport stability_eval(const Explainer& explainer, const DifferentiableClassifier& model,
                               const FeatureVector& x_test, std::size_t k, double perturb_radius,
                               std::uint64_t seed) {
  if (k == 0 || static_cast<Eigen::Index>(k) > x_test.size())
    throw PreconditionError("stability: K must be in [1, d]");
  const FeatureVector x_pert = stability_perturbation(x_test, perturb_radius, seed);
  StabilityReport r;
  r.k = k;
  r.original = explainer.explain(model, x_test, seed);
  r.perturbed = explainer.explain(model, x_pert, seed);
  r.features_original = top_k_indices(r.original.attribution, k);
  r.features_perturbed = top_k_indices(r.perturbed.attribution, k);
  r.jaccard = jaccard_top_k(r.features_original, r.features_perturbed);
  return r;
}

}  // namespace able
