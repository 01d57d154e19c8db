#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

#include "able/explanation.hpp"

namespace able {

/// Target-model outputs are (near) constant over the evaluation points, so
/// R^2 is undefined.
class DegenerateNeighborhood : public Error {
 public:
  using Error::Error;
};

inline constexpr double kMinFidelityVariance = 1e-12;

struct FidelityReport {
  double r2 = 0.0;
  std::size_t n_eval = 0;
  double target_mean = 0.0;
};

/// 1 - sum (f - g)^2 / sum (f - mean f)^2. Can be negative.
double fidelity_r2(std::span<const double> f, std::span<const double> g);
FidelityReport fidelity_report(std::span<const double> f, std::span<const double> g);

/// |A n B| / |A u B| over feature index sets; duplicates are ignored.
/// Both sets must be non-empty.
double jaccard_top_k(std::span<const Eigen::Index> a, std::span<const Eigen::Index> b);

struct StabilityReport {
  double jaccard = 0.0;
  std::size_t k = 0;
  std::vector<Eigen::Index> features_original;
  std::vector<Eigen::Index> features_perturbed;
  Explanation original;
  Explanation perturbed;
};

inline constexpr double kDefaultStabilityRadius = 0.1;

/// x_test plus bounded noise of the given radius, seeded from `seed`.
FeatureVector stability_perturbation(const FeatureVector& x_test, double perturb_radius, std::uint64_t seed);

/// Explains x_test and one bounded-noise copy of it (same explainer seed)
/// and compares their top-k feature sets.
StabilityReport stability_eval(const Explainer& explainer, const DifferentiableClassifier& model,
                               const FeatureVector& x_test, std::size_t k, double perturb_radius,
                               std::uint64_t seed);

/// Runs `op` and returns its result with the elapsed wall time in ms.
template <typename Op>
auto timed(Op&& op) {
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };
  if constexpr (std::is_void_v<std::invoke_result_t<Op>>) {
    std::forward<Op>(op)();
    return elapsed();
  } else {
    auto result = std::forward<Op>(op)();
    const double ms = elapsed();
    return std::pair<decltype(result), double>(std::move(result), ms);
  }
}

}  // namespace able
