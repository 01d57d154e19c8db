#include "able/explanation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>


namespace able {

std::vector<Eigen::Index> top_k_indices(const Vector& attribution, std::size_t k) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(attribution.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(attribution(a)) > std::abs(attribution(b));
  });
  order.resize(std::min(k, order.size()));
  return order;
}

std::string feature_name(const std::vector<std::string>& names, Eigen::Index i) {
  if (i >= 0 && static_cast<std::size_t>(i) < names.size() && !names[static_cast<std::size_t>(i)].empty()) {
    return names[static_cast<std::size_t>(i)];
  }
  return "f" + std::to_string(i);
}

std::vector<FeatureAttribution> top_k_features(const Vector& attribution, std::size_t k,
                                               const std::vector<std::string>& names) {
  std::vector<FeatureAttribution> out;
  for (Eigen::Index i : top_k_indices(attribution, k)) {
    out.push_back({i, feature_name(names, i), attribution(i)});
  }
  return out;
}

namespace {

nlohmann::ordered_json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json();
}

}  // namespace

std::string to_json_line(const Explanation& e, long long instance_id, bool include_runtime) {
  nlohmann::ordered_json j;
  j["explainer"] = e.explainer;
  if (instance_id >= 0) j["instance"] = instance_id;
  j["seed"] = e.seed;
  j["predicted_class"] = e.predicted_class;
  auto& top = j["top_features"] = nlohmann::ordered_json::array();
  for (const auto& f : e.top_features) {
    top.push_back({{"index", f.index}, {"name", f.name}, {"weight", finite_or_null(f.weight)}});
  }
  j["fidelity_r2"] = e.fidelity_r2 ? finite_or_null(*e.fidelity_r2) : nlohmann::ordered_json();
  if (!e.fidelity_note.empty()) j["fidelity_note"] = e.fidelity_note;
  j["fidelity_points"] = e.fidelity_points;
  j["pairs_used"] = e.pairs_used;
  j["failed_points"] = e.failed_points;
  j["queries"] = {{"neighborhood", e.queries.neighborhood_labels}, {"attack_labels", e.queries.attack_labels},
                  {"attack_gradients", e.queries.attack_gradients}, {"labeling", e.queries.labeling},
                  {"evaluation", e.queries.evaluation},         {"total", e.queries.total()}};
  j["epsilon"] = {{"forward_mean", e.epsilons.forward_mean}, {"forward_max", e.epsilons.forward_max},
                  {"reverse_mean", e.epsilons.reverse_mean}, {"reverse_max", e.epsilons.reverse_max},
                  {"escalations", e.epsilons.escalations}};
  if (include_runtime) j["runtime_ms"] = e.runtime_ms;
  return j.dump();
}

std::string failure_json_line(const std::string& explainer, long long instance_id, std::uint64_t seed,
                              const std::string& message, std::size_t failed_points) {
  nlohmann::ordered_json j;
  j["explainer"] = explainer;
  if (instance_id >= 0) j["instance"] = instance_id;
  j["seed"] = seed;
  j["error"] = message;
  j["failed_points"] = failed_points;
  return j.dump();
}

}  // namespace able
