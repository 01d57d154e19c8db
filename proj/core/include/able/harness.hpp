#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "able/able.hpp"
#include "able/lime.hpp"
#include "able/metrics.hpp"
#include "able/mlp.hpp"
#include "able/synthetic.hpp"

namespace able {

inline constexpr std::string_view kReportVersion = "able-report-1";
inline constexpr std::string_view kSeedEnvVar = "ABLE_SEED";

/// ABLE_SEED if set and numeric, otherwise 0.
std::uint64_t default_seed();

struct ExperimentConfig {
  /// CSV path. When empty, `synthetic` is generated instead.
  std::string dataset;
  /// Label used in reports; defaults to the file stem or "synthetic-<kind>".
  std::string dataset_name;
  std::string label_column = "label";
  std::optional<SyntheticConfig> synthetic;

  /// Saved model to load. When empty, a model is trained with `train`.
  std::string model;
  TrainConfig train;
  std::uint64_t split_seed = 0;

  std::vector<std::string> explainers{"ABLE_FGSM", "LIME"};
  std::size_t num_test_instances = 100;
  std::uint64_t instance_seed = 0;
  std::vector<std::uint64_t> seeds;

  double radius = 0.2;
  int neighborhood_size = 150;
  std::size_t top_k = 5;
  double stability_radius = kDefaultStabilityRadius;
  bool stability = true;

  /// Shared by every ABLE_* explainer; the attack kind comes from the name.
  AbleConfig able;
  LimeConfig lime;

  std::vector<double> sweep_radii{0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<int> sweep_sizes{50, 75, 100, 150};
  std::string sweep_explainer = "ABLE_FGSM";

  int workers = 1;

  /// Seeds default to ten consecutive values starting at default_seed().
  ExperimentConfig();
  void validate() const;
};

/// Parses a JSON config. Unknown keys are rejected so typos do not silently
/// fall back to defaults.
ExperimentConfig config_from_json(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

std::vector<std::string> known_explainers();
bool is_known_explainer(std::string_view name);

std::unique_ptr<Explainer> make_explainer(std::string_view name, const ExperimentConfig& cfg,
                                          const std::vector<std::string>& feature_names = {});

struct PreparedExperiment {
  ModelBundle bundle;
  Dataset test;
  /// Rows of `test` to explain, drawn without replacement.
  std::vector<std::size_t> instances;
  std::string dataset_name;
};

/// Loads or generates the data, loads or trains the model and picks the
/// test instances.
PreparedExperiment prepare(const ExperimentConfig& cfg);

/// Encodes, splits and trains; the bundle's test_accuracy is filled in.
ModelBundle train_bundle(const LoadedTable& table, const TrainConfig& train, std::uint64_t split_seed,
                         TrainReport* report = nullptr);

struct ReportRow {
  std::string dataset;
  std::string explainer;
  std::uint64_t seed = 0;
  std::size_t instance = 0;
  std::optional<double> fidelity_r2;
  std::optional<double> jaccard;
  double runtime_ms = 0.0;
  std::size_t pairs_used = 0;
  std::size_t failed_points = 0;
  double eps_mean = 0.0;
  double eps_max = 0.0;
  std::uint64_t labeling_queries = 0;
  /// Every model call made for the explanation, counted at the model.
  std::uint64_t model_queries = 0;
  std::string error;

  bool failed() const { return !error.empty(); }
};

struct CompareResult {
  std::vector<ReportRow> rows;
  std::size_t failures = 0;
};

/// Explainer x seed x instance, in that nesting order regardless of
/// cfg.workers.
CompareResult run_compare(const PreparedExperiment& prep, const ExperimentConfig& cfg);

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows);
std::vector<std::string> report_header();

struct SummaryColumn {
  std::string explainer;
  std::optional<double> fidelity;
  std::optional<double> jaccard;
  double runtime_ms = 0.0;
  std::size_t rows = 0;
  std::size_t failures = 0;
};

std::vector<SummaryColumn> summarize(const std::vector<ReportRow>& rows);
/// Metric rows by explainer columns.
void write_summary(std::ostream& out, const std::string& dataset, const std::vector<SummaryColumn>& summary);

struct SweepResult {
  std::vector<double> radii;
  std::vector<int> sizes;
  /// mean[i][j] is the mean fidelity at radii[i], sizes[j].
  std::vector<std::vector<std::optional<double>>> mean;
  std::size_t failures = 0;
};

SweepResult run_sweep(const PreparedExperiment& prep, const ExperimentConfig& cfg);
void write_sweep_csv(std::ostream& out, const SweepResult& sweep);

/// 0 when nothing failed, 2 when some work items failed.
int exit_code_for(std::size_t failures);

}  // namespace able
