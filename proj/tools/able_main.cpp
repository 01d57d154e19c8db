// able: train target models, explain predictions, run comparisons and sweeps.

#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "able/harness.hpp"
#include "able/metrics.hpp"

namespace {

using namespace able;

// Flags shared by every experiment-driven subcommand. Anything set on the
// command line wins over the config file.
struct Overrides {
  std::string config;
  std::optional<std::string> data;
  std::optional<std::string> label;
  std::optional<std::string> model;
  std::optional<std::string> synthetic;
  std::optional<std::vector<std::string>> explainers;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::size_t> instances;
  std::optional<double> radius;
  std::optional<int> count;
  std::optional<std::size_t> top_k;
  std::optional<int> workers;
  std::optional<double> surrogate_l2;
  std::optional<std::string> fidelity_domain;
  std::optional<int> lime_samples;
  std::optional<int> epochs;
  std::optional<std::uint64_t> train_seed;
};

void add_data_options(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
  app->add_option("--data", o.data, "CSV dataset");
  app->add_option("--label", o.label, "label column name");
  app->add_option("--model", o.model, "saved model (trains one when omitted)");
  app->add_option("--synthetic", o.synthetic, "generate data instead of reading a CSV: moons or blobs");
  app->add_option("--epochs", o.epochs, "training epochs");
  app->add_option("--train-seed", o.train_seed, "training seed");
}

void add_experiment_options(CLI::App* app, Overrides& o) {
  add_data_options(app, o);
  app->add_option("--explainers", o.explainers, "ABLE_FGSM ABLE_PGD ABLE_DEEPFOOL ABLE_HSJ LIME")->delimiter(',');
  app->add_option("--seeds", o.seeds, "explainer seeds")->delimiter(',');
  app->add_option("--num-instances", o.instances, "test instances per seed");
  app->add_option("-r,--radius", o.radius, "neighborhood radius");
  app->add_option("-n,--neighbors", o.count, "neighborhood size, test point included");
  app->add_option("-K,--top-k", o.top_k, "features reported per explanation");
  app->add_option("--workers", o.workers, "worker threads");
  app->add_option("--surrogate-l2", o.surrogate_l2, "ABLE surrogate L2 strength");
  app->add_option("--fidelity-domain", o.fidelity_domain, "pairs or neighborhood");
  app->add_option("--lime-samples", o.lime_samples, "LIME sample count");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.data) c.dataset = *o.data;
  if (o.label) c.label_column = *o.label;
  if (o.model) c.model = *o.model;
  if (o.synthetic) {
    SyntheticConfig s = c.synthetic.value_or(SyntheticConfig{});
    s.kind = synthetic_kind_from_string(*o.synthetic);
    c.synthetic = s;
    if (!o.data) c.dataset.clear();
  }
  if (o.explainers) c.explainers = *o.explainers;
  if (o.seeds) c.seeds = *o.seeds;
  if (o.instances) c.num_test_instances = *o.instances;
  if (o.radius) c.radius = *o.radius;
  if (o.count) c.neighborhood_size = *o.count;
  if (o.top_k) c.top_k = *o.top_k;
  if (o.workers) c.workers = *o.workers;
  if (o.surrogate_l2) c.able.surrogate.l2 = *o.surrogate_l2;
  if (o.fidelity_domain) c.able.fidelity_domain = fidelity_domain_from_string(*o.fidelity_domain);
  if (o.lime_samples) c.lime.num_samples = *o.lime_samples;
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.train_seed) c.train.seed = *o.train_seed;
  return c;
}

std::size_t parse_index(const std::string& text) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw PreconditionError("bad instance index '" + text + "'");
  }
  return v;
}

// "0..4", "3", or "1,5,7"; ranges are inclusive.
std::vector<std::size_t> parse_instances(const std::string& spec) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t comma = std::min(spec.find(',', start), spec.size());
    const std::string part = spec.substr(start, comma - start);
    const std::size_t dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_index(part));
    } else {
      const std::size_t lo = parse_index(part.substr(0, dots));
      const std::size_t hi = parse_index(part.substr(dots + 2));
      if (hi < lo) throw PreconditionError("empty instance range '" + part + "'");
      for (std::size_t i = lo; i <= hi; ++i) out.push_back(i);
    }
    start = comma + 1;
  }
  return out;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

int cmd_train(const Overrides& o, const std::string& out_path, const std::string& config_out) {
  ExperimentConfig c = resolve(o);
  if (c.dataset.empty() && !c.synthetic) throw PreconditionError("train needs --data or --synthetic");
  const LoadedTable table =
      c.dataset.empty() ? synthetic_table(make_synthetic(*c.synthetic)) : load_csv(c.dataset, c.label_column);
  TrainReport report;
  const ModelBundle bundle = train_bundle(table, c.train, c.split_seed, &report);
  save_model(bundle, out_path);
  std::cout << "test_accuracy " << bundle.test_accuracy << "\n"
            << "best_epoch " << report.best_epoch << "\n"
            << "validation_accuracy " << report.best_validation_accuracy << "\n"
            << "model " << out_path << "\n";
  if (!config_out.empty()) {
    c.model = out_path;
    open_output(config_out) << config_to_json(c) << '\n';
  }
  return 0;
}

int cmd_explain(const Overrides& o, const std::string& explainer_name, const std::string& instances,
                std::uint64_t seed, bool no_runtime) {
  // Checked before anything is loaded so a typo fails fast.
  if (!is_known_explainer(explainer_name)) {
    std::cerr << "error: unknown explainer '" << explainer_name << "'\n";
    return 1;
  }
  ExperimentConfig c = resolve(o);
  c.explainers = {explainer_name};
  const PreparedExperiment prep = prepare(c);
  const auto explainer = make_explainer(explainer_name, c, prep.bundle.schema.feature_names());
  std::size_t failures = 0;
  for (std::size_t id : parse_instances(instances)) {
    if (id >= static_cast<std::size_t>(prep.test.rows())) {
      throw PreconditionError("instance " + std::to_string(id) + " is outside the test split (" +
                              std::to_string(prep.test.rows()) + " rows)");
    }
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(id));
    try {
      const Explanation e = explainer->explain(prep.bundle.model, prep.test.x.row(static_cast<Eigen::Index>(id)).transpose(), s);
      std::cout << to_json_line(e, static_cast<long long>(id), !no_runtime) << '\n' << std::flush;
    } catch (const ExplanationFailed& err) {
      ++failures;
      std::cout << failure_json_line(explainer->name(), static_cast<long long>(id), s, err.what(), err.failed_points())
                << '\n';
    } catch (const Error& err) {
      ++failures;
      std::cout << failure_json_line(explainer->name(), static_cast<long long>(id), s, err.what(), 0) << '\n';
    }
  }
  return exit_code_for(failures);
}

int cmd_compare(const Overrides& o, const std::string& report_path, const std::string& summary_path) {
  const ExperimentConfig c = resolve(o);
  const PreparedExperiment prep = prepare(c);
  std::cerr << "model test accuracy " << prep.bundle.test_accuracy << ", " << prep.instances.size()
            << " instances x " << c.seeds.size() << " seeds x " << c.explainers.size() << " explainers\n";
  const CompareResult result = run_compare(prep, c);
  if (report_path == "-") {
    write_report_csv(std::cout, result.rows);
  } else {
    auto out = open_output(report_path);
    write_report_csv(out, result.rows);
  }
  const auto summary = summarize(result.rows);
  write_summary(std::cerr, prep.dataset_name, summary);
  if (!summary_path.empty()) {
    auto out = open_output(summary_path);
    write_summary(out, prep.dataset_name, summary);
  }
  return exit_code_for(result.failures);
}

int cmd_sweep(const Overrides& o, const std::string& grid_path, const std::vector<double>& radii,
              const std::vector<int>& sizes, const std::string& explainer) {
  ExperimentConfig c = resolve(o);
  if (!radii.empty()) c.sweep_radii = radii;
  if (!sizes.empty()) c.sweep_sizes = sizes;
  if (!explainer.empty()) c.sweep_explainer = explainer;
  const PreparedExperiment prep = prepare(c);
  const SweepResult sweep = run_sweep(prep, c);
  if (grid_path == "-") {
    write_sweep_csv(std::cout, sweep);
  } else {
    auto out = open_output(grid_path);
    write_sweep_csv(out, sweep);
    write_sweep_csv(std::cerr, sweep);
  }
  return exit_code_for(sweep.failures);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarially bracketed local explanations for tabular classifiers"};
  app.require_subcommand(1);

  Overrides o;
  std::string out_path = "model.json";
  std::string config_out;
  auto* train = app.add_subcommand("train", "train an MLP target model and save it");
  add_data_options(train, o);
  train->add_option("-o,--out", out_path, "model file to write");
  train->add_option("--write-config", config_out, "also write an experiment config pointing at the model");

  std::string explainer_name = "ABLE_FGSM";
  std::string instances = "0";
  std::uint64_t seed = default_seed();
  bool no_runtime = false;
  auto* explain = app.add_subcommand("explain", "explain test-split instances, one JSON line each");
  add_experiment_options(explain, o);
  explain->add_option("-e,--explainer", explainer_name, "explainer name");
  explain->add_option("--instances", instances, "test-split rows, e.g. 0..4 or 1,3,9");
  explain->add_option("--seed", seed, "explainer seed (default: $ABLE_SEED or 0)");
  explain->add_flag("--no-runtime", no_runtime, "omit runtime_ms so output is reproducible byte for byte");

  std::string report_path = "report.csv";
  std::string summary_path;
  auto* compare = app.add_subcommand("compare", "explainer x seed x instance comparison");
  add_experiment_options(compare, o);
  compare->add_option("-o,--out", report_path, "report CSV ('-' for stdout)");
  compare->add_option("--summary", summary_path, "also write the summary table here");

  std::string grid_path = "sweep.csv";
  std::vector<double> radii;
  std::vector<int> sizes;
  std::string sweep_explainer;
  auto* sweep = app.add_subcommand("sweep", "mean fidelity over an (r, n) grid");
  add_experiment_options(sweep, o);
  sweep->add_option("-o,--out", grid_path, "grid CSV ('-' for stdout)");
  sweep->add_option("--r-grid", radii, "radii")->delimiter(',');
  sweep->add_option("--n-grid", sizes, "neighborhood sizes")->delimiter(',');
  sweep->add_option("--explainer", sweep_explainer, "explainer to sweep");

  SyntheticConfig syn;
  std::string syn_kind = "moons";
  std::string syn_out = "synthetic.csv";
  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic classification CSV");
  gen->add_option("--kind", syn_kind, "moons or blobs");
  gen->add_option("--samples", syn.samples, "rows");
  gen->add_option("--classes", syn.classes, "classes (blobs, 2-4)");
  gen->add_option("--dim", syn.dim, "feature count");
  gen->add_option("--noise", syn.noise, "jitter on the structured coordinates");
  gen->add_option("--nuisance-std", syn.nuisance_std, "std of the nuisance coordinates");
  gen->add_option("--curvature", syn.curvature, "boundary bend for blobs");
  gen->add_option("--seed", syn.seed, "generator seed");
  gen->add_flag("!--no-mix", syn.mix, "keep the structured coordinates axis-aligned");
  gen->add_option("-o,--out", syn_out, "CSV to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*train) return cmd_train(o, out_path, config_out);
    if (*explain) return cmd_explain(o, explainer_name, instances, seed, no_runtime);
    if (*compare) return cmd_compare(o, report_path, summary_path);
    if (*sweep) return cmd_sweep(o, grid_path, radii, sizes, sweep_explainer);
    if (*gen) {
      syn.kind = synthetic_kind_from_string(syn_kind);
      const SyntheticData data = make_synthetic(syn);
      write_synthetic_csv(data, syn_out);
      std::cout << "wrote " << data.x.rows() << " rows x " << data.x.cols() << " features, " << data.num_classes
                << " classes to " << syn_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
