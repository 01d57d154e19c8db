#include "able/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "able/metrics.hpp"
#include "able/random.hpp"

namespace able {

using Json = nlohmann::json;

std::uint64_t default_seed() {
  const char* raw = std::getenv(std::string(kSeedEnvVar).c_str());
  if (raw == nullptr) return 0;
  std::uint64_t value = 0;
  const char* end = raw + std::char_traits<char>::length(raw);
  auto [ptr, ec] = std::from_chars(raw, end, value);
  if (ec != std::errc() || ptr != end) return 0;
  return value;
}

ExperimentConfig::ExperimentConfig() {
  const std::uint64_t base = default_seed();
  for (std::uint64_t i = 0; i < 10; ++i) seeds.push_back(base + i);
}

std::vector<std::string> known_explainers() {
  return {"ABLE_FGSM", "ABLE_PGD", "ABLE_DEEPFOOL", "ABLE_HSJ", "LIME"};
}

bool is_known_explainer(std::string_view name) {
  const auto names = known_explainers();
  return std::find(names.begin(), names.end(), name) != names.end();
}

void ExperimentConfig::validate() const {
  if (explainers.empty()) throw PreconditionError("config needs at least one explainer");
  for (const auto& e : explainers) {
    if (!is_known_explainer(e)) throw PreconditionError("unknown explainer '" + e + "'");
  }
  if (!is_known_explainer(sweep_explainer)) throw PreconditionError("unknown sweep explainer '" + sweep_explainer + "'");
  if (seeds.empty()) throw PreconditionError("config needs at least one seed");
  if (num_test_instances < 1) throw PreconditionError("num_test_instances must be >= 1");
  if (!(radius > 0.0)) throw PreconditionError("r must be > 0");
  if (neighborhood_size < 1) throw PreconditionError("n must be >= 1");
  if (top_k < 1) throw PreconditionError("K must be >= 1");
  if (stability_radius < 0.0) throw PreconditionError("stability_radius must be >= 0");
  if (sweep_radii.empty() || sweep_sizes.empty()) throw PreconditionError("sweep grids must be non-empty");
  if (workers < 1) throw PreconditionError("workers must be >= 1");
  if (dataset.empty() && !synthetic) throw PreconditionError("config needs a dataset path or a synthetic section");
  if (synthetic) synthetic->validate();
  train.validate();
  lime.validate();
}

namespace {

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw PreconditionError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw PreconditionError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw PreconditionError(std::string("config key '") + key + "': " + e.what());
  }
}

void read_train(const Json& j, TrainConfig& t) {
  check_keys(j, {"epochs", "learning_rate", "batch_size", "seed", "l2", "momentum", "hidden"}, "train");
  read(j, "epochs", t.epochs);
  read(j, "learning_rate", t.learning_rate);
  read(j, "batch_size", t.batch_size);
  read(j, "seed", t.seed);
  read(j, "l2", t.l2);
  read(j, "momentum", t.momentum);
  read(j, "hidden", t.hidden);
}

void read_synthetic(const Json& j, SyntheticConfig& s) {
  check_keys(j, {"kind", "samples", "classes", "dim", "noise", "nuisance_std", "curvature", "mix", "seed"},
             "synthetic");
  if (j.contains("kind")) s.kind = synthetic_kind_from_string(j.at("kind").get<std::string>());
  read(j, "samples", s.samples);
  read(j, "classes", s.classes);
  read(j, "dim", s.dim);
  read(j, "noise", s.noise);
  read(j, "nuisance_std", s.nuisance_std);
  read(j, "curvature", s.curvature);
  read(j, "mix", s.mix);
  read(j, "seed", s.seed);
}

void read_able(const Json& j, AbleConfig& a) {
  check_keys(j,
             {"surrogate_l2", "fidelity_domain", "evaluation_fraction", "epsilon0", "epsilon_step", "epsilon_max",
              "pgd_steps", "pgd_alpha_fraction", "df_overshoot", "df_max_iters", "hsj_max_queries", "hsj_theta",
              "hsj_iterations", "hsj_initial_evals", "hsj_max_evals"},
             "able");
  read(j, "surrogate_l2", a.surrogate.l2);
  if (j.contains("fidelity_domain")) {
    a.fidelity_domain = fidelity_domain_from_string(j.at("fidelity_domain").get<std::string>());
  }
  read(j, "evaluation_fraction", a.evaluation_fraction);
  read(j, "epsilon0", a.attack.epsilon0);
  read(j, "epsilon_step", a.attack.epsilon_step);
  read(j, "epsilon_max", a.attack.epsilon_max);
  read(j, "pgd_steps", a.attack.pgd_steps);
  read(j, "pgd_alpha_fraction", a.attack.pgd_alpha_fraction);
  read(j, "df_overshoot", a.attack.df_overshoot);
  read(j, "df_max_iters", a.attack.df_max_iters);
  read(j, "hsj_max_queries", a.attack.hsj_max_queries);
  read(j, "hsj_theta", a.attack.hsj_theta);
  read(j, "hsj_iterations", a.attack.hsj_iterations);
  read(j, "hsj_initial_evals", a.attack.hsj_initial_evals);
  read(j, "hsj_max_evals", a.attack.hsj_max_evals);
}

void read_lime(const Json& j, LimeConfig& l) {
  check_keys(j, {"num_samples", "kernel_width", "perturb_std", "ridge"}, "lime");
  read(j, "num_samples", l.num_samples);
  read(j, "kernel_width", l.kernel_width);
  read(j, "perturb_std", l.perturb_std);
  read(j, "ridge", l.ridge);
}

void read_sweep(const Json& j, ExperimentConfig& c) {
  check_keys(j, {"r", "n", "explainer"}, "sweep");
  read(j, "r", c.sweep_radii);
  read(j, "n", c.sweep_sizes);
  read(j, "explainer", c.sweep_explainer);
}

}  // namespace

ExperimentConfig config_from_json(std::string_view text, ExperimentConfig base) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw PreconditionError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j,
             {"dataset", "dataset_name", "label_column", "synthetic", "model", "train", "split_seed", "explainers",
              "num_test_instances", "instance_seed", "seeds", "r", "n", "K", "stability_radius", "stability",
              "able", "lime", "sweep", "workers"},
             "config");
  ExperimentConfig& c = base;
  read(j, "dataset", c.dataset);
  read(j, "dataset_name", c.dataset_name);
  read(j, "label_column", c.label_column);
  if (j.contains("synthetic")) {
    SyntheticConfig s = c.synthetic.value_or(SyntheticConfig{});
    read_synthetic(j.at("synthetic"), s);
    c.synthetic = s;
  }
  read(j, "model", c.model);
  if (j.contains("train")) read_train(j.at("train"), c.train);
  read(j, "split_seed", c.split_seed);
  read(j, "explainers", c.explainers);
  read(j, "num_test_instances", c.num_test_instances);
  read(j, "instance_seed", c.instance_seed);
  read(j, "seeds", c.seeds);
  read(j, "r", c.radius);
  read(j, "n", c.neighborhood_size);
  read(j, "K", c.top_k);
  read(j, "stability_radius", c.stability_radius);
  read(j, "stability", c.stability);
  if (j.contains("able")) read_able(j.at("able"), c.able);
  if (j.contains("lime")) read_lime(j.at("lime"), c.lime);
  if (j.contains("sweep")) read_sweep(j.at("sweep"), c);
  read(j, "workers", c.workers);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json(buffer.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["dataset"] = c.dataset;
  j["dataset_name"] = c.dataset_name;
  j["label_column"] = c.label_column;
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    j["synthetic"] = {{"kind", std::string(to_string(s.kind))},
                      {"samples", s.samples},
                      {"classes", s.classes},
                      {"dim", s.dim},
                      {"noise", s.noise},
                      {"nuisance_std", s.nuisance_std},
                      {"curvature", s.curvature},
                      {"mix", s.mix},
                      {"seed", s.seed}};
  }
  j["model"] = c.model;
  j["train"] = {{"epochs", c.train.epochs},   {"learning_rate", c.train.learning_rate},
                {"batch_size", c.train.batch_size}, {"seed", c.train.seed},
                {"l2", c.train.l2},           {"momentum", c.train.momentum},
                {"hidden", c.train.hidden}};
  j["split_seed"] = c.split_seed;
  j["explainers"] = c.explainers;
  j["num_test_instances"] = c.num_test_instances;
  j["instance_seed"] = c.instance_seed;
  j["seeds"] = c.seeds;
  j["r"] = c.radius;
  j["n"] = c.neighborhood_size;
  j["K"] = c.top_k;
  j["stability_radius"] = c.stability_radius;
  j["stability"] = c.stability;
  const auto& a = c.able;
  j["able"] = {{"surrogate_l2", a.surrogate.l2},
               {"fidelity_domain", std::string(to_string(a.fidelity_domain))},
               {"evaluation_fraction", a.evaluation_fraction},
               {"epsilon0", a.attack.epsilon0},
               {"epsilon_step", a.attack.epsilon_step},
               {"epsilon_max", a.attack.epsilon_max},
               {"pgd_steps", a.attack.pgd_steps},
               {"pgd_alpha_fraction", a.attack.pgd_alpha_fraction},
               {"df_overshoot", a.attack.df_overshoot},
               {"df_max_iters", a.attack.df_max_iters},
               {"hsj_max_queries", a.attack.hsj_max_queries},
               {"hsj_theta", a.attack.hsj_theta},
               {"hsj_iterations", a.attack.hsj_iterations},
               {"hsj_initial_evals", a.attack.hsj_initial_evals},
               {"hsj_max_evals", a.attack.hsj_max_evals}};
  j["lime"] = {{"num_samples", c.lime.num_samples},
               {"kernel_width", c.lime.kernel_width},
               {"perturb_std", c.lime.perturb_std},
               {"ridge", c.lime.ridge}};
  j["sweep"] = {{"r", c.sweep_radii}, {"n", c.sweep_sizes}, {"explainer", c.sweep_explainer}};
  j["workers"] = c.workers;
  return j.dump(2);
}

std::unique_ptr<Explainer> make_explainer(std::string_view name, const ExperimentConfig& cfg,
                                          const std::vector<std::string>& feature_names) {
  if (name == "LIME") {
    LimeConfig l = cfg.lime;
    l.top_k = cfg.top_k;
    l.feature_names = feature_names;
    return std::make_unique<LimeExplainer>(std::move(l));
  }
  if (name.starts_with("ABLE_") && is_known_explainer(name)) {
    AbleConfig a = cfg.able;
    a.attack.kind = attack_kind_from_string(name.substr(5));
    a.neighborhood.radius = cfg.radius;
    a.neighborhood.count = cfg.neighborhood_size;
    a.top_k = cfg.top_k;
    a.feature_names = feature_names;
    return std::make_unique<AbleExplainer>(std::move(a));
  }
  throw PreconditionError("unknown explainer '" + std::string(name) + "'");
}

ModelBundle train_bundle(const LoadedTable& table, const TrainConfig& train, std::uint64_t split_seed,
                         TrainReport* report) {
  EncodedData enc = encode_and_standardize(table.table, table.schema);
  const DatasetSplit split = split_dataset(enc.dataset, kDefaultSplit, split_seed);
  ModelBundle bundle;
  bundle.model = train_mlp(split.train, split.validation, train, report);
  bundle.schema = enc.dataset.schema;
  bundle.standardizer = std::move(enc.standardizer);
  bundle.train_config = train;
  bundle.split_seed = split_seed;
  bundle.test_accuracy = bundle.model.accuracy(split.test);
  return bundle;
}

PreparedExperiment prepare(const ExperimentConfig& cfg) {
  cfg.validate();
  PreparedExperiment prep;
  LoadedTable table;
  if (!cfg.dataset.empty()) {
    table = load_csv(cfg.dataset, cfg.label_column);
    prep.dataset_name = std::filesystem::path(cfg.dataset).stem().string();
  } else {
    table = synthetic_table(make_synthetic(*cfg.synthetic));
    prep.dataset_name = "synthetic-" + std::string(to_string(cfg.synthetic->kind));
  }
  if (!cfg.dataset_name.empty()) prep.dataset_name = cfg.dataset_name;

  Dataset full;
  if (!cfg.model.empty()) {
    prep.bundle = load_model(cfg.model);
    full = apply_encoding(table.table, prep.bundle.schema, prep.bundle.standardizer);
  } else {
    prep.bundle = train_bundle(table, cfg.train, cfg.split_seed);
    full = apply_encoding(table.table, prep.bundle.schema, prep.bundle.standardizer);
  }
  if (full.dim() != prep.bundle.model.num_features()) {
    throw DataError("dataset has " + std::to_string(full.dim()) + " features but the model expects " +
                    std::to_string(prep.bundle.model.num_features()));
  }
  prep.test = split_dataset(full, kDefaultSplit, prep.bundle.split_seed).test;

  std::vector<std::size_t> order(static_cast<std::size_t>(prep.test.rows()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(cfg.instance_seed, "instances"));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  order.resize(std::min(cfg.num_test_instances, order.size()));
  prep.instances = std::move(order);
  return prep;
}

namespace {

struct WorkItem {
  const Explainer* explainer;
  std::uint64_t seed;
  std::size_t instance;
};

ReportRow evaluate_item(const PreparedExperiment& prep, const WorkItem& item, const ExperimentConfig& cfg,
                        bool stability) {
  ReportRow row;
  row.dataset = prep.dataset_name;
  row.explainer = item.explainer->name();
  row.seed = item.seed;
  row.instance = item.instance;
  const FeatureVector x = prep.test.x.row(static_cast<Eigen::Index>(item.instance)).transpose();
  const std::uint64_t explain_seed = derive_seed(item.seed, static_cast<std::uint64_t>(item.instance));
  CountingClassifier counted(prep.bundle.model);
  try {
    const Explanation e = item.explainer->explain(counted, x, explain_seed);
    row.model_queries = counted.counts().total();
    row.fidelity_r2 = e.fidelity_r2;
    row.runtime_ms = e.runtime_ms;
    row.pairs_used = e.pairs_used;
    row.failed_points = e.failed_points;
    row.eps_mean = e.epsilons.forward_mean;
    row.eps_max = e.epsilons.forward_max;
    row.labeling_queries = e.queries.labeling;
    if (stability) {
      const FeatureVector x_pert = stability_perturbation(x, cfg.stability_radius, explain_seed);
      const Explanation p = item.explainer->explain(prep.bundle.model, x_pert, explain_seed);
      const std::size_t k = static_cast<std::size_t>(item.explainer->top_k());
      row.jaccard = jaccard_top_k(top_k_indices(e.attribution, k), top_k_indices(p.attribution, k));
    }
  } catch (const ExplanationFailed& err) {
    row.model_queries = counted.counts().total();
    row.failed_points = err.failed_points();
    row.error = err.what();
  } catch (const Error& err) {
    row.model_queries = counted.counts().total();
    row.error = err.what();
  }
  return row;
}

std::vector<ReportRow> run_items(const PreparedExperiment& prep, const std::vector<WorkItem>& items,
                                 const ExperimentConfig& cfg, bool stability) {
  std::vector<ReportRow> rows(items.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr hard_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      try {
        rows[i] = evaluate_item(prep, items[i], cfg, stability);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!hard_error) hard_error = std::current_exception();
        next = items.size();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), items.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (hard_error) std::rethrow_exception(hard_error);
  return rows;
}

std::vector<WorkItem> cross_product(const std::vector<std::unique_ptr<Explainer>>& explainers,
                                    const ExperimentConfig& cfg, const PreparedExperiment& prep) {
  std::vector<WorkItem> items;
  for (const auto& e : explainers) {
    for (std::uint64_t seed : cfg.seeds) {
      for (std::size_t instance : prep.instances) items.push_back({e.get(), seed, instance});
    }
  }
  return items;
}

std::string format_number(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

// Messages may contain commas or quotes; quote them the CSV way.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

CompareResult run_compare(const PreparedExperiment& prep, const ExperimentConfig& cfg) {
  cfg.validate();
  const auto names = prep.bundle.schema.feature_names();
  std::vector<std::unique_ptr<Explainer>> explainers;
  for (const auto& name : cfg.explainers) explainers.push_back(make_explainer(name, cfg, names));
  CompareResult result;
  result.rows = run_items(prep, cross_product(explainers, cfg, prep), cfg, cfg.stability);
  for (const auto& r : result.rows) result.failures += r.failed() ? 1 : 0;
  return result;
}

std::vector<std::string> report_header() {
  return {"version",   "dataset",     "explainer",     "seed",    "instance",
          "fidelity_r2", "jaccard",   "runtime_ms",    "pairs_used", "failed_points",
          "eps_mean",  "eps_max",     "labeling_queries", "model_queries", "error"};
}

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  const auto header = report_header();
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    out << kReportVersion << ',' << csv_field(r.dataset) << ',' << r.explainer << ',' << r.seed << ','
        << r.instance << ',' << format_optional(r.fidelity_r2) << ',' << format_optional(r.jaccard) << ','
        << format_number(r.runtime_ms) << ',' << r.pairs_used << ',' << r.failed_points << ','
        << format_number(r.eps_mean) << ',' << format_number(r.eps_max) << ',' << r.labeling_queries << ','
        << r.model_queries << ',' << csv_field(r.error) << '\n';
  }
}

std::vector<SummaryColumn> summarize(const std::vector<ReportRow>& rows) {
  std::vector<SummaryColumn> out;
  std::vector<std::vector<double>> fid, jac, time;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SummaryColumn& c) { return c.explainer == r.explainer; });
    if (it == out.end()) {
      out.push_back({r.explainer, std::nullopt, std::nullopt, 0.0, 0, 0});
      fid.emplace_back();
      jac.emplace_back();
      time.emplace_back();
      it = out.end() - 1;
    }
    const auto idx = static_cast<std::size_t>(it - out.begin());
    if (r.failed()) {
      ++it->failures;
      continue;
    }
    ++it->rows;
    if (r.fidelity_r2) fid[idx].push_back(*r.fidelity_r2);
    if (r.jaccard) jac[idx].push_back(*r.jaccard);
    time[idx].push_back(r.runtime_ms);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].fidelity = mean_of(fid[i]);
    out[i].jaccard = mean_of(jac[i]);
    out[i].runtime_ms = mean_of(time[i]).value_or(0.0);
  }
  return out;
}

void write_summary(std::ostream& out, const std::string& dataset, const std::vector<SummaryColumn>& summary) {
  constexpr int kLabel = 14;
  constexpr int kCell = 15;
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << *v;
    return s.str();
  };
  out << "dataset: " << dataset << '\n' << std::left << std::setw(kLabel) << "metric";
  for (const auto& c : summary) out << std::right << std::setw(kCell) << c.explainer;
  out << '\n';
  auto line = [&](const char* label, auto value) {
    out << std::left << std::setw(kLabel) << label;
    for (const auto& c : summary) out << std::right << std::setw(kCell) << value(c);
    out << '\n';
  };
  line("fidelity_r2", [&](const SummaryColumn& c) { return cell(c.fidelity); });
  line("jaccard", [&](const SummaryColumn& c) { return cell(c.jaccard); });
  line("runtime_ms", [&](const SummaryColumn& c) { return cell(c.runtime_ms); });
  line("rows", [](const SummaryColumn& c) { return std::to_string(c.rows); });
  line("failures", [](const SummaryColumn& c) { return std::to_string(c.failures); });
}

SweepResult run_sweep(const PreparedExperiment& prep, const ExperimentConfig& cfg) {
  cfg.validate();
  SweepResult sweep;
  sweep.radii = cfg.sweep_radii;
  sweep.sizes = cfg.sweep_sizes;
  const auto names = prep.bundle.schema.feature_names();
  for (double r : cfg.sweep_radii) {
    auto& line = sweep.mean.emplace_back();
    for (int n : cfg.sweep_sizes) {
      ExperimentConfig cell = cfg;
      cell.radius = r;
      cell.neighborhood_size = n;
      std::vector<std::unique_ptr<Explainer>> explainers;
      explainers.push_back(make_explainer(cfg.sweep_explainer, cell, names));
      const auto rows = run_items(prep, cross_product(explainers, cell, prep), cell, false);
      std::vector<double> fid;
      for (const auto& row : rows) {
        if (row.failed()) {
          ++sweep.failures;
        } else if (row.fidelity_r2) {
          fid.push_back(*row.fidelity_r2);
        }
      }
      line.push_back(mean_of(fid));
    }
  }
  return sweep;
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
  out << "r";
  for (int n : sweep.sizes) out << ",n=" << n;
  out << '\n';
  for (std::size_t i = 0; i < sweep.radii.size(); ++i) {
    out << format_number(sweep.radii[i]);
    for (const auto& v : sweep.mean[i]) out << ',' << format_optional(v);
    out << '\n';
  }
}

int exit_code_for(std::size_t failures) { return failures == 0 ? 0 : 2; }

}  // namespace able
