#include <fstream>
#include <sstream>

#include "able/mlp.hpp"
#include "json_util.hpp"

namespace able {

using detail::json;

namespace {

json schema_to_json(const FeatureSchema& schema) {
  json cols = json::array();
  for (std::size_t j = 0; j < schema.columns.size(); ++j) {
    cols.push_back({{"name", schema.columns[j].name},
                    {"kind", schema.columns[j].kind == ColumnKind::kCategorical ? "categorical" : "continuous"},
                    {"categories", schema.category_maps[j]}});
  }
  return {{"columns", cols},
          {"label_column", schema.label_column},
          {"label_classes", schema.label_classes},
          {"fill_values", schema.fill_values}};
}

FeatureSchema schema_from_json(const json& j) {
  FeatureSchema schema;
  for (const auto& col : j.at("columns")) {
    const auto kind = col.at("kind").get<std::string>();
    if (kind != "categorical" && kind != "continuous") throw DataError("unknown column kind '" + kind + "'");
    schema.columns.push_back({col.at("name").get<std::string>(),
                              kind == "categorical" ? ColumnKind::kCategorical : ColumnKind::kContinuous});
    schema.category_maps.push_back(col.at("categories").get<std::vector<std::string>>());
  }
  schema.label_column = j.at("label_column").get<std::string>();
  schema.label_classes = j.at("label_classes").get<std::vector<std::string>>();
  schema.fill_values = j.at("fill_values").get<std::vector<double>>();
  schema.validate();
  return schema;
}

}  // namespace

std::string serialize_model(const ModelBundle& bundle) {
  json layers = json::array();
  for (const auto& layer : bundle.model.layers()) {
    layers.push_back({{"weights", detail::matrix_to_json(layer.weights)},
                      {"bias", detail::vector_to_json(layer.bias)}});
  }
  const auto& tc = bundle.train_config;
  json doc = {
      {"format", kModelFormatTag},
      {"version", kModelFormatVersion},
      {"layer_dims", bundle.model.layer_dims()},
      {"layers", layers},
      {"standardizer",
       {{"means", detail::vector_to_json(bundle.standardizer.means)},
        {"stds", detail::vector_to_json(bundle.standardizer.stds)}}},
      {"schema", schema_to_json(bundle.schema)},
      {"train_config",
       {{"epochs", tc.epochs},
        {"learning_rate", tc.learning_rate},
        {"batch_size", tc.batch_size},
        {"seed", tc.seed},
        {"l2", tc.l2},
        {"momentum", tc.momentum},
        {"hidden", tc.hidden}}},
      {"split_seed", bundle.split_seed},
      {"test_accuracy", bundle.test_accuracy},
  };
  return doc.dump(1);
}

ModelBundle deserialize_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != kModelFormatTag) {
    throw DataError("not an able model file (missing format tag)");
  }
  const int version = doc.value("version", -1);
  if (version != kModelFormatVersion) {
    throw DataError("unsupported model format version " + std::to_string(version) + " (expected " +
                    std::to_string(kModelFormatVersion) + ")");
  }
  try {
    ModelBundle bundle;
    std::vector<DenseLayer> layers;
    for (const auto& layer : doc.at("layers")) {
      layers.push_back({detail::matrix_from_json(layer.at("weights")), detail::vector_from_json(layer.at("bias"))});
    }
    bundle.model = MlpClassifier(std::move(layers));
    if (bundle.model.layer_dims() != doc.at("layer_dims").get<std::vector<Eigen::Index>>()) {
      throw DataError("layer_dims do not match stored layers");
    }
    bundle.standardizer.means = detail::vector_from_json(doc.at("standardizer").at("means"));
    bundle.standardizer.stds = detail::vector_from_json(doc.at("standardizer").at("stds"));
    bundle.schema = schema_from_json(doc.at("schema"));
    const auto& tc = doc.at("train_config");
    bundle.train_config.epochs = tc.at("epochs").get<int>();
    bundle.train_config.learning_rate = tc.at("learning_rate").get<double>();
    bundle.train_config.batch_size = tc.at("batch_size").get<int>();
    bundle.train_config.seed = tc.at("seed").get<std::uint64_t>();
    bundle.train_config.l2 = tc.at("l2").get<double>();
    bundle.train_config.momentum = tc.at("momentum").get<double>();
    bundle.train_config.hidden = tc.at("hidden").get<std::vector<Eigen::Index>>();
    bundle.split_seed = doc.at("split_seed").get<std::uint64_t>();
    bundle.test_accuracy = doc.at("test_accuracy").get<double>();
    if (bundle.standardizer.means.size() != bundle.model.num_features() ||
        bundle.schema.num_features() != static_cast<std::size_t>(bundle.model.num_features())) {
      throw DataError("model file: standardizer/schema width does not match the network input");
    }
    return bundle;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  } catch (const PreconditionError& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const ModelBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file '" + path.string() + "'");
  out << serialize_model(bundle) << '\n';
}

ModelBundle load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace able
