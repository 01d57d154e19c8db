#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "able/classifier.hpp"
#include "able/tabular.hpp"

namespace able {

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
};

/// Fully connected ReLU network with a softmax head over C outputs. Two-class
/// problems also use two softmax outputs; a network with no hidden layer is a
/// plain linear softmax model.
class MlpClassifier final : public DifferentiableClassifier {
 public:
  MlpClassifier() = default;
  explicit MlpClassifier(std::vector<DenseLayer> layers);

  /// Glorot-uniform weights, zero biases.
  static MlpClassifier initialize(const std::vector<Eigen::Index>& layer_dims, std::uint64_t seed);

  Eigen::Index num_features() const override;
  int num_classes() const override;
  Vector predict_proba(const FeatureVector& x) const override;
  Vector logits(const FeatureVector& x) const override;
  Vector input_gradient(const FeatureVector& x, ClassId target_class,
                        GradientMode mode) const override;

  /// Row-wise logits for a batch (rows x C).
  Matrix batch_logits(const Matrix& x) const;
  double accuracy(const Dataset& ds) const;

  /// Smallest |pre-activation| over all hidden units at x; infinity when the
  /// network has no hidden layer. Used to steer finite differences off kinks.
  double min_abs_preactivation(const FeatureVector& x) const;

  std::vector<Eigen::Index> layer_dims() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }

 private:
  void check_input(const FeatureVector& x) const;

  std::vector<DenseLayer> layers_;
};

struct TrainConfig {
  int epochs = 60;
  double learning_rate = 0.05;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double l2 = 1e-4;
  double momentum = 0.9;
  std::vector<Eigen::Index> hidden = {64, 32};

  void validate() const;
};

/// Raised when the training loss turns non-finite.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

struct TrainReport {
  int best_epoch = 0;
  double best_validation_accuracy = 0.0;
  std::vector<double> epoch_losses;
};

/// Mini-batch SGD with momentum on mean cross-entropy plus L2. Returns the
/// snapshot with the best validation accuracy (earliest epoch on ties).
MlpClassifier train_mlp(const Dataset& train, const Dataset& validation, const TrainConfig& cfg,
                        TrainReport* report = nullptr);

/// Everything needed to score raw CSV rows later.
struct ModelBundle {
  MlpClassifier model;
  FeatureSchema schema;
  Standardizer standardizer;
  TrainConfig train_config;
  std::uint64_t split_seed = 0;
  double test_accuracy = 0.0;
};

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kModelFormatTag = "able-model";

void save_model(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_model(const std::filesystem::path& path);
std::string serialize_model(const ModelBundle& bundle);
ModelBundle deserialize_model(const std::string& text);

}  // namespace able
