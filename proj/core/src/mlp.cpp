#include "able/mlp.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "able/random.hpp"

namespace able {

MlpClassifier::MlpClassifier(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw PreconditionError("an MLP needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weights.rows()) {
      throw PreconditionError("layer " + std::to_string(l) + ": bias size does not match weights");
    }
    if (l > 0 && layer.weights.cols() != layers_[l - 1].weights.rows()) {
      throw PreconditionError("layer " + std::to_string(l) + ": input width does not match previous layer");
    }
  }
  if (layers_.back().weights.rows() < 2) throw PreconditionError("an MLP needs at least two outputs");
}

MlpClassifier MlpClassifier::initialize(const std::vector<Eigen::Index>& layer_dims, std::uint64_t seed) {
  if (layer_dims.size() < 2) throw PreconditionError("layer_dims needs an input and an output size");
  Rng rng(derive_seed(seed, "mlp-init"));
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const Eigen::Index fan_in = layer_dims[l];
    const Eigen::Index fan_out = layer_dims[l + 1];
    if (fan_in < 1 || fan_out < 1) throw PreconditionError("layer sizes must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> uniform(-limit, limit);
    DenseLayer layer;
    layer.weights.resize(fan_out, fan_in);
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weights(r, c) = uniform(rng);
    }
    layer.bias = Vector::Zero(fan_out);
    layers.push_back(std::move(layer));
  }
  return MlpClassifier(std::move(layers));
}

Eigen::Index MlpClassifier::num_features() const {
  return layers_.empty() ? 0 : layers_.front().weights.cols();
}

int MlpClassifier::num_classes() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().weights.rows());
}

std::vector<Eigen::Index> MlpClassifier::layer_dims() const {
  std::vector<Eigen::Index> dims;
  if (layers_.empty()) return dims;
  dims.push_back(layers_.front().weights.cols());
  for (const auto& layer : layers_) dims.push_back(layer.weights.rows());
  return dims;
}

void MlpClassifier::check_input(const FeatureVector& x) const {
  if (layers_.empty()) throw PreconditionError("model has no layers");
  if (x.size() != num_features()) {
    throw PreconditionError("input has " + std::to_string(x.size()) + " features, model expects " +
                            std::to_string(num_features()));
  }
}

Vector MlpClassifier::logits(const FeatureVector& x) const {
  check_input(x);
  Vector a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Vector z = layers_[l].weights * a + layers_[l].bias;
    a = (l + 1 < layers_.size()) ? Vector(z.cwiseMax(0.0)) : z;
  }
  return a;
}

Vector MlpClassifier::predict_proba(const FeatureVector& x) const { return softmax(logits(x)); }

Matrix MlpClassifier::batch_logits(const Matrix& x) const {
  if (x.cols() != num_features()) throw PreconditionError("batch width does not match the model");
  Matrix a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix z = (a * layers_[l].weights.transpose()).rowwise() + layers_[l].bias.transpose();
    a = (l + 1 < layers_.size()) ? Matrix(z.cwiseMax(0.0)) : z;
  }
  return a;
}

double MlpClassifier::accuracy(const Dataset& ds) const {
  if (ds.rows() == 0) return 0.0;
  const Matrix z = batch_logits(ds.x);
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    if (argmax(z.row(r).transpose()) == ds.y[static_cast<std::size_t>(r)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.rows());
}

double MlpClassifier::min_abs_preactivation(const FeatureVector& x) const {
  check_input(x);
  double smallest = std::numeric_limits<double>::infinity();
  Vector a = x;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    Vector z = layers_[l].weights * a + layers_[l].bias;
    smallest = std::min(smallest, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return smallest;
}

Vector MlpClassifier::input_gradient(const FeatureVector& x, ClassId target_class,
                                     GradientMode mode) const {
  check_input(x);
  if (target_class < 0 || target_class >= num_classes()) {
    throw PreconditionError("invalid class index " + std::to_string(target_class));
  }
  std::vector<Vector> pre;
  pre.reserve(layers_.size());
  Vector a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    pre.push_back(layers_[l].weights * a + layers_[l].bias);
    if (l + 1 < layers_.size()) a = pre.back().cwiseMax(0.0);
  }

  Vector upstream;
  if (mode == GradientMode::kLoss) {
    upstream = softmax(pre.back());
    upstream(target_class) -= 1.0;
  } else {
    upstream = Vector::Zero(num_classes());
    upstream(target_class) = 1.0;
  }
  for (std::size_t l = layers_.size(); l-- > 0;) {
    if (l + 1 < layers_.size()) {
      upstream = (pre[l].array() > 0.0).select(upstream, 0.0);
    }
    upstream = layers_[l].weights.transpose() * upstream;
  }
  return upstream;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw PreconditionError("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw PreconditionError("learning_rate must be > 0");
  if (batch_size < 1) throw PreconditionError("batch_size must be >= 1");
  if (l2 < 0.0) throw PreconditionError("l2 must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) throw PreconditionError("momentum must be in [0, 1)");
  for (auto h : hidden) {
    if (h < 1) throw PreconditionError("hidden layer sizes must be positive");
  }
}

MlpClassifier train_mlp(const Dataset& train, const Dataset& validation, const TrainConfig& cfg,
                        TrainReport* report) {
  cfg.validate();
  if (train.num_classes != validation.num_classes) {
    throw PreconditionError("train and validation sets disagree on the number of classes");
  }
  if (train.rows() == 0) throw PreconditionError("empty training set");
  if (train.dim() != validation.dim()) throw PreconditionError("train and validation widths differ");

  std::vector<Eigen::Index> dims{train.dim()};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(train.num_classes);
  MlpClassifier model = MlpClassifier::initialize(dims, cfg.seed);
  auto& layers = model.mutable_layers();
  const std::size_t depth = layers.size();

  std::vector<DenseLayer> velocity;
  for (const auto& layer : layers) {
    velocity.push_back({Matrix::Zero(layer.weights.rows(), layer.weights.cols()),
                        Vector::Zero(layer.bias.size())});
  }

  MlpClassifier best = model;
  double best_acc = -1.0;
  int best_epoch = 0;
  std::vector<double> losses;

  Rng rng(derive_seed(cfg.seed, "mlp-batches"));
  const auto n = static_cast<std::size_t>(train.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<Matrix> pre(depth), act(depth + 1);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      const auto b = static_cast<Eigen::Index>(stop - start);
      Matrix xb(b, train.dim());
      for (Eigen::Index r = 0; r < b; ++r) xb.row(r) = train.x.row(static_cast<Eigen::Index>(order[start + r]));

      act[0] = xb;
      for (std::size_t l = 0; l < depth; ++l) {
        pre[l] = (act[l] * layers[l].weights.transpose()).rowwise() + layers[l].bias.transpose();
        act[l + 1] = (l + 1 < depth) ? Matrix(pre[l].cwiseMax(0.0)) : pre[l];
      }

      Matrix delta(b, train.num_classes);
      double batch_loss = 0.0;
      for (Eigen::Index r = 0; r < b; ++r) {
        const Vector z = pre[depth - 1].row(r).transpose();
        const double m = z.maxCoeff();
        const double lse = m + std::log((z.array() - m).exp().sum());
        const ClassId label = train.y[order[start + r]];
        batch_loss += lse - z(label);
        delta.row(r) = (z.array() - lse).exp().matrix().transpose();
        delta(r, label) -= 1.0;
      }
      delta /= static_cast<double>(b);
      batch_loss /= static_cast<double>(b);
      if (!std::isfinite(batch_loss)) {
        throw TrainingDiverged("training loss became non-finite in epoch " + std::to_string(epoch + 1) +
                               "; try a smaller learning rate");
      }
      epoch_loss += batch_loss * static_cast<double>(b);

      for (std::size_t l = depth; l-- > 0;) {
        Matrix grad_w = delta.transpose() * act[l] + cfg.l2 * layers[l].weights;
        Vector grad_b = delta.colwise().sum().transpose();
        if (l > 0) {
          delta = (delta * layers[l].weights).cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
        }
        velocity[l].weights = cfg.momentum * velocity[l].weights - cfg.learning_rate * grad_w;
        velocity[l].bias = cfg.momentum * velocity[l].bias - cfg.learning_rate * grad_b;
        layers[l].weights += velocity[l].weights;
        layers[l].bias += velocity[l].bias;
      }
    }

    double penalty = 0.0;
    for (const auto& layer : layers) penalty += layer.weights.squaredNorm();
    epoch_loss = epoch_loss / static_cast<double>(n) + 0.5 * cfg.l2 * penalty;
    if (!std::isfinite(epoch_loss)) {
      throw TrainingDiverged("training loss became non-finite in epoch " + std::to_string(epoch + 1) +
                             "; try a smaller learning rate");
    }
    losses.push_back(epoch_loss);

    const double acc = model.accuracy(validation.rows() > 0 ? validation : train);
    if (acc > best_acc) {
      best_acc = acc;
      best = model;
      best_epoch = epoch + 1;
    }
  }

  if (report != nullptr) {
    report->best_epoch = best_epoch;
    report->best_validation_accuracy = best_acc;
    report->epoch_losses = std::move(losses);
  }
  return best;
}

}  // namespace able
