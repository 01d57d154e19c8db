#include "able/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "able/classifier.hpp"
#include "lbfgs.hpp"

namespace able {

std::vector<ClassId> LabeledPoints::distinct_labels() const {
  std::set<ClassId> labels(y.begin(), y.end());
  return {labels.begin(), labels.end()};
}

bool SurrogateModel::has_class(ClassId c) const {
  return std::find(classes.begin(), classes.end(), c) != classes.end();
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

void check_training_set(const LabeledPoints& data) {
  if (data.x.rows() == 0) throw PreconditionError("surrogate training set is empty");
  if (static_cast<std::size_t>(data.x.rows()) != data.y.size()) {
    throw PreconditionError("surrogate training set: point and label counts differ");
  }
  if (!data.x.allFinite()) throw PreconditionError("surrogate training set has non-finite features");
}

}  // namespace

Vector SurrogateModel::class_probabilities(const FeatureVector& x) const {
  if (x.size() != dim()) throw PreconditionError("surrogate input has the wrong dimension");
  switch (kind) {
    case SurrogateKind::kLogistic: {
      const double p = sigmoid(weights.row(0).dot(x) + intercepts(0));
      Vector out(2);
      out << 1.0 - p, p;
      return out;
    }
    case SurrogateKind::kSoftmax:
      return softmax(weights * x + intercepts);
    case SurrogateKind::kLinear:
      break;
  }
  throw PreconditionError("linear surrogates do not produce class distributions");
}

double SurrogateModel::probability_of(const FeatureVector& x, ClassId c) const {
  if (kind == SurrogateKind::kLinear) {
    if (x.size() != dim()) throw PreconditionError("surrogate input has the wrong dimension");
    return weights.row(0).dot(x) + intercepts(0);
  }
  const auto it = std::find(classes.begin(), classes.end(), c);
  if (it == classes.end()) return 0.0;
  return class_probabilities(x)(it - classes.begin());
}

Vector SurrogateModel::attribution_for(ClassId c) const {
  switch (kind) {
    case SurrogateKind::kLinear:
      return weights.row(0).transpose();
    case SurrogateKind::kLogistic:
      if (c == classes.at(1)) return weights.row(0).transpose();
      if (c == classes.at(0)) return -weights.row(0).transpose();
      break;
    case SurrogateKind::kSoftmax: {
      const auto it = std::find(classes.begin(), classes.end(), c);
      if (it != classes.end()) return weights.row(it - classes.begin()).transpose();
      break;
    }
  }
  throw PreconditionError("class " + std::to_string(c) + " is not modelled by this surrogate");
}

ClassId SurrogateModel::predict(const FeatureVector& x) const {
  if (kind == SurrogateKind::kLinear) throw PreconditionError("linear surrogates do not classify");
  return classes.at(static_cast<std::size_t>(argmax(class_probabilities(x))));
}

void SurrogateModel::validate() const {
  if (!weights.allFinite() || !intercepts.allFinite()) throw Error("surrogate has non-finite parameters");
  if (weights.rows() != intercepts.size()) throw Error("surrogate weight/intercept shapes differ");
}

SurrogateModel fit_binary_surrogate(const LabeledPoints& data, const SurrogateFitOptions& opts) {
  check_training_set(data);
  const auto labels = data.distinct_labels();
  if (labels.size() != 2) {
    throw PreconditionError("binary surrogate needs exactly two labels, got " + std::to_string(labels.size()));
  }
  const Matrix& x = data.x;
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Vector target(n);
  for (Eigen::Index i = 0; i < n; ++i) target(i) = data.y[static_cast<std::size_t>(i)] == labels[1] ? 1.0 : 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);

  auto objective = [&](const Vector& theta, Vector& grad) {
    const auto w = theta.head(d);
    const double b = theta(d);
    const Vector z = (x * w).array() + b;
    double loss = 0.0;
    Vector residual(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      loss += softplus(z(i)) - target(i) * z(i);
      residual(i) = sigmoid(z(i)) - target(i);
    }
    grad.head(d) = inv_n * (x.transpose() * residual) + opts.l2 * w;
    grad(d) = inv_n * residual.sum();
    return inv_n * loss + 0.5 * opts.l2 * w.squaredNorm();
  };

  const auto result = detail::minimize_lbfgs(objective, Vector::Zero(d + 1), opts.gradient_tolerance,
                                             opts.max_iterations);
  SurrogateModel model;
  model.kind = SurrogateKind::kLogistic;
  model.weights = result.x.head(d).transpose();
  model.intercepts = Vector::Constant(1, result.x(d));
  model.classes = labels;
  model.trained_on = static_cast<std::size_t>(n);
  model.iterations = result.iterations;
  model.gradient_norm = result.gradient_norm;
  model.validate();
  return model;
}

SurrogateModel fit_multinomial_surrogate(const LabeledPoints& data, const SurrogateFitOptions& opts) {
  check_training_set(data);
  const auto labels = data.distinct_labels();
  if (labels.size() < 2) throw PreconditionError("multinomial surrogate needs at least two labels");
  const Matrix& x = data.x;
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const auto k = static_cast<Eigen::Index>(labels.size());
  std::vector<Eigen::Index> column(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    column[static_cast<std::size_t>(i)] =
        std::find(labels.begin(), labels.end(), data.y[static_cast<std::size_t>(i)]) - labels.begin();
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  // theta = [W row-major (k*d), b (k)]
  auto objective = [&](const Vector& theta, Vector& grad) {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(theta.data(), k, d);
    const auto b = theta.tail(k);
    Matrix z = (x * w.transpose()).rowwise() + b.transpose();  // n x k
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = z.row(i).maxCoeff();
      const double lse = m + std::log((z.row(i).array() - m).exp().sum());
      loss += lse - z(i, column[static_cast<std::size_t>(i)]);
      z.row(i) = (z.row(i).array() - lse).exp();
      z(i, column[static_cast<std::size_t>(i)]) -= 1.0;
    }
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gw(grad.data(), k, d);
    gw = inv_n * (z.transpose() * x) + opts.l2 * w;
    grad.tail(k) = inv_n * z.colwise().sum().transpose();
    return inv_n * loss + 0.5 * opts.l2 * w.squaredNorm();
  };

  const auto result = detail::minimize_lbfgs(objective, Vector::Zero(k * d + k), opts.gradient_tolerance,
                                             opts.max_iterations);
  SurrogateModel model;
  model.kind = SurrogateKind::kSoftmax;
  model.weights =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(result.x.data(), k, d);
  model.intercepts = result.x.tail(k);
  model.classes = labels;
  model.trained_on = static_cast<std::size_t>(n);
  model.iterations = result.iterations;
  model.gradient_norm = result.gradient_norm;
  model.validate();
  return model;
}

}  // namespace able
