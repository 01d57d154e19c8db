#include "able/lime.hpp"

#include <chrono>
#include <cmath>

#include <Eigen/Cholesky>

#include "able/metrics.hpp"
#include "able/random.hpp"

namespace able {

double LimeConfig::kernel_width_for(Eigen::Index dim) const {
  return kernel_width > 0.0 ? kernel_width : 0.75 * std::sqrt(static_cast<double>(dim));
}

void LimeConfig::validate() const {
  if (num_samples < 10) throw PreconditionError("LIME needs num_samples >= 10");
  if (!(perturb_std > 0.0)) throw PreconditionError("perturb_std must be > 0");
  if (top_k < 1) throw PreconditionError("top_k must be >= 1");
  if (ridge < 0.0) throw PreconditionError("ridge must be >= 0");
}

Matrix lime_sample(const FeatureVector& x_test, const LimeConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, "lime-sample"));
  Matrix samples(cfg.num_samples, x_test.size());
  samples.row(0) = x_test.transpose();
  for (int i = 1; i < cfg.num_samples; ++i) {
    samples.row(i) = (x_test + cfg.perturb_std * gaussian_vector(rng, x_test.size())).transpose();
  }
  return samples;
}

double kernel_weight(const FeatureVector& x, const FeatureVector& x_test, double sigma) {
  if (!(sigma > 0.0)) throw PreconditionError("kernel width must be > 0");
  return std::exp(-(x - x_test).squaredNorm() / (sigma * sigma));
}

namespace {

// Normal equations of the intercept-augmented problem; the last coordinate
// is the intercept and is not penalized.
struct NormalSystem {
  Matrix a;
  Vector b;
};

NormalSystem normal_system(const Matrix& x, const Vector& y, const Vector& weights, double ridge) {
  if (x.rows() != y.size() || x.rows() != weights.size()) throw PreconditionError("ridge: size mismatch");
  const Eigen::Index d = x.cols();
  Matrix design(x.rows(), d + 1);
  design.leftCols(d) = x;
  design.col(d).setOnes();
  NormalSystem s;
  s.a = design.transpose() * weights.asDiagonal() * design;
  s.a.diagonal().head(d).array() += ridge;
  s.b = design.transpose() * (weights.array() * y.array()).matrix();
  return s;
}

RidgeSolution unpack(const Vector& theta, int iterations) {
  const Eigen::Index d = theta.size() - 1;
  return {theta.head(d), theta(d), iterations};
}

}  // namespace

RidgeSolution weighted_ridge_closed_form(const Matrix& x, const Vector& y, const Vector& weights, double ridge) {
  const NormalSystem s = normal_system(x, y, weights, ridge);
  return unpack(s.a.ldlt().solve(s.b), 0);
}

RidgeSolution weighted_ridge_cg(const Matrix& x, const Vector& y, const Vector& weights, double ridge,
                                double tolerance, int max_iterations) {
  const NormalSystem s = normal_system(x, y, weights, ridge);
  Vector theta = Vector::Zero(s.b.size());
  Vector r = s.b;
  Vector p = r;
  double rr = r.squaredNorm();
  const double stop = tolerance * tolerance * std::max(1.0, s.b.squaredNorm());
  int it = 0;
  while (it < max_iterations && rr > stop) {
    const Vector ap = s.a * p;
    const double alpha = rr / p.dot(ap);
    theta += alpha * p;
    r -= alpha * ap;
    const double rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
    ++it;
  }
  return unpack(theta, it);
}

Explanation lime_explain(const ProbabilisticClassifier& model, const FeatureVector& x_test, const LimeConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  const Eigen::Index d = model.num_features();
  if (x_test.size() != d) throw PreconditionError("test point has the wrong dimension");
  if (static_cast<Eigen::Index>(cfg.top_k) > d) throw PreconditionError("top_k exceeds the number of features");

  const Matrix samples = lime_sample(x_test, cfg);
  const double sigma = cfg.kernel_width_for(d);
  const Eigen::Index n = samples.rows();
  const Eigen::Index n_train = n - n / 3;

  Explanation e;
  e.explainer = "LIME";
  e.instance = x_test;
  e.seed = cfg.seed;

  Vector target(n), weights(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const FeatureVector p = samples.row(i).transpose();
    const Vector proba = model.predict_proba(p);
    if (i == 0) e.predicted_class = argmax(proba);
    target(i) = proba(e.predicted_class);
    weights(i) = kernel_weight(p, x_test, sigma);
  }
  e.queries.labeling = static_cast<std::uint64_t>(n_train);
  e.queries.evaluation = static_cast<std::uint64_t>(n - n_train);

  const RidgeSolution fit = weighted_ridge_closed_form(samples.topRows(n_train), target.head(n_train),
                                                      weights.head(n_train), cfg.ridge);
  e.surrogate.kind = SurrogateKind::kLinear;
  e.surrogate.weights = fit.coefficients.transpose();
  e.surrogate.intercepts = Vector::Constant(1, fit.intercept);
  e.surrogate.classes = {e.predicted_class};
  e.surrogate.trained_on = static_cast<std::size_t>(n_train);
  e.attribution = fit.coefficients;
  e.top_features = top_k_features(e.attribution, cfg.top_k, cfg.feature_names);

  std::vector<double> f, g;
  for (Eigen::Index i = n_train; i < n; ++i) {
    f.push_back(target(i));
    g.push_back(fit.intercept + samples.row(i).dot(fit.coefficients));
  }
  e.fidelity_points = f.size();
  try {
    e.fidelity_r2 = fidelity_r2(f, g);
  } catch (const DegenerateNeighborhood& err) {
    e.fidelity_note = err.what();
  }
  e.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return e;
}

LimeExplainer::LimeExplainer(LimeConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

Explanation LimeExplainer::explain(const DifferentiableClassifier& model, const FeatureVector& x,
                                   std::uint64_t seed) const {
  LimeConfig cfg = cfg_;
  cfg.seed = seed;
  return lime_explain(model, x, cfg);
}

}  // namespace able
