#include "able/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <Eigen/QR>

#include "able/random.hpp"

namespace able {

std::string_view to_string(SyntheticKind kind) { return kind == SyntheticKind::kMoons ? "moons" : "blobs"; }

SyntheticKind synthetic_kind_from_string(std::string_view name) {
  if (name == "moons") return SyntheticKind::kMoons;
  if (name == "blobs") return SyntheticKind::kBlobs;
  throw PreconditionError("unknown synthetic kind '" + std::string(name) + "' (expected moons or blobs)");
}

void SyntheticConfig::validate() const {
  if (samples < 10) throw PreconditionError("synthetic data needs at least 10 samples");
  if (dim < 2) throw PreconditionError("synthetic data needs dim >= 2");
  if (kind == SyntheticKind::kBlobs && (classes < 2 || classes > 4)) {
    throw PreconditionError("blobs support 2 to 4 classes");
  }
  if (noise < 0.0 || nuisance_std < 0.0) throw PreconditionError("noise levels must be >= 0");
}

namespace {

std::normal_distribution<double> unit_normal() { return std::normal_distribution<double>(0.0, 1.0); }

void fill_moons(const SyntheticConfig& cfg, Rng& rng, SyntheticData& out) {
  auto n01 = unit_normal();
  const int outer = cfg.samples - cfg.samples / 2;
  for (int i = 0; i < cfg.samples; ++i) {
    const bool upper = i < outer;
    const int j = upper ? i : i - outer;
    const int count = upper ? outer : cfg.samples - outer;
    const double t = count > 1 ? std::numbers::pi * j / (count - 1) : 0.0;
    const double a = upper ? std::cos(t) : 1.0 - std::cos(t);
    const double b = upper ? std::sin(t) : 0.5 - std::sin(t);
    out.x(i, 0) = a + cfg.noise * n01(rng);
    out.x(i, 1) = b + cfg.noise * n01(rng);
    out.y[static_cast<std::size_t>(i)] = upper ? 0 : 1;
  }
}

void fill_blobs(const SyntheticConfig& cfg, Rng& rng, SyntheticData& out) {
  auto n01 = unit_normal();
  for (int i = 0; i < cfg.samples; ++i) {
    const int c = i % cfg.classes;
    const double angle = 2.0 * std::numbers::pi * c / cfg.classes;
    const double u = 2.0 * std::cos(angle) + cfg.noise * n01(rng);
    const double v = 2.0 * std::sin(angle) + cfg.noise * n01(rng);
    out.x(i, 0) = u;
    out.x(i, 1) = v + cfg.curvature * u * u;
    out.y[static_cast<std::size_t>(i)] = c;
  }
}

}  // namespace

SyntheticData make_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, "synthetic"));
  SyntheticData out;
  out.num_classes = cfg.kind == SyntheticKind::kMoons ? 2 : cfg.classes;
  out.x = Matrix::Zero(cfg.samples, cfg.dim);
  out.y.assign(static_cast<std::size_t>(cfg.samples), 0);
  if (cfg.kind == SyntheticKind::kMoons) {
    fill_moons(cfg, rng, out);
  } else {
    fill_blobs(cfg, rng, out);
  }
  auto n01 = unit_normal();
  for (int i = 0; i < cfg.samples; ++i) {
    for (int j = 2; j < cfg.dim; ++j) out.x(i, j) = cfg.nuisance_std * n01(rng);
  }
  if (cfg.mix && cfg.dim > 2) {
    Matrix g(cfg.dim, cfg.dim);
    for (Eigen::Index k = 0; k < g.size(); ++k) g.data()[k] = n01(rng);
    const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
    out.x = out.x * q.transpose();
  }
  for (int j = 0; j < cfg.dim; ++j) out.feature_names.push_back("x" + std::to_string(j));
  return out;
}

LoadedTable synthetic_table(const SyntheticData& data) {
  std::stringstream buffer;
  write_csv(buffer, data.feature_names, data.x, data.y, "label");
  return parse_csv(buffer, "label", "<synthetic>");
}

void write_synthetic_csv(const SyntheticData& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_csv(out, data.feature_names, data.x, data.y, "label");
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

}  // namespace able
