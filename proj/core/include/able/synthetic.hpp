#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "able/tabular.hpp"

namespace able {

enum class SyntheticKind { kMoons, kBlobs };

std::string_view to_string(SyntheticKind kind);
SyntheticKind synthetic_kind_from_string(std::string_view name);

struct SyntheticConfig {
  SyntheticKind kind = SyntheticKind::kMoons;
  int samples = 1000;
  /// Blobs only; moons are always two classes.
  int classes = 2;
  /// Total feature count. The first two coordinates carry the class
  /// structure before mixing; the rest are Gaussian nuisance noise.
  int dim = 8;
  /// Gaussian jitter on the two structured coordinates.
  double noise = 0.1;
  /// Std of the nuisance coordinates.
  double nuisance_std = 0.5;
  /// Blobs: x2 += curvature * x1^2, bending the class boundaries.
  double curvature = 0.5;
  /// Rotate all coordinates by a seeded random orthogonal matrix so that
  /// every raw feature mixes signal and noise.
  bool mix = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticData {
  Matrix x;
  std::vector<ClassId> y;
  int num_classes = 2;
  std::vector<std::string> feature_names;
};

SyntheticData make_synthetic(const SyntheticConfig& cfg);

/// Round-trips the data through CSV text so it goes down exactly the same
/// loading path as a file on disk. The label column is named "label".
LoadedTable synthetic_table(const SyntheticData& data);

void write_synthetic_csv(const SyntheticData& data, const std::filesystem::path& path);

}  // namespace able
