#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "able/common.hpp"

namespace able {

enum class ColumnKind { kCategorical, kContinuous };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kContinuous;
};

/// Column layout of a CSV file plus the label encodings discovered while
/// reading it. `category_maps[i]` lists the categories of column i in code
/// order (code == position); it is empty for continuous columns.
struct FeatureSchema {
  std::vector<ColumnSpec> columns;
  std::string label_column;
  std::vector<std::vector<std::string>> category_maps;
  /// Distinct label values in class-index order.
  std::vector<std::string> label_classes;
  /// Per feature column, the encoded value used for missing cells (column
  /// mean for continuous, modal code for categorical). Set by encoding.
  std::vector<double> fill_values;

  std::size_t label_index() const;
  std::size_t num_features() const { return columns.empty() ? 0 : columns.size() - 1; }
  std::vector<std::string> feature_names() const;
  /// Integer code of `value` in column `column`; throws DataError if unknown.
  int category_code(std::size_t column, const std::string& value) const;
  void validate() const;
};

/// Parsed CSV cells, header excluded. Empty cells are missing values.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct Dataset {
  Matrix x;               // rows x d
  std::vector<ClassId> y;  // rows
  FeatureSchema schema;
  int num_classes = 2;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index dim() const { return x.cols(); }
  Dataset subset(const std::vector<std::size_t>& indices) const;
  void validate() const;
};

/// Per-column z-scoring with population variance. Constant columns get a
/// unit scale so that they map to zero.
struct Standardizer {
  Vector means;
  Vector stds;

  static Standardizer fit(const Matrix& x);
  Matrix transform(const Matrix& x) const;
  Vector transform(const Vector& x) const;
  Matrix inverse_transform(const Matrix& z) const;
};

struct LoadedTable {
  RawTable table;
  FeatureSchema schema;
};

/// Reads a header-first, comma-separated file. No quoting support.
LoadedTable load_csv(const std::filesystem::path& path, const std::string& label_column);
LoadedTable parse_csv(std::istream& in, const std::string& label_column,
                      const std::string& source_name = "<stream>");

struct EncodedData {
  Dataset dataset;
  Standardizer standardizer;
  /// Encoded but unscaled features, kept for round-trip checks.
  Matrix encoded;
};

/// Label-encodes categoricals, imputes missing cells (mean / mode) and fits a
/// standardizer over all feature columns.
EncodedData encode_and_standardize(const RawTable& table, const FeatureSchema& schema);

/// Applies an existing schema and standardizer to another table with the
/// same header, e.g. when re-reading a dataset for a saved model.
Dataset apply_encoding(const RawTable& table, const FeatureSchema& schema,
                       const Standardizer& standardizer);

/// Largest-remainder split sizes: floor every share, then hand the leftover
/// rows out by descending fractional remainder. Ties go to the first split,
/// then to later splits before earlier ones.
std::vector<std::size_t> split_sizes(std::size_t rows, const std::vector<double>& fractions);

struct DatasetSplit {
  Dataset train;
  Dataset validation;
  Dataset test;
  std::array<std::vector<std::size_t>, 3> indices;
};

inline constexpr std::array<double, 3> kDefaultSplit{0.70, 0.15, 0.15};

DatasetSplit split_dataset(const Dataset& ds, std::array<double, 3> fractions,
                           std::uint64_t seed);

/// Writes rows of numeric features and integer labels as CSV.
void write_csv(std::ostream& out, const std::vector<std::string>& feature_names,
               const Matrix& x, const std::vector<ClassId>& y,
               const std::string& label_name = "label");

}  // namespace able
