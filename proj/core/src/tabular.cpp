#include "able/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "able/random.hpp"

namespace able {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

}  // namespace

std::size_t FeatureSchema::label_index() const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == label_column) return i;
  }
  throw DataError("label column '" + label_column + "' not found in schema");
}

std::vector<std::string> FeatureSchema::feature_names() const {
  std::vector<std::string> names;
  for (const auto& c : columns) {
    if (c.name != label_column) names.push_back(c.name);
  }
  return names;
}

int FeatureSchema::category_code(std::size_t column, const std::string& value) const {
  const auto& cats = category_maps.at(column);
  const auto it = std::find(cats.begin(), cats.end(), value);
  if (it == cats.end()) {
    throw DataError("unknown category '" + value + "' in column '" + columns[column].name + "'");
  }
  return static_cast<int>(it - cats.begin());
}

void FeatureSchema::validate() const {
  std::set<std::string> seen;
  for (const auto& c : columns) {
    if (!seen.insert(c.name).second) throw DataError("duplicate column name '" + c.name + "'");
  }
  (void)label_index();
  if (category_maps.size() != columns.size()) {
    throw DataError("schema category map count does not match column count");
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.schema = schema;
  out.num_classes = num_classes;
  out.x.resize(static_cast<Eigen::Index>(indices.size()), x.cols());
  out.y.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(indices[i]));
    out.y.push_back(y[indices[i]]);
  }
  return out;
}

void Dataset::validate() const {
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw DataError("feature rows and label count differ");
  }
  if (!x.allFinite()) throw DataError("dataset contains non-finite feature values");
  if (num_classes < 2) throw DataError("dataset needs at least two classes");
  for (ClassId c : y) {
    if (c < 0 || c >= num_classes) throw DataError("label index out of range");
  }
}

Standardizer Standardizer::fit(const Matrix& x) {
  if (x.rows() == 0) throw PreconditionError("cannot fit a standardizer on zero rows");
  Standardizer s;
  s.means = x.colwise().mean().transpose();
  s.stds.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.means(j)).square().mean();
    const double sd = std::sqrt(var);
    // Constant columns stay inert at zero.
    s.stds(j) = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Matrix Standardizer::transform(const Matrix& x) const {
  return (x.rowwise() - means.transpose()).array().rowwise() / stds.transpose().array();
}

Vector Standardizer::transform(const Vector& x) const {
  return (x - means).array() / stds.array();
}

Matrix Standardizer::inverse_transform(const Matrix& z) const {
  return (z.array().rowwise() * stds.transpose().array()).matrix().rowwise() + means.transpose();
}

LoadedTable load_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file '" + path.string() + "'");
  return parse_csv(in, label_column, path.string());
}

LoadedTable parse_csv(std::istream& in, const std::string& label_column,
                      const std::string& source_name) {
  LoadedTable out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw DataError(source_name + ": missing header row");
  out.table.header = split_line(line);
  const std::size_t width = out.table.header.size();

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != width) {
      throw DataError(source_name + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " fields, expected " + std::to_string(width));
    }
    out.table.rows.push_back(std::move(cells));
  }

  FeatureSchema& schema = out.schema;
  schema.label_column = label_column;
  schema.columns.resize(width);
  schema.category_maps.resize(width);
  for (std::size_t j = 0; j < width; ++j) schema.columns[j].name = out.table.header[j];
  {
    std::set<std::string> seen;
    for (const auto& name : out.table.header) {
      if (name.empty()) throw DataError(source_name + ": empty column name in header");
      if (!seen.insert(name).second) throw DataError(source_name + ": duplicate column '" + name + "'");
    }
    if (!seen.contains(label_column)) {
      throw DataError(source_name + ": label column '" + label_column + "' not found");
    }
  }
  const std::size_t label_col = schema.label_index();

  for (std::size_t j = 0; j < width; ++j) {
    bool numeric = true;
    for (const auto& row : out.table.rows) {
      if (!row[j].empty() && !parse_number(row[j])) {
        numeric = false;
        break;
      }
    }
    schema.columns[j].kind = numeric ? ColumnKind::kContinuous : ColumnKind::kCategorical;
    if (!numeric && j != label_col) {
      auto& cats = schema.category_maps[j];
      for (const auto& row : out.table.rows) {
        const auto& cell = row[j];
        if (!cell.empty() && std::find(cats.begin(), cats.end(), cell) == cats.end()) {
          cats.push_back(cell);
        }
      }
    }
  }

  // Numeric labels are ordered by value so that "0"/"1" keep their meaning;
  // anything else is coded by first appearance.
  std::vector<std::string> labels;
  for (std::size_t r = 0; r < out.table.rows.size(); ++r) {
    const auto& cell = out.table.rows[r][label_col];
    if (cell.empty()) {
      throw DataError(source_name + ": missing label in data row " + std::to_string(r + 1));
    }
    if (std::find(labels.begin(), labels.end(), cell) == labels.end()) labels.push_back(cell);
  }
  if (schema.columns[label_col].kind == ColumnKind::kContinuous) {
    std::stable_sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
      return *parse_number(a) < *parse_number(b);
    });
  }
  schema.label_classes = std::move(labels);
  return out;
}

namespace {

struct EncodedColumns {
  Matrix values;  // rows x d, NaN where missing
  std::vector<std::size_t> source_columns;
};

EncodedColumns encode_cells(const RawTable& table, const FeatureSchema& schema) {
  const std::size_t label_col = schema.label_index();
  EncodedColumns enc;
  for (std::size_t j = 0; j < schema.columns.size(); ++j) {
    if (j != label_col) enc.source_columns.push_back(j);
  }
  const auto rows = static_cast<Eigen::Index>(table.rows.size());
  const auto d = static_cast<Eigen::Index>(enc.source_columns.size());
  enc.values.setConstant(rows, d, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = table.rows[static_cast<std::size_t>(r)];
    if (row.size() != schema.columns.size()) {
      throw DataError("row " + std::to_string(r + 1) + " does not match the schema width");
    }
    for (Eigen::Index k = 0; k < d; ++k) {
      const std::size_t j = enc.source_columns[static_cast<std::size_t>(k)];
      const auto& cell = row[j];
      if (cell.empty()) continue;
      if (schema.columns[j].kind == ColumnKind::kCategorical) {
        enc.values(r, k) = schema.category_code(j, cell);
      } else {
        const auto v = parse_number(cell);
        if (!v) {
          throw DataError("non-numeric value '" + cell + "' in continuous column '" +
                          schema.columns[j].name + "'");
        }
        enc.values(r, k) = *v;
      }
    }
  }
  return enc;
}

std::vector<ClassId> encode_labels(const RawTable& table, const FeatureSchema& schema) {
  const std::size_t label_col = schema.label_index();
  std::vector<ClassId> y;
  y.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cell = table.rows[r][label_col];
    const auto it = std::find(schema.label_classes.begin(), schema.label_classes.end(), cell);
    if (it == schema.label_classes.end()) {
      throw DataError("unknown label '" + cell + "' in data row " + std::to_string(r + 1));
    }
    y.push_back(static_cast<ClassId>(it - schema.label_classes.begin()));
  }
  return y;
}

}  // namespace

EncodedData encode_and_standardize(const RawTable& table, const FeatureSchema& schema_in) {
  schema_in.validate();
  if (table.rows.empty()) throw DataError("table has no data rows");
  FeatureSchema schema = schema_in;
  auto enc = encode_cells(table, schema);
  const Eigen::Index d = enc.values.cols();
  schema.fill_values.assign(static_cast<std::size_t>(d), 0.0);

  for (Eigen::Index k = 0; k < d; ++k) {
    const std::size_t j = enc.source_columns[static_cast<std::size_t>(k)];
    auto col = enc.values.col(k);
    double fill = 0.0;
    if (schema.columns[j].kind == ColumnKind::kCategorical) {
      std::map<int, std::size_t> counts;
      for (Eigen::Index r = 0; r < col.size(); ++r) {
        if (!std::isnan(col(r))) ++counts[static_cast<int>(col(r))];
      }
      if (counts.empty()) throw DataError("column '" + schema.columns[j].name + "' is entirely missing");
      std::size_t best = 0;
      for (const auto& [code, count] : counts) {
        if (count > best) {  // ascending code order, so ties keep the lower code
          best = count;
          fill = code;
        }
      }
    } else {
      double sum = 0.0;
      std::size_t present = 0;
      for (Eigen::Index r = 0; r < col.size(); ++r) {
        if (!std::isnan(col(r))) {
          sum += col(r);
          ++present;
        }
      }
      if (present == 0) throw DataError("column '" + schema.columns[j].name + "' is entirely missing");
      fill = sum / static_cast<double>(present);
    }
    for (Eigen::Index r = 0; r < col.size(); ++r) {
      if (std::isnan(col(r))) col(r) = fill;
    }
    schema.fill_values[static_cast<std::size_t>(k)] = fill;
  }

  EncodedData out;
  out.encoded = enc.values;
  out.standardizer = Standardizer::fit(enc.values);
  out.dataset.x = out.standardizer.transform(enc.values);
  out.dataset.y = encode_labels(table, schema);
  out.dataset.num_classes = static_cast<int>(schema.label_classes.size());
  out.dataset.schema = std::move(schema);
  out.dataset.validate();
  return out;
}

Dataset apply_encoding(const RawTable& table, const FeatureSchema& schema,
                       const Standardizer& standardizer) {
  schema.validate();
  if (table.header.size() != schema.columns.size()) {
    throw DataError("table header does not match the model schema");
  }
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j] != schema.columns[j].name) {
      throw DataError("column '" + table.header[j] + "' does not match schema column '" +
                      schema.columns[j].name + "'");
    }
  }
  auto enc = encode_cells(table, schema);
  if (schema.fill_values.size() != static_cast<std::size_t>(enc.values.cols())) {
    throw DataError("schema carries no imputation values; was it produced by encoding?");
  }
  for (Eigen::Index k = 0; k < enc.values.cols(); ++k) {
    for (Eigen::Index r = 0; r < enc.values.rows(); ++r) {
      if (std::isnan(enc.values(r, k))) enc.values(r, k) = schema.fill_values[static_cast<std::size_t>(k)];
    }
  }
  Dataset ds;
  ds.x = standardizer.transform(enc.values);
  ds.y = encode_labels(table, schema);
  ds.num_classes = static_cast<int>(schema.label_classes.size());
  ds.schema = schema;
  ds.validate();
  return ds;
}

std::vector<std::size_t> split_sizes(std::size_t rows, const std::vector<double>& fractions) {
  if (fractions.empty()) throw PreconditionError("no split fractions given");
  double total = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw PreconditionError("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw PreconditionError("split fractions must sum to 1");

  const std::size_t k = fractions.size();
  std::vector<std::size_t> sizes(k);
  std::vector<double> remainders(k);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double share = static_cast<double>(rows) * fractions[i];
    sizes[i] = static_cast<std::size_t>(std::floor(share));
    remainders[i] = share - std::floor(share);
    assigned += sizes[i];
  }
  // Tie priority: first split, then the remaining splits from last to first.
  std::vector<std::size_t> order(k);
  order[0] = 0;
  for (std::size_t i = 1; i < k; ++i) order[i] = k - i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t i = 0; assigned < rows; ++i, ++assigned) ++sizes[order[i % k]];
  return sizes;
}

DatasetSplit split_dataset(const Dataset& ds, std::array<double, 3> fractions, std::uint64_t seed) {
  const auto rows = static_cast<std::size_t>(ds.rows());
  if (rows < 10) throw PreconditionError("dataset has " + std::to_string(rows) + " rows; need at least 10 to split");
  const auto sizes = split_sizes(rows, {fractions.begin(), fractions.end()});

  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  // Explicit Fisher-Yates so the permutation only depends on the engine.
  for (std::size_t i = rows; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }

  DatasetSplit out;
  std::size_t offset = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    out.indices[s].assign(order.begin() + static_cast<std::ptrdiff_t>(offset),
                          order.begin() + static_cast<std::ptrdiff_t>(offset + sizes[s]));
    offset += sizes[s];
  }
  out.train = ds.subset(out.indices[0]);
  out.validation = ds.subset(out.indices[1]);
  out.test = ds.subset(out.indices[2]);
  return out;
}

void write_csv(std::ostream& out, const std::vector<std::string>& feature_names, const Matrix& x,
               const std::vector<ClassId>& y, const std::string& label_name) {
  if (feature_names.size() != static_cast<std::size_t>(x.cols()) ||
      y.size() != static_cast<std::size_t>(x.rows())) {
    throw PreconditionError("write_csv: shape mismatch");
  }
  for (const auto& name : feature_names) out << name << ',';
  out << label_name << '\n';
  char buf[64];
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x(r, c));
      out.write(buf, end - buf);
      out << ',';
    }
    out << y[static_cast<std::size_t>(r)] << '\n';
  }
}

}  // namespace able
