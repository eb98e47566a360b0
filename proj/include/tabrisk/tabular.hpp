#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tabrisk/common.hpp"

namespace tabrisk::tabular {

enum class FeatureKind { continuous, categorical };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view text);

struct FeatureSchema {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  bool critical = false;  // participates in the >50% missing exclusion rule
  std::string unit;
};

// Column-major feature storage; a cell is missing when missing[i] != 0.
// Continuous columns use `numeric`, categorical columns use `categories`.
struct Column {
  std::vector<double> numeric;
  std::vector<std::string> categories;
  std::vector<std::uint8_t> missing;
};

// Immutable after construction; safe to share across threads.
class Dataset {
 public:
  Dataset(std::vector<FeatureSchema> schema, std::vector<Column> columns,
          std::vector<int> labels, std::vector<std::int64_t> row_ids);

  const std::vector<FeatureSchema>& schema() const { return schema_; }
  std::size_t n_rows() const { return labels_.size(); }
  std::size_t n_features() const { return schema_.size(); }
  const Column& column(std::size_t feature) const { return columns_[feature]; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<std::int64_t>& row_ids() const { return row_ids_; }
  bool is_missing(std::size_t row, std::size_t feature) const {
    return columns_[feature].missing[row] != 0;
  }
  std::size_t feature_index(std::string_view name) const;  // throws DataError if absent

  Dataset subset(const std::vector<std::size_t>& rows) const;

 private:
  std::vector<FeatureSchema> schema_;
  std::vector<Column> columns_;
  std::vector<int> labels_;
  std::vector<std::int64_t> row_ids_;
};

struct SeriesWindow {
  std::vector<double> timestamps;  // hours, strictly increasing
  std::vector<double> values;
};

struct SeriesSummary {
  double mean;
  double max;
  double min;
};

// Per-feature parameters learned from training rows only.
struct ContinuousParams {
  double mean = 0.0;  // imputation value
  double min = 0.0;   // scaling range
  double max = 0.0;
};

struct CategoricalParams {
  std::string mode;                      // imputation value
  std::vector<std::string> vocabulary;   // one-hot order, lexicographic
};

struct FittedPreprocessor {
  std::vector<FeatureSchema> schema;
  std::vector<ContinuousParams> continuous;    // valid where schema[j] is continuous
  std::vector<CategoricalParams> categorical;  // valid where schema[j] is categorical

  std::size_t design_width() const;
  std::vector<std::string> design_column_names() const;
};

// Fully numeric design matrix after imputation, scaling and one-hot expansion.
struct DesignMatrix {
  Matrix X;
  std::vector<int> y;
  std::vector<std::string> column_names;
  std::vector<std::int64_t> row_ids;
  std::vector<std::string> warnings;  // e.g. unseen categories
};

struct SplitResult {
  Dataset train;
  Dataset test;
  std::uint64_t seed;
  double train_fraction;
};

struct ExclusionResult {
  Dataset kept;
  std::vector<std::int64_t> dropped;
};

// CSV: UTF-8, comma separated, one header row; "" and "NA" are missing.
Dataset load_csv(const std::filesystem::path& path, const std::vector<FeatureSchema>& schema,
                 const std::string& label_column);
void write_csv(std::ostream& out, const Dataset& dataset, const std::string& label_column);

SeriesSummary aggregate_series(const SeriesWindow& window);

// Drops rows with strictly more than 50% of the critical features missing.
ExclusionResult exclude_rows(const Dataset& dataset);

FittedPreprocessor fit_preprocessor(const Dataset& train);
DesignMatrix apply_preprocessor(const FittedPreprocessor& prep, const Dataset& dataset);

SplitResult split(const Dataset& dataset, double train_fraction, std::uint64_t seed);

// Schema file: one "feature <name> <kind> [critical] [unit=<text>]" line per
// feature plus a "label <column>" line.
struct SchemaFile {
  std::vector<FeatureSchema> features;
  std::string label_column;
};
SchemaFile parse_schema(const std::string& text);
SchemaFile read_schema_file(const std::filesystem::path& path);
std::string serialize_schema(const SchemaFile& schema);

void write_preprocessor(std::ostream& out, const FittedPreprocessor& prep);
FittedPreprocessor read_preprocessor(std::istream& in);

}  // namespace tabrisk::tabular
