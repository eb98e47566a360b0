#include "tabrisk/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "tabrisk/rng.hpp"

namespace tabrisk::tabular {
namespace {

bool is_missing_token(const std::string& token) { return token.empty() || token == "NA"; }

// Minimal RFC 4180 record reader: handles quoted fields, escaped quotes and
// quoted line breaks (physical lines are joined with '\n' while a quote is
// open, so "\r\n" inside a quoted field normalizes to "\n"). A quote only
// opens a quoted field at the start of a field. Returns false at end of
// input; line_no tracks the last physical line consumed.
bool read_csv_record(std::istream& in, std::size_t& line_no,
                     std::vector<std::string>& fields) {
  std::string line;
  if (!std::getline(in, line)) return false;
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  fields.clear();
  std::string field;
  bool quoted = false;
  std::size_t i = 0;
  while (true) {
    if (i >= line.size()) {
      if (!quoted) break;
      if (!std::getline(in, line))
        throw DataError("unterminated quote on line " + std::to_string(line_no));
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      field.push_back('\n');
      i = 0;
      continue;
    }
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else {
      field.push_back(c);
    }
    ++i;
  }
  fields.push_back(field);
  return true;
}

std::string escape_csv_field(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void validate_schema(const std::vector<FeatureSchema>& schema) {
  if (schema.empty()) throw DataError("schema must contain at least one feature");
  std::set<std::string> names;
  for (const auto& f : schema) {
    if (f.name.empty()) throw DataError("schema contains an unnamed feature");
    if (!names.insert(f.name).second)
      throw DataError("duplicate feature name in schema: " + f.name);
  }
}

}  // namespace

std::string to_string(FeatureKind kind) {
  return kind == FeatureKind::continuous ? "continuous" : "categorical";
}

FeatureKind feature_kind_from_string(std::string_view text) {
  if (text == "continuous") return FeatureKind::continuous;
  if (text == "categorical") return FeatureKind::categorical;
  throw DataError("unknown feature kind '" + std::string(text) + "'");
}

Dataset::Dataset(std::vector<FeatureSchema> schema, std::vector<Column> columns,
                 std::vector<int> labels, std::vector<std::int64_t> row_ids)
    : schema_(std::move(schema)),
      columns_(std::move(columns)),
      labels_(std::move(labels)),
      row_ids_(std::move(row_ids)) {
  validate_schema(schema_);
  if (columns_.size() != schema_.size())
    throw DataError("column count does not match schema");
  const std::size_t n = labels_.size();
  if (row_ids_.size() != n) throw DataError("row_ids length does not match labels");
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    const auto& col = columns_[j];
    if (col.missing.size() != n)
      throw DataError("missing mask length mismatch in feature " + schema_[j].name);
    if (schema_[j].kind == FeatureKind::continuous) {
      if (col.numeric.size() != n)
        throw DataError("numeric column length mismatch in feature " + schema_[j].name);
      for (std::size_t i = 0; i < n; ++i)
        if (!col.missing[i] && !std::isfinite(col.numeric[i]))
          throw DataError("non-finite value in feature " + schema_[j].name);
    } else if (col.categories.size() != n) {
      throw DataError("categorical column length mismatch in feature " + schema_[j].name);
    }
  }
  for (int label : labels_)
    if (label != 0 && label != 1) throw DataError("labels must be 0 or 1");
}

std::size_t Dataset::feature_index(std::string_view name) const {
  for (std::size_t j = 0; j < schema_.size(); ++j)
    if (schema_[j].name == name) return j;
  throw DataError("unknown feature '" + std::string(name) + "'");
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  std::vector<Column> columns(columns_.size());
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    const auto& src = columns_[j];
    auto& dst = columns[j];
    dst.missing.reserve(rows.size());
    if (schema_[j].kind == FeatureKind::continuous)
      dst.numeric.reserve(rows.size());
    else
      dst.categories.reserve(rows.size());
    for (std::size_t r : rows) {
      dst.missing.push_back(src.missing[r]);
      if (schema_[j].kind == FeatureKind::continuous)
        dst.numeric.push_back(src.numeric[r]);
      else
        dst.categories.push_back(src.categories[r]);
    }
  }
  std::vector<int> labels;
  std::vector<std::int64_t> ids;
  labels.reserve(rows.size());
  ids.reserve(rows.size());
  for (std::size_t r : rows) {
    labels.push_back(labels_[r]);
    ids.push_back(row_ids_[r]);
  }
  return Dataset(schema_, std::move(columns), std::move(labels), std::move(ids));
}

Dataset load_csv(const std::filesystem::path& path, const std::vector<FeatureSchema>& schema,
                 const std::string& label_column) {
  validate_schema(schema);
  const std::string content = read_file(path);
  std::istringstream in(content);
  std::size_t line_no = 0;
  std::vector<std::string> header;
  if (!read_csv_record(in, line_no, header))
    throw DataError("empty CSV: " + path.string());

  std::map<std::string, std::size_t> header_pos;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!header_pos.emplace(header[i], i).second)
      throw DataError("duplicate column '" + header[i] + "' in " + path.string());
  }
  std::vector<std::size_t> feature_pos(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto it = header_pos.find(schema[j].name);
    if (it == header_pos.end())
      throw DataError("schema column '" + schema[j].name + "' missing from CSV header");
    feature_pos[j] = it->second;
  }
  const auto label_it = header_pos.find(label_column);
  if (label_it == header_pos.end())
    throw DataError("label column '" + label_column + "' missing from CSV header");
  if (header.size() != schema.size() + 1) {
    for (const auto& [name, pos] : header_pos) {
      (void)pos;
      if (name == label_column) continue;
      bool known = false;
      for (const auto& f : schema) known = known || f.name == name;
      if (!known) throw DataError("CSV column '" + name + "' not present in schema");
    }
  }

  std::vector<Column> columns(schema.size());
  std::vector<int> labels;
  std::vector<std::int64_t> row_ids;
  std::int64_t row_index = 0;
  std::vector<std::string> fields;
  while (read_csv_record(in, line_no, fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != header.size())
      throw DataError("row " + std::to_string(row_index) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const std::string& token = fields[feature_pos[j]];
      Column& col = columns[j];
      if (is_missing_token(token)) {
        col.missing.push_back(1);
        if (schema[j].kind == FeatureKind::continuous)
          col.numeric.push_back(0.0);
        else
          col.categories.emplace_back();
        continue;
      }
      col.missing.push_back(0);
      if (schema[j].kind == FeatureKind::continuous) {
        double value;
        try {
          value = parse_double(token);
        } catch (const DataError&) {
          throw DataError("row " + std::to_string(row_index) + ", column '" + schema[j].name +
                          "': cannot parse '" + token + "' as a number");
        }
        if (!std::isfinite(value))
          throw DataError("row " + std::to_string(row_index) + ", column '" + schema[j].name +
                          "': value is not finite");
        col.numeric.push_back(value);
      } else {
        col.categories.push_back(token);
      }
    }
    const std::string& label_token = fields[label_it->second];
    if (label_token != "0" && label_token != "1")
      throw DataError("row " + std::to_string(row_index) + ": label '" + label_token +
                      "' is not 0 or 1");
    labels.push_back(label_token == "1" ? 1 : 0);
    row_ids.push_back(row_index);
    ++row_index;
  }
  return Dataset(schema, std::move(columns), std::move(labels), std::move(row_ids));
}

void write_csv(std::ostream& out, const Dataset& dataset, const std::string& label_column) {
  const auto& schema = dataset.schema();
  for (const auto& f : schema) out << escape_csv_field(f.name) << ',';
  out << escape_csv_field(label_column) << '\n';
  for (std::size_t i = 0; i < dataset.n_rows(); ++i) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      if (dataset.is_missing(i, j)) {
        out << ',';
        continue;
      }
      const Column& col = dataset.column(j);
      if (schema[j].kind == FeatureKind::continuous)
        out << format_double(col.numeric[i]);
      else
        out << escape_csv_field(col.categories[i]);
      out << ',';
    }
    out << dataset.labels()[i] << '\n';
  }
}

SeriesSummary aggregate_series(const SeriesWindow& window) {
  if (window.values.empty()) throw DataError("aggregate_series: empty window");
  if (window.timestamps.size() != window.values.size())
    throw DataError("aggregate_series: timestamps and values differ in length");
  for (std::size_t i = 1; i < window.timestamps.size(); ++i)
    if (!(window.timestamps[i] > window.timestamps[i - 1]))
      throw DataError("aggregate_series: timestamps must be strictly increasing");
  double sum = 0.0;
  double lo = window.values[0];
  double hi = window.values[0];
  for (double v : window.values) {
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {sum / static_cast<double>(window.values.size()), hi, lo};
}

ExclusionResult exclude_rows(const Dataset& dataset) {
  std::vector<std::size_t> critical;
  for (std::size_t j = 0; j < dataset.n_features(); ++j)
    if (dataset.schema()[j].critical) critical.push_back(j);
  std::vector<std::size_t> kept_rows;
  std::vector<std::int64_t> dropped;
  if (critical.empty()) {
    kept_rows.resize(dataset.n_rows());
    for (std::size_t i = 0; i < kept_rows.size(); ++i) kept_rows[i] = i;
    return {dataset.subset(kept_rows), dropped};
  }
  for (std::size_t i = 0; i < dataset.n_rows(); ++i) {
    std::size_t missing = 0;
    for (std::size_t j : critical) missing += dataset.is_missing(i, j) ? 1 : 0;
    // strictly more than half
    if (2 * missing > critical.size())
      dropped.push_back(dataset.row_ids()[i]);
    else
      kept_rows.push_back(i);
  }
  return {dataset.subset(kept_rows), dropped};
}

FittedPreprocessor fit_preprocessor(const Dataset& train) {
  FittedPreprocessor prep;
  prep.schema = train.schema();
  prep.continuous.resize(prep.schema.size());
  prep.categorical.resize(prep.schema.size());
  for (std::size_t j = 0; j < prep.schema.size(); ++j) {
    const Column& col = train.column(j);
    if (prep.schema[j].kind == FeatureKind::continuous) {
      double sum = 0.0, lo = 0.0, hi = 0.0;
      std::size_t count = 0;
      for (std::size_t i = 0; i < train.n_rows(); ++i) {
        if (col.missing[i]) continue;
        const double v = col.numeric[i];
        if (count == 0) {
          lo = hi = v;
        } else {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        sum += v;
        ++count;
      }
      if (count == 0)
        throw DataError("feature '" + prep.schema[j].name +
                        "' has no observed training values");
      prep.continuous[j] = {sum / static_cast<double>(count), lo, hi};
    } else {
      std::map<std::string, std::size_t> counts;
      for (std::size_t i = 0; i < train.n_rows(); ++i)
        if (!col.missing[i]) ++counts[col.categories[i]];
      if (counts.empty())
        throw DataError("feature '" + prep.schema[j].name +
                        "' has no observed training values");
      CategoricalParams params;
      std::size_t best = 0;
      for (const auto& [category, count] : counts) {
        params.vocabulary.push_back(category);
        // std::map iterates lexicographically, so ties keep the smallest category
        if (count > best) {
          best = count;
          params.mode = category;
        }
      }
      prep.categorical[j] = std::move(params);
    }
  }
  return prep;
}

std::size_t FittedPreprocessor::design_width() const {
  std::size_t width = 0;
  for (std::size_t j = 0; j < schema.size(); ++j)
    width += schema[j].kind == FeatureKind::continuous ? 1 : categorical[j].vocabulary.size();
  return width;
}

std::vector<std::string> FittedPreprocessor::design_column_names() const {
  std::vector<std::string> names;
  names.reserve(design_width());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (schema[j].kind == FeatureKind::continuous) {
      names.push_back(schema[j].name);
    } else {
      for (const auto& category : categorical[j].vocabulary)
        names.push_back(schema[j].name + "=" + category);
    }
  }
  return names;
}

DesignMatrix apply_preprocessor(const FittedPreprocessor& prep, const Dataset& dataset) {
  if (prep.schema.size() != dataset.schema().size())
    throw DataError("dataset does not conform to the fitted schema");
  for (std::size_t j = 0; j < prep.schema.size(); ++j) {
    const auto& a = prep.schema[j];
    const auto& b = dataset.schema()[j];
    if (a.name != b.name || a.kind != b.kind)
      throw DataError("dataset does not conform to the fitted schema at feature '" + b.name +
                      "'");
  }
  DesignMatrix out;
  out.column_names = prep.design_column_names();
  out.y = dataset.labels();
  out.row_ids = dataset.row_ids();
  out.X = Matrix(dataset.n_rows(), prep.design_width());
  std::set<std::string> warned;

  std::size_t base = 0;
  for (std::size_t j = 0; j < prep.schema.size(); ++j) {
    const Column& col = dataset.column(j);
    if (prep.schema[j].kind == FeatureKind::continuous) {
      const ContinuousParams& p = prep.continuous[j];
      const double range = p.max - p.min;
      for (std::size_t i = 0; i < dataset.n_rows(); ++i) {
        const double raw = col.missing[i] ? p.mean : col.numeric[i];
        // constant training feature maps to 0; otherwise plain min-max, no clamping
        out.X(i, base) = range == 0.0 ? 0.0 : (raw - p.min) / range;
      }
      base += 1;
    } else {
      const CategoricalParams& p = prep.categorical[j];
      for (std::size_t i = 0; i < dataset.n_rows(); ++i) {
        const std::string& category = col.missing[i] ? p.mode : col.categories[i];
        const auto it = std::lower_bound(p.vocabulary.begin(), p.vocabulary.end(), category);
        if (it != p.vocabulary.end() && *it == category) {
          out.X(i, base + static_cast<std::size_t>(it - p.vocabulary.begin())) = 1.0;
        } else {
          const std::string key = prep.schema[j].name + "=" + category;
          if (warned.insert(key).second)
            out.warnings.push_back("unseen category '" + category + "' in feature '" +
                                   prep.schema[j].name + "'; one-hot block left all zero");
        }
      }
      base += p.vocabulary.size();
    }
  }
  return out;
}

SplitResult split(const Dataset& dataset, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train_fraction must lie strictly between 0 and 1");
  const std::size_t n = dataset.n_rows();
  if (n < 2) throw DataError("split requires at least 2 rows");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> train_rows(order.begin(), order.begin() + std::min(n_train, n));
  std::vector<std::size_t> test_rows(order.begin() + std::min(n_train, n), order.end());
  return {dataset.subset(train_rows), dataset.subset(test_rows), seed, train_fraction};
}

SchemaFile parse_schema(const std::string& text) {
  SchemaFile schema;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    std::istringstream parts(trimmed);
    std::string head;
    parts >> head;
    if (head == "label") {
      parts >> schema.label_column;
      if (schema.label_column.empty())
        throw ConfigError("schema line " + std::to_string(line_no) + ": label needs a name");
    } else if (head == "feature") {
      FeatureSchema f;
      std::string kind;
      parts >> f.name >> kind;
      if (f.name.empty() || kind.empty())
        throw ConfigError("schema line " + std::to_string(line_no) +
                          ": expected 'feature <name> <kind>'");
      for (const auto& existing : schema.features) {
        if (existing.name == f.name)
          throw ConfigError("schema line " + std::to_string(line_no) +
                            ": duplicate feature '" + f.name + "'");
      }
      try {
        f.kind = feature_kind_from_string(kind);
      } catch (const Error&) {
        throw ConfigError("schema line " + std::to_string(line_no) +
                          ": unknown feature kind '" + kind + "'");
      }
      std::string token;
      while (parts >> token) {
        if (token == "critical")
          f.critical = true;
        else if (token.rfind("unit=", 0) == 0)
          f.unit = token.substr(5);
        else
          throw ConfigError("schema line " + std::to_string(line_no) + ": unknown token '" +
                            token + "'");
      }
      schema.features.push_back(std::move(f));
    } else {
      throw ConfigError("schema line " + std::to_string(line_no) + ": unknown directive '" +
                        head + "'");
    }
  }
  if (schema.features.empty()) throw ConfigError("schema file lists no features");
  if (schema.label_column.empty()) throw ConfigError("schema file lists no label column");
  return schema;
}

SchemaFile read_schema_file(const std::filesystem::path& path) {
  return parse_schema(read_file(path));
}

std::string serialize_schema(const SchemaFile& schema) {
  std::ostringstream out;
  for (const auto& f : schema.features) {
    out << "feature " << f.name << ' ' << to_string(f.kind);
    if (f.critical) out << " critical";
    if (!f.unit.empty()) out << " unit=" << f.unit;
    out << '\n';
  }
  out << "label " << schema.label_column << '\n';
  return out.str();
}

void write_preprocessor(std::ostream& out, const FittedPreprocessor& prep) {
  out << "n_features " << prep.schema.size() << '\n';
  for (std::size_t j = 0; j < prep.schema.size(); ++j) {
    const auto& f = prep.schema[j];
    out << "feature\n";
    out << "name " << f.name << '\n';
    out << "kind " << to_string(f.kind) << '\n';
    out << "critical " << (f.critical ? 1 : 0) << '\n';
    out << "unit " << f.unit << '\n';
    if (f.kind == FeatureKind::continuous) {
      const auto& p = prep.continuous[j];
      out << "mean " << format_double(p.mean) << '\n';
      out << "min " << format_double(p.min) << '\n';
      out << "max " << format_double(p.max) << '\n';
    } else {
      const auto& p = prep.categorical[j];
      out << "mode " << p.mode << '\n';
      out << "vocab " << p.vocabulary.size() << '\n';
      for (const auto& category : p.vocabulary) out << "category " << category << '\n';
    }
    out << "end\n";
  }
}

namespace {

std::string expect_line(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("preprocessor: unexpected end of input");
  if (line.rfind(key, 0) != 0)
    throw DataError("preprocessor: expected '" + key + "', got '" + line + "'");
  if (line.size() == key.size()) return "";
  return line.substr(key.size() + 1);
}

}  // namespace

FittedPreprocessor read_preprocessor(std::istream& in) {
  FittedPreprocessor prep;
  const auto n = static_cast<std::size_t>(parse_int(expect_line(in, "n_features"),
                                                    "preprocessor"));
  prep.schema.resize(n);
  prep.continuous.resize(n);
  prep.categorical.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    expect_line(in, "feature");
    prep.schema[j].name = expect_line(in, "name");
    prep.schema[j].kind = feature_kind_from_string(expect_line(in, "kind"));
    prep.schema[j].critical = parse_int(expect_line(in, "critical"), "preprocessor") != 0;
    prep.schema[j].unit = expect_line(in, "unit");
    if (prep.schema[j].kind == FeatureKind::continuous) {
      prep.continuous[j].mean = parse_double(expect_line(in, "mean"), "preprocessor");
      prep.continuous[j].min = parse_double(expect_line(in, "min"), "preprocessor");
      prep.continuous[j].max = parse_double(expect_line(in, "max"), "preprocessor");
    } else {
      prep.categorical[j].mode = expect_line(in, "mode");
      const auto v = static_cast<std::size_t>(parse_int(expect_line(in, "vocab"),
                                                        "preprocessor"));
      for (std::size_t c = 0; c < v; ++c)
        prep.categorical[j].vocabulary.push_back(expect_line(in, "category"));
    }
    expect_line(in, "end");
  }
  return prep;
}

}  // namespace tabrisk::tabular
