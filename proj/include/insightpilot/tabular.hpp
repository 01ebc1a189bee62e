#pragma once

// Typed, immutable in-memory tables: CSV ingestion, subspace filtering and
// group-by aggregation.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "insightpilot/error.hpp"
#include "insightpilot/text.hpp"

namespace insightpilot {

enum class ColumnKind { Number, Temporal, Category, Text };

inline std::string_view to_string(ColumnKind k) {
  switch (k) {
    case ColumnKind::Number: return "number";
    case ColumnKind::Temporal: return "temporal";
    case ColumnKind::Category: return "category";
    case ColumnKind::Text: return "text";
  }
  return "text";
}

inline std::optional<ColumnKind> column_kind_from(std::string_view s) {
  if (s == "number") return ColumnKind::Number;
  if (s == "temporal") return ColumnKind::Temporal;
  if (s == "category") return ColumnKind::Category;
  if (s == "text") return ColumnKind::Text;
  return std::nullopt;
}

namespace detail {

// Howard Hinnant's days_from_civil.
constexpr long long days_from_civil(long long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

inline bool digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  out = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    out = out * 10 + (s[i] - '0');
  }
  return true;
}

}  // namespace detail

enum class TemporalGrain { Month, Day };

/// Parses "YYYY-MM" (month grain) or "YYYY-MM-DD[ T...]" (day grain) into an
/// epoch-month or epoch-day key.
inline std::optional<std::pair<TemporalGrain, double>> parse_temporal(std::string_view raw) {
  std::string s = text::trim(raw);
  int y = 0, m = 0, d = 0;
  if (!detail::digits(s, 0, 4, y) || s.size() < 7 || s[4] != '-' || !detail::digits(s, 5, 2, m))
    return std::nullopt;
  if (m < 1 || m > 12) return std::nullopt;
  if (s.size() == 7) return std::make_pair(TemporalGrain::Month, double((y - 1970) * 12 + (m - 1)));
  if (s.size() < 10 || s[7] != '-' || !detail::digits(s, 8, 2, d) || d < 1 || d > 31)
    return std::nullopt;
  if (s.size() > 10 && s[10] != 'T' && s[10] != ' ') return std::nullopt;
  return std::make_pair(TemporalGrain::Day,
                        double(detail::days_from_civil(y, unsigned(m), unsigned(d))));
}

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::Text;
  std::vector<std::string> text;  ///< display value per row ("" = missing)
  /// Number value (Number) or epoch key (Temporal) per row; NaN = missing.
  std::vector<double> number;
};

class Table {
 public:
  Table() = default;
  Table(std::string name, std::vector<Column> columns) : name_(std::move(name)), columns_(std::move(columns)) {
    rows_ = columns_.empty() ? 0 : columns_.front().text.size();
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (columns_[i].text.size() != rows_ || columns_[i].number.size() != rows_)
        fail(ErrorCode::SchemaError, "column '" + columns_[i].name + "' length differs from rowCount");
      if (!index_.emplace(columns_[i].name, i).second)
        fail(ErrorCode::SchemaError, "duplicate column name '" + columns_[i].name + "'");
    }
  }

  const std::string& name() const { return name_; }
  std::size_t row_count() const { return rows_; }
  const std::vector<Column>& columns() const { return columns_; }

  bool has_column(const std::string& name) const { return index_.contains(name); }

  const Column* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &columns_[it->second];
  }

  const Column& column(const std::string& name, ErrorCode missing = ErrorCode::UnknownDim) const {
    if (const Column* c = find(name)) return *c;
    fail(missing, "no column named '" + name + "' in table '" + name_ + "'", name);
  }

  std::vector<std::string> column_names() const {
    std::vector<std::string> out;
    for (const auto& c : columns_) out.push_back(c.name);
    return out;
  }

  /// New table with only the listed rows, in order.
  Table select_rows(const std::vector<std::size_t>& rows) const {
    std::vector<Column> cols;
    cols.reserve(columns_.size());
    for (const auto& c : columns_) {
      Column out{c.name, c.kind, {}, {}};
      out.text.reserve(rows.size());
      out.number.reserve(rows.size());
      for (std::size_t r : rows) {
        out.text.push_back(c.text[r]);
        out.number.push_back(c.number[r]);
      }
      cols.push_back(std::move(out));
    }
    return Table(name_, std::move(cols));
  }

 private:
  std::string name_;
  std::vector<Column> columns_;
  std::size_t rows_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

using TypeHints = std::map<std::string, ColumnKind>;

/// RFC-4180 record splitter. Throws RaggedRow on unterminated quotes.
inline std::vector<std::vector<std::string>> parse_csv_records(std::string_view data) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  std::size_t i = 0;
  if (data.size() >= 3 && data.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  for (; i < data.size(); ++i) {
    char c = data[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        records.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field.push_back(c);
      any = true;
    }
  }
  if (quoted) fail(ErrorCode::RaggedRow, "unterminated quoted field", std::to_string(records.size()));
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    records.push_back(std::move(row));
  }
  return records;
}

inline ColumnKind infer_kind(const std::vector<std::string>& values) {
  std::size_t present = 0;
  bool allNumber = true, allTemporal = true;
  std::optional<TemporalGrain> grain;
  for (const auto& v : values) {
    if (text::trim(v).empty()) continue;
    ++present;
    double d;
    if (allNumber && !text::parse_number(v, d)) allNumber = false;
    if (allTemporal) {
      auto t = parse_temporal(v);
      if (!t || (grain && *grain != t->first)) {
        allTemporal = false;
      } else {
        grain = t->first;
      }
    }
  }
  if (present == 0) return ColumnKind::Text;
  if (allNumber) return ColumnKind::Number;
  if (allTemporal) return ColumnKind::Temporal;
  std::vector<std::string> sorted;
  for (const auto& v : values)
    if (!text::trim(v).empty()) sorted.push_back(v);
  std::sort(sorted.begin(), sorted.end());
  const auto distinct = static_cast<double>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
  return distinct / static_cast<double>(present) < 0.5 ? ColumnKind::Category : ColumnKind::Text;
}

inline Column make_column(std::string name, ColumnKind kind, std::vector<std::string> values) {
  Column c{std::move(name), kind, std::move(values), {}};
  c.number.assign(c.text.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < c.text.size(); ++r) {
    if (kind == ColumnKind::Number) {
      double d;
      if (text::parse_number(c.text[r], d)) c.number[r] = d;
    } else if (kind == ColumnKind::Temporal) {
      if (auto t = parse_temporal(c.text[r])) c.number[r] = t->second;
    }
  }
  return c;
}

/// Builds a table from already-split rows (first row = header).
inline Table table_from_records(std::string name, const std::vector<std::vector<std::string>>& records,
                                const TypeHints& hints = {}) {
  if (records.empty()) fail(ErrorCode::EmptyFile, "no header row");
  const auto& header = records.front();
  std::vector<std::vector<std::string>> cols(header.size());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size())
      fail(ErrorCode::RaggedRow,
           "row " + std::to_string(r - 1) + " has " + std::to_string(records[r].size()) + " fields, header has " +
               std::to_string(header.size()),
           std::to_string(r - 1));
    for (std::size_t c = 0; c < header.size(); ++c) cols[c].push_back(records[r][c]);
  }
  std::vector<Column> columns;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string colName = text::trim(header[c]);
    auto hint = hints.find(colName);
    ColumnKind kind = hint != hints.end() ? hint->second : infer_kind(cols[c]);
    columns.push_back(make_column(colName, kind, std::move(cols[c])));
  }
  return Table(std::move(name), std::move(columns));
}

inline Table parse_csv(std::string name, std::string_view data, const TypeHints& hints = {}) {
  return table_from_records(std::move(name), parse_csv_records(data), hints);
}

/// Reads a `{column: kind}` sidecar schema.
inline TypeHints load_type_hints(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  TypeHints hints;
  try {
    auto j = nlohmann::json::parse(in);
    for (auto& [k, v] : j.items()) {
      auto kind = v.is_string() ? column_kind_from(v.get<std::string>()) : std::nullopt;
      if (!kind) fail(ErrorCode::SchemaError, "unknown column kind for '" + k + "'", k);
      hints[k] = *kind;
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::SyntaxError, std::string("schema sidecar: ") + e.what());
  }
  return hints;
}

/// `data.csv` -> `data.schema.json`.
inline std::filesystem::path sidecar_schema_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".schema.json");
  return p;
}

/// Loads a CSV file. Without explicit hints, a sidecar `.schema.json` next
/// to the file is honoured when present; remaining columns are inferred.
inline Table load_csv(const std::filesystem::path& path, std::optional<TypeHints> hints = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  std::string data = ss.str();
  if (text::trim(data).empty()) fail(ErrorCode::EmptyFile, path.string() + " is empty");
  if (!hints) {
    auto side = sidecar_schema_path(path);
    hints = std::filesystem::exists(side) ? load_type_hints(side) : TypeHints{};
  }
  return parse_csv(path.stem().string(), data, *hints);
}

struct Predicate {
  std::string dimName;
  std::vector<std::string> values;
};

/// Conjunction of set-membership predicates.
struct SubspaceFilter {
  std::vector<Predicate> predicates;
  bool empty() const { return predicates.empty(); }
};

inline void to_json(nlohmann::json& j, const Predicate& p) { j = {{"dimName", p.dimName}, {"values", p.values}}; }
inline void from_json(const nlohmann::json& j, Predicate& p) {
  j.at("dimName").get_to(p.dimName);
  j.at("values").get_to(p.values);
}
inline void to_json(nlohmann::json& j, const SubspaceFilter& f) { j = f.predicates; }
inline void from_json(const nlohmann::json& j, SubspaceFilter& f) { j.get_to(f.predicates); }

namespace detail {

inline bool cell_matches(const Column& c, std::size_t row, const std::vector<std::string>& values,
                         const std::vector<double>& keys) {
  if (c.kind == ColumnKind::Number || c.kind == ColumnKind::Temporal) {
    const double v = c.number[row];
    if (!std::isnan(v))
      for (double k : keys)
        if (k == v) return true;
  }
  const std::string& t = c.text[row];
  return std::find(values.begin(), values.end(), t) != values.end();
}

}  // namespace detail

inline Table apply_subspace(const Table& t, const SubspaceFilter& f) {
  struct Compiled {
    const Column* col;
    const std::vector<std::string>* values;
    std::vector<double> keys;
  };
  std::vector<Compiled> compiled;
  for (std::size_t i = 0; i < f.predicates.size(); ++i) {
    const auto& p = f.predicates[i];
    const Column& col = t.column(p.dimName, ErrorCode::UnknownDim);
    if (p.values.empty())
      fail(ErrorCode::InvalidArgument, "predicate on '" + p.dimName + "' has no values",
           "predicates[" + std::to_string(i) + "].values");
    Compiled c{&col, &p.values, {}};
    for (const auto& v : p.values) {
      if (col.kind == ColumnKind::Number) {
        double d;
        if (text::parse_number(v, d)) c.keys.push_back(d);
      } else if (col.kind == ColumnKind::Temporal) {
        if (auto k = parse_temporal(v)) c.keys.push_back(k->second);
      }
    }
    compiled.push_back(std::move(c));
  }
  if (compiled.empty()) return t;
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < t.row_count(); ++r) {
    bool keep = true;
    for (const auto& c : compiled) {
      if (!detail::cell_matches(*c.col, r, *c.values, c.keys)) {
        keep = false;
        break;
      }
    }
    if (keep) rows.push_back(r);
  }
  return t.select_rows(rows);
}

inline double coverage(const Table& sub, const Table& full) {
  if (full.row_count() == 0) fail(ErrorCode::EmptyBase, "coverage base table has no rows");
  return std::clamp(static_cast<double>(sub.row_count()) / static_cast<double>(full.row_count()), 0.0, 1.0);
}

/// A measure laid out along an (optional) ordered dimension.
struct Series {
  std::string dimension;          ///< column name of the keys, may be empty
  std::vector<std::string> keys;  ///< empty, or one per value
  std::string measure;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool has_keys() const { return !keys.empty(); }
  std::string key_at(std::size_t i) const { return has_keys() ? keys.at(i) : std::to_string(i); }

  static Series of(std::vector<double> values, std::string measure = "value") {
    Series s;
    s.measure = std::move(measure);
    s.values = std::move(values);
    return s;
  }
};

inline void to_json(nlohmann::json& j, const Series& s) {
  j = {{"dimension", s.dimension}, {"keys", s.keys}, {"measure", s.measure}, {"values", s.values}};
}
inline void from_json(const nlohmann::json& j, Series& s) {
  s.dimension = j.value("dimension", "");
  s.keys = j.value("keys", std::vector<std::string>{});
  s.measure = j.value("measure", "");
  j.at("values").get_to(s.values);
}

enum class Aggregate { Sum, Mean, Count };

inline std::optional<Aggregate> aggregate_from(std::string_view s) {
  if (s == "sum") return Aggregate::Sum;
  if (s == "mean" || s == "average" || s == "avg") return Aggregate::Mean;
  if (s == "count") return Aggregate::Count;
  return std::nullopt;
}

/// One entry per distinct `dim` value. Temporal dims come out in ascending
/// time order; other dims by aggregate descending (first appearance breaks
/// ties). Missing measure cells are skipped; a mean group with no present
/// values is dropped.
inline Series group_aggregate(const Table& t, const std::string& dim, const std::string& measure, Aggregate agg) {
  const Column& d = t.column(dim, ErrorCode::UnknownDim);
  if (d.kind == ColumnKind::Number)
    fail(ErrorCode::TypeMismatch, "dimension '" + dim + "' is numeric; expected category or temporal", dim);
  const Column* m = nullptr;
  if (agg != Aggregate::Count) {
    m = &t.column(measure, ErrorCode::UnknownMeasure);
    if (m->kind != ColumnKind::Number)
      fail(ErrorCode::TypeMismatch, "measure '" + measure + "' is not numeric", measure);
  }
  struct Acc {
    std::string key;
    double order = 0;
    std::size_t first = 0;
    double sum = 0;
    std::size_t n = 0;
    std::size_t rows = 0;
  };
  std::vector<Acc> groups;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < t.row_count(); ++r) {
    const std::string& key = d.text[r];
    auto [it, inserted] = index.emplace(key, groups.size());
    if (inserted) groups.push_back(Acc{key, d.number[r], r, 0, 0, 0});
    Acc& a = groups[it->second];
    ++a.rows;
    if (m) {
      const double v = m->number[r];
      if (!std::isnan(v)) {
        a.sum += v;
        ++a.n;
      }
    }
  }
  auto value_of = [&](const Acc& a) {
    switch (agg) {
      case Aggregate::Sum: return a.sum;
      case Aggregate::Mean: return a.n ? a.sum / static_cast<double>(a.n) : std::numeric_limits<double>::quiet_NaN();
      case Aggregate::Count: return static_cast<double>(a.rows);
    }
    return 0.0;
  };
  std::vector<std::pair<Acc, double>> rows;
  for (auto& g : groups) {
    double v = value_of(g);
    if (std::isnan(v)) continue;
    rows.emplace_back(g, v);
  }
  if (d.kind == ColumnKind::Temporal) {
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      const bool an = std::isnan(a.first.order), bn = std::isnan(b.first.order);
      if (an != bn) return bn;  // missing dates last
      return a.first.order < b.first.order;
    });
  } else {
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  }
  Series s;
  s.dimension = dim;
  s.measure = agg == Aggregate::Count ? (measure.empty() ? "count" : measure) : measure;
  for (auto& [g, v] : rows) {
    s.keys.push_back(g.key);
    s.values.push_back(v);
  }
  return s;
}

}  // namespace insightpilot
