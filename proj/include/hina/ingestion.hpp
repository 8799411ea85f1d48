#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hina/error.hpp"
#include "hina/hin.hpp"

namespace hina {

// A header row plus string cells. Short rows are kept as-is; a missing cell
// reads as absent rather than empty.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) return std::nullopt;
    return static_cast<std::size_t>(it - columns.begin());
  }

  static const std::string* cell(const std::vector<std::string>& row, std::size_t c) {
    return c < row.size() ? &row[c] : nullptr;
  }
};

// Picks tab when the header line holds more tabs than commas.
inline char detect_delimiter(std::string_view text) {
  auto eol = text.find('\n');
  auto header = text.substr(0, eol);
  auto tabs = std::count(header.begin(), header.end(), '\t');
  auto commas = std::count(header.begin(), header.end(), ',');
  return tabs > commas ? '\t' : ',';
}

// RFC 4180 style: quoted fields may contain the delimiter, newlines and "".
// Blank lines are skipped.
inline Table parse_delimited(std::string_view text, std::optional<char> delimiter = std::nullopt) {
  const char delim = delimiter.value_or(detect_delimiter(text));
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    if (field_started || !record.empty()) {
      end_field();
      records.push_back(std::move(record));
    }
    record.clear();
  };

  for (std::size_t k = 0; k < text.size(); ++k) {
    char c = text[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < text.size() && text[k + 1] == '"') {
          field += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (c == delim) {
      end_field();
      field_started = true;
    } else if (c == '\n') {
      end_record();
    } else if (c == '\r') {
      // tolerated before \n
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) fail("MalformedTable", "unterminated quoted field");
  end_record();

  if (records.empty()) fail("MalformedTable", "input has no header row");
  Table t;
  t.columns = std::move(records.front());
  for (auto& c : t.columns)
    if (c.empty()) fail("MalformedTable", "header contains an empty column name");
  t.rows.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
  // Cells beyond the header width are ignored.
  for (auto& r : t.rows)
    while (r.size() > t.columns.size()) r.pop_back();
  return t;
}

struct CountRows {
  bool operator==(const CountRows&) const = default;
};
struct SumColumn {
  std::string column;
  bool operator==(const SumColumn&) const = default;
};
using WeightMode = std::variant<CountRows, SumColumn>;

struct AttributeColumn {
  std::string column;
  NodeSet attach_to = NodeSet::Set1;
  bool operator==(const AttributeColumn&) const = default;
};

struct RowFilter {
  std::string column;
  std::string value;
  bool operator==(const RowFilter&) const = default;
};

struct HinSpec {
  std::vector<std::string> set1_columns;
  std::vector<std::string> set2_columns;
  WeightMode weight_mode = CountRows{};
  std::vector<AttributeColumn> attribute_columns;
  bool allow_self_pairs = false;
  std::vector<RowFilter> row_filter;

  bool operator==(const HinSpec&) const = default;

  void validate() const {
    if (set1_columns.empty() || set2_columns.empty())
      throw UsageError("InvalidSpec", "set1_columns and set2_columns must be non-empty");
    for (const auto& c : set1_columns)
      if (std::find(set2_columns.begin(), set2_columns.end(), c) != set2_columns.end())
        throw UsageError("InvalidSpec", "column '" + c + "' used in both node sets");
  }
};

inline std::string to_string(NodeSet s) { return s == NodeSet::Set1 ? "set1" : "set2"; }

inline NodeSet node_set_from_string(const std::string& s) {
  if (s == "set1") return NodeSet::Set1;
  if (s == "set2") return NodeSet::Set2;
  throw UsageError("InvalidSpec", "node set must be 'set1' or 'set2', got '" + s + "'");
}

inline nlohmann::json to_json(const HinSpec& spec) {
  nlohmann::json j;
  j["set1_columns"] = spec.set1_columns;
  j["set2_columns"] = spec.set2_columns;
  if (const auto* sum = std::get_if<SumColumn>(&spec.weight_mode))
    j["weight"] = {{"mode", "sum_column"}, {"column", sum->column}};
  else
    j["weight"] = {{"mode", "count_rows"}};
  j["attribute_columns"] = nlohmann::json::array();
  for (const auto& a : spec.attribute_columns)
    j["attribute_columns"].push_back({{"column", a.column}, {"attach_to", to_string(a.attach_to)}});
  j["allow_self_pairs"] = spec.allow_self_pairs;
  j["row_filter"] = nlohmann::json::array();
  for (const auto& f : spec.row_filter) j["row_filter"].push_back({{"column", f.column}, {"value", f.value}});
  return j;
}

inline HinSpec hin_spec_from_json(const nlohmann::json& j) {
  try {
    HinSpec spec;
    spec.set1_columns = j.at("set1_columns").get<std::vector<std::string>>();
    spec.set2_columns = j.at("set2_columns").get<std::vector<std::string>>();
    if (j.contains("weight")) {
      const auto& w = j["weight"];
      auto mode = w.at("mode").get<std::string>();
      if (mode == "sum_column")
        spec.weight_mode = SumColumn{w.at("column").get<std::string>()};
      else if (mode != "count_rows")
        throw UsageError("InvalidSpec", "unknown weight mode '" + mode + "'");
    }
    for (const auto& a : j.value("attribute_columns", nlohmann::json::array()))
      spec.attribute_columns.push_back(
          {a.at("column").get<std::string>(), node_set_from_string(a.value("attach_to", "set1"))});
    spec.allow_self_pairs = j.value("allow_self_pairs", false);
    for (const auto& f : j.value("row_filter", nlohmann::json::array()))
      spec.row_filter.push_back({f.at("column").get<std::string>(), f.at("value").get<std::string>()});
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& ex) {
    throw UsageError("InvalidSpec", ex.what());
  }
}

struct RowDiagnostic {
  std::size_t row = 0;  // 1-based data row number (header excluded)
  std::string message;
};

struct IngestReport {
  std::size_t rows_total = 0;
  std::size_t rows_filtered = 0;  // rows passing row_filter
  std::size_t rows_rejected = 0;  // missing node cells
  std::size_t dropped_self = 0;
  std::size_t rows_kept = 0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  Weight total_weight = 0;
  std::vector<RowDiagnostic> diagnostics;
};

inline nlohmann::json to_json(const IngestReport& r) {
  nlohmann::json diag = nlohmann::json::array();
  for (const auto& d : r.diagnostics) diag.push_back({{"row", d.row}, {"message", d.message}});
  return {{"rows", r.rows_total},   {"rows_filtered", r.rows_filtered}, {"rows_rejected", r.rows_rejected},
          {"dropped_self", r.dropped_self}, {"rows_kept", r.rows_kept},      {"N1", r.n1},
          {"N2", r.n2},            {"W", r.total_weight},              {"diagnostics", diag}};
}

struct Ingested {
  Hin hin;
  IngestReport report;
};

namespace detail {

inline Weight parse_weight_cell(const std::string& cell, std::size_t row) {
  Weight w = 0;
  auto first = cell.data();
  auto last = cell.data() + cell.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  auto [ptr, ec] = std::from_chars(first, last, w);
  if (ec != std::errc{} || ptr != last || first == last)
    fail("NonIntegerWeightCell", "row " + std::to_string(row) + ": weight cell '" + cell + "' is not an integer");
  if (w <= 0)
    fail("NonPositiveWeight", "row " + std::to_string(row) + ": weight cell '" + cell + "' is not positive");
  return w;
}

// A row is a self-pair when the Set1 label equals the trailing parts of the
// Set2 label: (A) vs (A), or (A) vs (Question, A).
inline bool is_self_pair(const NodeLabel& a, const NodeLabel& b) {
  const auto& pa = a.parts();
  const auto& pb = b.parts();
  if (pa.size() > pb.size()) return false;
  return std::equal(pa.begin(), pa.end(), pb.end() - static_cast<std::ptrdiff_t>(pa.size()));
}

}  // namespace detail

// Node indices follow lexicographic label order, so the result does not
// depend on row order.
inline Ingested ingest_with_report(const Table& table, const HinSpec& spec, HinMeta meta = {}) {
  spec.validate();
  auto resolve = [&](const std::string& name) {
    auto c = table.column(name);
    if (!c) fail("MissingColumn", "column '" + name + "' not found");
    return *c;
  };
  std::vector<std::size_t> c1, c2;
  for (const auto& n : spec.set1_columns) c1.push_back(resolve(n));
  for (const auto& n : spec.set2_columns) c2.push_back(resolve(n));
  std::optional<std::size_t> weight_col;
  if (const auto* sum = std::get_if<SumColumn>(&spec.weight_mode)) weight_col = resolve(sum->column);
  std::vector<std::pair<std::size_t, RowFilter>> filters;
  for (const auto& f : spec.row_filter) filters.emplace_back(resolve(f.column), f);
  std::vector<std::pair<std::size_t, AttributeColumn>> attr_cols;
  for (const auto& a : spec.attribute_columns) attr_cols.emplace_back(resolve(a.column), a);

  IngestReport report;
  report.rows_total = table.rows.size();

  std::map<NodeLabel, Attributes> nodes1, nodes2;
  std::map<std::pair<NodeLabel, NodeLabel>, Weight> weights;

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    bool pass = std::all_of(filters.begin(), filters.end(), [&](const auto& f) {
      const auto* v = Table::cell(row, f.first);
      return v && *v == f.second.value;
    });
    if (!pass) continue;
    ++report.rows_filtered;

    auto make_label = [&](const std::vector<std::size_t>& cols, const std::vector<std::string>& names)
        -> std::optional<NodeLabel> {
      std::vector<std::string> parts;
      for (std::size_t k = 0; k < cols.size(); ++k) {
        const auto* v = Table::cell(row, cols[k]);
        if (!v || v->empty()) {
          report.diagnostics.push_back({r + 1, "missing value in node column '" + names[k] + "'"});
          return std::nullopt;
        }
        parts.push_back(*v);
      }
      return NodeLabel(std::move(parts));
    };
    auto l1 = make_label(c1, spec.set1_columns);
    auto l2 = l1 ? make_label(c2, spec.set2_columns) : std::nullopt;
    if (!l1 || !l2) {
      ++report.rows_rejected;
      continue;
    }

    Weight w = 1;
    if (weight_col) {
      const auto* v = Table::cell(row, *weight_col);
      if (!v) fail("NonIntegerWeightCell", "row " + std::to_string(r + 1) + ": weight cell missing");
      w = detail::parse_weight_cell(*v, r + 1);
    }

    if (!spec.allow_self_pairs && detail::is_self_pair(*l1, *l2)) {
      ++report.dropped_self;
      continue;
    }
    ++report.rows_kept;

    auto& a1 = nodes1[*l1];
    auto& a2 = nodes2[*l2];
    for (const auto& [col, ac] : attr_cols) {
      const auto* v = Table::cell(row, col);
      if (!v || v->empty()) continue;
      auto& target = ac.attach_to == NodeSet::Set1 ? a1 : a2;
      target.emplace(ac.column, *v);
    }
    weights[{*l1, *l2}] += w;
  }

  if (report.rows_kept == 0) {
    if (report.rows_filtered == 0) fail("EmptyAfterFilter", "no rows left after applying the row filter");
    fail("EmptyAfterFilter", "every filtered row was rejected or dropped as a self-pair");
  }

  std::vector<Node> s1, s2;
  std::map<NodeLabel, std::size_t> idx1, idx2;
  for (auto& [label, attrs] : nodes1) {
    idx1.emplace(label, s1.size());
    s1.push_back({label, attrs});
  }
  for (auto& [label, attrs] : nodes2) {
    idx2.emplace(label, s2.size());
    s2.push_back({label, attrs});
  }
  std::vector<Edge> edges;
  edges.reserve(weights.size());
  for (const auto& [pair, w] : weights) edges.push_back({idx1.at(pair.first), idx2.at(pair.second), w});

  Hin hin(std::move(s1), std::move(s2), std::move(edges), std::move(meta));
  report.n1 = hin.n1();
  report.n2 = hin.n2();
  report.total_weight = hin.total_weight();
  return {std::move(hin), std::move(report)};
}

inline Hin ingest(const Table& table, const HinSpec& spec) { return ingest_with_report(table, spec).hin; }

inline IngestReport ingest_report(const Table& table, const HinSpec& spec) {
  return ingest_with_report(table, spec).report;
}

}  // namespace hina
