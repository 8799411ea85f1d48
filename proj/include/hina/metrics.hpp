#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hina/error.hpp"
#include "hina/hin.hpp"

namespace hina {

inline void check_set1(const Hin& hin, std::size_t i) {
  if (i >= hin.n1()) fail("InvalidNodeRef", "set1 index " + std::to_string(i) + " out of range");
}

// Share of the total weight carried by Set1 node i.
inline double quantity(const Hin& hin, std::size_t i) {
  check_set1(hin, i);
  if (hin.total_weight() == 0) return 0.0;
  return static_cast<double>(hin.strength1(i)) / static_cast<double>(hin.total_weight());
}

// Strength of i normalized by the total strength of its subgroup.
inline double quantity_group(const Hin& hin, std::size_t i, const std::vector<std::size_t>& group) {
  check_set1(hin, i);
  if (std::find(group.begin(), group.end(), i) == group.end())
    fail("NodeNotInGroup", "node is not a member of the group");
  std::set<std::size_t> members(group.begin(), group.end());
  Weight wg = 0;
  for (auto g : members) {
    check_set1(hin, g);
    wg += hin.strength1(g);
  }
  if (wg < 1) fail("EmptyGroupWeight", "group carries no weight");
  return static_cast<double>(hin.strength1(i)) / static_cast<double>(wg);
}

// Normalized Shannon entropy of i's weight distribution over Set2. The base
// cancels; it is a parameter only so callers can check that it does.
// Isolated nodes and N2 == 1 yield 0.
inline double diversity(const Hin& hin, std::size_t i, double log_base = 2.0) {
  check_set1(hin, i);
  const Weight s = hin.strength1(i);
  if (s == 0 || hin.n2() < 2) return 0.0;
  const double ln_base = std::log(log_base);
  double h = 0.0;
  for (const auto& e : hin.row(i)) {
    const double p = static_cast<double>(e.w) / static_cast<double>(s);
    h -= p * (std::log(p) / ln_base);
  }
  const double d = h / (std::log(static_cast<double>(hin.n2())) / ln_base);
  return std::clamp(d, 0.0, 1.0);
}

struct NodeMetrics {
  std::size_t node = 0;
  Weight strength = 0;
  double quantity = 0.0;
  std::optional<double> quantity_group;
  double diversity = 0.0;
  std::optional<std::string> group;
  bool isolated = false;
  bool degenerate_targets = false;  // N2 == 1
};

inline std::vector<NodeMetrics> metrics_table(const Hin& hin, const std::optional<std::string>& group_attribute = {}) {
  std::vector<std::string> groups(hin.n1());
  std::map<std::string, Weight> group_weight;
  if (group_attribute) {
    for (std::size_t i = 0; i < hin.n1(); ++i) {
      const auto& attrs = hin.nodes(NodeSet::Set1)[i].attrs;
      auto it = attrs.find(*group_attribute);
      if (it == attrs.end() || it->second.empty())
        fail("MissingAttribute",
             "set1 node '" + hin.label1(i).display() + "' has no attribute '" + *group_attribute + "'");
      groups[i] = it->second;
      group_weight[it->second] += hin.strength1(i);
    }
  }

  std::vector<NodeMetrics> rows;
  rows.reserve(hin.n1());
  for (std::size_t i = 0; i < hin.n1(); ++i) {
    NodeMetrics m;
    m.node = i;
    m.strength = hin.strength1(i);
    m.quantity = quantity(hin, i);
    m.diversity = diversity(hin, i);
    m.isolated = m.strength == 0;
    m.degenerate_targets = hin.n2() < 2;
    if (group_attribute) {
      m.group = groups[i];
      const Weight wg = group_weight[groups[i]];
      m.quantity_group = wg > 0 ? static_cast<double>(m.strength) / static_cast<double>(wg) : 0.0;
    }
    rows.push_back(std::move(m));
  }
  return rows;
}

// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string metrics_csv(const Hin& hin, const std::vector<NodeMetrics>& rows) {
  std::string out = "label,group,strength,quantity,quantity_group,diversity,isolated\n";
  for (const auto& m : rows) {
    out += csv_escape(hin.label1(m.node).display());
    out += ',';
    out += csv_escape(m.group.value_or(""));
    out += ',' + std::to_string(m.strength);
    out += ',' + format_double(m.quantity);
    out += ',';
    if (m.quantity_group) out += format_double(*m.quantity_group);
    out += ',' + format_double(m.diversity);
    out += m.isolated ? ",true\n" : ",false\n";
  }
  return out;
}

inline nlohmann::json to_json(const Hin& hin, const std::vector<NodeMetrics>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : rows) {
    arr.push_back({{"index", m.node},
                   {"label", hin.label1(m.node).display()},
                   {"parts", hin.label1(m.node).parts()},
                   {"group", m.group ? nlohmann::json(*m.group) : nlohmann::json()},
                   {"strength", m.strength},
                   {"quantity", m.quantity},
                   {"quantity_group", m.quantity_group ? nlohmann::json(*m.quantity_group) : nlohmann::json()},
                   {"diversity", m.diversity},
                   {"isolated", m.isolated},
                   {"degenerate_targets", m.degenerate_targets}});
  }
  return {{"W", hin.total_weight()}, {"N1", hin.n1()}, {"N2", hin.n2()}, {"rows", arr}};
}

}  // namespace hina
