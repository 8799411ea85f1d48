#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hina/error.hpp"

namespace hina {

using Weight = std::int64_t;
using Attributes = std::map<std::string, std::string>;

enum class NodeSet : std::uint8_t { Set1, Set2 };

struct NodeRef {
  NodeSet set = NodeSet::Set1;
  std::size_t id = 0;

  auto operator<=>(const NodeRef&) const = default;
};

// Ordered tuple of strings. A single part is a plain entity; two or more parts
// form a composite entity such as (content code, partner).
class NodeLabel {
 public:
  NodeLabel() = default;
  NodeLabel(std::string single) : parts_{std::move(single)} { validate(); }  // NOLINT
  NodeLabel(const char* single) : NodeLabel(std::string(single)) {}         // NOLINT
  explicit NodeLabel(std::vector<std::string> parts) : parts_(std::move(parts)) { validate(); }

  const std::vector<std::string>& parts() const noexcept { return parts_; }
  std::size_t size() const noexcept { return parts_.size(); }
  bool composite() const noexcept { return parts_.size() > 1; }

  // Composite parts are joined with " **", e.g. "Appreciation **AI".
  std::string display() const {
    std::string out;
    for (std::size_t k = 0; k < parts_.size(); ++k) {
      if (k) out += " **";
      out += parts_[k];
    }
    return out;
  }

  auto operator<=>(const NodeLabel&) const = default;

 private:
  void validate() const {
    if (parts_.empty()) fail("InvalidLabel", "node label has no parts");
    for (const auto& p : parts_)
      if (p.empty()) fail("InvalidLabel", "node label has an empty part");
  }

  std::vector<std::string> parts_;
};

struct Node {
  NodeLabel label;
  Attributes attrs;
};

struct Edge {
  std::size_t i = 0;  // Set1 index
  std::size_t j = 0;  // Set2 index
  Weight w = 0;

  bool operator==(const Edge&) const = default;
};

struct WeightedPair {
  NodeLabel set1;
  NodeLabel set2;
  Weight w = 0;
};

struct HinMeta {
  std::string name;
  std::string built_from;

  bool operator==(const HinMeta&) const = default;
};

// Immutable weighted bipartite graph between two typed node sets. Edges are
// stored sorted by (i, j) with duplicates summed; strengths are cached.
class Hin {
 public:
  Hin(std::vector<Node> set1, std::vector<Node> set2, std::vector<Edge> edges, HinMeta meta = {})
      : set1_(std::move(set1)), set2_(std::move(set2)), meta_(std::move(meta)) {
    check_distinct(set1_, "set1");
    check_distinct(set2_, "set2");
    for (const auto& e : edges) {
      if (e.i >= set1_.size() || e.j >= set2_.size())
        fail("InvalidEdge", "edge index out of range");
      if (e.w <= 0) fail("NonPositiveWeight", "edge weights must be positive integers");
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
      return std::pair(a.i, a.j) < std::pair(b.i, b.j);
    });
    for (const auto& e : edges) {
      if (!edges_.empty() && edges_.back().i == e.i && edges_.back().j == e.j)
        edges_.back().w += e.w;
      else
        edges_.push_back(e);
    }

    strength1_.assign(set1_.size(), 0);
    strength2_.assign(set2_.size(), 0);
    row_begin_.assign(set1_.size() + 1, 0);
    for (const auto& e : edges_) {
      strength1_[e.i] += e.w;
      strength2_[e.j] += e.w;
      total_ += e.w;
      ++row_begin_[e.i + 1];
    }
    std::partial_sum(row_begin_.begin(), row_begin_.end(), row_begin_.begin());
  }

  std::size_t n1() const noexcept { return set1_.size(); }
  std::size_t n2() const noexcept { return set2_.size(); }
  std::size_t size(NodeSet s) const noexcept { return s == NodeSet::Set1 ? n1() : n2(); }
  Weight total_weight() const noexcept { return total_; }

  Weight strength1(std::size_t i) const { return strength1_.at(i); }
  Weight strength2(std::size_t j) const { return strength2_.at(j); }
  const std::vector<Weight>& strengths1() const noexcept { return strength1_; }
  const std::vector<Weight>& strengths2() const noexcept { return strength2_; }

  const std::vector<Edge>& edges() const noexcept { return edges_; }

  // Edges incident to Set1 node i, sorted by j.
  std::span<const Edge> row(std::size_t i) const {
    return std::span<const Edge>(edges_).subspan(row_begin_.at(i), row_begin_.at(i + 1) - row_begin_[i]);
  }

  Weight weight(std::size_t i, std::size_t j) const {
    auto r = row(i);
    auto it = std::lower_bound(r.begin(), r.end(), j, [](const Edge& e, std::size_t v) { return e.j < v; });
    return (it != r.end() && it->j == j) ? it->w : 0;
  }

  const std::vector<Node>& nodes(NodeSet s) const noexcept { return s == NodeSet::Set1 ? set1_ : set2_; }
  const Node& node(NodeRef ref) const {
    const auto& ns = nodes(ref.set);
    if (ref.id >= ns.size()) fail("InvalidNodeRef", "node index out of range");
    return ns[ref.id];
  }
  const NodeLabel& label1(std::size_t i) const { return set1_.at(i).label; }
  const NodeLabel& label2(std::size_t j) const { return set2_.at(j).label; }

  std::optional<std::size_t> find(NodeSet s, const NodeLabel& label) const {
    const auto& ns = nodes(s);
    for (std::size_t k = 0; k < ns.size(); ++k)
      if (ns[k].label == label) return k;
    return std::nullopt;
  }

  const HinMeta& meta() const noexcept { return meta_; }

  bool operator==(const Hin& o) const {
    auto same_nodes = [](const std::vector<Node>& a, const std::vector<Node>& b) {
      return std::equal(a.begin(), a.end(), b.begin(), b.end(),
                        [](const Node& x, const Node& y) { return x.label == y.label && x.attrs == y.attrs; });
    };
    return same_nodes(set1_, o.set1_) && same_nodes(set2_, o.set2_) && edges_ == o.edges_ && meta_ == o.meta_;
  }

 private:
  static void check_distinct(const std::vector<Node>& nodes, const char* which) {
    std::vector<const NodeLabel*> sorted;
    sorted.reserve(nodes.size());
    for (const auto& n : nodes) sorted.push_back(&n.label);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return *a < *b; });
    auto dup = std::adjacent_find(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return *a == *b; });
    if (dup != sorted.end())
      fail("DuplicateLabelInSet", std::string("label '") + (*dup)->display() + "' repeated in " + which);
  }

  std::vector<Node> set1_;
  std::vector<Node> set2_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> row_begin_;
  std::vector<Weight> strength1_;
  std::vector<Weight> strength2_;
  Weight total_ = 0;
  HinMeta meta_;
};

// Indices follow declaration order; duplicate pairs are summed.
inline Hin build_hin(const std::vector<NodeLabel>& set1_labels, const std::vector<NodeLabel>& set2_labels,
                     const std::vector<WeightedPair>& pairs, HinMeta meta = {}) {
  std::vector<Node> s1, s2;
  for (const auto& l : set1_labels) s1.push_back({l, {}});
  for (const auto& l : set2_labels) s2.push_back({l, {}});

  std::map<NodeLabel, std::size_t> index1, index2;
  for (std::size_t k = 0; k < s1.size(); ++k) index1.emplace(s1[k].label, k);
  for (std::size_t k = 0; k < s2.size(); ++k) index2.emplace(s2[k].label, k);

  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (const auto& p : pairs) {
    auto a = index1.find(p.set1);
    if (a == index1.end()) fail("UnknownLabel", "'" + p.set1.display() + "' is not declared in set1");
    auto b = index2.find(p.set2);
    if (b == index2.end()) fail("UnknownLabel", "'" + p.set2.display() + "' is not declared in set2");
    if (p.w <= 0) fail("NonPositiveWeight", "edge weights must be positive integers");
    edges.push_back({a->second, b->second, p.w});
  }
  return Hin(std::move(s1), std::move(s2), std::move(edges), std::move(meta));
}

// Keeps the Set1 nodes accepted by `keep` (in their original order) and the
// edges incident to them. Set2 is left untouched.
template <typename Pred>
Hin subnetwork(const Hin& hin, Pred&& keep) {
  std::vector<Node> s1;
  std::vector<std::size_t> remap(hin.n1(), static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < hin.n1(); ++i) {
    if (keep(i)) {
      remap[i] = s1.size();
      s1.push_back(hin.nodes(NodeSet::Set1)[i]);
    }
  }
  if (s1.empty()) fail("EmptySelection", "subnetwork keeps no set1 node");

  std::vector<Edge> edges;
  for (const auto& e : hin.edges())
    if (remap[e.i] != static_cast<std::size_t>(-1)) edges.push_back({remap[e.i], e.j, e.w});
  return Hin(std::move(s1), hin.nodes(NodeSet::Set2), std::move(edges), hin.meta());
}

// ---------------------------------------------------------------------------
// Canonical JSON graph format

inline nlohmann::json node_to_json(const Node& n) {
  return {{"parts", n.label.parts()}, {"attrs", n.attrs}};
}

inline nlohmann::json to_json(const Hin& hin) {
  nlohmann::json j;
  j["set1"] = nlohmann::json::array();
  j["set2"] = nlohmann::json::array();
  for (const auto& n : hin.nodes(NodeSet::Set1)) j["set1"].push_back(node_to_json(n));
  for (const auto& n : hin.nodes(NodeSet::Set2)) j["set2"].push_back(node_to_json(n));
  j["edges"] = nlohmann::json::array();
  for (const auto& e : hin.edges()) j["edges"].push_back({e.i, e.j, e.w});
  j["meta"] = {{"name", hin.meta().name}, {"built_from", hin.meta().built_from}};
  return j;
}

inline std::string to_canonical_json(const Hin& hin) { return to_json(hin).dump(2) + "\n"; }

inline Hin hin_from_json(const nlohmann::json& j) {
  try {
    auto read_nodes = [](const nlohmann::json& arr) {
      std::vector<Node> out;
      for (const auto& n : arr) {
        Node node{NodeLabel(n.at("parts").get<std::vector<std::string>>()), {}};
        if (n.contains("attrs")) node.attrs = n["attrs"].get<Attributes>();
        out.push_back(std::move(node));
      }
      return out;
    };
    auto s1 = read_nodes(j.at("set1"));
    auto s2 = read_nodes(j.at("set2"));
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 3) fail("InvalidGraph", "edges must be [i, j, w] triples");
      if (!e[0].is_number_unsigned() || !e[1].is_number_unsigned() || !e[2].is_number_integer())
        fail("InvalidGraph", "edge entries must be integers");
      edges.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>(), e[2].get<Weight>()});
    }
    HinMeta meta;
    if (j.contains("meta")) {
      meta.name = j["meta"].value("name", "");
      meta.built_from = j["meta"].value("built_from", "");
    }
    return Hin(std::move(s1), std::move(s2), std::move(edges), std::move(meta));
  } catch (const nlohmann::json::exception& ex) {
    fail("InvalidGraph", ex.what());
  }
}

inline Hin hin_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    fail("InvalidGraph", ex.what());
  }
  return hin_from_json(j);
}

}  // namespace hina
