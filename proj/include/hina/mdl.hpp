#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hina/error.hpp"
#include "hina/hin.hpp"
#include "hina/pruning.hpp"

namespace hina {

// Group labels over Set1. Ids are dense: every id in [0, B) has a member.
class Partition {
 public:
  Partition() = default;

  explicit Partition(std::vector<std::size_t> labels) : labels_(std::move(labels)) {
    std::size_t b = 0;
    for (auto l : labels_) b = std::max(b, l + 1);
    sizes_.assign(b, 0);
    for (auto l : labels_) ++sizes_[l];
    if (std::find(sizes_.begin(), sizes_.end(), 0) != sizes_.end())
      fail("InvalidPartition", "group ids must be dense 0..B-1");
  }

  // Renumbers arbitrary ids by order of first appearance.
  static Partition canonical(const std::vector<std::size_t>& raw) {
    std::map<std::size_t, std::size_t> ids;
    std::vector<std::size_t> out;
    out.reserve(raw.size());
    for (auto r : raw) out.push_back(ids.emplace(r, ids.size()).first->second);
    return Partition(std::move(out));
  }

  static Partition singletons(std::size_t n) {
    std::vector<std::size_t> l(n);
    std::iota(l.begin(), l.end(), 0);
    return Partition(std::move(l));
  }

  static Partition single_group(std::size_t n) { return Partition(std::vector<std::size_t>(n, 0)); }

  const std::vector<std::size_t>& labels() const noexcept { return labels_; }
  std::size_t label(std::size_t i) const { return labels_.at(i); }
  std::size_t num_nodes() const noexcept { return labels_.size(); }
  std::size_t num_groups() const noexcept { return sizes_.size(); }
  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }

  std::vector<std::size_t> members(std::size_t r) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == r) out.push_back(i);
    return out;
  }

  bool operator==(const Partition&) const = default;

 private:
  std::vector<std::size_t> labels_;
  std::vector<std::size_t> sizes_;
};

// w_cn[r][j]: total weight from group r to Set2 node j.
using BlockWeights = std::vector<std::vector<Weight>>;

inline void check_partition(const Hin& hin, const Partition& p) {
  if (p.num_nodes() != hin.n1())
    fail("InvalidPartition", "partition covers " + std::to_string(p.num_nodes()) + " nodes, graph has " +
                                 std::to_string(hin.n1()));
}

inline BlockWeights block_weights(const Hin& hin, const Partition& p) {
  check_partition(hin, p);
  BlockWeights bw(p.num_groups(), std::vector<Weight>(hin.n2(), 0));
  for (const auto& e : hin.edges()) bw[p.label(e.i)][e.j] += e.w;
  return bw;
}

namespace mdl {

inline double log2_factorial(double n) { return std::lgamma(n + 1.0) / std::numbers::ln2; }

inline double log2_binom(double n, double k) {
  if (k < 0 || k > n) fail("InvalidPartition", "binomial coefficient out of range");
  if (k == 0 || k == n) return 0.0;
  return (std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)) / std::numbers::ln2;
}

// Bits to spread `w` units over `n` cells: log2 C(n + w - 1, w).
inline double log2_multiset(double n, Weight w) {
  if (w == 0) return 0.0;
  return log2_binom(n + static_cast<double>(w) - 1.0, static_cast<double>(w));
}

// Terms that depend only on B (and the fixed N1, N2, W).
inline double group_count_terms(std::size_t n1, std::size_t n2, Weight w, std::size_t b) {
  return std::log2(static_cast<double>(n1)) +
         log2_binom(static_cast<double>(n1) - 1.0, static_cast<double>(b) - 1.0) +
         log2_multiset(static_cast<double>(b) * static_cast<double>(n2), w);
}

// -log2(n_r!) plus the per-(r, j) weight-configuration bits of one group.
inline double group_local_terms(std::size_t size, const std::vector<Weight>& row) {
  double bits = -log2_factorial(static_cast<double>(size));
  for (auto w : row) bits += log2_multiset(static_cast<double>(size), w);
  return bits;
}

}  // namespace mdl

// Description length in bits of the graph encoded through a Set1 partition:
//   log N1 + log C(N1-1, B-1) + log N1!/prod n_r! + log C(B N2 + W - 1, W)
//   + sum_{r,j} log C(n_r + w_rj - 1, w_rj)
inline double description_length(const Hin& hin, const Partition& partition) {
  check_partition(hin, partition);
  if (hin.n1() == 0) fail("InvalidPartition", "empty set1");
  const auto bw = block_weights(hin, partition);
  double bits = mdl::group_count_terms(hin.n1(), hin.n2(), hin.total_weight(), partition.num_groups()) +
                mdl::log2_factorial(static_cast<double>(hin.n1()));
  for (std::size_t r = 0; r < bw.size(); ++r) bits += mdl::group_local_terms(partition.sizes()[r], bw[r]);
  return bits;
}

struct MergeStep {
  std::size_t step = 0;
  std::size_t first = 0;   // smallest Set1 index in one merged group
  std::size_t second = 0;  // smallest Set1 index in the other
  double delta = 0.0;      // DL change in bits
};

struct ClusterResult {
  Partition best_partition;
  double best_dl = 0.0;
  std::vector<std::pair<std::size_t, double>> dl_trace;  // (B, DL), B from N1 down to 1
  std::vector<MergeStep> merge_log;
};

struct ClusterOptions {
  std::optional<std::uint64_t> seed;
  int restarts = 1;
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

// Two DL values closer than this are treated as tied.
inline constexpr double kDlTieTolerance = 1e-9;

namespace detail {

inline Partition replay_merges(std::size_t n1, const std::vector<MergeStep>& log, std::size_t steps) {
  std::vector<std::size_t> parent(n1);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t s = 0; s < steps; ++s) {
    auto a = find(log[s].first), b = find(log[s].second);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<std::size_t> roots(n1);
  for (std::size_t i = 0; i < n1; ++i) roots[i] = find(i);
  return Partition::canonical(roots);
}

// One agglomerative pass. `rank` orders the singletons for tie-breaking.
inline ClusterResult greedy_pass(const Hin& hin, const std::vector<std::size_t>& rank,
                                 const std::optional<std::chrono::steady_clock::time_point>& deadline) {
  const std::size_t n1 = hin.n1();
  struct Group {
    std::size_t key;       // smallest rank among members
    std::size_t min_node;  // smallest Set1 index among members
    std::size_t size;
    std::vector<Weight> row;
    double local;
  };
  std::vector<Group> groups;
  groups.reserve(n1);
  for (std::size_t i = 0; i < n1; ++i) {
    std::vector<Weight> row(hin.n2(), 0);
    for (const auto& e : hin.row(i)) row[e.j] = e.w;
    double local = mdl::group_local_terms(1, row);
    groups.push_back({rank[i], i, 1, std::move(row), local});
  }
  // Scan order is by key so that, among tied candidates, the pair with the
  // smallest keys is met first.
  std::sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) { return a.key < b.key; });

  auto merged_local = [&](const Group& a, const Group& b) {
    const std::size_t size = a.size + b.size;
    double bits = -mdl::log2_factorial(static_cast<double>(size));
    for (std::size_t j = 0; j < a.row.size(); ++j) {
      const Weight w = a.row[j] + b.row[j];
      if (w) bits += mdl::log2_multiset(static_cast<double>(size), w);
    }
    return bits;
  };

  // pair_delta[a][b] (a < b): change in group-local bits when merging a and b.
  std::vector<std::vector<double>> pair_delta(n1, std::vector<double>(n1, 0.0));
  for (std::size_t a = 0; a < n1; ++a)
    for (std::size_t b = a + 1; b < n1; ++b)
      pair_delta[a][b] = merged_local(groups[a], groups[b]) - groups[a].local - groups[b].local;

  ClusterResult res;
  double dl = description_length(hin, Partition::singletons(n1));
  res.dl_trace.emplace_back(n1, dl);

  std::vector<bool> alive(n1, true);
  std::size_t b_now = n1;
  const Weight w_total = hin.total_weight();
  for (std::size_t step = 1; b_now > 1; ++step) {
    if (deadline && std::chrono::steady_clock::now() > *deadline)
      fail("Timeout", "clustering exceeded its time budget");
    const double shared = mdl::group_count_terms(n1, hin.n2(), w_total, b_now - 1) -
                          mdl::group_count_terms(n1, hin.n2(), w_total, b_now);
    std::size_t best_a = n1, best_b = n1;
    double best = 0.0;
    for (std::size_t a = 0; a < n1; ++a) {
      if (!alive[a]) continue;
      for (std::size_t b = a + 1; b < n1; ++b) {
        if (!alive[b]) continue;
        const double d = pair_delta[a][b];
        if (best_a == n1 || d < best - kDlTieTolerance) {
          best = d;
          best_a = a;
          best_b = b;
        }
      }
    }

    auto& ga = groups[best_a];
    auto& gb = groups[best_b];
    res.merge_log.push_back({step, std::min(ga.min_node, gb.min_node), std::max(ga.min_node, gb.min_node),
                             best + shared});
    ga.local = merged_local(ga, gb);
    ga.size += gb.size;
    ga.min_node = std::min(ga.min_node, gb.min_node);
    for (std::size_t j = 0; j < ga.row.size(); ++j) ga.row[j] += gb.row[j];
    alive[best_b] = false;
    --b_now;

    for (std::size_t c = 0; c < n1; ++c) {
      if (!alive[c] || c == best_a) continue;
      auto [x, y] = std::minmax(c, best_a);
      pair_delta[x][y] = merged_local(groups[x], groups[y]) - groups[x].local - groups[y].local;
    }

    dl = mdl::group_count_terms(n1, hin.n2(), w_total, b_now) + mdl::log2_factorial(static_cast<double>(n1));
    for (std::size_t c = 0; c < n1; ++c)
      if (alive[c]) dl += groups[c].local;
    res.dl_trace.emplace_back(b_now, dl);
  }

  // Best B; ties go to the smaller B, which appears later in the trace.
  std::size_t best_idx = 0;
  for (std::size_t k = 1; k < res.dl_trace.size(); ++k)
    if (res.dl_trace[k].second <= res.dl_trace[best_idx].second + kDlTieTolerance) best_idx = k;
  res.best_dl = res.dl_trace[best_idx].second;
  res.best_partition = replay_merges(n1, res.merge_log, best_idx);
  return res;
}

}  // namespace detail

// Agglomerative greedy minimization of the description length. Starts from
// singletons, commits the cheapest merge at every step down to B = 1, then
// returns the partition at the best B seen.
inline ClusterResult cluster(const Hin& hin, const ClusterOptions& opts = {}) {
  if (hin.n1() < 1) fail("EmptyHin", "set1 is empty");
  if (opts.restarts < 1) throw UsageError("InvalidRestarts", "restarts must be at least 1");
  std::vector<std::size_t> rank(hin.n1());
  std::iota(rank.begin(), rank.end(), 0);
  ClusterResult best = detail::greedy_pass(hin, rank, opts.deadline);

  const std::uint64_t seed = opts.seed.value_or(0);
  for (int r = 1; r < opts.restarts; ++r) {
    auto rng = detail::stream_for(seed, static_cast<std::uint64_t>(r));
    std::shuffle(rank.begin(), rank.end(), rng);
    auto candidate = detail::greedy_pass(hin, rank, opts.deadline);
    if (candidate.best_dl < best.best_dl - kDlTieTolerance ||
        (candidate.best_dl <= best.best_dl + kDlTieTolerance &&
         candidate.best_partition.num_groups() < best.best_partition.num_groups()))
      best = std::move(candidate);
  }
  return best;
}

// Global minimizer by enumerating every set partition of Set1 as a
// restricted growth string (lexicographic order). dl_trace holds the best DL
// found for each B.
inline ClusterResult exhaustive_cluster(const Hin& hin, std::size_t max_n1 = 10) {
  const std::size_t n = hin.n1();
  if (n > max_n1)
    fail("TooLarge", "exhaustive search limited to " + std::to_string(max_n1) + " set1 nodes, graph has " +
                         std::to_string(n));
  if (n < 1) fail("EmptyHin", "set1 is empty");

  std::vector<std::size_t> rgs(n, 0), prefix_max(n, 0);
  std::vector<double> best_by_b(n + 1, std::numeric_limits<double>::infinity());
  std::optional<Partition> best;
  double best_dl = 0.0;

  while (true) {
    Partition p(rgs);
    const double dl = description_length(hin, p);
    const std::size_t b = p.num_groups();
    best_by_b[b] = std::min(best_by_b[b], dl);
    if (!best || dl < best_dl - kDlTieTolerance ||
        (dl <= best_dl + kDlTieTolerance && b < best->num_groups())) {
      best = std::move(p);
      best_dl = dl;
    }
    // Next restricted growth string: rgs[k] <= 1 + max(rgs[0..k-1]).
    std::size_t k = n;
    while (k-- > 1) {
      if (rgs[k] <= prefix_max[k - 1]) break;
    }
    if (k == 0) break;
    ++rgs[k];
    prefix_max[k] = std::max(prefix_max[k - 1], rgs[k]);
    for (std::size_t t = k + 1; t < n; ++t) {
      rgs[t] = 0;
      prefix_max[t] = prefix_max[k];
    }
  }

  ClusterResult res;
  res.best_partition = *best;
  res.best_dl = best_dl;
  for (std::size_t b = n; b >= 1; --b) res.dl_trace.emplace_back(b, best_by_b[b]);
  return res;
}

inline nlohmann::json to_json(const ClusterResult& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& [b, dl] : r.dl_trace) trace.push_back({b, dl});
  nlohmann::json log = nlohmann::json::array();
  for (const auto& m : r.merge_log)
    log.push_back({{"step", m.step}, {"merged", {m.first, m.second}}, {"delta_bits", m.delta}});
  return {{"labels", r.best_partition.labels()},
          {"B", r.best_partition.num_groups()},
          {"sizes", r.best_partition.sizes()},
          {"dl_bits", r.best_dl},
          {"trace", trace},
          {"merge_log", log}};
}

// Normalized mutual information 2 I(a;b) / (H(a) + H(b)); 1 when both
// partitions are trivial.
inline double normalized_mutual_information(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.size() != b.size()) fail("InvalidPartition", "partitions differ in length");
  const double n = static_cast<double>(a.size());
  std::map<std::size_t, double> ca, cb;
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ca[a[k]] += 1;
    cb[b[k]] += 1;
    joint[{a[k], b[k]}] += 1;
  }
  auto entropy = [n](const auto& counts) {
    double h = 0.0;
    for (const auto& [_, c] : counts) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double ha = entropy(ca), hb = entropy(cb);
  if (ha + hb == 0.0) return 1.0;
  double mi = 0.0;
  for (const auto& [k, c] : joint) mi += (c / n) * std::log(c * n / (ca[k.first] * cb[k.second]));
  return 2.0 * mi / (ha + hb);
}

// ---------------------------------------------------------------------------
// Cluster projections

struct ProjectedRow {
  std::size_t j = 0;  // Set2 index in the source graph
  Weight w = 0;
};

struct ProjectedNetwork {
  std::size_t cluster_id = 0;
  std::vector<std::size_t> members;
  std::vector<ProjectedRow> rows;  // positive w_cp only, by j
  // When every Set2 label is composite: content code (first part) x partner
  // (remaining parts), over all codes and partners of the source graph.
  // Otherwise a single "cluster r" Set1 node joined to the source Set2.
  Hin graph;
  bool split_by_parts = false;
};

inline ProjectedNetwork project_cluster(const Hin& hin, const Partition& partition, std::size_t cluster_id) {
  check_partition(hin, partition);
  if (cluster_id >= partition.num_groups())
    fail("UnknownCluster", "cluster " + std::to_string(cluster_id) + " does not exist");
  const auto members = partition.members(cluster_id);
  std::vector<Weight> agg(hin.n2(), 0);
  for (auto i : members)
    for (const auto& e : hin.row(i)) agg[e.j] += e.w;

  std::vector<ProjectedRow> rows;
  for (std::size_t j = 0; j < agg.size(); ++j)
    if (agg[j] > 0) rows.push_back({j, agg[j]});

  const auto& set2 = hin.nodes(NodeSet::Set2);
  const bool split = !set2.empty() && std::all_of(set2.begin(), set2.end(),
                                                  [](const Node& n) { return n.label.composite(); });
  HinMeta meta{hin.meta().name + (hin.meta().name.empty() ? "" : " ") + "cluster " + std::to_string(cluster_id),
               "projection"};
  std::vector<Node> s1, s2;
  std::vector<Edge> edges;
  if (split) {
    std::map<NodeLabel, std::size_t> codes, partners;
    std::vector<std::pair<std::size_t, std::size_t>> cell(hin.n2());
    for (std::size_t j = 0; j < set2.size(); ++j) {
      const auto& parts = set2[j].label.parts();
      NodeLabel code(parts.front());
      NodeLabel partner(std::vector<std::string>(parts.begin() + 1, parts.end()));
      auto c = codes.emplace(code, s1.size());
      if (c.second) s1.push_back({code, {}});
      auto p = partners.emplace(partner, s2.size());
      if (p.second) s2.push_back({partner, {}});
      cell[j] = {c.first->second, p.first->second};
    }
    for (const auto& r : rows) edges.push_back({cell[r.j].first, cell[r.j].second, r.w});
  } else {
    s1.push_back({NodeLabel("cluster " + std::to_string(cluster_id)), {}});
    s2 = set2;
    for (const auto& r : rows) edges.push_back({0, r.j, r.w});
  }
  return {cluster_id, members, std::move(rows), Hin(std::move(s1), std::move(s2), std::move(edges), meta), split};
}

// Significant code-partner associations inside one cluster's projection.
inline PruneResult prune_projection(const ProjectedNetwork& projection, const NullModelSpec& spec) {
  if (!projection.split_by_parts)
    fail("NotBipartiteProjection", "set2 labels are not composite, so the projection has no code x partner form");
  return prune(projection.graph, spec);
}

inline nlohmann::json to_json(const ProjectedNetwork& p, const Hin& source) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : p.rows)
    rows.push_back({{"j", r.j}, {"label", source.label2(r.j).display()}, {"parts", source.label2(r.j).parts()},
                    {"w", r.w}});
  return {{"cluster", p.cluster_id},
          {"members", p.members},
          {"rows", rows},
          {"split_by_parts", p.split_by_parts},
          {"graph", to_json(p.graph)}};
}

}  // namespace hina
