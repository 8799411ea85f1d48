#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "hina/binomial.hpp"
#include "hina/error.hpp"
#include "hina/hin.hpp"

namespace hina {

// Which side's strengths the binomial null model conditions on.
enum class FixDeg { None, Set1, Set2 };

inline std::string to_string(FixDeg f) {
  switch (f) {
    case FixDeg::None: return "none";
    case FixDeg::Set1: return "set1";
    case FixDeg::Set2: return "set2";
  }
  return "none";
}

inline FixDeg fix_deg_from_string(const std::string& s) {
  if (s == "none" || s == "None") return FixDeg::None;
  if (s == "set1" || s == "FixSet1") return FixDeg::Set1;
  if (s == "set2" || s == "FixSet2") return FixDeg::Set2;
  throw UsageError("InvalidFixDeg", "fix_deg must be none, set1 or set2, got '" + s + "'");
}

struct NullModelSpec {
  FixDeg fix_deg = FixDeg::None;
  double alpha = 0.05;
  // Divides alpha by the number of tested edges. Off by default.
  bool bonferroni = false;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("InvalidAlpha", "alpha must lie in (0, 1)");
  }

  bool operator==(const NullModelSpec&) const = default;
};

inline nlohmann::json to_json(const NullModelSpec& s) {
  return {{"fix_deg", to_string(s.fix_deg)}, {"alpha", s.alpha}, {"bonferroni", s.bonferroni}};
}

inline NullModelSpec null_model_from_json(const nlohmann::json& j) {
  try {
    NullModelSpec s;
    s.fix_deg = fix_deg_from_string(j.value("fix_deg", std::string("none")));
    s.alpha = j.value("alpha", 0.05);
    s.bonferroni = j.value("bonferroni", false);
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& ex) {
    throw UsageError("InvalidSpec", ex.what());
  }
}

// One original edge with the binomial null it was tested against.
struct EdgeTest {
  Edge edge;
  Weight threshold = 0;
  Weight trials = 0;
  double rho = 0.0;
  bool kept = false;
};

struct PruneResult {
  NullModelSpec spec;
  std::vector<EdgeTest> edges;  // every original edge, in (i, j) order

  std::vector<Edge> kept_edges() const {
    std::vector<Edge> out;
    for (const auto& t : edges)
      if (t.kept) out.push_back(t.edge);
    return out;
  }
};

struct StrengthStats {
  double mean = 0.0;
  double variance = 0.0;
  double gini = 0.0;
};

// Descriptive aid for choosing fix_deg; nothing is chosen automatically.
inline StrengthStats strength_stats(const std::vector<Weight>& strengths) {
  StrengthStats st;
  if (strengths.empty()) return st;
  const double n = static_cast<double>(strengths.size());
  double sum = 0.0;
  for (auto s : strengths) sum += static_cast<double>(s);
  st.mean = sum / n;
  for (auto s : strengths) st.variance += (s - st.mean) * (s - st.mean);
  st.variance /= n;
  if (sum > 0.0) {
    std::vector<Weight> sorted(strengths);
    std::sort(sorted.begin(), sorted.end());
    // G = sum_k (2k - n - 1) x_(k) / (n * sum), k = 1..n
    double acc = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k)
      acc += (2.0 * static_cast<double>(k + 1) - n - 1.0) * static_cast<double>(sorted[k]);
    st.gini = acc / (n * sum);
  }
  return st;
}

inline nlohmann::json to_json(const StrengthStats& s) {
  return {{"mean", s.mean}, {"variance", s.variance}, {"gini", s.gini}};
}

namespace detail {

inline double effective_alpha(const Hin& hin, const NullModelSpec& spec) {
  if (!spec.bonferroni || hin.edges().empty()) return spec.alpha;
  return spec.alpha / static_cast<double>(hin.edges().size());
}

struct NullParams {
  Weight trials = 0;
  double rho = 0.0;
};

inline NullParams null_params(const Hin& hin, FixDeg fix, std::size_t i, std::size_t j) {
  switch (fix) {
    case FixDeg::None:
      return {hin.total_weight(), 1.0 / (static_cast<double>(hin.n1()) * static_cast<double>(hin.n2()))};
    case FixDeg::Set1: return {hin.strength1(i), 1.0 / static_cast<double>(hin.n2())};
    case FixDeg::Set2: return {hin.strength2(j), 1.0 / static_cast<double>(hin.n1())};
  }
  return {};
}

}  // namespace detail

// Keeps edges with w_ij >= q_{n,rho}(1 - alpha); everything below is pruned.
inline PruneResult prune(const Hin& hin, const NullModelSpec& spec) {
  spec.validate();
  if (hin.total_weight() < 1) fail("EmptyHin", "cannot prune a graph with no weight");
  const double level = 1.0 - detail::effective_alpha(hin, spec);

  // Thresholds are shared by every edge with the same (trials, rho); memoize per node.
  std::vector<Weight> per_node;
  Weight global = 0;
  if (spec.fix_deg == FixDeg::None) {
    auto np = detail::null_params(hin, spec.fix_deg, 0, 0);
    global = binomial_quantile(np.trials, np.rho, level);
  } else {
    const bool by_set1 = spec.fix_deg == FixDeg::Set1;
    const auto& strengths = by_set1 ? hin.strengths1() : hin.strengths2();
    const double rho = 1.0 / static_cast<double>(by_set1 ? hin.n2() : hin.n1());
    per_node.reserve(strengths.size());
    for (auto s : strengths) per_node.push_back(binomial_quantile(s, rho, level));
  }

  PruneResult result{spec, {}};
  result.edges.reserve(hin.edges().size());
  for (const auto& e : hin.edges()) {
    auto np = detail::null_params(hin, spec.fix_deg, e.i, e.j);
    Weight t = spec.fix_deg == FixDeg::None ? global : per_node[spec.fix_deg == FixDeg::Set1 ? e.i : e.j];
    result.edges.push_back({e, t, np.trials, np.rho, e.w >= t});
  }
  return result;
}

inline nlohmann::json to_json(const PruneResult& r, const Hin& hin) {
  nlohmann::json edges = nlohmann::json::array();
  std::size_t kept = 0;
  for (const auto& t : r.edges) {
    kept += t.kept ? 1 : 0;
    edges.push_back({{"i", t.edge.i},
                     {"j", t.edge.j},
                     {"w", t.edge.w},
                     {"kept", t.kept},
                     {"threshold", t.threshold},
                     {"n", t.trials},
                     {"rho", t.rho}});
  }
  return {{"spec", to_json(r.spec)},
          {"edges", edges},
          {"kept_count", kept},
          {"edge_count", r.edges.size()},
          {"strength_stats",
           {{"set1", to_json(strength_stats(hin.strengths1()))}, {"set2", to_json(strength_stats(hin.strengths2()))}}}};
}

// ---------------------------------------------------------------------------
// Monte Carlo calibration of the analytic thresholds

struct CalibrationReport {
  NullModelSpec spec;
  std::int64_t draws = 0;
  std::uint64_t seed = 0;
  std::int64_t cells = 0;          // simulated (node pair, draw) samples with trials > 0
  std::int64_t exceed_count = 0;   // samples with weight > threshold
  std::int64_t at_or_above = 0;    // samples with weight >= threshold
  double exceedance_rate = 0.0;    // exceed_count / cells
  double keep_rate = 0.0;          // at_or_above / cells
  double bound = 0.0;              // alpha + 3 * sqrt(alpha / draws)
};

inline nlohmann::json to_json(const CalibrationReport& r) {
  return {{"spec", to_json(r.spec)},
          {"draws", r.draws},
          {"seed", r.seed},
          {"cells", r.cells},
          {"exceed_count", r.exceed_count},
          {"at_or_above_count", r.at_or_above},
          {"exceedance_rate", r.exceedance_rate},
          {"keep_rate", r.keep_rate},
          {"bound", r.bound}};
}

namespace detail {

// Counter-based seed derivation: draw k's stream depends only on (seed, k).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 stream_for(std::uint64_t seed, std::uint64_t draw) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(draw + 0x632BE59BD9B4E019ULL)));
}

}  // namespace detail

// Draws weight configurations from the null model itself and measures how
// often a simulated cell lands above (and at-or-above) its analytic threshold.
inline CalibrationReport null_simulation(const Hin& hin, const NullModelSpec& spec, std::int64_t draws,
                                         std::uint64_t seed) {
  spec.validate();
  if (draws < 1) throw UsageError("InvalidDraws", "draws must be at least 1");
  const double level = 1.0 - detail::effective_alpha(hin, spec);

  // Each "thrower" places `trials` unit weights uniformly over `cells` slots,
  // compared against one threshold.
  struct Thrower {
    Weight trials;
    std::size_t cells;
    Weight threshold;
  };
  std::vector<Thrower> throwers;
  switch (spec.fix_deg) {
    case FixDeg::None: {
      const std::size_t cells = hin.n1() * hin.n2();
      const double rho = 1.0 / static_cast<double>(cells);
      throwers.push_back({hin.total_weight(), cells, binomial_quantile(hin.total_weight(), rho, level)});
      break;
    }
    case FixDeg::Set1:
      for (auto s : hin.strengths1())
        throwers.push_back({s, hin.n2(), binomial_quantile(s, 1.0 / static_cast<double>(hin.n2()), level)});
      break;
    case FixDeg::Set2:
      for (auto d : hin.strengths2())
        throwers.push_back({d, hin.n1(), binomial_quantile(d, 1.0 / static_cast<double>(hin.n1()), level)});
      break;
  }

  CalibrationReport rep;
  rep.spec = spec;
  rep.draws = draws;
  rep.seed = seed;
  std::vector<Weight> counts;
  for (std::int64_t d = 0; d < draws; ++d) {
    auto rng = detail::stream_for(seed, static_cast<std::uint64_t>(d));
    for (const auto& th : throwers) {
      if (th.trials <= 0) continue;
      counts.assign(th.cells, 0);
      std::uniform_int_distribution<std::size_t> pick(0, th.cells - 1);
      for (Weight u = 0; u < th.trials; ++u) ++counts[pick(rng)];
      for (auto c : counts) {
        rep.exceed_count += c > th.threshold ? 1 : 0;
        rep.at_or_above += c >= th.threshold ? 1 : 0;
      }
      rep.cells += static_cast<std::int64_t>(th.cells);
    }
  }
  if (rep.cells > 0) {
    rep.exceedance_rate = static_cast<double>(rep.exceed_count) / static_cast<double>(rep.cells);
    rep.keep_rate = static_cast<double>(rep.at_or_above) / static_cast<double>(rep.cells);
  }
  rep.bound = spec.alpha + 3.0 * std::sqrt(spec.alpha / static_cast<double>(draws));
  return rep;
}

}  // namespace hina
