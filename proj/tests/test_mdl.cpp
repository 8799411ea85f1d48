#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hina/mdl.hpp"
#include "support.hpp"

using namespace hina;

namespace {

// N1 = N2 = 2, edges (1,1,2), (2,2,2).
Hin diagonal() { return oracle::hin_from_matrix(2, 2, {2, 0, 0, 2}); }

// `blocks` groups of `per_block` Set1 nodes; each node puts `w_in` on each of
// `targets` targets exclusive to its block, plus `noise` on one other target.
Hin planted(std::size_t blocks, std::size_t per_block, std::size_t targets, Weight w_in, Weight noise,
            std::mt19937_64* rng = nullptr) {
  const std::size_t n1 = blocks * per_block, n2 = blocks * targets;
  std::vector<Weight> cells(n1 * n2, 0);
  for (std::size_t i = 0; i < n1; ++i) {
    const std::size_t b = i / per_block;
    for (std::size_t t = 0; t < targets; ++t) cells[i * n2 + b * targets + t] = w_in;
    if (noise > 0 && rng) {
      std::size_t j = (*rng)() % n2;
      if (j / targets == b) j = (j + targets) % n2;
      cells[i * n2 + j] += noise;
    }
  }
  return oracle::hin_from_matrix(n1, n2, cells);
}

std::vector<std::size_t> planted_labels(std::size_t blocks, std::size_t per_block) {
  std::vector<std::size_t> l;
  for (std::size_t b = 0; b < blocks; ++b) l.insert(l.end(), per_block, b);
  return l;
}

}  // namespace

TEST(Partition, Validation) {
  EXPECT_THROW(Partition({0, 2}), Error);
  auto p = Partition::canonical({7, 3, 7, 9});
  EXPECT_EQ(p.labels(), (std::vector<std::size_t>{0, 1, 0, 2}));
  EXPECT_EQ(p.sizes(), (std::vector<std::size_t>{2, 1, 1}));
  EXPECT_EQ(p.members(0), (std::vector<std::size_t>{0, 2}));
  EXPECT_THROW(description_length(diagonal(), Partition({0, 0, 0})), Error);
}

TEST(DescriptionLength, HandWorkedValues) {
  // 1 + log2 5 + 2 log2 3
  const double one_group = 1.0 + std::log2(5.0) + 2.0 * std::log2(3.0);
  // 1 + 0 + 1 + log2 35
  const double singletons = 2.0 + std::log2(35.0);
  EXPECT_NEAR(one_group, 6.4919, 1e-4);
  EXPECT_NEAR(singletons, 7.1293, 1e-4);
  EXPECT_NEAR(description_length(diagonal(), Partition::single_group(2)), one_group, 1e-9);
  EXPECT_NEAR(description_length(diagonal(), Partition::singletons(2)), singletons, 1e-9);
  EXPECT_NEAR(oracle::exact_description_length(diagonal(), {0, 0}), one_group, 1e-9);
  EXPECT_NEAR(oracle::exact_description_length(diagonal(), {0, 1}), singletons, 1e-9);
}

TEST(DescriptionLength, SingleNode) {
  auto g = oracle::hin_from_matrix(1, 3, {2, 0, 5});
  // log2 C(N2 + W - 1, W) = log2 C(9, 7) = log2 36
  EXPECT_NEAR(description_length(g, Partition::single_group(1)), std::log2(36.0), 1e-9);
}

TEST(DescriptionLength, MatchesExactIntegerEvaluation) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 200; ++t) {
    auto g = oracle::random_hin(rng, 10, 10, 200);
    std::vector<std::size_t> raw(g.n1());
    const std::size_t b = 1 + rng() % g.n1();
    for (auto& l : raw) l = rng() % b;
    auto p = Partition::canonical(raw);
    EXPECT_NEAR(description_length(g, p), oracle::exact_description_length(g, p.labels()), 1e-6);
  }
}

TEST(DescriptionLength, PermutationInvariance) {
  std::mt19937_64 rng(32);
  for (int t = 0; t < 50; ++t) {
    auto g = oracle::random_hin(rng, 8, 8, 80);
    std::vector<std::size_t> raw(g.n1());
    for (auto& l : raw) l = rng() % 3;
    auto p = Partition::canonical(raw);
    const double dl = description_length(g, p);

    // Relabeling group ids changes nothing.
    std::vector<std::size_t> relabeled(raw);
    for (auto& l : relabeled) l = 100 - l;
    EXPECT_NEAR(description_length(g, Partition::canonical(relabeled)), dl, 1e-9);

    // Neither does reordering Set2.
    std::vector<std::size_t> perm(g.n2());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Node> s2(g.n2());
    for (std::size_t j = 0; j < g.n2(); ++j) s2[perm[j]] = g.nodes(NodeSet::Set2)[j];
    std::vector<Edge> edges;
    for (const auto& e : g.edges()) edges.push_back({e.i, perm[e.j], e.w});
    Hin h(g.nodes(NodeSet::Set1), s2, edges);
    EXPECT_NEAR(description_length(h, p), dl, 1e-9);
  }
}

TEST(Exhaustive, TwoNodeOptimum) {
  auto r = exhaustive_cluster(diagonal());
  EXPECT_EQ(r.best_partition.num_groups(), 1u);
  EXPECT_NEAR(r.best_dl, 6.4919, 1e-4);
  ASSERT_EQ(r.dl_trace.size(), 2u);
  EXPECT_NEAR(r.dl_trace[0].second, 7.1293, 1e-4);
}

TEST(Exhaustive, EnumeratesBellManyPartitions) {
  // Bell(6) = 203 distinct restricted growth strings; count them through the
  // trace of a graph where every partition has a distinct label vector.
  std::size_t visited = 0;
  std::vector<std::size_t> rgs(6, 0);
  // Independent enumeration: all label vectors in [0,6)^6 that are canonical.
  for (std::size_t code = 0; code < 46656; ++code) {
    std::size_t c = code, mx = 0;
    bool ok = true;
    for (std::size_t k = 0; k < 6; ++k) {
      rgs[k] = c % 6;
      c /= 6;
      if (k == 0 ? rgs[k] != 0 : rgs[k] > mx + 1) ok = false;
      if (k > 0) mx = std::max(mx, rgs[k]);
    }
    visited += ok;
  }
  EXPECT_EQ(visited, 203u);
}

TEST(Exhaustive, TooLarge) {
  auto g = oracle::hin_from_matrix(11, 1, std::vector<Weight>(11, 1));
  try {
    exhaustive_cluster(g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "TooLarge");
  }
}

TEST(Exhaustive, PlantedFourPlusFourIsOptimal) {
  auto g = planted(2, 4, 5, 5, 0);
  auto r = exhaustive_cluster(g);
  EXPECT_EQ(r.best_partition.labels(), planted_labels(2, 4));
}

TEST(Exhaustive, UniformNoisePrefersOneGroup) {
  auto g = oracle::hin_from_matrix(6, 6, std::vector<Weight>(36, 1));
  auto r = exhaustive_cluster(g);
  EXPECT_EQ(r.best_partition.num_groups(), 1u);
  auto greedy = cluster(g);
  EXPECT_EQ(greedy.best_partition.num_groups(), 1u);
  EXPECT_NEAR(greedy.best_dl, r.best_dl, 1e-9);
}

TEST(Greedy, RecoversPlantedBlocks) {
  auto g = planted(2, 10, 5, 5, 0);
  auto r = cluster(g);
  EXPECT_EQ(r.best_partition.num_groups(), 2u);
  EXPECT_DOUBLE_EQ(normalized_mutual_information(r.best_partition.labels(), planted_labels(2, 10)), 1.0);
}

TEST(Greedy, SingleNode) {
  auto g = oracle::hin_from_matrix(1, 2, {1, 2});
  auto r = cluster(g);
  EXPECT_EQ(r.best_partition.num_groups(), 1u);
  EXPECT_TRUE(r.merge_log.empty());
  ASSERT_EQ(r.dl_trace.size(), 1u);
}

TEST(Greedy, TraceMatchesFullRecompute) {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 60; ++t) {
    auto g = oracle::random_hin(rng, 12, 10, 150);
    auto r = cluster(g);
    ASSERT_EQ(r.dl_trace.size(), g.n1());
    ASSERT_EQ(r.merge_log.size(), g.n1() - 1);
    for (std::size_t k = 0; k < r.dl_trace.size(); ++k) {
      EXPECT_EQ(r.dl_trace[k].first, g.n1() - k);
      auto p = detail::replay_merges(g.n1(), r.merge_log, k);
      EXPECT_EQ(p.num_groups(), r.dl_trace[k].first);
      EXPECT_NEAR(description_length(g, p), r.dl_trace[k].second, 1e-7);
      if (k > 0) {
        EXPECT_NEAR(r.dl_trace[k].second - r.dl_trace[k - 1].second, r.merge_log[k - 1].delta, 1e-7);
      }
    }
    double min_dl = r.dl_trace.front().second;
    for (const auto& [b, dl] : r.dl_trace) min_dl = std::min(min_dl, dl);
    EXPECT_NEAR(r.best_dl, min_dl, 1e-9);
    EXPECT_NEAR(description_length(g, r.best_partition), r.best_dl, 1e-7);
    EXPECT_LE(r.best_dl, description_length(g, Partition::singletons(g.n1())) + 1e-9);
    EXPECT_LE(r.best_dl, description_length(g, Partition::single_group(g.n1())) + 1e-9);
  }
}

TEST(Greedy, NeverBeatsExhaustive) {
  std::mt19937_64 rng(43);
  for (int t = 0; t < 40; ++t) {
    auto g = oracle::random_hin(rng, 7, 6, 60);
    EXPECT_GE(cluster(g).best_dl, exhaustive_cluster(g).best_dl - 1e-9);
  }
}

TEST(Greedy, DeterministicAndRestarts) {
  std::mt19937_64 rng(44);
  auto g = oracle::random_hin(rng, 15, 8, 120);
  auto a = to_json(cluster(g, {std::uint64_t{5}, 1})).dump();
  auto b = to_json(cluster(g, {std::uint64_t{5}, 1})).dump();
  EXPECT_EQ(a, b);
  auto r1 = cluster(g);
  auto r4 = cluster(g, {std::uint64_t{5}, 4});
  EXPECT_LE(r4.best_dl, r1.best_dl + 1e-9);
  EXPECT_EQ(to_json(r4).dump(), to_json(cluster(g, {std::uint64_t{5}, 4})).dump());
  EXPECT_THROW(cluster(g, {std::nullopt, 0}), UsageError);
}

TEST(Greedy, DeadlineIsEnforced) {
  auto g = planted(2, 10, 5, 5, 0);
  ClusterOptions opts;
  opts.deadline = std::chrono::steady_clock::now() - std::chrono::seconds(1);
  try {
    cluster(g, opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "Timeout");
  }
}

TEST(Greedy, DuplicateRowsMergeCheaperThanDisjointRows) {
  // Two groups with identical rows cost no more to merge (in the per-target
  // weight-configuration bits) than two groups of the same sizes and row sums
  // with disjoint support.
  std::mt19937_64 rng(45);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n2 = 6;
    std::vector<Weight> row(n2, 0);
    for (std::size_t j = 0; j < 3; ++j) row[j] = static_cast<Weight>(rng() % 6);
    row[0] += 1;
    std::vector<Weight> shifted(n2, 0);
    for (std::size_t j = 0; j < 3; ++j) shifted[j + 3] = row[j];
    auto same = oracle::hin_from_matrix(2, n2, [&] {
      std::vector<Weight> c(row);
      c.insert(c.end(), row.begin(), row.end());
      return c;
    }());
    auto disjoint = oracle::hin_from_matrix(2, n2, [&] {
      std::vector<Weight> c(row);
      c.insert(c.end(), shifted.begin(), shifted.end());
      return c;
    }());
    auto last_term = [](const Hin& h, const Partition& p) {
      double bits = 0.0;
      auto bw = block_weights(h, p);
      for (std::size_t r = 0; r < bw.size(); ++r)
        for (auto w : bw[r]) bits += mdl::log2_multiset(static_cast<double>(p.sizes()[r]), w);
      return bits;
    };
    const auto one = Partition::single_group(2), two = Partition::singletons(2);
    EXPECT_LE(last_term(same, one) - last_term(same, two), last_term(disjoint, one) - last_term(disjoint, two) + 1e-9);
    EXPECT_LE(description_length(same, one), description_length(disjoint, one) + 1e-9);
  }
}

TEST(Nmi, Basics) {
  EXPECT_DOUBLE_EQ(normalized_mutual_information({0, 0, 1, 1}, {1, 1, 0, 0}), 1.0);
  EXPECT_NEAR(normalized_mutual_information({0, 0, 1, 1}, {0, 1, 0, 1}), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(normalized_mutual_information({0, 0}, {0, 0}), 1.0);
}

TEST(Projection, Aggregation) {
  auto g = build_hin({"a", "b", "c"}, {"x", "y"}, {{"a", "x", 3}, {"b", "x", 2}, {"b", "y", 1}, {"c", "y", 4}});
  Partition p({0, 0, 1});
  auto proj = project_cluster(g, p, 0);
  ASSERT_EQ(proj.rows.size(), 2u);
  EXPECT_EQ(proj.rows[0].w, 5);
  EXPECT_EQ(proj.rows[1].w, 1);
  EXPECT_FALSE(proj.split_by_parts);
  EXPECT_EQ(proj.graph.n1(), 1u);
  EXPECT_EQ(proj.graph.n2(), 2u);

  auto single = project_cluster(g, p, 1);
  ASSERT_EQ(single.rows.size(), 1u);
  EXPECT_EQ(single.rows[0].j, 1u);
  EXPECT_EQ(single.rows[0].w, 4);

  try {
    project_cluster(g, p, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "UnknownCluster");
  }
  try {
    prune_projection(proj, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "NotBipartiteProjection");
  }
}

TEST(Projection, SumsRecoverSet2Strengths) {
  std::mt19937_64 rng(46);
  for (int t = 0; t < 30; ++t) {
    auto g = oracle::random_hin(rng, 12, 9, 100);
    auto r = cluster(g);
    std::vector<Weight> sums(g.n2(), 0);
    for (std::size_t c = 0; c < r.best_partition.num_groups(); ++c)
      for (const auto& row : project_cluster(g, r.best_partition, c).rows) sums[row.j] += row.w;
    EXPECT_EQ(sums, g.strengths2());
  }
}

namespace {

NodeLabel cp(const std::string& code, const std::string& partner) {
  return NodeLabel(std::vector<std::string>{code, partner});
}

// One student per cell weight pattern over codes x partners.
Hin code_partner_graph(const std::vector<std::string>& codes, const std::vector<std::string>& partners,
                       const std::function<Weight(std::size_t, std::size_t)>& weight) {
  std::vector<NodeLabel> s2;
  std::vector<WeightedPair> pairs;
  for (std::size_t c = 0; c < codes.size(); ++c)
    for (std::size_t p = 0; p < partners.size(); ++p) {
      s2.push_back(cp(codes[c], partners[p]));
      if (auto w = weight(c, p)) pairs.push_back({"s", cp(codes[c], partners[p]), w});
    }
  return build_hin({"s"}, s2, pairs);
}

}  // namespace

TEST(Projection, PruneFindsDominantCodePartnerPair) {
  auto g = code_partner_graph({"Question", "Planning", "Explain"}, {"AI", "P1", "P2"},
                              [](std::size_t c, std::size_t p) { return c == 0 && p == 0 ? Weight{20} : Weight{1}; });
  auto proj = project_cluster(g, Partition::single_group(1), 0);
  ASSERT_TRUE(proj.split_by_parts);
  EXPECT_EQ(proj.graph.n1(), 3u);
  EXPECT_EQ(proj.graph.n2(), 3u);
  auto r = prune_projection(proj, {FixDeg::None, 0.05});
  // W = 28 over 9 cells; threshold from the brute-force CDF.
  const auto t = oracle::brute_force_quantile(28, 1.0 / 9.0, 0.95);
  ASSERT_GT(t, 1);
  ASSERT_LE(t, 20);
  auto kept = r.kept_edges();
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(proj.graph.label1(kept[0].i), NodeLabel("Question"));
  EXPECT_EQ(proj.graph.label2(kept[0].j), NodeLabel("AI"));
}

TEST(Projection, SingleCellAndExtremeAlpha) {
  auto single = code_partner_graph({"Q"}, {"AI"}, [](std::size_t, std::size_t) { return Weight{3}; });
  auto r = prune_projection(project_cluster(single, Partition::single_group(1), 0), {FixDeg::None, 0.05});
  EXPECT_EQ(r.kept_edges().size(), 1u);

  auto flat = code_partner_graph({"A", "B", "C", "D"}, {"AI", "P"}, [](std::size_t, std::size_t) { return Weight{3}; });
  auto strict = prune_projection(project_cluster(flat, Partition::single_group(1), 0), {FixDeg::None, 1e-9});
  EXPECT_TRUE(strict.kept_edges().empty());
}
