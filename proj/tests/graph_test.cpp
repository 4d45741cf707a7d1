// Copyright 2026 The megagraph Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mega/graph.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "mega/rng.hpp"

namespace mega {
namespace {

Multigraph make_graph(std::int64_t n, std::vector<Edge> edges, std::int64_t edge_dim = 1) {
  Multigraph g;
  g.num_nodes = n;
  g.node_features = Matrix::Ones(n, 1);
  g.edges = std::move(edges);
  g.edge_features.resize(g.num_edges(), edge_dim);
  for (std::int64_t k = 0; k < g.num_edges(); ++k) g.edge_features.row(k).setConstant(double(k));
  return g;
}

std::vector<EdgeId> as_vec(std::span<const EdgeId> s) { return {s.begin(), s.end()}; }

TEST(SupportIndexTest, GroupsParallelEdgesInFirstOccurrenceOrder) {
  const auto g = make_graph(3, {{0, 1}, {0, 1}, {2, 1}});
  const auto s = build_support_index(g);
  ASSERT_EQ(s.num_pairs(), 2);
  EXPECT_EQ(s.pair(0), (Edge{0, 1}));
  EXPECT_EQ(s.pair(1), (Edge{2, 1}));
  EXPECT_EQ(s.multiplicity(0), 2);
  EXPECT_EQ(s.multiplicity(1), 1);
  EXPECT_EQ(as_vec(s.group(0)), (std::vector<EdgeId>{0, 1}));
  EXPECT_EQ(as_vec(s.group(1)), (std::vector<EdgeId>{2}));
  EXPECT_EQ(s.in_pairs(1).size(), 2u);
  EXPECT_EQ(s.out_pairs(0).size(), 1u);
  EXPECT_TRUE(s.in_pairs(0).empty());
}

TEST(SupportIndexTest, EmptyEdgeSet) {
  const auto g = make_graph(3, {});
  const auto s = build_support_index(g);
  EXPECT_EQ(s.num_pairs(), 0);
  for (NodeId v = 0; v < 3; ++v) {
    EXPECT_TRUE(s.in_pairs(v).empty());
    EXPECT_TRUE(s.out_pairs(v).empty());
  }
}

TEST(SupportIndexTest, SelfLoopIsItsOwnNeighborBothWays) {
  const auto g = make_graph(1, {{0, 0}});
  const auto s = build_support_index(g);
  ASSERT_EQ(s.num_pairs(), 1);
  EXPECT_EQ(s.pair(0), (Edge{0, 0}));
  ASSERT_EQ(s.in_pairs(0).size(), 1u);
  ASSERT_EQ(s.out_pairs(0).size(), 1u);
  EXPECT_EQ(s.in_pairs(0)[0], 0);
  EXPECT_EQ(s.out_pairs(0)[0], 0);
}

TEST(SupportIndexTest, OutOfRangeEndpointIsStructuralError) {
  const std::vector<Edge> edges{{0, 3}};
  EXPECT_THROW(build_support_index(3, edges), StructuralError);
}

TEST(SupportIndexTest, PropertiesOnRandomGraphs) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto n = static_cast<std::int64_t>(1 + rng.index(15));
    const auto m = n - 1 + static_cast<std::int64_t>(rng.index(40));
    const auto g = random_connected_multigraph(n, m, seed);
    const auto s = build_support_index(g);
    std::int64_t total = 0;
    std::vector<int> seen(static_cast<std::size_t>(m), 0);
    std::map<std::pair<NodeId, NodeId>, int> pair_count;
    for (std::int64_t p = 0; p < s.num_pairs(); ++p) {
      EXPECT_GE(s.multiplicity(p), 1);
      EXPECT_EQ(s.multiplicity(p), static_cast<std::int64_t>(s.group(p).size()));
      total += s.multiplicity(p);
      for (EdgeId k : s.group(p)) {
        ++seen[static_cast<std::size_t>(k)];
        EXPECT_EQ(g.edges[static_cast<std::size_t>(k)], s.pair(p));
        EXPECT_EQ(s.pair_of(k), p);
      }
      ++pair_count[{s.pair(p).src, s.pair(p).dst}];
    }
    EXPECT_EQ(total, m);
    for (int c : seen) EXPECT_EQ(c, 1);
    for (const auto& [pair, c] : pair_count) EXPECT_EQ(c, 1);
  }
}

std::vector<std::int64_t> sorted_multiplicities(const SupportIndex& s) {
  std::vector<std::int64_t> out;
  for (std::int64_t p = 0; p < s.num_pairs(); ++p) out.push_back(s.multiplicity(p));
  std::sort(out.begin(), out.end());
  return out;
}

TEST(SupportIndexTest, MultiplicitiesArePermutationInvariant) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = random_connected_multigraph(12, 40, seed);
    const auto pg = apply_permutation(g, random_permutation(g, seed + 100));
    EXPECT_EQ(sorted_multiplicities(build_support_index(g)),
              sorted_multiplicities(build_support_index(pg)));
  }
}

TEST(ReverseIndexTest, SwapsPairs) {
  const auto g = make_graph(2, {{0, 1}, {0, 1}});
  const auto s = build_support_index(g);
  const auto r = build_reverse_index(g, s);
  ASSERT_EQ(r.support.num_pairs(), 1);
  EXPECT_EQ(r.support.pair(0), (Edge{1, 0}));
  EXPECT_EQ(r.support.multiplicity(0), 2);
}

TEST(ReverseIndexTest, ReciprocalEdgesGetSeparateArtificialNodes) {
  const auto g = make_graph(2, {{0, 1}, {1, 0}});
  const auto s = build_support_index(g);
  const auto r = build_reverse_index(g, s);
  ASSERT_EQ(r.support.num_pairs(), 2);
  EXPECT_EQ(r.support.pair(0), (Edge{1, 0}));
  EXPECT_EQ(r.support.pair(1), (Edge{0, 1}));
  // Reverse pair (1,0) groups the original 0->1 edge, not the 1->0 one.
  EXPECT_EQ(r.rev_edge_to_orig[static_cast<std::size_t>(r.support.group(0)[0])], 0);
}

TEST(ReverseIndexTest, SelfLoopMapsToItself) {
  const auto g = make_graph(1, {{0, 0}});
  const auto s = build_support_index(g);
  const auto r = build_reverse_index(g, s);
  ASSERT_EQ(r.support.num_pairs(), 1);
  EXPECT_EQ(r.support.pair(0), (Edge{0, 0}));
}

TEST(ReverseIndexTest, BijectionAndSwappedEndpoints) {
  const auto g = random_connected_multigraph(10, 30, 3);
  const auto s = build_support_index(g);
  const auto r = build_reverse_index(g, s);
  std::vector<int> hit(30, 0);
  for (std::size_t k = 0; k < r.edges.size(); ++k) {
    const auto orig = static_cast<std::size_t>(r.rev_edge_to_orig[k]);
    ++hit[orig];
    EXPECT_EQ(r.edges[k].src, g.edges[orig].dst);
    EXPECT_EQ(r.edges[k].dst, g.edges[orig].src);
  }
  for (int h : hit) EXPECT_EQ(h, 1);
  const Matrix rev_feat = reverse_edge_features(r, g.edge_features);
  for (std::size_t k = 0; k < r.edges.size(); ++k) {
    EXPECT_EQ(rev_feat.row(static_cast<Eigen::Index>(k)),
              g.edge_features.row(r.rev_edge_to_orig[k]));
  }
}

TEST(ReverseIndexTest, ReversingTwiceRecoversForwardPairs) {
  const auto g = random_connected_multigraph(9, 35, 11);
  const auto s = build_support_index(g);
  const auto r = build_reverse_index(g, s);
  Multigraph rg = g;
  rg.edges = r.edges;
  const auto rs = build_support_index(rg);
  const auto rr = build_reverse_index(rg, rs);
  std::multiset<std::pair<NodeId, NodeId>> a;
  std::multiset<std::pair<NodeId, NodeId>> b;
  for (std::int64_t p = 0; p < s.num_pairs(); ++p) a.insert({s.pair(p).src, s.pair(p).dst});
  for (std::int64_t p = 0; p < rr.support.num_pairs(); ++p) {
    b.insert({rr.support.pair(p).src, rr.support.pair(p).dst});
  }
  EXPECT_EQ(a, b);
}

TEST(PermutationTest, IdentityIsExact) {
  const auto g = random_connected_multigraph(8, 20, 5);
  EXPECT_EQ(apply_permutation(g, identity_permutation(g)), g);
}

TEST(PermutationTest, SwapTwoNodes) {
  auto g = make_graph(2, {{0, 1}});
  g.node_features << 10.0, 20.0;
  GraphPermutation p{{1, 0}, {0}};
  const auto pg = apply_permutation(g, p);
  EXPECT_EQ(pg.edges[0], (Edge{1, 0}));
  EXPECT_EQ(pg.node_features(0, 0), 20.0);
  EXPECT_EQ(pg.node_features(1, 0), 10.0);
}

TEST(PermutationTest, RoundTripWithInverse) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = random_connected_multigraph(10, 25, seed);
    const auto p = random_permutation(g, seed * 7 + 1);
    EXPECT_EQ(apply_permutation(apply_permutation(g, p), inverse(p)), g);
  }
}

TEST(PermutationTest, RejectsNonBijection) {
  const auto g = make_graph(3, {{0, 1}});
  EXPECT_THROW(apply_permutation(g, GraphPermutation{{0, 0, 1}, {0}}), StructuralError);
  EXPECT_THROW(apply_permutation(g, GraphPermutation{{0, 1, 2}, {1}}), StructuralError);
  EXPECT_THROW(apply_permutation(g, GraphPermutation{{0, 1}, {0}}), StructuralError);
}

TEST(RandomGraphTest, SingleNode) {
  const auto g = random_connected_multigraph(1, 0, 1);
  EXPECT_EQ(g.num_nodes, 1);
  EXPECT_EQ(g.num_edges(), 0);
  EXPECT_NO_THROW(g.validate());
}

TEST(RandomGraphTest, TreeIsConnected) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = random_connected_multigraph(5, 4, seed);
    EXPECT_TRUE(is_weakly_connected(g));
    EXPECT_EQ(g.num_edges(), 4);
  }
}

TEST(RandomGraphTest, DeterministicForSeed) {
  EXPECT_EQ(random_connected_multigraph(10, 40, 7), random_connected_multigraph(10, 40, 7));
  EXPECT_FALSE(random_connected_multigraph(10, 40, 7) == random_connected_multigraph(10, 40, 8));
}

TEST(RandomGraphTest, InfeasibleEdgeCount) {
  EXPECT_THROW(random_connected_multigraph(5, 3, 0), PreconditionError);
}

TEST(RandomGraphTest, ThousandRandomInstancesAreConnectedWithDistinctEdges) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<std::int64_t>(1 + rng.index(30));
    const auto m = n - 1 + static_cast<std::int64_t>(rng.index(60));
    const auto g = random_connected_multigraph(n, m, rng.next_u64());
    ASSERT_TRUE(is_weakly_connected(g)) << "n=" << n << " m=" << m;
    ASSERT_EQ(g.num_edges(), m);
    ASSERT_NO_THROW(g.validate());
    std::vector<std::vector<double>> rows;
    for (std::int64_t k = 0; k < m; ++k) {
      rows.emplace_back(g.edge_features.row(k).data(), g.edge_features.row(k).data() + g.edge_features.cols());
    }
    std::sort(rows.begin(), rows.end());
    ASSERT_EQ(std::adjacent_find(rows.begin(), rows.end()), rows.end());
  }
}

TEST(MultigraphTest, ValidateCatchesBadInput) {
  auto g = make_graph(2, {{0, 1}});
  EXPECT_NO_THROW(g.validate());
  g.edge_features(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(g.validate(), StructuralError);
  g = make_graph(2, {{0, 2}});
  EXPECT_THROW(g.validate(), StructuralError);
}

}  // namespace
}  // namespace mega
