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

#ifndef MEGA_GRAPH_HPP_
#define MEGA_GRAPH_HPP_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mega/common.hpp"

namespace mega {

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Directed attributed multigraph. Edge k owns row k of edge_features;
/// the same (src, dst) pair may appear any number of times.
struct Multigraph {
  std::int64_t num_nodes = 0;
  Matrix node_features;  // [num_nodes x D_n]
  std::vector<Edge> edges;
  Matrix edge_features;  // [num_edges x D_e]

  std::int64_t num_edges() const { return static_cast<std::int64_t>(edges.size()); }

  /// Throws StructuralError on out-of-range endpoints, row-count
  /// mismatches or non-finite feature entries.
  void validate() const;

  friend bool operator==(const Multigraph& a, const Multigraph& b);
};

/// Unique (src, dst) pairs of a multigraph, i.e. the artificial nodes
/// sitting between connected node pairs, with the parallel-edge group of
/// each pair and per-node neighbor lists. All lists are in CSR form.
///
/// Pair order is first occurrence in the edge list; members of a group and
/// entries of the neighbor lists are in ascending index order.
class SupportIndex {
 public:
  SupportIndex() = default;

  std::int64_t num_nodes() const { return num_nodes_; }
  std::int64_t num_pairs() const { return static_cast<std::int64_t>(pairs_.size()); }
  std::int64_t num_edges() const { return static_cast<std::int64_t>(edge_to_pair_.size()); }

  const std::vector<Edge>& pairs() const { return pairs_; }
  const Edge& pair(std::int64_t s) const { return pairs_[static_cast<std::size_t>(s)]; }

  const std::vector<std::int64_t>& edge_to_pair() const { return edge_to_pair_; }
  std::int64_t pair_of(EdgeId k) const { return edge_to_pair_[static_cast<std::size_t>(k)]; }

  /// Member edge indices of pair s (the parallel-edge group).
  std::span<const EdgeId> group(std::int64_t s) const;
  std::int64_t multiplicity(std::int64_t s) const;
  const std::vector<std::int64_t>& group_offsets() const { return group_offsets_; }
  /// Edge indices concatenated group by group.
  const std::vector<EdgeId>& grouped_edges() const { return group_edges_; }

  /// Pair indices whose destination is j.
  std::span<const std::int64_t> in_pairs(NodeId j) const;
  /// Pair indices whose source is j.
  std::span<const std::int64_t> out_pairs(NodeId j) const;
  const std::vector<std::int64_t>& in_offsets() const { return in_offsets_; }
  const std::vector<std::int64_t>& in_pair_list() const { return in_pairs_; }

 private:
  friend SupportIndex build_support_index(std::int64_t, std::span<const Edge>);

  std::int64_t num_nodes_ = 0;
  std::vector<Edge> pairs_;
  std::vector<std::int64_t> edge_to_pair_;
  std::vector<std::int64_t> group_offsets_{0};
  std::vector<EdgeId> group_edges_;
  std::vector<std::int64_t> in_offsets_;
  std::vector<std::int64_t> in_pairs_;
  std::vector<std::int64_t> out_offsets_;
  std::vector<std::int64_t> out_pairs_;
};

/// Support structure of the reversed edge multiset. Reverse edge k is the
/// original edge rev_edge_to_orig[k] with its endpoints swapped; its pairs
/// are artificial nodes distinct from the forward ones even when the pair
/// coordinates coincide (self-loops, reciprocal edges).
struct ReverseIndex {
  std::vector<Edge> edges;
  SupportIndex support;
  std::vector<EdgeId> rev_edge_to_orig;
  std::vector<EdgeId> orig_to_rev_edge;
};

/// Node relabeling plus an edge relabeling compatible with it: edge k of
/// the input becomes edge edge_perm[k] of the output, with endpoints
/// node_perm[src], node_perm[dst].
struct GraphPermutation {
  std::vector<NodeId> node_perm;
  std::vector<EdgeId> edge_perm;
};

SupportIndex build_support_index(std::int64_t num_nodes, std::span<const Edge> edges);
SupportIndex build_support_index(const Multigraph& g);

ReverseIndex build_reverse_index(const Multigraph& g, const SupportIndex& s);

/// Reverse edge features at layer zero: a copy of the forward features
/// reordered to reverse-edge indexing.
Matrix reverse_edge_features(const ReverseIndex& rev, const Matrix& edge_features);

/// Relabels nodes and edges. Throws StructuralError if p is not a pair of
/// bijections of the right sizes.
Multigraph apply_permutation(const Multigraph& g, const GraphPermutation& p);

GraphPermutation inverse(const GraphPermutation& p);
GraphPermutation identity_permutation(const Multigraph& g);
/// Uniform node permutation and uniform edge permutation.
GraphPermutation random_permutation(const Multigraph& g, std::uint64_t seed);

/// Weakly connected random multigraph with exactly m edges and a spanning
/// tree backbone. Roughly half of the extra edges duplicate an existing
/// pair so that parallel edges are common. Edge feature rows are pairwise
/// distinct (column 0 is a unique timestamp-like rank).
Multigraph random_connected_multigraph(std::int64_t n, std::int64_t m, std::uint64_t seed,
                                       std::int64_t node_dim = 3, std::int64_t edge_dim = 4);

/// Weak connectivity via union-find.
bool is_weakly_connected(const Multigraph& g);

/// Undirected BFS hop distance from root; -1 for unreachable nodes.
std::vector<std::int64_t> undirected_distances(const Multigraph& g, NodeId root);

}  // namespace mega

#endif  // MEGA_GRAPH_HPP_
