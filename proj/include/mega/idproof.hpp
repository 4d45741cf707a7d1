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

#ifndef MEGA_IDPROOF_HPP_
#define MEGA_IDPROOF_HPP_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mega/graph.hpp"

namespace mega {

/// Raised when two edges carry identical feature rows, so features do not
/// induce a strict total order.
class NoStrictOrderError : public std::runtime_error {
 public:
  NoStrictOrderError(EdgeId a, EdgeId b);
  EdgeId first;
  EdgeId second;
};

/// Raised when the BFS id assignment leaves nodes without an id.
class UnreachedNodesError : public std::runtime_error {
 public:
  explicit UnreachedNodesError(std::vector<NodeId> nodes);
  std::vector<NodeId> nodes;
};

/// Unique edge labels in [1, m].
struct EdgeLabeling {
  std::vector<std::int64_t> labels;
};

/// Node identifier as a digit sequence; compared lexicographically. An
/// empty sequence means "no id yet".
using DigitId = std::vector<std::int64_t>;

struct IdState {
  std::vector<DigitId> ids;
  std::vector<char> active;
  std::vector<char> finished;
  std::int64_t rounds = 0;
};

/// Per-edge port inside its parallel-edge group (1..P) and, for every node,
/// a port for each distinct neighbor, incoming and outgoing sharing one
/// counter (1..k). Ports are ordered by `neighbor` ascending.
struct PortAssignment {
  std::vector<std::int64_t> edge_port;
  struct NeighborPort {
    NodeId neighbor;
    std::int64_t port;
  };
  std::vector<std::vector<NeighborPort>> node_ports;

  std::int64_t port_of(NodeId node, NodeId neighbor) const;
};

struct WitnessReport {
  bool found = false;
  std::int64_t n = 0;
  std::uint64_t reference_seed = 0;
  std::uint64_t witness_seed = 0;
  std::int64_t trials_used = 0;
  NodeId node = -1;
  DigitId reference_embedding;
  DigitId witness_embedding;
};

/// 1-based ranks of the edge feature rows under lexicographic order.
/// Throws NoStrictOrderError on duplicate rows.
EdgeLabeling label_edges_by_features(const Multigraph& g);

/// BFS node-id assignment driven by unique edge labels. Each round every
/// active node v sends id(v) | min label of ME_vu to each out-neighbor u
/// and id(v) | (m + min label of ME_uv) to each in-neighbor u; a node
/// without an id adopts the lexicographically smallest proposal it
/// received. Runs `rounds` rounds (default: n). Throws UnreachedNodesError
/// listing nodes that never received an id.
IdState bfs_assign_ids(const Multigraph& g, const SupportIndex& support,
                       const ReverseIndex& reverse, const EdgeLabeling& labels, NodeId root,
                       std::optional<std::int64_t> rounds = std::nullopt);

/// Port numbering with the within-scope order drawn from `order_seed`.
PortAssignment assign_ports(const Multigraph& g, const SupportIndex& support,
                            std::uint64_t order_seed);

/// Star of order n: center 0 with an edge to each leaf 1..n-1. Leaves get
/// distinct features, so the graph has no non-trivial automorphism that
/// preserves features.
Multigraph star_graph(std::int64_t n);

/// Deterministic port-driven id map: the BFS above with neighbor ports in
/// place of edge labels, started at `root`.
std::vector<DigitId> port_embeddings(const Multigraph& g, const SupportIndex& support,
                                     const PortAssignment& ports, NodeId root);

/// Compares port_embeddings on star_graph(n) under the assignment from seed
/// 0 against seeds 1..trials and reports the first node whose embedding
/// changes. n must be at least 4.
WitnessReport nonequivariance_witness(std::int64_t n, std::int64_t trials);

/// Same comparison for two explicit seeds (no search).
WitnessReport compare_port_seeds(std::int64_t n, std::uint64_t seed_a, std::uint64_t seed_b);

}  // namespace mega

#endif  // MEGA_IDPROOF_HPP_
