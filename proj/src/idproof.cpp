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

#include "mega/idproof.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mega/rng.hpp"

namespace mega {
namespace {

std::size_t sz(std::int64_t i) { return static_cast<std::size_t>(i); }

std::string join(const std::vector<NodeId>& nodes) {
  std::string s;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(nodes[i]);
    if (i == 19 && nodes.size() > 20) return s + ",...";
  }
  return s;
}

void propose(std::vector<std::optional<DigitId>>& best, NodeId u, DigitId msg) {
  auto& slot = best[sz(u)];
  if (!slot || msg < *slot) slot = std::move(msg);
}

}  // namespace

NoStrictOrderError::NoStrictOrderError(EdgeId a, EdgeId b)
    : std::runtime_error("edges " + std::to_string(a) + " and " + std::to_string(b) +
                         " have identical features; no strict total order"),
      first(a),
      second(b) {}

UnreachedNodesError::UnreachedNodesError(std::vector<NodeId> unreached)
    : std::runtime_error("nodes never received an id (graph not connected from the root?): " +
                         join(unreached)),
      nodes(std::move(unreached)) {}

std::int64_t PortAssignment::port_of(NodeId node, NodeId neighbor) const {
  const auto& ports = node_ports[sz(node)];
  auto it = std::lower_bound(ports.begin(), ports.end(), neighbor,
                             [](const NeighborPort& p, NodeId v) { return p.neighbor < v; });
  if (it == ports.end() || it->neighbor != neighbor) {
    throw PreconditionError("port_of: nodes are not adjacent");
  }
  return it->port;
}

EdgeLabeling label_edges_by_features(const Multigraph& g) {
  const auto m = g.num_edges();
  std::vector<EdgeId> order(sz(m));
  std::iota(order.begin(), order.end(), EdgeId{0});
  const Matrix& f = g.edge_features;
  auto row_less = [&](EdgeId a, EdgeId b) {
    for (Eigen::Index c = 0; c < f.cols(); ++c) {
      if (f(a, c) != f(b, c)) return f(a, c) < f(b, c);
    }
    return false;
  };
  std::stable_sort(order.begin(), order.end(), row_less);
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (!row_less(order[i - 1], order[i])) throw NoStrictOrderError(order[i - 1], order[i]);
  }
  EdgeLabeling labels;
  labels.labels.resize(sz(m));
  for (std::size_t i = 0; i < order.size(); ++i) {
    labels.labels[sz(order[i])] = static_cast<std::int64_t>(i) + 1;
  }
  return labels;
}

IdState bfs_assign_ids(const Multigraph& g, const SupportIndex& support,
                       const ReverseIndex& reverse, const EdgeLabeling& labels, NodeId root,
                       std::optional<std::int64_t> rounds) {
  const auto n = g.num_nodes;
  const auto m = g.num_edges();
  if (root < 0 || root >= n) throw PreconditionError("bfs_assign_ids: root out of range");
  if (static_cast<std::int64_t>(labels.labels.size()) != m) {
    throw PreconditionError("bfs_assign_ids: one label per edge required");
  }
  IdState st;
  st.ids.assign(sz(n), {});
  st.active.assign(sz(n), 0);
  st.finished.assign(sz(n), 0);
  st.ids[sz(root)] = {1};
  st.active[sz(root)] = 1;

  const std::int64_t total_rounds = rounds.value_or(n);
  for (std::int64_t k = 1; k <= total_rounds; ++k) {
    std::vector<std::optional<DigitId>> best(sz(n));
    bool any_active = false;
    for (NodeId v = 0; v < n; ++v) {
      if (!st.active[sz(v)]) continue;
      any_active = true;
      // Outgoing side: min label over the parallel edges v -> u.
      for (std::int64_t s : support.out_pairs(v)) {
        std::int64_t lab = m + 1;
        for (EdgeId e : support.group(s)) lab = std::min(lab, labels.labels[sz(e)]);
        DigitId msg = st.ids[sz(v)];
        msg.push_back(lab);
        propose(best, support.pair(s).dst, std::move(msg));
      }
      // Incoming side travels the reversed edges u -> v seen as v -> u.
      for (std::int64_t s : reverse.support.out_pairs(v)) {
        std::int64_t lab = m + 1;
        for (EdgeId r : reverse.support.group(s)) {
          lab = std::min(lab, labels.labels[sz(reverse.rev_edge_to_orig[sz(r)])]);
        }
        DigitId msg = st.ids[sz(v)];
        msg.push_back(m + lab);
        propose(best, reverse.support.pair(s).dst, std::move(msg));
      }
      st.finished[sz(v)] = 1;
      st.active[sz(v)] = 0;
    }
    if (!any_active) break;
    st.rounds = k;
    for (NodeId v = 0; v < n; ++v) {
      if (st.finished[sz(v)] || !st.ids[sz(v)].empty() || !best[sz(v)]) continue;
      st.ids[sz(v)] = std::move(*best[sz(v)]);
      st.active[sz(v)] = 1;
    }
  }
  std::vector<NodeId> unreached;
  for (NodeId v = 0; v < n; ++v) {
    if (st.ids[sz(v)].empty()) unreached.push_back(v);
  }
  if (!unreached.empty()) throw UnreachedNodesError(std::move(unreached));
  return st;
}

PortAssignment assign_ports(const Multigraph& g, const SupportIndex& support,
                            std::uint64_t order_seed) {
  PortAssignment ports;
  ports.edge_port.assign(g.edges.size(), 0);
  for (std::int64_t s = 0; s < support.num_pairs(); ++s) {
    const auto group = support.group(s);
    std::vector<std::int64_t> order(group.size());
    std::iota(order.begin(), order.end(), std::int64_t{1});
    Rng rng(mix_seed(order_seed, static_cast<std::uint64_t>(s)));
    rng.shuffle(order);
    for (std::size_t i = 0; i < group.size(); ++i) ports.edge_port[sz(group[i])] = order[i];
  }
  ports.node_ports.resize(sz(g.num_nodes));
  for (NodeId v = 0; v < g.num_nodes; ++v) {
    std::vector<NodeId> neighbors;
    for (std::int64_t s : support.in_pairs(v)) neighbors.push_back(support.pair(s).src);
    for (std::int64_t s : support.out_pairs(v)) neighbors.push_back(support.pair(s).dst);
    std::sort(neighbors.begin(), neighbors.end());
    neighbors.erase(std::unique(neighbors.begin(), neighbors.end()), neighbors.end());
    std::vector<std::int64_t> order(neighbors.size());
    std::iota(order.begin(), order.end(), std::int64_t{1});
    Rng rng(mix_seed(order_seed ^ 0xa5a5a5a5ULL, static_cast<std::uint64_t>(v)));
    rng.shuffle(order);
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
      ports.node_ports[sz(v)].push_back({neighbors[i], order[i]});
    }
  }
  return ports;
}

Multigraph star_graph(std::int64_t n) {
  if (n < 2) throw PreconditionError("star_graph: order must be >= 2");
  Multigraph g;
  g.num_nodes = n;
  g.node_features.resize(n, 1);
  for (NodeId v = 0; v < n; ++v) g.node_features(v, 0) = static_cast<double>(v);
  for (NodeId leaf = 1; leaf < n; ++leaf) g.edges.push_back({0, leaf});
  g.edge_features.resize(n - 1, 1);
  for (NodeId leaf = 1; leaf < n; ++leaf) g.edge_features(leaf - 1, 0) = static_cast<double>(leaf);
  return g;
}

std::vector<DigitId> port_embeddings(const Multigraph& g, const SupportIndex& support,
                                     const PortAssignment& ports, NodeId root) {
  const auto n = g.num_nodes;
  std::vector<DigitId> ids(sz(n));
  std::vector<char> finished(sz(n), 0);
  std::vector<NodeId> active{root};
  ids[sz(root)] = {1};
  while (!active.empty()) {
    std::vector<std::optional<DigitId>> best(sz(n));
    for (NodeId v : active) {
      for (const auto& np : ports.node_ports[sz(v)]) {
        DigitId msg = ids[sz(v)];
        msg.push_back(np.port);
        propose(best, np.neighbor, std::move(msg));
      }
      finished[sz(v)] = 1;
    }
    active.clear();
    for (NodeId v = 0; v < n; ++v) {
      if (finished[sz(v)] || !ids[sz(v)].empty() || !best[sz(v)]) continue;
      ids[sz(v)] = std::move(*best[sz(v)]);
      active.push_back(v);
    }
  }
  (void)support;
  return ids;
}

WitnessReport compare_port_seeds(std::int64_t n, std::uint64_t seed_a, std::uint64_t seed_b) {
  if (n < 4) throw PreconditionError("port witness needs a star of order n >= 4");
  const Multigraph g = star_graph(n);
  const SupportIndex s = build_support_index(g);
  const auto a = port_embeddings(g, s, assign_ports(g, s, seed_a), 0);
  const auto b = port_embeddings(g, s, assign_ports(g, s, seed_b), 0);
  WitnessReport r;
  r.n = n;
  r.reference_seed = seed_a;
  r.witness_seed = seed_b;
  r.trials_used = 1;
  for (NodeId v = 0; v < n; ++v) {
    if (a[sz(v)] != b[sz(v)]) {
      r.found = true;
      r.node = v;
      r.reference_embedding = a[sz(v)];
      r.witness_embedding = b[sz(v)];
      break;
    }
  }
  return r;
}

WitnessReport nonequivariance_witness(std::int64_t n, std::int64_t trials) {
  if (n < 4) throw PreconditionError("port witness needs a star of order n >= 4");
  WitnessReport r;
  r.n = n;
  for (std::int64_t t = 1; t <= trials; ++t) {
    r = compare_port_seeds(n, 0, static_cast<std::uint64_t>(t));
    r.trials_used = t;
    if (r.found) return r;
  }
  return r;
}

}  // namespace mega
