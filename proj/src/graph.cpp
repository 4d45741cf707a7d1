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
#include <cmath>
#include <numeric>
#include <queue>
#include <string>
#include <unordered_map>

#include "mega/rng.hpp"

namespace mega {
namespace {

struct PairHash {
  std::size_t operator()(const Edge& e) const noexcept {
    return static_cast<std::size_t>(
        mix_seed(static_cast<std::uint64_t>(e.src), static_cast<std::uint64_t>(e.dst)));
  }
};

std::vector<std::int64_t> offsets_from_counts(const std::vector<std::int64_t>& counts) {
  std::vector<std::int64_t> offsets(counts.size() + 1, 0);
  std::partial_sum(counts.begin(), counts.end(), offsets.begin() + 1);
  return offsets;
}

std::size_t idx(std::int64_t i) { return static_cast<std::size_t>(i); }

template <typename T>
bool is_permutation_of_range(const std::vector<T>& p, std::int64_t n) {
  if (static_cast<std::int64_t>(p.size()) != n) return false;
  std::vector<char> seen(idx(n), 0);
  for (T v : p) {
    if (v < 0 || v >= n || seen[idx(v)]) return false;
    seen[idx(v)] = 1;
  }
  return true;
}

}  // namespace

void Multigraph::validate() const {
  if (num_nodes < 0) throw StructuralError("negative node count");
  if (node_features.rows() != num_nodes) {
    throw StructuralError("node_features has " + std::to_string(node_features.rows()) +
                          " rows, expected " + std::to_string(num_nodes));
  }
  if (edge_features.rows() != num_edges()) {
    throw StructuralError("edge_features has " + std::to_string(edge_features.rows()) +
                          " rows, expected " + std::to_string(num_edges()));
  }
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const Edge& e = edges[k];
    if (e.src < 0 || e.src >= num_nodes || e.dst < 0 || e.dst >= num_nodes) {
      throw StructuralError("edge " + std::to_string(k) + " endpoint out of range");
    }
  }
  if (!node_features.allFinite()) throw StructuralError("non-finite node feature");
  if (!edge_features.allFinite()) throw StructuralError("non-finite edge feature");
}

bool operator==(const Multigraph& a, const Multigraph& b) {
  return a.num_nodes == b.num_nodes && a.edges == b.edges &&
         a.node_features.rows() == b.node_features.rows() &&
         a.node_features.cols() == b.node_features.cols() &&
         a.edge_features.rows() == b.edge_features.rows() &&
         a.edge_features.cols() == b.edge_features.cols() &&
         a.node_features == b.node_features && a.edge_features == b.edge_features;
}

std::span<const EdgeId> SupportIndex::group(std::int64_t s) const {
  const auto begin = group_offsets_[idx(s)];
  const auto end = group_offsets_[idx(s) + 1];
  return {group_edges_.data() + begin, static_cast<std::size_t>(end - begin)};
}

std::int64_t SupportIndex::multiplicity(std::int64_t s) const {
  return group_offsets_[idx(s) + 1] - group_offsets_[idx(s)];
}

std::span<const std::int64_t> SupportIndex::in_pairs(NodeId j) const {
  const auto begin = in_offsets_[idx(j)];
  const auto end = in_offsets_[idx(j) + 1];
  return {in_pairs_.data() + begin, static_cast<std::size_t>(end - begin)};
}

std::span<const std::int64_t> SupportIndex::out_pairs(NodeId j) const {
  const auto begin = out_offsets_[idx(j)];
  const auto end = out_offsets_[idx(j) + 1];
  return {out_pairs_.data() + begin, static_cast<std::size_t>(end - begin)};
}

SupportIndex build_support_index(std::int64_t num_nodes, std::span<const Edge> edges) {
  SupportIndex s;
  s.num_nodes_ = num_nodes;
  s.edge_to_pair_.resize(edges.size());

  std::unordered_map<Edge, std::int64_t, PairHash> lookup;
  lookup.reserve(edges.size());
  std::vector<std::int64_t> counts;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const Edge& e = edges[k];
    if (e.src < 0 || e.src >= num_nodes || e.dst < 0 || e.dst >= num_nodes) {
      throw StructuralError("edge " + std::to_string(k) + " endpoint out of range");
    }
    auto [it, inserted] = lookup.try_emplace(e, static_cast<std::int64_t>(s.pairs_.size()));
    if (inserted) {
      s.pairs_.push_back(e);
      counts.push_back(0);
    }
    s.edge_to_pair_[k] = it->second;
    ++counts[idx(it->second)];
  }

  s.group_offsets_ = offsets_from_counts(counts);
  s.group_edges_.resize(edges.size());
  std::vector<std::int64_t> cursor(s.group_offsets_.begin(), s.group_offsets_.end() - 1);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    s.group_edges_[idx(cursor[idx(s.edge_to_pair_[k])]++)] = static_cast<EdgeId>(k);
  }

  std::vector<std::int64_t> in_counts(idx(num_nodes), 0);
  std::vector<std::int64_t> out_counts(idx(num_nodes), 0);
  for (const Edge& p : s.pairs_) {
    ++in_counts[idx(p.dst)];
    ++out_counts[idx(p.src)];
  }
  s.in_offsets_ = offsets_from_counts(in_counts);
  s.out_offsets_ = offsets_from_counts(out_counts);
  s.in_pairs_.resize(s.pairs_.size());
  s.out_pairs_.resize(s.pairs_.size());
  std::vector<std::int64_t> in_cursor(s.in_offsets_.begin(), s.in_offsets_.end() - 1);
  std::vector<std::int64_t> out_cursor(s.out_offsets_.begin(), s.out_offsets_.end() - 1);
  for (std::size_t p = 0; p < s.pairs_.size(); ++p) {
    s.in_pairs_[idx(in_cursor[idx(s.pairs_[p].dst)]++)] = static_cast<std::int64_t>(p);
    s.out_pairs_[idx(out_cursor[idx(s.pairs_[p].src)]++)] = static_cast<std::int64_t>(p);
  }
  return s;
}

SupportIndex build_support_index(const Multigraph& g) {
  return build_support_index(g.num_nodes, g.edges);
}

ReverseIndex build_reverse_index(const Multigraph& g, const SupportIndex& s) {
  if (s.num_edges() != g.num_edges() || s.num_nodes() != g.num_nodes) {
    throw StructuralError("support index does not belong to this graph");
  }
  ReverseIndex rev;
  rev.edges.reserve(g.edges.size());
  rev.rev_edge_to_orig.resize(g.edges.size());
  rev.orig_to_rev_edge.resize(g.edges.size());
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    rev.edges.push_back({g.edges[k].dst, g.edges[k].src});
    rev.rev_edge_to_orig[k] = static_cast<EdgeId>(k);
    rev.orig_to_rev_edge[k] = static_cast<EdgeId>(k);
  }
  rev.support = build_support_index(g.num_nodes, rev.edges);
  return rev;
}

Matrix reverse_edge_features(const ReverseIndex& rev, const Matrix& edge_features) {
  Matrix out(edge_features.rows(), edge_features.cols());
  for (std::size_t k = 0; k < rev.rev_edge_to_orig.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) =
        edge_features.row(static_cast<Eigen::Index>(rev.rev_edge_to_orig[k]));
  }
  return out;
}

Multigraph apply_permutation(const Multigraph& g, const GraphPermutation& p) {
  if (!is_permutation_of_range(p.node_perm, g.num_nodes)) {
    throw StructuralError("node_perm is not a bijection on the node set");
  }
  if (!is_permutation_of_range(p.edge_perm, g.num_edges())) {
    throw StructuralError("edge_perm is not a bijection on the edge set");
  }
  Multigraph out;
  out.num_nodes = g.num_nodes;
  out.node_features.resize(g.node_features.rows(), g.node_features.cols());
  out.edge_features.resize(g.edge_features.rows(), g.edge_features.cols());
  out.edges.resize(g.edges.size());
  for (std::int64_t i = 0; i < g.num_nodes; ++i) {
    out.node_features.row(p.node_perm[idx(i)]) = g.node_features.row(i);
  }
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const auto target = idx(p.edge_perm[k]);
    out.edges[target] = {p.node_perm[idx(g.edges[k].src)], p.node_perm[idx(g.edges[k].dst)]};
    out.edge_features.row(static_cast<Eigen::Index>(target)) =
        g.edge_features.row(static_cast<Eigen::Index>(k));
  }
  return out;
}

GraphPermutation inverse(const GraphPermutation& p) {
  GraphPermutation inv;
  inv.node_perm.resize(p.node_perm.size());
  inv.edge_perm.resize(p.edge_perm.size());
  for (std::size_t i = 0; i < p.node_perm.size(); ++i) {
    inv.node_perm[idx(p.node_perm[i])] = static_cast<NodeId>(i);
  }
  for (std::size_t k = 0; k < p.edge_perm.size(); ++k) {
    inv.edge_perm[idx(p.edge_perm[k])] = static_cast<EdgeId>(k);
  }
  return inv;
}

GraphPermutation identity_permutation(const Multigraph& g) {
  GraphPermutation p;
  p.node_perm.resize(idx(g.num_nodes));
  p.edge_perm.resize(g.edges.size());
  std::iota(p.node_perm.begin(), p.node_perm.end(), NodeId{0});
  std::iota(p.edge_perm.begin(), p.edge_perm.end(), EdgeId{0});
  return p;
}

GraphPermutation random_permutation(const Multigraph& g, std::uint64_t seed) {
  Rng rng(seed);
  GraphPermutation p = identity_permutation(g);
  rng.shuffle(p.node_perm);
  rng.shuffle(p.edge_perm);
  return p;
}

Multigraph random_connected_multigraph(std::int64_t n, std::int64_t m, std::uint64_t seed,
                                       std::int64_t node_dim, std::int64_t edge_dim) {
  if (n < 1) throw PreconditionError("random_connected_multigraph: n must be >= 1");
  if (m < n - 1) {
    throw PreconditionError("random_connected_multigraph: m=" + std::to_string(m) +
                            " < n-1=" + std::to_string(n - 1) + " cannot be connected");
  }
  if (edge_dim < 1) throw PreconditionError("random_connected_multigraph: edge_dim must be >= 1");
  Rng rng(seed);
  Multigraph g;
  g.num_nodes = n;
  g.edges.reserve(idx(m));
  for (std::int64_t v = 1; v < n; ++v) {
    const auto u = static_cast<NodeId>(rng.index(static_cast<std::uint64_t>(v)));
    if (rng.bernoulli(0.5)) {
      g.edges.push_back({u, v});
    } else {
      g.edges.push_back({v, u});
    }
  }
  while (g.num_edges() < m) {
    if (!g.edges.empty() && rng.bernoulli(0.5)) {
      g.edges.push_back(g.edges[rng.index(g.edges.size())]);
    } else {
      const auto a = static_cast<NodeId>(rng.index(static_cast<std::uint64_t>(n)));
      const auto b = static_cast<NodeId>(rng.index(static_cast<std::uint64_t>(n)));
      g.edges.push_back({a, b});
    }
  }
  // Shuffle so the backbone edges are not always the first n-1 indices.
  rng.shuffle(g.edges);

  g.node_features.resize(n, node_dim);
  for (Eigen::Index i = 0; i < g.node_features.size(); ++i) g.node_features.data()[i] = rng.normal();

  std::vector<std::int64_t> ranks(idx(m));
  std::iota(ranks.begin(), ranks.end(), std::int64_t{0});
  rng.shuffle(ranks);
  g.edge_features.resize(m, edge_dim);
  for (std::int64_t k = 0; k < m; ++k) {
    g.edge_features(k, 0) = m > 1 ? static_cast<double>(ranks[idx(k)]) / static_cast<double>(m - 1)
                                  : 0.0;
    for (std::int64_t c = 1; c < edge_dim; ++c) g.edge_features(k, c) = rng.normal();
  }
  return g;
}

bool is_weakly_connected(const Multigraph& g) {
  if (g.num_nodes <= 1) return true;
  std::vector<NodeId> parent(idx(g.num_nodes));
  std::iota(parent.begin(), parent.end(), NodeId{0});
  auto find = [&](NodeId x) {
    while (parent[idx(x)] != x) {
      parent[idx(x)] = parent[idx(parent[idx(x)])];
      x = parent[idx(x)];
    }
    return x;
  };
  std::int64_t components = g.num_nodes;
  for (const Edge& e : g.edges) {
    const NodeId a = find(e.src);
    const NodeId b = find(e.dst);
    if (a != b) {
      parent[idx(a)] = b;
      --components;
    }
  }
  return components == 1;
}

std::vector<std::int64_t> undirected_distances(const Multigraph& g, NodeId root) {
  std::vector<std::vector<NodeId>> adj(idx(g.num_nodes));
  for (const Edge& e : g.edges) {
    adj[idx(e.src)].push_back(e.dst);
    adj[idx(e.dst)].push_back(e.src);
  }
  std::vector<std::int64_t> dist(idx(g.num_nodes), -1);
  std::queue<NodeId> queue;
  dist[idx(root)] = 0;
  queue.push(root);
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop();
    for (NodeId u : adj[idx(v)]) {
      if (dist[idx(u)] < 0) {
        dist[idx(u)] = dist[idx(v)] + 1;
        queue.push(u);
      }
    }
  }
  return dist;
}

}  // namespace mega
