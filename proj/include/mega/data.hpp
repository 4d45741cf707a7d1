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

#ifndef MEGA_DATA_HPP_
#define MEGA_DATA_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mega/common.hpp"
#include "mega/graph.hpp"

namespace mega {

/// Raised for unreadable or malformed input files.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Column roles of a transaction CSV. Account keys are formed by joining
/// the listed columns, so bank + account pairs identify one node.
struct TransactionSchema {
  std::vector<std::string> src_columns;
  std::vector<std::string> dst_columns;
  std::string timestamp;
  std::string amount;
  std::vector<std::string> categoricals;
  std::optional<std::string> label;

  static TransactionSchema aml();
  static TransactionSchema eth();
  static TransactionSchema preset(const std::string& name);
};

struct TransactionTable {
  std::vector<std::string> accounts;  // dense node id -> account key
  std::vector<NodeId> src;
  std::vector<NodeId> dst;
  std::vector<std::int64_t> timestamp;
  std::vector<double> amount;
  std::vector<std::string> categorical_names;
  std::vector<std::vector<std::string>> categorical_levels;  // code -> value
  std::vector<std::vector<std::int64_t>> categorical_codes;  // [column][row]
  std::optional<std::vector<int>> edge_labels;
  std::optional<std::vector<int>> node_labels;

  std::int64_t num_nodes() const { return static_cast<std::int64_t>(accounts.size()); }
  std::int64_t num_rows() const { return static_cast<std::int64_t>(src.size()); }
};

/// Parses integers or "YYYY/MM/DD HH:MM[:SS]" into seconds since 1970.
std::int64_t parse_timestamp(const std::string& text);

TransactionTable load_transactions(const std::string& path, const TransactionSchema& schema);

/// Attaches a "node,label" sidecar. Accounts absent from the table are
/// ignored; table accounts absent from the sidecar get label 0.
void load_node_labels(const std::string& path, TransactionTable& table);

/// Writes the table with columns src,dst,timestamp,amount[,categoricals][,label]
/// and, when node labels exist, a "node,label" sidecar.
void write_transactions(const std::string& path, const TransactionTable& table,
                        const std::optional<std::string>& node_label_path = std::nullopt);

struct FeatureStats {
  double timestamp_mean = 0;
  double timestamp_std = 1;
  double amount_mean = 0;
  double amount_std = 1;
};

/// Mean and population std over `rows` (all rows when empty).
FeatureStats feature_stats(const TransactionTable& t, std::span<const EdgeId> rows = {});

/// Edge features [z(timestamp), z(amount), one-hot categoricals]; a column
/// with zero spread maps to zeros. Node features are a constant 1 column.
Multigraph to_multigraph(const TransactionTable& t, const FeatureStats& stats);

struct SplitSpec {
  double train = 0.65;
  double val = 0.15;
  double test = 0.20;
  void validate() const;
};

struct EdgeSplit {
  std::vector<EdgeId> train;
  std::vector<EdgeId> val;
  std::vector<EdgeId> test;
};

/// Orders edges by (timestamp, row) and cuts contiguous blocks.
EdgeSplit temporal_split(std::span<const std::int64_t> timestamps, const SplitSpec& spec);

/// Random node partition with the same block sizes, used for node tasks.
EdgeSplit random_node_split(std::int64_t num_nodes, const SplitSpec& spec, std::uint64_t seed);

/// Keeps the listed edges (in parent order) and every node.
Multigraph edge_subgraph(const Multigraph& g, std::span<const EdgeId> keep);

struct BatchSample {
  Multigraph graph;
  std::vector<NodeId> node_map;  // local -> parent
  std::vector<EdgeId> edge_map;  // local -> parent, ascending
  std::vector<std::int64_t> node_hop;
  std::vector<NodeId> seed_nodes;  // local ids
  std::vector<EdgeId> seed_edges;  // local ids
};

struct SeedSet {
  std::vector<NodeId> nodes;
  std::vector<EdgeId> edges;
};

/// Expands `hops` rings over both edge directions. A node with more than
/// `per_hop` distinct neighbours keeps a uniform subset of them. Every
/// selected pair contributes all of its parallel edges in both directions.
BatchSample sample_neighborhood(const Multigraph& g, const SupportIndex& support,
                                const SeedSet& seeds,
                                std::int64_t hops, std::int64_t per_hop, std::uint64_t rng_seed);

enum class PlantedTask { kMaxOfSums, kOutNeighborCount };

std::string to_string(PlantedTask t);
PlantedTask parse_planted_task(const std::string& name);

struct PlantedConfig {
  PlantedTask task = PlantedTask::kMaxOfSums;
  std::int64_t num_nodes = 500;
  std::int64_t senders_per_node = 2;
  std::int64_t payments_per_sender = 3;
  double positive_rate = 0.25;
  // max_of_sums: minimum gap between the two largest sender totals and
  // between the two largest single payments.
  double margin = 10.0;
  std::uint64_t seed = 0;
  void validate() const;
};

/// Raw edge features are [timestamp, amount]; labels are per node.
struct PlantedDataset {
  Multigraph graph;
  std::vector<int> labels;
  PlantedConfig config;
  std::int64_t threshold = 0;  // out-neighbour threshold, out_neighbor_count only
};

PlantedDataset generate_planted_task(const PlantedConfig& config);

/// Label rule applied to an existing graph (amount in column 1).
std::vector<int> planted_labels(const Multigraph& g, PlantedTask task, std::int64_t threshold);

TransactionTable planted_to_table(const PlantedDataset& d);

}  // namespace mega

#endif  // MEGA_DATA_HPP_
