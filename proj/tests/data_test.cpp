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

#include "mega/data.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <unistd.h>

#include <gtest/gtest.h>

#include "mega/rng.hpp"

namespace mega {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("mega_data_test_" + std::to_string(::getpid()) + "_" +
                                         std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string write(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::ofstream(p) << content;
    return p.string();
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

const char* kAmlHeader =
    "Timestamp,From Bank,Account,To Bank,Account,Amount Received,Receiving Currency,"
    "Amount Paid,Payment Currency,Payment Format,Is Laundering\n";

TEST(LoadTransactions, DenseAccountsAndParallelRows) {
  TempDir dir;
  const auto path = dir.write("t.csv",
                              "src,dst,timestamp,amount\n"
                              "a,b,5,1.5\n"
                              "a,b,5,1.5\n"
                              "b,a,7,2\n");
  const TransactionTable t = load_transactions(path, TransactionSchema::eth());
  EXPECT_EQ(t.num_nodes(), 2);
  EXPECT_EQ(t.num_rows(), 3);
  EXPECT_EQ(t.src, (std::vector<NodeId>{0, 0, 1}));
  EXPECT_EQ(t.dst, (std::vector<NodeId>{1, 1, 0}));
  EXPECT_EQ(t.timestamp, (std::vector<std::int64_t>{5, 5, 7}));
  EXPECT_FALSE(t.edge_labels.has_value());
}

TEST(LoadTransactions, AmlPreset) {
  TempDir dir;
  const auto path = dir.write(
      "aml.csv", std::string(kAmlHeader) +
                     "2022/09/01 00:20,10,8000EBD30,10,8000EBD30,3697.34,US Dollar,3697.34,US Dollar,"
                     "Reinvestment,0\n"
                     "2022/09/01 00:21,3208,8000F4580,1,8000F5340,0.01,Euro,0.01,US Dollar,Cheque,1\n"
                     "2022/09/01 00:21,10,8000EBD30,1,8000F5340,\"1,000.5\",US Dollar,1,US Dollar,"
                     "Cheque,0\n");
  EXPECT_THROW(load_transactions(path, TransactionSchema::aml()), IngestionError);
  const auto ok = dir.write(
      "aml2.csv", std::string(kAmlHeader) +
                      "2022/09/01 00:20,10,8000EBD30,10,8000EBD30,3697.34,US Dollar,3697.34,US Dollar,"
                      "Reinvestment,0\n"
                      "2022/09/01 00:21,3208,8000F4580,1,8000F5340,0.01,Euro,0.01,US Dollar,Cheque,1\n");
  const TransactionTable t = load_transactions(ok, TransactionSchema::aml());
  EXPECT_EQ(t.num_nodes(), 3);
  EXPECT_EQ(t.accounts[0], "10|8000EBD30");
  EXPECT_EQ(t.src[0], t.dst[0]);
  EXPECT_EQ(t.timestamp[1] - t.timestamp[0], 60);
  EXPECT_EQ(*t.edge_labels, (std::vector<int>{0, 1}));
  EXPECT_EQ(t.categorical_levels[0], (std::vector<std::string>{"US Dollar", "Euro"}));
  EXPECT_EQ(t.categorical_codes[1], (std::vector<std::int64_t>{0, 1}));
  const Multigraph g = to_multigraph(t, feature_stats(t));
  EXPECT_EQ(g.edge_features.cols(), 2 + 2 + 2);
  EXPECT_EQ(g.edge_features(1, 3), 1.0);
  EXPECT_EQ(g.edge_features(1, 5), 1.0);
}

TEST(LoadTransactions, MissingColumnIsNamed) {
  TempDir dir;
  const auto path = dir.write("t.csv", "src,dst,timestamp,value\na,b,1,2\n");
  try {
    load_transactions(path, TransactionSchema::eth());
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("'amount'"), std::string::npos);
  }
}

TEST(LoadTransactions, BadNumberReportsLine) {
  TempDir dir;
  const auto path = dir.write("t.csv", "src,dst,timestamp,amount\na,b,1,2\na,b,2,x7\n");
  try {
    load_transactions(path, TransactionSchema::eth());
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(LoadTransactions, EmptyInputs) {
  TempDir dir;
  EXPECT_THROW(load_transactions(dir.write("e.csv", ""), TransactionSchema::eth()), IngestionError);
  EXPECT_THROW(load_transactions(dir.write("h.csv", "src,dst,timestamp,amount\n"),
                                 TransactionSchema::eth()),
               IngestionError);
  EXPECT_THROW(load_transactions(dir.file("absent.csv"), TransactionSchema::eth()), IngestionError);
  EXPECT_THROW(load_transactions(dir.write("r.csv", "src,dst,timestamp,amount\na,b,1\n"),
                                 TransactionSchema::eth()),
               IngestionError);
}

TEST(LoadTransactions, QuotedFields) {
  TempDir dir;
  const auto path = dir.write("q.csv", "src,dst,timestamp,amount\n\"x,1\",y,3,4\n");
  const TransactionTable t = load_transactions(path, TransactionSchema::eth());
  EXPECT_EQ(t.accounts[0], "x,1");
}

TEST(ParseTimestamp, Formats) {
  EXPECT_EQ(parse_timestamp("12345"), 12345);
  EXPECT_EQ(parse_timestamp("1970/01/01 00:00"), 0);
  EXPECT_EQ(parse_timestamp("1970-01-02 01:01:05"), 86400 + 3665);
  EXPECT_EQ(parse_timestamp("2000/03/01 00:00") - parse_timestamp("2000/02/28 00:00"), 2 * 86400);
  EXPECT_THROW(parse_timestamp("2021/02/30 00:00"), IngestionError);
  EXPECT_THROW(parse_timestamp("yesterday"), IngestionError);
  EXPECT_THROW(parse_timestamp("2021/02/03 10:00x"), IngestionError);
}

TEST(NodeLabels, SidecarMapsAccounts) {
  TempDir dir;
  const auto path = dir.write("t.csv", "src,dst,timestamp,amount\na,b,1,2\nc,a,2,3\n");
  const auto labels = dir.write("n.csv", "node,label\nc,1\nzz,1\na,0\n");
  TransactionTable t = load_transactions(path, TransactionSchema::eth());
  load_node_labels(labels, t);
  EXPECT_EQ(*t.node_labels, (std::vector<int>{0, 0, 1}));
  EXPECT_FALSE(t.edge_labels.has_value());
}

TEST(ToMultigraph, Shapes) {
  TransactionTable t;
  t.accounts = {"a", "b"};
  t.src = {0};
  t.dst = {1};
  t.timestamp = {10};
  t.amount = {3.5};
  const Multigraph g = to_multigraph(t, feature_stats(t));
  EXPECT_EQ(g.num_edges(), 1);
  EXPECT_EQ(g.edge_features.cols(), 2);
  EXPECT_TRUE(g.node_features.isOnes(0.0));
  EXPECT_TRUE(g.edge_features.isZero(0.0));
}

TEST(ToMultigraph, ZScoreFromGivenRows) {
  TransactionTable t;
  t.accounts = {"a", "b"};
  t.src = {0, 0, 1, 1};
  t.dst = {1, 1, 0, 0};
  t.timestamp = {1, 2, 3, 4};
  t.amount = {5, 5, 5, 5};
  const std::vector<EdgeId> train{0, 1};
  const FeatureStats s = feature_stats(t, train);
  EXPECT_DOUBLE_EQ(s.timestamp_mean, 1.5);
  EXPECT_DOUBLE_EQ(s.timestamp_std, 0.5);
  const Multigraph g = to_multigraph(t, s);
  EXPECT_DOUBLE_EQ(g.edge_features(3, 0), 5.0);
  EXPECT_TRUE(g.edge_features.col(1).isZero(0.0));
}

TEST(TemporalSplit, PaperFractions) {
  std::vector<std::int64_t> ts(100);
  Rng rng(1);
  for (auto& t : ts) t = static_cast<std::int64_t>(rng.index(1000));
  const EdgeSplit s = temporal_split(ts, {});
  EXPECT_EQ(s.train.size(), 65u);
  EXPECT_EQ(s.val.size(), 15u);
  EXPECT_EQ(s.test.size(), 20u);
}

TEST(TemporalSplit, TiesBrokenByRow) {
  const std::vector<std::int64_t> ts(20, 7);
  const EdgeSplit s = temporal_split(ts, {0.5, 0.25, 0.25});
  EXPECT_EQ(s.train, (std::vector<EdgeId>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
  EXPECT_EQ(s.val, (std::vector<EdgeId>{10, 11, 12, 13, 14}));
}

TEST(TemporalSplit, Preconditions) {
  const std::vector<std::int64_t> ts(10, 0);
  EXPECT_THROW(temporal_split(ts, {1.0, 0.0, 0.0}), PreconditionError);
  EXPECT_THROW(temporal_split(ts, {0.5, 0.3, 0.3}), PreconditionError);
  const std::vector<std::int64_t> few(2, 0);
  EXPECT_THROW(temporal_split(few, {}), PreconditionError);
}

TEST(TemporalSplit, NoLeakage) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto m = 3 + static_cast<std::int64_t>(rng.index(300));
    std::vector<std::int64_t> ts(static_cast<std::size_t>(m));
    for (auto& x : ts) x = static_cast<std::int64_t>(rng.index(20));
    const EdgeSplit s = temporal_split(ts, {0.6, 0.2, 0.2});
    std::set<EdgeId> all;
    auto key = [&](EdgeId e) { return std::pair(ts[e], e); };
    std::pair<std::int64_t, EdgeId> prev{-1, -1};
    for (const auto* block : {&s.train, &s.val, &s.test}) {
      ASSERT_FALSE(block->empty());
      for (EdgeId e : *block) {
        ASSERT_LT(prev, key(e));
        prev = key(e);
        all.insert(e);
      }
    }
    ASSERT_EQ(static_cast<std::int64_t>(all.size()), m);
  }
}

TEST(RandomNodeSplit, PartitionsNodes) {
  const EdgeSplit s = random_node_split(500, {}, 4);
  EXPECT_EQ(s.train.size(), 325u);
  EXPECT_EQ(s.val.size(), 75u);
  std::set<NodeId> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 500u);
  EXPECT_EQ(random_node_split(500, {}, 4).test, s.test);
}

Multigraph toy_graph() {
  Multigraph g;
  g.num_nodes = 6;
  g.node_features = Matrix::Ones(6, 1);
  g.edges = {{0, 1}, {1, 2}, {1, 2}, {1, 2}, {1, 2}, {1, 2}, {2, 3}, {4, 0}, {5, 4}, {3, 1}};
  g.edge_features.resize(10, 1);
  for (int k = 0; k < 10; ++k) g.edge_features(k, 0) = k;
  return g;
}

TEST(Sample, ZeroHopsKeepsSeedsOnly) {
  const Multigraph g = toy_graph();
  const SupportIndex s = build_support_index(g);
  const BatchSample b = sample_neighborhood(g, s, {{}, {2, 7}}, 0, 10, 1);
  EXPECT_EQ(b.edge_map, (std::vector<EdgeId>{2, 7}));
  EXPECT_EQ(std::set<NodeId>(b.node_map.begin(), b.node_map.end()), (std::set<NodeId>{0, 1, 2, 4}));
  ASSERT_EQ(b.seed_edges.size(), 2u);
  EXPECT_EQ(b.edge_map[b.seed_edges[1]], 7);
  for (std::size_t k = 0; k < b.edge_map.size(); ++k) {
    const Edge& local = b.graph.edges[k];
    EXPECT_EQ(b.node_map[local.src], g.edges[b.edge_map[k]].src);
    EXPECT_EQ(b.node_map[local.dst], g.edges[b.edge_map[k]].dst);
    EXPECT_EQ(b.graph.edge_features(k, 0), g.edge_features(b.edge_map[k], 0));
  }
}

TEST(Sample, SelectedPairKeepsAllParallelEdges) {
  const Multigraph g = toy_graph();
  const SupportIndex s = build_support_index(g);
  const BatchSample b = sample_neighborhood(g, s, {{2}, {}}, 1, 1, 5);
  const std::set<EdgeId> got(b.edge_map.begin(), b.edge_map.end());
  if (got.count(1)) {
    for (EdgeId e = 1; e <= 5; ++e) EXPECT_TRUE(got.count(e));
  }
  EXPECT_EQ(b.node_map.size(), 2u);
  // Seed edges of a multi-edge pair pull in the whole group once hops > 0.
  const BatchSample c = sample_neighborhood(g, s, {{}, {3}}, 1, 1, 5);
  const std::set<EdgeId> all(c.edge_map.begin(), c.edge_map.end());
  for (EdgeId e = 1; e <= 5; ++e) EXPECT_TRUE(all.count(e));
}

// Oracle for an unlimited budget: nodes within distance `hops`, edges
// touching a node within distance `hops - 1`.
std::pair<std::set<NodeId>, std::set<EdgeId>> full_neighborhood(const Multigraph& g,
                                                                const std::vector<NodeId>& seeds,
                                                                std::int64_t hops) {
  std::vector<std::int64_t> dist(g.num_nodes, -1);
  for (NodeId v : seeds) dist[v] = 0;
  for (std::int64_t h = 1; h <= hops; ++h) {
    for (const Edge& e : g.edges) {
      for (auto [a, b] : {std::pair(e.src, e.dst), std::pair(e.dst, e.src)}) {
        if (dist[a] == h - 1 && dist[b] < 0) {
          dist[b] = h;
        }
      }
    }
  }
  std::set<NodeId> nodes;
  for (NodeId v = 0; v < g.num_nodes; ++v) {
    if (dist[v] >= 0) nodes.insert(v);
  }
  std::set<EdgeId> edges;
  for (EdgeId k = 0; k < g.num_edges(); ++k) {
    const Edge& e = g.edges[k];
    const bool inner = (dist[e.src] >= 0 && dist[e.src] < hops) || (dist[e.dst] >= 0 && dist[e.dst] < hops);
    if (inner) edges.insert(k);
  }
  return {nodes, edges};
}

TEST(Sample, LargeBudgetIsFullNeighborhood) {
  for (int t = 0; t < 30; ++t) {
    const Multigraph g = random_connected_multigraph(40, 90, 70 + t);
    const SupportIndex s = build_support_index(g);
    const std::vector<NodeId> seeds{static_cast<NodeId>(t % 40), static_cast<NodeId>((7 * t + 3) % 40)};
    const BatchSample b = sample_neighborhood(g, s, {seeds, {}}, 2, 1000, t);
    const auto [nodes, edges] = full_neighborhood(g, seeds, 2);
    EXPECT_EQ(std::set<NodeId>(b.node_map.begin(), b.node_map.end()), nodes);
    EXPECT_EQ(std::set<EdgeId>(b.edge_map.begin(), b.edge_map.end()), edges);
  }
}

TEST(Sample, NeverSplitsGroupsAndIsDeterministic) {
  for (int t = 0; t < 30; ++t) {
    const Multigraph g = random_connected_multigraph(60, 300, 200 + t);
    const SupportIndex s = build_support_index(g);
    const SeedSet seeds{{}, {0, 5, 9}};
    const BatchSample b = sample_neighborhood(g, s, seeds, 2, 2, t);
    const std::set<EdgeId> got(b.edge_map.begin(), b.edge_map.end());
    for (EdgeId e : b.edge_map) {
      for (EdgeId other : s.group(s.pair_of(e))) ASSERT_TRUE(got.count(other));
    }
    for (std::size_t i = 0; i < b.node_map.size(); ++i) {
      ASSERT_LE(b.node_hop[i], 2);
    }
    ASSERT_TRUE(std::is_sorted(b.edge_map.begin(), b.edge_map.end()));
    const BatchSample again = sample_neighborhood(g, s, seeds, 2, 2, t);
    ASSERT_EQ(again.edge_map, b.edge_map);
    ASSERT_EQ(again.node_map, b.node_map);
  }
}

TEST(Sample, BudgetCapsNewNeighbors) {
  Multigraph g;
  g.num_nodes = 11;
  g.node_features = Matrix::Ones(11, 1);
  for (NodeId v = 1; v <= 10; ++v) g.edges.push_back({v, 0});
  g.edge_features = Matrix::Zero(10, 1);
  const SupportIndex s = build_support_index(g);
  const BatchSample b = sample_neighborhood(g, s, {{0}, {}}, 1, 3, 9);
  EXPECT_EQ(b.node_map.size(), 4u);
  EXPECT_EQ(b.edge_map.size(), 3u);
}

// Independent labeler: per receiver, per sender totals and maxima.
std::vector<int> brute_force_labels(const PlantedDataset& d) {
  const Multigraph& g = d.graph;
  std::vector<int> out(g.num_nodes, 0);
  for (NodeId j = 0; j < g.num_nodes; ++j) {
    if (d.config.task == PlantedTask::kOutNeighborCount) {
      std::set<NodeId> outs;
      for (const Edge& e : g.edges) {
        if (e.src == j) outs.insert(e.dst);
      }
      out[j] = static_cast<std::int64_t>(outs.size()) > d.threshold;
      continue;
    }
    std::map<NodeId, double> total, biggest;
    for (EdgeId k = 0; k < g.num_edges(); ++k) {
      if (g.edges[k].dst != j) continue;
      const double a = g.edge_features(k, 1);
      total[g.edges[k].src] += a;
      biggest[g.edges[k].src] = std::max(biggest[g.edges[k].src], a);
    }
    double t_max = 0, s_max = 0;
    for (auto [s, v] : total) t_max = std::max(t_max, v);
    for (auto [s, v] : biggest) s_max = std::max(s_max, v);
    bool one_sender_has_both = false;
    for (auto [s, v] : total) one_sender_has_both |= v == t_max && biggest[s] == s_max;
    out[j] = total.empty() ? 0 : !one_sender_has_both;
  }
  return out;
}

Multigraph receiver_graph(std::vector<double> a, std::vector<double> b) {
  Multigraph g;
  g.num_nodes = 3;
  g.node_features = Matrix::Ones(3, 1);
  g.edge_features.resize(static_cast<Eigen::Index>(a.size() + b.size()), 2);
  Eigen::Index k = 0;
  for (double x : a) {
    g.edges.push_back({0, 2});
    g.edge_features.row(k++) << 0, x;
  }
  for (double x : b) {
    g.edges.push_back({1, 2});
    g.edge_features.row(k++) << 0, x;
  }
  return g;
}

TEST(Planted, SectionExamples) {
  EXPECT_EQ(planted_labels(receiver_graph({5, 1}, {3, 4}), PlantedTask::kMaxOfSums, 0)[2], 1);
  EXPECT_EQ(planted_labels(receiver_graph({5, 3}, {1, 4}), PlantedTask::kMaxOfSums, 0)[2], 0);
}

TEST(Planted, LabelerAgreesEverywhere) {
  for (PlantedTask task : {PlantedTask::kMaxOfSums, PlantedTask::kOutNeighborCount}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      PlantedConfig cfg;
      cfg.task = task;
      cfg.seed = seed;
      const PlantedDataset d = generate_planted_task(cfg);
      ASSERT_EQ(d.labels, brute_force_labels(d));
      ASSERT_EQ(d.labels, planted_labels(d.graph, task, d.threshold));
      const double rate = std::accumulate(d.labels.begin(), d.labels.end(), 0.0) / d.labels.size();
      EXPECT_GT(rate, 0.18);
      EXPECT_LT(rate, 0.32);
    }
  }
}

TEST(Planted, Deterministic) {
  PlantedConfig cfg;
  cfg.seed = 12;
  const PlantedDataset a = generate_planted_task(cfg);
  const PlantedDataset b = generate_planted_task(cfg);
  EXPECT_EQ(a.graph, b.graph);
  EXPECT_EQ(a.labels, b.labels);
  cfg.seed = 13;
  EXPECT_FALSE(generate_planted_task(cfg).graph == a.graph);
}

TEST(Planted, DegenerateConfigsRejected) {
  PlantedConfig cfg;
  cfg.senders_per_node = 1;
  EXPECT_THROW(generate_planted_task(cfg), PreconditionError);
  cfg.senders_per_node = 3;
  cfg.payments_per_sender = 1;
  EXPECT_THROW(generate_planted_task(cfg), PreconditionError);
  EXPECT_THROW(parse_planted_task("max-of-means"), PreconditionError);
}

TEST(Planted, CsvRoundTrip) {
  TempDir dir;
  PlantedConfig cfg;
  cfg.num_nodes = 60;
  cfg.task = PlantedTask::kOutNeighborCount;
  const PlantedDataset d = generate_planted_task(cfg);
  write_transactions(dir.file("e.csv"), planted_to_table(d), dir.file("n.csv"));
  TransactionTable t = load_transactions(dir.file("e.csv"), TransactionSchema::eth());
  load_node_labels(dir.file("n.csv"), t);
  ASSERT_EQ(t.num_rows(), d.graph.num_edges());
  for (std::int64_t r = 0; r < t.num_rows(); ++r) {
    const NodeId src = std::stoll(t.accounts[t.src[r]]);
    const NodeId dst = std::stoll(t.accounts[t.dst[r]]);
    ASSERT_EQ(src, d.graph.edges[r].src);
    ASSERT_EQ(dst, d.graph.edges[r].dst);
    ASSERT_EQ(t.amount[r], d.graph.edge_features(r, 1));
  }
  for (NodeId v = 0; v < t.num_nodes(); ++v) {
    ASSERT_EQ((*t.node_labels)[v], d.labels[std::stoll(t.accounts[v])]);
  }
}

}  // namespace
}  // namespace mega
