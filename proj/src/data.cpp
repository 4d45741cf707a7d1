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

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>

#include <boost/tokenizer.hpp>

#include "mega/rng.hpp"

namespace mega {
namespace {

using Index = Eigen::Index;

std::size_t sz(std::int64_t i) { return static_cast<std::size_t>(i); }

using CsvTokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;

std::vector<std::string> split_csv_line(const std::string& line, std::int64_t line_no) {
  try {
    CsvTokenizer tok(line, boost::escaped_list_separator<char>('\\', ',', '"'));
    return {tok.begin(), tok.end()};
  } catch (const boost::escaped_list_error& e) {
    throw IngestionError("line " + std::to_string(line_no) + ": " + e.what());
  }
}

std::string trim(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

struct CsvFile {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::int64_t> line_numbers;

  std::size_t column(const std::string& name, const std::string& path) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw IngestionError(path + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

// Repeated header names get ".1", ".2", ... suffixes.
CsvFile read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path + "'");
  CsvFile f;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line, line_no);
    for (auto& field : fields) field = trim(field);
    if (f.header.empty()) {
      std::map<std::string, int> seen;
      for (auto& name : fields) {
        const int count = seen[name]++;
        if (count > 0) name += "." + std::to_string(count);
      }
      f.header = std::move(fields);
      continue;
    }
    if (fields.size() != f.header.size()) {
      throw IngestionError(path + ": line " + std::to_string(line_no) + " has " +
                           std::to_string(fields.size()) + " fields, header has " +
                           std::to_string(f.header.size()));
    }
    f.rows.push_back(std::move(fields));
    f.line_numbers.push_back(line_no);
  }
  if (f.header.empty()) throw IngestionError(path + ": empty file");
  return f;
}

double parse_double(const std::string& text, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v)) {
    throw IngestionError(where + ": cannot parse number '" + text + "'");
  }
  return v;
}

int parse_label(const std::string& text, const std::string& where) {
  if (text == "0") return 0;
  if (text == "1") return 1;
  throw IngestionError(where + ": label must be 0 or 1, got '" + text + "'");
}

std::string where(const std::string& path, std::int64_t line) {
  return path + ": line " + std::to_string(line);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::vector<std::int64_t> block_sizes(std::int64_t total, const SplitSpec& spec) {
  spec.validate();
  const auto n_train = static_cast<std::int64_t>(std::llround(spec.train * total));
  const auto n_val = static_cast<std::int64_t>(std::llround(spec.val * total));
  const std::int64_t n_test = total - n_train - n_val;
  if (n_train < 1 || n_val < 1 || n_test < 1) {
    throw PreconditionError("split: " + std::to_string(total) +
                            " items are too few for three non-empty blocks");
  }
  return {n_train, n_val, n_test};
}

EdgeSplit cut(const std::vector<std::int64_t>& order, const std::vector<std::int64_t>& sizes) {
  EdgeSplit s;
  auto it = order.begin();
  s.train.assign(it, it + sizes[0]);
  it += sizes[0];
  s.val.assign(it, it + sizes[1]);
  it += sizes[1];
  s.test.assign(it, order.end());
  return s;
}

// Positive iff no sender holds both the largest total and the largest payment.
int max_of_sums_rule(const std::vector<std::vector<double>>& groups) {
  double best_total = -INFINITY;
  double best_single = -INFINITY;
  std::vector<double> totals(groups.size()), singles(groups.size());
  for (std::size_t s = 0; s < groups.size(); ++s) {
    totals[s] = std::accumulate(groups[s].begin(), groups[s].end(), 0.0);
    singles[s] = *std::max_element(groups[s].begin(), groups[s].end());
    best_total = std::max(best_total, totals[s]);
    best_single = std::max(best_single, singles[s]);
  }
  for (std::size_t s = 0; s < groups.size(); ++s) {
    if (totals[s] == best_total && singles[s] == best_single) return 0;
  }
  return 1;
}

// Gap between the two largest sender totals and between the two largest
// single payments.
double decision_margin(const std::vector<std::vector<double>>& groups) {
  std::vector<double> totals, singles;
  for (const auto& g : groups) {
    totals.push_back(std::accumulate(g.begin(), g.end(), 0.0));
    singles.push_back(*std::max_element(g.begin(), g.end()));
  }
  auto gap = [](std::vector<double> v) {
    std::sort(v.rbegin(), v.rend());
    return v[0] - v[1];
  };
  return std::min(gap(totals), gap(singles));
}

// Distinct values from [0, n) without `skip`, in draw order.
std::vector<NodeId> draw_others(Rng& rng, std::int64_t n, NodeId skip, std::int64_t k) {
  std::vector<NodeId> out;
  for (std::int64_t v : rng.sample_without_replacement(n - 1, k)) out.push_back(v >= skip ? v + 1 : v);
  return out;
}

}  // namespace

TransactionSchema TransactionSchema::aml() {
  TransactionSchema s;
  s.src_columns = {"From Bank", "Account"};
  s.dst_columns = {"To Bank", "Account.1"};
  s.timestamp = "Timestamp";
  s.amount = "Amount Received";
  s.categoricals = {"Receiving Currency", "Payment Format"};
  s.label = "Is Laundering";
  return s;
}

TransactionSchema TransactionSchema::eth() {
  TransactionSchema s;
  s.src_columns = {"src"};
  s.dst_columns = {"dst"};
  s.timestamp = "timestamp";
  s.amount = "amount";
  return s;
}

TransactionSchema TransactionSchema::preset(const std::string& name) {
  if (name == "aml") return aml();
  if (name == "eth") return eth();
  throw PreconditionError("unknown schema preset '" + name + "' (expected aml or eth)");
}

std::int64_t parse_timestamp(const std::string& text) {
  const std::string t = trim(text);
  bool integral = !t.empty();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const bool sign = i == 0 && (t[i] == '-' || t[i] == '+') && t.size() > 1;
    if (!sign && !std::isdigit(static_cast<unsigned char>(t[i]))) integral = false;
  }
  if (integral) return std::stoll(t);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0, used = 0;
  char s1 = 0, s2 = 0;
  const int got = std::sscanf(t.c_str(), "%d%c%d%c%d %d:%d%n", &y, &s1, &mo, &s2, &d, &h, &mi, &used);
  if (got < 7 || s1 != s2 || (s1 != '/' && s1 != '-')) {
    throw IngestionError("cannot parse timestamp '" + text + "'");
  }
  if (static_cast<std::size_t>(used) < t.size()) {
    int extra = 0;
    if (std::sscanf(t.c_str() + used, ":%d%n", &s, &extra) != 1 ||
        static_cast<std::size_t>(used + extra) != t.size()) {
      throw IngestionError("cannot parse timestamp '" + text + "'");
    }
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(mo)},
                                        std::chrono::day{unsigned(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60) {
    throw IngestionError("invalid date in timestamp '" + text + "'");
  }
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + s;
}

TransactionTable load_transactions(const std::string& path, const TransactionSchema& schema) {
  const CsvFile f = read_csv(path);
  auto columns = [&](const std::vector<std::string>& names) {
    std::vector<std::size_t> idx;
    for (const auto& n : names) idx.push_back(f.column(n, path));
    return idx;
  };
  const auto src_cols = columns(schema.src_columns);
  const auto dst_cols = columns(schema.dst_columns);
  const std::size_t ts_col = f.column(schema.timestamp, path);
  const std::size_t amount_col = f.column(schema.amount, path);
  const auto cat_cols = columns(schema.categoricals);
  std::optional<std::size_t> label_col;
  if (schema.label) label_col = f.column(*schema.label, path);
  if (f.rows.empty()) throw IngestionError(path + ": no data rows");

  TransactionTable t;
  std::unordered_map<std::string, NodeId> ids;
  auto account = [&](const std::vector<std::string>& row, const std::vector<std::size_t>& cols) {
    std::string key;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) key += '|';
      key += row[cols[i]];
    }
    auto [it, inserted] = ids.try_emplace(key, static_cast<NodeId>(t.accounts.size()));
    if (inserted) t.accounts.push_back(key);
    return it->second;
  };
  t.categorical_names = schema.categoricals;
  t.categorical_levels.resize(cat_cols.size());
  t.categorical_codes.resize(cat_cols.size());
  std::vector<std::unordered_map<std::string, std::int64_t>> level_ids(cat_cols.size());
  if (label_col) t.edge_labels.emplace();

  for (std::size_t r = 0; r < f.rows.size(); ++r) {
    const auto& row = f.rows[r];
    const std::string at = where(path, f.line_numbers[r]);
    t.src.push_back(account(row, src_cols));
    t.dst.push_back(account(row, dst_cols));
    try {
      t.timestamp.push_back(parse_timestamp(row[ts_col]));
    } catch (const IngestionError& e) {
      throw IngestionError(at + ": " + e.what());
    }
    t.amount.push_back(parse_double(row[amount_col], at));
    for (std::size_t c = 0; c < cat_cols.size(); ++c) {
      const std::string& v = row[cat_cols[c]];
      auto [it, inserted] =
          level_ids[c].try_emplace(v, static_cast<std::int64_t>(t.categorical_levels[c].size()));
      if (inserted) t.categorical_levels[c].push_back(v);
      t.categorical_codes[c].push_back(it->second);
    }
    if (label_col) t.edge_labels->push_back(parse_label(row[*label_col], at));
  }
  return t;
}

void load_node_labels(const std::string& path, TransactionTable& table) {
  const CsvFile f = read_csv(path);
  const std::size_t node_col = f.column("node", path);
  const std::size_t label_col = f.column("label", path);
  std::unordered_map<std::string, NodeId> ids;
  for (std::size_t v = 0; v < table.accounts.size(); ++v) {
    ids.emplace(table.accounts[v], static_cast<NodeId>(v));
  }
  std::vector<int> labels(table.accounts.size(), 0);
  for (std::size_t r = 0; r < f.rows.size(); ++r) {
    const int y = parse_label(f.rows[r][label_col], where(path, f.line_numbers[r]));
    auto it = ids.find(f.rows[r][node_col]);
    if (it != ids.end()) labels[sz(it->second)] = y;
  }
  table.node_labels = std::move(labels);
}

void write_transactions(const std::string& path, const TransactionTable& table,
                        const std::optional<std::string>& node_label_path) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write '" + path + "'");
  out << "src,dst,timestamp,amount";
  for (const auto& name : table.categorical_names) out << ',' << csv_quote(name);
  if (table.edge_labels) out << ",label";
  out << '\n';
  for (std::int64_t r = 0; r < table.num_rows(); ++r) {
    out << csv_quote(table.accounts[sz(table.src[sz(r)])]) << ','
        << csv_quote(table.accounts[sz(table.dst[sz(r)])]) << ',' << table.timestamp[sz(r)] << ','
        << format_double(table.amount[sz(r)]);
    for (std::size_t c = 0; c < table.categorical_names.size(); ++c) {
      out << ',' << csv_quote(table.categorical_levels[c][sz(table.categorical_codes[c][sz(r)])]);
    }
    if (table.edge_labels) out << ',' << (*table.edge_labels)[sz(r)];
    out << '\n';
  }
  if (!out) throw IngestionError("write failed for '" + path + "'");
  if (node_label_path) {
    if (!table.node_labels) throw PreconditionError("write_transactions: table has no node labels");
    std::ofstream nl(*node_label_path);
    if (!nl) throw IngestionError("cannot write '" + *node_label_path + "'");
    nl << "node,label\n";
    for (std::size_t v = 0; v < table.accounts.size(); ++v) {
      nl << csv_quote(table.accounts[v]) << ',' << (*table.node_labels)[v] << '\n';
    }
  }
}

FeatureStats feature_stats(const TransactionTable& t, std::span<const EdgeId> rows) {
  std::vector<EdgeId> all;
  if (rows.empty()) {
    all.resize(sz(t.num_rows()));
    std::iota(all.begin(), all.end(), EdgeId{0});
    rows = all;
  }
  auto moments = [&](auto value, double& mean, double& stddev) {
    mean = 0;
    for (EdgeId r : rows) mean += value(r);
    mean /= static_cast<double>(rows.size());
    double var = 0;
    for (EdgeId r : rows) var += (value(r) - mean) * (value(r) - mean);
    stddev = std::sqrt(var / static_cast<double>(rows.size()));
  };
  FeatureStats s;
  moments([&](EdgeId r) { return static_cast<double>(t.timestamp[sz(r)]); }, s.timestamp_mean,
          s.timestamp_std);
  moments([&](EdgeId r) { return t.amount[sz(r)]; }, s.amount_mean, s.amount_std);
  return s;
}

Multigraph to_multigraph(const TransactionTable& t, const FeatureStats& stats) {
  std::int64_t width = 2;
  for (const auto& levels : t.categorical_levels) width += static_cast<std::int64_t>(levels.size());
  Multigraph g;
  g.num_nodes = t.num_nodes();
  g.node_features = Matrix::Ones(g.num_nodes, 1);
  g.edge_features = Matrix::Zero(t.num_rows(), width);
  auto z = [](double v, double mean, double stddev) {
    return stddev > 1e-12 ? (v - mean) / stddev : 0.0;
  };
  for (std::int64_t r = 0; r < t.num_rows(); ++r) {
    g.edges.push_back({t.src[sz(r)], t.dst[sz(r)]});
    g.edge_features(r, 0) =
        z(static_cast<double>(t.timestamp[sz(r)]), stats.timestamp_mean, stats.timestamp_std);
    g.edge_features(r, 1) = z(t.amount[sz(r)], stats.amount_mean, stats.amount_std);
    Index offset = 2;
    for (std::size_t c = 0; c < t.categorical_codes.size(); ++c) {
      g.edge_features(r, offset + t.categorical_codes[c][sz(r)]) = 1.0;
      offset += static_cast<Index>(t.categorical_levels[c].size());
    }
  }
  return g;
}

void SplitSpec::validate() const {
  if (!(train > 0 && val > 0 && test > 0)) {
    throw PreconditionError("split fractions must all be positive");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw PreconditionError("split fractions must sum to 1");
  }
}

EdgeSplit temporal_split(std::span<const std::int64_t> timestamps, const SplitSpec& spec) {
  const auto m = static_cast<std::int64_t>(timestamps.size());
  const auto sizes = block_sizes(m, spec);
  std::vector<std::int64_t> order(sz(m));
  std::iota(order.begin(), order.end(), std::int64_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    return timestamps[sz(a)] < timestamps[sz(b)];
  });
  return cut(order, sizes);
}

EdgeSplit random_node_split(std::int64_t num_nodes, const SplitSpec& spec, std::uint64_t seed) {
  const auto sizes = block_sizes(num_nodes, spec);
  std::vector<std::int64_t> order(sz(num_nodes));
  std::iota(order.begin(), order.end(), std::int64_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  EdgeSplit s = cut(order, sizes);
  for (auto* block : {&s.train, &s.val, &s.test}) std::sort(block->begin(), block->end());
  return s;
}

Multigraph edge_subgraph(const Multigraph& g, std::span<const EdgeId> keep) {
  Multigraph out;
  out.num_nodes = g.num_nodes;
  out.node_features = g.node_features;
  out.edge_features.resize(static_cast<Index>(keep.size()), g.edge_features.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.edges.push_back(g.edges[sz(keep[i])]);
    out.edge_features.row(static_cast<Index>(i)) = g.edge_features.row(keep[i]);
  }
  return out;
}

BatchSample sample_neighborhood(const Multigraph& g, const SupportIndex& support,
                                const SeedSet& seeds, std::int64_t hops, std::int64_t per_hop,
                                std::uint64_t rng_seed) {
  if (per_hop < 1) throw PreconditionError("sample_neighborhood: per_hop must be >= 1");
  if (hops < 0) throw PreconditionError("sample_neighborhood: hops must be >= 0");
  BatchSample b;
  std::vector<NodeId> local(sz(g.num_nodes), -1);
  std::vector<char> take(sz(g.num_edges()), 0);
  auto add_node = [&](NodeId v, std::int64_t hop) {
    if (v < 0 || v >= g.num_nodes) throw StructuralError("sample_neighborhood: seed node out of range");
    if (local[sz(v)] >= 0) return false;
    local[sz(v)] = static_cast<NodeId>(b.node_map.size());
    b.node_map.push_back(v);
    b.node_hop.push_back(hop);
    return true;
  };
  auto take_group = [&](std::int64_t pair) {
    for (EdgeId e : support.group(pair)) take[sz(e)] = 1;
  };
  for (EdgeId e : seeds.edges) {
    if (e < 0 || e >= g.num_edges()) throw StructuralError("sample_neighborhood: seed edge out of range");
    add_node(g.edges[sz(e)].src, 0);
    add_node(g.edges[sz(e)].dst, 0);
    take[sz(e)] = 1;
    if (hops > 0) take_group(support.pair_of(e));
  }
  for (NodeId v : seeds.nodes) add_node(v, 0);

  std::vector<NodeId> frontier = b.node_map;
  Rng rng(rng_seed);
  for (std::int64_t hop = 1; hop <= hops; ++hop) {
    std::vector<NodeId> next;
    for (NodeId v : frontier) {
      std::vector<std::pair<NodeId, std::int64_t>> links;  // (neighbour, pair)
      for (std::int64_t s : support.out_pairs(v)) links.emplace_back(support.pair(s).dst, s);
      for (std::int64_t s : support.in_pairs(v)) links.emplace_back(support.pair(s).src, s);
      std::sort(links.begin(), links.end());
      std::vector<NodeId> neighbors;
      for (const auto& l : links) {
        if (neighbors.empty() || neighbors.back() != l.first) neighbors.push_back(l.first);
      }
      std::vector<char> chosen(neighbors.size(), 1);
      const auto count = static_cast<std::int64_t>(neighbors.size());
      if (count > per_hop) {
        std::fill(chosen.begin(), chosen.end(), 0);
        for (std::int64_t i : rng.sample_without_replacement(count, per_hop)) chosen[sz(i)] = 1;
      }
      std::size_t li = 0;
      for (std::size_t ni = 0; ni < neighbors.size(); ++ni) {
        for (; li < links.size() && links[li].first == neighbors[ni]; ++li) {
          if (chosen[ni]) take_group(links[li].second);
        }
        if (chosen[ni] && add_node(neighbors[ni], hop)) next.push_back(neighbors[ni]);
      }
    }
    frontier = std::move(next);
  }

  std::vector<EdgeId> local_edge(sz(g.num_edges()), -1);
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    if (!take[sz(e)]) continue;
    local_edge[sz(e)] = static_cast<EdgeId>(b.edge_map.size());
    b.edge_map.push_back(e);
  }
  Multigraph& sub = b.graph;
  sub.num_nodes = static_cast<std::int64_t>(b.node_map.size());
  sub.node_features.resize(sub.num_nodes, g.node_features.cols());
  for (std::size_t i = 0; i < b.node_map.size(); ++i) {
    sub.node_features.row(static_cast<Index>(i)) = g.node_features.row(b.node_map[i]);
  }
  sub.edge_features.resize(static_cast<Index>(b.edge_map.size()), g.edge_features.cols());
  for (std::size_t i = 0; i < b.edge_map.size(); ++i) {
    const Edge& e = g.edges[sz(b.edge_map[i])];
    sub.edges.push_back({local[sz(e.src)], local[sz(e.dst)]});
    sub.edge_features.row(static_cast<Index>(i)) = g.edge_features.row(b.edge_map[i]);
  }
  for (NodeId v : seeds.nodes) b.seed_nodes.push_back(local[sz(v)]);
  for (EdgeId e : seeds.edges) b.seed_edges.push_back(local_edge[sz(e)]);
  return b;
}

std::string to_string(PlantedTask t) {
  return t == PlantedTask::kMaxOfSums ? "max-of-sums" : "out-neighbor-count";
}

PlantedTask parse_planted_task(const std::string& name) {
  if (name == "max-of-sums" || name == "max_of_sums") return PlantedTask::kMaxOfSums;
  if (name == "out-neighbor-count" || name == "out_neighbor_count") {
    return PlantedTask::kOutNeighborCount;
  }
  throw PreconditionError("unknown task '" + name +
                          "' (expected max-of-sums or out-neighbor-count)");
}

void PlantedConfig::validate() const {
  if (num_nodes < 2) throw PreconditionError("planted task: need at least 2 nodes");
  if (senders_per_node < 1 || payments_per_sender < 1) {
    throw PreconditionError("planted task: counts must be >= 1");
  }
  if (!(margin >= 0)) throw PreconditionError("planted task: margin must be >= 0");
  if (!(positive_rate > 0 && positive_rate < 1)) {
    throw PreconditionError("planted task: positive rate must be in (0,1)");
  }
  if (task == PlantedTask::kMaxOfSums) {
    if (senders_per_node < 2 || payments_per_sender < 2) {
      throw PreconditionError(
          "max-of-sums needs >= 2 senders and >= 2 payments per sender to produce positives");
    }
    if (senders_per_node > num_nodes - 1) {
      throw PreconditionError("max-of-sums: more senders than other nodes");
    }
  } else if (2 * (senders_per_node + 1) > num_nodes - 1) {
    throw PreconditionError("out-neighbor-count: graph too small for the degree range");
  }
}

PlantedDataset generate_planted_task(const PlantedConfig& config) {
  config.validate();
  Rng rng(config.seed);
  PlantedDataset d;
  d.config = config;
  const std::int64_t n = config.num_nodes;
  std::vector<Edge> edges;
  std::vector<double> amounts;
  d.labels.assign(sz(n), 0);
  auto draw_amount = [&] { return std::round(rng.uniform(1.0, 100.0) * 100.0) / 100.0; };

  if (config.task == PlantedTask::kMaxOfSums) {
    const std::int64_t k = config.senders_per_node;
    const std::int64_t p = config.payments_per_sender;
    for (NodeId j = 0; j < n; ++j) {
      const std::vector<NodeId> senders = draw_others(rng, n, j, k);
      const int target = rng.bernoulli(config.positive_rate) ? 1 : 0;
      std::vector<std::vector<double>> groups(sz(k), std::vector<double>(sz(p)));
      for (int attempt = 0; attempt < 10000; ++attempt) {
        for (auto& group : groups) {
          for (double& a : group) a = draw_amount();
        }
        if (max_of_sums_rule(groups) == target && decision_margin(groups) >= config.margin) break;
      }
      d.labels[sz(j)] = max_of_sums_rule(groups);
      for (std::size_t s = 0; s < senders.size(); ++s) {
        for (double a : groups[s]) {
          edges.push_back({senders[s], j});
          amounts.push_back(a);
        }
      }
    }
  } else {
    const std::int64_t threshold = config.senders_per_node + 1;
    d.threshold = threshold;
    for (NodeId v = 0; v < n; ++v) {
      const int y = rng.bernoulli(config.positive_rate) ? 1 : 0;
      const std::int64_t degree =
          y ? threshold + 1 + static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(threshold)))
            : 1 + static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(threshold)));
      d.labels[sz(v)] = y;
      for (NodeId u : draw_others(rng, n, v, degree)) {
        const auto copies = 1 + static_cast<std::int64_t>(
                                    rng.index(static_cast<std::uint64_t>(config.payments_per_sender)));
        for (std::int64_t c = 0; c < copies; ++c) {
          edges.push_back({v, u});
          amounts.push_back(draw_amount());
        }
      }
    }
  }

  std::vector<std::int64_t> order(edges.size());
  std::iota(order.begin(), order.end(), std::int64_t{0});
  rng.shuffle(order);
  Multigraph& g = d.graph;
  g.num_nodes = n;
  g.node_features = Matrix::Ones(n, 1);
  g.edge_features.resize(static_cast<Index>(edges.size()), 2);
  for (std::size_t i = 0; i < order.size(); ++i) {
    g.edges.push_back(edges[sz(order[i])]);
    g.edge_features(static_cast<Index>(i), 0) =
        static_cast<double>(rng.index(std::uint64_t{1} << 30));
    g.edge_features(static_cast<Index>(i), 1) = amounts[sz(order[i])];
  }
  return d;
}

std::vector<int> planted_labels(const Multigraph& g, PlantedTask task, std::int64_t threshold) {
  std::vector<int> labels(sz(g.num_nodes), 0);
  if (task == PlantedTask::kMaxOfSums) {
    std::vector<std::map<NodeId, std::vector<double>>> incoming(sz(g.num_nodes));
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
      incoming[sz(g.edges[k].dst)][g.edges[k].src].push_back(g.edge_features(static_cast<Index>(k), 1));
    }
    for (NodeId j = 0; j < g.num_nodes; ++j) {
      if (incoming[sz(j)].empty()) continue;
      std::vector<std::vector<double>> groups;
      for (auto& [sender, group] : incoming[sz(j)]) groups.push_back(std::move(group));
      labels[sz(j)] = max_of_sums_rule(groups);
    }
  } else {
    const SupportIndex s = build_support_index(g);
    for (NodeId v = 0; v < g.num_nodes; ++v) {
      labels[sz(v)] = static_cast<std::int64_t>(s.out_pairs(v).size()) > threshold ? 1 : 0;
    }
  }
  return labels;
}

TransactionTable planted_to_table(const PlantedDataset& d) {
  TransactionTable t;
  for (NodeId v = 0; v < d.graph.num_nodes; ++v) t.accounts.push_back(std::to_string(v));
  for (std::size_t k = 0; k < d.graph.edges.size(); ++k) {
    t.src.push_back(d.graph.edges[k].src);
    t.dst.push_back(d.graph.edges[k].dst);
    t.timestamp.push_back(static_cast<std::int64_t>(d.graph.edge_features(static_cast<Index>(k), 0)));
    t.amount.push_back(d.graph.edge_features(static_cast<Index>(k), 1));
  }
  t.node_labels = d.labels;
  return t;
}

}  // namespace mega
