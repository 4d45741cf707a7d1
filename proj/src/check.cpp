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

#include "mega/check.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "mega/agg.hpp"
#include "mega/graph.hpp"
#include "mega/idproof.hpp"
#include "mega/rng.hpp"

namespace mega {
namespace {

using Index = Eigen::Index;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Indexed {
  Multigraph g;
  SupportIndex s;
  ReverseIndex r;

  explicit Indexed(Multigraph graph)
      : g(std::move(graph)), s(build_support_index(g)), r(build_reverse_index(g, s)) {}
  Indexed(const Indexed&) = delete;

  ModelInput input() const { return ModelInput{&g, &s, &r, {}}; }
};

Matrix permute_rows(const Matrix& m, std::span<const std::int64_t> perm) {
  Matrix out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) out.row(perm[static_cast<std::size_t>(i)]) = m.row(i);
  return out;
}

Vector permute_entries(const Vector& v, std::span<const std::int64_t> perm) {
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) out(perm[static_cast<std::size_t>(i)]) = v(i);
  return out;
}

const std::vector<std::string>& agg_names() {
  static const std::vector<std::string> names{"sum", "mean", "max", "min", "pna"};
  return names;
}

Mlp slice(Index in, Index from) {
  Matrix w = Matrix::Zero(in, 1);
  w(from, 0) = 1.0;
  return Mlp::affine(w, RowVector::Zero(1));
}

double receiver_value(ModelKind kind, AggKind node_agg, double a1, double a2, double b1,
                      double b2) {
  Multigraph g;
  g.num_nodes = 3;
  g.node_features = Matrix::Zero(3, 1);
  g.edges = {{0, 2}, {0, 2}, {1, 2}, {1, 2}};
  g.edge_features = Matrix(4, 1);
  g.edge_features << a1, a2, b1, b2;
  ModelConfig cfg;
  cfg.kind = kind;
  cfg.num_layers = 1;
  cfg.hidden = 1;
  cfg.bidirectional = false;
  cfg.edge_agg = AggSpec::single(AggKind::kSum);
  cfg.node_agg = AggSpec::single(node_agg);
  cfg.edge_agg_mlp = false;
  LayerParams p;
  p.msg = slice(2, 1);
  p.edge_update = slice(3, 1);
  p.node_update = slice(2, 1);
  const SupportIndex s = build_support_index(g);
  LayerState state;
  state.x = g.node_features;
  state.e = g.edge_features;
  const LayerState out = kind == ModelKind::kMega ? mega_layer(cfg, p, state, g, s, nullptr)
                                                  : single_stage_layer(cfg, p, state, g, nullptr);
  return out.x(2, 0);
}

std::string digits(const DigitId& id) {
  std::string out;
  for (std::size_t i = 0; i < id.size(); ++i) {
    if (i) out += '.';
    out += std::to_string(id[i]);
  }
  return out;
}

}  // namespace

nlohmann::json SuiteReport::to_json() const {
  return {{"suite", suite}, {"passed", passed}, {"details", details}};
}

std::vector<std::string> suite_names() {
  return {"equivariance", "node-ids", "port-witness", "separation", "gradient", "complexity"};
}

SuiteReport run_suite(const std::string& name, const CheckOptions& o) {
  if (name == "equivariance") return check_equivariance(o.trials, o.seed);
  if (name == "node-ids") return check_node_ids(o.graphs, o.seed);
  if (name == "port-witness") return check_port_witness(o.n_min, o.n_max, o.witness_trials);
  if (name == "separation") return check_separation();
  if (name == "gradient") return check_gradients(o.gradient_graphs, o.seed);
  if (name == "complexity") return check_complexity(o.sizes, o.seed);
  throw PreconditionError("unknown check suite: " + name);
}

double relative_error(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("relative_error: shape mismatch");
  }
  return (a - b).norm() / std::max(b.norm(), 1e-12);
}

SuiteReport check_equivariance(std::int64_t trials, std::uint64_t seed, double tolerance) {
  if (trials < 1) throw PreconditionError("equivariance: trials must be positive");
  const auto start = Clock::now();
  Rng rng(mix_seed(seed, 0xe0));
  std::int64_t cases = 0;
  std::int64_t failures = 0;
  double worst = 0.0;
  nlohmann::json first_failure;
  for (std::int64_t t = 0; t < trials; ++t) {
    const auto n = 2 + static_cast<std::int64_t>(rng.index(19));
    const auto m_min = n - 1;
    const auto m_max = std::min<std::int64_t>(80, n * n);
    const auto m = m_min + static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(m_max - m_min + 1)));
    const std::uint64_t graph_seed = rng.next_u64();
    const Indexed base(random_connected_multigraph(n, m, graph_seed));
    const GraphPermutation perm = random_permutation(base.g, rng.next_u64());
    const Indexed moved(apply_permutation(base.g, perm));
    const Readout readout = t % 2 == 0 ? Readout::kEdge : Readout::kNode;
    for (const std::string& ea : agg_names()) {
      for (const std::string& na : agg_names()) {
        for (bool bidir : {false, true}) {
          ModelConfig cfg;
          cfg.hidden = 8;
          cfg.num_layers = 2;
          cfg.bidirectional = bidir;
          cfg.edge_agg = AggSpec::parse(ea);
          cfg.node_agg = AggSpec::parse(na);
          if (cfg.edge_agg.kind == AggKind::kPna) cfg.edge_agg.mean_log_degree = 0.9;
          if (cfg.node_agg.kind == AggKind::kPna) cfg.node_agg.mean_log_degree = 1.3;
          cfg.readout = readout;
          cfg.node_in_dim = base.g.node_features.cols();
          cfg.edge_in_dim = base.g.edge_features.cols();
          const ModelParams params = ModelParams::init(cfg, mix_seed(graph_seed, cases));
          const ForwardResult a = model_forward(cfg, params, base.input());
          const ForwardResult b = model_forward(cfg, params, moved.input());
          const auto& out_perm = readout == Readout::kEdge ? perm.edge_perm : perm.node_perm;
          const double err = std::max(
              {relative_error(b.final_state.x, permute_rows(a.final_state.x, perm.node_perm)),
               relative_error(b.final_state.e, permute_rows(a.final_state.e, perm.edge_perm)),
               relative_error(b.logits, permute_entries(a.logits, out_perm))});
          worst = std::max(worst, err);
          ++cases;
          if (!(err <= tolerance)) {
            if (failures == 0) {
              first_failure = {{"graph", t},     {"n", n},          {"m", m},
                               {"edge_agg", ea}, {"node_agg", na}, {"bidirectional", bidir},
                               {"error", err}};
            }
            ++failures;
          }
        }
      }
    }
  }
  SuiteReport r{"equivariance", failures == 0, {}};
  r.details = {{"graphs", trials},       {"cases", cases},
               {"failures", failures},   {"max_relative_error", worst},
               {"tolerance", tolerance}, {"seconds", seconds_since(start)}};
  if (failures) r.details["first_failure"] = first_failure;
  return r;
}

SuiteReport check_node_ids(std::int64_t graphs, std::uint64_t seed) {
  if (graphs < 1) throw PreconditionError("node-ids: graphs must be positive");
  const auto start = Clock::now();
  Rng rng(mix_seed(seed, 0x1d));
  std::int64_t unique_failures = 0;
  std::int64_t length_failures = 0;
  nlohmann::json first_failure;
  for (std::int64_t t = 0; t < graphs; ++t) {
    const auto n = 1 + static_cast<std::int64_t>(rng.index(30));
    const auto m_max = std::max<std::int64_t>(n - 1, std::min<std::int64_t>(120, 4 * n));
    const auto m = n - 1 + static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(m_max - n + 2)));
    if (m == 0) continue;
    const Multigraph g = random_connected_multigraph(n, m, rng.next_u64());
    const auto root = static_cast<NodeId>(rng.index(static_cast<std::uint64_t>(n)));
    const SupportIndex s = build_support_index(g);
    const ReverseIndex r = build_reverse_index(g, s);
    const IdState ids = bfs_assign_ids(g, s, r, label_edges_by_features(g), root);
    const std::set<DigitId> distinct(ids.ids.begin(), ids.ids.end());
    const bool unique = static_cast<std::int64_t>(distinct.size()) == n;
    const auto dist = undirected_distances(g, root);
    bool lengths = true;
    for (NodeId v = 0; v < n; ++v) {
      const auto len = static_cast<std::int64_t>(ids.ids[static_cast<std::size_t>(v)].size());
      if (len != 1 + dist[static_cast<std::size_t>(v)]) lengths = false;
    }
    if (!unique) ++unique_failures;
    if (!lengths) ++length_failures;
    if ((!unique || !lengths) && first_failure.is_null()) {
      first_failure = {{"graph", t}, {"n", n}, {"m", m}, {"root", root}};
    }
  }
  SuiteReport r{"node-ids", unique_failures == 0 && length_failures == 0, {}};
  r.details = {{"graphs", graphs},
               {"duplicate_id_graphs", unique_failures},
               {"digit_count_mismatches", length_failures},
               {"seconds", seconds_since(start)}};
  if (!first_failure.is_null()) r.details["first_failure"] = first_failure;
  return r;
}

SuiteReport check_port_witness(std::int64_t n_min, std::int64_t n_max, std::int64_t trials) {
  if (n_min < 4 || n_max < n_min || trials < 1) {
    throw PreconditionError("port-witness: need 4 <= n_min <= n_max and trials >= 1");
  }
  const auto start = Clock::now();
  bool all = true;
  nlohmann::json per_n = nlohmann::json::array();
  for (std::int64_t n = n_min; n <= n_max; ++n) {
    const WitnessReport w = nonequivariance_witness(n, trials);
    all = all && w.found;
    nlohmann::json entry = {{"n", n}, {"found", w.found}, {"trials_used", w.trials_used}};
    if (w.found) {
      entry["witness_seed"] = w.witness_seed;
      entry["node"] = w.node;
      entry["reference"] = digits(w.reference_embedding);
      entry["witness"] = digits(w.witness_embedding);
    }
    per_n.push_back(entry);
  }
  SuiteReport r{"port-witness", all, {}};
  r.details = {{"trials", trials}, {"stars", per_n}, {"seconds", seconds_since(start)}};
  return r;
}

SuiteReport check_separation() {
  const double s1 = receiver_value(ModelKind::kSingleStage, AggKind::kSum, 5, 1, 3, 4);
  const double s2 = receiver_value(ModelKind::kSingleStage, AggKind::kSum, 5, 3, 1, 4);
  const double m1 = receiver_value(ModelKind::kSingleStage, AggKind::kMax, 5, 1, 3, 4);
  const double m2 = receiver_value(ModelKind::kSingleStage, AggKind::kMax, 5, 3, 1, 4);
  const double t1 = receiver_value(ModelKind::kMega, AggKind::kMax, 5, 1, 3, 4);
  const double t2 = receiver_value(ModelKind::kMega, AggKind::kMax, 5, 3, 1, 4);
  SuiteReport r{"separation", s1 == s2 && m1 == m2 && t1 != t2, {}};
  r.details = {{"single_stage_sum", {s1, s2}},
               {"single_stage_max", {m1, m2}},
               {"two_stage_max_of_sums", {t1, t2}}};
  return r;
}

GradientComparison compare_gradients(const ModelConfig& config, const ModelParams& params,
                                     const ModelInput& input, const Vector& upstream,
                                     double eps) {
  GradientComparison out;
  const ForwardResult fr = model_forward(config, params, input);
  if (fr.logits.size() != upstream.size()) throw ShapeError("compare_gradients: upstream length");
  out.analytic = model_backward(params, *fr.cache, upstream);
  ModelParams work = params;
  auto objective = [&] { return upstream.dot(model_forward(config, work, input).logits); };
  double diff = 0.0;
  double ref = 0.0;
  const auto nets = work.networks();
  for (std::size_t k = 0; k < nets.size(); ++k) {
    Mlp* m = nets[k];
    ParamGrads g = ParamGrads::zeros_like(*m);
    auto central = [&](double& p) {
      const double saved = p;
      p = saved + eps;
      const double up = objective();
      p = saved - eps;
      const double down = objective();
      p = saved;
      return (up - down) / (2 * eps);
    };
    for (std::size_t l = 0; l < m->layers.size(); ++l) {
      Matrix& w = m->layers[l].weight;
      for (Index i = 0; i < w.rows(); ++i) {
        for (Index j = 0; j < w.cols(); ++j) g.weights[l](i, j) = central(w(i, j));
      }
      RowVector& b = m->layers[l].bias;
      for (Index j = 0; j < b.size(); ++j) g.biases[l](j) = central(b(j));
      diff += (g.weights[l] - out.analytic[k].weights[l]).squaredNorm();
      diff += (g.biases[l] - out.analytic[k].biases[l]).squaredNorm();
    }
    ref += g.squared_norm();
    out.numeric.push_back(std::move(g));
  }
  out.relative_error = std::sqrt(diff) / std::max(std::sqrt(ref), 1e-12);
  return out;
}

SuiteReport check_gradients(std::int64_t graphs, std::uint64_t seed, double eps,
                            double tolerance) {
  if (graphs < 1) throw PreconditionError("gradient: graphs must be positive");
  const auto start = Clock::now();
  Rng rng(mix_seed(seed, 0x9d));
  const auto& names = agg_names();
  double worst = 0.0;
  std::int64_t failures = 0;
  nlohmann::json cases = nlohmann::json::array();
  for (std::int64_t t = 0; t < graphs; ++t) {
    const auto n = 4 + static_cast<std::int64_t>(rng.index(4));
    const auto m = n + 2 + static_cast<std::int64_t>(rng.index(6));
    const Indexed f(random_connected_multigraph(n, m, rng.next_u64(), 2, 3));
    ModelConfig cfg;
    cfg.hidden = 4;
    cfg.num_layers = 2;
    cfg.bidirectional = true;
    cfg.activation = Activation::kGelu;
    cfg.edge_agg = AggSpec::parse(names[static_cast<std::size_t>(t) % names.size()]);
    cfg.node_agg = AggSpec::parse(names[static_cast<std::size_t>(t / 5 + t) % names.size()]);
    cfg.readout = t % 2 == 0 ? Readout::kEdge : Readout::kNode;
    cfg.node_in_dim = 2;
    cfg.edge_in_dim = 3;
    const ModelParams params = ModelParams::init(cfg, rng.next_u64());
    const auto rows = cfg.readout == Readout::kEdge ? m : n;
    Vector w(rows);
    for (Index i = 0; i < w.size(); ++i) w(i) = rng.normal();
    const GradientComparison c = compare_gradients(cfg, params, f.input(), w, eps);
    worst = std::max(worst, c.relative_error);
    const bool ok = c.relative_error <= tolerance;
    if (!ok) ++failures;
    cases.push_back({{"n", n},
                     {"m", m},
                     {"edge_agg", cfg.edge_agg.name()},
                     {"node_agg", cfg.node_agg.name()},
                     {"readout", to_string(cfg.readout)},
                     {"relative_error", c.relative_error}});
  }
  SuiteReport r{"gradient", failures == 0, {}};
  r.details = {{"graphs", graphs},         {"epsilon", eps},   {"tolerance", tolerance},
               {"max_relative_error", worst}, {"failures", failures}, {"cases", cases},
               {"seconds", seconds_since(start)}};
  return r;
}

Multigraph fixed_multiplicity_graph(std::int64_t num_edges, std::int64_t multiplicity,
                                    std::uint64_t seed) {
  if (multiplicity < 1 || num_edges % multiplicity != 0) {
    throw PreconditionError("fixed_multiplicity_graph: edges must be a multiple of multiplicity");
  }
  const std::int64_t pairs = num_edges / multiplicity;
  const std::int64_t n = std::max<std::int64_t>(pairs / 4, 8);
  if (pairs > n * (n - 1)) throw PreconditionError("fixed_multiplicity_graph: too many pairs");
  Rng rng(seed);
  Multigraph g;
  g.num_nodes = n;
  g.node_features = Matrix(n, 2);
  for (Index i = 0; i < g.node_features.size(); ++i) g.node_features.data()[i] = rng.normal();
  g.edges.reserve(static_cast<std::size_t>(num_edges));
  for (std::int64_t p = 0; p < pairs; ++p) {
    const NodeId src = p % n;
    const NodeId dst = (src + 1 + p / n) % n;
    for (std::int64_t c = 0; c < multiplicity; ++c) g.edges.push_back({src, dst});
  }
  g.edge_features = Matrix(num_edges, 2);
  for (Index i = 0; i < g.edge_features.size(); ++i) g.edge_features.data()[i] = rng.normal();
  return g;
}

SuiteReport check_complexity(const std::vector<std::int64_t>& sizes, std::uint64_t seed,
                             double tolerance) {
  if (sizes.size() < 2) throw PreconditionError("complexity: need at least two sizes");
  const auto start = Clock::now();
  ModelConfig cfg;
  cfg.hidden = 8;
  cfg.num_layers = 2;
  cfg.bidirectional = true;
  cfg.node_in_dim = 2;
  cfg.edge_in_dim = 2;
  const ModelParams params = ModelParams::init(cfg, seed);
  nlohmann::json rows = nlohmann::json::array();
  std::vector<double> ops;
  for (std::int64_t size : sizes) {
    const Indexed f(fixed_multiplicity_graph(size, 2, mix_seed(seed, static_cast<std::uint64_t>(size))));
    reset_reduction_ops();
    const auto t0 = Clock::now();
    model_forward(cfg, params, f.input());
    const double secs = seconds_since(t0);
    const auto count = reduction_ops();
    ops.push_back(static_cast<double>(count));
    rows.push_back({{"edges", size},
                    {"pairs", f.s.num_pairs()},
                    {"reduction_ops", count},
                    {"ops_per_edge", static_cast<double>(count) / static_cast<double>(size)},
                    {"forward_seconds", secs}});
  }
  bool ok = true;
  double worst = 0.0;
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    const double expected = static_cast<double>(sizes[i]) / static_cast<double>(sizes[0]);
    const double got = ops[i] / ops[0];
    const double dev = std::abs(got / expected - 1.0);
    worst = std::max(worst, dev);
    ok = ok && dev <= tolerance;
  }
  SuiteReport r{"complexity", ok, {}};
  r.details = {{"sizes", rows},
               {"max_ratio_deviation", worst},
               {"tolerance", tolerance},
               {"seconds", seconds_since(start)}};
  return r;
}

}  // namespace mega
