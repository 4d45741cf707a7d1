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

#include "mega/model.hpp"

#include <algorithm>
#include <numeric>

#include "mega/rng.hpp"

namespace mega {

using Index = Eigen::Index;

namespace {

std::size_t sz(std::int64_t i) { return static_cast<std::size_t>(i); }

// Issues a distinct dropout stream for every network call of one pass.
class SeedStream {
 public:
  explicit SeedStream(std::uint64_t base) : base_(base) {}
  std::uint64_t next() { return mix_seed(base_, counter_++); }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

// Edge list + pair index for one message-passing direction.
struct Direction {
  std::span<const Edge> edges;
  const SupportIndex* support;
};

struct Nets {
  const Mlp* agg_net;
  const Mlp* msg;
  const Mlp* edge_update;
};

}  // namespace

struct DirectionCache {
  Matrix e_in;
  Matrix h_raw;
  std::optional<MlpCache> agg_cache;
  Matrix h;
  MlpCache msg_cache;
  Matrix messages;
  Matrix a;
  MlpCache eu_cache;
  Matrix e_out;
  // Per-node incoming edge lists, single-stage only.
  std::vector<std::int64_t> in_offsets;
  std::vector<std::int64_t> in_members;
};

struct LayerCache {
  Matrix x_in;
  DirectionCache fwd;
  std::optional<DirectionCache> rev;
  MlpCache nu_cache;
  Matrix x_out;
};

struct ModelCache {
  ModelConfig config;
  ModelInput input;
  MlpCache node_enc_cache;
  MlpCache edge_enc_cache;
  std::vector<LayerCache> layers;
  MlpCache readout_cache;
  std::int64_t num_nodes = 0;
  std::int64_t num_edges = 0;
};

namespace {

Direction forward_direction(const ModelInput& in) {
  return {in.graph->edges, in.support};
}

Direction reverse_direction(const ModelInput& in) {
  return {in.reverse->edges, &in.reverse->support};
}

Nets forward_nets(const LayerParams& p) {
  return {p.edge_agg_net ? &*p.edge_agg_net : nullptr, &p.msg, &p.edge_update};
}

Nets reverse_nets(const LayerParams& p) {
  return {p.rev_edge_agg_net ? &*p.rev_edge_agg_net : nullptr, &*p.rev_msg, &*p.rev_edge_update};
}

void incoming_edges(std::int64_t num_nodes, std::span<const Edge> edges,
                    std::vector<std::int64_t>& offsets, std::vector<std::int64_t>& members) {
  std::vector<std::int64_t> counts(sz(num_nodes), 0);
  for (const Edge& e : edges) ++counts[sz(e.dst)];
  offsets.assign(sz(num_nodes) + 1, 0);
  std::partial_sum(counts.begin(), counts.end(), offsets.begin() + 1);
  members.resize(edges.size());
  std::vector<std::int64_t> cursor(offsets.begin(), offsets.end() - 1);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    members[sz(cursor[sz(edges[k].dst)]++)] = static_cast<std::int64_t>(k);
  }
}

DirectionCache two_stage_forward(const ModelConfig& cfg, const Nets& nets, const Matrix& x,
                                 const Matrix& e, const Direction& dir, bool train,
                                 SeedStream& seeds) {
  const SupportIndex& supp = *dir.support;
  const Index hidden = x.cols();
  DirectionCache c;
  c.e_in = e;
  c.h_raw = segment_reduce(cfg.edge_agg,
                           GroupView{c.e_in, supp.grouped_edges(), supp.group_offsets()});
  if (nets.agg_net) {
    auto [h, cache] = mlp_forward(*nets.agg_net, c.h_raw, train, seeds.next());
    c.h = std::move(h);
    c.agg_cache = std::move(cache);
  } else {
    c.h = c.h_raw;
  }
  const Index wh = c.h.cols();
  const Index pairs = supp.num_pairs();
  Matrix msg_in(pairs, hidden + wh);
  for (Index s = 0; s < pairs; ++s) {
    msg_in.row(s) << x.row(supp.pair(s).src), c.h.row(s);
  }
  auto [messages, msg_cache] = mlp_forward(*nets.msg, msg_in, train, seeds.next());
  c.messages = std::move(messages);
  c.msg_cache = std::move(msg_cache);
  c.a = reduce_or_default(cfg.node_agg,
                          GroupView{c.messages, supp.in_pair_list(), supp.in_offsets()});

  const Index edges = static_cast<Index>(dir.edges.size());
  const Index he = e.cols();
  Matrix eu_in(edges, hidden + he + wh);
  for (Index k = 0; k < edges; ++k) {
    eu_in.row(k) << x.row(dir.edges[sz(k)].src), e.row(k), c.h.row(supp.pair_of(k));
  }
  auto [e_out, eu_cache] = mlp_forward(*nets.edge_update, eu_in, train, seeds.next());
  c.e_out = std::move(e_out);
  c.eu_cache = std::move(eu_cache);
  return c;
}

void two_stage_backward(const ModelConfig& cfg, const Nets& nets, const DirectionCache& c,
                        const Direction& dir, const Matrix& grad_a, const Matrix& grad_e_out,
                        Matrix& grad_x, Matrix& grad_e, std::vector<ParamGrads*> out) {
  const SupportIndex& supp = *dir.support;
  const Index hidden = grad_x.cols();
  const Index he = c.e_in.cols();
  const Index wh = c.h.cols();
  Matrix grad_h = Matrix::Zero(c.h.rows(), wh);

  auto [g_eu_in, eu_grads] = mlp_backward(*nets.edge_update, c.eu_cache, grad_e_out);
  for (Index k = 0; k < g_eu_in.rows(); ++k) {
    grad_x.row(dir.edges[sz(k)].src) += g_eu_in.row(k).segment(0, hidden);
    grad_e.row(k) += g_eu_in.row(k).segment(hidden, he);
    grad_h.row(supp.pair_of(k)) += g_eu_in.row(k).segment(hidden + he, wh);
  }
  *out[2] += eu_grads;

  const Matrix grad_msg = segment_reduce_backward(
      cfg.node_agg, GroupView{c.messages, supp.in_pair_list(), supp.in_offsets()}, c.a, grad_a);
  auto [g_msg_in, msg_grads] = mlp_backward(*nets.msg, c.msg_cache, grad_msg);
  for (Index s = 0; s < g_msg_in.rows(); ++s) {
    grad_x.row(supp.pair(s).src) += g_msg_in.row(s).segment(0, hidden);
    grad_h.row(s) += g_msg_in.row(s).segment(hidden, wh);
  }
  *out[1] += msg_grads;

  Matrix grad_h_raw;
  if (nets.agg_net) {
    auto [g, agg_grads] = mlp_backward(*nets.agg_net, *c.agg_cache, grad_h);
    grad_h_raw = std::move(g);
    *out[0] += agg_grads;
  } else {
    grad_h_raw = std::move(grad_h);
  }
  grad_e += segment_reduce_backward(
      cfg.edge_agg, GroupView{c.e_in, supp.grouped_edges(), supp.group_offsets()}, c.h_raw,
      grad_h_raw);
}

DirectionCache single_stage_forward(const ModelConfig& cfg, const Nets& nets, const Matrix& x,
                                    const Matrix& e, std::span<const Edge> edges, bool train,
                                    SeedStream& seeds) {
  DirectionCache c;
  c.e_in = e;
  incoming_edges(x.rows(), edges, c.in_offsets, c.in_members);
  const Index hidden = x.cols();
  const Index he = e.cols();
  const Index m = static_cast<Index>(edges.size());
  Matrix msg_in(m, hidden + he);
  for (Index k = 0; k < m; ++k) msg_in.row(k) << x.row(edges[sz(k)].src), e.row(k);
  auto [messages, msg_cache] = mlp_forward(*nets.msg, msg_in, train, seeds.next());
  c.messages = std::move(messages);
  c.msg_cache = std::move(msg_cache);
  c.a = reduce_or_default(cfg.node_agg, GroupView{c.messages, c.in_members, c.in_offsets});

  Matrix eu_in(m, hidden + he + hidden);
  for (Index k = 0; k < m; ++k) {
    eu_in.row(k) << x.row(edges[sz(k)].src), e.row(k), x.row(edges[sz(k)].dst);
  }
  auto [e_out, eu_cache] = mlp_forward(*nets.edge_update, eu_in, train, seeds.next());
  c.e_out = std::move(e_out);
  c.eu_cache = std::move(eu_cache);
  return c;
}

void single_stage_backward(const ModelConfig& cfg, const Nets& nets, const DirectionCache& c,
                           std::span<const Edge> edges, const Matrix& grad_a,
                           const Matrix& grad_e_out, Matrix& grad_x, Matrix& grad_e,
                           std::vector<ParamGrads*> out) {
  const Index hidden = grad_x.cols();
  const Index he = c.e_in.cols();
  auto [g_eu_in, eu_grads] = mlp_backward(*nets.edge_update, c.eu_cache, grad_e_out);
  for (Index k = 0; k < g_eu_in.rows(); ++k) {
    grad_x.row(edges[sz(k)].src) += g_eu_in.row(k).segment(0, hidden);
    grad_e.row(k) += g_eu_in.row(k).segment(hidden, he);
    grad_x.row(edges[sz(k)].dst) += g_eu_in.row(k).segment(hidden + he, hidden);
  }
  *out[2] += eu_grads;
  const Matrix grad_msg = segment_reduce_backward(
      cfg.node_agg, GroupView{c.messages, c.in_members, c.in_offsets}, c.a, grad_a);
  auto [g_msg_in, msg_grads] = mlp_backward(*nets.msg, c.msg_cache, grad_msg);
  for (Index k = 0; k < g_msg_in.rows(); ++k) {
    grad_x.row(edges[sz(k)].src) += g_msg_in.row(k).segment(0, hidden);
    grad_e.row(k) += g_msg_in.row(k).segment(hidden, he);
  }
  *out[1] += msg_grads;
}

DirectionCache direction_forward(const ModelConfig& cfg, const Nets& nets, const Matrix& x,
                                 const Matrix& e, const Direction& dir, bool train,
                                 SeedStream& seeds) {
  if (cfg.kind == ModelKind::kMega) return two_stage_forward(cfg, nets, x, e, dir, train, seeds);
  return single_stage_forward(cfg, nets, x, e, dir.edges, train, seeds);
}

LayerCache layer_forward(const ModelConfig& cfg, const LayerParams& p, const Matrix& x,
                         const Matrix& e, const Matrix& e_rev, const Direction& fwd,
                         const std::optional<Direction>& rev, bool train, SeedStream& seeds) {
  LayerCache c;
  c.x_in = x;
  c.fwd = direction_forward(cfg, forward_nets(p), x, e, fwd, train, seeds);
  if (cfg.bidirectional) {
    c.rev = direction_forward(cfg, reverse_nets(p), x, e_rev, *rev, train, seeds);
  }
  const Index wa = c.fwd.a.cols();
  Matrix nu_in(x.rows(), x.cols() + wa * (cfg.bidirectional ? 2 : 1));
  if (cfg.bidirectional) {
    nu_in << x, c.fwd.a, c.rev->a;
  } else {
    nu_in << x, c.fwd.a;
  }
  auto [x_out, nu_cache] = mlp_forward(p.node_update, nu_in, train, seeds.next());
  c.nu_cache = std::move(nu_cache);
  c.x_out = std::move(x_out);
  return c;
}

std::int64_t check_width(std::int64_t width, std::int64_t expected, const char* what) {
  if (width != expected) {
    throw ShapeError(std::string(what) + ": width " + std::to_string(width) + ", expected " +
                     std::to_string(expected));
  }
  return width;
}

}  // namespace

std::string to_string(ModelKind k) { return k == ModelKind::kMega ? "mega" : "single-stage"; }
std::string to_string(Readout r) { return r == Readout::kEdge ? "edge" : "node"; }

void ModelConfig::validate() const {
  if (num_layers < 1) throw PreconditionError("num_layers must be >= 1");
  if (hidden < 1) throw PreconditionError("hidden size must be >= 1");
  if (node_in_dim < 1 || edge_in_dim < 1) throw PreconditionError("input widths must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw PreconditionError("dropout must be in [0,1)");
  edge_agg.validate();
  node_agg.validate();
}

std::int64_t ModelConfig::edge_agg_width() const {
  if (kind == ModelKind::kSingleStage) return 0;
  return edge_agg_mlp ? hidden : edge_agg.output_width(hidden);
}

std::int64_t ModelConfig::node_agg_width() const { return node_agg.output_width(hidden); }

namespace {

nlohmann::json agg_to_json(const AggSpec& a) {
  nlohmann::json j;
  j["kind"] = a.name();
  if (a.kind == AggKind::kPna) {
    std::vector<int> stats;
    std::vector<int> scalers;
    for (auto s : a.statistics) stats.push_back(static_cast<int>(s));
    for (auto s : a.scalers) scalers.push_back(static_cast<int>(s));
    j["statistics"] = stats;
    j["scalers"] = scalers;
    j["mean_log_degree"] = a.mean_log_degree;
  }
  return j;
}

AggSpec agg_from_json(const nlohmann::json& j) {
  AggSpec a = AggSpec::parse(j.at("kind").get<std::string>());
  if (a.kind == AggKind::kPna) {
    a.statistics.clear();
    a.scalers.clear();
    for (int s : j.at("statistics").get<std::vector<int>>()) {
      a.statistics.push_back(static_cast<PnaStatistic>(s));
    }
    for (int s : j.at("scalers").get<std::vector<int>>()) {
      a.scalers.push_back(static_cast<PnaScaler>(s));
    }
    a.mean_log_degree = j.at("mean_log_degree").get<double>();
  }
  return a;
}

}  // namespace

nlohmann::json ModelConfig::to_json() const {
  return {{"kind", to_string(kind)},
          {"num_layers", num_layers},
          {"hidden", hidden},
          {"bidirectional", bidirectional},
          {"ego_ids", ego_ids},
          {"edge_agg", agg_to_json(edge_agg)},
          {"node_agg", agg_to_json(node_agg)},
          {"edge_agg_mlp", edge_agg_mlp},
          {"readout", to_string(readout)},
          {"activation", to_string(activation)},
          {"dropout", dropout},
          {"node_in_dim", node_in_dim},
          {"edge_in_dim", edge_in_dim}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "mega") {
    c.kind = ModelKind::kMega;
  } else if (kind == "single-stage") {
    c.kind = ModelKind::kSingleStage;
  } else {
    throw PreconditionError("unknown model kind '" + kind + "'");
  }
  c.num_layers = j.at("num_layers").get<std::int64_t>();
  c.hidden = j.at("hidden").get<std::int64_t>();
  c.bidirectional = j.at("bidirectional").get<bool>();
  c.ego_ids = j.at("ego_ids").get<bool>();
  c.edge_agg = agg_from_json(j.at("edge_agg"));
  c.node_agg = agg_from_json(j.at("node_agg"));
  c.edge_agg_mlp = j.at("edge_agg_mlp").get<bool>();
  const auto readout = j.at("readout").get<std::string>();
  if (readout != "edge" && readout != "node") {
    throw PreconditionError("unknown readout '" + readout + "'");
  }
  c.readout = readout == "edge" ? Readout::kEdge : Readout::kNode;
  c.activation = parse_activation(j.at("activation").get<std::string>());
  c.dropout = j.at("dropout").get<double>();
  c.node_in_dim = j.at("node_in_dim").get<std::int64_t>();
  c.edge_in_dim = j.at("edge_in_dim").get<std::int64_t>();
  c.validate();
  return c;
}

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const std::int64_t h = cfg.hidden;
  const auto act = cfg.activation;
  const double p = cfg.dropout;
  ModelParams params;
  params.node_encoder = Mlp({cfg.node_input_width(), h}, Activation::kIdentity, 0.0, rng);
  params.edge_encoder = Mlp({cfg.edge_in_dim, h}, Activation::kIdentity, 0.0, rng);
  const std::int64_t wa = cfg.node_agg_width();
  const bool two_stage = cfg.kind == ModelKind::kMega;
  const std::int64_t wh = cfg.edge_agg_width();
  for (std::int64_t l = 0; l < cfg.num_layers; ++l) {
    LayerParams layer;
    auto make_direction = [&](std::optional<Mlp>& agg, Mlp& msg, Mlp& eu) {
      if (two_stage) {
        if (cfg.edge_agg_mlp) agg = Mlp({cfg.edge_agg.output_width(h), h, h}, act, p, rng);
        msg = Mlp({h + wh, h, h}, act, p, rng);
        eu = Mlp({h + h + wh, h, h}, act, p, rng);
      } else {
        msg = Mlp({h + h, h, h}, act, p, rng);
        eu = Mlp({h + h + h, h, h}, act, p, rng);
      }
    };
    make_direction(layer.edge_agg_net, layer.msg, layer.edge_update);
    layer.node_update = Mlp({h + wa * (cfg.bidirectional ? 2 : 1), h, h}, act, p, rng);
    if (cfg.bidirectional) {
      layer.rev_msg.emplace();
      layer.rev_edge_update.emplace();
      make_direction(layer.rev_edge_agg_net, *layer.rev_msg, *layer.rev_edge_update);
    }
    params.layers.push_back(std::move(layer));
  }
  const std::int64_t ro_in = cfg.readout == Readout::kEdge ? 3 * h : h;
  params.readout = Mlp({ro_in, h, 1}, act, p, rng);
  return params;
}

std::vector<const Mlp*> ModelParams::networks() const {
  std::vector<const Mlp*> nets{&node_encoder, &edge_encoder};
  for (const auto& l : layers) {
    if (l.edge_agg_net) nets.push_back(&*l.edge_agg_net);
    nets.push_back(&l.msg);
    nets.push_back(&l.node_update);
    nets.push_back(&l.edge_update);
    if (l.rev_edge_agg_net) nets.push_back(&*l.rev_edge_agg_net);
    if (l.rev_msg) nets.push_back(&*l.rev_msg);
    if (l.rev_edge_update) nets.push_back(&*l.rev_edge_update);
  }
  nets.push_back(&readout);
  return nets;
}

std::vector<Mlp*> ModelParams::networks() {
  std::vector<Mlp*> out;
  for (const Mlp* m : std::as_const(*this).networks()) out.push_back(const_cast<Mlp*>(m));
  return out;
}

std::vector<std::string> ModelParams::network_names() const {
  std::vector<std::string> names{"node_encoder", "edge_encoder"};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string prefix = "layer" + std::to_string(i) + ".";
    if (l.edge_agg_net) names.push_back(prefix + "edge_agg");
    names.push_back(prefix + "msg");
    names.push_back(prefix + "node_update");
    names.push_back(prefix + "edge_update");
    if (l.rev_edge_agg_net) names.push_back(prefix + "rev_edge_agg");
    if (l.rev_msg) names.push_back(prefix + "rev_msg");
    if (l.rev_edge_update) names.push_back(prefix + "rev_edge_update");
  }
  names.push_back("readout");
  return names;
}

std::int64_t ModelParams::num_params() const {
  std::int64_t n = 0;
  for (const Mlp* m : networks()) n += m->num_params();
  return n;
}

Matrix add_ego_ids(const Matrix& node_features, std::span<const NodeId> roots) {
  Matrix out(node_features.rows(), node_features.cols() + 1);
  out.leftCols(node_features.cols()) = node_features;
  out.col(node_features.cols()).setZero();
  for (NodeId r : roots) {
    if (r < 0 || r >= node_features.rows()) throw StructuralError("ego root out of range");
    out(r, node_features.cols()) = 1.0;
  }
  return out;
}

ForwardResult model_forward(const ModelConfig& cfg, const ModelParams& params,
                            const ModelInput& input, bool train_mode,
                            std::uint64_t dropout_seed) {
  cfg.validate();
  if (!input.graph || !input.support) throw PreconditionError("model_forward: missing graph");
  const Multigraph& g = *input.graph;
  if (input.support->num_edges() != g.num_edges() || input.support->num_nodes() != g.num_nodes) {
    throw StructuralError("model_forward: support index does not match graph");
  }
  if (cfg.bidirectional && !input.reverse) {
    throw PreconditionError("model_forward: bidirectional model needs a reverse index");
  }
  if (static_cast<std::int64_t>(params.layers.size()) != cfg.num_layers) {
    throw ShapeError("model_forward: parameter layer count does not match config");
  }
  check_width(g.node_features.cols(), cfg.node_in_dim, "node features");
  check_width(g.edge_features.cols(), cfg.edge_in_dim, "edge features");

  SeedStream seeds(dropout_seed);
  auto cache = std::make_shared<ModelCache>();
  cache->config = cfg;
  cache->input = input;
  if (!cfg.bidirectional) cache->input.reverse = nullptr;
  cache->num_nodes = g.num_nodes;
  cache->num_edges = g.num_edges();

  const Matrix node_in = cfg.ego_ids ? add_ego_ids(g.node_features, input.roots) : g.node_features;
  auto [x, node_enc_cache] = mlp_forward(params.node_encoder, node_in, train_mode, seeds.next());
  auto [e, edge_enc_cache] = mlp_forward(params.edge_encoder, g.edge_features, train_mode,
                                         seeds.next());
  cache->node_enc_cache = std::move(node_enc_cache);
  cache->edge_enc_cache = std::move(edge_enc_cache);
  Matrix e_rev;
  if (cfg.bidirectional) e_rev = reverse_edge_features(*input.reverse, e);

  const Direction fwd = forward_direction(cache->input);
  std::optional<Direction> rev;
  if (cfg.bidirectional) rev = reverse_direction(cache->input);

  LayerState state;
  for (const LayerParams& layer : params.layers) {
    LayerCache lc = layer_forward(cfg, layer, x, e, e_rev, fwd, rev, train_mode, seeds);
    x = lc.x_out;
    e = lc.fwd.e_out;
    if (cfg.bidirectional) e_rev = lc.rev->e_out;
    state.h = lc.fwd.h;
    if (cfg.bidirectional) state.h_rev = lc.rev->h;
    cache->layers.push_back(std::move(lc));
  }
  state.x = x;
  state.e = e;
  state.e_rev = e_rev;

  ForwardResult result;
  if (cfg.readout == Readout::kEdge) {
    Matrix ro_in(g.num_edges(), 3 * cfg.hidden);
    for (Index k = 0; k < g.num_edges(); ++k) {
      ro_in.row(k) << x.row(g.edges[sz(k)].src), e.row(k), x.row(g.edges[sz(k)].dst);
    }
    auto [logits, ro_cache] = mlp_forward(params.readout, ro_in, train_mode, seeds.next());
    result.logits = logits.col(0);
    cache->readout_cache = std::move(ro_cache);
  } else {
    auto [logits, ro_cache] = mlp_forward(params.readout, x, train_mode, seeds.next());
    result.logits = logits.col(0);
    cache->readout_cache = std::move(ro_cache);
  }
  result.final_state = std::move(state);
  result.cache = std::move(cache);
  return result;
}

std::vector<ParamGrads> model_backward(const ModelParams& params, const ModelCache& cache,
                                       const Vector& logit_grads) {
  const ModelConfig& cfg = cache.config;
  const auto nets = params.networks();
  std::vector<ParamGrads> grads;
  grads.reserve(nets.size());
  for (const Mlp* m : nets) grads.push_back(ParamGrads::zeros_like(*m));
  auto slot = [&](const Mlp* m) -> ParamGrads* {
    for (std::size_t i = 0; i < nets.size(); ++i) {
      if (nets[i] == m) return &grads[i];
    }
    throw PreconditionError("model_backward: network not part of these parameters");
  };
  if (cache.layers.size() != params.layers.size()) {
    throw PreconditionError("model_backward: cache does not match parameters");
  }

  const Multigraph& g = *cache.input.graph;
  const Index hidden = cfg.hidden;
  const std::int64_t expected_logits = cfg.readout == Readout::kEdge ? cache.num_edges
                                                                      : cache.num_nodes;
  if (logit_grads.size() != expected_logits) {
    throw ShapeError("model_backward: logit gradient has the wrong length");
  }

  Matrix grad_x = Matrix::Zero(cache.num_nodes, hidden);
  Matrix grad_e = Matrix::Zero(cache.num_edges, hidden);
  Matrix grad_e_rev = Matrix::Zero(cfg.bidirectional ? cache.num_edges : 0, hidden);

  {
    Matrix upstream = logit_grads;
    auto [g_in, ro_grads] = mlp_backward(params.readout, cache.readout_cache, upstream);
    *slot(&params.readout) += ro_grads;
    if (cfg.readout == Readout::kEdge) {
      for (Index k = 0; k < g_in.rows(); ++k) {
        grad_x.row(g.edges[sz(k)].src) += g_in.row(k).segment(0, hidden);
        grad_e.row(k) += g_in.row(k).segment(hidden, hidden);
        grad_x.row(g.edges[sz(k)].dst) += g_in.row(k).segment(2 * hidden, hidden);
      }
    } else {
      grad_x += g_in;
    }
  }

  const Direction fwd = forward_direction(cache.input);
  for (std::size_t l = cache.layers.size(); l-- > 0;) {
    const LayerCache& lc = cache.layers[l];
    const LayerParams& p = params.layers[l];
    auto [g_nu_in, nu_grads] = mlp_backward(p.node_update, lc.nu_cache, grad_x);
    *slot(&p.node_update) += nu_grads;
    const Index wa = lc.fwd.a.cols();
    Matrix next_grad_x = g_nu_in.leftCols(hidden);
    Matrix next_grad_e = Matrix::Zero(grad_e.rows(), hidden);
    const Matrix grad_a = g_nu_in.middleCols(hidden, wa);
    const Nets fn = forward_nets(p);
    std::vector<ParamGrads*> fslots{fn.agg_net ? slot(fn.agg_net) : nullptr, slot(fn.msg),
                                    slot(fn.edge_update)};
    if (cfg.kind == ModelKind::kMega) {
      two_stage_backward(cfg, fn, lc.fwd, fwd, grad_a, grad_e, next_grad_x, next_grad_e, fslots);
    } else {
      single_stage_backward(cfg, fn, lc.fwd, fwd.edges, grad_a, grad_e, next_grad_x, next_grad_e,
                            fslots);
    }
    Matrix next_grad_e_rev;
    if (cfg.bidirectional) {
      const Direction rev = reverse_direction(cache.input);
      const Matrix grad_a_rev = g_nu_in.middleCols(hidden + wa, wa);
      next_grad_e_rev = Matrix::Zero(grad_e_rev.rows(), hidden);
      const Nets rn = reverse_nets(p);
      std::vector<ParamGrads*> rslots{rn.agg_net ? slot(rn.agg_net) : nullptr, slot(rn.msg),
                                      slot(rn.edge_update)};
      if (cfg.kind == ModelKind::kMega) {
        two_stage_backward(cfg, rn, *lc.rev, rev, grad_a_rev, grad_e_rev, next_grad_x,
                           next_grad_e_rev, rslots);
      } else {
        single_stage_backward(cfg, rn, *lc.rev, rev.edges, grad_a_rev, grad_e_rev, next_grad_x,
                              next_grad_e_rev, rslots);
      }
    }
    grad_x = std::move(next_grad_x);
    grad_e = std::move(next_grad_e);
    grad_e_rev = std::move(next_grad_e_rev);
  }

  if (cfg.bidirectional) {
    const auto& to_orig = cache.input.reverse->rev_edge_to_orig;
    for (Index k = 0; k < grad_e_rev.rows(); ++k) grad_e.row(to_orig[sz(k)]) += grad_e_rev.row(k);
  }
  *slot(&params.edge_encoder) += mlp_backward(params.edge_encoder, cache.edge_enc_cache, grad_e).second;
  *slot(&params.node_encoder) += mlp_backward(params.node_encoder, cache.node_enc_cache, grad_x).second;
  return grads;
}

Matrix edge_stage(const ModelConfig& config, const LayerParams& layer, const Matrix& e,
                  const SupportIndex& support) {
  Matrix h = segment_reduce(config.edge_agg,
                            GroupView{e, support.grouped_edges(), support.group_offsets()});
  if (layer.edge_agg_net) h = mlp_apply(*layer.edge_agg_net, h);
  return h;
}

NodeStageResult node_stage(const ModelConfig& config, const LayerParams& layer, const Matrix& x,
                           const Matrix& h, const SupportIndex& support) {
  Matrix msg_in(support.num_pairs(), x.cols() + h.cols());
  for (Index s = 0; s < support.num_pairs(); ++s) {
    msg_in.row(s) << x.row(support.pair(s).src), h.row(s);
  }
  const Matrix messages = mlp_apply(layer.msg, msg_in);
  NodeStageResult r;
  r.a = reduce_or_default(config.node_agg,
                          GroupView{messages, support.in_pair_list(), support.in_offsets()});
  Matrix nu_in(x.rows(), x.cols() + r.a.cols());
  nu_in << x, r.a;
  r.x_next = mlp_apply(layer.node_update, nu_in);
  return r;
}

Matrix edge_update(const ModelConfig&, const LayerParams& layer, const Matrix& x_prev,
                   const Matrix& e, const Matrix& h, const SupportIndex& support,
                   std::span<const Edge> edges) {
  Matrix eu_in(static_cast<Index>(edges.size()), x_prev.cols() + e.cols() + h.cols());
  for (Index k = 0; k < eu_in.rows(); ++k) {
    eu_in.row(k) << x_prev.row(edges[sz(k)].src), e.row(k), h.row(support.pair_of(k));
  }
  return mlp_apply(layer.edge_update, eu_in);
}

LayerState mega_layer(const ModelConfig& config, const LayerParams& layer,
                      const LayerState& state, const Multigraph& g, const SupportIndex& support,
                      const ReverseIndex* reverse) {
  if (config.kind != ModelKind::kMega) throw PreconditionError("mega_layer: not a two-stage config");
  if (config.bidirectional && !reverse) throw PreconditionError("mega_layer: reverse index required");
  SeedStream seeds(0);
  const Direction fwd{g.edges, &support};
  std::optional<Direction> rev;
  if (config.bidirectional) rev = Direction{reverse->edges, &reverse->support};
  LayerCache lc = layer_forward(config, layer, state.x, state.e, state.e_rev, fwd, rev, false, seeds);
  LayerState out;
  out.x = std::move(lc.x_out);
  out.e = std::move(lc.fwd.e_out);
  out.h = std::move(lc.fwd.h);
  if (lc.rev) {
    out.e_rev = std::move(lc.rev->e_out);
    out.h_rev = std::move(lc.rev->h);
  }
  return out;
}

LayerState single_stage_layer(const ModelConfig& config, const LayerParams& layer,
                              const LayerState& state, const Multigraph& g,
                              const ReverseIndex* reverse) {
  if (config.kind != ModelKind::kSingleStage) {
    throw PreconditionError("single_stage_layer: not a single-stage config");
  }
  if (config.bidirectional && !reverse) {
    throw PreconditionError("single_stage_layer: reverse index required");
  }
  SeedStream seeds(0);
  const Direction fwd{g.edges, nullptr};
  std::optional<Direction> rev;
  if (config.bidirectional) rev = Direction{reverse->edges, nullptr};
  LayerCache lc = layer_forward(config, layer, state.x, state.e, state.e_rev, fwd, rev, false, seeds);
  LayerState out;
  out.x = std::move(lc.x_out);
  out.e = std::move(lc.fwd.e_out);
  if (lc.rev) out.e_rev = std::move(lc.rev->e_out);
  return out;
}

nlohmann::json params_to_json(const ModelParams& params) {
  nlohmann::json j = nlohmann::json::object();
  const auto names = params.network_names();
  const auto nets = params.networks();
  for (std::size_t i = 0; i < nets.size(); ++i) j[names[i]] = mlp_to_json(*nets[i]);
  return j;
}

ModelParams params_from_json(const ModelConfig& config, const nlohmann::json& j) {
  ModelParams params = ModelParams::init(config, 0);
  const auto names = params.network_names();
  auto nets = params.networks();
  if (j.size() != nets.size()) {
    throw ShapeError("checkpoint: expected " + std::to_string(nets.size()) + " networks, found " +
                     std::to_string(j.size()));
  }
  for (std::size_t i = 0; i < nets.size(); ++i) {
    if (!j.contains(names[i])) throw ShapeError("checkpoint: missing network " + names[i]);
    Mlp loaded = mlp_from_json(j.at(names[i]));
    if (loaded.dims() != nets[i]->dims()) {
      throw ShapeError("checkpoint: network " + names[i] + " does not match the config");
    }
    *nets[i] = std::move(loaded);
  }
  return params;
}

}  // namespace mega
