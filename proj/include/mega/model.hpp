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

#ifndef MEGA_MODEL_HPP_
#define MEGA_MODEL_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mega/agg.hpp"
#include "mega/common.hpp"
#include "mega/graph.hpp"
#include "mega/nn.hpp"

namespace mega {

/// kMega: parallel edges are reduced per (src, dst) pair first, then pair
/// messages are reduced per node. kSingleStage: every edge sends its own
/// message and nodes reduce them in one pass.
enum class ModelKind { kMega, kSingleStage };
enum class Readout { kEdge, kNode };

std::string to_string(ModelKind k);
std::string to_string(Readout r);

struct ModelConfig {
  ModelKind kind = ModelKind::kMega;
  std::int64_t num_layers = 2;
  std::int64_t hidden = 64;
  bool bidirectional = true;
  bool ego_ids = false;
  AggSpec edge_agg = AggSpec::single(AggKind::kSum);
  AggSpec node_agg = AggSpec::single(AggKind::kSum);
  // MLP applied to the multi-edge reduction (GIN / PNA style).
  bool edge_agg_mlp = true;
  Readout readout = Readout::kEdge;
  Activation activation = Activation::kRelu;
  double dropout = 0.0;
  std::int64_t node_in_dim = 1;  // raw width, before the ego column
  std::int64_t edge_in_dim = 1;

  /// Throws PreconditionError on inconsistent settings.
  void validate() const;
  std::int64_t edge_agg_width() const;  // width of h after the optional MLP
  std::int64_t node_agg_width() const;  // width of a
  std::int64_t node_input_width() const { return node_in_dim + (ego_ids ? 1 : 0); }

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Networks of one message-passing layer. Reverse-direction networks are
/// only present for bidirectional models; edge_agg_net only when
/// ModelConfig::edge_agg_mlp is set and the model is two-stage.
struct LayerParams {
  std::optional<Mlp> edge_agg_net;      // h = MLP(EdgeAgg(e))
  Mlp msg;                              // [x_i | h_ij]  or [x_i | e_ijp] single-stage
  Mlp node_update;                      // [x_j | a_j | a_rev_j]
  Mlp edge_update;                      // [x_i | e_ijp | h_ij]  or [x_i | e | x_j]
  std::optional<Mlp> rev_edge_agg_net;
  std::optional<Mlp> rev_msg;
  std::optional<Mlp> rev_edge_update;
};

struct ModelParams {
  Mlp node_encoder;
  Mlp edge_encoder;
  std::vector<LayerParams> layers;
  Mlp readout;

  /// Fresh parameters for `config`, fully determined by `seed`.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);

  /// Stable enumeration of every network, used for gradients, optimizer
  /// state and checkpoints.
  std::vector<Mlp*> networks();
  std::vector<const Mlp*> networks() const;
  std::vector<std::string> network_names() const;
  std::int64_t num_params() const;
};

/// Latent state between layers. h / h_rev are the artificial-node features
/// computed inside the layer that produced this state (empty for the
/// single-stage model and for the initial state).
struct LayerState {
  Matrix x;
  Matrix e;
  Matrix e_rev;
  Matrix h;
  Matrix h_rev;
};

/// Graph plus the indices a forward pass needs. Objects referenced here
/// must outlive any ForwardResult computed from them.
struct ModelInput {
  const Multigraph* graph = nullptr;
  const SupportIndex* support = nullptr;
  const ReverseIndex* reverse = nullptr;  // may be null for unidirectional models
  std::span<const NodeId> roots;          // ego nodes, read when ego_ids is on
};

struct ModelCache;

struct ForwardResult {
  Vector logits;  // one per edge (edge readout) or per node (node readout)
  LayerState final_state;
  std::shared_ptr<ModelCache> cache;
};

/// Appends a 0/1 column marking the root nodes.
Matrix add_ego_ids(const Matrix& node_features, std::span<const NodeId> roots);

ForwardResult model_forward(const ModelConfig& config, const ModelParams& params,
                            const ModelInput& input, bool train_mode = false,
                            std::uint64_t dropout_seed = 0);

/// Gradients for every network, aligned with ModelParams::networks().
/// Throws PreconditionError if parameters changed since the forward pass.
std::vector<ParamGrads> model_backward(const ModelParams& params, const ModelCache& cache,
                                       const Vector& logit_grads);

// Single-layer building blocks, inference mode. Mainly useful for tests
// and for inspecting what a layer computes.

/// Multi-edge reduction for every pair of `support`, followed by the
/// layer's edge_agg_net when present.
Matrix edge_stage(const ModelConfig& config, const LayerParams& layer, const Matrix& e,
                  const SupportIndex& support);

struct NodeStageResult {
  Matrix a;
  Matrix x_next;
};

/// Pair messages f([x_i | h_ij]) reduced over the in-pairs of each node
/// (zero row when a node has none), then x_next = g_v([x_j | a_j]).
NodeStageResult node_stage(const ModelConfig& config, const LayerParams& layer, const Matrix& x,
                           const Matrix& h, const SupportIndex& support);

/// e_next_k = g_e([x_src | e_k | h_pair(k)]) using the pre-update x.
Matrix edge_update(const ModelConfig& config, const LayerParams& layer, const Matrix& x_prev,
                   const Matrix& e, const Matrix& h, const SupportIndex& support,
                   std::span<const Edge> edges);

/// One full two-stage layer; uses the reverse direction when the config
/// is bidirectional.
LayerState mega_layer(const ModelConfig& config, const LayerParams& layer,
                      const LayerState& state, const Multigraph& g, const SupportIndex& support,
                      const ReverseIndex* reverse);

/// One single-stage layer (per-edge messages, one reduction per node).
LayerState single_stage_layer(const ModelConfig& config, const LayerParams& layer,
                              const LayerState& state, const Multigraph& g,
                              const ReverseIndex* reverse);

nlohmann::json params_to_json(const ModelParams& params);
ModelParams params_from_json(const ModelConfig& config, const nlohmann::json& j);

}  // namespace mega

#endif  // MEGA_MODEL_HPP_
