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

#include "mega/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>

#include "mega/rng.hpp"

namespace mega {
namespace {

using Index = Eigen::Index;

std::size_t sz(std::int64_t i) { return static_cast<std::size_t>(i); }

// The graph visible while scoring one split part. Edge tasks hide edges
// from later parts; node tasks see the whole graph.
struct View {
  Multigraph graph;
  SupportIndex support;
  std::vector<EdgeId> kept;  // sorted parent ids, edge tasks only

  EdgeId local_edge(EdgeId parent) const {
    auto it = std::lower_bound(kept.begin(), kept.end(), parent);
    return static_cast<EdgeId>(it - kept.begin());
  }
};

std::unique_ptr<View> make_view(const Dataset& data, SplitPart part) {
  auto v = std::make_unique<View>();
  if (data.task == TaskKind::kNode) {
    v->graph = data.graph;
  } else {
    auto add = [&](const std::vector<std::int64_t>& ids) {
      v->kept.insert(v->kept.end(), ids.begin(), ids.end());
    };
    add(data.split.train);
    if (part != SplitPart::kTrain) add(data.split.val);
    if (part == SplitPart::kTest) add(data.split.test);
    std::sort(v->kept.begin(), v->kept.end());
    v->graph = edge_subgraph(data.graph, v->kept);
  }
  v->support = build_support_index(v->graph);
  return v;
}

// Owns everything a forward cache points into.
struct Batch {
  BatchSample sample;
  SupportIndex support;
  ReverseIndex reverse;
  std::vector<NodeId> roots;
  std::vector<std::int64_t> seed_rows;  // logit rows of the seeds
  ForwardResult forward;
  Vector seed_logits;
};

std::unique_ptr<Batch> run_batch(const ModelConfig& model, const ModelParams& params,
                                 const Dataset& data, const View& view,
                                 std::span<const std::int64_t> items, const TrainConfig& train,
                                 bool train_mode, std::uint64_t sample_seed,
                                 std::uint64_t dropout_seed) {
  auto b = std::make_unique<Batch>();
  SeedSet seeds;
  if (data.task == TaskKind::kNode) {
    seeds.nodes.assign(items.begin(), items.end());
  } else {
    for (std::int64_t e : items) seeds.edges.push_back(view.local_edge(e));
  }
  b->sample = sample_neighborhood(view.graph, view.support, seeds, train.hops, train.per_hop,
                                  sample_seed);
  b->support = build_support_index(b->sample.graph);
  b->reverse = build_reverse_index(b->sample.graph, b->support);
  if (data.task == TaskKind::kNode) {
    b->roots = b->sample.seed_nodes;
    b->seed_rows.assign(b->sample.seed_nodes.begin(), b->sample.seed_nodes.end());
  } else {
    for (EdgeId e : b->sample.seed_edges) {
      b->roots.push_back(b->sample.graph.edges[sz(e)].src);
      b->roots.push_back(b->sample.graph.edges[sz(e)].dst);
      b->seed_rows.push_back(e);
    }
    std::sort(b->roots.begin(), b->roots.end());
    b->roots.erase(std::unique(b->roots.begin(), b->roots.end()), b->roots.end());
  }
  const ModelInput input{&b->sample.graph, &b->support, &b->reverse, b->roots};
  b->forward = model_forward(model, params, input, train_mode, dropout_seed);
  b->seed_logits.resize(static_cast<Index>(b->seed_rows.size()));
  for (std::size_t i = 0; i < b->seed_rows.size(); ++i) {
    b->seed_logits(static_cast<Index>(i)) = b->forward.logits(b->seed_rows[i]);
  }
  return b;
}

std::vector<int> labels_of(const Dataset& data, std::span<const std::int64_t> items) {
  std::vector<int> y;
  for (std::int64_t i : items) y.push_back(data.labels[sz(i)]);
  return y;
}

nlohmann::json metrics_json(const BinaryMetrics& m) {
  return {{"f1", m.f1},         {"precision", m.precision}, {"recall", m.recall},
          {"pr_auc", m.pr_auc}, {"tp", m.tp},               {"fp", m.fp},
          {"fn", m.fn},         {"tn", m.tn}};
}

bool all_finite(const ModelParams& params) {
  for (const Mlp* m : params.networks()) {
    for (const Linear& l : m->layers) {
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
  }
  return true;
}

// Input widths and readout must agree with the dataset.
void check_compatible(const ModelConfig& model, const Dataset& data) {
  const Readout expected = data.task == TaskKind::kEdge ? Readout::kEdge : Readout::kNode;
  if (model.readout != expected) {
    throw ShapeError("model readout '" + to_string(model.readout) + "' does not fit a " +
                     to_string(data.task) + " task");
  }
  if (model.node_in_dim != data.graph.node_features.cols() ||
      model.edge_in_dim != data.graph.edge_features.cols()) {
    throw ShapeError("model input widths do not match the dataset features");
  }
}

nlohmann::json weights_json(const ClassWeights& w) { return {w.negative, w.positive}; }

}  // namespace

std::string to_string(TaskKind t) { return t == TaskKind::kEdge ? "edge" : "node"; }

const std::vector<std::int64_t>& Dataset::part(SplitPart p) const {
  switch (p) {
    case SplitPart::kTrain:
      return split.train;
    case SplitPart::kVal:
      return split.val;
    case SplitPart::kTest:
      return split.test;
  }
  return split.test;
}

Dataset make_dataset(const TransactionTable& table, const SplitSpec& spec,
                     std::uint64_t split_seed) {
  Dataset d;
  if (table.edge_labels) {
    d.task = TaskKind::kEdge;
    d.split = temporal_split(table.timestamp, spec);
    d.graph = to_multigraph(table, feature_stats(table, d.split.train));
    d.labels = *table.edge_labels;
  } else if (table.node_labels) {
    d.task = TaskKind::kNode;
    d.split = random_node_split(table.num_nodes(), spec, split_seed);
    d.graph = to_multigraph(table, feature_stats(table));
    d.labels = *table.node_labels;
  } else {
    throw PreconditionError("dataset has neither edge nor node labels");
  }
  return d;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw PreconditionError("learning rate must be > 0");
  if (batch_size < 1) throw PreconditionError("batch size must be >= 1");
  if (!(class_weights.negative > 0 && class_weights.positive > 0)) {
    throw PreconditionError("class weights must be > 0");
  }
  if (epochs < 1 || patience < 1) throw PreconditionError("epochs and patience must be >= 1");
  if (hops < 0 || per_hop < 1) throw PreconditionError("need hops >= 0 and per_hop >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"batch_size", batch_size},
          {"class_weights", weights_json(class_weights)},
          {"epochs", epochs}, {"patience", patience}, {"hops", hops}, {"per_hop", per_hop}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::int64_t>();
  c.class_weights = {j.at("class_weights").at(0).get<double>(),
                     j.at("class_weights").at(1).get<double>()};
  c.epochs = j.at("epochs").get<std::int64_t>();
  c.patience = j.at("patience").get<std::int64_t>();
  c.hops = j.at("hops").get<std::int64_t>();
  c.per_hop = j.at("per_hop").get<std::int64_t>();
  c.validate();
  return c;
}

ModelConfig fit_to_dataset(ModelConfig config, const Dataset& data) {
  config.node_in_dim = data.graph.node_features.cols();
  config.edge_in_dim = data.graph.edge_features.cols();
  config.readout = data.task == TaskKind::kEdge ? Readout::kEdge : Readout::kNode;
  return config;
}

nlohmann::json ExperimentRecord::to_json(bool include_wall_clock) const {
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const auto& e : epochs) {
    epochs_json.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss},
                           {"val_loss", e.val_loss}, {"val_f1", e.val_f1}});
  }
  nlohmann::json j = {{"config", config},
                      {"seed", seed},
                      {"status", status},
                      {"diagnostic", diagnostic},
                      {"epochs", epochs_json},
                      {"best_epoch", best_epoch},
                      {"val", metrics_json(val)},
                      {"test", metrics_json(test)}};
  if (include_wall_clock) j["wall_seconds"] = wall_seconds;
  return j;
}

Evaluation evaluate(const ModelConfig& model, const ModelParams& params, const Dataset& data,
                    SplitPart part, const TrainConfig& train, std::uint64_t seed) {
  check_compatible(model, data);
  const auto& items = data.part(part);
  const auto view = make_view(data, part);
  Evaluation ev;
  ev.labels = labels_of(data, items);
  const std::uint64_t stream = mix_seed(seed, 0x5eed0000ULL + static_cast<std::uint64_t>(part));
  for (std::size_t start = 0, b = 0; start < items.size();
       start += sz(train.batch_size), ++b) {
    const std::size_t end = std::min(items.size(), start + sz(train.batch_size));
    const std::span<const std::int64_t> chunk(items.data() + start, end - start);
    const auto batch = run_batch(model, params, data, *view, chunk, train, false,
                                 mix_seed(stream, b), 0);
    for (Index i = 0; i < batch->seed_logits.size(); ++i) ev.scores.push_back(batch->seed_logits(i));
  }
  const Vector logits = Eigen::Map<const Vector>(ev.scores.data(), static_cast<Index>(ev.scores.size()));
  ev.loss = items.empty() ? 0.0 : weighted_bce_loss(logits, ev.labels, train.class_weights).loss;
  ev.metrics = binary_metrics(ev.scores, ev.labels);
  return ev;
}

TrainResult train_model(const ModelConfig& model, const TrainConfig& train, const Dataset& data,
                        std::uint64_t seed) {
  model.validate();
  train.validate();
  check_compatible(model, data);
  const auto started = std::chrono::steady_clock::now();
  TrainResult result;
  ExperimentRecord& rec = result.record;
  rec.seed = seed;
  rec.config = {{"model", model.to_json()}, {"train", train.to_json()},
                {"task", to_string(data.task)}};

  ModelParams params = ModelParams::init(model, mix_seed(seed, 1));
  std::vector<AdamState> adam;
  for (const Mlp* m : params.networks()) adam.push_back(AdamState::for_mlp(*m));
  result.params = params;

  const auto view = make_view(data, SplitPart::kTrain);
  std::vector<std::int64_t> order = data.split.train;
  double best_f1 = -1;
  double best_loss = INFINITY;
  std::int64_t stale = 0;

  for (std::int64_t epoch = 1; epoch <= train.epochs; ++epoch) {
    Rng rng(mix_seed(seed, 1000 + static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += sz(train.batch_size), ++batches) {
      const std::size_t end = std::min(order.size(), start + sz(train.batch_size));
      const std::span<const std::int64_t> chunk(order.data() + start, end - start);
      const auto batch = run_batch(model, params, data, *view, chunk, train, true, rng.next_u64(),
                                   rng.next_u64());
      const LossResult loss =
          weighted_bce_loss(batch->seed_logits, labels_of(data, chunk), train.class_weights);
      if (!std::isfinite(loss.loss)) {
        rec.status = "non-finite-loss";
        rec.diagnostic = "epoch " + std::to_string(epoch) + " batch " + std::to_string(batches) +
                         ": loss = " + std::to_string(loss.loss);
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        return result;
      }
      Vector upstream = Vector::Zero(batch->forward.logits.size());
      for (std::size_t i = 0; i < batch->seed_rows.size(); ++i) {
        upstream(batch->seed_rows[i]) += loss.logit_grads(static_cast<Index>(i));
      }
      const auto grads = model_backward(params, *batch->forward.cache, upstream);
      auto nets = params.networks();
      for (std::size_t i = 0; i < nets.size(); ++i) {
        adam_step(*nets[i], grads[i], adam[i], train.learning_rate);
      }
      loss_sum += loss.loss;
    }
    if (!all_finite(params)) {
      rec.status = "non-finite-loss";
      rec.diagnostic = "epoch " + std::to_string(epoch) + ": parameters became non-finite";
      rec.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      return result;
    }
    const Evaluation val = evaluate(model, params, data, SplitPart::kVal, train, seed);
    rec.epochs.push_back({epoch, loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1)),
                          val.loss, val.metrics.f1});
    if (val.metrics.f1 > best_f1 || (val.metrics.f1 == best_f1 && val.loss < best_loss)) {
      best_f1 = val.metrics.f1;
      best_loss = val.loss;
      rec.best_epoch = epoch;
      result.params = params;
      stale = 0;
    } else if (++stale >= train.patience) {
      break;
    }
  }
  rec.val = evaluate(model, result.params, data, SplitPart::kVal, train, seed).metrics;
  rec.test = evaluate(model, result.params, data, SplitPart::kTest, train, seed).metrics;
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

nlohmann::json summarize(const std::vector<ExperimentRecord>& records) {
  nlohmann::json out;
  std::vector<const ExperimentRecord*> ok;
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& r : records) {
    seeds.push_back(r.seed);
    if (r.ok()) ok.push_back(&r);
  }
  out["seeds"] = seeds;
  out["num_records"] = records.size();
  out["num_failed"] = records.size() - ok.size();
  auto stat = [&](auto field) {
    const double n = static_cast<double>(ok.size());
    double mean = 0;
    for (const auto* r : ok) mean += field(*r);
    mean = ok.empty() ? 0.0 : mean / n;
    double var = 0;
    for (const auto* r : ok) var += (field(*r) - mean) * (field(*r) - mean);
    const double stddev = ok.size() > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    return nlohmann::json{{"mean", mean}, {"std", stddev}};
  };
  out["test"] = {{"f1", stat([](const ExperimentRecord& r) { return r.test.f1; })},
                 {"precision", stat([](const ExperimentRecord& r) { return r.test.precision; })},
                 {"recall", stat([](const ExperimentRecord& r) { return r.test.recall; })},
                 {"pr_auc", stat([](const ExperimentRecord& r) { return r.test.pr_auc; })}};
  out["val"] = {{"f1", stat([](const ExperimentRecord& r) { return r.val.f1; })}};
  if (!records.empty()) out["config"] = records.front().config;
  return out;
}

nlohmann::json make_checkpoint(const ModelConfig& model, const TrainConfig& train,
                               const ModelParams& params, std::uint64_t seed) {
  return {{"format", "mega-checkpoint"}, {"version", 1},           {"seed", seed},
          {"model", model.to_json()},    {"train", train.to_json()}, {"params", params_to_json(params)}};
}

Checkpoint load_checkpoint(const nlohmann::json& j) {
  if (j.value("format", "") != "mega-checkpoint") {
    throw PreconditionError("not a checkpoint file");
  }
  Checkpoint c;
  c.model = ModelConfig::from_json(j.at("model"));
  c.train = TrainConfig::from_json(j.at("train"));
  c.params = params_from_json(c.model, j.at("params"));
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace mega
