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

#ifndef MEGA_TRAIN_HPP_
#define MEGA_TRAIN_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mega/data.hpp"
#include "mega/metrics.hpp"
#include "mega/model.hpp"
#include "mega/nn.hpp"

namespace mega {

enum class TaskKind { kEdge, kNode };
enum class SplitPart { kTrain, kVal, kTest };

std::string to_string(TaskKind t);

/// Graph with normalized features, per-item labels and a three-way split
/// over edges (edge tasks, temporal) or nodes (node tasks, random).
struct Dataset {
  Multigraph graph;
  TaskKind task = TaskKind::kEdge;
  std::vector<int> labels;
  EdgeSplit split;

  const std::vector<std::int64_t>& part(SplitPart p) const;
};

Dataset make_dataset(const TransactionTable& table, const SplitSpec& spec,
                     std::uint64_t split_seed);

/// Optimization settings; model shape lives in ModelConfig.
struct TrainConfig {
  double learning_rate = 0.003;
  std::int64_t batch_size = 8192;
  ClassWeights class_weights{1.0, 6.27};
  std::int64_t epochs = 80;
  std::int64_t patience = 10;
  std::int64_t hops = 2;
  std::int64_t per_hop = 100;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Sets input widths and readout to match the dataset.
ModelConfig fit_to_dataset(ModelConfig config, const Dataset& data);

struct EpochLog {
  std::int64_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_f1 = 0;
};

struct ExperimentRecord {
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::vector<EpochLog> epochs;
  std::int64_t best_epoch = 0;
  BinaryMetrics val;
  BinaryMetrics test;
  double wall_seconds = 0;
  std::string status = "ok";
  std::string diagnostic;

  bool ok() const { return status == "ok"; }
  nlohmann::json to_json(bool include_wall_clock = true) const;
};

struct TrainResult {
  ExperimentRecord record;
  ModelParams params;  // best validation epoch
};

struct Evaluation {
  BinaryMetrics metrics;
  double loss = 0;
  std::vector<double> scores;  // logits, aligned with the split part
  std::vector<int> labels;
};

Evaluation evaluate(const ModelConfig& model, const ModelParams& params, const Dataset& data,
                    SplitPart part, const TrainConfig& train, std::uint64_t seed);

/// Adam with early stopping on validation minority-class F1; keeps the
/// best validation parameters.
TrainResult train_model(const ModelConfig& model, const TrainConfig& train, const Dataset& data,
                        std::uint64_t seed);

/// Mean and sample standard deviation of the test metrics across records.
nlohmann::json summarize(const std::vector<ExperimentRecord>& records);

nlohmann::json make_checkpoint(const ModelConfig& model, const TrainConfig& train,
                               const ModelParams& params, std::uint64_t seed);

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  ModelParams params;
  std::uint64_t seed = 0;
};

Checkpoint load_checkpoint(const nlohmann::json& j);

}  // namespace mega

#endif  // MEGA_TRAIN_HPP_
