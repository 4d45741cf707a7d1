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

#ifndef MEGA_NN_HPP_
#define MEGA_NN_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mega/common.hpp"
#include "mega/rng.hpp"

namespace mega {

enum class Activation { kRelu, kGelu, kIdentity };

std::string to_string(Activation a);
Activation parse_activation(std::string_view name);

/// Affine map y = x W + b with W stored [in x out].
struct Linear {
  Matrix weight;
  RowVector bias;
};

/// Fully connected stack. The activation (and dropout, in training mode)
/// is applied between layers, never after the last one.
class Mlp {
 public:
  Mlp() = default;
  /// Uniform Glorot initialization from `rng`; biases start at zero.
  Mlp(std::vector<std::int64_t> dims, Activation activation, double dropout, Rng& rng);
  /// Single layer computing x W + b from explicit parameters.
  static Mlp affine(Matrix weight, RowVector bias);

  std::vector<Linear> layers;
  Activation activation = Activation::kRelu;
  double dropout = 0.0;
  // Bumped by every parameter update; forward caches remember it.
  std::uint64_t version = 0;

  std::int64_t in_dim() const;
  std::int64_t out_dim() const;
  std::vector<std::int64_t> dims() const;
  std::int64_t num_params() const;
};

/// Gradient storage shape-congruent with an Mlp.
struct ParamGrads {
  std::vector<Matrix> weights;
  std::vector<RowVector> biases;

  static ParamGrads zeros_like(const Mlp& m);
  ParamGrads& operator+=(const ParamGrads& other);
  double squared_norm() const;
};

/// Everything mlp_backward needs from a forward pass.
struct MlpCache {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // pre-activation of each hidden layer
  std::vector<Matrix> masks;   // dropout scale per hidden layer (empty when off)
  std::vector<std::int64_t> dims;
  std::uint64_t version = 0;
  bool valid = false;
};

/// Forward pass. Dropout masks are drawn from `dropout_seed` and only in
/// train mode, so a (seed, train_mode) pair fully determines the output.
std::pair<Matrix, MlpCache> mlp_forward(const Mlp& m, const Matrix& input, bool train_mode = false,
                                        std::uint64_t dropout_seed = 0);
/// Inference shortcut.
Matrix mlp_apply(const Mlp& m, const Matrix& input);

/// Exact gradients for the realized dropout mask. Throws PreconditionError
/// if the cache is missing or was produced before the last update of m.
std::pair<Matrix, ParamGrads> mlp_backward(const Mlp& m, const MlpCache& cache,
                                           const Matrix& upstream);

struct ClassWeights {
  double negative = 1.0;
  double positive = 1.0;
};

struct LossResult {
  double loss = 0.0;
  Vector logit_grads;
};

/// Mean class-weighted binary cross-entropy on logits, in the stable
/// max(z,0) - z y + log1p(exp(-|z|)) form, with its analytic gradient.
LossResult weighted_bce_loss(const Vector& logits, std::span<const int> labels,
                             ClassWeights weights);

double sigmoid(double z);

struct AdamState {
  ParamGrads first;
  ParamGrads second;
  std::int64_t step = 0;

  static AdamState for_mlp(const Mlp& m);
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void adam_step(Mlp& m, const ParamGrads& grads, AdamState& state, double learning_rate,
               const AdamOptions& options = {});

nlohmann::json mlp_to_json(const Mlp& m);
Mlp mlp_from_json(const nlohmann::json& j);

}  // namespace mega

#endif  // MEGA_NN_HPP_
