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

#include "mega/nn.hpp"

#include <cmath>
#include <numbers>

namespace mega {
namespace {

using Index = Eigen::Index;

double activate(Activation a, double x) {
  switch (a) {
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
    case Activation::kGelu: return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
    case Activation::kIdentity: return x;
  }
  return x;
}

double activate_grad(Activation a, double x) {
  switch (a) {
    case Activation::kRelu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::kGelu: {
      const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
      const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
      return cdf + x * pdf;
    }
    case Activation::kIdentity: return 1.0;
  }
  return 1.0;
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kGelu: return "gelu";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "gelu") return Activation::kGelu;
  if (name == "identity") return Activation::kIdentity;
  throw PreconditionError("unknown activation '" + std::string(name) + "'");
}

Mlp::Mlp(std::vector<std::int64_t> dims, Activation act, double dropout_p, Rng& rng)
    : activation(act), dropout(dropout_p) {
  if (dims.size() < 2) throw ShapeError("Mlp needs at least input and output widths");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw PreconditionError("dropout must be in [0,1)");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const Index in = dims[l];
    const Index out = dims[l + 1];
    if (in <= 0 || out <= 0) throw ShapeError("Mlp widths must be positive");
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    Linear layer{Matrix(in, out), RowVector::Zero(out)};
    for (Index i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] = rng.uniform(-bound, bound);
    }
    layers.push_back(std::move(layer));
  }
}

Mlp Mlp::affine(Matrix weight, RowVector bias) {
  if (bias.size() != weight.cols()) throw ShapeError("affine: bias width != weight columns");
  Mlp m;
  m.activation = Activation::kIdentity;
  m.layers.push_back({std::move(weight), std::move(bias)});
  return m;
}

std::int64_t Mlp::in_dim() const { return layers.empty() ? 0 : layers.front().weight.rows(); }
std::int64_t Mlp::out_dim() const { return layers.empty() ? 0 : layers.back().weight.cols(); }

std::vector<std::int64_t> Mlp::dims() const {
  std::vector<std::int64_t> d;
  if (layers.empty()) return d;
  d.push_back(layers.front().weight.rows());
  for (const auto& l : layers) d.push_back(l.weight.cols());
  return d;
}

std::int64_t Mlp::num_params() const {
  std::int64_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

ParamGrads ParamGrads::zeros_like(const Mlp& m) {
  ParamGrads g;
  for (const auto& l : m.layers) {
    g.weights.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    g.biases.push_back(RowVector::Zero(l.bias.size()));
  }
  return g;
}

ParamGrads& ParamGrads::operator+=(const ParamGrads& other) {
  if (weights.size() != other.weights.size()) throw ShapeError("ParamGrads shape mismatch");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

double ParamGrads::squared_norm() const {
  double s = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    s += weights[l].squaredNorm() + biases[l].squaredNorm();
  }
  return s;
}

std::pair<Matrix, MlpCache> mlp_forward(const Mlp& m, const Matrix& input, bool train_mode,
                                        std::uint64_t dropout_seed) {
  if (m.layers.empty()) throw ShapeError("mlp_forward: empty network");
  if (input.cols() != m.in_dim()) {
    throw ShapeError("mlp_forward: input width " + std::to_string(input.cols()) +
                     " != network input " + std::to_string(m.in_dim()));
  }
  MlpCache cache;
  cache.dims = m.dims();
  cache.version = m.version;
  const bool drop = train_mode && m.dropout > 0.0;
  Rng rng(dropout_seed);
  Matrix x = input;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const Linear& layer = m.layers[l];
    cache.inputs.push_back(x);
    Matrix z = x * layer.weight;
    z.rowwise() += layer.bias;
    if (l + 1 == m.layers.size()) {
      x = std::move(z);
      break;
    }
    x = z.unaryExpr([&](double v) { return activate(m.activation, v); });
    cache.pre.push_back(std::move(z));
    if (drop) {
      const double keep = 1.0 - m.dropout;
      Matrix mask(x.rows(), x.cols());
      for (Index i = 0; i < mask.size(); ++i) {
        mask.data()[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
      }
      x = x.cwiseProduct(mask);
      cache.masks.push_back(std::move(mask));
    }
  }
  cache.valid = true;
  return {std::move(x), std::move(cache)};
}

Matrix mlp_apply(const Mlp& m, const Matrix& input) { return mlp_forward(m, input).first; }

std::pair<Matrix, ParamGrads> mlp_backward(const Mlp& m, const MlpCache& cache,
                                           const Matrix& upstream) {
  if (!cache.valid) throw PreconditionError("mlp_backward: cache is not from a forward pass");
  if (cache.version != m.version || cache.dims != m.dims()) {
    throw PreconditionError("mlp_backward: stale cache (parameters changed since forward)");
  }
  ParamGrads grads = ParamGrads::zeros_like(m);
  Matrix g = upstream;
  for (std::size_t l = m.layers.size(); l-- > 0;) {
    if (l + 1 < m.layers.size()) {
      if (!cache.masks.empty()) g = g.cwiseProduct(cache.masks[l]);
      const Matrix& z = cache.pre[l];
      g = g.cwiseProduct(z.unaryExpr([&](double v) { return activate_grad(m.activation, v); }));
    }
    grads.weights[l].noalias() = cache.inputs[l].transpose() * g;
    grads.biases[l] = g.colwise().sum();
    g = (g * m.layers[l].weight.transpose()).eval();
  }
  return {std::move(g), std::move(grads)};
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LossResult weighted_bce_loss(const Vector& logits, std::span<const int> labels,
                             ClassWeights weights) {
  if (static_cast<std::size_t>(logits.size()) != labels.size()) {
    throw ShapeError("weighted_bce_loss: logits and labels differ in length");
  }
  LossResult r;
  r.logit_grads = Vector::Zero(logits.size());
  if (logits.size() == 0) return r;
  const auto n = static_cast<double>(logits.size());
  double total = 0.0;
  for (Index i = 0; i < logits.size(); ++i) {
    const double z = logits(i);
    const double y = labels[static_cast<std::size_t>(i)] != 0 ? 1.0 : 0.0;
    const double w = y > 0.5 ? weights.positive : weights.negative;
    total += w * (std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))));
    r.logit_grads(i) = w * (sigmoid(z) - y) / n;
  }
  r.loss = total / n;
  return r;
}

AdamState AdamState::for_mlp(const Mlp& m) {
  return AdamState{ParamGrads::zeros_like(m), ParamGrads::zeros_like(m), 0};
}

void adam_step(Mlp& m, const ParamGrads& grads, AdamState& state, double learning_rate,
               const AdamOptions& o) {
  if (grads.weights.size() != m.layers.size()) throw ShapeError("adam_step: shape mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  auto update = [&](auto& param, const auto& g, auto& m1, auto& m2) {
    m1 = o.beta1 * m1 + (1.0 - o.beta1) * g;
    m2 = o.beta2 * m2 + (1.0 - o.beta2) * g.cwiseProduct(g);
    param.array() -= learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + o.epsilon);
  };
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    update(m.layers[l].weight, grads.weights[l], state.first.weights[l], state.second.weights[l]);
    update(m.layers[l].bias, grads.biases[l], state.first.biases[l], state.second.biases[l]);
  }
  ++m.version;
}

nlohmann::json mlp_to_json(const Mlp& m) {
  nlohmann::json j;
  j["dims"] = m.dims();
  j["activation"] = to_string(m.activation);
  j["dropout"] = m.dropout;
  j["weights"] = nlohmann::json::array();
  j["biases"] = nlohmann::json::array();
  for (const auto& l : m.layers) {
    j["weights"].push_back(std::vector<double>(l.weight.data(), l.weight.data() + l.weight.size()));
    j["biases"].push_back(std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size()));
  }
  return j;
}

Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp m;
  const auto dims = j.at("dims").get<std::vector<std::int64_t>>();
  m.activation = parse_activation(j.at("activation").get<std::string>());
  m.dropout = j.at("dropout").get<double>();
  const auto& w = j.at("weights");
  const auto& b = j.at("biases");
  if (dims.size() < 2 || w.size() != dims.size() - 1 || b.size() != dims.size() - 1) {
    throw ShapeError("checkpoint: layer count does not match dims");
  }
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto wv = w[l].get<std::vector<double>>();
    const auto bv = b[l].get<std::vector<double>>();
    if (static_cast<std::int64_t>(wv.size()) != dims[l] * dims[l + 1] ||
        static_cast<std::int64_t>(bv.size()) != dims[l + 1]) {
      throw ShapeError("checkpoint: parameter array size does not match dims");
    }
    Linear layer{Matrix(dims[l], dims[l + 1]), RowVector(dims[l + 1])};
    std::copy(wv.begin(), wv.end(), layer.weight.data());
    std::copy(bv.begin(), bv.end(), layer.bias.data());
    m.layers.push_back(std::move(layer));
  }
  return m;
}

}  // namespace mega
