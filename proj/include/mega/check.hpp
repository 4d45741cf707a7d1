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

#ifndef MEGA_CHECK_HPP_
#define MEGA_CHECK_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mega/model.hpp"
#include "mega/nn.hpp"

namespace mega {

struct SuiteReport {
  std::string suite;
  bool passed = false;
  nlohmann::json details;

  nlohmann::json to_json() const;
};

struct CheckOptions {
  std::int64_t trials = 100;  // equivariance graphs
  std::int64_t witness_trials = 10;
  std::int64_t graphs = 200;  // node-id graphs
  std::int64_t gradient_graphs = 20;
  std::int64_t n_min = 4;  // witness star orders
  std::int64_t n_max = 10;
  std::vector<std::int64_t> sizes{1000, 10000, 100000};
  std::uint64_t seed = 0;
};

std::vector<std::string> suite_names();

/// Throws PreconditionError for an unknown suite name.
SuiteReport run_suite(const std::string& name, const CheckOptions& options);

SuiteReport check_equivariance(std::int64_t trials, std::uint64_t seed, double tolerance = 1e-5);
SuiteReport check_node_ids(std::int64_t graphs, std::uint64_t seed);
SuiteReport check_port_witness(std::int64_t n_min, std::int64_t n_max, std::int64_t trials);
SuiteReport check_separation();
SuiteReport check_gradients(std::int64_t graphs, std::uint64_t seed, double eps = 1e-5,
                            double tolerance = 1e-4);
SuiteReport check_complexity(const std::vector<std::int64_t>& sizes, std::uint64_t seed,
                             double tolerance = 0.05);

struct GradientComparison {
  std::vector<ParamGrads> analytic;
  std::vector<ParamGrads> numeric;
  double relative_error = 0;
};

/// Central differences of upstream . logits against model_backward.
GradientComparison compare_gradients(const ModelConfig& config, const ModelParams& params,
                                     const ModelInput& input, const Vector& upstream, double eps);

/// ||a - b|| / max(||b||, 1e-12) over matching matrices.
double relative_error(const Matrix& a, const Matrix& b);

/// Multigraph with `num_edges` edges, `multiplicity` parallel edges per
/// pair and `num_edges / (4 * multiplicity)` nodes.
Multigraph fixed_multiplicity_graph(std::int64_t num_edges, std::int64_t multiplicity,
                                    std::uint64_t seed);

}  // namespace mega

#endif  // MEGA_CHECK_HPP_
