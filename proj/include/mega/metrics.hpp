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

#ifndef MEGA_METRICS_HPP_
#define MEGA_METRICS_HPP_

#include <cstdint>
#include <span>

namespace mega {

/// Positive-class metrics. Undefined ratios (no predicted or no actual
/// positives) are reported as 0.
struct BinaryMetrics {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double pr_auc = 0;
};

double f1_from(double precision, double recall);

/// Area under the precision-recall curve by the trapezoid rule over all
/// distinct score thresholds, starting from (recall 0, precision 1).
double pr_auc(std::span<const double> scores, std::span<const int> labels);

/// A sample is predicted positive when its score exceeds `threshold`.
BinaryMetrics binary_metrics(std::span<const double> scores, std::span<const int> labels,
                             double threshold = 0.0);

}  // namespace mega

#endif  // MEGA_METRICS_HPP_
