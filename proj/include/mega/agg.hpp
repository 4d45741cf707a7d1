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

#ifndef MEGA_AGG_HPP_
#define MEGA_AGG_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mega/common.hpp"

namespace mega {

enum class AggKind { kSum, kMean, kMax, kMin, kStd, kPna };
enum class PnaStatistic { kMean, kMin, kMax, kStd };
enum class PnaScaler { kIdentity, kAmplification, kAttenuation };

/// Choice of permutation-invariant reduction. For kPna the output is the
/// concatenation, for each scaler in `scalers` order, of the statistics in
/// `statistics` order, each block scaled by that scaler.
struct AggSpec {
  AggKind kind = AggKind::kSum;
  std::vector<PnaStatistic> statistics;
  std::vector<PnaScaler> scalers;
  // Average of log(degree + 1) over the training graph; only read by the
  // amplification/attenuation scalers.
  double mean_log_degree = std::numbers::ln2;

  static AggSpec single(AggKind kind) { return AggSpec{kind, {}, {}}; }
  /// mean,min,max,std with identity,amplification,attenuation.
  static AggSpec pna(double mean_log_degree = std::numbers::ln2);

  /// Throws PreconditionError for an empty PNA statistic set or a
  /// non-positive mean_log_degree.
  void validate() const;
  std::int64_t output_width(std::int64_t d) const;

  std::string name() const;
  /// Accepts sum, mean, max, min, std, pna.
  static AggSpec parse(std::string_view name);

  friend bool operator==(const AggSpec&, const AggSpec&) = default;
};

/// Feature rows laid out group by group: group s owns rows
/// [offsets[s], offsets[s+1]). `targets`, when non-empty, names the output
/// row each group reduces into for reduce_or_default.
struct GroupedFeatures {
  Matrix values;
  std::vector<std::int64_t> offsets{0};
  std::vector<std::int64_t> targets;

  std::int64_t num_groups() const { return static_cast<std::int64_t>(offsets.size()) - 1; }

  /// Stable gather of `rows` by a CSR member list.
  static GroupedFeatures gather(const Matrix& rows, std::span<const std::int64_t> members,
                                std::span<const std::int64_t> offsets);
};

/// Indexed view used by the message-passing layers: group s consists of
/// rows values[members[offsets[s]] .. members[offsets[s+1]-1]]. An empty
/// `members` span means rows are already contiguous.
struct GroupView {
  const Matrix& values;
  std::span<const std::int64_t> members;
  std::span<const std::int64_t> offsets;

  std::int64_t num_groups() const { return static_cast<std::int64_t>(offsets.size()) - 1; }
  std::int64_t size(std::int64_t s) const {
    return offsets[static_cast<std::size_t>(s) + 1] - offsets[static_cast<std::size_t>(s)];
  }
  std::int64_t row(std::int64_t position) const {
    return members.empty() ? position : members[static_cast<std::size_t>(position)];
  }
};

/// Reduces every group. Empty groups are only allowed for kSum (zero row).
/// `degrees` overrides the group sizes fed to the PNA scalers.
Matrix segment_reduce(const AggSpec& spec, const GroupedFeatures& gf,
                      std::optional<std::span<const double>> degrees = std::nullopt);
Matrix segment_reduce(const AggSpec& spec, const GroupView& view,
                      std::optional<std::span<const double>> degrees = std::nullopt);

/// Like segment_reduce, but empty groups produce `default_row` (zeros when
/// omitted). With gf.targets set, group s lands in row targets[s] of a
/// [num_groups_total x d'] result; rows without a group get the default.
Matrix reduce_or_default(const AggSpec& spec, const GroupedFeatures& gf,
                         std::int64_t num_groups_total,
                         std::optional<RowVector> default_row = std::nullopt);
Matrix reduce_or_default(const AggSpec& spec, const GroupView& view,
                         std::optional<RowVector> default_row = std::nullopt);

/// Adjoint of reduce_or_default over an indexed view. `output` is the
/// forward result, `upstream` its gradient. Returns a matrix shaped like
/// view.values holding the gradient routed to each member row; rows not
/// referenced by any group stay zero. Max/min route to the first member
/// attaining the extreme.
Matrix segment_reduce_backward(const AggSpec& spec, const GroupView& view, const Matrix& output,
                               const Matrix& upstream);

struct PnaScales {
  double amplification;
  double attenuation;
};

/// log(degree+1)/mean_log_degree and its reciprocal.
PnaScales pna_scalers(std::int64_t degree, double mean_log_degree);

/// Mean of log(size+1) over non-empty groups; ln 2 when there are none.
double mean_log_degree(std::span<const std::int64_t> offsets);

/// Number of scalar element visits performed by forward reductions since
/// the last reset (sum over groups of size x width). Used to check the
/// linear-cost contract; thread-safe.
std::uint64_t reduction_ops();
void reset_reduction_ops();

}  // namespace mega

#endif  // MEGA_AGG_HPP_
