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

#include "mega/agg.hpp"

#include <algorithm>
#include <atomic>
#include <limits>

namespace mega {
namespace {

std::atomic<std::uint64_t> g_reduction_ops{0};

using Index = Eigen::Index;

enum class Stat { kSum, kMean, kMax, kMin, kStd };

Stat stat_of(PnaStatistic s) {
  switch (s) {
    case PnaStatistic::kMean: return Stat::kMean;
    case PnaStatistic::kMin: return Stat::kMin;
    case PnaStatistic::kMax: return Stat::kMax;
    case PnaStatistic::kStd: return Stat::kStd;
  }
  return Stat::kMean;
}

Stat stat_of(AggKind k) {
  switch (k) {
    case AggKind::kSum: return Stat::kSum;
    case AggKind::kMean: return Stat::kMean;
    case AggKind::kMax: return Stat::kMax;
    case AggKind::kMin: return Stat::kMin;
    case AggKind::kStd: return Stat::kStd;
    case AggKind::kPna: break;
  }
  throw PreconditionError("pna is not a single statistic");
}

// Writes the statistic of group s into out(row, col0 .. col0+d).
void reduce_group(Stat stat, const GroupView& v, std::int64_t s, Matrix& out, Index row,
                  Index col0) {
  const Index d = v.values.cols();
  const auto begin = v.offsets[static_cast<std::size_t>(s)];
  const auto end = v.offsets[static_cast<std::size_t>(s) + 1];
  const auto n = static_cast<double>(end - begin);
  auto dst = out.row(row).segment(col0, d);
  switch (stat) {
    case Stat::kSum:
    case Stat::kMean: {
      dst.setZero();
      for (auto p = begin; p < end; ++p) dst += v.values.row(v.row(p));
      if (stat == Stat::kMean) dst /= n;
      break;
    }
    case Stat::kMax: {
      dst = v.values.row(v.row(begin));
      for (auto p = begin + 1; p < end; ++p) dst = dst.cwiseMax(v.values.row(v.row(p)));
      break;
    }
    case Stat::kMin: {
      dst = v.values.row(v.row(begin));
      for (auto p = begin + 1; p < end; ++p) dst = dst.cwiseMin(v.values.row(v.row(p)));
      break;
    }
    case Stat::kStd: {
      RowVector mean = RowVector::Zero(d);
      for (auto p = begin; p < end; ++p) mean += v.values.row(v.row(p));
      mean /= n;
      RowVector var = RowVector::Zero(d);
      for (auto p = begin; p < end; ++p) {
        var += (v.values.row(v.row(p)) - mean).array().square().matrix();
      }
      var /= n;
      dst = var.cwiseMax(0.0).cwiseSqrt();
      break;
    }
  }
}

double scale_value(PnaScaler scaler, std::int64_t degree, double mean_log_degree) {
  if (scaler == PnaScaler::kIdentity) return 1.0;
  const PnaScales s = pna_scalers(degree, mean_log_degree);
  return scaler == PnaScaler::kAmplification ? s.amplification : s.attenuation;
}

std::int64_t degree_of(const GroupView& v, std::int64_t s,
                       const std::optional<std::span<const double>>& degrees) {
  if (degrees) return static_cast<std::int64_t>(std::llround((*degrees)[static_cast<std::size_t>(s)]));
  return v.size(s);
}

// Reduces group s into row `row` of out; the group must be non-empty
// unless the reduction is a plain sum.
void reduce_into(const AggSpec& spec, const GroupView& v, std::int64_t s, Matrix& out, Index row,
                 const std::optional<std::span<const double>>& degrees) {
  const Index d = v.values.cols();
  g_reduction_ops.fetch_add(static_cast<std::uint64_t>(v.size(s) * d), std::memory_order_relaxed);
  if (spec.kind != AggKind::kPna) {
    reduce_group(stat_of(spec.kind), v, s, out, row, 0);
    return;
  }
  const auto nstat = static_cast<Index>(spec.statistics.size());
  for (Index b = 0; b < nstat; ++b) {
    reduce_group(stat_of(spec.statistics[static_cast<std::size_t>(b)]), v, s, out, row, b * d);
  }
  const std::int64_t degree = degree_of(v, s, degrees);
  const Index block = nstat * d;
  // Scaler 0 is computed in place; later blocks copy and scale it.
  for (std::size_t c = spec.scalers.size(); c-- > 0;) {
    const double scale = scale_value(spec.scalers[c], degree, spec.mean_log_degree);
    out.row(row).segment(static_cast<Index>(c) * block, block) =
        scale * out.row(row).segment(0, block);
  }
}

void require_nonempty(const AggSpec& spec, const GroupView& v, std::int64_t s) {
  if (v.size(s) == 0 && spec.kind != AggKind::kSum) {
    throw PreconditionError("segment_reduce: empty group " + std::to_string(s) + " for " +
                            spec.name());
  }
}

void check_view(const GroupView& v) {
  if (v.offsets.empty()) throw PreconditionError("segment_reduce: offsets must not be empty");
  if (v.offsets.front() != 0) throw PreconditionError("segment_reduce: offsets must start at 0");
  for (std::size_t i = 1; i < v.offsets.size(); ++i) {
    if (v.offsets[i] < v.offsets[i - 1]) {
      throw PreconditionError("segment_reduce: offsets must be non-decreasing");
    }
  }
  const auto total = v.offsets.back();
  if (v.members.empty()) {
    if (total != v.values.rows()) {
      throw PreconditionError("segment_reduce: offsets do not cover the value rows");
    }
  } else if (static_cast<std::int64_t>(v.members.size()) != total) {
    throw PreconditionError("segment_reduce: member list does not match offsets");
  }
}

// Backward of one statistic for group s. grad_out is the d-wide slice of
// the upstream gradient for this statistic, already multiplied by the
// scaler; `value` is the forward statistic.
void backward_group(Stat stat, const GroupView& v, std::int64_t s,
                    const Eigen::Ref<const RowVector>& value,
                    const Eigen::Ref<const RowVector>& grad_out, Matrix& grad_in) {
  const Index d = v.values.cols();
  const auto begin = v.offsets[static_cast<std::size_t>(s)];
  const auto end = v.offsets[static_cast<std::size_t>(s) + 1];
  if (begin == end) return;
  const auto n = static_cast<double>(end - begin);
  switch (stat) {
    case Stat::kSum:
      for (auto p = begin; p < end; ++p) grad_in.row(v.row(p)) += grad_out;
      break;
    case Stat::kMean:
      for (auto p = begin; p < end; ++p) grad_in.row(v.row(p)) += grad_out / n;
      break;
    case Stat::kMax:
    case Stat::kMin:
      for (Index c = 0; c < d; ++c) {
        for (auto p = begin; p < end; ++p) {
          if (v.values(v.row(p), c) == value(c)) {
            grad_in(v.row(p), c) += grad_out(c);
            break;
          }
        }
      }
      break;
    case Stat::kStd: {
      RowVector mean = RowVector::Zero(d);
      for (auto p = begin; p < end; ++p) mean += v.values.row(v.row(p));
      mean /= n;
      for (Index c = 0; c < d; ++c) {
        if (!(value(c) > 0.0)) continue;
        const double coef = grad_out(c) / (n * value(c));
        for (auto p = begin; p < end; ++p) {
          grad_in(v.row(p), c) += coef * (v.values(v.row(p), c) - mean(c));
        }
      }
      break;
    }
  }
}

}  // namespace

AggSpec AggSpec::pna(double mean_log_degree) {
  return AggSpec{AggKind::kPna,
                 {PnaStatistic::kMean, PnaStatistic::kMin, PnaStatistic::kMax, PnaStatistic::kStd},
                 {PnaScaler::kIdentity, PnaScaler::kAmplification, PnaScaler::kAttenuation},
                 mean_log_degree};
}

void AggSpec::validate() const {
  if (kind == AggKind::kPna) {
    if (statistics.empty()) throw PreconditionError("pna aggregation needs at least one statistic");
    if (scalers.empty()) throw PreconditionError("pna aggregation needs at least one scaler");
    if (!(mean_log_degree > 0.0) || !std::isfinite(mean_log_degree)) {
      throw PreconditionError("pna mean_log_degree must be positive and finite");
    }
  }
}

std::int64_t AggSpec::output_width(std::int64_t d) const {
  if (kind != AggKind::kPna) return d;
  return d * static_cast<std::int64_t>(statistics.size() * scalers.size());
}

std::string AggSpec::name() const {
  switch (kind) {
    case AggKind::kSum: return "sum";
    case AggKind::kMean: return "mean";
    case AggKind::kMax: return "max";
    case AggKind::kMin: return "min";
    case AggKind::kStd: return "std";
    case AggKind::kPna: return "pna";
  }
  return "?";
}

AggSpec AggSpec::parse(std::string_view name) {
  if (name == "sum") return single(AggKind::kSum);
  if (name == "mean") return single(AggKind::kMean);
  if (name == "max") return single(AggKind::kMax);
  if (name == "min") return single(AggKind::kMin);
  if (name == "std") return single(AggKind::kStd);
  if (name == "pna") return pna();
  throw PreconditionError("unknown aggregation '" + std::string(name) + "'");
}

GroupedFeatures GroupedFeatures::gather(const Matrix& rows, std::span<const std::int64_t> members,
                                        std::span<const std::int64_t> offsets) {
  GroupedFeatures gf;
  gf.values.resize(static_cast<Index>(members.size()), rows.cols());
  for (std::size_t p = 0; p < members.size(); ++p) {
    gf.values.row(static_cast<Index>(p)) = rows.row(members[p]);
  }
  gf.offsets.assign(offsets.begin(), offsets.end());
  return gf;
}

Matrix segment_reduce(const AggSpec& spec, const GroupView& view,
                      std::optional<std::span<const double>> degrees) {
  spec.validate();
  check_view(view);
  const auto groups = view.num_groups();
  Matrix out(groups, spec.output_width(view.values.cols()));
  for (std::int64_t s = 0; s < groups; ++s) {
    require_nonempty(spec, view, s);
    reduce_into(spec, view, s, out, s, degrees);
  }
  return out;
}

Matrix segment_reduce(const AggSpec& spec, const GroupedFeatures& gf,
                      std::optional<std::span<const double>> degrees) {
  return segment_reduce(spec, GroupView{gf.values, {}, gf.offsets}, degrees);
}

Matrix reduce_or_default(const AggSpec& spec, const GroupView& view,
                         std::optional<RowVector> default_row) {
  spec.validate();
  check_view(view);
  const Index width = spec.output_width(view.values.cols());
  if (default_row && default_row->size() != width) {
    throw ShapeError("reduce_or_default: default row has the wrong width");
  }
  Matrix out(view.num_groups(), width);
  for (std::int64_t s = 0; s < view.num_groups(); ++s) {
    if (view.size(s) == 0) {
      if (default_row) {
        out.row(s) = *default_row;
      } else {
        out.row(s).setZero();
      }
    } else {
      reduce_into(spec, view, s, out, s, std::nullopt);
    }
  }
  return out;
}

Matrix reduce_or_default(const AggSpec& spec, const GroupedFeatures& gf,
                         std::int64_t num_groups_total, std::optional<RowVector> default_row) {
  spec.validate();
  const GroupView view{gf.values, {}, gf.offsets};
  check_view(view);
  const Index width = spec.output_width(gf.values.cols());
  if (default_row && default_row->size() != width) {
    throw ShapeError("reduce_or_default: default row has the wrong width");
  }
  const RowVector fill = default_row ? *default_row : RowVector::Zero(width);
  Matrix out(num_groups_total, width);
  for (Index r = 0; r < num_groups_total; ++r) out.row(r) = fill;
  if (!gf.targets.empty() && gf.num_groups() != static_cast<std::int64_t>(gf.targets.size())) {
    throw PreconditionError("reduce_or_default: one target per group required");
  }
  if (gf.targets.empty() && gf.num_groups() > num_groups_total) {
    throw PreconditionError("reduce_or_default: more groups than output rows");
  }
  for (std::int64_t s = 0; s < gf.num_groups(); ++s) {
    const Index row = gf.targets.empty() ? s : gf.targets[static_cast<std::size_t>(s)];
    if (row < 0 || row >= num_groups_total) {
      throw PreconditionError("reduce_or_default: group target out of range");
    }
    if (view.size(s) > 0) reduce_into(spec, view, s, out, row, std::nullopt);
  }
  return out;
}

Matrix segment_reduce_backward(const AggSpec& spec, const GroupView& view, const Matrix& output,
                               const Matrix& upstream) {
  const Index d = view.values.cols();
  Matrix grad = Matrix::Zero(view.values.rows(), d);
  for (std::int64_t s = 0; s < view.num_groups(); ++s) {
    if (view.size(s) == 0) continue;
    if (spec.kind != AggKind::kPna) {
      backward_group(stat_of(spec.kind), view, s, output.row(s), upstream.row(s), grad);
      continue;
    }
    const auto nstat = static_cast<Index>(spec.statistics.size());
    const Index block = nstat * d;
    // Un-scaled statistics live in the identity block if present;
    // otherwise recover them from block 0 by dividing out its scale.
    const std::int64_t degree = view.size(s);
    const double scale0 = scale_value(spec.scalers.front(), degree, spec.mean_log_degree);
    RowVector stats = output.row(s).segment(0, block) / scale0;
    RowVector grad_stats = RowVector::Zero(block);
    for (std::size_t c = 0; c < spec.scalers.size(); ++c) {
      const double scale = scale_value(spec.scalers[c], degree, spec.mean_log_degree);
      grad_stats += scale * upstream.row(s).segment(static_cast<Index>(c) * block, block);
    }
    for (Index b = 0; b < nstat; ++b) {
      backward_group(stat_of(spec.statistics[static_cast<std::size_t>(b)]), view, s,
                     stats.segment(b * d, d), grad_stats.segment(b * d, d), grad);
    }
  }
  return grad;
}

PnaScales pna_scalers(std::int64_t degree, double mean_log_degree) {
  if (degree < 1) throw PreconditionError("pna_scalers: degree must be >= 1");
  if (!(mean_log_degree > 0.0)) throw PreconditionError("pna_scalers: mean_log_degree must be > 0");
  const double amp = std::log(static_cast<double>(degree) + 1.0) / mean_log_degree;
  return {amp, 1.0 / amp};
}

double mean_log_degree(std::span<const std::int64_t> offsets) {
  double total = 0.0;
  std::int64_t count = 0;
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const auto size = offsets[s + 1] - offsets[s];
    if (size > 0) {
      total += std::log(static_cast<double>(size) + 1.0);
      ++count;
    }
  }
  return count == 0 ? std::numbers::ln2 : total / static_cast<double>(count);
}

std::uint64_t reduction_ops() { return g_reduction_ops.load(std::memory_order_relaxed); }
void reset_reduction_ops() { g_reduction_ops.store(0, std::memory_order_relaxed); }

}  // namespace mega
