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
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "mega/rng.hpp"

namespace mega {
namespace {

GroupedFeatures groups_of(const std::vector<std::vector<std::vector<double>>>& groups) {
  GroupedFeatures gf;
  std::int64_t rows = 0;
  const std::int64_t d = groups.front().front().size();
  for (const auto& g : groups) rows += static_cast<std::int64_t>(g.size());
  gf.values.resize(rows, d);
  std::int64_t r = 0;
  for (const auto& g : groups) {
    for (const auto& row : g) {
      for (std::int64_t c = 0; c < d; ++c) gf.values(r, c) = row[static_cast<std::size_t>(c)];
      ++r;
    }
    gf.offsets.push_back(r);
  }
  return gf;
}

// Straightforward per-group loops; independent of the library kernels.
double naive_stat(AggKind kind, const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double n = static_cast<double>(xs.size());
  switch (kind) {
    case AggKind::kSum: return sum;
    case AggKind::kMean: return sum / n;
    case AggKind::kMax: return *std::max_element(xs.begin(), xs.end());
    case AggKind::kMin: return *std::min_element(xs.begin(), xs.end());
    case AggKind::kStd: {
      const double mean = sum / n;
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      return std::sqrt(std::max(var / n, 0.0));
    }
    default: return 0.0;
  }
}

TEST(SegmentReduceTest, SumOfTwoRows) {
  const auto out = segment_reduce(AggSpec::single(AggKind::kSum), groups_of({{{1, 2}, {3, 4}}}));
  EXPECT_EQ(out(0, 0), 4.0);
  EXPECT_EQ(out(0, 1), 6.0);
}

TEST(SegmentReduceTest, SingletonGroupIsIdentityAndStdIsZero) {
  const auto gf = groups_of({{{7, -2}}});
  for (auto kind : {AggKind::kSum, AggKind::kMean, AggKind::kMax, AggKind::kMin}) {
    const auto out = segment_reduce(AggSpec::single(kind), gf);
    EXPECT_EQ(out(0, 0), 7.0);
    EXPECT_EQ(out(0, 1), -2.0);
  }
  const auto sd = segment_reduce(AggSpec::single(AggKind::kStd), gf);
  EXPECT_EQ(sd(0, 0), 0.0);
  EXPECT_EQ(sd(0, 1), 0.0);
}

TEST(SegmentReduceTest, PnaStatisticsFollowTheRequestedOrder) {
  AggSpec spec{AggKind::kPna,
               {PnaStatistic::kMean, PnaStatistic::kMax, PnaStatistic::kMin, PnaStatistic::kStd},
               {PnaScaler::kIdentity}};
  const auto out = segment_reduce(spec, groups_of({{{1}, {3}}}));
  ASSERT_EQ(out.cols(), 4);
  EXPECT_DOUBLE_EQ(out(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(out(0, 1), 3.0);
  EXPECT_DOUBLE_EQ(out(0, 2), 1.0);
  EXPECT_DOUBLE_EQ(out(0, 3), 1.0);
}

TEST(SegmentReduceTest, DefaultPnaLayoutIsStatisticsThenScalers) {
  const AggSpec spec = AggSpec::pna(std::numbers::ln2);
  // Group of size 3: amplification log(4)/log(2) = 2, attenuation 0.5.
  const auto out = segment_reduce(spec, groups_of({{{1}, {2}, {6}}}));
  ASSERT_EQ(out.cols(), 12);
  const double sd = std::sqrt(((1 - 3.0) * (1 - 3.0) + 1 + 9) / 3.0);
  const std::vector<double> stats{3.0, 1.0, 6.0, sd};
  const std::vector<double> scales{1.0, 2.0, 0.5};
  for (int c = 0; c < 3; ++c) {
    for (int s = 0; s < 4; ++s) EXPECT_NEAR(out(0, c * 4 + s), scales[c] * stats[s], 1e-12);
  }
}

TEST(SegmentReduceTest, ZeroVariance) {
  const auto out = segment_reduce(AggSpec::single(AggKind::kStd), groups_of({{{2}, {2}, {2}}}));
  EXPECT_EQ(out(0, 0), 0.0);
}

TEST(SegmentReduceTest, EmptyGroupOnlyAllowedForSum) {
  GroupedFeatures gf;
  gf.values.resize(0, 2);
  gf.offsets = {0, 0};
  EXPECT_THROW(segment_reduce(AggSpec::single(AggKind::kMax), gf), PreconditionError);
  const auto out = segment_reduce(AggSpec::single(AggKind::kSum), gf);
  EXPECT_EQ(out.row(0).squaredNorm(), 0.0);
}

TEST(SegmentReduceTest, PnaNeedsStatistics) {
  AggSpec spec{AggKind::kPna, {}, {PnaScaler::kIdentity}};
  EXPECT_THROW(spec.validate(), PreconditionError);
}

TEST(ReduceOrDefaultTest, NoGroupsGivesDefaultRows) {
  GroupedFeatures gf;
  gf.values.resize(0, 2);
  const auto out = reduce_or_default(AggSpec::single(AggKind::kMean), gf, 3);
  ASSERT_EQ(out.rows(), 3);
  EXPECT_EQ(out.squaredNorm(), 0.0);
}

TEST(ReduceOrDefaultTest, OnePopulatedTargetAmongTwo) {
  auto gf = groups_of({{{1, 1}, {3, 5}}});
  gf.targets = {1};
  RowVector fill(2);
  fill << -1, -1;
  const auto out = reduce_or_default(AggSpec::single(AggKind::kMax), gf, 2, fill);
  EXPECT_EQ(out.row(0), fill);
  EXPECT_EQ(out(1, 0), 3.0);
  EXPECT_EQ(out(1, 1), 5.0);
}

TEST(ReduceOrDefaultTest, SumMatchesScatterIntoZeros) {
  const auto gf = groups_of({{{1}, {2}}, {{5}}});
  GroupedFeatures with_empty = gf;
  with_empty.offsets = {0, 2, 2, 3};
  const auto dense = segment_reduce(AggSpec::single(AggKind::kSum), gf);
  const auto out = reduce_or_default(AggSpec::single(AggKind::kSum),
                                     GroupView{with_empty.values, {}, with_empty.offsets});
  EXPECT_EQ(out(0, 0), dense(0, 0));
  EXPECT_EQ(out(1, 0), 0.0);
  EXPECT_EQ(out(2, 0), dense(1, 0));
}

TEST(PnaScalersTest, FixedPoints) {
  auto s = pna_scalers(1, std::log(2.0));
  EXPECT_DOUBLE_EQ(s.amplification, 1.0);
  EXPECT_DOUBLE_EQ(s.attenuation, 1.0);
  s = pna_scalers(3, std::log(2.0));
  EXPECT_DOUBLE_EQ(s.amplification, 2.0);
  EXPECT_DOUBLE_EQ(s.attenuation, 0.5);
  s = pna_scalers(7, std::log(8.0));
  EXPECT_DOUBLE_EQ(s.amplification, 1.0);
  EXPECT_THROW(pna_scalers(0, 1.0), PreconditionError);
}

TEST(SegmentReduceProperty, MatchesNaiveLoopOn500RandomGroups) {
  Rng rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const auto size = static_cast<std::int64_t>(1 + rng.index(8));
    const auto d = static_cast<std::int64_t>(1 + rng.index(4));
    GroupedFeatures gf;
    gf.values.resize(size, d);
    for (Eigen::Index i = 0; i < gf.values.size(); ++i) gf.values.data()[i] = rng.normal();
    gf.offsets = {0, size};
    for (auto kind : {AggKind::kSum, AggKind::kMean, AggKind::kMax, AggKind::kMin, AggKind::kStd}) {
      const auto out = segment_reduce(AggSpec::single(kind), gf);
      for (std::int64_t c = 0; c < d; ++c) {
        std::vector<double> xs;
        for (std::int64_t r = 0; r < size; ++r) xs.push_back(gf.values(r, c));
        const double expected = naive_stat(kind, xs);
        if (kind == AggKind::kStd) {
          EXPECT_NEAR(out(0, c), expected, 1e-12);
        } else {
          EXPECT_EQ(out(0, c), expected) << "kind " << static_cast<int>(kind);
        }
      }
    }
  }
}

TEST(SegmentReduceProperty, WithinGroupShuffleInvariance) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto size = static_cast<std::int64_t>(1 + rng.index(10));
    const std::int64_t d = 3;
    Matrix values(size, d);
    for (Eigen::Index i = 0; i < values.size(); ++i) values.data()[i] = rng.normal();
    std::vector<std::int64_t> order(static_cast<std::size_t>(size));
    for (std::int64_t i = 0; i < size; ++i) order[static_cast<std::size_t>(i)] = i;
    std::vector<std::int64_t> shuffled = order;
    rng.shuffle(shuffled);
    const std::vector<std::int64_t> offsets{0, size};
    for (auto name : {"sum", "mean", "max", "min", "std", "pna"}) {
      const AggSpec spec = AggSpec::parse(name);
      const auto a = segment_reduce(spec, GroupView{values, order, offsets});
      const auto b = segment_reduce(spec, GroupView{values, shuffled, offsets});
      if (spec.kind == AggKind::kMax || spec.kind == AggKind::kMin) {
        EXPECT_EQ(a, b);
      } else {
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
          EXPECT_NEAR(a(0, c), b(0, c), 1e-6 * std::max(1.0, std::abs(a(0, c))));
        }
      }
    }
  }
}

// Groups {{5,1},{3,4}} and {{5,3},{1,4}}: same union, different pairing.
TEST(CompositionSeparation, TwoStageDistinguishesWhatSingleStageCannot) {
  const auto g1 = groups_of({{{5}, {1}}, {{3}, {4}}});
  const auto g2 = groups_of({{{5}, {3}}, {{1}, {4}}});
  auto single_stage = [](const GroupedFeatures& g, AggKind kind) {
    GroupedFeatures all = g;
    all.offsets = {0, g.values.rows()};
    return segment_reduce(AggSpec::single(kind), all)(0, 0);
  };
  auto max_of_sums = [](const GroupedFeatures& g) {
    GroupedFeatures sums;
    sums.values = segment_reduce(AggSpec::single(AggKind::kSum), g);
    sums.offsets = {0, sums.values.rows()};
    return segment_reduce(AggSpec::single(AggKind::kMax), sums)(0, 0);
  };
  EXPECT_EQ(single_stage(g1, AggKind::kSum), 13.0);
  EXPECT_EQ(single_stage(g2, AggKind::kSum), 13.0);
  EXPECT_EQ(single_stage(g1, AggKind::kMax), 5.0);
  EXPECT_EQ(single_stage(g2, AggKind::kMax), 5.0);
  EXPECT_EQ(max_of_sums(g1), 7.0);
  EXPECT_EQ(max_of_sums(g2), 8.0);
}

// Central differences of sum(upstream .* reduce(values)).
TEST(SegmentReduceBackward, MatchesFiniteDifferences) {
  Rng rng(17);
  for (const char* name : {"sum", "mean", "max", "min", "std", "pna"}) {
    const AggSpec spec = AggSpec::parse(name);
    Matrix values(9, 2);
    for (Eigen::Index i = 0; i < values.size(); ++i) values.data()[i] = rng.normal();
    const std::vector<std::int64_t> members{3, 0, 8, 1, 4, 6, 2, 5, 7};
    const std::vector<std::int64_t> offsets{0, 1, 4, 4, 9};
    const GroupView view{values, members, offsets};
    const Matrix out = reduce_or_default(spec, view);
    Matrix upstream(out.rows(), out.cols());
    for (Eigen::Index i = 0; i < upstream.size(); ++i) upstream.data()[i] = rng.normal();
    const Matrix grad = segment_reduce_backward(spec, view, out, upstream);
    const double eps = 1e-6;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      Matrix plus = values;
      Matrix minus = values;
      plus.data()[i] += eps;
      minus.data()[i] -= eps;
      const double fp = reduce_or_default(spec, GroupView{plus, members, offsets})
                            .cwiseProduct(upstream).sum();
      const double fm = reduce_or_default(spec, GroupView{minus, members, offsets})
                            .cwiseProduct(upstream).sum();
      EXPECT_NEAR(grad.data()[i], (fp - fm) / (2 * eps), 1e-6) << name << " entry " << i;
    }
  }
}

TEST(SegmentReduceBackward, MaxTieRoutesToFirstMember) {
  Matrix values(3, 1);
  values << 2, 2, 1;
  const std::vector<std::int64_t> members{1, 0, 2};
  const std::vector<std::int64_t> offsets{0, 3};
  const GroupView view{values, members, offsets};
  const AggSpec spec = AggSpec::single(AggKind::kMax);
  const Matrix out = segment_reduce(spec, view);
  const Matrix grad = segment_reduce_backward(spec, view, out, Matrix::Ones(1, 1));
  EXPECT_EQ(grad(1, 0), 1.0);
  EXPECT_EQ(grad(0, 0), 0.0);
  EXPECT_EQ(grad(2, 0), 0.0);
}

TEST(ReductionCounter, CountsElementVisits) {
  reset_reduction_ops();
  segment_reduce(AggSpec::single(AggKind::kSum), groups_of({{{1, 2}, {3, 4}}, {{5, 6}}}));
  EXPECT_EQ(reduction_ops(), 6u);
}

}  // namespace
}  // namespace mega
