// Copyright 2026 The sadrec Authors.
//
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

// Leave-one-interaction-out evaluation: rating consistency of predicted
// pairwise preferences and hit ratios for two pairwise ranking rules.

#ifndef SADREC_EVALUATION_HPP_
#define SADREC_EVALUATION_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sadrec/dataset.hpp"
#include "sadrec/error.hpp"
#include "sadrec/model.hpp"

namespace sadrec {

inline constexpr Index kDefaultHitThreshold = 20;

struct ConsistencyReport {
  double mean_preference = 0.0;
  double match_fraction = 0.0;
  double per_user_match_median = 0.0;
  Index users_evaluated = 0;      // users with at least one ordered pair
  Index users_without_pairs = 0;  // holdout users whose pairs were all ties
  Index pairs_evaluated = 0;
  Index pairs_skipped = 0;        // rating ties
};

struct EvalReport {
  std::uint64_t split_seed = 0;
  ConsistencyReport consistency;
  double hit_ratio_m1 = 0.0;
  double hit_ratio_m2 = 0.0;
  Index users_ranked = 0;
};

// Visits every (user, holdout o, train item j) pair with a strict rating
// order, oriented so the higher-rated item comes first:
// fn(u, preferred, other). Returns the number of tied pairs skipped.
template <typename Fn>
Index for_each_ordered_pair(const LooSplit& split, Fn&& fn) {
  Index ties = 0;
  for (Index u = 0; u < split.train.n_users(); ++u) {
    const auto& held = split.holdout[u];
    if (!held) continue;
    if (!held->rating) {
      throw ContractError("consistency: holdout of user '" + split.train.user_id(u) +
                          "' has no rating");
    }
    for (const Interaction& x : split.train.interactions(u)) {
      if (!x.rating) {
        throw ContractError("consistency: train item of user '" +
                            split.train.user_id(u) + "' has no rating");
      }
      if (*x.rating == *held->rating) {
        ++ties;
      } else if (*held->rating > *x.rating) {
        fn(u, held->item, x.item);
      } else {
        fn(u, x.item, held->item);
      }
    }
  }
  return ties;
}

inline double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid),
                   values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower =
      *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

// Mean oriented preference, fraction of oriented preferences > 0, and the
// median of per-user match fractions. Tied pairs carry no order and are
// excluded from every numerator and denominator.
inline ConsistencyReport consistency_report(const FactorModel& model,
                                            const LooSplit& split) {
  ConsistencyReport report;
  const auto n_users = static_cast<std::size_t>(split.train.n_users());
  std::vector<Index> user_pairs(n_users, 0);
  std::vector<Index> user_matches(n_users, 0);
  double sum_preference = 0.0;
  Index matches = 0;
  report.pairs_skipped = for_each_ordered_pair(split, [&](Index u, Index a, Index b) {
    const double x = preference(model, u, a, b);
    sum_preference += x;
    const bool match = x > 0.0;
    matches += match;
    ++user_pairs[u];
    user_matches[u] += match;
    ++report.pairs_evaluated;
  });
  std::vector<double> per_user;
  for (std::size_t u = 0; u < n_users; ++u) {
    if (!split.holdout[u]) continue;
    if (user_pairs[u] == 0) {
      ++report.users_without_pairs;
      continue;
    }
    per_user.push_back(static_cast<double>(user_matches[u]) /
                       static_cast<double>(user_pairs[u]));
  }
  report.users_evaluated = static_cast<Index>(per_user.size());
  if (report.pairs_evaluated > 0) {
    report.mean_preference = sum_preference / static_cast<double>(report.pairs_evaluated);
    report.match_fraction =
        static_cast<double>(matches) / static_cast<double>(report.pairs_evaluated);
  }
  report.per_user_match_median = median(std::move(per_user));
  return report;
}

// M1: number of test negatives j strictly preferred over the holdout o.
inline Index rank_m1(const FactorModel& model, Index u, Index holdout,
                     std::span<const Index> negatives) {
  Index rank = 0;
  for (Index j : negatives) rank += preference(model, u, j, holdout) > 0.0;
  return rank;
}

// M2 score: fraction of the user's training items that t beats.
inline double score_m2(const FactorModel& model, Index u, Index t,
                       std::span<const Index> train_items) {
  if (train_items.empty()) {
    throw ContractError("score_m2: user " + std::to_string(u) + " has no training items");
  }
  Index wins = 0;
  for (Index i : train_items) wins += preference(model, u, t, i) > 0.0;
  return static_cast<double>(wins) / static_cast<double>(train_items.size());
}

// M2 rank: number of test negatives with a strictly higher score than o.
inline Index rank_m2(const FactorModel& model, Index u, Index holdout,
                     std::span<const Index> negatives,
                     std::span<const Index> train_items) {
  const double target = score_m2(model, u, holdout, train_items);
  Index rank = 0;
  for (Index j : negatives) rank += score_m2(model, u, j, train_items) > target;
  return rank;
}

// Fraction of ranks strictly below `threshold` (inside the top `threshold`).
inline double hit_ratio(std::span<const Index> ranks,
                        Index threshold = kDefaultHitThreshold) {
  if (ranks.empty()) throw ContractError("hit_ratio: no ranks");
  const auto hits = std::count_if(ranks.begin(), ranks.end(),
                                  [threshold](Index r) { return r < threshold; });
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

struct SplitRanks {
  std::vector<Index> m1;
  std::vector<Index> m2;
};

inline SplitRanks rank_holdouts(const FactorModel& model, const LooSplit& split) {
  SplitRanks ranks;
  std::vector<Index> train_items;
  for (Index u = 0; u < split.train.n_users(); ++u) {
    const auto& held = split.holdout[u];
    if (!held) continue;
    train_items.clear();
    for (const auto& x : split.train.interactions(u)) train_items.push_back(x.item);
    const auto& negatives = split.test_negatives[u];
    ranks.m1.push_back(rank_m1(model, u, held->item, negatives));
    ranks.m2.push_back(rank_m2(model, u, held->item, negatives, train_items));
  }
  return ranks;
}

inline EvalReport evaluate_split(const FactorModel& model, const LooSplit& split,
                                 Index threshold = kDefaultHitThreshold) {
  if (model.n_users() != split.train.n_users() ||
      model.n_items() != split.train.n_items()) {
    throw ContractError("evaluate_split: model shape does not match the split");
  }
  EvalReport report;
  report.split_seed = split.seed;
  report.consistency = consistency_report(model, split);
  const SplitRanks ranks = rank_holdouts(model, split);
  report.users_ranked = static_cast<Index>(ranks.m1.size());
  if (!ranks.m1.empty()) {
    report.hit_ratio_m1 = hit_ratio(ranks.m1, threshold);
    report.hit_ratio_m2 = hit_ratio(ranks.m2, threshold);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Output.

inline constexpr const char* kEvalRowHeader =
    "split_seed,mean_x,match,per_user_median,hr_m1,hr_m2,users,pairs,skipped";

inline void write_eval_row(std::ostream& os, const EvalReport& r) {
  char buffer[256];
  std::snprintf(buffer, sizeof(buffer), "%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%lld,%lld,%lld\n",
                static_cast<unsigned long long>(r.split_seed),
                r.consistency.mean_preference, r.consistency.match_fraction,
                r.consistency.per_user_match_median, r.hit_ratio_m1, r.hit_ratio_m2,
                static_cast<long long>(r.consistency.users_evaluated),
                static_cast<long long>(r.consistency.pairs_evaluated),
                static_cast<long long>(r.consistency.pairs_skipped));
  os << buffer;
}

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

inline MeanSd mean_sd(std::span<const double> values) {
  MeanSd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

struct EvalAggregate {
  MeanSd mean_x, match, per_user, m1, m2;
  std::size_t n_splits = 0;
};

inline EvalAggregate aggregate(std::span<const EvalReport> reports) {
  std::vector<double> mean_x, match, per_user, m1, m2;
  for (const auto& r : reports) {
    mean_x.push_back(r.consistency.mean_preference);
    match.push_back(r.consistency.match_fraction);
    per_user.push_back(r.consistency.per_user_match_median);
    m1.push_back(r.hit_ratio_m1);
    m2.push_back(r.hit_ratio_m2);
  }
  return {mean_sd(mean_x), mean_sd(match), mean_sd(per_user), mean_sd(m1), mean_sd(m2),
          reports.size()};
}

// Aggregate row in table form: mean x, then percentages for match,
// per-user median, M1 and M2, each as mean +- sd across splits.
inline void write_aggregate_table(std::ostream& os, const std::string& label,
                                  const EvalAggregate& a) {
  char buffer[512];
  os << "model | mean x_uij | match (%) | per user (%) | M1 (%) | M2 (%)\n";
  std::snprintf(buffer, sizeof(buffer),
                "%s | %.3f +- %.3f | %.1f +- %.1f | %.1f +- %.1f | %.1f +- %.1f | "
                "%.1f +- %.1f\n",
                label.c_str(), a.mean_x.mean, a.mean_x.sd, 100 * a.match.mean,
                100 * a.match.sd, 100 * a.per_user.mean, 100 * a.per_user.sd,
                100 * a.m1.mean, 100 * a.m1.sd, 100 * a.m2.mean, 100 * a.m2.sd);
  os << buffer;
}

}  // namespace sadrec

#endif  // SADREC_EVALUATION_HPP_
