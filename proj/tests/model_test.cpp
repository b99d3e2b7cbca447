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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include <gtest/gtest.h>

#include "sadrec/model.hpp"
#include "test_util.hpp"

namespace sadrec {
namespace {

using testing::naive_log_bernoulli;
using testing::naive_preference;
using testing::random_model;

// k = 1, xi = 2, eta = (1, 0.5), tau = (1, 2).
FactorModel hand_model() {
  Matrix xi(1, 1), eta(1, 2), tau(1, 2);
  xi << 2.0;
  eta << 1.0, 0.5;
  tau << 1.0, 2.0;
  return FactorModel(xi, eta, tau);
}

TEST(Preference, HandEvaluation) {
  const FactorModel model = hand_model();
  // 2 * 1 * 2 - 2 * 0.5 * 1
  EXPECT_DOUBLE_EQ(preference(model, 0, 0, 1), 3.0);
  EXPECT_DOUBLE_EQ(preference(model, 0, 1, 0), -3.0);
}

TEST(Preference, DiagonalIsZero) {
  const FactorModel model = random_model(4, 9, 5, 1);
  for (Index u = 0; u < 4; ++u) {
    for (Index i = 0; i < 9; ++i) EXPECT_EQ(preference(model, u, i, i), 0.0);
  }
}

TEST(Preference, AntiSymmetricExactly) {
  const FactorModel model = random_model(5, 12, 6, 2);
  for (Index u = 0; u < 5; ++u) {
    for (Index i = 0; i < 12; ++i) {
      for (Index j = 0; j < 12; ++j) {
        EXPECT_EQ(preference(model, u, i, j), -preference(model, u, j, i));
      }
    }
  }
}

TEST(Preference, MatchesNaiveSum) {
  const FactorModel model = random_model(3, 8, 4, 3);
  for (Index u = 0; u < 3; ++u) {
    for (Index i = 0; i < 8; ++i) {
      for (Index j = 0; j < 8; ++j) {
        EXPECT_NEAR(preference(model, u, i, j), naive_preference(model, u, i, j), 1e-12);
      }
    }
  }
}

TEST(Preference, ReducesToBprWhenTIsOne) {
  FactorModel model = random_model(3, 10, 4, 4);
  model.right_item_factors().setOnes();
  for (Index u = 0; u < 3; ++u) {
    const auto xi = model.user_factors().col(u);
    for (Index i = 0; i < 10; ++i) {
      for (Index j = 0; j < 10; ++j) {
        const double bpr = xi.dot(model.left_item_factors().col(i)) -
                           xi.dot(model.left_item_factors().col(j));
        EXPECT_NEAR(preference(model, u, i, j), bpr, 1e-12);
      }
    }
  }
}

TEST(Preference, RejectsOutOfRangeIndices) {
  const FactorModel model = random_model(2, 3, 2, 5);
  EXPECT_THROW(preference(model, 2, 0, 1), IndexError);
  EXPECT_THROW(preference(model, 0, 3, 1), IndexError);
  EXPECT_THROW(preference(model, 0, 0, -1), IndexError);
  EXPECT_THROW(prob_prefer(model, -1, 0, 1), IndexError);
}

TEST(FactorModel, ConstructorValidates) {
  Matrix xi = Matrix::Zero(2, 3), eta = Matrix::Zero(2, 4), tau = Matrix::Ones(2, 4);
  EXPECT_NO_THROW(FactorModel(xi, eta, tau));
  EXPECT_THROW(FactorModel(xi, eta, Matrix::Ones(3, 4)), ContractError);
  EXPECT_THROW(FactorModel(xi, eta, Matrix::Ones(2, 5)), ContractError);
  tau(1, 2) = -0.1;
  EXPECT_THROW(FactorModel(xi, eta, tau), ContractError);
}

TEST(Sigmoid, KnownValues) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(3.0), 0.9525741268224334, 1e-15);
  EXPECT_NEAR(prob_prefer(hand_model(), 0, 0, 1), 0.9525741268224334, 1e-15);
}

TEST(Sigmoid, StableAtExtremes) {
  EXPECT_EQ(sigmoid(800.0), 1.0);
  EXPECT_EQ(sigmoid(-800.0), 0.0);
  EXPECT_NEAR(log_sigmoid(-800.0), -800.0, 1e-9);
  EXPECT_NEAR(log_sigmoid(800.0), 0.0, 1e-300);
  EXPECT_TRUE(std::isfinite(log_sigmoid(-1e6)));
}

TEST(ProbPrefer, ComplementSumsToOne) {
  const FactorModel model = random_model(4, 10, 5, 6, 3.0);
  for (Index u = 0; u < 4; ++u) {
    for (Index i = 0; i < 10; ++i) {
      for (Index j = 0; j < 10; ++j) {
        EXPECT_NEAR(prob_prefer(model, u, i, j) + prob_prefer(model, u, j, i), 1.0, 1e-15);
      }
    }
  }
}

TEST(UserSlice, HandModel) {
  const Matrix slice = user_slice(hand_model(), 0);
  Matrix expected(2, 2);
  expected << 0.0, 3.0, -3.0, 0.0;
  EXPECT_EQ(slice, expected);
}

TEST(UserSlice, AntiSymmetric) {
  const FactorModel model = random_model(2, 15, 3, 7);
  const Matrix slice = user_slice(model, 1);
  EXPECT_EQ((slice + slice.transpose()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(UserSlice, BprFormWhenTIsOne) {
  FactorModel model = random_model(2, 7, 3, 8);
  model.right_item_factors().setOnes();
  const Matrix slice = user_slice(model, 0);
  // sum_h xi_h (eta^h 1^T - 1 eta^h^T)
  Matrix expected = Matrix::Zero(7, 7);
  const Vector ones = Vector::Ones(7);
  for (Index h = 0; h < 3; ++h) {
    const Vector eta = model.left_item_factors().row(h).transpose();
    expected += model.user_factors()(h, 0) *
                (eta * ones.transpose() - ones * eta.transpose());
  }
  EXPECT_LT((slice - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(UserSlice, RefusesLargeCatalogues) {
  const FactorModel model(1, 40, 2);
  EXPECT_THROW(user_slice(model, 0, 30), ContractError);
  EXPECT_NO_THROW(user_slice(model, 0, 40));
}

TEST(LogLikelihood, EmptyIsZero) {
  EXPECT_EQ(log_likelihood(random_model(2, 3, 2, 9), {}), 0.0);
}

TEST(LogLikelihood, ZeroPreferenceGivesLogHalf) {
  const FactorModel model(3, 5, 2);
  const std::vector<Observation> one{{0, 1, 3, 1}};
  const std::vector<Observation> other{{0, 1, 3, -1}};
  EXPECT_NEAR(log_likelihood(model, one), -0.6931471805599453, 1e-15);
  EXPECT_NEAR(log_likelihood(model, other), -0.6931471805599453, 1e-15);
  std::vector<Observation> many;
  for (Index u = 0; u < 3; ++u) many.push_back({u, 0, 4, u % 2 ? 1 : -1});
  EXPECT_NEAR(log_likelihood(model, many), -3.0 * std::log(2.0), 1e-14);
}

TEST(LogLikelihood, MatchesBruteForce) {
  const FactorModel model = random_model(4, 9, 3, 10);
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<Index> user(0, 3), item(0, 8);
  std::vector<Observation> obs;
  while (obs.size() < 10) {
    Index i = item(rng), j = item(rng);
    if (i == j) continue;
    if (i > j) std::swap(i, j);
    obs.push_back({user(rng), i, j, rng() % 2 ? 1 : -1});
  }
  double expected = 0.0;
  for (const auto& o : obs) {
    expected += naive_log_bernoulli(o.direction,
                                    naive_preference(model, o.user, o.preferred, o.other));
  }
  EXPECT_LE(testing::relative_error(log_likelihood(model, obs), expected), 1e-12);
  EXPECT_LE(log_likelihood(model, obs), 0.0);
}

TEST(LogLikelihood, SignOfLabelMatters) {
  // x = 3 for (0, 0, 1): the +1 label is likely and the -1 label is not.
  const FactorModel model = hand_model();
  const std::vector<Observation> pos{{0, 0, 1, 1}};
  const std::vector<Observation> neg{{0, 0, 1, -1}};
  EXPECT_NEAR(log_likelihood(model, pos), std::log(sigmoid(3.0)), 1e-15);
  EXPECT_NEAR(log_likelihood(model, neg), std::log(sigmoid(-3.0)), 1e-14);
}

TEST(LogLikelihood, RequiresOrderedPairs) {
  const FactorModel model(1, 3, 1);
  const std::vector<Observation> reversed{{0, 2, 1, 1}};
  const std::vector<Observation> same{{0, 1, 1, 1}};
  EXPECT_THROW(log_likelihood(model, reversed), ContractError);
  EXPECT_THROW(log_likelihood(model, same), ContractError);
}

TEST(Transitivity, HandResidual) {
  // Items (i, t, j) = (0, 1, 2) with eta = (1, 2, 3), tau = (1, 5, 1):
  // x_ij = 1 - 3 = -2, x_it = 5 - 2 = 3, x_tj = 2 - 15 = -13.
  Matrix xi(1, 1), eta(1, 3), tau(1, 3);
  xi << 1.0;
  eta << 1.0, 2.0, 3.0;
  tau << 1.0, 5.0, 1.0;
  const FactorModel model(xi, eta, tau);
  EXPECT_DOUBLE_EQ(preference(model, 0, 0, 2), -2.0);
  EXPECT_DOUBLE_EQ(preference(model, 0, 0, 1), 3.0);
  EXPECT_DOUBLE_EQ(preference(model, 0, 1, 2), -13.0);
  EXPECT_DOUBLE_EQ(transitivity_residual(model, 0, 0, 1, 2), 8.0);
}

TEST(Transitivity, ZeroForBpr) {
  FactorModel model = random_model(2, 6, 3, 12);
  model.right_item_factors().setOnes();
  for (Index i = 0; i < 6; ++i) {
    for (Index t = 0; t < 6; ++t) {
      for (Index j = 0; j < 6; ++j) {
        if (i == t || t == j || i == j) continue;
        EXPECT_NEAR(transitivity_residual(model, 1, i, t, j), 0.0, 1e-12);
      }
    }
  }
}

TEST(Transitivity, ZeroWhenTauColumnsEqual) {
  FactorModel model = random_model(3, 6, 4, 13);
  model.right_item_factors().col(4) = model.right_item_factors().col(1);
  model.right_item_factors().col(5) = model.right_item_factors().col(1);
  for (Index u = 0; u < 3; ++u) {
    EXPECT_NEAR(transitivity_residual(model, u, 1, 4, 5), 0.0, 1e-12);
    EXPECT_NEAR(transitivity_residual(model, u, 5, 1, 4), 0.0, 1e-12);
  }
  EXPECT_THROW(transitivity_residual(model, 0, 1, 1, 2), ContractError);
}

// The brute-force oracle enumerates unordered triples and both orientations.
std::set<std::tuple<Index, Index, Index>> brute_cycles(const FactorModel& model, Index u,
                                                       const std::vector<Index>& items) {
  std::set<std::tuple<Index, Index, Index>> out;
  const std::size_t n = items.size();
  auto beats = [&](Index a, Index b) { return naive_preference(model, u, a, b) > 0.0; };
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      for (std::size_t c = b + 1; c < n; ++c) {
        const Index p = items[a], q = items[b], r = items[c];
        if (beats(p, q) && beats(q, r) && beats(r, p)) {
          out.insert({p, q, r});
          out.insert({q, r, p});
          out.insert({r, p, q});
        }
        if (beats(p, r) && beats(r, q) && beats(q, p)) {
          out.insert({p, r, q});
          out.insert({r, q, p});
          out.insert({q, p, r});
        }
      }
    }
  }
  return out;
}

TEST(Cycles, MatchBruteForceWithExtremeTau) {
  FactorModel model = random_model(3, 20, 5, 14);
  std::mt19937_64 rng(15);
  for (Index c = 0; c < 20; ++c) {
    for (Index h = 0; h < 5; ++h) {
      if (rng() % 7 == 0) model.right_item_factors()(h, c) = rng() % 2 ? 0.01 : 5.0;
    }
  }
  std::vector<Index> items(20);
  std::iota(items.begin(), items.end(), Index{0});
  std::size_t total = 0;
  for (Index u = 0; u < 3; ++u) {
    const auto cycles = find_preference_cycles(model, u, items);
    std::set<std::tuple<Index, Index, Index>> got;
    for (const auto& c : cycles) got.insert({c.first, c.second, c.third});
    EXPECT_EQ(got.size(), cycles.size());
    EXPECT_EQ(got, brute_cycles(model, u, items));
    total += cycles.size();
  }
  EXPECT_GT(total, 0u);
}

TEST(Cycles, NoneForBprOrPairs) {
  FactorModel model = random_model(2, 12, 3, 16);
  model.right_item_factors().setOnes();
  std::vector<Index> items(12);
  std::iota(items.begin(), items.end(), Index{0});
  EXPECT_TRUE(find_preference_cycles(model, 0, items).empty());
  const FactorModel sad = random_model(2, 12, 3, 17, 4.0);
  const std::vector<Index> pair{3, 7};
  EXPECT_TRUE(find_preference_cycles(sad, 1, pair).empty());
}

TEST(Sparsity, Counts) {
  EXPECT_EQ(sparsity(Matrix::Ones(3, 4)), 1.0);
  Matrix t = Matrix::Ones(2, 4);
  t.row(0).setConstant(5.0);
  EXPECT_EQ(sparsity(t), 0.5);
  t(1, 0) = 1.049;
  t(1, 1) = 0.951;
  t(1, 2) = 1.05;
  EXPECT_EQ(sparsity(t), 0.375);
  EXPECT_THROW(sparsity(t, 0.0), ContractError);
}

TEST(Sparsity, MonotoneInTolerance) {
  const FactorModel model = random_model(1, 30, 4, 18, 0.3);
  double last = 0.0;
  for (double tol : {0.01, 0.02, 0.05, 0.1, 0.3, 1.0, 5.0}) {
    const double s = sparsity(model.right_item_factors(), tol);
    EXPECT_GE(s, last);
    EXPECT_LE(s, 1.0);
    last = s;
  }
}

}  // namespace
}  // namespace sadrec
