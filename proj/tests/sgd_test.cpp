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

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "sadrec/sgd.hpp"
#include "sadrec/simulation.hpp"
#include "test_util.hpp"

namespace sadrec {
namespace {

using testing::naive_log_bernoulli;
using testing::naive_preference;
using testing::random_model;

double loss(const FactorModel& model, Index u, Index i, Index j, int d) {
  return naive_log_bernoulli(d, naive_preference(model, u, i, j));
}

// Central difference of the per-observation log-likelihood for one entry.
double numeric_partial(FactorModel model, Matrix& (FactorModel::*which)(), Index h,
                       Index col, Index u, Index i, Index j, int d) {
  const double step = 1e-5;
  double& entry = (model.*which)()(h, col);
  const double saved = entry;
  entry = saved + step;
  const double up = loss(model, u, i, j, d);
  entry = saved - step;
  const double down = loss(model, u, i, j, d);
  entry = saved;
  return (up - down) / (2.0 * step);
}

void expect_close(double analytic, double numeric) {
  // Relative error with an absolute floor for entries whose partial is ~0.
  const double err = std::abs(analytic - numeric) /
                     std::max({std::abs(analytic), std::abs(numeric), 1e-3});
  EXPECT_LE(err, 1e-5) << "analytic " << analytic << " numeric " << numeric;
}

TEST(Gradients, MatchFiniteDifferences) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const Index k = 1 + static_cast<Index>(rng() % 8);
    const FactorModel model = random_model(3, 6, k, 1000 + trial);
    const Index u = static_cast<Index>(rng() % 3);
    const Index i = static_cast<Index>(rng() % 6);
    Index j = static_cast<Index>(rng() % 5);
    if (j >= i) ++j;
    const int d = rng() % 2 ? 1 : -1;
    const GradientBundle g = observation_gradients(model, u, i, j, d);
    for (Index h = 0; h < k; ++h) {
      expect_close(g.d_xi_u[h],
                   numeric_partial(model, &FactorModel::user_factors, h, u, u, i, j, d));
      expect_close(g.d_eta_i[h], numeric_partial(model, &FactorModel::left_item_factors, h,
                                                 i, u, i, j, d));
      expect_close(g.d_eta_j[h], numeric_partial(model, &FactorModel::left_item_factors, h,
                                                 j, u, i, j, d));
      expect_close(g.d_tau_i[h], numeric_partial(model, &FactorModel::right_item_factors, h,
                                                 i, u, i, j, d));
      expect_close(g.d_tau_j[h], numeric_partial(model, &FactorModel::right_item_factors, h,
                                                 j, u, i, j, d));
    }
  }
}

TEST(Gradients, WeightAtZeroAndLabelShift) {
  const FactorModel zero(1, 3, 2);
  EXPECT_DOUBLE_EQ(observation_gradients(zero, 0, 0, 1, 1).weight, 0.5);
  const FactorModel model = random_model(2, 5, 3, 22);
  const double pos = observation_gradients(model, 1, 2, 4, 1).weight;
  const double neg = observation_gradients(model, 1, 2, 4, -1).weight;
  EXPECT_DOUBLE_EQ(neg - pos, -1.0);
}

TEST(Gradients, ClassicBprFormWhenTIsOne) {
  FactorModel model = random_model(2, 5, 4, 23);
  model.right_item_factors().setOnes();
  const GradientBundle g = observation_gradients(model, 0, 1, 3, 1);
  const Vector xi = model.user_factors().col(0);
  const Vector diff = model.left_item_factors().col(1) - model.left_item_factors().col(3);
  const double w = sigmoid(-xi.dot(diff));
  EXPECT_LT((g.d_xi_u - w * diff).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((g.d_eta_i - w * xi).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((g.d_eta_j + w * xi).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TauStep, SnapsInsteadOfCrossingOne) {
  // Zero gradient: the pull alone moves toward 1 and stops there.
  EXPECT_EQ(regularized_tau_step(1.0003, 0.0, 0.05, 0.01), 1.0);
  EXPECT_EQ(regularized_tau_step(0.9996, 0.0, 0.05, 0.01), 1.0);
  EXPECT_EQ(regularized_tau_step(1.0, 0.0, 0.05, 0.01), 1.0);
  EXPECT_DOUBLE_EQ(regularized_tau_step(1.2, 0.0, 0.05, 0.01), 1.2 - 0.0005);
  EXPECT_DOUBLE_EQ(regularized_tau_step(0.5, 0.0, 0.05, 0.01), 0.5 + 0.0005);
}

TEST(TauStep, NeverNegative) {
  EXPECT_EQ(regularized_tau_step(0.1, -10.0, 0.05, 0.01), 0.0);
  EXPECT_EQ(regularized_tau_step(0.0, -1.0, 0.05, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(regularized_tau_step(2.0, 1.0, 0.1, 0.0), 2.1);
}

TEST(ApplyGradients, FrozenKeepsT) {
  FactorModel model = random_model(2, 4, 3, 24);
  model.right_item_factors().setOnes();
  TrainConfig config;
  config.freeze_right_factors = true;
  const GradientBundle g = observation_gradients(model, 0, 1, 2, 1);
  apply_gradients(model, 0, 1, 2, g, config);
  EXPECT_EQ(model.right_item_factors(), Matrix::Ones(3, 4));
}

TEST(ApplyGradients, UsesPreUpdateValues) {
  FactorModel model = random_model(1, 3, 2, 25);
  const FactorModel before = model;
  TrainConfig config;
  config.l2_weight = 0.0;
  config.l1_weight = 0.0;
  const GradientBundle g = observation_gradients(model, 0, 0, 2, 1);
  apply_gradients(model, 0, 0, 2, g, config);
  const Vector expected_eta = before.left_item_factors().col(0) + 0.05 * g.d_eta_i;
  const Vector expected_tau = before.right_item_factors().col(2) + 0.05 * g.d_tau_j;
  EXPECT_LT((model.left_item_factors().col(0) - expected_eta).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((model.right_item_factors().col(2) - expected_tau).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(model.left_item_factors().col(1), before.left_item_factors().col(1));
}

ImplicitView small_view() {
  // 6 users over 10 items.
  std::vector<std::vector<Index>> items{{0, 1, 2}, {3, 4},       {5, 6, 7, 8},
                                        {0, 9},    {1, 3, 5, 7}, {2}};
  return ImplicitView(6, 10, items);
}

TEST(Train, Deterministic) {
  TrainConfig config;
  config.seed = 3;
  config.epochs = 5;
  const auto a = train(small_view(), config);
  const auto b = train(small_view(), config);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.log, b.log);
  config.seed = 4;
  EXPECT_FALSE(train(small_view(), config).model == a.model);
}

TEST(Train, ShuffleIsDeterministicToo) {
  TrainConfig config;
  config.shuffle = true;
  config.epochs = 4;
  EXPECT_EQ(train(small_view(), config).model, train(small_view(), config).model);
  TrainConfig plain = config;
  plain.shuffle = false;
  EXPECT_FALSE(train(small_view(), config).model == train(small_view(), plain).model);
}

TEST(Train, BprKeepsTAllOnes) {
  TrainConfig config;
  config.epochs = 10;
  const auto bpr = train_bpr(small_view(), config);
  EXPECT_EQ(bpr.model.right_item_factors(), Matrix::Ones(config.n_factors, 10));
  config.freeze_right_factors = true;
  const auto frozen = train(small_view(), config);
  EXPECT_EQ(bpr.model, frozen.model);
  EXPECT_EQ(bpr.log, frozen.log);
}

TEST(Train, SkipsUsersWithoutFreeItems) {
  std::vector<std::vector<Index>> items{{0, 1, 2}, {}, {1}};
  TrainConfig config;
  config.epochs = 2;
  const auto fit = train(ImplicitView(3, 3, items), config);
  EXPECT_EQ(fit.log.skipped_users, 2);
}

TEST(Train, LogLayout) {
  TrainConfig config;
  config.epochs = 3;
  const auto fit = train(small_view(), config);
  ASSERT_EQ(fit.log.epochs.size(), 3u);
  std::ostringstream os;
  write_training_log(os, fit.log);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "epoch,mean_loglik,t_sparsity,seconds");
  int rows = 0;
  while (std::getline(is, line)) {
    EXPECT_EQ(line.substr(0, line.find(',')), std::to_string(rows));
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "0.000000");
    ++rows;
  }
  EXPECT_EQ(rows, 4);
}

TEST(Train, EarlyStop) {
  TrainConfig config;
  config.epochs = 200;
  config.learning_rate = 0.001;
  config.convergence_rel_tol = 0.5;
  const auto fit = train(small_view(), config);
  EXPECT_TRUE(fit.log.stopped_early);
  EXPECT_LT(fit.log.epochs.size(), 200u);
}

TEST(Train, DivergenceIsReported) {
  SimSpec spec;
  const SimTruth truth = generate_truth(spec);
  TrainConfig config;
  config.learning_rate = 1e6;
  config.l2_weight = 0.0;
  try {
    train_observations(spec.n_users, spec.n_items, truth.observations, config);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
    EXPECT_EQ(e.exit_code(), ExitCode::kDivergence);
  }
}

TEST(Train, StrongL1KeepsTNearOne) {
  SimSpec spec;
  spec.kind = SimKind::kSim1;
  spec.extreme_fraction = 0.0;
  const SimTruth truth = generate_truth(spec);
  TrainConfig config;
  config.l1_weight = 1e3;
  const auto fit = train_observations(spec.n_users, spec.n_items, truth.observations, config);
  EXPECT_GE(sparsity(fit.model.right_item_factors()), 0.99);
}

TEST(Train, LogLikelihoodImproves) {
  for (SimKind kind : {SimKind::kSim1, SimKind::kSim2}) {
    for (double fraction : {0.0, 0.3, 0.5}) {
      SimSpec spec;
      spec.kind = kind;
      if (kind == SimKind::kSim1) spec.extreme_fraction = 0.0;
      const SimTruth truth = generate_truth(spec);
      Rng mask = make_stream(spec.seed, "mask");
      const auto kept = mask_missing<Observation>(truth.observations, fraction, mask);
      const auto fit = train_observations(spec.n_users, spec.n_items, kept, TrainConfig{});
      for (const auto& r : fit.log.epochs) EXPECT_TRUE(std::isfinite(r.mean_loglik));
      EXPECT_GT(fit.log.epochs.back().mean_loglik, fit.log.initial_mean_loglik);
    }
  }
}

TEST(Train, ValidatesConfig) {
  TrainConfig config;
  config.learning_rate = 0.0;
  EXPECT_THROW(train(small_view(), config), UsageError);
  config = {};
  config.n_factors = 0;
  EXPECT_THROW(train(small_view(), config), UsageError);
  config = {};
  config.l1_weight = -1.0;
  EXPECT_THROW(config.validate(), UsageError);
}

TEST(TrainConfigFile, RoundTrip) {
  TrainConfig config;
  config.learning_rate = 0.123;
  config.l1_weight = 0.0;
  config.epochs = 7;
  config.n_factors = 500;
  config.seed = 99;
  config.shuffle = true;
  std::ostringstream os;
  write_train_config(os, config);
  std::istringstream is(os.str());
  const TrainConfig back = read_train_config(is);
  EXPECT_EQ(back.learning_rate, config.learning_rate);
  EXPECT_EQ(back.l1_weight, config.l1_weight);
  EXPECT_EQ(back.epochs, 7);
  EXPECT_EQ(back.n_factors, 500);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_TRUE(back.shuffle);
}

TEST(TrainConfigFile, OverridesOnlyGivenKeys) {
  TrainConfig base;
  base.epochs = 3;
  std::istringstream is("# comment\nlearning_rate = 0.2\n\n");
  const TrainConfig c = read_train_config(is, base);
  EXPECT_EQ(c.learning_rate, 0.2);
  EXPECT_EQ(c.epochs, 3);
  std::istringstream bad("learnin_rate=1\n");
  EXPECT_THROW(read_train_config(bad), UsageError);
  std::istringstream junk("epochs=two\n");
  EXPECT_THROW(read_train_config(junk), UsageError);
}

TEST(GridSearch, DefaultsAndSelection) {
  const GridSpec grid;
  EXPECT_EQ(grid.learning_rates,
            (std::vector<double>{0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1}));
  EXPECT_EQ(grid.epochs, (std::vector<int>{2, 5, 10, 20, 50}));
  EXPECT_EQ(grid.l2_weights, (std::vector<double>{0.05, 0.01, 0.005, 0.001}));
  EXPECT_EQ(grid.l1_weights, (std::vector<double>{0.01}));

  GridSpec small;
  small.learning_rates = {0.01, 0.05};
  small.epochs = {2, 5};
  small.l2_weights = {0.01};
  TrainConfig base;
  base.n_factors = 3;
  const GridResult serial = grid_search(small_view(), base, small, 1);
  const GridResult threaded = grid_search(small_view(), base, small, 3);
  ASSERT_EQ(serial.cells.size(), 4u);
  EXPECT_EQ(serial.best, threaded.best);
  for (std::size_t k = 0; k < serial.cells.size(); ++k) {
    EXPECT_EQ(serial.cells[k].final_mean_loglik, threaded.cells[k].final_mean_loglik);
    EXPECT_LE(serial.cells[k].final_mean_loglik,
              serial.cells[serial.best].final_mean_loglik);
  }
}

}  // namespace
}  // namespace sadrec
