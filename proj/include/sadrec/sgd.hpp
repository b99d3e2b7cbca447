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

// Stochastic gradient ascent on the pairwise log-likelihood with l2 decay on
// Xi and H and an l1 pull of every T entry toward 1.

#ifndef SADREC_SGD_HPP_
#define SADREC_SGD_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "sadrec/dataset.hpp"
#include "sadrec/error.hpp"
#include "sadrec/model.hpp"
#include "sadrec/random.hpp"

namespace sadrec {

struct TrainConfig {
  double learning_rate = 0.05;
  double l1_weight = 0.01;
  double l2_weight = 0.005;
  int epochs = 20;
  Index n_factors = 5;
  std::uint64_t seed = 0;
  double convergence_rel_tol = 0.0;  // 0 disables early stopping
  bool freeze_right_factors = false;  // BPR mode
  bool shuffle = false;               // randomize update order per epoch

  void validate() const {
    if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be > 0");
    if (!(l1_weight >= 0.0)) throw UsageError("l1_weight must be >= 0");
    if (!(l2_weight >= 0.0)) throw UsageError("l2_weight must be >= 0");
    if (epochs < 1) throw UsageError("epochs must be >= 1");
    if (n_factors < 1) throw UsageError("n_factors must be >= 1");
    if (!(convergence_rel_tol >= 0.0)) {
      throw UsageError("convergence_rel_tol must be >= 0");
    }
  }
};

// Flat key=value rendering; keys are the TrainConfig field names.
inline std::map<std::string, std::string> to_key_values(const TrainConfig& c) {
  auto num = [](double v) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    return std::string(buffer);
  };
  return {
      {"learning_rate", num(c.learning_rate)},
      {"l1_weight", num(c.l1_weight)},
      {"l2_weight", num(c.l2_weight)},
      {"epochs", std::to_string(c.epochs)},
      {"n_factors", std::to_string(c.n_factors)},
      {"seed", std::to_string(c.seed)},
      {"convergence_rel_tol", num(c.convergence_rel_tol)},
      {"freeze_right_factors", c.freeze_right_factors ? "true" : "false"},
      {"shuffle", c.shuffle ? "true" : "false"},
  };
}

inline void write_train_config(std::ostream& os, const TrainConfig& config) {
  for (const auto& [key, value] : to_key_values(config)) {
    os << key << '=' << value << '\n';
  }
}

// Applies key=value lines onto `config`. Blank lines and '#' comments are
// ignored; unknown keys and unparsable values are usage errors.
inline TrainConfig read_train_config(std::istream& is, TrainConfig config = {}) {
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string_view view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    const std::size_t eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key(detail::trim(view.substr(0, eq)));
    const std::string value(detail::trim(view.substr(eq + 1)));
    auto bad = [&]() {
      return UsageError("config line " + std::to_string(line_no) + ": bad value '" +
                        value + "' for " + key);
    };
    auto real = [&]() {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(value, &used);
      } catch (const std::exception&) {
        throw bad();
      }
      if (used != value.size()) throw bad();
      return v;
    };
    auto integer = [&]() {
      auto v = detail::parse_integer<long long>(value);
      if (!v) throw bad();
      return *v;
    };
    auto boolean = [&]() {
      if (value == "true" || value == "1") return true;
      if (value == "false" || value == "0") return false;
      throw bad();
    };
    if (key == "learning_rate") config.learning_rate = real();
    else if (key == "l1_weight") config.l1_weight = real();
    else if (key == "l2_weight") config.l2_weight = real();
    else if (key == "epochs") config.epochs = static_cast<int>(integer());
    else if (key == "n_factors") config.n_factors = static_cast<Index>(integer());
    else if (key == "seed") {
      auto v = detail::parse_integer<std::uint64_t>(value);
      if (!v) throw bad();
      config.seed = *v;
    } else if (key == "convergence_rel_tol") config.convergence_rel_tol = real();
    else if (key == "freeze_right_factors") config.freeze_right_factors = boolean();
    else if (key == "shuffle") config.shuffle = boolean();
    else throw UsageError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  return config;
}

// Partials of log p(d_uij | x_uij) with respect to the five factor columns
// one observation touches.
struct GradientBundle {
  Vector d_xi_u;
  Vector d_eta_i;
  Vector d_eta_j;
  Vector d_tau_i;
  Vector d_tau_j;
  double weight = 0.0;
};

// weight = sigmoid(-x) - [d == -1], which is d/dx log p(d | x) for either
// label.
inline GradientBundle observation_gradients(const FactorModel& model, Index u,
                                            Index i, Index j, int direction) {
  if (i == j) throw ContractError("observation_gradients: requires i != j");
  const double x = preference(model, u, i, j);
  GradientBundle g;
  g.weight = sigmoid(-x) - (direction < 0 ? 1.0 : 0.0);
  const auto xi = model.user_factors().col(u).array();
  const auto eta_i = model.left_item_factors().col(i).array();
  const auto eta_j = model.left_item_factors().col(j).array();
  const auto tau_i = model.right_item_factors().col(i).array();
  const auto tau_j = model.right_item_factors().col(j).array();
  const double w = g.weight;
  g.d_xi_u = w * (eta_i * tau_j - eta_j * tau_i);
  g.d_eta_i = w * xi * tau_j;
  g.d_eta_j = -w * xi * tau_i;
  g.d_tau_i = -w * xi * eta_j;
  g.d_tau_j = w * xi * eta_i;
  return g;
}

// One coordinate of the T update: gradient step, then the l1 proximal pull
// toward 1 (never crossing it), then projection onto tau >= 0.
inline double regularized_tau_step(double tau, double gradient,
                                   double learning_rate, double l1_weight) {
  double value = tau + learning_rate * gradient;
  const double shrink = learning_rate * l1_weight;
  if (value > 1.0) {
    value = std::max(1.0, value - shrink);
  } else if (value < 1.0) {
    value = std::min(1.0, value + shrink);
  }
  return std::max(0.0, value);
}

// Applies one observation's updates. The full bundle is computed from the
// pre-update parameters before any column is touched.
inline void apply_gradients(FactorModel& model, Index u, Index i, Index j,
                            const GradientBundle& g, const TrainConfig& config) {
  const double rate = config.learning_rate;
  const double decay = 2.0 * config.l2_weight;
  auto xi = model.user_factors().col(u);
  auto eta_i = model.left_item_factors().col(i);
  auto eta_j = model.left_item_factors().col(j);
  xi += rate * (g.d_xi_u - decay * xi);
  eta_i += rate * (g.d_eta_i - decay * eta_i);
  eta_j += rate * (g.d_eta_j - decay * eta_j);
  if (config.freeze_right_factors) return;
  auto tau_i = model.right_item_factors().col(i);
  auto tau_j = model.right_item_factors().col(j);
  for (Index h = 0; h < model.n_factors(); ++h) {
    tau_i[h] = regularized_tau_step(tau_i[h], g.d_tau_i[h], rate, config.l1_weight);
    tau_j[h] = regularized_tau_step(tau_j[h], g.d_tau_j[h], rate, config.l1_weight);
  }
}

// Xi, H ~ N(0, 1) i.i.d.; T = 1.
inline FactorModel initialize_model(Index n_users, Index n_items,
                                    const TrainConfig& config) {
  Rng rng = make_stream(config.seed, "init");
  std::normal_distribution<double> normal(0.0, 1.0);
  FactorModel model(n_users, n_items, config.n_factors);
  for (Index c = 0; c < n_users; ++c) {
    for (Index h = 0; h < config.n_factors; ++h) model.user_factors()(h, c) = normal(rng);
  }
  for (Index c = 0; c < n_items; ++c) {
    for (Index h = 0; h < config.n_factors; ++h) {
      model.left_item_factors()(h, c) = normal(rng);
    }
  }
  return model;
}

struct EpochSummary {
  double mean_loglik = 0.0;
  std::size_t updates = 0;
  Index skipped_users = 0;
};

struct EpochRecord {
  int epoch = 0;
  double mean_loglik = 0.0;
  double t_sparsity = 0.0;
  double seconds = 0.0;
};

struct TrainingLog {
  double initial_mean_loglik = 0.0;
  std::vector<EpochRecord> epochs;
  Index skipped_users = 0;
  bool stopped_early = false;

  // Timing is left out so that equal runs compare equal.
  friend bool operator==(const TrainingLog& a, const TrainingLog& b) {
    if (a.initial_mean_loglik != b.initial_mean_loglik ||
        a.epochs.size() != b.epochs.size() || a.skipped_users != b.skipped_users ||
        a.stopped_early != b.stopped_early) {
      return false;
    }
    for (std::size_t e = 0; e < a.epochs.size(); ++e) {
      if (a.epochs[e].epoch != b.epochs[e].epoch ||
          a.epochs[e].mean_loglik != b.epochs[e].mean_loglik ||
          a.epochs[e].t_sparsity != b.epochs[e].t_sparsity) {
        return false;
      }
    }
    return true;
  }
};

// `epoch,mean_loglik,t_sparsity,seconds`; row 0 is the initial model, whose
// T is all ones.
// Without `with_timing` the seconds column is written as 0 so the file is
// reproducible byte for byte.
inline void write_training_log(std::ostream& os, const TrainingLog& log,
                               bool with_timing = false) {
  char buffer[128];
  os << "epoch,mean_loglik,t_sparsity,seconds\n";
  std::snprintf(buffer, sizeof(buffer), "0,%.17g,1,0.000000\n", log.initial_mean_loglik);
  os << buffer;
  for (const auto& r : log.epochs) {
    std::snprintf(buffer, sizeof(buffer), "%d,%.17g,%.17g,%.6f\n", r.epoch,
                  r.mean_loglik, r.t_sparsity, with_timing ? r.seconds : 0.0);
    os << buffer;
  }
}

// One pass of the implicit-feedback loop: users in index order, each
// interacted item i paired with a fresh uniform non-interacted j as d = +1.
inline EpochSummary sgd_epoch(FactorModel& model, const ImplicitView& data,
                              const TrainConfig& config, Rng& negatives,
                              Rng* order = nullptr) {
  EpochSummary summary;
  double total = 0.0;
  std::vector<Index> users(static_cast<std::size_t>(data.n_users()));
  std::iota(users.begin(), users.end(), Index{0});
  if (order) std::shuffle(users.begin(), users.end(), *order);
  std::vector<Index> items;
  for (Index u : users) {
    const auto interacted = data.items(u);
    if (interacted.empty() || data.n_non_interacted(u) == 0) {
      ++summary.skipped_users;
      continue;
    }
    items.assign(interacted.begin(), interacted.end());
    if (order) std::shuffle(items.begin(), items.end(), *order);
    for (Index i : items) {
      const Index j = sample_negative(data, u, negatives);
      const GradientBundle g = observation_gradients(model, u, i, j, 1);
      total += log_sigmoid(preference(model, u, i, j));
      apply_gradients(model, u, i, j, g, config);
      ++summary.updates;
    }
  }
  summary.mean_loglik =
      summary.updates ? total / static_cast<double>(summary.updates) : 0.0;
  return summary;
}

// One pass over explicit (u, i, j, d) observations in list order.
inline EpochSummary sgd_epoch(FactorModel& model,
                              std::span<const Observation> observations,
                              const TrainConfig& config, Rng* order = nullptr) {
  EpochSummary summary;
  std::vector<std::size_t> sequence(observations.size());
  std::iota(sequence.begin(), sequence.end(), std::size_t{0});
  if (order) std::shuffle(sequence.begin(), sequence.end(), *order);
  for (std::size_t k : sequence) {
    const Observation& obs = observations[k];
    const GradientBundle g =
        observation_gradients(model, obs.user, obs.preferred, obs.other, obs.direction);
    apply_gradients(model, obs.user, obs.preferred, obs.other, g, config);
    ++summary.updates;
  }
  summary.mean_loglik =
      observations.empty()
          ? 0.0
          : log_likelihood(model, observations) / static_cast<double>(observations.size());
  return summary;
}

struct TrainResult {
  FactorModel model;
  TrainingLog log;
};

using EpochCallback = std::function<void(int epoch, const FactorModel&)>;

namespace detail {

// Shared epoch loop: bookkeeping, divergence checks and early stopping.
template <typename RunEpoch>
TrainingLog run_epochs(FactorModel& model, const TrainConfig& config,
                       double initial_loglik, RunEpoch&& run_epoch,
                       const EpochCallback& on_epoch) {
  TrainingLog log;
  log.initial_mean_loglik = initial_loglik;
  double previous = initial_loglik;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const EpochSummary summary = run_epoch();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!model.all_finite() || !std::isfinite(summary.mean_loglik)) {
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch));
    }
    if ((model.right_item_factors().array() < 0.0).any()) {
      throw ContractError("negative right item factor after epoch " +
                          std::to_string(epoch));
    }
    log.skipped_users = summary.skipped_users;
    log.epochs.push_back({epoch, summary.mean_loglik,
                          sparsity(model.right_item_factors()), seconds});
    if (on_epoch) on_epoch(epoch, model);
    const double change = std::abs(summary.mean_loglik - previous) /
                          std::max(std::abs(previous), 1e-300);
    previous = summary.mean_loglik;
    if (change < config.convergence_rel_tol) {
      log.stopped_early = epoch < config.epochs;
      break;
    }
  }
  return log;
}

}  // namespace detail

// Fits the model to implicit feedback. Deterministic in (data, config).
inline TrainResult train(const ImplicitView& data, const TrainConfig& config,
                         const EpochCallback& on_epoch = {}) {
  config.validate();
  if (data.n_users() == 0 || data.n_items() < 2) {
    throw DataError("train: dataset needs at least one user and two items");
  }
  FactorModel model = initialize_model(data.n_users(), data.n_items(), config);

  // Initial sampled log-likelihood on its own stream so it never shifts the
  // training draws.
  Rng probe = make_stream(config.seed, "initial-loglik");
  double total = 0.0;
  std::size_t count = 0;
  for (Index u = 0; u < data.n_users(); ++u) {
    if (data.items(u).empty() || data.n_non_interacted(u) == 0) continue;
    for (Index i : data.items(u)) {
      total += log_sigmoid(preference(model, u, i, sample_negative(data, u, probe)));
      ++count;
    }
  }
  if (count == 0) throw DataError("train: no user has both interacted and free items");

  Rng negatives = make_stream(config.seed, "negatives");
  Rng order = make_stream(config.seed, "order");
  Rng* order_ptr = config.shuffle ? &order : nullptr;
  TrainingLog log = detail::run_epochs(
      model, config, total / static_cast<double>(count),
      [&] { return sgd_epoch(model, data, config, negatives, order_ptr); }, on_epoch);
  return {std::move(model), std::move(log)};
}

// BPR: the same loop with T pinned to all ones.
inline TrainResult train_bpr(const ImplicitView& data, TrainConfig config,
                             const EpochCallback& on_epoch = {}) {
  config.freeze_right_factors = true;
  return train(data, config, on_epoch);
}

// Fits the model to explicit pairwise observations (both labels occur).
inline TrainResult train_observations(Index n_users, Index n_items,
                                      std::span<const Observation> observations,
                                      const TrainConfig& config,
                                      const EpochCallback& on_epoch = {}) {
  config.validate();
  if (observations.empty()) throw DataError("train_observations: no observations");
  FactorModel model = initialize_model(n_users, n_items, config);
  const double initial =
      log_likelihood(model, observations) / static_cast<double>(observations.size());
  Rng order = make_stream(config.seed, "order");
  Rng* order_ptr = config.shuffle ? &order : nullptr;
  TrainingLog log = detail::run_epochs(
      model, config, initial,
      [&] { return sgd_epoch(model, observations, config, order_ptr); }, on_epoch);
  return {std::move(model), std::move(log)};
}

// ---------------------------------------------------------------------------
// Hyperparameter grid search, selecting by final training log-likelihood.

struct GridSpec {
  std::vector<double> learning_rates{0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1};
  std::vector<int> epochs{2, 5, 10, 20, 50};
  std::vector<double> l2_weights{0.05, 0.01, 0.005, 0.001};
  std::vector<double> l1_weights{0.01};
};

struct GridCell {
  TrainConfig config;
  double final_mean_loglik = 0.0;
  bool diverged = false;
};

struct GridResult {
  std::vector<GridCell> cells;  // in enumeration order
  std::size_t best = 0;
};

// Every combination of the grid on top of `base`. Cells run on up to
// `parallel` threads; the result does not depend on the thread count.
inline GridResult grid_search(const ImplicitView& data, const TrainConfig& base,
                              const GridSpec& grid, unsigned parallel = 1) {
  GridResult result;
  for (double rate : grid.learning_rates) {
    for (int epochs : grid.epochs) {
      for (double l2 : grid.l2_weights) {
        for (double l1 : grid.l1_weights) {
          TrainConfig c = base;
          c.learning_rate = rate;
          c.epochs = epochs;
          c.l2_weight = l2;
          c.l1_weight = l1;
          result.cells.push_back({c, 0.0, false});
        }
      }
    }
  }
  if (result.cells.empty()) throw UsageError("grid_search: empty grid");

  auto run_cell = [&](std::size_t k) {
    GridCell& cell = result.cells[k];
    try {
      cell.final_mean_loglik = train(data, cell.config).log.epochs.back().mean_loglik;
    } catch (const DivergenceError&) {
      cell.diverged = true;
    }
  };
  const unsigned workers = std::max(1u, parallel);
  if (workers == 1) {
    for (std::size_t k = 0; k < result.cells.size(); ++k) run_cell(k);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < result.cells.size(); k += workers) run_cell(k);
      });
    }
    for (auto& t : pool) t.join();
  }

  bool found = false;
  for (std::size_t k = 0; k < result.cells.size(); ++k) {
    const GridCell& cell = result.cells[k];
    if (cell.diverged) continue;
    if (!found || cell.final_mean_loglik > result.cells[result.best].final_mean_loglik) {
      result.best = k;
      found = true;
    }
  }
  if (!found) throw DivergenceError("grid_search: every grid cell diverged");
  return result;
}

}  // namespace sadrec

#endif  // SADREC_SGD_HPP_
