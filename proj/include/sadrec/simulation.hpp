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

// Synthetic ground truth with known factors, pairwise observations drawn
// from it, and recovery metrics for fitted models.

#ifndef SADREC_SIMULATION_HPP_
#define SADREC_SIMULATION_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "sadrec/dataset.hpp"
#include "sadrec/error.hpp"
#include "sadrec/model.hpp"
#include "sadrec/random.hpp"
#include "sadrec/sgd.hpp"

namespace sadrec {

enum class SimKind {
  kSim1,  // T = 1: the BPR generative model
  kSim2,  // a fraction of T entries pushed to 0.01 or 5
};

inline std::string to_string(SimKind kind) {
  return kind == SimKind::kSim1 ? "sim1" : "sim2";
}

struct SimSpec {
  Index n_users = 20;
  Index n_items = 50;
  Index n_factors = 5;
  SimKind kind = SimKind::kSim2;
  double extreme_fraction = 0.14;
  std::array<double, 2> extreme_values{0.01, 5.0};
  std::uint64_t seed = 0;

  void validate() const {
    if (n_users < 1 || n_items < 2 || n_factors < 1) {
      throw UsageError("simulation needs n >= 1, m >= 2, k >= 1");
    }
    if (!(extreme_fraction >= 0.0 && extreme_fraction < 1.0)) {
      throw UsageError("extreme_fraction must lie in [0, 1)");
    }
    if (extreme_values[0] < 0.0 || extreme_values[1] < 0.0) {
      throw UsageError("extreme values must be non-negative");
    }
  }
};

struct SimTruth {
  FactorModel model;
  std::vector<Observation> observations;  // every (u, i < j)
};

inline SimTruth generate_truth(const SimSpec& spec) {
  spec.validate();
  Rng rng = make_stream(spec.seed, "truth");
  std::uniform_real_distribution<double> uniform(-2.0, 2.0);
  FactorModel model(spec.n_users, spec.n_items, spec.n_factors);
  for (Index c = 0; c < spec.n_users; ++c) {
    for (Index h = 0; h < spec.n_factors; ++h) model.user_factors()(h, c) = uniform(rng);
  }
  for (Index c = 0; c < spec.n_items; ++c) {
    for (Index h = 0; h < spec.n_factors; ++h) {
      model.left_item_factors()(h, c) = uniform(rng);
    }
  }
  if (spec.kind == SimKind::kSim2) {
    // Exactly round(fraction * k * m) entries, so the true sparsity is pinned.
    Matrix& tau = model.right_item_factors();
    const auto total = static_cast<std::size_t>(tau.size());
    const auto n_extreme = static_cast<std::size_t>(
        std::llround(spec.extreme_fraction * static_cast<double>(total)));
    std::vector<std::size_t> entries(total);
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    std::shuffle(entries.begin(), entries.end(), rng);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t e = 0; e < n_extreme; ++e) {
      tau.data()[entries[e]] = spec.extreme_values[coin(rng) ? 1 : 0];
    }
  }

  SimTruth truth{std::move(model), {}};
  Rng draws = make_stream(spec.seed, "observations");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  truth.observations.reserve(static_cast<std::size_t>(
      spec.n_users * spec.n_items * (spec.n_items - 1) / 2));
  for (Index u = 0; u < spec.n_users; ++u) {
    for (Index i = 0; i < spec.n_items; ++i) {
      for (Index j = i + 1; j < spec.n_items; ++j) {
        const double p = sigmoid(detail::preference_unchecked(truth.model, u, i, j));
        truth.observations.push_back({u, i, j, unit(draws) < p ? 1 : -1});
      }
    }
  }
  return truth;
}

// Mean over users of ||X_a(u) - X_b(u)||_F^2 / m^2, one slice at a time.
inline double frobenius_mse(const FactorModel& a, const FactorModel& b) {
  if (a.n_users() != b.n_users() || a.n_items() != b.n_items()) {
    throw ContractError("frobenius_mse: models differ in shape");
  }
  const Index n = a.n_users();
  const Index m = a.n_items();
  if (n == 0 || m == 0) return 0.0;
  double total = 0.0;
  for (Index u = 0; u < n; ++u) {
    double slice = 0.0;
    for (Index i = 0; i < m; ++i) {
      for (Index j = i + 1; j < m; ++j) {
        const double diff = detail::preference_unchecked(a, u, i, j) -
                            detail::preference_unchecked(b, u, i, j);
        slice += 2.0 * diff * diff;  // (i, j) and (j, i)
      }
    }
    total += slice;
  }
  return total / (static_cast<double>(n) * static_cast<double>(m) * static_cast<double>(m));
}

// ---------------------------------------------------------------------------
// Study: mask, fit SAD and BPR, compare with the truth.

struct StudyConfig {
  SimSpec spec;
  std::vector<double> missing_fractions{0.0};
  TrainConfig sad;
  TrainConfig bpr;

  StudyConfig() { bpr.freeze_right_factors = true; }
};

struct StudyTrajectoryPoint {
  int epoch = 0;
  double mean_loglik = 0.0;
  double t_sparsity = 0.0;
  double mse = 0.0;
};

struct StudyRow {
  SimKind kind = SimKind::kSim1;
  double missing_fraction = 0.0;
  std::string model;  // "sad" or "bpr"
  std::size_t n_observations = 0;
  double final_loglik = 0.0;
  double t_sparsity = 0.0;
  double mse = 0.0;
  double initial_mse = 0.0;
  std::vector<StudyTrajectoryPoint> trajectory;  // epoch 0 is the initial model
  FactorModel fitted;
};

struct StudyReport {
  SimTruth truth;
  std::vector<StudyRow> rows;
};

inline StudyRow fit_study_cell(const SimTruth& truth, std::span<const Observation> kept,
                               SimKind kind, double fraction, const std::string& name,
                               const TrainConfig& config) {
  StudyRow row;
  row.kind = kind;
  row.missing_fraction = fraction;
  row.model = name;
  row.n_observations = kept.size();
  const Index n = truth.model.n_users();
  const Index m = truth.model.n_items();
  const FactorModel init = initialize_model(n, m, config);
  row.initial_mse = frobenius_mse(init, truth.model);
  row.trajectory.push_back({0,
                            log_likelihood(init, kept) / static_cast<double>(kept.size()),
                            sparsity(init.right_item_factors()), row.initial_mse});
  TrainResult fit = train_observations(
      n, m, kept, config, [&](int epoch, const FactorModel& model) {
        row.trajectory.push_back({epoch, 0.0, sparsity(model.right_item_factors()),
                                  frobenius_mse(model, truth.model)});
      });
  for (std::size_t e = 0; e < fit.log.epochs.size(); ++e) {
    row.trajectory[e + 1].mean_loglik = fit.log.epochs[e].mean_loglik;
  }
  row.final_loglik = fit.log.epochs.back().mean_loglik;
  row.t_sparsity = sparsity(fit.model.right_item_factors());
  row.mse = row.trajectory.back().mse;
  row.fitted = std::move(fit.model);
  return row;
}

// For each missing fraction: mask the full observation list, then fit SAD and
// BPR on the same retained observations with their own configs.
inline StudyReport run_simulation_study(const StudyConfig& study) {
  study.sad.validate();
  study.bpr.validate();
  if (study.sad.n_factors < 1 || study.bpr.n_factors < 1) {
    throw UsageError("n_factors must be >= 1");
  }
  StudyReport report{generate_truth(study.spec), {}};
  for (std::size_t f = 0; f < study.missing_fractions.size(); ++f) {
    const double fraction = study.missing_fractions[f];
    Rng mask = make_stream(study.spec.seed, "mask-" + std::to_string(f));
    const std::vector<Observation> kept = mask_missing<Observation>(
        report.truth.observations, fraction, mask);
    report.rows.push_back(fit_study_cell(report.truth, kept, study.spec.kind, fraction,
                                         "sad", study.sad));
    TrainConfig bpr = study.bpr;
    bpr.freeze_right_factors = true;
    report.rows.push_back(
        fit_study_cell(report.truth, kept, study.spec.kind, fraction, "bpr", bpr));
  }
  return report;
}

// `kind,missing_fraction,model,final_loglik,sparsity,mse`
inline void write_study_report(std::ostream& os, const StudyReport& report) {
  char buffer[256];
  os << "kind,missing_fraction,model,final_loglik,sparsity,mse\n";
  for (const auto& row : report.rows) {
    std::snprintf(buffer, sizeof(buffer), "%s,%.17g,%s,%.17g,%.17g,%.17g\n",
                  to_string(row.kind).c_str(), row.missing_fraction, row.model.c_str(),
                  row.final_loglik, row.t_sparsity, row.mse);
    os << buffer;
  }
}

// Per-epoch trajectories behind the report.
inline void write_study_trajectories(std::ostream& os, const StudyReport& report) {
  char buffer[256];
  os << "kind,missing_fraction,model,epoch,mean_loglik,sparsity,mse\n";
  for (const auto& row : report.rows) {
    for (const auto& p : row.trajectory) {
      std::snprintf(buffer, sizeof(buffer), "%s,%.17g,%s,%d,%.17g,%.17g,%.17g\n",
                    to_string(row.kind).c_str(), row.missing_fraction,
                    row.model.c_str(), p.epoch, p.mean_loglik, p.t_sparsity, p.mse);
      os << buffer;
    }
  }
}

// ---------------------------------------------------------------------------
// Rating-log stand-in for desk-scale experiments when no real rating file is
// around. Items have Zipf popularity; each user draws `per_user` distinct
// items with weight popularity * exp(affinity) and rates them 1..5 from the
// same affinity, so ratings carry preference signal.

struct RatingLogSpec {
  Index n_users = 1000;
  Index n_items = 600;
  Index per_user = 60;
  Index n_factors = 8;
  double zipf_exponent = 0.8;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_users < 1 || n_items < 2 || n_factors < 1) {
      throw UsageError("rating log needs n >= 1, m >= 2, k >= 1");
    }
    if (per_user < 1 || per_user > n_items) {
      throw UsageError("rating log needs 1 <= per_user <= m");
    }
  }
};

inline InteractionDataset generate_rating_log(const RatingLogSpec& spec) {
  spec.validate();
  Rng rng = make_stream(spec.seed, "rating-log");
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double(spec.n_factors)));
  std::normal_distribution<double> noise(0.0, 0.5);
  const Matrix users = Matrix::NullaryExpr(spec.n_factors, spec.n_users,
                                           [&] { return normal(rng); });
  const Matrix items = Matrix::NullaryExpr(spec.n_factors, spec.n_items,
                                           [&] { return normal(rng); });
  std::vector<Index> rank(static_cast<std::size_t>(spec.n_items));
  std::iota(rank.begin(), rank.end(), Index{0});
  std::shuffle(rank.begin(), rank.end(), rng);

  InteractionDataset out;
  std::int64_t clock = 956703932;
  std::vector<double> weight(static_cast<std::size_t>(spec.n_items));
  for (Index u = 0; u < spec.n_users; ++u) {
    const Index nu = out.intern_user(std::to_string(u + 1));
    for (Index i = 0; i < spec.n_items; ++i) {
      const double affinity = users.col(u).dot(items.col(i));
      weight[static_cast<std::size_t>(i)] =
          std::pow(double(rank[static_cast<std::size_t>(i)] + 1), -spec.zipf_exponent) *
          std::exp(2.0 * affinity);
    }
    // Weighted draws without replacement, one item at a time.
    for (Index draw = 0; draw < spec.per_user; ++draw) {
      std::discrete_distribution<Index> pick(weight.begin(), weight.end());
      const Index i = pick(rng);
      weight[static_cast<std::size_t>(i)] = 0.0;
      const double affinity = users.col(u).dot(items.col(i)) + noise(rng);
      const int rating = static_cast<int>(std::clamp(std::lround(3.0 + 2.5 * affinity), 1L, 5L));
      clock += 1 + static_cast<std::int64_t>(rng() % 600);
      out.add(nu, Interaction{out.intern_item(std::to_string(i + 1)), rating, clock});
    }
  }
  return out;
}

}  // namespace sadrec

#endif  // SADREC_SIMULATION_HPP_
