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

// Gibbs sampler for the probit variant of the model.
//
// The likelihood p(d = 1 | x) = Phi(x) is augmented with z = x + eps,
// eps ~ N(0, 1), d = sign(z). Given z every factor column enters linearly,
// so with N(0, s^2 I) priors each column has a Gaussian full conditional
// with precision Psi^T Psi + I / s^2 and mean P^{-1} Psi^T zbar. T columns
// keep the same Gaussian restricted to the non-negative orthant.
//
// Only observed (u, i < j) entries carry a z. Conditionals that need z_uji
// for i < j use z_uji = -z_uij.

#ifndef SADREC_GIBBS_HPP_
#define SADREC_GIBBS_HPP_

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sadrec/error.hpp"
#include "sadrec/model.hpp"
#include "sadrec/random.hpp"

namespace sadrec {

// ---------------------------------------------------------------------------
// Truncated normals.

namespace detail {

// Standard normal restricted to (lower, inf). Plain rejection while the
// acceptance rate is reasonable, otherwise Robert's exponential proposal.
inline double sample_standard_tail(double lower, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  if (lower < 0.45) {
    while (true) {
      const double y = normal(rng);
      if (y > lower) return y;
    }
  }
  const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
  std::exponential_distribution<double> exponential(rate);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (true) {
    const double y = lower + exponential(rng);
    const double gap = y - rate;
    if (y > lower && unit(rng) <= std::exp(-0.5 * gap * gap)) return y;
  }
}

inline double log_normal_cdf(double x) {
  // log Phi(x) via erfc, accurate in the lower tail.
  if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  // Asymptotic expansion for the far tail.
  return -0.5 * x * x - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

}  // namespace detail

// N(mean, 1) restricted to (0, inf) for sign = +1 or (-inf, 0] for sign = -1.
inline double sample_truncated_normal(double mean, int sign, Rng& rng) {
  if (sign != 1 && sign != -1) {
    throw ContractError("sample_truncated_normal: sign must be +1 or -1");
  }
  if (sign > 0) {
    while (true) {
      const double value = mean + detail::sample_standard_tail(-mean, rng);
      if (value > 0.0) return value;
    }
  }
  return -(-mean + detail::sample_standard_tail(mean, rng));
}

// N(mean, sd^2) restricted to [0, inf).
inline double sample_positive_normal(double mean, double sd, Rng& rng) {
  return sd * sample_truncated_normal(mean / sd, 1, rng);
}

// ---------------------------------------------------------------------------
// Sampler state.

struct GibbsConfig {
  Index n_factors = 2;
  std::uint64_t seed = 0;
  int n_sweeps = 500;
  int burn_in = 100;
  int thin = 1;
  double prior_variance = 1.0;
  int tau_inner_passes = 2;
  bool keep_samples = false;

  void validate() const {
    if (n_factors < 1) throw UsageError("n_factors must be >= 1");
    if (!(n_sweeps > burn_in && burn_in >= 0)) {
      throw UsageError("need n_sweeps > burn_in >= 0");
    }
    if (thin < 1) throw UsageError("thin must be >= 1");
    if (!(prior_variance > 0.0)) throw UsageError("prior_variance must be > 0");
    if (tau_inner_passes < 1) throw UsageError("tau_inner_passes must be >= 1");
  }
};

class ProbitState {
 public:
  ProbitState(FactorModel model, std::vector<Observation> observations,
              std::uint64_t seed, double prior_variance = 1.0)
      : model_(std::move(model)),
        observations_(std::move(observations)),
        prior_variance_(prior_variance),
        rng_(make_stream(seed, "gibbs")) {
    model_.validate();
    by_user_.resize(static_cast<std::size_t>(model_.n_users()));
    by_item_.resize(static_cast<std::size_t>(model_.n_items()));
    z_.reserve(observations_.size());
    for (std::size_t o = 0; o < observations_.size(); ++o) {
      const Observation& obs = observations_[o];
      model_.check_user(obs.user);
      model_.check_item(obs.preferred);
      model_.check_item(obs.other);
      if (obs.preferred >= obs.other) {
        throw ContractError("ProbitState: observations need i < j");
      }
      if (obs.direction != 1 && obs.direction != -1) {
        throw ContractError("ProbitState: direction must be +1 or -1");
      }
      by_user_[obs.user].push_back(o);
      by_item_[obs.preferred].push_back(o);
      by_item_[obs.other].push_back(o);
      // Any sign-consistent start; the first sweep redraws it.
      z_.push_back(static_cast<double>(obs.direction));
    }
  }

  const FactorModel& model() const { return model_; }
  FactorModel& model() { return model_; }
  std::span<const Observation> observations() const { return observations_; }
  std::span<const double> z() const { return z_; }
  std::span<double> z() { return z_; }
  double prior_variance() const { return prior_variance_; }
  Rng& rng() { return rng_; }

  std::span<const std::size_t> user_observations(Index u) const { return by_user_.at(u); }
  std::span<const std::size_t> item_observations(Index i) const { return by_item_.at(i); }

 private:
  FactorModel model_;
  std::vector<Observation> observations_;
  std::vector<double> z_;
  std::vector<std::vector<std::size_t>> by_user_;
  std::vector<std::vector<std::size_t>> by_item_;
  double prior_variance_;
  Rng rng_;
};

// Log of the augmented joint density p(Z, Xi, H, T) up to the normalizers of
// the orthant-truncated prior on T. -inf outside the support.
inline double log_joint(const ProbitState& state) {
  const FactorModel& model = state.model();
  const auto observations = state.observations();
  const auto z = state.z();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (std::size_t o = 0; o < observations.size(); ++o) {
    const Observation& obs = observations[o];
    if ((z[o] > 0.0) != (obs.direction > 0)) return -kInf;
    const double r = z[o] - detail::preference_unchecked(model, obs.user, obs.preferred,
                                                         obs.other);
    total += -0.5 * r * r - detail::kLogSqrt2Pi;
  }
  if ((model.right_item_factors().array() < 0.0).any()) return -kInf;
  const double s2 = state.prior_variance();
  const double log_norm = -detail::kLogSqrt2Pi - 0.5 * std::log(s2);
  auto prior = [&](const Matrix& m) {
    return -0.5 * m.squaredNorm() / s2 + log_norm * static_cast<double>(m.size());
  };
  total += prior(model.user_factors()) + prior(model.left_item_factors()) +
           prior(model.right_item_factors());
  return total;
}

// ---------------------------------------------------------------------------
// Full conditionals.

// Gaussian (optionally orthant-truncated) conditional for one factor column.
struct ConditionalSpec {
  Matrix design;     // Psi, one row per contributing observation
  Vector response;   // zbar
  Matrix precision;  // Psi^T Psi + I / s^2
  Vector mean;
  bool truncated = false;
};

namespace detail {

inline ConditionalSpec finish_conditional(Matrix design, Vector response,
                                          double prior_variance, bool truncated) {
  ConditionalSpec spec;
  spec.precision = design.transpose() * design;
  spec.precision.diagonal().array() += 1.0 / prior_variance;
  Eigen::LLT<Matrix> llt(spec.precision);
  if (llt.info() != Eigen::Success) {
    throw DivergenceError(
        "Cholesky of a conditional precision failed; the state holds non-finite values");
  }
  spec.mean = llt.solve(design.transpose() * response);
  spec.design = std::move(design);
  spec.response = std::move(response);
  spec.truncated = truncated;
  return spec;
}

}  // namespace detail

// xi_u | rest: rows eta_i * tau_j - eta_j * tau_i, response z_uij.
inline ConditionalSpec user_conditional(const ProbitState& state, Index u) {
  const FactorModel& model = state.model();
  model.check_user(u);
  const auto rows = state.user_observations(u);
  const Index k = model.n_factors();
  Matrix design(static_cast<Index>(rows.size()), k);
  Vector response(static_cast<Index>(rows.size()));
  const Matrix& eta = model.left_item_factors();
  const Matrix& tau = model.right_item_factors();
  for (Index r = 0; r < static_cast<Index>(rows.size()); ++r) {
    const std::size_t o = rows[r];
    const Observation& obs = state.observations()[o];
    design.row(r) = (eta.col(obs.preferred).array() * tau.col(obs.other).array() -
                     eta.col(obs.other).array() * tau.col(obs.preferred).array())
                        .matrix()
                        .transpose();
    response[r] = state.z()[o];
  }
  return detail::finish_conditional(std::move(design), std::move(response),
                                    state.prior_variance(), false);
}

// eta_i | rest: for a rival j, rows xi_u * tau_j, response
// z_uij + sum_h xi_hu tau_hi eta_hj (with z_uij = -z_uji when i > j).
inline ConditionalSpec left_item_conditional(const ProbitState& state, Index i) {
  const FactorModel& model = state.model();
  model.check_item(i);
  const auto rows = state.item_observations(i);
  const Index k = model.n_factors();
  Matrix design(static_cast<Index>(rows.size()), k);
  Vector response(static_cast<Index>(rows.size()));
  const Matrix& xi = model.user_factors();
  const Matrix& eta = model.left_item_factors();
  const Matrix& tau = model.right_item_factors();
  for (Index r = 0; r < static_cast<Index>(rows.size()); ++r) {
    const std::size_t o = rows[r];
    const Observation& obs = state.observations()[o];
    const bool first = obs.preferred == i;
    const Index rival = first ? obs.other : obs.preferred;
    const double z_oriented = first ? state.z()[o] : -state.z()[o];
    const auto xi_u = xi.col(obs.user).array();
    design.row(r) = (xi_u * tau.col(rival).array()).matrix().transpose();
    response[r] =
        z_oriented + (xi_u * tau.col(i).array() * eta.col(rival).array()).sum();
  }
  return detail::finish_conditional(std::move(design), std::move(response),
                                    state.prior_variance(), false);
}

// tau_j | rest, truncated to tau_j >= 0: for a rival i, rows xi_u * eta_i,
// response z_uij + sum_h xi_hu tau_hi eta_hj (z_uij = -z_uji when i > j).
inline ConditionalSpec right_item_conditional(const ProbitState& state, Index j) {
  const FactorModel& model = state.model();
  model.check_item(j);
  const auto rows = state.item_observations(j);
  const Index k = model.n_factors();
  Matrix design(static_cast<Index>(rows.size()), k);
  Vector response(static_cast<Index>(rows.size()));
  const Matrix& xi = model.user_factors();
  const Matrix& eta = model.left_item_factors();
  const Matrix& tau = model.right_item_factors();
  for (Index r = 0; r < static_cast<Index>(rows.size()); ++r) {
    const std::size_t o = rows[r];
    const Observation& obs = state.observations()[o];
    const bool second = obs.other == j;
    const Index rival = second ? obs.preferred : obs.other;
    const double z_oriented = second ? state.z()[o] : -state.z()[o];
    const auto xi_u = xi.col(obs.user).array();
    design.row(r) = (xi_u * eta.col(rival).array()).matrix().transpose();
    response[r] =
        z_oriented + (xi_u * tau.col(rival).array() * eta.col(j).array()).sum();
  }
  return detail::finish_conditional(std::move(design), std::move(response),
                                    state.prior_variance(), true);
}

// Log density of the conditional at `value`. Exact for the Gaussian case;
// for the truncated case the orthant normalizer is omitted (it cancels in
// ratios) and values outside the orthant give -inf.
inline double log_conditional_density(const ConditionalSpec& spec,
                                      const Eigen::Ref<const Vector>& value) {
  if (spec.truncated && (value.array() < 0.0).any()) {
    return -std::numeric_limits<double>::infinity();
  }
  const Vector diff = value - spec.mean;
  Eigen::LLT<Matrix> llt(spec.precision);
  const Matrix& l = llt.matrixLLT();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  return -0.5 * diff.dot(spec.precision * diff) + 0.5 * log_det -
         detail::kLogSqrt2Pi * static_cast<double>(diff.size());
}

// Log density of z for one observation given the factors: N(x, 1)
// restricted to the half-line of its label, normalized.
inline double log_z_conditional(const ProbitState& state, std::size_t o, double value) {
  const Observation& obs = state.observations()[o];
  if ((value > 0.0) != (obs.direction > 0)) {
    return -std::numeric_limits<double>::infinity();
  }
  const double x =
      detail::preference_unchecked(state.model(), obs.user, obs.preferred, obs.other);
  const double r = value - x;
  return -0.5 * r * r - detail::kLogSqrt2Pi -
         detail::log_normal_cdf(obs.direction > 0 ? x : -x);
}

// ---------------------------------------------------------------------------
// Draws.

namespace detail {

inline Vector draw_gaussian(const ConditionalSpec& spec, Rng& rng) {
  Eigen::LLT<Matrix> llt(spec.precision);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector eps(spec.mean.size());
  for (Index h = 0; h < eps.size(); ++h) eps[h] = normal(rng);
  // If P = L L^T then L^{-T} eps ~ N(0, P^{-1}).
  return spec.mean + llt.matrixU().solve(eps);
}

inline void check_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) {
    throw DivergenceError(std::string("non-finite draw for ") + what);
  }
}

}  // namespace detail

// Redraws every z from its truncated normal.
inline void sample_z(ProbitState& state) {
  const auto observations = state.observations();
  auto z = state.z();
  for (std::size_t o = 0; o < observations.size(); ++o) {
    const Observation& obs = observations[o];
    const double x =
        detail::preference_unchecked(state.model(), obs.user, obs.preferred, obs.other);
    z[o] = sample_truncated_normal(x, obs.direction, state.rng());
  }
}

inline void sample_user_factor(ProbitState& state, Index u) {
  const ConditionalSpec spec = user_conditional(state, u);
  Vector draw = detail::draw_gaussian(spec, state.rng());
  detail::check_finite(draw, "user factor");
  state.model().user_factors().col(u) = draw;
}

inline void sample_left_item_factor(ProbitState& state, Index i) {
  const ConditionalSpec spec = left_item_conditional(state, i);
  Vector draw = detail::draw_gaussian(spec, state.rng());
  detail::check_finite(draw, "left item factor");
  state.model().left_item_factors().col(i) = draw;
}

// Orthant-truncated Gaussian via coordinate-wise Gibbs: each coordinate is
// a one-dimensional truncated normal given the others, started from the
// current value.
inline void sample_right_item_factor(ProbitState& state, Index j, int inner_passes = 2) {
  const ConditionalSpec spec = right_item_conditional(state, j);
  auto tau = state.model().right_item_factors().col(j);
  const Matrix& p = spec.precision;
  for (int pass = 0; pass < inner_passes; ++pass) {
    for (Index h = 0; h < tau.size(); ++h) {
      double shift = 0.0;
      for (Index l = 0; l < tau.size(); ++l) {
        if (l != h) shift += p(h, l) * (tau[l] - spec.mean[l]);
      }
      const double mean = spec.mean[h] - shift / p(h, h);
      const double sd = 1.0 / std::sqrt(p(h, h));
      const double value = sample_positive_normal(mean, sd, state.rng());
      if (!std::isfinite(value)) {
        throw DivergenceError("non-finite draw for right item factor");
      }
      tau[h] = value;
    }
  }
}

// ---------------------------------------------------------------------------
// Chains.

struct PosteriorSummary {
  Matrix user_mean, user_sd;
  Matrix left_mean, left_sd;
  Matrix right_mean, right_sd;
  Index n_samples = 0;
};

struct ChainResult {
  std::vector<double> log_joint_trace;  // one entry per sweep
  std::vector<FactorModel> samples;     // thinned, post burn-in (if kept)
  PosteriorSummary summary;
  FactorModel final_model;
};

// Xi, H ~ N(0, s^2) and T = 1 on the "gibbs-init" stream.
inline FactorModel initialize_chain_model(Index n_users, Index n_items,
                                          const GibbsConfig& config) {
  Rng rng = make_stream(config.seed, "gibbs-init");
  std::normal_distribution<double> normal(0.0, std::sqrt(config.prior_variance));
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

// One sweep: all z, then every xi_u, every eta_i, every tau_j.
inline void gibbs_sweep(ProbitState& state, int tau_inner_passes = 2) {
  sample_z(state);
  for (Index u = 0; u < state.model().n_users(); ++u) sample_user_factor(state, u);
  for (Index i = 0; i < state.model().n_items(); ++i) sample_left_item_factor(state, i);
  for (Index j = 0; j < state.model().n_items(); ++j) {
    sample_right_item_factor(state, j, tau_inner_passes);
  }
}

inline ChainResult run_chain(Index n_users, Index n_items,
                             std::vector<Observation> observations,
                             const GibbsConfig& config) {
  config.validate();
  ProbitState state(initialize_chain_model(n_users, n_items, config),
                    std::move(observations), config.seed, config.prior_variance);
  ChainResult result;
  const Index k = config.n_factors;
  PosteriorSummary& s = result.summary;
  s.user_mean = Matrix::Zero(k, n_users);
  s.user_sd = Matrix::Zero(k, n_users);
  s.left_mean = Matrix::Zero(k, n_items);
  s.left_sd = Matrix::Zero(k, n_items);
  s.right_mean = Matrix::Zero(k, n_items);
  s.right_sd = Matrix::Zero(k, n_items);
  // Welford accumulators; *_sd hold sums of squared deviations until the end.
  auto accumulate = [&](Matrix& mean, Matrix& m2, const Matrix& value) {
    const Matrix delta = value - mean;
    mean += delta / static_cast<double>(s.n_samples);
    m2 += (delta.array() * (value - mean).array()).matrix();
  };

  result.log_joint_trace.reserve(static_cast<std::size_t>(config.n_sweeps));
  for (int sweep = 0; sweep < config.n_sweeps; ++sweep) {
    try {
      gibbs_sweep(state, config.tau_inner_passes);
    } catch (const DivergenceError& e) {
      throw DivergenceError("sampler failed at sweep " + std::to_string(sweep) + ": " +
                            e.what());
    }
    const double lj = log_joint(state);
    if (!std::isfinite(lj) || !state.model().all_finite()) {
      throw DivergenceError("sampler produced non-finite state at sweep " +
                            std::to_string(sweep));
    }
    result.log_joint_trace.push_back(lj);
    if (sweep >= config.burn_in && (sweep - config.burn_in) % config.thin == 0) {
      ++s.n_samples;
      const FactorModel& m = state.model();
      accumulate(s.user_mean, s.user_sd, m.user_factors());
      accumulate(s.left_mean, s.left_sd, m.left_item_factors());
      accumulate(s.right_mean, s.right_sd, m.right_item_factors());
      if (config.keep_samples) result.samples.push_back(m);
    }
  }
  auto finish = [&](Matrix& m2) {
    const double denom = s.n_samples > 1 ? static_cast<double>(s.n_samples - 1) : 1.0;
    m2 = (m2 / denom).array().sqrt().matrix();
  };
  finish(s.user_sd);
  finish(s.left_sd);
  finish(s.right_sd);
  result.final_model = state.model();
  return result;
}

// `parameter,factor,index,mean,sd` for every entry of Xi ("xi"), H ("eta")
// and T ("tau").
inline void write_posterior_summary(std::ostream& os, const PosteriorSummary& s) {
  char buffer[160];
  os << "parameter,factor,index,mean,sd\n";
  auto emit = [&](const char* name, const Matrix& mean, const Matrix& sd) {
    for (Index c = 0; c < mean.cols(); ++c) {
      for (Index h = 0; h < mean.rows(); ++h) {
        std::snprintf(buffer, sizeof(buffer), "%s,%lld,%lld,%.17g,%.17g\n", name,
                      static_cast<long long>(h), static_cast<long long>(c), mean(h, c),
                      sd(h, c));
        os << buffer;
      }
    }
  };
  emit("xi", s.user_mean, s.user_sd);
  emit("eta", s.left_mean, s.left_sd);
  emit("tau", s.right_mean, s.right_sd);
}

}  // namespace sadrec

#endif  // SADREC_GIBBS_HPP_
