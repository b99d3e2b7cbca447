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

// The sliced anti-symmetric factor model.
//
// For user u and items i, j the log-odds that u prefers i over j is
//
//   x_uij = sum_h xi_hu * (eta_hi * tau_hj - eta_hj * tau_hi)
//
// with user factors Xi (k x n), left item factors H (k x m) and non-negative
// right item factors T (k x m). Each per-user slice X_u is anti-symmetric.
// Fixing T to all ones recovers the classic BPR score <xi_u, eta_i - eta_j>.

#ifndef SADREC_MODEL_HPP_
#define SADREC_MODEL_HPP_

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sadrec/error.hpp"

namespace sadrec {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Dense slices larger than this many items are refused.
inline constexpr Index kDiagnosticItemLimit = 2048;

struct Observation {
  Index user = 0;
  Index preferred = 0;  // i
  Index other = 0;      // j
  int direction = 1;    // d_uij in {-1, +1}

  friend bool operator==(const Observation&, const Observation&) = default;
};

class FactorModel {
 public:
  FactorModel() = default;

  FactorModel(Index n_users, Index n_items, Index n_factors)
      : user_factors_(Matrix::Zero(n_factors, n_users)),
        left_item_factors_(Matrix::Zero(n_factors, n_items)),
        right_item_factors_(Matrix::Ones(n_factors, n_items)) {}

  FactorModel(Matrix user_factors, Matrix left_item_factors,
              Matrix right_item_factors)
      : user_factors_(std::move(user_factors)),
        left_item_factors_(std::move(left_item_factors)),
        right_item_factors_(std::move(right_item_factors)) {
    validate();
  }

  Index n_users() const { return user_factors_.cols(); }
  Index n_items() const { return left_item_factors_.cols(); }
  Index n_factors() const { return user_factors_.rows(); }

  const Matrix& user_factors() const { return user_factors_; }
  const Matrix& left_item_factors() const { return left_item_factors_; }
  const Matrix& right_item_factors() const { return right_item_factors_; }

  // Mutable access is for trainers and samplers, which own the model while
  // they run and must keep T non-negative.
  Matrix& user_factors() { return user_factors_; }
  Matrix& left_item_factors() { return left_item_factors_; }
  Matrix& right_item_factors() { return right_item_factors_; }

  void check_user(Index u) const {
    if (u < 0 || u >= n_users()) {
      throw IndexError("user index " + std::to_string(u) + " out of range [0, " +
                       std::to_string(n_users()) + ")");
    }
  }
  void check_item(Index i) const {
    if (i < 0 || i >= n_items()) {
      throw IndexError("item index " + std::to_string(i) + " out of range [0, " +
                       std::to_string(n_items()) + ")");
    }
  }

  // Throws ContractError when shapes disagree or T has a negative entry.
  void validate() const {
    const Index k = user_factors_.rows();
    if (left_item_factors_.rows() != k || right_item_factors_.rows() != k) {
      throw ContractError("factor matrices disagree on the number of factors");
    }
    if (left_item_factors_.cols() != right_item_factors_.cols()) {
      throw ContractError("left and right item factors disagree on item count");
    }
    if ((right_item_factors_.array() < 0.0).any()) {
      throw ContractError("right item factors must be non-negative");
    }
  }

  bool all_finite() const {
    return user_factors_.allFinite() && left_item_factors_.allFinite() &&
           right_item_factors_.allFinite();
  }

  friend bool operator==(const FactorModel& a, const FactorModel& b) {
    return a.user_factors_.rows() == b.user_factors_.rows() &&
           a.user_factors_.cols() == b.user_factors_.cols() &&
           a.left_item_factors_.cols() == b.left_item_factors_.cols() &&
           a.user_factors_ == b.user_factors_ &&
           a.left_item_factors_ == b.left_item_factors_ &&
           a.right_item_factors_ == b.right_item_factors_;
  }

 private:
  Matrix user_factors_;
  Matrix left_item_factors_;
  Matrix right_item_factors_;
};

// ---------------------------------------------------------------------------
// Scalar helpers.

// 1 / (1 + exp(-x)), branched on sign so neither exp overflows.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) = -log(1 + exp(-x)).
inline double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

// log p(d | x) under the logistic link: log sigmoid(d * x).
inline double log_bernoulli(int direction, double x) {
  return direction > 0 ? log_sigmoid(x) : log_sigmoid(-x);
}

// Fraction of entries within `tol` of 1: the dead zone of the l1 prior on T.
inline double sparsity(const Matrix& right_item_factors, double tol = 0.05) {
  if (!(tol > 0.0)) throw ContractError("sparsity: tol must be positive");
  if (right_item_factors.size() == 0) return 1.0;
  const auto inside =
      ((right_item_factors.array() - 1.0).abs() < tol).count();
  return static_cast<double>(inside) /
         static_cast<double>(right_item_factors.size());
}

// ---------------------------------------------------------------------------
// Preference computations.

namespace detail {

inline double preference_unchecked(const FactorModel& model, Index u, Index i,
                                   Index j) {
  if (i == j) return 0.0;
  if (i > j) return -preference_unchecked(model, u, j, i);
  const auto xi = model.user_factors().col(u);
  const auto eta_i = model.left_item_factors().col(i);
  const auto eta_j = model.left_item_factors().col(j);
  const auto tau_i = model.right_item_factors().col(i);
  const auto tau_j = model.right_item_factors().col(j);
  double x = 0.0;
  for (Index h = 0; h < model.n_factors(); ++h) {
    x += xi[h] * (eta_i[h] * tau_j[h] - eta_j[h] * tau_i[h]);
  }
  return x;
}

}  // namespace detail

// x_uij. Computed once for the ordered pair (min, max) and negated for the
// swap, so anti-symmetry and the zero diagonal hold exactly.
inline double preference(const FactorModel& model, Index u, Index i, Index j) {
  model.check_user(u);
  model.check_item(i);
  model.check_item(j);
  return detail::preference_unchecked(model, u, i, j);
}

inline double prob_prefer(const FactorModel& model, Index u, Index i, Index j) {
  return sigmoid(preference(model, u, i, j));
}

// Dense anti-symmetric slice X_u (m x m).
inline Matrix user_slice(const FactorModel& model, Index u,
                         Index item_limit = kDiagnosticItemLimit) {
  model.check_user(u);
  const Index m = model.n_items();
  if (m > item_limit) {
    throw ContractError("user_slice: " + std::to_string(m) +
                        " items exceeds the diagnostic limit of " +
                        std::to_string(item_limit));
  }
  Matrix slice = Matrix::Zero(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = i + 1; j < m; ++j) {
      const double x = detail::preference_unchecked(model, u, i, j);
      slice(i, j) = x;
      slice(j, i) = -x;
    }
  }
  return slice;
}

// Sum over observations of log p(d_uij | x_uij). Each term needs i < j so
// that an unordered pair is never counted twice.
inline double log_likelihood(const FactorModel& model,
                             std::span<const Observation> observations) {
  double total = 0.0;
  for (const Observation& obs : observations) {
    if (obs.preferred >= obs.other) {
      throw ContractError("log_likelihood: observation requires i < j (got i=" +
                          std::to_string(obs.preferred) +
                          ", j=" + std::to_string(obs.other) + ")");
    }
    total += log_bernoulli(obs.direction,
                           preference(model, obs.user, obs.preferred, obs.other));
  }
  return total;
}

// x_uij - x_uit - x_utj; zero when the ternary is additively transitive.
inline double transitivity_residual(const FactorModel& model, Index u, Index i,
                                    Index t, Index j) {
  if (i == t || i == j || t == j) {
    throw ContractError("transitivity_residual: items must be pairwise distinct");
  }
  return preference(model, u, i, j) - preference(model, u, i, t) -
         preference(model, u, t, j);
}

// Ordered triple (a, b, c) with a > b > c > a under strict preference.
struct PreferenceCycle {
  Index first = 0;
  Index second = 0;
  Index third = 0;

  friend bool operator==(const PreferenceCycle&,
                         const PreferenceCycle&) = default;
};

// Every ordered triple (i, j, t) from `items` with x_uij > 0, x_ujt > 0 and
// x_uti > 0. Each cycle appears three times, once per rotation.
inline std::vector<PreferenceCycle> find_preference_cycles(
    const FactorModel& model, Index u, std::span<const Index> items,
    Index item_limit = kDiagnosticItemLimit) {
  model.check_user(u);
  const auto count = static_cast<Index>(items.size());
  if (count > item_limit) {
    throw ContractError("find_preference_cycles: subset exceeds diagnostic limit");
  }
  for (Index item : items) model.check_item(item);

  Matrix x = Matrix::Zero(count, count);
  for (Index a = 0; a < count; ++a) {
    for (Index b = a + 1; b < count; ++b) {
      x(a, b) = detail::preference_unchecked(model, u, items[a], items[b]);
      x(b, a) = -x(a, b);
    }
  }
  std::vector<PreferenceCycle> cycles;
  for (Index a = 0; a < count; ++a) {
    for (Index b = 0; b < count; ++b) {
      if (!(x(a, b) > 0.0)) continue;
      for (Index c = 0; c < count; ++c) {
        if (x(b, c) > 0.0 && x(c, a) > 0.0) {
          cycles.push_back({items[a], items[b], items[c]});
        }
      }
    }
  }
  return cycles;
}

}  // namespace sadrec

#endif  // SADREC_MODEL_HPP_
