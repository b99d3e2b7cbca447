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

// Interaction datasets: loading, the implicit (membership-only) view seen by
// trainers, leave-one-interaction-out splits and negative sampling.

#ifndef SADREC_DATASET_HPP_
#define SADREC_DATASET_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sadrec/error.hpp"
#include "sadrec/model.hpp"
#include "sadrec/random.hpp"

namespace sadrec {

enum class InputFormat {
  kCsv,          // user,item,rating[,timestamp] with optional header
  kDoubleColon,  // user::item::rating::timestamp
};

struct Interaction {
  Index item = 0;
  std::optional<int> rating;
  std::optional<std::int64_t> timestamp;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

class ImplicitView;

// Users, items and per-user interaction lists. Ratings are kept for
// evaluation only; trainers see the data through ImplicitView.
class InteractionDataset {
 public:
  InteractionDataset() = default;

  Index n_users() const { return static_cast<Index>(user_ids_.size()); }
  Index n_items() const { return static_cast<Index>(item_ids_.size()); }
  std::size_t n_interactions() const {
    std::size_t total = 0;
    for (const auto& list : interactions_) total += list.size();
    return total;
  }
  bool empty() const { return n_interactions() == 0; }

  const std::string& user_id(Index u) const { return user_ids_.at(u); }
  const std::string& item_id(Index i) const { return item_ids_.at(i); }
  const std::vector<std::string>& user_ids() const { return user_ids_; }
  const std::vector<std::string>& item_ids() const { return item_ids_; }

  std::span<const Interaction> interactions(Index u) const {
    return interactions_.at(u);
  }

  // Returns the dense index for an external id, registering it if new.
  Index intern_user(const std::string& id) {
    auto [it, inserted] = user_index_.try_emplace(id, n_users());
    if (inserted) {
      user_ids_.push_back(id);
      interactions_.emplace_back();
    }
    return it->second;
  }
  Index intern_item(const std::string& id) {
    auto [it, inserted] = item_index_.try_emplace(id, n_items());
    if (inserted) item_ids_.push_back(id);
    return it->second;
  }

  std::optional<Index> find_user(const std::string& id) const {
    auto it = user_index_.find(id);
    if (it == user_index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<Index> find_item(const std::string& id) const {
    auto it = item_index_.find(id);
    if (it == item_index_.end()) return std::nullopt;
    return it->second;
  }

  // Appends an interaction; returns false (and changes nothing) if the
  // (user, item) pair is already present.
  bool add(Index u, Interaction interaction) {
    auto& list = interactions_.at(u);
    if (interaction.item < 0 || interaction.item >= n_items()) {
      throw IndexError("item index out of range in add()");
    }
    if (!pairs_.insert(pair_key(u, interaction.item)).second) return false;
    list.push_back(interaction);
    return true;
  }

  const Interaction* find(Index u, Index item) const {
    for (const auto& interaction : interactions_.at(u)) {
      if (interaction.item == item) return &interaction;
    }
    return nullptr;
  }

  // Drops the interaction with `item` from user u's list.
  void remove(Index u, Index item) {
    auto& list = interactions_.at(u);
    if (pairs_.erase(pair_key(u, item)) == 0) return;
    std::erase_if(list, [item](const Interaction& x) { return x.item == item; });
  }

  friend bool operator==(const InteractionDataset& a,
                         const InteractionDataset& b) {
    return a.user_ids_ == b.user_ids_ && a.item_ids_ == b.item_ids_ &&
           a.interactions_ == b.interactions_;
  }

 private:
  std::vector<std::string> user_ids_;
  std::vector<std::string> item_ids_;
  std::unordered_map<std::string, Index> user_index_;
  std::unordered_map<std::string, Index> item_index_;
  std::vector<std::vector<Interaction>> interactions_;
  std::unordered_set<std::uint64_t> pairs_;

  static std::uint64_t pair_key(Index u, Index item) {
    return (static_cast<std::uint64_t>(u) << 32) ^ static_cast<std::uint64_t>(item);
  }
};

// Membership-only view of a dataset. This is the only form in which trainers
// receive data: it has no access path to ratings or timestamps.
class ImplicitView {
 public:
  explicit ImplicitView(const InteractionDataset& dataset)
      : n_users_(dataset.n_users()), n_items_(dataset.n_items()) {
    items_.resize(n_users_);
    sorted_.resize(n_users_);
    for (Index u = 0; u < n_users_; ++u) {
      for (const auto& interaction : dataset.interactions(u)) {
        items_[u].push_back(interaction.item);
      }
      sorted_[u] = items_[u];
      std::sort(sorted_[u].begin(), sorted_[u].end());
    }
  }

  ImplicitView(Index n_users, Index n_items,
               std::vector<std::vector<Index>> items)
      : n_users_(n_users), n_items_(n_items), items_(std::move(items)) {
    if (static_cast<Index>(items_.size()) != n_users_) {
      throw ContractError("ImplicitView: one item list per user required");
    }
    sorted_.resize(n_users_);
    for (Index u = 0; u < n_users_; ++u) {
      for (Index i : items_[u]) {
        if (i < 0 || i >= n_items_) throw IndexError("ImplicitView: item out of range");
      }
      sorted_[u] = items_[u];
      std::sort(sorted_[u].begin(), sorted_[u].end());
      if (std::adjacent_find(sorted_[u].begin(), sorted_[u].end()) !=
          sorted_[u].end()) {
        throw ContractError("ImplicitView: duplicate item for user " +
                            std::to_string(u));
      }
    }
  }

  Index n_users() const { return n_users_; }
  Index n_items() const { return n_items_; }

  // Interacted items of u in dataset order.
  std::span<const Index> items(Index u) const { return items_.at(u); }

  bool contains(Index u, Index item) const {
    const auto& sorted = sorted_.at(u);
    return std::binary_search(sorted.begin(), sorted.end(), item);
  }

  Index n_non_interacted(Index u) const {
    return n_items_ - static_cast<Index>(items_.at(u).size());
  }

 private:
  Index n_users_ = 0;
  Index n_items_ = 0;
  std::vector<std::vector<Index>> items_;
  std::vector<std::vector<Index>> sorted_;
};

// ---------------------------------------------------------------------------
// Loading.

struct LoadOptions {
  InputFormat format = InputFormat::kCsv;
  Index min_item_count = 0;
  std::optional<Index> top_users;
};

namespace detail {

struct RawRecord {
  std::string user;
  std::string item;
  std::optional<int> rating;
  std::optional<std::int64_t> timestamp;
};

inline std::vector<std::string_view> split_fields(std::string_view line,
                                                  std::string_view delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + delimiter.size();
  }
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

template <typename T>
std::optional<T> parse_integer(std::string_view s) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

// Ratings are small integers; "4.0" style values with a zero fraction are
// accepted as well.
inline std::optional<int> parse_rating(std::string_view s) {
  if (auto value = parse_integer<int>(s)) return value;
  const std::size_t dot = s.find('.');
  if (dot == std::string_view::npos) return std::nullopt;
  const auto whole = parse_integer<int>(s.substr(0, dot));
  const std::string_view fraction = s.substr(dot + 1);
  if (!whole || fraction.empty() ||
      fraction.find_first_not_of('0') != std::string_view::npos) {
    return std::nullopt;
  }
  return whole;
}

inline std::vector<RawRecord> parse_records(std::istream& is,
                                            InputFormat format,
                                            const std::string& source) {
  const std::string_view delimiter = format == InputFormat::kCsv ? "," : "::";
  std::vector<RawRecord> records;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view, delimiter);
    auto fail = [&](const std::string& why) -> DataError {
      return DataError(source + ":" + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() < 2 || fields.size() > 4) {
      throw fail("expected user" + std::string(delimiter) + "item" +
                 std::string(delimiter) + "rating[" + std::string(delimiter) +
                 "timestamp], got " + std::to_string(fields.size()) + " fields");
    }
    RawRecord record;
    record.user = std::string(trim(fields[0]));
    record.item = std::string(trim(fields[1]));
    if (record.user.empty() || record.item.empty()) throw fail("empty id");
    if (fields.size() >= 3 && !trim(fields[2]).empty()) {
      record.rating = parse_rating(trim(fields[2]));
      if (!record.rating) {
        // A non-numeric first line in comma format is a header.
        if (format == InputFormat::kCsv && records.empty() && line_no == 1) continue;
        throw fail("bad rating '" + std::string(fields[2]) + "'");
      }
    }
    if (fields.size() == 4 && !trim(fields[3]).empty()) {
      record.timestamp = parse_integer<std::int64_t>(trim(fields[3]));
      if (!record.timestamp) throw fail("bad timestamp '" + std::string(fields[3]) + "'");
    }
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace detail

// Parses, filters and indexes interaction records. Filters run in order:
// keep the `top_users` most active users, drop items with fewer than
// `min_item_count` interactions, then drop users left with none. Indices are
// assigned by first appearance among the surviving records. Repeated
// (user, item) pairs keep their first occurrence.
inline InteractionDataset load_interactions(std::istream& is,
                                            const LoadOptions& options,
                                            const std::string& source = "<input>") {
  auto records = detail::parse_records(is, options.format, source);

  if (options.top_users) {
    std::unordered_map<std::string, std::size_t> activity;
    std::vector<std::string> order;
    for (const auto& r : records) {
      if (activity[r.user]++ == 0) order.push_back(r.user);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](const std::string& a, const std::string& b) {
                       return activity[a] > activity[b];
                     });
    if (static_cast<Index>(order.size()) > *options.top_users) {
      order.resize(static_cast<std::size_t>(*options.top_users));
    }
    std::unordered_map<std::string, bool> keep;
    for (const auto& u : order) keep[u] = true;
    std::erase_if(records, [&](const detail::RawRecord& r) { return !keep.count(r.user); });
  }

  if (options.min_item_count > 1) {
    std::unordered_map<std::string, Index> counts;
    for (const auto& r : records) ++counts[r.item];
    std::erase_if(records, [&](const detail::RawRecord& r) {
      return counts[r.item] < options.min_item_count;
    });
  }

  InteractionDataset dataset;
  for (const auto& r : records) {
    const Index u = dataset.intern_user(r.user);
    const Index i = dataset.intern_item(r.item);
    dataset.add(u, Interaction{i, r.rating, r.timestamp});
  }
  if (dataset.empty()) throw DataError(source + ": dataset is empty after filtering");
  return dataset;
}

inline InteractionDataset load_interactions(const std::filesystem::path& path,
                                            const LoadOptions& options) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open dataset " + path.string());
  return load_interactions(is, options, path.string());
}

// Canonical comma-separated dump sorted by (user index, item index), no
// header. Loading a canonical dump and writing it again reproduces it.
inline void write_dataset(std::ostream& os, const InteractionDataset& dataset) {
  std::vector<Interaction> sorted;
  for (Index u = 0; u < dataset.n_users(); ++u) {
    const auto list = dataset.interactions(u);
    sorted.assign(list.begin(), list.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const Interaction& a, const Interaction& b) { return a.item < b.item; });
    for (const auto& x : sorted) {
      os << dataset.user_id(u) << ',' << dataset.item_id(x.item) << ',';
      if (x.rating) os << *x.rating;
      if (x.timestamp) os << ',' << *x.timestamp;
      os << '\n';
    }
  }
}

inline void save_dataset(const std::filesystem::path& path,
                         const InteractionDataset& dataset) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  write_dataset(os, dataset);
}

// Keeps `count` users chosen uniformly at random (all users if fewer), then
// drops items nobody in the sample touched. Users keep their relative order.
inline InteractionDataset subsample_users(const InteractionDataset& dataset,
                                          Index count, std::uint64_t seed) {
  std::vector<Index> users(static_cast<std::size_t>(dataset.n_users()));
  std::iota(users.begin(), users.end(), Index{0});
  if (count < dataset.n_users()) {
    Rng rng = make_stream(seed, "subsample");
    std::shuffle(users.begin(), users.end(), rng);
    users.resize(static_cast<std::size_t>(count));
    std::sort(users.begin(), users.end());
  }
  InteractionDataset out;
  for (Index u : users) {
    const Index nu = out.intern_user(dataset.user_id(u));
    for (auto x : dataset.interactions(u)) {
      x.item = out.intern_item(dataset.item_id(x.item));
      out.add(nu, x);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling.

// Uniform draw from the items u has not interacted with. Rejection against
// the full item range when at least half the catalogue is free (expected
// fewer than two tries), explicit enumeration otherwise.
inline Index sample_negative(const ImplicitView& view, Index u, Rng& rng) {
  const Index free = view.n_non_interacted(u);
  if (free <= 0) {
    throw DataError("user " + std::to_string(u) + " has no non-interacted item");
  }
  if (2 * free >= view.n_items()) {
    std::uniform_int_distribution<Index> pick(0, view.n_items() - 1);
    while (true) {
      const Index item = pick(rng);
      if (!view.contains(u, item)) return item;
    }
  }
  std::uniform_int_distribution<Index> pick(0, free - 1);
  Index target = pick(rng);
  for (Index item = 0; item < view.n_items(); ++item) {
    if (view.contains(u, item)) continue;
    if (target-- == 0) return item;
  }
  throw DataError("sample_negative: inconsistent view");  // unreachable
}

// Drops round(fraction * N) observations chosen uniformly; survivors keep
// their original order.
template <typename T>
std::vector<T> mask_missing(std::span<const T> observations, double fraction,
                            Rng& rng) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw ContractError("mask_missing: fraction must lie in [0, 1)");
  }
  const std::size_t n = observations.size();
  const auto n_drop = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> dropped(n, 0);
  for (std::size_t k = 0; k < n_drop; ++k) dropped[order[k]] = 1;
  std::vector<T> kept;
  kept.reserve(n - n_drop);
  for (std::size_t k = 0; k < n; ++k) {
    if (!dropped[k]) kept.push_back(observations[k]);
  }
  return kept;
}

// Pairwise observations implied by implicit feedback: for each user, every
// pair i < j with exactly one of the two interacted. d = +1 when i is the
// interacted one. Pairs with both or neither interacted are missing.
inline std::vector<Observation> implicit_observations(const ImplicitView& view) {
  std::vector<Observation> out;
  for (Index u = 0; u < view.n_users(); ++u) {
    for (Index i = 0; i < view.n_items(); ++i) {
      const bool has_i = view.contains(u, i);
      for (Index j = i + 1; j < view.n_items(); ++j) {
        const bool has_j = view.contains(u, j);
        if (has_i != has_j) out.push_back({u, i, j, has_i ? 1 : -1});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Leave-one-interaction-out splits.

struct LooSplit {
  InteractionDataset train;
  // Held-out interaction per user; empty for users with a single interaction.
  std::vector<std::optional<Interaction>> holdout;
  // Sampled never-interacted items per user holding out an item.
  std::vector<std::vector<Index>> test_negatives;
  std::uint64_t seed = 0;
};

inline constexpr Index kDefaultTestNegatives = 100;

inline LooSplit loo_split(const InteractionDataset& dataset, std::uint64_t seed,
                          Index n_negatives = kDefaultTestNegatives) {
  if (dataset.empty()) throw DataError("loo_split: empty dataset");
  Rng rng = make_stream(seed, "split");
  LooSplit split;
  split.seed = seed;
  split.train = dataset;
  split.holdout.resize(static_cast<std::size_t>(dataset.n_users()));
  split.test_negatives.resize(static_cast<std::size_t>(dataset.n_users()));

  const ImplicitView full(dataset);
  std::vector<Index> pool;
  for (Index u = 0; u < dataset.n_users(); ++u) {
    const auto list = dataset.interactions(u);
    if (list.size() < 2) continue;
    std::uniform_int_distribution<std::size_t> pick(0, list.size() - 1);
    const Interaction held = list[pick(rng)];
    split.holdout[u] = held;
    split.train.remove(u, held.item);

    pool.clear();
    for (Index item = 0; item < dataset.n_items(); ++item) {
      if (!full.contains(u, item)) pool.push_back(item);
    }
    if (static_cast<Index>(pool.size()) < n_negatives) {
      throw DataError("loo_split: user '" + dataset.user_id(u) + "' has only " +
                      std::to_string(pool.size()) + " non-interacted items, " +
                      std::to_string(n_negatives) + " test negatives required");
    }
    // Partial Fisher-Yates: the first n_negatives slots are a uniform sample
    // without replacement.
    for (Index k = 0; k < n_negatives; ++k) {
      std::uniform_int_distribution<std::size_t> slot(
          static_cast<std::size_t>(k), pool.size() - 1);
      std::swap(pool[static_cast<std::size_t>(k)], pool[slot(rng)]);
    }
    split.test_negatives[u].assign(pool.begin(), pool.begin() + n_negatives);
  }
  return split;
}

// Lists every broken split invariant; empty means the split is sound.
inline std::vector<std::string> validate_split(const InteractionDataset& dataset,
                                               const LooSplit& split,
                                               Index n_negatives = kDefaultTestNegatives) {
  std::vector<std::string> problems;
  const ImplicitView full(dataset);
  const ImplicitView train(split.train);
  if (split.train.n_users() != dataset.n_users() ||
      split.train.n_items() != dataset.n_items()) {
    problems.push_back("train shape differs from dataset");
    return problems;
  }
  for (Index u = 0; u < dataset.n_users(); ++u) {
    const auto& held = split.holdout[u];
    const auto& negatives = split.test_negatives[u];
    const auto n_full = dataset.interactions(u).size();
    const std::string who = "user " + dataset.user_id(u) + ": ";
    if (!held) {
      if (n_full >= 2) problems.push_back(who + "eligible but no holdout");
      if (split.train.interactions(u).size() != n_full) {
        problems.push_back(who + "train lost interactions");
      }
      if (!negatives.empty()) problems.push_back(who + "negatives without holdout");
      continue;
    }
    if (n_full < 2) problems.push_back(who + "single-interaction user held out");
    if (train.contains(u, held->item)) problems.push_back(who + "holdout still in train");
    if (!full.contains(u, held->item)) problems.push_back(who + "holdout not an interaction");
    if (split.train.interactions(u).size() + 1 != n_full) {
      problems.push_back(who + "train size mismatch");
    }
    if (static_cast<Index>(negatives.size()) != n_negatives) {
      problems.push_back(who + "wrong negative count");
    }
    std::vector<Index> sorted = negatives;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      problems.push_back(who + "duplicate negatives");
    }
    for (Index item : negatives) {
      if (full.contains(u, item)) {
        problems.push_back(who + "negative " + std::to_string(item) + " was interacted");
      }
    }
  }
  return problems;
}

}  // namespace sadrec

#endif  // SADREC_DATASET_HPP_
