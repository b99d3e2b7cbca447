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

// Command-line front end. `run` is the whole tool; main() only forwards argv.

#ifndef SADREC_TOOLS_CLI_HPP_
#define SADREC_TOOLS_CLI_HPP_

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "sadrec/manifest.hpp"
#include "sadrec/sadrec.hpp"

namespace sadrec::cli {

namespace fs = std::filesystem;

inline constexpr double kDefaultGibbsPairCap = 1e6;

struct DataFlags {
  std::string path;
  std::string format = "csv";
  Index min_item_count = 0;
  Index top_users = 0;  // 0 keeps everyone
  Index users = 0;      // random user subsample, 0 keeps everyone

  void add(CLI::App* app, bool required = true) {
    auto* opt = app->add_option("--data", path, "Interaction file");
    if (required) opt->required();
    app->add_option("--format", format, "csv (user,item,rating[,ts]) or ml (u::i::r::ts)")
        ->check(CLI::IsMember({"csv", "ml"}));
    app->add_option("--min-item-count", min_item_count, "Drop items with fewer interactions");
    app->add_option("--top-users", top_users, "Keep only the most active users (0 = all)");
    app->add_option("--users", users, "Random user subsample size (0 = all)");
  }

  LoadOptions options() const {
    LoadOptions o;
    o.format = format == "ml" ? InputFormat::kDoubleColon : InputFormat::kCsv;
    o.min_item_count = min_item_count;
    if (top_users > 0) o.top_users = top_users;
    return o;
  }

  InteractionDataset load(std::uint64_t seed) const {
    InteractionDataset data = load_interactions(path, options());
    if (users > 0) data = subsample_users(data, users, seed);
    return data;
  }

  void describe(nlohmann::ordered_json& j) const {
    j["data"] = path;
    j["format"] = format;
    j["min_item_count"] = min_item_count;
    j["top_users"] = top_users;
    j["users"] = users;
  }
};

struct TrainFlags {
  TrainConfig config;
  std::string config_file;

  void add(CLI::App* app) {
    app->add_option("--lr", config.learning_rate, "Learning rate");
    app->add_option("--l1", config.l1_weight, "l1 weight pulling T toward 1");
    app->add_option("--l2", config.l2_weight, "l2 weight on Xi and H");
    app->add_option("--epochs", config.epochs, "Epochs");
    app->add_option("--k", config.n_factors, "Latent dimension");
    app->add_option("--tol", config.convergence_rel_tol,
                    "Relative log-likelihood change for early stopping (0 = off)");
    app->add_flag("--shuffle", config.shuffle, "Randomize update order each epoch");
    app->add_option("--config", config_file,
                    "key=value file of TrainConfig fields; overrides flags");
  }

  // Applies the config file on top of the flags.
  TrainConfig resolve(std::uint64_t seed) const {
    TrainConfig c = config;
    c.seed = seed;
    if (!config_file.empty()) {
      std::ifstream is(config_file);
      if (!is) throw UsageError("cannot open config file " + config_file);
      c = read_train_config(is, c);
    }
    c.validate();
    return c;
  }
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> args;  // as given, without the program name
};

inline std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y%m%dT%H%M%SZ", &tm);
  return buffer;
}

// Explicit --out wins; otherwise <base>/<command>-seed<seed>-<timestamp>
// with base taken from SADREC_OUTPUT_DIR or ./runs.
inline fs::path make_run_dir(const std::string& out, const std::string& command,
                             std::uint64_t seed) {
  fs::path dir;
  if (!out.empty()) {
    dir = out;
  } else {
    const char* env = std::getenv("SADREC_OUTPUT_DIR");
    const fs::path base = env && *env ? fs::path(env) : fs::path("runs");
    dir = base / (command + "-seed" + std::to_string(seed) + "-" + timestamp());
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create run directory " + dir.string() + ": " + ec.message());
  return dir;
}

// Replayable argument list: the original args with --out pinned to `dir`.
inline std::vector<std::string> pin_out(std::vector<std::string> args, const fs::path& dir) {
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--out" && k + 1 < args.size()) {
      args[k + 1] = dir.string();
      return args;
    }
    if (args[k].rfind("--out=", 0) == 0) {
      args[k] = "--out=" + dir.string();
      return args;
    }
  }
  args.push_back("--out");
  args.push_back(dir.string());
  return args;
}

inline void require_file(const std::string& path, const char* what) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw DataError(std::string(what) + " not found: " + path);
}

inline void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << contents;
  if (!os) throw DataError("failed writing " + path.string());
}

template <typename Writer>
void write_with(const fs::path& path, Writer&& writer) {
  std::ostringstream os;
  writer(os);
  write_file(path, os.str());
}

inline nlohmann::ordered_json describe(const TrainConfig& c) {
  nlohmann::ordered_json j;
  for (const auto& [key, value] : to_key_values(c)) j[key] = value;
  return j;
}

inline std::vector<std::string> numbered(const std::string& stem, std::size_t count,
                                         const std::string& ext) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < count; ++k) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "_%04zu", k);
    names.push_back(stem + buffer + ext);
  }
  return names;
}

// Runs `count` independent jobs on up to `parallel` threads, preserving
// result order. The first exception, in job order, is rethrown.
template <typename Result, typename Job>
std::vector<Result> run_jobs(std::size_t count, unsigned parallel, Job&& job) {
  std::vector<std::optional<Result>> results(count);
  std::vector<std::exception_ptr> errors(count);
  auto work = [&](std::size_t k) {
    try {
      results[k] = job(k);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(parallel, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t k = 0; k < count; ++k) work(k);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < count; k += workers) work(k);
      });
    }
    for (auto& t : pool) t.join();
  }
  std::vector<Result> out;
  for (std::size_t k = 0; k < count; ++k) {
    if (errors[k]) std::rethrow_exception(errors[k]);
    out.push_back(std::move(*results[k]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateFlags {
  std::string kind = "sim2";
  std::vector<double> missing{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::uint64_t seed = 0;
  SimSpec spec;
  TrainFlags train;
  unsigned parallel = 1;
  std::string out;
};

inline void add_simulate(CLI::App& app, SimulateFlags& f) {
  auto* sub = app.add_subcommand("simulate", "Synthetic recovery study: SAD vs BPR");
  sub->add_option("--kind", f.kind, "sim1 (T = 1) or sim2 (sparse extreme T)")
      ->check(CLI::IsMember({"sim1", "sim2"}));
  sub->add_option("--missing", f.missing, "Comma-separated missing fractions")
      ->delimiter(',');
  sub->add_option("--seed", f.seed, "Run seed");
  sub->add_option("--n", f.spec.n_users, "Users");
  sub->add_option("--m", f.spec.n_items, "Items");
  sub->add_option("--true-k", f.spec.n_factors, "Latent dimension of the truth");
  sub->add_option("--extreme-fraction", f.spec.extreme_fraction,
                  "Fraction of T entries set to 0.01 or 5 (sim2)");
  f.train.add(sub);
  sub->add_option("--parallel", f.parallel, "Worker threads across study cells");
  sub->add_option("--out", f.out, "Run directory");
}

inline int cmd_simulate(const SimulateFlags& f, Context& ctx) {
  SimSpec spec = f.spec;
  spec.kind = f.kind == "sim1" ? SimKind::kSim1 : SimKind::kSim2;
  spec.seed = f.seed;
  if (spec.kind == SimKind::kSim1) spec.extreme_fraction = 0.0;
  spec.validate();
  for (double m : f.missing) {
    if (!(m >= 0.0 && m < 1.0)) throw UsageError("--missing values must lie in [0, 1)");
  }
  // The fitted latent dimension follows the truth unless --k says otherwise.
  TrainFlags train = f.train;
  if (train.config.n_factors == TrainConfig{}.n_factors) train.config.n_factors = spec.n_factors;
  StudyConfig study;
  study.spec = spec;
  study.missing_fractions = f.missing;
  study.sad = train.resolve(f.seed);
  study.sad.freeze_right_factors = false;
  study.bpr = study.sad;
  study.bpr.freeze_right_factors = true;

  const fs::path dir = make_run_dir(f.out, "simulate", f.seed);
  RunManifest manifest;
  manifest.command = "simulate";
  manifest.args = pin_out(ctx.args, dir);
  manifest.seed = f.seed;
  manifest.run_dir = dir.string();
  manifest.resolved["kind"] = f.kind;
  manifest.resolved["missing"] = f.missing;
  manifest.resolved["n_users"] = spec.n_users;
  manifest.resolved["n_items"] = spec.n_items;
  manifest.resolved["true_n_factors"] = spec.n_factors;
  manifest.resolved["extreme_fraction"] = spec.extreme_fraction;
  manifest.resolved["train"] = describe(study.sad);
  manifest.resolved["parallel"] = f.parallel;
  if (!f.train.config_file.empty()) manifest.add_input(f.train.config_file);
  manifest.artifacts = {"report.csv", "trajectories.csv", "truth.ckpt"};
  manifest.save(dir / "manifest.json");

  // Each missing fraction is an independent cell; run them on workers and
  // stitch the report back together in order.
  const SimTruth truth = generate_truth(spec);
  struct Cell {
    StudyRow sad, bpr;
  };
  auto cells = run_jobs<Cell>(study.missing_fractions.size(), f.parallel, [&](std::size_t k) {
    const double fraction = study.missing_fractions[k];
    Rng mask = make_stream(spec.seed, "mask-" + std::to_string(k));
    const auto kept = mask_missing<Observation>(truth.observations, fraction, mask);
    return Cell{fit_study_cell(truth, kept, spec.kind, fraction, "sad", study.sad),
                fit_study_cell(truth, kept, spec.kind, fraction, "bpr", study.bpr)};
  });
  StudyReport report{truth, {}};
  for (auto& cell : cells) {
    report.rows.push_back(std::move(cell.sad));
    report.rows.push_back(std::move(cell.bpr));
  }

  write_with(dir / "report.csv", [&](std::ostream& os) { write_study_report(os, report); });
  write_with(dir / "trajectories.csv",
             [&](std::ostream& os) { write_study_trajectories(os, report); });
  save_checkpoint(dir / "truth.ckpt", truth.model);

  ctx.out << "true T sparsity " << sparsity(truth.model.right_item_factors()) << "\n";
  for (const auto& row : report.rows) {
    ctx.out << to_string(row.kind) << " missing=" << row.missing_fraction << " " << row.model
            << " loglik=" << row.final_loglik << " sparsity=" << row.t_sparsity
            << " mse=" << row.mse << "\n";
  }
  ctx.out << "wrote " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainCmdFlags {
  DataFlags data;
  TrainFlags train;
  std::string model = "sad";
  std::uint64_t seed = 0;
  bool grid = false;
  unsigned parallel = 1;
  bool timing = false;
  std::string out;

  TrainCmdFlags() { train.config.learning_rate = 0.01; train.config.n_factors = 32; }
};

inline void add_train(CLI::App& app, TrainCmdFlags& f) {
  auto* sub = app.add_subcommand("train", "Fit SAD or BPR to implicit feedback");
  f.data.add(sub);
  f.train.add(sub);
  sub->add_option("--model", f.model, "sad or bpr")->check(CLI::IsMember({"sad", "bpr"}));
  sub->add_option("--seed", f.seed, "Run seed");
  sub->add_flag("--grid", f.grid,
                "Grid search over learning rate x epochs x l2, best training log-likelihood");
  sub->add_option("--parallel", f.parallel, "Worker threads for --grid");
  sub->add_flag("--timing", f.timing, "Record wall-clock seconds in train_log.csv");
  sub->add_option("--out", f.out, "Run directory");
}

inline int cmd_train(const TrainCmdFlags& f, Context& ctx) {
  TrainConfig config = f.train.resolve(f.seed);
  config.freeze_right_factors = f.model == "bpr";

  require_file(f.data.path, "dataset");
  const fs::path dir = make_run_dir(f.out, "train", f.seed);
  RunManifest manifest;
  manifest.command = "train";
  manifest.args = pin_out(ctx.args, dir);
  manifest.seed = f.seed;
  manifest.run_dir = dir.string();
  f.data.describe(manifest.resolved);
  manifest.resolved["model"] = f.model;
  manifest.resolved["grid"] = f.grid;
  manifest.resolved["train"] = describe(config);
  manifest.add_input(f.data.path);
  if (!f.train.config_file.empty()) manifest.add_input(f.train.config_file);
  manifest.artifacts = {"model.ckpt", "train_log.csv", "train_config.txt"};
  if (f.grid) manifest.artifacts.push_back("grid.csv");
  manifest.save(dir / "manifest.json");

  const InteractionDataset data = f.data.load(f.seed);
  const ImplicitView view(data);
  ctx.out << "loaded " << data.n_users() << " users, " << data.n_items() << " items, "
          << data.n_interactions() << " interactions\n";

  if (f.grid) {
    const GridResult grid = grid_search(view, config, GridSpec{}, f.parallel);
    write_with(dir / "grid.csv", [&](std::ostream& os) {
      os << "learning_rate,epochs,l2_weight,l1_weight,final_mean_loglik,diverged\n";
      char buffer[160];
      for (const auto& cell : grid.cells) {
        std::snprintf(buffer, sizeof(buffer), "%.17g,%d,%.17g,%.17g,%.17g,%d\n",
                      cell.config.learning_rate, cell.config.epochs, cell.config.l2_weight,
                      cell.config.l1_weight, cell.final_mean_loglik, cell.diverged ? 1 : 0);
        os << buffer;
      }
    });
    config = grid.cells[grid.best].config;
    ctx.out << "grid selected lr=" << config.learning_rate << " epochs=" << config.epochs
            << " l2=" << config.l2_weight << "\n";
  }

  const TrainResult result = train(view, config);
  save_checkpoint(dir / "model.ckpt", result.model);
  write_with(dir / "train_log.csv",
             [&](std::ostream& os) { write_training_log(os, result.log, f.timing); });
  write_with(dir / "train_config.txt",
             [&](std::ostream& os) { write_train_config(os, config); });
  const auto& last = result.log.epochs.back();
  ctx.out << "epochs=" << last.epoch << " mean_loglik=" << last.mean_loglik
          << " t_sparsity=" << last.t_sparsity << " skipped_users=" << result.log.skipped_users
          << "\nwrote " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gibbs

struct GibbsFlags {
  DataFlags data;
  std::string kind;  // sim1 / sim2 when no --data
  SimSpec spec;
  double missing = 0.0;
  GibbsConfig config;
  double cap = kDefaultGibbsPairCap;
  bool save_samples = false;
  std::string out;

  GibbsFlags() {
    spec.n_users = 3;
    spec.n_items = 4;
    spec.n_factors = 2;
  }
};

inline void add_gibbs(CLI::App& app, GibbsFlags& f) {
  auto* sub = app.add_subcommand("gibbs", "Probit posterior sampling (small problems)");
  f.data.add(sub, false);
  sub->add_option("--kind", f.kind, "Simulate sim1 / sim2 data instead of --data")
      ->check(CLI::IsMember({"sim1", "sim2"}));
  sub->add_option("--n", f.spec.n_users, "Simulated users");
  sub->add_option("--m", f.spec.n_items, "Simulated items");
  sub->add_option("--true-k", f.spec.n_factors, "Simulated latent dimension");
  sub->add_option("--missing", f.missing, "Fraction of simulated observations to drop");
  sub->add_option("--k", f.config.n_factors, "Latent dimension");
  sub->add_option("--seed", f.config.seed, "Run seed");
  sub->add_option("--sweeps", f.config.n_sweeps, "Total sweeps");
  sub->add_option("--burn-in", f.config.burn_in, "Discarded leading sweeps");
  sub->add_option("--thin", f.config.thin, "Keep every thin-th sweep after burn-in");
  sub->add_option("--prior-variance", f.config.prior_variance, "Prior variance");
  sub->add_option("--tau-passes", f.config.tau_inner_passes,
                  "Coordinate passes per truncated T draw");
  sub->add_option("--cap", f.cap, "Refuse problems with more than this many user-item cells");
  sub->add_flag("--save-samples", f.save_samples, "Write every kept sample as a checkpoint");
  sub->add_option("--out", f.out, "Run directory");
}

inline int cmd_gibbs(const GibbsFlags& f, Context& ctx) {
  if (f.data.path.empty() == f.kind.empty()) {
    throw UsageError("gibbs: give exactly one of --data or --kind");
  }
  GibbsConfig config = f.config;
  config.keep_samples = f.save_samples;
  config.validate();

  Index n_users = 0, n_items = 0;
  std::vector<Observation> observations;
  std::optional<SimTruth> truth;
  std::optional<InteractionDataset> data;
  if (!f.kind.empty()) {
    SimSpec spec = f.spec;
    spec.kind = f.kind == "sim1" ? SimKind::kSim1 : SimKind::kSim2;
    if (spec.kind == SimKind::kSim1) spec.extreme_fraction = 0.0;
    spec.seed = config.seed;
    spec.validate();
    n_users = spec.n_users;
    n_items = spec.n_items;
  } else {
    data = f.data.load(config.seed);
    n_users = data->n_users();
    n_items = data->n_items();
  }
  const double cells = static_cast<double>(n_users) * static_cast<double>(n_items);
  if (cells > f.cap) {
    std::ostringstream msg;
    msg << "gibbs: " << n_users << " x " << n_items << " user-item cells exceeds the cap of "
        << f.cap << " (raise it with --cap)";
    throw UsageError(msg.str());
  }

  const fs::path dir = make_run_dir(f.out, "gibbs", config.seed);
  RunManifest manifest;
  manifest.command = "gibbs";
  manifest.args = pin_out(ctx.args, dir);
  manifest.seed = config.seed;
  manifest.run_dir = dir.string();
  if (data) {
    f.data.describe(manifest.resolved);
    manifest.add_input(f.data.path);
  } else {
    manifest.resolved["kind"] = f.kind;
    manifest.resolved["n_users"] = n_users;
    manifest.resolved["n_items"] = n_items;
    manifest.resolved["true_n_factors"] = f.spec.n_factors;
    manifest.resolved["missing"] = f.missing;
  }
  manifest.resolved["n_factors"] = config.n_factors;
  manifest.resolved["n_sweeps"] = config.n_sweeps;
  manifest.resolved["burn_in"] = config.burn_in;
  manifest.resolved["thin"] = config.thin;
  manifest.resolved["prior_variance"] = config.prior_variance;
  manifest.resolved["tau_inner_passes"] = config.tau_inner_passes;
  manifest.resolved["cap"] = f.cap;
  manifest.artifacts = {"posterior_summary.csv", "trace.csv"};
  if (truth || !f.kind.empty()) manifest.artifacts.push_back("truth.ckpt");
  const std::size_t n_kept =
      static_cast<std::size_t>((config.n_sweeps - config.burn_in + config.thin - 1) / config.thin);
  if (f.save_samples) {
    for (const auto& name : numbered("samples/sample", n_kept, ".ckpt")) {
      manifest.artifacts.push_back(name);
    }
  }
  manifest.save(dir / "manifest.json");

  if (!f.kind.empty()) {
    SimSpec spec = f.spec;
    spec.kind = f.kind == "sim1" ? SimKind::kSim1 : SimKind::kSim2;
    if (spec.kind == SimKind::kSim1) spec.extreme_fraction = 0.0;
    spec.seed = config.seed;
    truth = generate_truth(spec);
    Rng mask = make_stream(config.seed, "mask");
    observations = mask_missing<Observation>(truth->observations, f.missing, mask);
    save_checkpoint(dir / "truth.ckpt", truth->model);
  } else {
    observations = implicit_observations(ImplicitView(*data));
  }
  ctx.out << "sampling " << observations.size() << " observations, " << config.n_sweeps
          << " sweeps\n";

  const ChainResult chain = run_chain(n_users, n_items, std::move(observations), config);
  write_with(dir / "posterior_summary.csv",
             [&](std::ostream& os) { write_posterior_summary(os, chain.summary); });
  write_with(dir / "trace.csv", [&](std::ostream& os) {
    os << "sweep,log_joint\n";
    char buffer[64];
    for (std::size_t s = 0; s < chain.log_joint_trace.size(); ++s) {
      std::snprintf(buffer, sizeof(buffer), "%zu,%.17g\n", s, chain.log_joint_trace[s]);
      os << buffer;
    }
  });
  if (f.save_samples) {
    fs::create_directories(dir / "samples");
    const auto names = numbered("samples/sample", chain.samples.size(), ".ckpt");
    for (std::size_t s = 0; s < chain.samples.size(); ++s) {
      save_checkpoint(dir / names[s], chain.samples[s]);
    }
  }
  ctx.out << "kept " << chain.summary.n_samples << " samples, final log joint "
          << chain.log_joint_trace.back() << "\nwrote " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateFlags {
  DataFlags data;
  TrainFlags train;
  std::string model = "sad";
  std::string checkpoint;
  int splits = 20;
  std::uint64_t seed_base = 0;
  Index negatives = kDefaultTestNegatives;
  Index threshold = kDefaultHitThreshold;
  unsigned parallel = 1;
  std::string out;

  EvaluateFlags() { train.config.learning_rate = 0.01; train.config.n_factors = 32; }
};

inline void add_evaluate(CLI::App& app, EvaluateFlags& f) {
  auto* sub = app.add_subcommand("evaluate", "Leave-one-interaction-out evaluation");
  f.data.add(sub);
  f.train.add(sub);
  sub->add_option("--model", f.model, "sad or bpr")->check(CLI::IsMember({"sad", "bpr"}));
  sub->add_option("--checkpoint", f.checkpoint, "Evaluate this model instead of training");
  sub->add_option("--splits", f.splits, "Number of LOO splits");
  sub->add_option("--seed-base", f.seed_base, "Split s uses seed seed_base + s");
  sub->add_option("--negatives", f.negatives, "Sampled test negatives per user");
  sub->add_option("--threshold", f.threshold, "Hit-ratio cut-off rank");
  sub->add_option("--parallel", f.parallel, "Worker threads across splits");
  sub->add_option("--out", f.out, "Run directory");
}

inline void write_aggregate_row(std::ostream& os, const EvalAggregate& a,
                                std::span<const EvalReport> reports) {
  Index users = 0, pairs = 0, skipped = 0;
  for (const auto& r : reports) {
    users += r.consistency.users_evaluated;
    pairs += r.consistency.pairs_evaluated;
    skipped += r.consistency.pairs_skipped;
  }
  char buffer[512];
  std::snprintf(buffer, sizeof(buffer),
                "aggregate,%.6g+-%.6g,%.6g+-%.6g,%.6g+-%.6g,%.6g+-%.6g,%.6g+-%.6g,%lld,%lld,%lld\n",
                a.mean_x.mean, a.mean_x.sd, a.match.mean, a.match.sd, a.per_user.mean,
                a.per_user.sd, a.m1.mean, a.m1.sd, a.m2.mean, a.m2.sd,
                static_cast<long long>(users), static_cast<long long>(pairs),
                static_cast<long long>(skipped));
  os << buffer;
}

inline int cmd_evaluate(const EvaluateFlags& f, Context& ctx) {
  if (f.splits < 1) throw UsageError("--splits must be >= 1");
  TrainConfig config = f.train.resolve(f.seed_base);
  config.freeze_right_factors = f.model == "bpr";

  require_file(f.data.path, "dataset");
  if (!f.checkpoint.empty()) require_file(f.checkpoint, "checkpoint");
  const fs::path dir = make_run_dir(f.out, "evaluate", f.seed_base);
  RunManifest manifest;
  manifest.command = "evaluate";
  manifest.args = pin_out(ctx.args, dir);
  manifest.seed = f.seed_base;
  manifest.run_dir = dir.string();
  f.data.describe(manifest.resolved);
  manifest.resolved["model"] = f.checkpoint.empty() ? f.model : "checkpoint";
  manifest.resolved["checkpoint"] = f.checkpoint;
  manifest.resolved["splits"] = f.splits;
  manifest.resolved["seed_base"] = f.seed_base;
  manifest.resolved["negatives"] = f.negatives;
  manifest.resolved["threshold"] = f.threshold;
  manifest.resolved["train"] = describe(config);
  manifest.add_input(f.data.path);
  if (!f.checkpoint.empty()) manifest.add_input(f.checkpoint);
  if (!f.train.config_file.empty()) manifest.add_input(f.train.config_file);
  manifest.artifacts = {"eval.csv", "eval_table.txt"};
  manifest.save(dir / "manifest.json");

  const InteractionDataset data = f.data.load(f.seed_base);
  std::optional<FactorModel> fixed;
  if (!f.checkpoint.empty()) {
    fixed = load_checkpoint(f.checkpoint);
    if (fixed->n_users() != data.n_users() || fixed->n_items() != data.n_items()) {
      throw DataError("checkpoint shape " + std::to_string(fixed->n_users()) + "x" +
                      std::to_string(fixed->n_items()) + " does not match dataset " +
                      std::to_string(data.n_users()) + "x" + std::to_string(data.n_items()));
    }
  }

  const auto reports = run_jobs<EvalReport>(
      static_cast<std::size_t>(f.splits), f.parallel, [&](std::size_t s) {
        const std::uint64_t seed = f.seed_base + s;
        const LooSplit split = loo_split(data, seed, f.negatives);
        if (fixed) return evaluate_split(*fixed, split, f.threshold);
        TrainConfig c = config;
        c.seed = seed;
        const TrainResult fit = train(ImplicitView(split.train), c);
        return evaluate_split(fit.model, split, f.threshold);
      });
  const EvalAggregate agg = aggregate(reports);
  write_with(dir / "eval.csv", [&](std::ostream& os) {
    os << kEvalRowHeader << '\n';
    for (const auto& r : reports) write_eval_row(os, r);
    write_aggregate_row(os, agg, reports);
  });
  const std::string label = f.checkpoint.empty() ? f.model : "checkpoint";
  write_with(dir / "eval_table.txt",
             [&](std::ostream& os) { write_aggregate_table(os, label, agg); });
  write_aggregate_table(ctx.out, label, agg);
  ctx.out << "wrote " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// synth

struct SynthFlags {
  RatingLogSpec spec;
  std::string format = "csv";
  std::string out;
};

inline void add_synth(CLI::App& app, SynthFlags& f) {
  auto* sub = app.add_subcommand("synth", "Write a synthetic rating log in MovieLens layout");
  sub->add_option("--users", f.spec.n_users, "Users");
  sub->add_option("--items", f.spec.n_items, "Items");
  sub->add_option("--per-user", f.spec.per_user, "Ratings per user");
  sub->add_option("--true-k", f.spec.n_factors, "Latent dimension of the generator");
  sub->add_option("--seed", f.spec.seed, "Run seed");
  sub->add_option("--format", f.format, "csv (user,item,rating,ts) or ml (u::i::r::ts)")
      ->check(CLI::IsMember({"csv", "ml"}));
  sub->add_option("--out", f.out, "Run directory");
}

inline int cmd_synth(const SynthFlags& f, Context& ctx) {
  f.spec.validate();
  const std::string name = f.format == "ml" ? "ratings.dat" : "ratings.csv";
  const fs::path dir = make_run_dir(f.out, "synth", f.spec.seed);
  RunManifest manifest;
  manifest.command = "synth";
  manifest.args = pin_out(ctx.args, dir);
  manifest.seed = f.spec.seed;
  manifest.run_dir = dir.string();
  manifest.resolved["n_users"] = f.spec.n_users;
  manifest.resolved["n_items"] = f.spec.n_items;
  manifest.resolved["per_user"] = f.spec.per_user;
  manifest.resolved["true_n_factors"] = f.spec.n_factors;
  manifest.resolved["zipf_exponent"] = f.spec.zipf_exponent;
  manifest.resolved["format"] = f.format;
  manifest.artifacts = {name};
  manifest.save(dir / "manifest.json");

  const InteractionDataset data = generate_rating_log(f.spec);
  write_with(dir / name, [&](std::ostream& os) {
    if (f.format == "csv") {
      write_dataset(os, data);
      return;
    }
    for (Index u = 0; u < data.n_users(); ++u) {
      for (const auto& x : data.interactions(u)) {
        os << data.user_id(u) << "::" << data.item_id(x.item) << "::" << *x.rating
           << "::" << *x.timestamp << '\n';
      }
    }
  });
  ctx.out << "wrote " << data.n_interactions() << " ratings to " << (dir / name).string()
          << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// rerun

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

inline int cmd_rerun(const std::string& manifest_path, const std::string& out_dir,
                     Context& ctx) {
  const RunManifest manifest = RunManifest::load(manifest_path);
  manifest.verify_inputs();
  const fs::path dir = out_dir.empty() ? fs::path(manifest.run_dir) : fs::path(out_dir);
  std::vector<std::string> args = pin_out(manifest.args, dir);
  if (args.empty() || args.front() != manifest.command) {
    throw DataError("manifest args do not start with its command");
  }
  return run(args, ctx.out, ctx.err);
}

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sadrec: sliced anti-symmetric decomposition for implicit feedback", "sadrec"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  SimulateFlags simulate;
  TrainCmdFlags train_flags;
  GibbsFlags gibbs;
  EvaluateFlags evaluate;
  SynthFlags synth;
  std::string manifest_path, rerun_out;
  add_simulate(app, simulate);
  add_train(app, train_flags);
  add_gibbs(app, gibbs);
  add_evaluate(app, evaluate);
  add_synth(app, synth);
  auto* rerun = app.add_subcommand("rerun", "Re-execute a run from its manifest");
  rerun->add_option("manifest", manifest_path, "manifest.json")->required();
  rerun->add_option("--out", rerun_out, "Run directory (default: the recorded one)");

  Context ctx{out, err, args};
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (app.got_subcommand("simulate")) return cmd_simulate(simulate, ctx);
    if (app.got_subcommand("train")) return cmd_train(train_flags, ctx);
    if (app.got_subcommand("gibbs")) return cmd_gibbs(gibbs, ctx);
    if (app.got_subcommand("evaluate")) return cmd_evaluate(evaluate, ctx);
    if (app.got_subcommand("synth")) return cmd_synth(synth, ctx);
    if (app.got_subcommand("rerun")) return cmd_rerun(manifest_path, rerun_out, ctx);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  }
  return static_cast<int>(ExitCode::kUsage);
}

}  // namespace sadrec::cli

#endif  // SADREC_TOOLS_CLI_HPP_
