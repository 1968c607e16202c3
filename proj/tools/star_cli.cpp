// Copyright 2026 The STAR Authors. All Rights Reserved.
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

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "star/checkpoint.hpp"
#include "star/config.hpp"
#include "star/data.hpp"
#include "star/errors.hpp"
#include "star/experiment.hpp"
#include "star/metrics.hpp"

namespace fs = std::filesystem;
using namespace star;

namespace {

struct CommonOptions {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> copies;
  std::optional<int> workers;
  std::string variant;
  std::vector<std::string> set;
};

void add_run_options(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "key=value run configuration file");
  cmd->add_option("--seed", o.seed, "override the run seed");
  cmd->add_option("--epochs", o.epochs, "override the epoch count");
  cmd->add_option("--copies", o.copies, "override the Monte-Carlo copies per window");
  cmd->add_option("--workers", o.workers, "gradient worker threads");
  cmd->add_option("--variant", o.variant, "ablation variant S1..S6");
  cmd->add_option("--set", o.set, "extra key=value config overrides");
}

RunConfig build_config(const CommonOptions& o, const Dataset* ds) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (ds != nullptr) {
    cfg.channels = static_cast<int>(ds->channels);
    cfg.classes = ds->num_classes;
  }
  for (const std::string& kv : o.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.copies) cfg.copies = *o.copies;
  if (o.workers) cfg.workers = *o.workers;
  if (!o.variant.empty()) cfg = configure_ablation(parse_variant(o.variant), cfg);
  cfg.validate();
  return cfg;
}

void make_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_text(const fs::path& path, const std::string& text) {
  make_parent(path);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

std::vector<Window> windows_of(const Dataset& ds, const RunConfig& cfg, std::optional<int> subject) {
  if (!subject) return make_windows(ds, cfg.window_length, cfg.overlap);
  return make_windows(loso_split(ds, *subject).second, cfg.window_length, cfg.overlap);
}

std::vector<int> pick_holdouts(const Dataset& ds, const std::vector<int>& requested) {
  if (!requested.empty()) return requested;
  const auto subjects = ds.subjects();
  if (subjects.empty()) throw ConfigError("dataset has no subjects");
  return {subjects.back()};
}

int cmd_synth(std::uint64_t seed, int subjects, const std::string& out) {
  SynthConfig synth = SynthConfig::defaults();
  if (subjects > 0) synth.subjects = subjects;
  make_parent(out);
  write_csv(synth_generate(synth, seed), out);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_train(const CommonOptions& o, std::optional<int> holdout) {
  const Dataset raw = load_csv(o.data);
  const RunConfig cfg = build_config(o, &raw);
  if (cfg.variant == Variant::S1) throw ConfigError("train: S1 has no checkpoint; use ablate");
  const fs::path dir(o.out);
  fs::create_directories(dir);

  Dataset train_raw = raw;
  std::optional<Dataset> test_raw;
  if (holdout) {
    auto split = loso_split(raw, *holdout);
    train_raw = std::move(split.first);
    test_raw = std::move(split.second);
  }
  const ChannelStats stats = compute_channel_stats(train_raw);
  const auto train_w = make_windows(standardize(train_raw, stats), cfg.window_length, cfg.overlap);

  std::ofstream log(dir / "train_log.csv");
  log << "epoch,loss,mean_reward\n";
  const auto start = std::chrono::steady_clock::now();
  ModelParams params = train_model(cfg, train_w, [&](const EpochLog& e) {
    log << e.epoch << ',' << e.loss << ',' << e.mean_reward << '\n';
    log.flush();
    std::cout << "epoch " << e.epoch << " loss " << e.loss << " reward " << e.mean_reward << "\n";
  });
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const Checkpoint ckpt{std::move(params), stats};
  save_checkpoint(ckpt, (dir / "model.ckpt").string());
  write_text(dir / "config.txt", config_to_text(cfg));
  std::cout << "trained " << train_w.size() << " windows in " << seconds << " s\n";
  if (test_raw) {
    const MetricsReport report = evaluate(ckpt, *test_raw);
    write_text(dir / "metrics.txt", metrics_to_text(report));
    std::cout << metrics_to_table(report);
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& out,
             std::optional<int> subject) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  Dataset ds = load_csv(data);
  if (subject) ds = loso_split(ds, *subject).second;
  const MetricsReport report = evaluate(ckpt, ds);
  std::cout << metrics_to_table(report);
  if (!out.empty()) write_text(out, metrics_to_text(report));
  return 0;
}

int cmd_heatmap(const std::string& checkpoint, const std::string& data, const std::string& out, int episodes,
                std::optional<int> subject, const std::string& trajectories) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const RunConfig& cfg = ckpt.params.config;
  Dataset ds = load_csv(data);
  if (ds.channels != cfg.channels) throw ConfigError("heatmap: channel count does not match the checkpoint");
  if (ckpt.stats) ds = standardize(ds, *ckpt.stats);
  const auto windows = windows_of(ds, cfg, subject);
  const auto trajs = rollout_windows(ckpt.params, windows, episodes);
  write_heatmaps(count_selections(trajs, cfg.window_length, cfg.channels, cfg.agents, cfg.classes), out);
  if (!trajectories.empty()) {
    make_parent(trajectories);
    write_trajectories_csv(trajs, trajectories);
  }
  std::cout << "wrote heatmaps for " << windows.size() << " windows x " << episodes << " episodes to " << out
            << "\n";
  return 0;
}

int cmd_ablate(const CommonOptions& o, int seeds, const std::vector<int>& holdouts) {
  const Dataset ds = load_csv(o.data);
  const RunConfig base = build_config(o, &ds);
  const auto folds = pick_holdouts(ds, holdouts);
  std::ostringstream table;
  table << "variant,seed,folds,accuracy,precision,recall,f1\n";
  for (Variant v : {Variant::S1, Variant::S2, Variant::S3, Variant::S4, Variant::S5, Variant::S6}) {
    std::vector<double> per_seed;
    for (int s = 0; s < seeds; ++s) {
      RunConfig cfg = configure_ablation(v, base);
      cfg.seed = base.seed + static_cast<std::uint64_t>(s);
      double acc = 0, prec = 0, rec = 0, f1 = 0;
      for (int held : folds) {
        const RunResult r = run_fold(ds, cfg, held);
        acc += r.report.accuracy;
        prec += r.report.precision;
        rec += r.report.recall;
        f1 += r.report.f1;
      }
      const double n = static_cast<double>(folds.size());
      table << to_string(v) << ',' << cfg.seed << ',' << folds.size() << ',' << acc / n << ',' << prec / n << ','
            << rec / n << ',' << f1 / n << '\n';
      per_seed.push_back(acc / n);
    }
    const Summary sm = summarize(per_seed);
    std::cout << to_string(v) << " accuracy " << sm.mean << " +- " << sm.stddev << " over " << seeds
              << " seeds\n";
  }
  write_text(o.out, table.str());
  return 0;
}

int cmd_loso(const CommonOptions& o, int seeds) {
  const Dataset ds = load_csv(o.data);
  const RunConfig base = build_config(o, &ds);
  std::ostringstream table;
  table << "seed,held_out,accuracy,precision,recall,f1\n";
  std::vector<double> seed_means;
  std::vector<double> all;
  for (int s = 0; s < seeds; ++s) {
    RunConfig cfg = base;
    cfg.seed = base.seed + static_cast<std::uint64_t>(s);
    std::vector<double> folds;
    for (int held : ds.subjects()) {
      const RunResult r = run_fold(ds, cfg, held);
      table << cfg.seed << ',' << held << ',' << r.report.accuracy << ',' << r.report.precision << ','
            << r.report.recall << ',' << r.report.f1 << '\n';
      folds.push_back(r.report.accuracy);
      all.push_back(r.report.accuracy);
    }
    const Summary f = summarize(folds);
    std::cout << "seed " << cfg.seed << " accuracy " << f.mean << " +- " << f.stddev << " over folds\n";
    seed_means.push_back(f.mean);
  }
  const Summary over_seeds = summarize(seed_means);
  const Summary over_folds = summarize(all);
  std::cout << "accuracy " << over_seeds.mean << " +- " << over_seeds.stddev << " over seeds, +- "
            << over_folds.stddev << " over all folds\n";
  if (!o.out.empty()) write_text(o.out, table.str());
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, double threshold) {
  const auto start = std::chrono::steady_clock::now();
  const GradCheckResult r = check_model_gradient(tiny_gradcheck_config(), seed);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << "max relative error " << r.max_relative_error << " at " << r.worst_group << "[" << r.worst_index
            << "] over " << r.coordinates << " coordinates in " << seconds << " s\n";
  if (!(r.max_relative_error < threshold)) {
    std::cerr << "gradcheck failed: threshold " << threshold << "\n";
    return 1;
  }
  std::cout << "gradcheck passed (threshold " << threshold << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent spatio-temporal attention for activity recognition"};
  app.require_subcommand(1);

  std::uint64_t synth_seed = 1;
  int synth_subjects = 0;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write a synthetic activity dataset as CSV");
  synth->add_option("--seed", synth_seed);
  synth->add_option("--subjects", synth_subjects, "subject count (default 8)");
  synth->add_option("--out", synth_out)->required();

  CommonOptions train_o;
  std::optional<int> train_holdout;
  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  train->add_option("--data", train_o.data)->required();
  train->add_option("--out", train_o.out, "output directory")->required();
  train->add_option("--holdout", train_holdout, "leave this subject out and evaluate on it");
  add_run_options(train, train_o);

  std::string eval_ckpt, eval_data, eval_out;
  std::optional<int> eval_subject;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--out", eval_out, "metrics file");
  eval->add_option("--subject", eval_subject, "evaluate one subject only");

  std::string hm_ckpt, hm_data, hm_out, hm_traj;
  int hm_episodes = 1;
  std::optional<int> hm_subject;
  auto* hm = app.add_subcommand("heatmap", "count attended locations");
  hm->add_option("--checkpoint", hm_ckpt)->required();
  hm->add_option("--data", hm_data)->required();
  hm->add_option("--out", hm_out, "output directory")->required();
  hm->add_option("--episodes", hm_episodes, "rollouts per window")->check(CLI::PositiveNumber);
  hm->add_option("--subject", hm_subject, "use one subject only");
  hm->add_option("--trajectories", hm_traj, "also write the raw trajectories as CSV");

  CommonOptions abl_o;
  int abl_seeds = 5;
  std::vector<int> abl_holdouts;
  auto* abl = app.add_subcommand("ablate", "run S1..S6 over seeds and write a summary CSV");
  abl->add_option("--data", abl_o.data)->required();
  abl->add_option("--out", abl_o.out, "summary CSV")->required();
  abl->add_option("--seeds", abl_seeds)->check(CLI::PositiveNumber);
  abl->add_option("--holdout", abl_holdouts, "held-out subjects (default: the last one)");
  add_run_options(abl, abl_o);

  CommonOptions loso_o;
  int loso_seeds = 3;
  auto* loso = app.add_subcommand("loso", "leave-one-subject-out evaluation over all subjects");
  loso->add_option("--data", loso_o.data)->required();
  loso->add_option("--out", loso_o.out, "per-fold CSV");
  loso->add_option("--seeds", loso_seeds)->check(CLI::PositiveNumber);
  add_run_options(loso, loso_o);

  std::uint64_t gc_seed = 1;
  double gc_threshold = 1e-4;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient gate on a tiny model");
  gc->add_option("--seed", gc_seed);
  gc->add_option("--threshold", gc_threshold);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(synth_seed, synth_subjects, synth_out);
    if (*train) return cmd_train(train_o, train_holdout);
    if (*eval) return cmd_eval(eval_ckpt, eval_data, eval_out, eval_subject);
    if (*hm) return cmd_heatmap(hm_ckpt, hm_data, hm_out, hm_episodes, hm_subject, hm_traj);
    if (*abl) return cmd_ablate(abl_o, abl_seeds, abl_holdouts);
    if (*loso) return cmd_loso(loso_o, loso_seeds);
    if (*gc) return cmd_gradcheck(gc_seed, gc_threshold);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
