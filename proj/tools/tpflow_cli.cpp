// SPDX-License-Identifier: Apache-2.0
//
// tpflow: pretrain, fine-tune, evaluate, trace and plot 2-D flow models.
//
// Exit codes: 0 success, 1 runtime failure (an error.json record is written),
// 2 bad configuration or arguments (the offending key is printed).

#include "tpflow/grpo/lemma_suite.hpp"
#include "tpflow/io/svg_plot.hpp"
#include "tpflow/io/trajectory_io.hpp"
#include "tpflow/nn/checkpoint.hpp"
#include "tpflow/train/config.hpp"
#include "tpflow/train/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace tpflow;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool overwrite = false;
};

void add_common(CLI::App& cmd, Common& c, bool needs_out) {
  cmd.add_option("--config", c.config, "experiment config (JSON)");
  cmd.add_option("--set", c.overrides, "override a config entry, e.g. --set train.lr=5e-4")->allow_extra_args(false);
  auto* out = cmd.add_option("--out", c.out, "output directory");
  if (needs_out) out->required();
  cmd.add_option("--seed", c.seed, "seed for this command");
  cmd.add_flag("--overwrite", c.overwrite, "replace existing outputs");
}

/// Creates `dir` and refuses to clobber any of `artifacts` without --overwrite.
void prepare_out(const fs::path& dir, const std::vector<std::string>& artifacts, bool overwrite) {
  fs::create_directories(dir);
  for (const auto& name : artifacts) {
    if (fs::exists(dir / name) && !overwrite) {
      throw ConfigError("--out", (dir / name).string() + " exists; pass --overwrite to replace it");
    }
  }
}

void remove_checkpoints(const fs::path& dir) {
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("checkpoint-", 0) == 0 && entry.path().extension() == ".bin") fs::remove(entry.path());
  }
}

bool has_checkpoints(const fs::path& dir) {
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("checkpoint-", 0) == 0 && entry.path().extension() == ".bin") return true;
  }
  return false;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

VectorXd load_params(const fs::path& path, const train::ExperimentConfig& cfg) {
  const auto ckpt = nn::load_checkpoint(path);
  if (!(ckpt.spec == cfg.mlp_spec())) {
    throw ConfigError("model", "checkpoint " + path.string() + " does not match the configured model");
  }
  return ckpt.params;
}

int cmd_pretrain(const Common& c) {
  auto cfg = train::load_config(c.config, c.overrides);
  if (c.seed) cfg.pretrain.seed = *c.seed;
  const fs::path out(c.out);
  prepare_out(out, {"checkpoint-base.bin", "pretrain.json"}, c.overwrite);

  const auto result = train::pretrain_base(cfg);
  nn::save_checkpoint(out / "checkpoint-base.bin", {cfg.mlp_spec(), result.params, cfg.pretrain.seed, "base"});
  const nn::Mlp<double> mlp(cfg.mlp_spec());
  const auto eval = train::evaluate(mlp, result.params, cfg);
  write_json(out / "pretrain.json", {{"initial_holdout_loss", result.initial_holdout_loss},
                                     {"final_holdout_loss", result.final_holdout_loss},
                                     {"eval_mean", eval.mean},
                                     {"eval_std", eval.std},
                                     {"loss_curve", result.loss_curve},
                                     {"config", train::to_json(cfg)}});
  std::printf("holdout loss %.4f -> %.4f, eval reward %.4f +- %.4f\n", result.initial_holdout_loss,
              result.final_holdout_loss, eval.mean, eval.std);
  return 0;
}

struct TrainArgs {
  std::optional<std::string> variant;
  bool no_kl = false;
  std::optional<int> window;
  std::optional<double> alpha;
  std::string base;
};

int cmd_train(const Common& c, const TrainArgs& a) {
  auto overrides = c.overrides;
  if (a.variant) overrides.push_back("loss.variant=" + *a.variant);
  if (a.no_kl) overrides.push_back("loss.kl_beta=0");
  if (a.window) overrides.push_back("sampler.window=" + std::to_string(*a.window));
  if (a.alpha) overrides.push_back("sampler.alpha=" + nlohmann::json(*a.alpha).dump());
  auto cfg = train::load_config(c.config, overrides);
  if (c.seed) cfg.seed = *c.seed;

  const fs::path out(c.out);
  prepare_out(out, {"metrics.jsonl", "summary.json", "config.json"}, c.overwrite);
  if (has_checkpoints(out)) {
    if (!c.overwrite) throw ConfigError("--out", out.string() + " holds checkpoints; pass --overwrite to replace them");
    remove_checkpoints(out);
  }
  write_json(out / "config.json", train::to_json(cfg));

  VectorXd base;
  if (!a.base.empty()) {
    base = load_params(a.base, cfg);
  } else {
    std::printf("pretraining base model (%d iterations)\n", cfg.pretrain.iterations);
    base = train::pretrain_base(cfg).params;
    nn::save_checkpoint(out / "checkpoint-base.bin", {cfg.mlp_spec(), base, cfg.pretrain.seed, "base"});
  }

  const auto result = train::run_training(cfg, base, {out, {}});
  std::printf("variant %s: eval reward %.4f -> ", grpo::to_string(cfg.loss.variant).c_str(),
              result.initial_eval.mean);
  if (!result.history.empty() && result.history.back().eval_mean) {
    std::printf("%.4f\n", *result.history.back().eval_mean);
  } else {
    std::printf("n/a\n");
  }
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint) {
  auto cfg = train::load_config(c.config, c.overrides);
  if (c.seed) cfg.eval.seed = *c.seed;
  const nn::Mlp<double> mlp(cfg.mlp_spec());
  const auto result = train::evaluate(mlp, load_params(checkpoint, cfg), cfg);
  std::printf("%.6f +- %.6f\n", result.mean, result.std);
  if (!c.out.empty()) {
    const fs::path out(c.out);
    prepare_out(out, {"eval.json"}, c.overwrite);
    write_json(out / "eval.json", {{"checkpoint", checkpoint},
                                   {"mean", result.mean},
                                   {"std", result.std},
                                   {"per_condition_mean", result.per_condition_mean}});
  }
  return 0;
}

int cmd_trace(const Common& c, const std::string& checkpoint, int n) {
  auto cfg = train::load_config(c.config, c.overrides);
  const std::uint64_t seed = c.seed.value_or(cfg.seed);
  if (n < 0) throw ConfigError("--n", "must be non-negative");
  const fs::path out(c.out);
  prepare_out(out, {"trace.csv", "trajectories.jsonl"}, c.overwrite);
  const nn::Mlp<double> mlp(cfg.mlp_spec());
  const auto traced = train::trace_trajectories(mlp, load_params(checkpoint, cfg), cfg, n, seed);
  std::ofstream csv(out / "trace.csv");
  io::write_step_tables_csv(csv, traced);
  std::ofstream jsonl(out / "trajectories.jsonl");
  io::write_trajectories_jsonl(jsonl, traced);
  std::size_t points = 0;
  for (const auto& t : traced) {
    for (auto f : t.table.flags) points += f == grpo::StepFlag::TurningPoint;
  }
  std::printf("%d trajectories, %zu turning points\n", n, points);
  return 0;
}

int cmd_plot(const Common& c, const std::vector<std::string>& runs, const std::string& field) {
  const fs::path out(c.out);
  prepare_out(out, {"curves.svg"}, c.overwrite);
  std::vector<io::Series> series;
  for (const auto& run : runs) {
    std::string label = run;
    fs::path path = run;
    if (const auto eq = run.find('='); eq != std::string::npos) {
      label = run.substr(0, eq);
      path = run.substr(eq + 1);
    }
    if (fs::is_directory(path)) path /= "metrics.jsonl";
    if (!fs::exists(path)) throw ConfigError("--run", path.string() + " does not exist");
    series.push_back(io::series_from_metrics(path, field, label));
  }
  std::ofstream(out / "curves.svg") << io::render_svg(series, field, "iteration", field);
  std::printf("wrote %s\n", (out / "curves.svg").string().c_str());
  return 0;
}

int cmd_lemma_suite(int n, int steps, std::uint64_t seed) {
  const auto r = grpo::run_lemma_suite(n, steps, seed);
  std::printf("sequences %d, steps %d, seed %llu\n", r.sequences, r.steps, static_cast<unsigned long long>(seed));
  std::printf("turning points: %zu unconstrained, %zu constrained; first-step selections %zu\n",
              r.unconstrained_points, r.constrained_points, r.first_steps);
  std::printf("violations: sign %zu/%zu, magnitude %zu, subset %zu, affine %zu\n",
              r.unconstrained_sign_violations, r.constrained_sign_violations, r.constrained_magnitude_violations,
              r.subset_violations, r.affine_invariance_violations);
  std::printf("%s\n", r.passed() ? "PASS" : "FAIL");
  return r.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TP-GRPO on a 2-D rectified-flow lab"};
  app.require_subcommand(1);

  Common common;
  auto* pretrain = app.add_subcommand("pretrain", "fit the base velocity field");
  add_common(*pretrain, common, true);

  TrainArgs targs;
  auto* train = app.add_subcommand("train", "GRPO fine-tuning");
  add_common(*train, common, true);
  train->add_option("--variant", targs.variant, "credit assignment")
      ->check(CLI::IsMember({"flow-grpo", "baseline", "tp", "tp-constrained"}));
  train->add_flag("--no-kl", targs.no_kl, "drop the KL penalty");
  train->add_option("--window", targs.window, "number of leading SDE steps");
  train->add_option("--alpha", targs.alpha, "SDE noise level");
  train->add_option("--base", targs.base, "base checkpoint (pretrains inline when absent)");

  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "mean terminal reward of a checkpoint");
  add_common(*eval, common, false);
  eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();

  int trace_n = 16;
  auto* trace = app.add_subcommand("trace", "intermediate-reward curves of sampled trajectories");
  add_common(*trace, common, true);
  trace->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  trace->add_option("--n", trace_n, "number of trajectories");

  std::vector<std::string> runs;
  std::string field = "eval_mean";
  auto* plot = app.add_subcommand("plot", "render metrics.jsonl curves to SVG");
  add_common(*plot, common, true);
  plot->add_option("--run", runs, "run directory or metrics file, optionally label=path")->required();
  plot->add_option("--field", field, "metrics field to plot");

  int suite_n = 10000;
  int suite_steps = 10;
  std::uint64_t suite_seed = 7;
  auto* suite = app.add_subcommand("lemma-suite", "randomized turning-point property checks");
  suite->add_option("--n", suite_n, "number of reward sequences");
  suite->add_option("--steps", suite_steps, "sequence length T");
  suite->add_option("--seed", suite_seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (*pretrain) return cmd_pretrain(common);
    if (*train) return cmd_train(common, targs);
    if (*eval) return cmd_eval(common, checkpoint);
    if (*trace) return cmd_trace(common, checkpoint, trace_n);
    if (*plot) return cmd_plot(common, runs, field);
    if (*suite) return cmd_lemma_suite(suite_n, suite_steps, suite_seed);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    std::fprintf(stderr, "key: %s\n", e.key().empty() ? "<none>" : e.key().c_str());
    return 2;
  } catch (const std::exception& e) {
    const fs::path dir = common.out.empty() ? fs::current_path() : fs::path(common.out);
    const fs::path record = dir / "error.json";
    try {
      fs::create_directories(dir);
      write_json(record, {{"command", command}, {"error", e.what()}});
      std::fprintf(stderr, "error: %s\nrecord: %s\n", e.what(), record.string().c_str());
    } catch (const std::exception&) {
      std::fprintf(stderr, "error: %s\n", e.what());
    }
    return 1;
  }
  return 0;
}
