#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sami/config.hpp"
#include "sami/env.hpp"
#include "sami/harness.hpp"
#include "sami/io.hpp"

namespace {

sami::ExperimentConfig resolve_config(const std::string& config_path, const std::string& variant,
                                      const std::string& out_dir) {
  sami::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = sami::load_config(config_path);
  if (!variant.empty()) cfg.variant = variant;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  sami::validate(cfg);
  return cfg;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
  } else {
    sami::atomic_write_file(out_path, text);
    std::cout << out_path << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skill-aware contrastive meta-RL experiment harness"};
  app.require_subcommand(1);

  std::string config_path, variant, out_dir, out_path;
  std::string checkpoint_path, split_name = "extreme", axis, suite = "bounds";
  std::vector<double> values;
  std::vector<std::string> result_files;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t episodes = 10;

  auto* train = app.add_subcommand("train", "meta-train one variant and write run files");
  train->add_option("--config", config_path, "experiment config JSON");
  train->add_option("--variant", variant, "override variant (tesac|ccm|satesac|saccm)");
  train->add_option("--out", out_dir, "override output directory");
  train->add_option("--seed", seed, "single seed (default: every seed in the config)")
      ->each([&](const std::string&) { seed_given = true; });

  auto* eval = app.add_subcommand("eval", "evaluate a saved agent on one split");
  eval->add_option("--checkpoint", checkpoint_path, "agent checkpoint")->required();
  eval->add_option("--split", split_name, "train|moderate|extreme");
  eval->add_option("--episodes", episodes, "episodes per task");
  eval->add_option("--seed", seed, "evaluation seed");

  auto* sweep = app.add_subcommand("sweep", "meta-train across one axis of values");
  sweep->add_option("--config", config_path, "experiment config JSON");
  sweep->add_option("--variant", variant, "override variant");
  sweep->add_option("--out", out_dir, "override output directory");
  sweep->add_option("--axis", axis, "buffer_size|contrastive_batch|K|alpha")->required();
  sweep->add_option("--values", values, "axis values")->required();

  auto* estimators = app.add_subcommand("estimators", "estimator diagnostic tables");
  estimators->add_option("--suite", suite, "bounds|oracle|tightness");
  estimators->add_option("--seed", seed, "suite seed");
  estimators->add_option("--out-file", out_path, "write CSV here instead of stdout");

  auto* embeddings = app.add_subcommand("export-embeddings",
                                        "per-episode final embeddings with 2-D projection");
  embeddings->add_option("--checkpoint", checkpoint_path, "agent checkpoint")->required();
  embeddings->add_option("--split", split_name, "train|moderate|extreme");
  embeddings->add_option("--episodes", episodes, "episodes per task");
  embeddings->add_option("--seed", seed, "evaluation seed");
  embeddings->add_option("--out-file", out_path, "write CSV here instead of stdout");

  auto* report = app.add_subcommand("report", "aggregate result files into summary tables");
  report->add_option("files", result_files, "result.json files")->required();
  report->add_option("--out-file", out_path, "write CSV here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const auto cfg = resolve_config(config_path, variant, out_dir);
      std::vector<std::uint64_t> seeds = seed_given ? std::vector<std::uint64_t>{seed} : cfg.seeds;
      for (const auto s : seeds) std::cout << sami::run_and_save(cfg, s) << "\n";
    } else if (eval->parsed()) {
      sami::ExperimentConfig cfg;
      const sami::TrainedAgent agent = sami::load_agent(checkpoint_path, &cfg);
      const auto split = sami::split_by_name(split_name);
      const auto eps = sami::meta_test(agent, cfg, split, episodes, seed);
      double ret = 0.0;
      for (const auto& e : eps) ret += e.ret;
      nlohmann::json summary{{"split", split_name},
                             {"episodes", eps.size()},
                             {"aggregate_success", sami::aggregate_success(eps)},
                             {"mean_return", eps.empty() ? 0.0 : ret / eps.size()},
                             {"skills", sami::skill_histogram(eps)}};
      std::cout << summary.dump(2) << "\n";
    } else if (sweep->parsed()) {
      const auto cfg = resolve_config(config_path, variant, out_dir);
      std::cout << sami::sweep(cfg, axis, values);
    } else if (estimators->parsed()) {
      emit(sami::estimator_suite_csv(suite, seed), out_path);
    } else if (embeddings->parsed()) {
      sami::ExperimentConfig cfg;
      const sami::TrainedAgent agent = sami::load_agent(checkpoint_path, &cfg);
      const auto split = sami::split_by_name(split_name);
      emit(sami::export_embeddings_csv(agent, cfg, split, episodes, seed), out_path);
    } else if (report->parsed()) {
      std::vector<sami::RunResult> results;
      results.reserve(result_files.size());
      for (const auto& f : result_files)
        results.push_back(sami::parse_run_result(sami::read_file(f)));
      emit(sami::report(results), out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
