// Command-line front end: dataset builds, training, the evaluation grids and
// the acceptance suite, all under one root seed.

#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ntg/acceptance.hpp"
#include "ntg/harness.hpp"

namespace fs = std::filesystem;
using namespace ntg;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out;
  std::vector<std::string> overrides;
};

ExperimentConfig load_config(const CommonOpts& opts) {
  ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = ExperimentConfig::from_file(opts.config_path);
  for (const auto& kv : opts.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override must look like key=value: " + kv);
    cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!opts.out.empty()) cfg.out_dir = opts.out;
  fs::create_directories(cfg.out_dir);
  std::ofstream(cfg.out_dir + "/config.json") << cfg.to_json();
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config JSON file");
  cmd->add_option("--out", opts.out, "output directory (overrides config out_dir)");
  cmd->add_option("--set", opts.overrides, "config override key=value (repeatable)");
}

void print_rows(const std::vector<MetricsRecord>& rows) {
  for (const auto& r : rows)
    std::printf("%-24s %-22s %-10s seen=%-4d episodes=%-4d success=%.3f%s\n",
                r.experiment_id.c_str(), r.condition.c_str(), domain_name(r.domain).c_str(),
                r.seen_tasks, r.episodes, r.success_rate,
                r.mean_nll ? ("  nll=" + std::to_string(*r.mean_nll)).c_str() : "");
}

WorldConfig world_for(const ExperimentConfig& cfg, const std::string& domain) {
  WorldConfig w;
  if (domain == "stacking") {
    w.domain = Domain::Stacking;
    w.stacking.blocks = cfg.stacking_blocks;
  } else if (domain == "sorting") {
    w.domain = Domain::Sorting;
    w.sorting = {cfg.sorting_categories, cfg.sorting_bins, cfg.sorting_objects_per_category};
  } else if (domain == "collection") {
    w.domain = Domain::Collection;
    w.collection.objects = cfg.collection_objects;
    w.collection.receptacles = cfg.collection_receptacles;
    w.collection.target_counts = cfg.collection_train_counts;
    int max_count = 0;
    for (int c : cfg.collection_eval_counts) max_count = std::max(max_count, c);
    for (int c : cfg.collection_train_counts) max_count = std::max(max_count, c);
    w.collection.max_targets = max_count;
  } else {
    throw ConfigError("unknown domain: " + domain);
  }
  return w;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conjugate-task-graph imitation: datasets, training, evaluation"};
  app.require_subcommand(1);

  CommonOpts gen_opts, train_opts, eval_opts, ablate_opts, sort_opts, collect_opts, nll_opts,
      accept_opts;
  std::string gen_domain = "stacking";
  int gen_seen = 40, gen_unseen = 10;
  std::string train_data, eval_export_dir, accept_criteria;

  CLI::App* gen = app.add_subcommand("gen", "build a dataset (tasks, demos, unions, supervision)");
  add_common(gen, gen_opts);
  gen->add_option("--domain", gen_domain, "stacking | sorting | collection");
  gen->add_option("--seen", gen_seen, "seen task count");
  gen->add_option("--unseen", gen_unseen, "unseen task count");

  CLI::App* train = app.add_subcommand("train", "train all components on a dataset directory");
  add_common(train, train_opts);
  train->add_option("--data", train_data, "dataset directory from `gen`")->required();

  CLI::App* eval = app.add_subcommand("eval", "stacking data-efficiency sweep and unseen eval");
  add_common(eval, eval_opts);

  CLI::App* ablate = app.add_subcommand("ablate", "component ablation grid on unseen stacking");
  add_common(ablate, ablate_opts);

  CLI::App* sort_alt = app.add_subcommand("sort-alt", "alternate-order sorting evaluation");
  add_common(sort_alt, sort_opts);

  CLI::App* collect = app.add_subcommand("collect-gen", "step-count generalization vs flat policy");
  add_common(collect, collect_opts);

  CLI::App* nll = app.add_subcommand("nll", "demonstration NLL protocol on unseen tasks");
  add_common(nll, nll_opts);

  CLI::App* export_cmd = app.add_subcommand("export", "collect DOT/CSV artifacts and a summary");
  export_cmd->add_option("--run", eval_export_dir, "run directory to export")->required();

  CLI::App* accept = app.add_subcommand("accept", "run the acceptance suite");
  add_common(accept, accept_opts);
  accept->add_option("--criteria", accept_criteria, "comma-separated criterion ids (default all)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      ExperimentConfig cfg = load_config(gen_opts);
      Dataset ds = build_dataset(world_for(cfg, gen_domain), gen_seen, gen_unseen,
                                 cfg.demos_per_task, cfg.union_demos_per_task,
                                 cfg.unseen_demos_per_task, derive_seed(cfg.root_seed, gen_domain + "-data"));
      write_dataset(ds, cfg.out_dir + "/dataset");
      std::printf("dataset: %zu seen, %zu unseen tasks -> %s/dataset\n", ds.seen.size(),
                  ds.unseen.size(), cfg.out_dir.c_str());
    } else if (train->parsed()) {
      ExperimentConfig cfg = load_config(train_opts);
      Dataset ds = load_dataset(train_data);
      train_all(ds, cfg, cfg.out_dir + "/checkpoints");
      if (ds.world.domain == Domain::Collection) train_flat_baseline(ds, cfg, cfg.out_dir + "/checkpoints");
      std::printf("checkpoints -> %s/checkpoints\n", cfg.out_dir.c_str());
    } else if (eval->parsed()) {
      ExperimentConfig cfg = load_config(eval_opts);
      auto rows = run_data_efficiency(cfg, cfg.out_dir);
      print_rows(rows);
    } else if (ablate->parsed()) {
      ExperimentConfig cfg = load_config(ablate_opts);
      auto rows = run_ablations(cfg, cfg.out_dir);
      print_rows(rows);
    } else if (sort_alt->parsed()) {
      ExperimentConfig cfg = load_config(sort_opts);
      auto rows = run_alternate_order(cfg, cfg.out_dir);
      print_rows(rows);
    } else if (collect->parsed()) {
      ExperimentConfig cfg = load_config(collect_opts);
      auto rows = run_step_generalization(cfg, cfg.out_dir);
      print_rows(rows);
    } else if (nll->parsed()) {
      ExperimentConfig cfg = load_config(nll_opts);
      NllReport report = run_nll_protocol(cfg, cfg.out_dir);
      print_rows(report.rows);
      std::printf("uniform closed-form gap: %.2e\n", report.uniform_closed_form_gap);
    } else if (export_cmd->parsed()) {
      std::string summary = export_artifacts(eval_export_dir);
      std::printf("summary -> %s\n", summary.c_str());
    } else if (accept->parsed()) {
      ExperimentConfig cfg = load_config(accept_opts);
      std::set<int> only;
      if (!accept_criteria.empty()) {
        std::istringstream in(accept_criteria);
        std::string tok;
        while (std::getline(in, tok, ',')) only.insert(std::stoi(tok));
      }
      AcceptanceReport report = run_acceptance(cfg, cfg.out_dir, only);
      return report.all_pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
