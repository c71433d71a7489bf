#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fes/config.hpp"
#include "fes/datagen.hpp"
#include "fes/engine.hpp"
#include "fes/io.hpp"
#include "fes/planner.hpp"
#include "fes/selector.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "Experiment config (JSON)");
  if (needs_config) opt->required();
  cmd->add_option("--seed", c.seed, "Override the experiment seed")->each([&c](const std::string&) {
    c.seed_set = true;
  });
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_flag("--quiet", c.quiet, "Print nothing on success");
}

fes::ExperimentConfig resolve(const Common& c) {
  auto cfg = c.config.empty() ? fes::ExperimentConfig{} : fes::load_config(c.config);
  fes::apply_env_overrides(cfg);
  if (c.seed_set) cfg.seed = c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.check();
  return cfg;
}

std::string prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw fes::Error("cannot create output directory " + dir + ": " + ec.message());
  return dir;
}

std::string join(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

int cmd_gen_data(const Common& c) {
  const auto cfg = resolve(c);
  const auto w = fes::make_workload(cfg);
  const auto dir = prepare_dir(cfg.output_dir);
  fes::write_dataset(w.data, join(dir, "dataset.jsonl"));
  fes::write_manifest(w.shards, join(dir, "manifest.jsonl"));
  fes::write_stats(w.shards, w.data, join(dir, "stats.json"));
  fes::write_text(fes::dump_config(cfg), join(dir, "effective_config.json"));
  if (!c.quiet) {
    std::size_t gold = 0;
    for (const auto& s : w.shards) gold += s.gold.size();
    std::printf("wrote %zu train / %zu validation / %zu test samples, %zu clients, %zu gold labels to %s\n",
                w.data.train.size(), w.data.validation.size(), w.data.test.size(), w.shards.size(), gold,
                dir.c_str());
  }
  return 0;
}

struct SelectArgs {
  std::string embeddings;
  std::string mode = "diversity";
  int k = 0;
  double rho = 0.0;
  double budget = 0.0;
};

int cmd_select(const Common& c, const SelectArgs& a) {
  const auto cfg = resolve(c);
  fes::SelectorConfig sc = cfg.engine.selector;
  if (a.k > 0) sc.k = a.k;
  if (a.rho > 0.0) sc.rho = a.rho;
  if (a.budget > 0.0) sc.budget_fraction = a.budget;
  sc.check();
  const auto set = fes::read_embeddings(a.embeddings);

  std::vector<fes::SelectionStep> steps;
  if (a.mode == "diversity") {
    std::vector<std::span<const double>> vecs(set.vectors.begin(), set.vectors.end());
    const auto graph = fes::build_graph(set.ids, vecs, sc.k);
    if (graph.zero_norm_count > 0 && !c.quiet) {
      std::fprintf(stderr, "warning: %d zero-norm embeddings\n", graph.zero_norm_count);
    }
    steps = fes::select(graph, sc);
  } else if (a.mode == "random") {
    fes::Rng rng = fes::split_stream(fes::Rng(cfg.seed), "select");
    for (auto id : fes::random_select(set.ids, sc.budget_fraction, rng)) steps.push_back({id, 0.0});
  } else {
    throw fes::Error("--mode must be diversity or random, got '" + a.mode + "'");
  }
  const auto dir = prepare_dir(cfg.output_dir);
  fes::write_selection(steps, join(dir, "selection.csv"));
  if (!c.quiet) {
    std::printf("selected %zu of %zu samples (k=%d, rho=%g) -> %s\n", steps.size(), set.ids.size(), sc.k,
                sc.rho, join(dir, "selection.csv").c_str());
  }
  return 0;
}

int cmd_plan(const Common& c, bool exhaustive) {
  const auto cfg = resolve(c);
  const auto w = fes::make_workload(cfg);
  const auto engine = fes::engine_config(cfg);
  // The planner works on a fully labeled proxy of the task.
  const auto proxy = fes::reveal_all_labels(w.shards);
  const auto eval = fes::make_plan_evaluator(w.data, proxy, engine, cfg.planner.probe_rounds);
  fes::Engine shape(w.data, proxy, [&] {
    auto e = engine;
    e.pacing.mode = fes::PacingMode::Disabled;
    return e;
  }());
  const auto model = shape.initial_state().model;
  const auto res = exhaustive ? fes::exhaustive_plan(model, cfg.planner, engine.cost, eval)
                              : fes::co_plan(model, cfg.planner, engine.cost, eval);

  const auto dir = prepare_dir(cfg.output_dir);
  fes::write_frontier(res, join(dir, "frontier.csv"));
  fes::write_text(res.plan.to_string() + "\n", join(dir, "plan.txt"));
  fes::write_text(fes::dump_config(cfg), join(dir, "effective_config.json"));
  if (res.warning) std::fprintf(stderr, "warning: %s\n", res.note.c_str());
  if (!c.quiet) {
    const auto full = fes::round_cost(fes::LayerPlan::uniform(model.num_layers(), fes::LayerMode::Full), model,
                                      engine.cost, cfg.planner.batches_per_round);
    const auto chosen = fes::round_cost(res.plan, model, engine.cost, cfg.planner.batches_per_round);
    std::printf("plan %s (F=frozen, B=bias only, U=full; input layer first)\n", res.plan.to_string().c_str());
    std::printf("all-full accuracy %.4f, target %.4f, %zu plans evaluated%s\n", res.full_accuracy, res.target,
                res.evaluated.size(), res.linear_fallback ? " (linear fallback)" : "");
    std::printf("%-8s %12s %12s %12s %14s\n", "", "compute", "comm", "energy", "traffic_bytes");
    std::printf("%-8s %12.2f %12.2f %12.2f %14.0f\n", "chosen", chosen.compute_time, chosen.comm_time,
                chosen.energy, chosen.traffic_bytes);
    std::printf("%-8s %12.2f %12.2f %12.2f %14.0f\n", "all-full", full.compute_time, full.comm_time, full.energy,
                full.traffic_bytes);
  }
  return 0;
}

int cmd_run(const Common& c) {
  const auto cfg = resolve(c);
  const auto w = fes::make_workload(cfg);
  const fes::Engine engine(w.data, w.shards, fes::engine_config(cfg));
  const auto res = engine.run();
  const auto dir = prepare_dir(cfg.output_dir);
  fes::write_trace(res.trace, join(dir, "trace.csv"));
  fes::write_summary(res.summary, join(dir, "summary.json"));
  fes::save_checkpoint(res.model, join(dir, "model.ckpt"));
  fes::write_text(fes::dump_config(cfg), join(dir, "effective_config.json"));
  if (!c.quiet) {
    const auto& s = res.summary;
    std::printf("%d rounds, test acc %.4f (best %.4f, zero-shot %.4f), sim time %.1f, traffic %.0f B, energy %.1f\n",
                s.rounds, s.final_test_acc, s.best_test_acc, s.zero_shot_test_acc, s.sim_time, s.traffic_bytes,
                s.energy);
    if (!s.initial_config.empty()) {
      std::printf("pacing %s, %d labeling events (%d skipped), %d switches\n", s.initial_config.c_str(),
                  s.labeling_events, s.skipped_events, s.switches);
    }
    if (s.startup_warning) std::printf("warning: no pacing candidate improved accuracy during startup\n");
    std::printf("outputs in %s\n", dir.c_str());
  }
  return 0;
}

int cmd_report(const Common& c, const std::vector<std::string>& files, double target) {
  std::vector<std::string> names;
  std::vector<std::vector<fes::RoundTrace>> traces;
  for (const auto& f : files) {
    traces.push_back(fes::read_trace(f));
    const fs::path p(f);
    names.push_back(p.filename() == "trace.csv" && p.has_parent_path() ? p.parent_path().filename().string()
                                                                         : p.stem().string());
  }
  if (target <= 0.0) {
    // Default: 90% of the best accuracy any of the runs reached.
    double best = 0.0;
    for (const auto& t : traces) {
      for (const auto& r : t) best = std::max(best, r.test_acc);
    }
    target = 0.9 * best;
  }
  const auto text = fes::format_report(fes::make_report(names, traces, target), target);
  if (!c.out.empty()) fes::write_text(text, join(prepare_dir(c.out), "report.csv"));
  if (!c.quiet) std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated few-shot learning simulator"};
  app.require_subcommand(1);

  Common gen, sel, plan, run, rep;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic task and its client partition");
  add_common(gen_cmd, gen, false);

  SelectArgs sel_args;
  auto* sel_cmd = app.add_subcommand("select", "Run representational filtering over an embeddings file");
  add_common(sel_cmd, sel, false);
  sel_cmd->add_option("--embeddings", sel_args.embeddings, "JSON-lines file with id and x per record")->required();
  sel_cmd->add_option("--mode", sel_args.mode, "diversity or random");
  sel_cmd->add_option("--k", sel_args.k, "Neighbors per sample");
  sel_cmd->add_option("--rho", sel_args.rho, "Diversity discount base (> 1)");
  sel_cmd->add_option("--budget", sel_args.budget, "Fraction of the pool to select");

  bool exhaustive = false;
  auto* plan_cmd = app.add_subcommand("plan", "Search the layer training plan");
  add_common(plan_cmd, plan, true);
  plan_cmd->add_flag("--exhaustive", exhaustive, "Evaluate every terraced plan instead of binary search");

  auto* run_cmd = app.add_subcommand("run", "Run a simulation and write its trace");
  add_common(run_cmd, run, true);

  std::vector<std::string> files;
  double target = 0.0;
  auto* rep_cmd = app.add_subcommand("report", "Compare traces by time-to-accuracy");
  rep_cmd->add_option("traces", files, "Trace CSV files; the first is the baseline")->required();
  rep_cmd->add_option("--target", target, "Target test accuracy (default: 0.9 x best seen)");
  rep_cmd->add_option("--out", rep.out, "Write report.csv here");
  rep_cmd->add_flag("--quiet", rep.quiet, "Print nothing on success");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*sel_cmd) return cmd_select(sel, sel_args);
    if (*plan_cmd) return cmd_plan(plan, exhaustive);
    if (*run_cmd) return cmd_run(run);
    if (*rep_cmd) return cmd_report(rep, files, target);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
