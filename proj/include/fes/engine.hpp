#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fes/core.hpp"
#include "fes/model.hpp"
#include "fes/pacing.hpp"
#include "fes/planner.hpp"
#include "fes/rng.hpp"
#include "fes/selector.hpp"

namespace fes {

enum class SelectorMode { None, Diversity, Random };

enum class PacingMode {
  // No pseudo labels at all (gold-only training).
  Disabled,
  // One fixed <f, n, k>, no search or switching.
  Static,
  // Every f rounds, n clients each admit up to `fixed_count` more labels.
  FixedCount,
  // Startup search plus online switching.
  Controller,
};

struct PacingSpec {
  PacingMode mode = PacingMode::Controller;
  PacingConfig fixed{1, 5, 1};
  int fixed_count = 100;
  ControllerSettings controller;
  std::vector<PacingConfig> candidates = default_candidates();

  void check() const;
};

struct ModelSpec {
  int hidden = 32;
  int num_layers = 6;
  // Centroid-initialize the output layer from the public split.
  bool pretrained = true;
  double centroid_sharpness = 8.0;

  void check() const;
};

struct EngineConfig {
  int clients_per_training_round = 5;
  PacingSpec pacing;
  double confidence_threshold = 0.9;
  bool capacity_filter = true;
  // Empty means every layer Full.
  LayerPlan plan;
  SelectorMode selector_mode = SelectorMode::Diversity;
  SelectorConfig selector;
  CostModel cost;
  AugEParams aug_e;
  TrainerConfig trainer;
  ModelSpec model;
  int max_rounds = 100;
  // Stop once validation accuracy reaches this (0 disables).
  double target_accuracy = 0.0;
  // Embedding pass cost relative to one training pass, charged once per run
  // when the diversity selector is on.
  double embedding_cost_ratio = 0.084;
  std::uint64_t seed = 0;

  void check() const;
};

struct RoundTrace {
  int round = 0;
  double sim_time = 0.0;
  double test_acc = 0.0;
  double val_acc = 0.0;
  int total_pseudo = 0;
  // Diagnostic only: checked against hidden true labels.
  double pseudo_correct_frac = 0.0;
  int f = 0;
  int n = 0;
  // Curriculum percent; FixedCount runs report -fixed_count.
  int k = 0;
  double aug_e = 0.0;
  double traffic_bytes = 0.0;
  double energy = 0.0;
};

struct RunSummary {
  int rounds = 0;
  double final_test_acc = 0.0;
  double best_test_acc = 0.0;
  double final_val_acc = 0.0;
  double zero_shot_test_acc = 0.0;
  double zero_shot_val_acc = 0.0;
  double sim_time = 0.0;
  double traffic_bytes = 0.0;
  double energy = 0.0;
  // Parts of sim_time spent pseudo-labeling and embedding.
  double inference_time = 0.0;
  // Inference compute summed over every visited client.
  double inference_compute = 0.0;
  double embedding_time = 0.0;
  // Simulated time spent in pacing probes; not part of sim_time.
  double probe_time = 0.0;
  int switches = 0;
  int labeling_events = 0;
  int skipped_events = 0;
  bool startup_warning = false;
  std::string initial_config;
};

struct RunResult {
  std::vector<RoundTrace> trace;
  MlpModel model;
  RunSummary summary;
};

struct SimState {
  MlpModel model;
  std::vector<ClientShard> shards;
  int round = 0;
  // Labeling events performed; drives the curriculum fraction.
  int events = 0;
  double sim_time = 0.0;
  double traffic = 0.0;
  double energy = 0.0;
  double inference_time = 0.0;
  double inference_compute = 0.0;
  int skipped_events = 0;
};

// How many labels a labeling event may leave on a visited client.
struct Admission {
  // Cumulative fraction of the client's candidates (curriculum pacing).
  double fraction = 0.0;
  // When positive, admit up to this many more instead (fixed-count pacing).
  int fixed_count = 0;
};

class Engine {
 public:
  Engine(const TaskData& data, std::vector<ClientShard> shards, EngineConfig cfg);

  const EngineConfig& config() const { return cfg_; }
  const LayerPlan& plan() const { return plan_; }
  // Candidate ids each client pseudo-labels from (after filtering).
  const std::vector<std::vector<SampleId>>& candidates() const { return candidates_; }

  SimState initial_state() const;
  double zero_shot_val_acc() const { return zero_shot_val_; }

  // One synchronous FedAvg round. Throws when no client holds a label.
  void training_round(SimState& state, Rng& rng) const;
  // Returns false when the capacity filter skipped the event.
  bool labeling_event(SimState& state, int n_clients, const Admission& admission, Rng& rng) const;

  // Validation-accuracy gain of `cfg` over `window` rounds started from
  // `snapshot`; `snapshot` itself is not modified. Adds the probe's
  // simulated time to `probe_time`.
  double probe(const SimState& snapshot, const PacingConfig& cfg, int window, Rng rng,
               double& probe_time) const;

  RunResult run() const;

 private:
  Admission admission_for(const PacingConfig& cfg, int next_event) const;
  double embedding_cost(SimState& state) const;
  RoundTrace record(const SimState& state) const;

  const TaskData& data_;
  std::vector<ClientShard> shards_;
  EngineConfig cfg_;
  LayerPlan plan_;
  MlpModel initial_model_;
  double zero_shot_val_ = 0.0;
  std::vector<std::vector<SampleId>> candidates_;
};

// Simulated training time for one labeled batch under `plan`.
double training_batch_latency(const LayerPlan& plan, const CostModel& cost);

// Plan evaluator for the co-planner: runs `base` with the given plan, no
// pseudo labeling, for `rounds` rounds and returns final validation accuracy.
PlanEvaluator make_plan_evaluator(const TaskData& data, const std::vector<ClientShard>& shards,
                                  EngineConfig base, int rounds);

// First sim_time at which test accuracy reaches `target`; infinity if never.
double time_to_accuracy(const std::vector<RoundTrace>& trace, double target);

}  // namespace fes
