#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fes/core.hpp"
#include "fes/model.hpp"

namespace fes {

struct CostModel {
  // Bytes per simulated time unit.
  double bandwidth = 4096.0;
  int bytes_per_param = 4;
  // Time units per batch per layer.
  double compute_fwd_per_layer = 1.0;
  double compute_bwd_per_layer = 2.0;
  // Energy per time unit spent computing / transmitting.
  double power_compute = 1.0;
  double power_network = 1.0;

  void check() const;
};

struct RoundCost {
  double compute_time = 0.0;
  double comm_time = 0.0;
  double energy = 0.0;
  double traffic_bytes = 0.0;

  double total_time() const { return compute_time + comm_time; }
};

// One client's training round under `plan`:
//   compute = batches * (L * fwd + (L - frozen_prefix) * bwd)
//   traffic = 2 * bytes_per_param * trainable parameters (down + up)
RoundCost round_cost(const LayerPlan& plan, const MlpModel& model, const CostModel& cost,
                     int batches);

struct PlanSearchConfig {
  // Largest tolerated accuracy drop against the all-Full plan.
  double epsilon_acc = 0.01;
  // Simulated FL rounds behind every plan accuracy.
  int probe_rounds = 30;
  // Batches per round used to price plans.
  int batches_per_round = 4;
  // Warn (and return all-Full) when even all-Full stays below this.
  double min_accuracy = 0.0;

  void check() const;
};

// Accuracy reached by a plan; the planner memoizes calls.
using PlanEvaluator = std::function<double(const LayerPlan&)>;

struct PlanEvaluation {
  LayerPlan plan;
  double accuracy = 0.0;
  RoundCost cost;
  bool admissible = false;
};

struct PlanSearchResult {
  LayerPlan plan;
  double full_accuracy = 0.0;
  double target = 0.0;
  // Every plan evaluated, in evaluation order.
  std::vector<PlanEvaluation> evaluated;
  bool linear_fallback = false;
  bool warning = false;
  std::string note;
};

// Every terraced plan (frozen prefix, bias band, full suffix) for `num_layers`.
std::vector<LayerPlan> enumerate_terraced_plans(int num_layers);

// Binary search for the deepest admissible frozen prefix, then for the widest
// admissible bias band above it. Admissible means accuracy >= all-Full
// accuracy - epsilon. A search phase that observes non-monotone
// admissibility is redone as a linear scan.
PlanSearchResult co_plan(const MlpModel& model, const PlanSearchConfig& cfg, const CostModel& cost,
                         const PlanEvaluator& evaluate);

// Evaluates every terraced plan and returns the admissible one with the
// lowest round time (ties: deeper frozen prefix, then wider bias band).
PlanSearchResult exhaustive_plan(const MlpModel& model, const PlanSearchConfig& cfg,
                                 const CostModel& cost, const PlanEvaluator& evaluate);

}  // namespace fes
