#include "fes/planner.hpp"

#include <algorithm>
#include <map>

namespace fes {

void CostModel::check() const {
  if (!(bandwidth > 0.0) || bytes_per_param < 1 || !(compute_fwd_per_layer > 0.0) ||
      !(compute_bwd_per_layer > 0.0) || !(power_compute > 0.0) || !(power_network > 0.0)) {
    throw Error("cost model values must all be positive");
  }
}

RoundCost round_cost(const LayerPlan& plan, const MlpModel& model, const CostModel& cost,
                     int batches) {
  cost.check();
  if (batches < 0) throw Error("round_cost: negative batch count");
  const int L = model.num_layers();
  if (plan.num_layers() != L) throw Error("plan length does not match model depth");
  RoundCost rc;
  rc.compute_time = batches * (L * cost.compute_fwd_per_layer +
                               (L - plan.frozen_prefix()) * cost.compute_bwd_per_layer);
  rc.traffic_bytes = 2.0 * cost.bytes_per_param * static_cast<double>(model.trainable_parameter_count(plan));
  rc.comm_time = rc.traffic_bytes / cost.bandwidth;
  rc.energy = cost.power_compute * rc.compute_time + cost.power_network * rc.comm_time;
  return rc;
}

void PlanSearchConfig::check() const {
  if (!(epsilon_acc >= 0.0)) throw Error("planner.epsilon_acc must be >= 0");
  if (probe_rounds < 1) throw Error("planner.probe_rounds must be >= 1");
  if (batches_per_round < 1) throw Error("planner.batches_per_round must be >= 1");
}

std::vector<LayerPlan> enumerate_terraced_plans(int num_layers) {
  std::vector<LayerPlan> out;
  for (int frozen = 0; frozen <= num_layers; ++frozen) {
    for (int bias = 0; frozen + bias <= num_layers; ++bias) {
      out.push_back(LayerPlan::terraced(num_layers, frozen, bias));
    }
  }
  return out;
}

namespace {

class MemoEvaluator {
 public:
  MemoEvaluator(const MlpModel& model, const PlanSearchConfig& cfg, const CostModel& cost,
                const PlanEvaluator& eval)
      : model_(model), cfg_(cfg), cost_(cost), eval_(eval) {}

  double accuracy(const LayerPlan& plan) {
    const auto key = plan.to_string();
    if (auto it = cache_.find(key); it != cache_.end()) return log_[it->second].accuracy;
    PlanEvaluation e;
    e.plan = plan;
    e.accuracy = eval_(plan);
    e.cost = round_cost(plan, model_, cost_, cfg_.batches_per_round);
    e.admissible = has_target_ && e.accuracy >= target_;
    cache_.emplace(key, log_.size());
    log_.push_back(std::move(e));
    return log_.back().accuracy;
  }

  bool admissible(const LayerPlan& plan) { return accuracy(plan) >= target_; }

  void set_target(double t) {
    target_ = t;
    has_target_ = true;
    for (auto& e : log_) e.admissible = e.accuracy >= t;
  }

  std::vector<PlanEvaluation> take_log() { return std::move(log_); }

 private:
  const MlpModel& model_;
  const PlanSearchConfig& cfg_;
  const CostModel& cost_;
  const PlanEvaluator& eval_;
  std::map<std::string, std::size_t> cache_;
  std::vector<PlanEvaluation> log_;
  double target_ = 0.0;
  bool has_target_ = false;
};

// Largest x in [0, hi] with ok(x), given ok(0). Assumes ok is a prefix
// property; probes one point past the boundary and rescans linearly if
// that assumption fails.
int largest_admissible(int hi, const std::function<bool(int)>& ok, bool& fell_back) {
  if (hi <= 0) return 0;
  std::map<int, bool> seen{{0, true}};
  auto probe = [&](int x) {
    auto it = seen.find(x);
    if (it != seen.end()) return it->second;
    return seen[x] = ok(x);
  };
  int lo = 0;
  int best;
  if (probe(hi)) {
    best = hi;
  } else {
    int bad = hi;
    while (bad - lo > 1) {
      const int mid = lo + (bad - lo) / 2;
      if (probe(mid)) lo = mid;
      else bad = mid;
    }
    best = lo;
    if (best + 2 < hi) probe(best + 2);
  }
  bool monotone = true;
  bool failed = false;
  for (const auto& [x, good] : seen) {
    if (!good) failed = true;
    else if (failed) monotone = false;
  }
  if (monotone) return best;
  fell_back = true;
  best = 0;
  for (int x = 1; x <= hi; ++x) {
    if (probe(x)) best = x;
  }
  return best;
}

}  // namespace

PlanSearchResult co_plan(const MlpModel& model, const PlanSearchConfig& cfg, const CostModel& cost,
                         const PlanEvaluator& evaluate) {
  cfg.check();
  cost.check();
  const int L = model.num_layers();
  MemoEvaluator memo(model, cfg, cost, evaluate);
  PlanSearchResult res;
  const auto full = LayerPlan::uniform(L, LayerMode::Full);
  res.full_accuracy = memo.accuracy(full);
  res.target = res.full_accuracy - cfg.epsilon_acc;
  memo.set_target(res.target);
  if (res.full_accuracy < cfg.min_accuracy) {
    res.plan = full;
    res.warning = true;
    res.note = "all-Full plan misses the minimum accuracy; returning all-Full";
    res.evaluated = memo.take_log();
    return res;
  }

  bool fell_back = false;
  const int frozen = largest_admissible(
      L, [&](int f) { return memo.admissible(LayerPlan::terraced(L, f, 0)); }, fell_back);
  const int bias = largest_admissible(
      L - frozen, [&](int b) { return memo.admissible(LayerPlan::terraced(L, frozen, b)); },
      fell_back);
  res.plan = LayerPlan::terraced(L, frozen, bias);
  res.linear_fallback = fell_back;
  if (fell_back) res.note = "non-monotone accuracy observed; used a linear scan";
  res.evaluated = memo.take_log();
  return res;
}

PlanSearchResult exhaustive_plan(const MlpModel& model, const PlanSearchConfig& cfg,
                                 const CostModel& cost, const PlanEvaluator& evaluate) {
  cfg.check();
  cost.check();
  const int L = model.num_layers();
  MemoEvaluator memo(model, cfg, cost, evaluate);
  PlanSearchResult res;
  res.full_accuracy = memo.accuracy(LayerPlan::uniform(L, LayerMode::Full));
  res.target = res.full_accuracy - cfg.epsilon_acc;
  memo.set_target(res.target);
  for (const auto& p : enumerate_terraced_plans(L)) memo.accuracy(p);
  res.evaluated = memo.take_log();

  const PlanEvaluation* best = nullptr;
  for (const auto& e : res.evaluated) {
    if (!e.admissible) continue;
    if (best == nullptr) {
      best = &e;
      continue;
    }
    const double a = e.cost.total_time(), b = best->cost.total_time();
    const int fa = e.plan.frozen_prefix(), fb = best->plan.frozen_prefix();
    const int ba = e.plan.count(LayerMode::BiasOnly), bb = best->plan.count(LayerMode::BiasOnly);
    if (a < b || (a == b && (fa > fb || (fa == fb && ba > bb)))) best = &e;
  }
  res.plan = best->plan;  // all-Full is always admissible
  if (res.full_accuracy < cfg.min_accuracy) {
    res.plan = LayerPlan::uniform(L, LayerMode::Full);
    res.warning = true;
    res.note = "all-Full plan misses the minimum accuracy; returning all-Full";
  }
  return res;
}

}  // namespace fes
