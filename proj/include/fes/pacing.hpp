#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fes/core.hpp"

namespace fes {

// <f, n, k>: label every f training rounds on n clients, admitting k more
// percent of each client's candidates per labeling event.
struct PacingConfig {
  int f = 1;
  int n = 1;
  int k = 1;

  void check() const;
  std::string to_string() const;
  bool operator==(const PacingConfig&) const = default;
};

// min(1, events * k / 100).
double cumulative_fraction(int events, const PacingConfig& cfg);

struct AugEParams {
  double eta = 1.0;
  double theta = 1.0;
  // Inference latency per sample batch, in simulated time units.
  double l_i = 6.0;
  // Training latency per batch, in simulated time units.
  double l_t = 18.0;

  void check() const;
};

// eta * delta_acc / (l_i * n / f + theta * l_t * k).
double aug_e(double delta_acc, const PacingConfig& cfg, const AugEParams& p);

// f in {1,2,5,10} x n in {1,2,4,8} x k in {1,2}.
std::vector<PacingConfig> default_candidates();

// Runs `cfg` for `trial_window` rounds from a fixed snapshot and returns the
// validation accuracy gained over the probe.
using ProbeFn = std::function<double(const PacingConfig& cfg, int trial_window)>;

struct SearchResult {
  PacingConfig best;
  // Best-first, at most top_t entries.
  std::vector<PacingConfig> top;
  // AUG-E per candidate, in candidate order.
  std::vector<double> scores;
  // Every candidate scored <= 0; `best` is the least negative one.
  bool warning = false;
};

// Probes every candidate and ranks by AUG-E; ties keep candidate order.
SearchResult startup_search(std::span<const PacingConfig> candidates, int trial_window, int top_t,
                            const AugEParams& params, const ProbeFn& probe);

struct ControllerSettings {
  int trial_window = 5;
  int top_t = 8;
  double alarm_threshold = 0.0;
  // Accuracy is smoothed with an EMA spanning this many evaluation points.
  int ema_points = 3;
  bool switching = true;

  void check() const;
};

enum class DecisionKind { Continue, TriggerLabeling, SwitchConfig };

struct Decision {
  DecisionKind kind = DecisionKind::Continue;
  PacingConfig config;
};

struct RoundMetrics {
  int round = 0;
  double val_acc = 0.0;
};

// Online pacing state machine. After start(), call step() once per completed
// training round. Probes run through the supplied ProbeFn and are atomic:
// step() calls made while a probe is in flight return Continue.
class PacingController {
 public:
  PacingController(std::vector<PacingConfig> candidates, ControllerSettings settings,
                   AugEParams params);

  // Startup search over all candidates.
  const SearchResult& start(const ProbeFn& probe);
  // Skip the search and run `cfg` (static pacing).
  void start_fixed(const PacingConfig& cfg);

  Decision step(const RoundMetrics& metrics, const ProbeFn& probe);

  const PacingConfig& active() const { return active_; }
  const std::vector<PacingConfig>& top() const { return top_; }
  const std::vector<PacingConfig>& candidates() const { return candidates_; }
  const SearchResult& startup() const { return startup_; }
  int switch_count() const { return switches_; }
  double last_aug_e() const { return last_aug_e_; }
  bool in_probe() const { return in_probe_; }

 private:
  std::vector<PacingConfig> candidates_;
  ControllerSettings settings_;
  AugEParams params_;
  SearchResult startup_;
  std::vector<PacingConfig> top_;
  PacingConfig active_;
  bool started_ = false;
  bool in_probe_ = false;
  int rounds_active_ = 0;
  int switches_ = 0;
  double ema_ = 0.0;
  bool have_ema_ = false;
  // Smoothed accuracy per round since the active config was adopted.
  std::vector<double> history_;
  double last_aug_e_ = 0.0;
};

}  // namespace fes
