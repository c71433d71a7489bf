#include "fes/pacing.hpp"

#include <algorithm>
#include <numeric>

namespace fes {

void PacingConfig::check() const {
  if (f < 1) throw Error("pacing.f must be >= 1");
  if (n < 1) throw Error("pacing.n must be >= 1");
  if (k < 0) throw Error("pacing.k must be >= 0");
}

std::string PacingConfig::to_string() const {
  return "<" + std::to_string(f) + "," + std::to_string(n) + "," + std::to_string(k) + ">";
}

double cumulative_fraction(int events, const PacingConfig& cfg) {
  return std::min(1.0, static_cast<double>(events) * cfg.k / 100.0);
}

void AugEParams::check() const {
  if (!(eta > 0.0) || !(theta > 0.0) || !(l_i > 0.0) || !(l_t > 0.0)) {
    throw Error("aug_e parameters eta, theta, l_i, l_t must be > 0");
  }
}

double aug_e(double delta_acc, const PacingConfig& cfg, const AugEParams& p) {
  const double c_infer = p.l_i * static_cast<double>(cfg.n) / static_cast<double>(cfg.f);
  const double c_train = p.l_t * static_cast<double>(cfg.k);
  const double denom = c_infer + p.theta * c_train;
  if (!(denom > 0.0)) throw Error("aug_e: cost denominator must be positive");
  return p.eta * delta_acc / denom;
}

std::vector<PacingConfig> default_candidates() {
  std::vector<PacingConfig> out;
  for (int f : {1, 2, 5, 10}) {
    for (int n : {1, 2, 4, 8}) {
      for (int k : {1, 2}) out.push_back({f, n, k});
    }
  }
  return out;
}

SearchResult startup_search(std::span<const PacingConfig> candidates, int trial_window, int top_t,
                            const AugEParams& params, const ProbeFn& probe) {
  if (candidates.empty()) throw Error("startup_search: no candidates");
  if (top_t < 1) throw Error("startup_search: top_t must be >= 1");
  SearchResult res;
  res.scores.reserve(candidates.size());
  for (const auto& c : candidates) {
    c.check();
    res.scores.push_back(aug_e(probe(c, trial_window), c, params));
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return res.scores[a] > res.scores[b]; });
  res.best = candidates[order.front()];
  res.warning = res.scores[order.front()] <= 0.0;
  const auto keep = std::min<std::size_t>(top_t, order.size());
  for (std::size_t i = 0; i < keep; ++i) res.top.push_back(candidates[order[i]]);
  return res;
}

void ControllerSettings::check() const {
  if (trial_window < 1) throw Error("controller.trial_window must be >= 1");
  if (top_t < 1) throw Error("controller.top_t must be >= 1");
  if (ema_points < 1) throw Error("controller.ema_points must be >= 1");
}

PacingController::PacingController(std::vector<PacingConfig> candidates,
                                   ControllerSettings settings, AugEParams params)
    : candidates_(std::move(candidates)), settings_(settings), params_(params) {
  settings_.check();
  params_.check();
  if (candidates_.empty()) throw Error("pacing controller: no candidates");
  for (const auto& c : candidates_) c.check();
  active_ = candidates_.front();
}

const SearchResult& PacingController::start(const ProbeFn& probe) {
  in_probe_ = true;
  try {
    startup_ = startup_search(candidates_, settings_.trial_window, settings_.top_t, params_, probe);
  } catch (...) {
    in_probe_ = false;
    throw;
  }
  in_probe_ = false;
  top_ = startup_.top;
  active_ = startup_.best;
  started_ = true;
  return startup_;
}

void PacingController::start_fixed(const PacingConfig& cfg) {
  cfg.check();
  active_ = cfg;
  top_ = {cfg};
  startup_ = SearchResult{cfg, {cfg}, {}, false};
  started_ = true;
}

Decision PacingController::step(const RoundMetrics& metrics, const ProbeFn& probe) {
  if (in_probe_) return {DecisionKind::Continue, active_};
  if (!started_) throw Error("pacing controller: step() before start()");

  const double a = 2.0 / (settings_.ema_points + 1.0);
  ema_ = have_ema_ ? ema_ + a * (metrics.val_acc - ema_) : metrics.val_acc;
  have_ema_ = true;
  ++rounds_active_;
  history_.push_back(ema_);

  const auto window = static_cast<std::size_t>(settings_.trial_window);
  if (history_.size() > window) {
    const double delta = history_.back() - history_[history_.size() - 1 - window];
    last_aug_e_ = aug_e(delta, active_, params_);
    if (settings_.switching && last_aug_e_ < settings_.alarm_threshold) {
      in_probe_ = true;
      SearchResult again;
      try {
        again = startup_search(top_, settings_.trial_window, settings_.top_t, params_, probe);
      } catch (...) {
        in_probe_ = false;
        throw;
      }
      in_probe_ = false;
      active_ = again.best;
      ++switches_;
      rounds_active_ = 0;
      history_.assign(1, ema_);
      return {DecisionKind::SwitchConfig, active_};
    }
  }
  if (rounds_active_ % active_.f == 0) return {DecisionKind::TriggerLabeling, active_};
  return {DecisionKind::Continue, active_};
}

}  // namespace fes
