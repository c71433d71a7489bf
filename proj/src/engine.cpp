#include "fes/engine.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

namespace fes {

void PacingSpec::check() const {
  fixed.check();
  controller.check();
  if (fixed_count < 1) throw Error("pacing.fixed_count must be >= 1");
  if (mode == PacingMode::Controller && candidates.empty()) {
    throw Error("pacing.candidates must not be empty");
  }
  for (const auto& c : candidates) c.check();
}

void ModelSpec::check() const {
  if (hidden < 1) throw Error("model.hidden must be >= 1");
  if (num_layers < 1) throw Error("model.num_layers must be >= 1");
  if (!(centroid_sharpness > 0.0)) throw Error("model.centroid_sharpness must be > 0");
}

void EngineConfig::check() const {
  if (clients_per_training_round < 1) throw Error("engine.clients_per_training_round must be >= 1");
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    throw Error("engine.confidence_threshold must be in [0, 1]");
  }
  if (max_rounds < 0) throw Error("engine.max_rounds must be >= 0");
  if (!(target_accuracy >= 0.0 && target_accuracy <= 1.0)) {
    throw Error("engine.target_accuracy must be in [0, 1]");
  }
  if (!(embedding_cost_ratio >= 0.0)) throw Error("engine.embedding_cost_ratio must be >= 0");
  if (!plan.modes.empty() && plan.num_layers() != model.num_layers) {
    throw Error("engine.plan must have one mode per model layer");
  }
  pacing.check();
  selector.check();
  cost.check();
  aug_e.check();
  trainer.check();
  model.check();
}

double training_batch_latency(const LayerPlan& plan, const CostModel& cost) {
  const int L = plan.num_layers();
  return L * cost.compute_fwd_per_layer + (L - plan.frozen_prefix()) * cost.compute_bwd_per_layer;
}

namespace {

// Runs body(i) for i in [0, n) across threads and rethrows the first failure.
template <typename Body>
void parallel_for(std::ptrdiff_t n, Body body) {
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(fes_engine_error)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

std::vector<int> pick_clients(std::size_t pool, int want, Rng& rng) {
  const auto n = std::min<std::size_t>(pool, static_cast<std::size_t>(want));
  std::vector<int> out;
  for (auto i : rng.sample_without_replacement(pool, n)) out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace

Engine::Engine(const TaskData& data, std::vector<ClientShard> shards, EngineConfig cfg)
    : data_(data), shards_(std::move(shards)), cfg_(std::move(cfg)) {
  cfg_.check();
  for (std::size_t i = 0; i < shards_.size(); ++i) {
    if (shards_[i].client_id != static_cast<int>(i)) {
      throw Error("engine: shard " + std::to_string(i) + " has client_id " +
                  std::to_string(shards_[i].client_id));
    }
  }
  validate(shards_, data_);
  const int L = cfg_.model.num_layers;
  plan_ = cfg_.plan.modes.empty() ? LayerPlan::uniform(L, LayerMode::Full) : cfg_.plan;

  const Rng root(cfg_.seed);
  Rng model_rng = split_stream(root, "model");
  initial_model_ =
      MlpModel::random(data_.dim, cfg_.model.hidden, L, data_.num_classes, model_rng);
  if (cfg_.model.pretrained) {
    centroid_init(initial_model_, data_.public_split, cfg_.model.centroid_sharpness);
  }
  zero_shot_val_ = accuracy(initial_model_, data_.validation);

  candidates_.resize(shards_.size());
  if (cfg_.pacing.mode == PacingMode::Disabled) return;
  for (std::size_t c = 0; c < shards_.size(); ++c) {
    auto pool = shards_[c].unlabeled;
    std::sort(pool.begin(), pool.end());
    switch (cfg_.selector_mode) {
      case SelectorMode::None:
        candidates_[c] = std::move(pool);
        break;
      case SelectorMode::Random: {
        Rng r = split_stream(root, "select", c);
        candidates_[c] = random_select(pool, cfg_.selector.budget_fraction, r);
        break;
      }
      case SelectorMode::Diversity: {
        if (pool.size() < 2) {
          candidates_[c] = std::move(pool);
          break;
        }
        std::vector<std::span<const double>> vecs;
        for (SampleId id : pool) vecs.emplace_back(data_.train_sample(id).embedding);
        const auto graph = build_graph(pool, vecs, cfg_.selector.k);
        candidates_[c] = selected_ids(select(graph, cfg_.selector));
        break;
      }
    }
    std::sort(candidates_[c].begin(), candidates_[c].end());
  }
}

SimState Engine::initial_state() const {
  SimState s;
  s.model = initial_model_;
  s.shards = shards_;
  return s;
}

void Engine::training_round(SimState& state, Rng& rng) const {
  std::vector<int> eligible;
  for (const auto& s : state.shards) {
    if (s.labeled_count() > 0) eligible.push_back(s.client_id);
  }
  if (eligible.empty()) throw Error("no labeled data anywhere");
  std::vector<int> chosen;
  for (int i : pick_clients(eligible.size(), cfg_.clients_per_training_round, rng)) {
    chosen.push_back(eligible[i]);
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < chosen.size(); ++i) seeds.push_back(rng.next_u64());

  std::vector<ModelUpdate> updates(chosen.size());
  std::vector<RoundCost> costs(chosen.size());
  parallel_for(static_cast<std::ptrdiff_t>(chosen.size()), [&](std::ptrdiff_t i) {
    const auto examples = training_examples(state.shards[chosen[i]], data_);
    Rng local(seeds[i]);
    updates[i] = local_train(state.model, examples, plan_, cfg_.trainer, local);
    const auto per_epoch = (examples.size() + cfg_.trainer.batch_size - 1) / cfg_.trainer.batch_size;
    costs[i] = round_cost(plan_, state.model, cfg_.cost,
                          static_cast<int>(per_epoch) * cfg_.trainer.local_epochs);
  });

  state.model = fed_avg(updates);
  double slowest = 0.0;
  for (const auto& c : costs) {
    slowest = std::max(slowest, c.total_time());
    state.energy += c.energy;
    state.traffic += c.traffic_bytes;
  }
  state.sim_time += slowest;
  ++state.round;
}

bool Engine::labeling_event(SimState& state, int n_clients, const Admission& admission,
                            Rng& rng) const {
  if (n_clients < 1) throw Error("labeling_event: n_clients must be >= 1");
  if (cfg_.capacity_filter && accuracy(state.model, data_.validation) < zero_shot_val_) {
    ++state.skipped_events;
    return false;
  }
  const int event = ++state.events;
  const auto chosen = [&] {
    auto c = pick_clients(state.shards.size(), n_clients, rng);
    std::sort(c.begin(), c.end());
    return c;
  }();

  const double download = static_cast<double>(cfg_.cost.bytes_per_param) *
                          static_cast<double>(state.model.trainable_parameter_count(plan_));
  const double comm = download / cfg_.cost.bandwidth;
  std::vector<double> times(chosen.size());
  std::vector<double> energies(chosen.size());
  std::vector<double> computes(chosen.size());
  parallel_for(static_cast<std::ptrdiff_t>(chosen.size()), [&](std::ptrdiff_t i) {
    auto& shard = state.shards[chosen[i]];
    const auto& cand = candidates_[chosen[i]];
    std::vector<Prediction> pred(cand.size());
    for (std::size_t j = 0; j < cand.size(); ++j) {
      pred[j] = predict(state.model, data_.train_sample(cand[j]).embedding);
    }
    std::vector<char> labeled(cand.size(), 0);
    for (auto& p : shard.pseudo) {
      const auto j = static_cast<std::size_t>(
          std::lower_bound(cand.begin(), cand.end(), p.sample_id) - cand.begin());
      p = {p.sample_id, pred[j].label, pred[j].confidence, event};
      labeled[j] = 1;
    }

    std::size_t limit;
    if (admission.fixed_count > 0) {
      limit = std::min(cand.size(), shard.pseudo.size() + admission.fixed_count);
    } else {
      limit = budget_count(std::min(1.0, admission.fraction), cand.size());
    }
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < cand.size(); ++j) {
      if (!labeled[j]) order.push_back(j);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (pred[a].confidence != pred[b].confidence) return pred[a].confidence > pred[b].confidence;
      return cand[a] < cand[b];
    });
    for (std::size_t j : order) {
      if (shard.pseudo.size() >= limit) break;
      if (pred[j].confidence < cfg_.confidence_threshold) break;
      shard.pseudo.push_back({cand[j], pred[j].label, pred[j].confidence, event});
    }
    std::sort(shard.pseudo.begin(), shard.pseudo.end(),
              [](const PseudoLabel& a, const PseudoLabel& b) { return a.sample_id < b.sample_id; });

    const auto batches = (cand.size() + cfg_.trainer.batch_size - 1) / cfg_.trainer.batch_size;
    const double compute = static_cast<double>(batches) * cfg_.aug_e.l_i;
    computes[i] = compute;
    times[i] = compute + comm;
    energies[i] = cfg_.cost.power_compute * compute + cfg_.cost.power_network * comm;
  });

  double slowest = 0.0;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    slowest = std::max(slowest, times[i]);
    state.energy += energies[i];
    state.traffic += download;
    state.inference_compute += computes[i];
  }
  state.sim_time += slowest;
  state.inference_time += slowest;
  return true;
}

Admission Engine::admission_for(const PacingConfig& cfg, int next_event) const {
  if (cfg_.pacing.mode == PacingMode::FixedCount) return {0.0, cfg_.pacing.fixed_count};
  return {cumulative_fraction(next_event, cfg), 0};
}

double Engine::probe(const SimState& snapshot, const PacingConfig& cfg, int window, Rng rng,
                     double& probe_time) const {
  SimState s = snapshot;
  const double before = accuracy(s.model, data_.validation);
  Rng label_rng = split_stream(rng, "label");
  labeling_event(s, cfg.n, admission_for(cfg, s.events + 1), label_rng);
  for (int w = 1; w <= window; ++w) {
    Rng round_rng = split_stream(rng, "round", static_cast<std::uint64_t>(w));
    training_round(s, round_rng);
    if (w % cfg.f == 0 && w < window) labeling_event(s, cfg.n, admission_for(cfg, s.events + 1), label_rng);
  }
  probe_time += s.sim_time - snapshot.sim_time;
  return accuracy(s.model, data_.validation) - before;
}

double Engine::embedding_cost(SimState& state) const {
  const double per_batch =
      plan_.num_layers() * (cfg_.cost.compute_fwd_per_layer + cfg_.cost.compute_bwd_per_layer);
  double slowest = 0.0;
  for (const auto& shard : state.shards) {
    const auto batches =
        (shard.unlabeled.size() + cfg_.trainer.batch_size - 1) / cfg_.trainer.batch_size;
    const double t = cfg_.embedding_cost_ratio * static_cast<double>(batches) * per_batch;
    slowest = std::max(slowest, t);
    state.energy += cfg_.cost.power_compute * t;
  }
  state.sim_time += slowest;
  return slowest;
}

RoundTrace Engine::record(const SimState& state) const {
  RoundTrace row;
  row.round = state.round;
  row.sim_time = state.sim_time;
  row.test_acc = accuracy(state.model, data_.test);
  row.val_acc = accuracy(state.model, data_.validation);
  int correct = 0;
  for (const auto& shard : state.shards) {
    row.total_pseudo += static_cast<int>(shard.pseudo.size());
    for (const auto& p : shard.pseudo) {
      if (data_.train_sample(p.sample_id).label == p.label) ++correct;
    }
  }
  row.pseudo_correct_frac = row.total_pseudo > 0 ? static_cast<double>(correct) / row.total_pseudo : 0.0;
  row.traffic_bytes = state.traffic;
  row.energy = state.energy;
  return row;
}

RunResult Engine::run() const {
  RunResult res;
  SimState state = initial_state();
  auto& sum = res.summary;
  sum.zero_shot_val_acc = zero_shot_val_;
  sum.zero_shot_test_acc = accuracy(initial_model_, data_.test);
  sum.final_test_acc = sum.best_test_acc = sum.zero_shot_test_acc;
  sum.final_val_acc = zero_shot_val_;
  res.model = state.model;
  if (cfg_.max_rounds == 0) return res;

  const Rng root(cfg_.seed);
  const bool pacing = cfg_.pacing.mode != PacingMode::Disabled;
  if (pacing && cfg_.selector_mode == SelectorMode::Diversity) sum.embedding_time = embedding_cost(state);

  ControllerSettings settings = cfg_.pacing.controller;
  if (cfg_.pacing.mode != PacingMode::Controller) settings.switching = false;
  PacingController controller(
      cfg_.pacing.mode == PacingMode::Controller ? cfg_.pacing.candidates
                                                 : std::vector<PacingConfig>{cfg_.pacing.fixed},
      settings, cfg_.aug_e);
  std::uint64_t probes = 0;
  const ProbeFn probe_fn = [&](const PacingConfig& c, int window) {
    return probe(state, c, window, split_stream(root, "probe", probes++), sum.probe_time);
  };
  std::uint64_t label_events = 0;
  auto label = [&](const PacingConfig& c) {
    Rng r = split_stream(root, "label", label_events++);
    labeling_event(state, c.n, admission_for(c, state.events + 1), r);
  };

  if (pacing) {
    if (cfg_.pacing.mode == PacingMode::Controller) {
      sum.startup_warning = controller.start(probe_fn).warning;
    } else {
      controller.start_fixed(cfg_.pacing.fixed);
    }
    sum.initial_config = controller.active().to_string();
    label(controller.active());
  }

  for (int r = 1; r <= cfg_.max_rounds; ++r) {
    Rng round_rng = split_stream(root, "round", static_cast<std::uint64_t>(r));
    training_round(state, round_rng);
    RoundTrace row;
    if (pacing) {
      const double val = accuracy(state.model, data_.validation);
      const auto decision = controller.step({r, val}, probe_fn);
      if (decision.kind != DecisionKind::Continue) label(controller.active());
      row = record(state);
      const auto& a = controller.active();
      row.f = a.f;
      row.n = a.n;
      row.k = cfg_.pacing.mode == PacingMode::FixedCount ? -cfg_.pacing.fixed_count : a.k;
      row.aug_e = controller.last_aug_e();
    } else {
      row = record(state);
    }
    res.trace.push_back(row);
    sum.best_test_acc = std::max(sum.best_test_acc, row.test_acc);
    if (cfg_.target_accuracy > 0.0 && row.val_acc >= cfg_.target_accuracy) break;
  }

  const auto& last = res.trace.back();
  sum.rounds = last.round;
  sum.final_test_acc = last.test_acc;
  sum.final_val_acc = last.val_acc;
  sum.sim_time = state.sim_time;
  sum.traffic_bytes = state.traffic;
  sum.energy = state.energy;
  sum.inference_time = state.inference_time;
  sum.inference_compute = state.inference_compute;
  sum.switches = controller.switch_count();
  sum.labeling_events = state.events;
  sum.skipped_events = state.skipped_events;
  res.model = std::move(state.model);
  return res;
}

PlanEvaluator make_plan_evaluator(const TaskData& data, const std::vector<ClientShard>& shards,
                                  EngineConfig base, int rounds) {
  base.pacing.mode = PacingMode::Disabled;
  base.selector_mode = SelectorMode::None;
  base.max_rounds = rounds;
  base.target_accuracy = 0.0;
  return [&data, shards, base](const LayerPlan& plan) {
    EngineConfig cfg = base;
    cfg.plan = plan;
    return Engine(data, shards, cfg).run().summary.final_val_acc;
  };
}

double time_to_accuracy(const std::vector<RoundTrace>& trace, double target) {
  for (const auto& row : trace) {
    if (row.test_acc >= target) return row.sim_time;
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace fes
