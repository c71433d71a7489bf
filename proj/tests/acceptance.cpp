// Acceptance checks, one line per criterion. Exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>

#include "fes/config.hpp"
#include "fes/datagen.hpp"
#include "fes/engine.hpp"
#include "fes/io.hpp"
#include "fes/model.hpp"
#include "fes/planner.hpp"
#include "fes/selector.hpp"
#include "oracles.hpp"

using namespace fes;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};

// The standard task: 4 classes, 16 dims, 2000 train samples, 32 clients,
// 64 gold labels with gamma = 0.1.
ExperimentConfig standard_config(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.seed = seed;
  // Plateau noise on the validation split would otherwise trip the alarm
  // every few rounds.
  cfg.engine.pacing.controller.alarm_threshold = -5e-4;
  return cfg;
}

EngineConfig oracle_config(EngineConfig e) {
  e.pacing.mode = PacingMode::Disabled;
  return e;
}

EngineConfig gold_only_config(EngineConfig e) {
  e.pacing.mode = PacingMode::Disabled;
  e.model.pretrained = false;
  return e;
}

// Runs shared by criteria 5, 6, 7 and 9, computed once per seed.
struct SeedRuns {
  Workload work;
  RunResult oracle, fes, gold;
};

std::map<std::uint64_t, SeedRuns>& seed_cache() {
  static std::map<std::uint64_t, SeedRuns> cache;
  return cache;
}

const SeedRuns& standard_runs(std::uint64_t seed) {
  auto& cache = seed_cache();
  if (auto it = cache.find(seed); it != cache.end()) return it->second;
  const auto cfg = standard_config(seed);
  SeedRuns r;
  r.work = make_workload(cfg);
  const auto e = engine_config(cfg);
  r.oracle = Engine(r.work.data, reveal_all_labels(r.work.shards), oracle_config(e)).run();
  r.fes = Engine(r.work.data, r.work.shards, e).run();
  r.gold = Engine(r.work.data, r.work.shards, gold_only_config(e)).run();
  return cache.emplace(seed, std::move(r)).first->second;
}

std::vector<std::vector<double>> random_pool(Rng& r, int n, int dim) {
  // A few clusters plus exact duplicates so similarity ties get exercised.
  const int clusters = 1 + static_cast<int>(r.uniform_index(5));
  std::vector<std::vector<double>> centers(clusters, std::vector<double>(dim));
  for (auto& c : centers) {
    for (auto& v : c) v = 3.0 * r.normal();
  }
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < n; ++i) {
    if (i > 0 && r.uniform() < 0.05) {
      pts.push_back(pts[r.uniform_index(pts.size())]);
      continue;
    }
    auto p = centers[r.uniform_index(clusters)];
    for (auto& v : p) v += r.normal();
    pts.push_back(std::move(p));
  }
  return pts;
}

Outcome criterion1() {
  Rng r(101);
  const int ks[] = {1, 5, 10};
  const double rhos[] = {1.5, 2.0, 4.0};
  int pools = 0, mismatches = 0, steps = 0;
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + static_cast<int>(r.uniform_index(199));
    const int dim = 2 + static_cast<int>(r.uniform_index(15));
    const auto pts = random_pool(r, n, dim);
    std::vector<SampleId> ids(n);
    std::iota(ids.begin(), ids.end(), SampleId{0});
    std::vector<std::span<const double>> vecs(pts.begin(), pts.end());
    SelectorConfig cfg;
    cfg.k = ks[t % 3];
    cfg.rho = rhos[(t / 3) % 3];
    cfg.budget_fraction = 0.05 + 0.95 * r.uniform();
    const auto g = build_graph(ids, vecs, cfg.k);
    const bool graph_ok = g.neighbors == oracle::knn(pts, cfg.k);
    const auto fast = select(g, cfg);
    const auto slow = oracle::select(g, cfg);
    bool same = graph_ok && fast.size() == slow.size();
    for (std::size_t i = 0; same && i < fast.size(); ++i) {
      same = fast[i].id == slow[i].id &&
             std::abs(fast[i].score - slow[i].score) <= 1e-12 * std::max(1.0, slow[i].score);
    }
    ++pools;
    steps += static_cast<int>(fast.size());
    if (!same) ++mismatches;
  }
  return {mismatches == 0,
          fmt("%d pools, %d greedy steps, %d mismatches against brute-force recomputation", pools, steps,
              mismatches)};
}

Outcome criterion2() {
  Rng r(202);
  double worst = 0.0;
  bool seen[3] = {false, false, false};
  for (int t = 0; t < 20; ++t) {
    const int L = 3 + t % 3;
    const int d = 2 + static_cast<int>(r.uniform_index(6));
    const int h = 3 + static_cast<int>(r.uniform_index(8));
    const int C = 2 + static_cast<int>(r.uniform_index(4));
    const auto model = MlpModel::random(d, h, L, C, r);
    LayerPlan plan = LayerPlan::uniform(L, LayerMode::Full);
    for (auto& m : plan.modes) m = static_cast<LayerMode>(r.uniform_index(3));
    plan.modes[t % L] = LayerMode::Frozen;
    plan.modes[(t + 1) % L] = LayerMode::BiasOnly;
    plan.modes[(t + 2) % L] = LayerMode::Full;
    for (auto m : plan.modes) seen[static_cast<int>(m)] = true;
    const int n = 1 + static_cast<int>(r.uniform_index(8));
    std::vector<Sample> batch(n);
    for (auto& s : batch) {
      s.embedding.resize(d);
      for (auto& v : s.embedding) v = r.normal();
      s.label = static_cast<int>(r.uniform_index(C));
    }
    worst = std::max(worst, grad_check(model, examples_of(batch), plan));
  }
  const bool all_modes = seen[0] && seen[1] && seen[2];
  return {worst < 1e-4 && all_modes, fmt("20 (model, plan, batch) triples, max relative error %.2e (< 1e-4)", worst)};
}

Outcome criterion3() {
  Rng r(303);
  double worst = 0.0;
  bool invariant = true;
  for (int t = 0; t < 50; ++t) {
    const int L = 1 + static_cast<int>(r.uniform_index(4));
    const int d = 1 + static_cast<int>(r.uniform_index(6));
    const int h = 1 + static_cast<int>(r.uniform_index(6));
    const int C = 2 + static_cast<int>(r.uniform_index(3));
    std::vector<ModelUpdate> ups;
    for (int c = 0; c < 3; ++c) {
      auto m = MlpModel::random(d, h, L, C, r);
      for (auto& l : m.layers()) {
        for (auto& w : l.weight) w *= 1.0 + 10.0 * r.uniform();
      }
      ups.push_back({std::move(m), 1 + r.uniform_index(1000)});
    }
    const auto avg = flatten(fed_avg(ups));
    double total = 0.0;
    for (const auto& u : ups) total += static_cast<double>(u.sample_count);
    std::vector<double> direct(avg.size(), 0.0);
    for (const auto& u : ups) {
      const auto f = flatten(u.model);
      for (std::size_t i = 0; i < f.size(); ++i) direct[i] += static_cast<double>(u.sample_count) * f[i];
    }
    for (std::size_t i = 0; i < avg.size(); ++i) worst = std::max(worst, std::abs(direct[i] / total - avg[i]));

    std::vector<int> perm{0, 1, 2};
    while (std::next_permutation(perm.begin(), perm.end())) {
      std::vector<ModelUpdate> p;
      for (int i : perm) p.push_back(ups[i]);
      invariant = invariant && flatten(fed_avg(p)) == avg;
    }
  }
  return {worst <= 1e-12 && invariant,
          fmt("50 random 3-client cases, max deviation from direct sum %.2e, permutation invariance %s", worst,
              invariant ? "exact" : "BROKEN")};
}

Outcome criterion4() {
  int skew_ok = 0, uniform_ok = 0, gold_ok = 0, sum_ok = 0;
  double worst_dominated = 1.0, worst_linf = 0.0, worst_top3 = 1.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticTaskSpec spec;
    Rng tr(seed);
    const auto data = gen_blobs(spec, tr);

    Rng a(seed * 7 + 1);
    const auto skewed = partition_labels_dirichlet(data.train, 32, 1e-3, a);
    int dominated = 0;
    for (const auto& h : class_histograms(skewed, data)) {
      const int total = std::accumulate(h.begin(), h.end(), 0);
      dominated += total > 0 && *std::max_element(h.begin(), h.end()) >= 0.95 * total;
    }
    const double frac = dominated / 32.0;
    worst_dominated = std::min(worst_dominated, frac);
    skew_ok += frac >= 0.9;

    Rng b(seed * 7 + 2);
    const auto even = partition_labels_dirichlet(data.train, 32, 1e6, b);
    double linf = 0.0;
    for (const auto& h : class_histograms(even, data)) {
      const int total = std::accumulate(h.begin(), h.end(), 0);
      for (int c : h) linf = std::max(linf, std::abs(static_cast<double>(c) / total - 0.25));
    }
    worst_linf = std::max(worst_linf, linf);
    uniform_ok += linf < 0.05;

    Rng g(seed * 7 + 3);
    const auto gold = assign_gold_labels(even, data.train, 64, 1e-3, 32, g);
    std::vector<int> counts;
    for (const auto& s : gold) counts.push_back(static_cast<int>(s.gold.size()));
    std::sort(counts.rbegin(), counts.rend());
    const int total = std::accumulate(counts.begin(), counts.end(), 0);
    const double top3 = (counts[0] + counts[1] + counts[2]) / 64.0;
    worst_top3 = std::min(worst_top3, top3);
    gold_ok += top3 >= 0.95;
    sum_ok += total == 64;
  }
  const bool pass = skew_ok >= 9 && uniform_ok >= 9 && gold_ok >= 9 && sum_ok == 10;
  return {pass, fmt("10 seeds: alpha=1e-3 dominated %d/10 (worst %.2f), alpha=1e6 L-inf %d/10 (worst %.3f), "
                    "gamma=1e-3 top-3 %d/10 (worst %.2f), gold sum exact %d/10",
                    skew_ok, worst_dominated, uniform_ok, worst_linf, gold_ok, worst_top3, sum_ok)};
}

Outcome criterion5() {
  std::vector<double> fes_ratio, gold_ratio, oracle_acc;
  int switch_overruns = 0;
  for (auto seed : kSeeds) {
    const auto& r = standard_runs(seed);
    const double o = r.oracle.summary.final_test_acc;
    oracle_acc.push_back(o);
    fes_ratio.push_back(r.fes.summary.final_test_acc / o);
    gold_ratio.push_back(r.gold.summary.final_test_acc / o);
    if (r.fes.summary.switches > 3) ++switch_overruns;
    std::printf("    seed %llu: oracle %.3f  FeS %.3f (%d switches, start %s)  gold-only %.3f\n",
                static_cast<unsigned long long>(seed), o, r.fes.summary.final_test_acc, r.fes.summary.switches,
                r.fes.summary.initial_config.c_str(), r.gold.summary.final_test_acc);
  }
  if (switch_overruns > 0) {
    std::printf("    note: %d of 5 FeS runs switched pacing more than 3 times (soft bound, not fatal)\n",
                switch_overruns);
  }
  const double f = median(fes_ratio), g = median(gold_ratio);
  return {f >= 0.90 && g <= 0.80,
          fmt("median FeS/oracle %.3f (>= 0.90), median gold-only/oracle %.3f (<= 0.80), median oracle %.3f", f, g,
              median(oracle_acc))};
}

Outcome criterion6() {
  std::vector<double> ratio, ctl_t, static_t;
  for (auto seed : kSeeds) {
    const auto& base = standard_runs(seed);
    const double target = 0.85 * base.oracle.summary.final_test_acc;
    auto e = engine_config(standard_config(seed));
    // Labeling as expensive as training.
    e.aug_e.l_i = e.aug_e.l_t;
    const auto ctl = Engine(base.work.data, base.work.shards, e).run();
    auto s = e;
    s.pacing.mode = PacingMode::FixedCount;
    const auto fixed = Engine(base.work.data, base.work.shards, s).run();
    const double a = time_to_accuracy(ctl.trace, target);
    const double b = time_to_accuracy(fixed.trace, target);
    ctl_t.push_back(a);
    static_t.push_back(b);
    ratio.push_back(a / b);
    std::printf("    seed %llu: target %.3f  controller %.0f (%s)  static FixedCount(100) %.0f\n",
                static_cast<unsigned long long>(seed), target, a, ctl.summary.initial_config.c_str(), b);
  }
  const double mc = median(ctl_t), ms = median(static_t);
  return {mc <= 0.7 * ms, fmt("median time-to-0.85x-oracle: controller %.0f vs static %.0f, ratio %.2f (<= 0.70)", mc,
                              ms, mc / ms)};
}

// Static pacing keeps the labeling schedule identical across selector modes.
EngineConfig selector_run(EngineConfig e, SelectorMode mode) {
  e.pacing.mode = PacingMode::Static;
  e.selector_mode = mode;
  return e;
}

Outcome criterion7() {
  std::vector<double> loss, cost_ratio;
  for (auto seed : kSeeds) {
    const auto& base = standard_runs(seed);
    const auto e = engine_config(standard_config(seed));
    const auto div = Engine(base.work.data, base.work.shards, selector_run(e, SelectorMode::Diversity)).run();
    const auto all = Engine(base.work.data, base.work.shards, selector_run(e, SelectorMode::None)).run();
    loss.push_back(all.summary.final_test_acc - div.summary.final_test_acc);
    cost_ratio.push_back(all.summary.inference_compute / div.summary.inference_compute);
    std::printf("    seed %llu: no filter %.3f, diversity 5%% %.3f; inference compute %.0f vs %.0f\n",
                static_cast<unsigned long long>(seed), all.summary.final_test_acc, div.summary.final_test_acc,
                all.summary.inference_compute, div.summary.inference_compute);
  }

  // Stress task: one dominant class, two small ones.
  std::vector<double> div_loss, rnd_loss;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto cfg = standard_config(seed);
    cfg.task.num_classes = 3;
    cfg.task.per_class_count = 667;
    cfg.task.class_proportions = {0.8, 0.1, 0.1};
    const auto w = make_workload(cfg);
    const auto e = engine_config(cfg);
    const auto all = Engine(w.data, w.shards, selector_run(e, SelectorMode::None)).run();
    const auto div = Engine(w.data, w.shards, selector_run(e, SelectorMode::Diversity)).run();
    const auto rnd = Engine(w.data, w.shards, selector_run(e, SelectorMode::Random)).run();
    div_loss.push_back(all.summary.final_test_acc - div.summary.final_test_acc);
    rnd_loss.push_back(all.summary.final_test_acc - rnd.summary.final_test_acc);
    std::printf("    stress seed %llu: no filter %.3f, diversity %.3f, random %.3f\n",
                static_cast<unsigned long long>(seed), all.summary.final_test_acc, div.summary.final_test_acc,
                rnd.summary.final_test_acc);
  }

  const double l = median(loss), c = median(cost_ratio);
  const double dl = median(div_loss), rl = median(rnd_loss);
  const bool pass = l <= 0.02 && c >= 10.0 && rl > 0.0 && rl >= 2.0 * std::max(dl, 0.0);
  return {pass, fmt("median accuracy loss %.3f (<= 0.02), inference cost cut %.1fx (>= 10x); stress task median "
                    "loss random %.3f vs diversity %.3f (random >= 2x diversity)",
                    l, c, rl, dl)};
}

Outcome criterion8() {
  bool all_match = true, all_terraced = true, all_within = true;
  std::string plans;
  for (auto seed : kSeeds) {
    const auto cfg = standard_config(seed);
    const auto w = make_workload(cfg);
    const auto proxy = reveal_all_labels(w.shards);
    auto e = engine_config(cfg);
    const auto raw = make_plan_evaluator(w.data, proxy, e, cfg.planner.probe_rounds);
    // Both searches read the same evaluations.
    std::map<std::string, double> cache;
    const PlanEvaluator eval = [&](const LayerPlan& p) {
      const auto key = p.to_string();
      if (auto it = cache.find(key); it != cache.end()) return it->second;
      return cache[key] = raw(p);
    };
    Rng mr(1);
    const auto model = MlpModel::random(w.data.dim, e.model.hidden, e.model.num_layers, w.data.num_classes, mr);
    const auto chosen = co_plan(model, cfg.planner, e.cost, eval);
    const auto best = exhaustive_plan(model, cfg.planner, e.cost, eval);
    all_match = all_match && chosen.plan == best.plan;
    all_terraced = all_terraced && chosen.plan.is_terraced();
    all_within = all_within && eval(chosen.plan) >= chosen.full_accuracy - cfg.planner.epsilon_acc;
    plans += (plans.empty() ? "" : " ") + chosen.plan.to_string();

    double frozen_all = 0.0;
    for (const auto& ev : best.evaluated) {
      if (ev.plan == LayerPlan::uniform(6, LayerMode::Frozen)) frozen_all = ev.accuracy;
    }
    std::printf("    seed %llu: co-plan %s (%zu evaluations%s), exhaustive %s; all-Full %.3f, all-Frozen %.3f\n",
                static_cast<unsigned long long>(seed), chosen.plan.to_string().c_str(), chosen.evaluated.size(),
                chosen.linear_fallback ? ", linear fallback" : "", best.plan.to_string().c_str(),
                chosen.full_accuracy, frozen_all);
  }

  Rng mr(9);
  const auto model = MlpModel::random(16, 32, 6, 4, mr);
  const CostModel cost;
  const double bias = round_cost(LayerPlan::uniform(6, LayerMode::BiasOnly), model, cost, 4).traffic_bytes;
  const double full = round_cost(LayerPlan::uniform(6, LayerMode::Full), model, cost, 4).traffic_bytes;
  const double exact = static_cast<double>(model.bias_parameter_count()) / model.parameter_count();
  const bool ratio_ok = bias / full == exact;

  return {all_match && all_terraced && all_within && ratio_ok,
          fmt("plans [%s]: terraced %s, within epsilon %s, match exhaustive %s; bias/full traffic %.6f vs bias "
              "fraction %.6f",
              plans.c_str(), all_terraced ? "yes" : "no", all_within ? "yes" : "no", all_match ? "5/5" : "NO",
              bias / full, exact)};
}

Outcome criterion9() {
  const auto cfg = standard_config(kSeeds[0]);
  const auto& base = standard_runs(kSeeds[0]);
  const auto e = engine_config(cfg);
  const int threads = omp_get_max_threads();
  omp_set_num_threads(3);
  const auto again = Engine(base.work.data, base.work.shards, e).run();
  omp_set_num_threads(threads);
  const auto a = format_trace(base.fes.trace);
  const auto b = format_trace(again.trace);
  return {a == b && !a.empty(),
          fmt("two FeS runs with seed %llu: traces %s (%zu bytes; second run on 3 threads)",
              static_cast<unsigned long long>(kSeeds[0]), a == b ? "byte-identical" : "DIFFER", a.size())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> known_red;
  app.add_option("--known-red", known_red,
                 "Criteria documented as unmet; the exit code tolerates exactly these failing")
      ->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9},
  };
  int failed = 0, surprises = 0;
  for (const auto& [id, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool expected_red = std::find(known_red.begin(), known_red.end(), id) != known_red.end();
    const char* tag = o.pass ? (expected_red ? " (listed as known red but passed)" : "")
                             : (expected_red ? " (known red)" : "");
    std::printf("[%s] criterion %d: %s [%.1fs]%s\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str(), secs, tag);
    std::fflush(stdout);
    failed += !o.pass;
    surprises += o.pass == expected_red;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return surprises == 0 ? 0 : 1;
}
