#include "fes/selector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fes {

void SelectorConfig::check() const {
  if (k < 1) throw Error("selector.k must be >= 1");
  if (!(rho > 1.0)) throw Error("selector.rho must be > 1");
  if (!(budget_fraction > 0.0) || budget_fraction > 1.0) {
    throw Error("selector.budget_fraction must be in (0, 1]");
  }
}

std::size_t budget_count(double fraction, std::size_t pool) {
  if (pool == 0) return 0;
  const double exact = fraction * static_cast<double>(pool);
  auto n = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  return std::min(pool, n);
}

namespace {

struct Prepared {
  std::vector<SampleId> ids;
  std::vector<std::vector<double>> unit;  // empty row for zero vectors
  int zero_norm = 0;
};

Prepared prepare(std::span<const SampleId> ids, std::span<const std::span<const double>> vectors,
                 int k) {
  if (ids.size() != vectors.size()) throw Error("build_graph: ids and vectors differ in length");
  if (ids.size() < 2) throw Error("build_graph: need at least 2 samples");
  if (k < 1) throw Error("build_graph: k must be >= 1");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  Prepared p;
  const std::size_t dim = vectors[0].size();
  for (std::size_t i : order) {
    if (vectors[i].size() != dim) throw Error("build_graph: vectors differ in dimension");
    if (!p.ids.empty() && p.ids.back() == ids[i]) throw Error("build_graph: duplicate sample id");
    p.ids.push_back(ids[i]);
    double norm = 0.0;
    for (double v : vectors[i]) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      p.unit.emplace_back();
      ++p.zero_norm;
    } else {
      std::vector<double> u(vectors[i].begin(), vectors[i].end());
      for (auto& v : u) v /= norm;
      p.unit.push_back(std::move(u));
    }
  }
  return p;
}

double cosine(const Prepared& p, std::size_t a, std::size_t b) {
  const auto& x = p.unit[a];
  const auto& y = p.unit[b];
  if (x.empty() || y.empty()) return -1.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

std::vector<int> knn_row(const Prepared& p, int row, int k) {
  const int n = static_cast<int>(p.ids.size());
  std::vector<std::pair<double, int>> cand;
  cand.reserve(n - 1);
  for (int j = 0; j < n; ++j) {
    if (j != row) cand.emplace_back(cosine(p, row, j), j);
  }
  const int keep = std::min(k, n - 1);
  std::partial_sort(cand.begin(), cand.begin() + keep, cand.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<int> out(keep);
  for (int i = 0; i < keep; ++i) out[i] = cand[i].second;
  return out;
}

NeighborGraph finish(Prepared p, std::vector<std::vector<int>> neighbors, int k) {
  NeighborGraph g;
  g.k = k;
  g.zero_norm_count = p.zero_norm;
  g.ids = std::move(p.ids);
  g.reverse.assign(g.ids.size(), {});
  for (std::size_t x = 0; x < neighbors.size(); ++x) {
    for (int u : neighbors[x]) g.reverse[u].push_back(static_cast<int>(x));
  }
  g.neighbors = std::move(neighbors);
  return g;
}

}  // namespace

NeighborGraph build_graph_serial(std::span<const SampleId> ids,
                                 std::span<const std::span<const double>> vectors, int k) {
  auto p = prepare(ids, vectors, k);
  std::vector<std::vector<int>> nb(p.ids.size());
  for (std::size_t i = 0; i < nb.size(); ++i) nb[i] = knn_row(p, static_cast<int>(i), k);
  return finish(std::move(p), std::move(nb), k);
}

NeighborGraph build_graph(std::span<const SampleId> ids,
                          std::span<const std::span<const double>> vectors, int k) {
  auto p = prepare(ids, vectors, k);
  const auto n = static_cast<std::ptrdiff_t>(p.ids.size());
  std::vector<std::vector<int>> nb(p.ids.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) nb[i] = knn_row(p, static_cast<int>(i), k);
  return finish(std::move(p), std::move(nb), k);
}

NeighborGraph build_graph(std::span<const Sample> pool, int k) {
  std::vector<SampleId> ids;
  std::vector<std::span<const double>> vecs;
  for (const auto& s : pool) {
    ids.push_back(s.id);
    vecs.emplace_back(s.embedding);
  }
  return build_graph(ids, vecs, k);
}

std::vector<SelectionStep> select(const NeighborGraph& graph, const SelectorConfig& cfg) {
  cfg.check();
  const std::size_t n = graph.size();
  const std::size_t budget = budget_count(cfg.budget_fraction, n);
  if (budget == 0) return {};

  // discount[x] = |V(x) n L|. hist[u][m] counts x in E(u) with discount m, so
  // score(u) = sum_m hist[u][m] * rho^-m is updated with integer moves only.
  int max_m = 0;
  for (const auto& v : graph.neighbors) max_m = std::max(max_m, static_cast<int>(v.size()));
  std::vector<double> pw(max_m + 1);
  for (int m = 0; m <= max_m; ++m) pw[m] = std::pow(cfg.rho, -static_cast<double>(m));

  std::vector<int> discount(n, 0);
  std::vector<std::vector<int>> hist(n, std::vector<int>(max_m + 1, 0));
  std::vector<double> score(n, 0.0);
  auto rescore = [&](std::size_t u) {
    double s = 0.0;
    for (int m = 0; m <= max_m; ++m) s += hist[u][m] * pw[m];
    score[u] = s;
  };
  for (std::size_t u = 0; u < n; ++u) {
    hist[u][0] = static_cast<int>(graph.reverse[u].size());
    rescore(u);
  }

  std::vector<char> taken(n, 0);
  std::vector<char> dirty(n, 0);
  std::vector<SelectionStep> steps;
  steps.reserve(budget);
  while (steps.size() < budget) {
    std::size_t best = n;
    for (std::size_t u = 0; u < n; ++u) {
      if (taken[u]) continue;
      if (best == n ||
          score[u] > score[best] + kScoreTieTolerance * std::max(1.0, std::abs(score[best]))) {
        best = u;
      }
    }
    taken[best] = 1;
    steps.push_back({graph.ids[best], score[best]});

    for (int x : graph.reverse[best]) {
      const int m = discount[x]++;
      for (int u : graph.neighbors[x]) {
        --hist[u][m];
        ++hist[u][m + 1];
        dirty[u] = 1;
      }
    }
    for (std::size_t u = 0; u < n; ++u) {
      if (dirty[u]) {
        rescore(u);
        dirty[u] = 0;
      }
    }
  }
  return steps;
}

std::vector<SampleId> selected_ids(std::span<const SelectionStep> steps) {
  std::vector<SampleId> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.id);
  return out;
}

std::vector<SampleId> random_select(std::span<const SampleId> pool, double fraction, Rng& rng) {
  if (!(fraction > 0.0) || fraction > 1.0) throw Error("random_select: fraction must be in (0, 1]");
  const auto picks = rng.sample_without_replacement(pool.size(), budget_count(fraction, pool.size()));
  std::vector<SampleId> out;
  out.reserve(picks.size());
  for (auto i : picks) out.push_back(pool[i]);
  return out;
}

}  // namespace fes
