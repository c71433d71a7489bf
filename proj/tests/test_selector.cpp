#include <doctest.h>

#include <algorithm>
#include <set>

#include "fes/selector.hpp"
#include "oracles.hpp"

using namespace fes;

namespace {

std::vector<SampleId> iota_ids(std::size_t n) {
  std::vector<SampleId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  return ids;
}

NeighborGraph graph_of(const std::vector<std::vector<double>>& pts, int k) {
  const auto ids = iota_ids(pts.size());
  std::vector<std::span<const double>> v(pts.begin(), pts.end());
  return build_graph(ids, v, k);
}

std::vector<std::vector<double>> random_points(Rng& r, int n, int dim) {
  std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
  for (auto& p : pts) {
    for (auto& v : p) v = r.normal();
  }
  return pts;
}

// Hand-built graph; reverse lists derived from the neighbor lists.
NeighborGraph manual_graph(std::vector<std::vector<int>> neighbors, int k) {
  NeighborGraph g;
  g.k = k;
  g.ids = iota_ids(neighbors.size());
  g.reverse.assign(neighbors.size(), {});
  for (std::size_t x = 0; x < neighbors.size(); ++x) {
    for (int u : neighbors[x]) g.reverse[u].push_back(static_cast<int>(x));
  }
  g.neighbors = std::move(neighbors);
  return g;
}

}  // namespace

TEST_CASE("identical vectors tie to the lowest other id") {
  const std::vector<std::vector<double>> pts{{1, 2}, {2, 4}, {3, 6}};
  const auto g = graph_of(pts, 1);
  CHECK(g.neighbors[0] == std::vector<int>{1});
  CHECK(g.neighbors[1] == std::vector<int>{0});
  CHECK(g.neighbors[2] == std::vector<int>{0});
}

TEST_CASE("thin rectangle pairs short-edge partners") {
  // Corners of a 20 x 1 rectangle centered away from the origin so cosine
  // similarity separates the short edges.
  const std::vector<std::vector<double>> pts{{1, 10}, {1, 11}, {21, 10}, {21, 11}};
  const auto g = graph_of(pts, 1);
  CHECK(g.neighbors[0] == std::vector<int>{1});
  CHECK(g.neighbors[1] == std::vector<int>{0});
  CHECK(g.neighbors[2] == std::vector<int>{3});
  CHECK(g.neighbors[3] == std::vector<int>{2});
}

TEST_CASE("graph matches brute-force kNN and its transpose") {
  Rng r(1);
  for (int t = 0; t < 10; ++t) {
    const auto pts = random_points(r, 50, 6);
    for (int k : {1, 5, 10}) {
      const auto g = graph_of(pts, k);
      CHECK(g.neighbors == oracle::knn(pts, k));
      for (std::size_t x = 0; x < g.size(); ++x) {
        for (int u : g.neighbors[x]) {
          const auto& e = g.reverse[u];
          CHECK(std::find(e.begin(), e.end(), static_cast<int>(x)) != e.end());
        }
      }
      std::size_t edges = 0, rev = 0;
      for (const auto& v : g.neighbors) edges += v.size();
      for (const auto& v : g.reverse) rev += v.size();
      CHECK(edges == rev);
    }
  }
}

TEST_CASE("parallel and serial graph builds agree") {
  Rng r(2);
  const auto pts = random_points(r, 300, 8);
  const auto ids = iota_ids(pts.size());
  std::vector<std::span<const double>> v(pts.begin(), pts.end());
  const auto a = build_graph(ids, v, 7);
  const auto b = build_graph_serial(ids, v, 7);
  CHECK(a.neighbors == b.neighbors);
  CHECK(a.reverse == b.reverse);
}

TEST_CASE("zero vectors are counted and never preferred") {
  const std::vector<std::vector<double>> pts{{0, 0}, {1, 0}, {1, 0.1}};
  const auto g = graph_of(pts, 1);
  CHECK(g.zero_norm_count == 1);
  CHECK(g.neighbors[1] == std::vector<int>{2});
  CHECK(g.neighbors[2] == std::vector<int>{1});
}

TEST_CASE("star graph: hub first with score 5, then discounted leaves") {
  // Node 0 is the hub; leaves 1..5 point at it. Leaf 1 also points at 6 and
  // node 6 points at leaf 1, so discounts show up in later scores.
  auto g = manual_graph({{1}, {0}, {0}, {0}, {0}, {0}, {1}}, 1);
  SelectorConfig cfg;
  cfg.rho = 2.0;
  cfg.budget_fraction = 2.0 / 7.0;
  const auto steps = select(g, cfg);
  REQUIRE(steps.size() == 2);
  CHECK(steps[0].id == 0);
  CHECK(steps[0].score == 5.0);
  // Leaf 1 collects from hub (V(0)={1}, undiscounted) and node 6.
  CHECK(steps[1].id == 1);
  CHECK(steps[1].score == 2.0);

  // Discount arithmetic against the literal formula.
  std::vector<char> in_l(7, 0);
  in_l[0] = 1;
  auto g2 = manual_graph({{1, 2}, {0, 2}, {0, 1}, {0, 2}}, 2);
  std::vector<char> l2(4, 0);
  CHECK(oracle::score(g2, 2, l2, 2.0) == 3.0);
  l2[0] = 1;
  // x=1 and x=3 now each hold one selected neighbor.
  CHECK(oracle::score(g2, 2, l2, 2.0) == 1.0 + 0.5 + 0.5);
}

TEST_CASE("first pick has maximal in-degree") {
  Rng r(3);
  const auto pts = random_points(r, 120, 5);
  const auto g = graph_of(pts, 5);
  const auto steps = select(g, SelectorConfig{});
  std::size_t max_in = 0;
  for (const auto& e : g.reverse) max_in = std::max(max_in, e.size());
  CHECK(g.reverse[steps[0].id].size() == max_in);
}

TEST_CASE("incremental greedy equals brute-force recomputation") {
  Rng r(4);
  for (int t = 0; t < 12; ++t) {
    const int n = 20 + static_cast<int>(r.uniform_index(100));
    const auto pts = random_points(r, n, 4);
    for (int k : {1, 5, 10}) {
      for (double rho : {1.5, 2.0, 4.0}) {
        SelectorConfig cfg;
        cfg.k = k;
        cfg.rho = rho;
        cfg.budget_fraction = 0.3;
        const auto g = graph_of(pts, k);
        const auto fast = select(g, cfg);
        const auto slow = oracle::select(g, cfg);
        REQUIRE(fast.size() == slow.size());
        for (std::size_t i = 0; i < fast.size(); ++i) {
          CHECK(fast[i].id == slow[i].id);
          CHECK(fast[i].score == doctest::Approx(slow[i].score).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("scores never increase as the selection grows") {
  Rng r(5);
  const auto pts = random_points(r, 80, 4);
  const auto g = graph_of(pts, 5);
  std::vector<char> in_l(g.size(), 0);
  std::vector<double> prev(g.size());
  for (std::size_t u = 0; u < g.size(); ++u) prev[u] = oracle::score(g, static_cast<int>(u), in_l, 2.0);
  SelectorConfig cfg;
  cfg.budget_fraction = 0.25;
  for (const auto& s : select(g, cfg)) {
    in_l[s.id] = 1;
    for (std::size_t u = 0; u < g.size(); ++u) {
      const double now = oracle::score(g, static_cast<int>(u), in_l, 2.0);
      CHECK(now <= prev[u]);
      prev[u] = now;
    }
  }
}

TEST_CASE("budget") {
  CHECK(budget_count(0.05, 100) == 5);
  CHECK(budget_count(0.05, 101) == 6);
  CHECK(budget_count(0.07, 100) == 7);
  CHECK(budget_count(1.0, 9) == 9);
  Rng r(6);
  const auto pts = random_points(r, 40, 3);
  const auto g = graph_of(pts, 3);
  SelectorConfig cfg;
  cfg.budget_fraction = 1.0;
  auto ids = selected_ids(select(g, cfg));
  std::sort(ids.begin(), ids.end());
  CHECK(ids == iota_ids(40));
  NeighborGraph empty;
  CHECK(select(empty, SelectorConfig{}).empty());
}

TEST_CASE("random_select") {
  const auto pool = iota_ids(200);
  Rng a(7), b(7);
  const auto x = random_select(pool, 0.1, a);
  CHECK(x == random_select(pool, 0.1, b));
  CHECK(x.size() == 20);
  CHECK(std::set<SampleId>(x.begin(), x.end()).size() == 20);
  Rng c(8);
  auto all = random_select(pool, 1.0, c);
  std::sort(all.begin(), all.end());
  CHECK(all == pool);
}

TEST_CASE("diversity selection spreads out more than random") {
  double div_total = 0.0, rnd_total = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    Rng r(100 + seed);
    // Three clusters of unequal size on distinct directions.
    std::vector<std::vector<double>> pts;
    const std::vector<std::vector<double>> centers{{5, 0, 0}, {0, 5, 0}, {0, 0, 5}};
    const int sizes[] = {120, 50, 30};
    for (int c = 0; c < 3; ++c) {
      for (int i = 0; i < sizes[c]; ++i) {
        auto p = centers[c];
        for (auto& v : p) v += r.normal();
        pts.push_back(p);
      }
    }
    auto mean_pair_cos = [&](const std::vector<SampleId>& ids) {
      double s = 0.0;
      int cnt = 0;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
          s += oracle::cosine(pts[ids[i]], pts[ids[j]]);
          ++cnt;
        }
      }
      return s / cnt;
    };
    SelectorConfig cfg;
    cfg.budget_fraction = 0.05;
    div_total += mean_pair_cos(selected_ids(select(graph_of(pts, cfg.k), cfg)));
    rnd_total += mean_pair_cos(random_select(iota_ids(pts.size()), 0.05, r));
  }
  CHECK(div_total / 20 <= rnd_total / 20);
}
