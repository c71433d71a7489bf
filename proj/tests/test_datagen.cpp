#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fes/datagen.hpp"
#include "fes/model.hpp"

using namespace fes;

namespace {

TaskData blobs(int seed, int classes = 4, int per_class = 500) {
  SyntheticTaskSpec spec;
  spec.num_classes = classes;
  spec.per_class_count = per_class;
  Rng r(seed);
  return gen_blobs(spec, r);
}

double max_class_share(const std::vector<int>& h) {
  const int total = std::accumulate(h.begin(), h.end(), 0);
  return total == 0 ? 0.0 : static_cast<double>(*std::max_element(h.begin(), h.end())) / total;
}

void check_conservation(const std::vector<ClientShard>& shards, const TaskData& data) {
  std::vector<int> seen(data.train.size(), 0);
  for (const auto& s : shards) {
    for (auto id : s.gold) ++seen[id];
    for (auto id : s.unlabeled) ++seen[id];
  }
  for (int c : seen) REQUIRE(c == 1);
}

std::vector<int> gold_counts(const std::vector<ClientShard>& shards) {
  std::vector<int> out;
  for (const auto& s : shards) out.push_back(static_cast<int>(s.gold.size()));
  return out;
}

}  // namespace

TEST_CASE("gen_blobs sizes, balance and ids") {
  const auto d = blobs(1);
  CHECK(d.train.size() == 2000);
  std::vector<int> per(4, 0);
  for (const auto& s : d.train) ++per[*s.label];
  for (int c : per) CHECK(c == 500);
  for (std::size_t i = 0; i < d.train.size(); ++i) CHECK(d.train[i].id == i);
  std::set<SampleId> ids;
  for (const auto* split : {&d.train, &d.validation, &d.test, &d.public_split}) {
    for (const auto& s : *split) ids.insert(s.id);
  }
  CHECK(ids.size() == d.train.size() + d.validation.size() + d.test.size() + d.public_split.size());
  CHECK(d.validation.size() == 200);
  CHECK(d.test.size() == 1800);
  CHECK(d.public_split.size() == 4);
  validate(d);
}

TEST_CASE("gen_blobs is deterministic") {
  const auto a = blobs(5);
  const auto b = blobs(5);
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].embedding == b.train[i].embedding);
  CHECK(blobs(6).train[0].embedding != a.train[0].embedding);
}

TEST_CASE("class proportions skew the train split only") {
  SyntheticTaskSpec spec;
  spec.num_classes = 3;
  spec.per_class_count = 100;
  spec.class_proportions = {0.8, 0.1, 0.1};
  Rng r(3);
  const auto d = gen_blobs(spec, r);
  std::vector<int> per(3, 0);
  for (const auto& s : d.train) ++per[*s.label];
  CHECK(per == std::vector<int>{240, 30, 30});
  std::vector<int> test_per(3, 0);
  for (const auto& s : d.test) ++test_per[*s.label];
  CHECK(test_per[0] < test_per[1] + test_per[2]);
}

TEST_CASE("well separated two-class blobs are linearly separable") {
  SyntheticTaskSpec spec;
  spec.num_classes = 2;
  spec.per_class_count = 200;
  spec.class_center_separation = 10.0;
  Rng r(2);
  const auto d = gen_blobs(spec, r);
  Rng mr(1);
  auto model = MlpModel::random(spec.dim, 1, 1, 2, mr);
  const auto ex = examples_of(d.train);
  TrainerConfig cfg;
  cfg.local_epochs = 5;
  Rng tr(4);
  model = local_train(model, ex, LayerPlan::uniform(1, LayerMode::Full), cfg, tr).model;
  CHECK(accuracy(model, d.test) >= 0.99);
}

TEST_CASE("largest_remainder conserves totals") {
  CHECK(largest_remainder(std::vector<double>{1, 1, 1}, 10) == std::vector<int>{4, 3, 3});
  CHECK(largest_remainder(std::vector<double>{0.5, 0.25, 0.25}, 7) == std::vector<int>{3, 2, 2});
  CHECK(largest_remainder(std::vector<double>{0, 1}, 5) == std::vector<int>{0, 5});
  Rng r(8);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> w(7);
    for (auto& v : w) v = r.uniform();
    const int total = static_cast<int>(r.uniform_index(1000));
    const auto q = largest_remainder(w, total);
    CHECK(std::accumulate(q.begin(), q.end(), 0) == total);
  }
  CHECK_THROWS_AS(largest_remainder(std::vector<double>{0, 0}, 3), Error);
}

TEST_CASE("label skew: alpha large is near uniform") {
  const auto d = blobs(11);
  for (double alpha : {1e6, kUniform}) {
    Rng r(1);
    const auto shards = partition_labels_dirichlet(d.train, 32, alpha, r);
    check_conservation(shards, d);
    const auto hist = class_histograms(shards, d);
    for (const auto& h : hist) {
      const int total = std::accumulate(h.begin(), h.end(), 0);
      for (int c : h) CHECK(std::abs(static_cast<double>(c) / total - 0.25) < 0.05);
    }
  }
}

TEST_CASE("label skew: alpha tiny gives single-class clients") {
  const auto d = blobs(12);
  Rng r(2);
  const auto shards = partition_labels_dirichlet(d.train, 32, 1e-3, r);
  check_conservation(shards, d);
  int dominated = 0;
  for (const auto& h : class_histograms(shards, d)) dominated += max_class_share(h) >= 0.95;
  CHECK(dominated >= 29);
}

TEST_CASE("label skew conserves per-class counts") {
  const auto d = blobs(13);
  Rng r(3);
  const auto shards = partition_labels_dirichlet(d.train, 10, 0.5, r);
  std::vector<int> sum(4, 0);
  for (const auto& h : class_histograms(shards, d)) {
    for (int c = 0; c < 4; ++c) sum[c] += h[c];
  }
  CHECK(sum == std::vector<int>(4, 500));
}

TEST_CASE("quantity skew") {
  const auto d = blobs(14);
  Rng r(4);
  auto shards = partition_quantity_dirichlet(d.train, 32, kUniform, r);
  check_conservation(shards, d);
  for (const auto& s : shards) CHECK(std::abs(static_cast<double>(s.size()) - 2000.0 / 32) <= 1.0);

  Rng r2(5);
  shards = partition_quantity_dirichlet(d.train, 32, 0.1, r2);
  check_conservation(shards, d);
  std::vector<double> sizes;
  std::size_t total = 0;
  for (const auto& s : shards) {
    sizes.push_back(static_cast<double>(s.size()));
    total += s.size();
  }
  CHECK(total == 2000);
  CHECK(gini(sizes) > 0.5);
}

TEST_CASE("gini known values") {
  CHECK(gini(std::vector<double>{1, 1, 1, 1}) == doctest::Approx(0.0));
  CHECK(gini(std::vector<double>{0, 0, 0, 4}) == doctest::Approx(0.75));
}

TEST_CASE("gold labels: near uniform for large gamma") {
  const auto d = blobs(15);
  Rng pr(1);
  auto shards = partition_labels_dirichlet(d.train, 32, kUniform, pr);
  Rng gr(2);
  shards = assign_gold_labels(shards, d.train, 1024, 100.0, 32, gr);
  check_conservation(shards, d);
  const auto g = gold_counts(shards);
  CHECK(std::accumulate(g.begin(), g.end(), 0) == 1024);
  const auto [mn, mx] = std::minmax_element(g.begin(), g.end());
  REQUIRE(*mn > 0);
  CHECK(static_cast<double>(*mx) / *mn < 2.0);
}

TEST_CASE("gold labels: concentrated for tiny gamma") {
  const auto d = blobs(16);
  Rng pr(1);
  auto shards = partition_labels_dirichlet(d.train, 32, kUniform, pr);
  Rng gr(3);
  shards = assign_gold_labels(shards, d.train, 64, 1e-3, 32, gr);
  auto g = gold_counts(shards);
  std::sort(g.rbegin(), g.rend());
  CHECK(std::accumulate(g.begin(), g.end(), 0) == 64);
  CHECK(g[0] + g[1] + g[2] >= 0.95 * 64);
}

TEST_CASE("gold quota spills past small clients") {
  const auto d = blobs(17, 2, 10);  // 20 samples
  Rng pr(1);
  auto shards = partition_quantity_dirichlet(d.train, 4, kUniform, pr);  // 5 each
  Rng gr(2);
  shards = assign_gold_labels(shards, d.train, 18, 1e-3, 4, gr);
  const auto g = gold_counts(shards);
  CHECK(std::accumulate(g.begin(), g.end(), 0) == 18);
  for (int c : g) CHECK(c <= 5);
  validate(shards, d);
  Rng gr2(2);
  CHECK_THROWS_AS(assign_gold_labels(shards, d.train, 21, 1.0, 4, gr2), Error);
}

TEST_CASE("monotone skew over the concentration grid") {
  const auto d = blobs(18);
  const double grid[] = {1e2, 10, 1, 1e-1, 1e-3};
  double prev_class = 0.0, prev_gold = 0.0;
  for (double a : grid) {
    Rng r(7);
    const auto shards = partition_labels_dirichlet(d.train, 32, a, r);
    double worst = 0.0;
    for (const auto& h : class_histograms(shards, d)) worst = std::max(worst, max_class_share(h));
    CHECK(worst >= prev_class);
    prev_class = worst;

    Rng gr(7);
    const auto gold = assign_gold_labels(shards, d.train, 256, a, 32, gr);
    const auto g = gold_counts(gold);
    const double share = static_cast<double>(*std::max_element(g.begin(), g.end())) / 256.0;
    CHECK(share >= prev_gold);
    prev_gold = share;
  }
}

TEST_CASE("make_partition validates and is deterministic") {
  const auto d = blobs(19);
  PartitionSpec spec;
  const auto a = make_partition(d, spec, Rng(3));
  const auto b = make_partition(d, spec, Rng(3));
  CHECK(a == b);
  validate(a, d);
  spec.alpha = 0.5;
  spec.beta = 0.5;
  CHECK_THROWS_AS(make_partition(d, spec, Rng(3)), Error);
}

TEST_CASE("reveal_all_labels makes everything gold") {
  const auto d = blobs(20);
  const auto shards = reveal_all_labels(make_partition(d, PartitionSpec{}, Rng(1)));
  std::size_t gold = 0;
  for (const auto& s : shards) {
    CHECK(s.unlabeled.empty());
    gold += s.gold.size();
  }
  CHECK(gold == d.train.size());
}
