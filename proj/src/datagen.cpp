#include "fes/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fes {

void SyntheticTaskSpec::check() const {
  if (num_classes < 1) throw Error("task.num_classes must be >= 1");
  if (dim < 1) throw Error("task.dim must be >= 1");
  if (per_class_count < 1) throw Error("task.per_class_count must be >= 1");
  if (!(cluster_spread > 0.0)) throw Error("task.cluster_spread must be > 0");
  if (!(class_center_separation > 0.0)) throw Error("task.class_center_separation must be > 0");
  if (test_per_class < 1) throw Error("task.test_per_class must be >= 1");
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
    throw Error("task.validation_fraction must be in [0, 1)");
  }
  if (public_per_class < 0) throw Error("task.public_per_class must be >= 0");
  if (!class_proportions.empty()) {
    if (static_cast<int>(class_proportions.size()) != num_classes) {
      throw Error("task.class_proportions must have num_classes entries");
    }
    for (double p : class_proportions) {
      if (!(p > 0.0)) throw Error("task.class_proportions entries must be > 0");
    }
  }
}

void PartitionSpec::check() const {
  if (num_clients < 1) throw Error("partition.num_clients must be >= 1");
  if (!(alpha > 0.0)) throw Error("partition.alpha must be > 0");
  if (!(beta > 0.0)) throw Error("partition.beta must be > 0");
  if (!(gamma > 0.0)) throw Error("partition.gamma must be > 0");
  if (gold_total < 0) throw Error("partition.gold_total must be >= 0");
  if (gold_client_cap < 1 || gold_client_cap > num_clients) {
    throw Error("partition.gold_client_cap must be in [1, num_clients]");
  }
  if (std::isfinite(alpha) && std::isfinite(beta)) {
    throw Error("partition: alpha and beta cannot both be finite");
  }
}

namespace {

std::vector<double> random_center(Rng& rng, int dim, double radius) {
  std::vector<double> c(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& v : c) {
      v = rng.normal();
      norm += v * v;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& v : c) v *= radius / norm;
  return c;
}

std::vector<Sample> draw_split(Rng& rng, const std::vector<std::vector<double>>& centers,
                               const std::vector<int>& counts, double spread) {
  std::vector<Sample> out;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (int i = 0; i < counts[c]; ++i) {
      Sample s;
      s.embedding.resize(centers[c].size());
      for (std::size_t j = 0; j < centers[c].size(); ++j) {
        s.embedding[j] = centers[c][j] + spread * rng.normal();
      }
      s.label = static_cast<int>(c);
      out.push_back(std::move(s));
    }
  }
  rng.shuffle(out);
  return out;
}

void assign_ids(std::vector<Sample>& samples, SampleId& next) {
  for (auto& s : samples) s.id = next++;
}

std::vector<double> to_linear(const std::vector<double>& log_w) {
  const double mx = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> w(log_w.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_w[i] - mx);
  return w;
}

std::vector<ClientShard> empty_shards(int n) {
  std::vector<ClientShard> shards(n);
  for (int j = 0; j < n; ++j) shards[j].client_id = j;
  return shards;
}

std::vector<int> equal_sizes(std::size_t total, int n) {
  std::vector<double> w(n, 1.0);
  return largest_remainder(w, static_cast<int>(total));
}

}  // namespace

TaskData gen_blobs(const SyntheticTaskSpec& spec, Rng& rng) {
  spec.check();
  Rng center_rng = split_stream(rng, "centers");
  Rng train_rng = split_stream(rng, "train");
  Rng heldout_rng = split_stream(rng, "heldout");
  Rng public_rng = split_stream(rng, "public");

  std::vector<std::vector<double>> centers;
  for (int c = 0; c < spec.num_classes; ++c) {
    centers.push_back(random_center(center_rng, spec.dim, spec.class_center_separation));
  }

  std::vector<int> train_counts(spec.num_classes, spec.per_class_count);
  if (!spec.class_proportions.empty()) {
    train_counts = largest_remainder(spec.class_proportions, spec.per_class_count * spec.num_classes);
  }

  TaskData data;
  data.num_classes = spec.num_classes;
  data.dim = spec.dim;
  SampleId next = 0;
  data.train = draw_split(train_rng, centers, train_counts, spec.cluster_spread);
  assign_ids(data.train, next);

  auto heldout = draw_split(heldout_rng, centers, std::vector<int>(spec.num_classes, spec.test_per_class),
                            spec.cluster_spread);
  const auto n_val = static_cast<std::size_t>(
      std::llround(spec.validation_fraction * static_cast<double>(heldout.size())));
  data.validation.assign(heldout.begin(), heldout.begin() + static_cast<std::ptrdiff_t>(n_val));
  data.test.assign(heldout.begin() + static_cast<std::ptrdiff_t>(n_val), heldout.end());
  assign_ids(data.validation, next);
  assign_ids(data.test, next);

  data.public_split = draw_split(public_rng, centers,
                                 std::vector<int>(spec.num_classes, spec.public_per_class),
                                 spec.cluster_spread);
  assign_ids(data.public_split, next);
  return data;
}

std::vector<int> largest_remainder(std::span<const double> weights, int total) {
  if (weights.empty()) throw Error("largest_remainder: no weights");
  if (total < 0) throw Error("largest_remainder: negative total");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error("largest_remainder: invalid weight");
    sum += w;
  }
  if (!(sum > 0.0)) throw Error("largest_remainder: weights sum to zero");

  std::vector<int> out(weights.size());
  std::vector<double> frac(weights.size());
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = weights[i] / sum * total;
    out[i] = static_cast<int>(std::floor(exact));
    frac[i] = exact - out[i];
    assigned += out[i];
  }
  // Rounding in exact can overshoot by one in rare cases.
  while (assigned > total) {
    auto it = std::max_element(out.begin(), out.end());
    --*it;
    --assigned;
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; assigned < total; i = (i + 1) % order.size()) {
    ++out[order[i]];
    ++assigned;
  }
  return out;
}

std::vector<ClientShard> partition_labels_dirichlet(std::span<const Sample> samples, int num_clients,
                                                    double alpha, Rng& rng) {
  if (num_clients < 1) throw Error("partition: num_clients must be >= 1");
  if (!(alpha > 0.0)) throw Error("partition: alpha must be > 0");
  int num_classes = 0;
  for (const auto& s : samples) {
    if (!s.label) throw Error("partition_labels_dirichlet: every sample needs a class label");
    num_classes = std::max(num_classes, *s.label + 1);
  }
  if (samples.empty()) return empty_shards(num_clients);

  std::vector<std::vector<SampleId>> pools(num_classes);
  for (const auto& s : samples) pools[*s.label].push_back(s.id);
  for (auto& p : pools) rng.shuffle(p);

  const auto sizes = equal_sizes(samples.size(), num_clients);
  const std::vector<double> concentration(num_classes, alpha / num_classes);
  auto shards = empty_shards(num_clients);

  for (int j = 0; j < num_clients; ++j) {
    // The drawn class mix is weighted by what is left in each class pool, so
    // late clients are not handed whatever the early ones skipped.
    std::vector<double> log_q = std::isinf(alpha) ? std::vector<double>(num_classes, 0.0)
                                                  : log_dirichlet(rng, concentration);
    for (int c = 0; c < num_classes; ++c) {
      log_q[c] += pools[c].empty() ? -std::numeric_limits<double>::infinity()
                                   : std::log(static_cast<double>(pools[c].size()));
    }
    std::vector<int> take(num_classes, 0);
    int need = sizes[j];
    while (need > 0) {
      // Rotating the start class spreads largest-remainder ties across
      // clients instead of always favoring class 0.
      std::vector<int> open;
      for (int i = 0; i < num_classes; ++i) {
        const int c = (i + j) % num_classes;
        if (static_cast<int>(pools[c].size()) - take[c] > 0) open.push_back(c);
      }
      std::vector<double> sub_log;
      for (int c : open) sub_log.push_back(log_q[c]);
      const auto w = to_linear(sub_log);
      const auto alloc = largest_remainder(w, need);
      for (std::size_t i = 0; i < open.size(); ++i) {
        const int c = open[i];
        const int got = std::min(alloc[i], static_cast<int>(pools[c].size()) - take[c]);
        take[c] += got;
        need -= got;
      }
    }
    auto& shard = shards[j];
    for (int c = 0; c < num_classes; ++c) {
      for (int i = 0; i < take[c]; ++i) {
        shard.unlabeled.push_back(pools[c].back());
        pools[c].pop_back();
      }
    }
    std::sort(shard.unlabeled.begin(), shard.unlabeled.end());
  }
  return shards;
}

std::vector<ClientShard> partition_quantity_dirichlet(std::span<const Sample> samples,
                                                      int num_clients, double beta, Rng& rng) {
  if (num_clients < 1) throw Error("partition: num_clients must be >= 1");
  if (!(beta > 0.0)) throw Error("partition: beta must be > 0");
  std::vector<int> sizes;
  if (std::isinf(beta)) {
    sizes = equal_sizes(samples.size(), num_clients);
  } else {
    const std::vector<double> concentration(num_clients, beta);
    sizes = largest_remainder(to_linear(log_dirichlet(rng, concentration)),
                              static_cast<int>(samples.size()));
  }
  std::vector<SampleId> ids;
  ids.reserve(samples.size());
  for (const auto& s : samples) ids.push_back(s.id);
  rng.shuffle(ids);

  auto shards = empty_shards(num_clients);
  std::size_t pos = 0;
  for (int j = 0; j < num_clients; ++j) {
    auto& u = shards[j].unlabeled;
    u.assign(ids.begin() + static_cast<std::ptrdiff_t>(pos),
             ids.begin() + static_cast<std::ptrdiff_t>(pos + sizes[j]));
    pos += sizes[j];
    std::sort(u.begin(), u.end());
  }
  return shards;
}

std::vector<ClientShard> assign_gold_labels(std::vector<ClientShard> shards,
                                            std::span<const Sample> samples, int gold_total,
                                            double gamma, int client_cap, Rng& rng) {
  const int n_clients = static_cast<int>(shards.size());
  if (client_cap < 1 || client_cap > n_clients) {
    throw Error("assign_gold_labels: client cap must be in [1, num_clients]");
  }
  if (!(gamma > 0.0)) throw Error("assign_gold_labels: gamma must be > 0");
  if (gold_total < 0) throw Error("assign_gold_labels: negative gold total");

  // Start from a clean slate: everything unlabeled.
  for (auto& s : shards) {
    s.unlabeled.insert(s.unlabeled.end(), s.gold.begin(), s.gold.end());
    s.gold.clear();
    s.pseudo.clear();
    std::sort(s.unlabeled.begin(), s.unlabeled.end());
  }

  const auto chosen = rng.sample_without_replacement(n_clients, client_cap);
  std::vector<int> quota(client_cap, 0);
  if (gold_total > 0) {
    std::vector<double> z;
    if (std::isinf(gamma)) {
      z.assign(client_cap, 1.0);
    } else {
      z = to_linear(log_dirichlet(rng, std::vector<double>(client_cap, gamma)));
    }
    quota = largest_remainder(z, gold_total);
  }

  std::vector<int> grant(client_cap, 0);
  int spill = 0;
  for (int i = 0; i < client_cap; ++i) {
    const int cap = static_cast<int>(shards[chosen[i]].unlabeled.size());
    const int want = quota[i] + spill;
    grant[i] = std::min(want, cap);
    spill = want - grant[i];
  }
  for (int i = 0; spill > 0 && i < client_cap; ++i) {
    const int cap = static_cast<int>(shards[chosen[i]].unlabeled.size());
    const int extra = std::min(spill, cap - grant[i]);
    grant[i] += extra;
    spill -= extra;
  }
  if (spill > 0) {
    throw Error("assign_gold_labels: gold total exceeds the samples held by the chosen clients");
  }

  for (int i = 0; i < client_cap; ++i) {
    auto& shard = shards[chosen[i]];
    auto pool = shard.unlabeled;
    rng.shuffle(pool);
    shard.gold.assign(pool.begin(), pool.begin() + grant[i]);
    shard.unlabeled.assign(pool.begin() + grant[i], pool.end());
    for (SampleId id : shard.gold) {
      if (id >= samples.size() || !samples[id].label) {
        throw Error("assign_gold_labels: revealed sample has no true label");
      }
    }
    std::sort(shard.gold.begin(), shard.gold.end());
    std::sort(shard.unlabeled.begin(), shard.unlabeled.end());
  }
  return shards;
}

std::vector<ClientShard> make_partition(const TaskData& data, const PartitionSpec& spec,
                                        const Rng& rng) {
  spec.check();
  Rng part_rng = split_stream(rng, "partition");
  Rng gold_rng = split_stream(rng, "gold");
  std::vector<ClientShard> shards;
  if (std::isfinite(spec.beta)) {
    shards = partition_quantity_dirichlet(data.train, spec.num_clients, spec.beta, part_rng);
  } else {
    shards = partition_labels_dirichlet(data.train, spec.num_clients, spec.alpha, part_rng);
  }
  return assign_gold_labels(std::move(shards), data.train, spec.gold_total, spec.gamma,
                            spec.gold_client_cap, gold_rng);
}

std::vector<ClientShard> reveal_all_labels(std::vector<ClientShard> shards) {
  for (auto& s : shards) {
    s.gold.insert(s.gold.end(), s.unlabeled.begin(), s.unlabeled.end());
    s.unlabeled.clear();
    s.pseudo.clear();
    std::sort(s.gold.begin(), s.gold.end());
  }
  return shards;
}

std::vector<std::vector<int>> class_histograms(const std::vector<ClientShard>& shards,
                                               const TaskData& data) {
  std::vector<std::vector<int>> hist(shards.size(), std::vector<int>(data.num_classes, 0));
  for (std::size_t j = 0; j < shards.size(); ++j) {
    for (SampleId id : shards[j].gold) ++hist[j][*data.train_sample(id).label];
    for (SampleId id : shards[j].unlabeled) ++hist[j][*data.train_sample(id).label];
  }
  return hist;
}

double gini(std::span<const double> values) {
  if (values.empty()) return 0.0;
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  double cum = 0.0, weighted = 0.0;
  const double n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    cum += v[i];
    weighted += (static_cast<double>(i) + 1.0) * v[i];
  }
  if (cum == 0.0) return 0.0;
  return (2.0 * weighted) / (n * cum) - (n + 1.0) / n;
}

}  // namespace fes
