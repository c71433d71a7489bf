#pragma once

#include <limits>
#include <span>
#include <vector>

#include "fes/core.hpp"
#include "fes/rng.hpp"

namespace fes {

inline constexpr double kUniform = std::numeric_limits<double>::infinity();

struct SyntheticTaskSpec {
  int num_classes = 4;
  int dim = 16;
  int per_class_count = 500;
  double cluster_spread = 1.0;
  // Distance of every class center from the origin; directions are random.
  double class_center_separation = 3.0;
  int test_per_class = 500;
  // Fraction of the test-distribution draw held back as a server-side
  // validation split.
  double validation_fraction = 0.1;
  int public_per_class = 1;
  // Optional relative class sizes for the train split (empty = balanced).
  // The held-out splits stay balanced.
  std::vector<double> class_proportions;

  void check() const;
};

struct PartitionSpec {
  int num_clients = 32;
  // Label-skew concentration; kUniform gives every client the uniform prior.
  double alpha = kUniform;
  // Quantity-skew concentration; kUniform gives equal client sizes.
  double beta = kUniform;
  int gold_total = 64;
  double gamma = 0.1;
  int gold_client_cap = 32;

  void check() const;
};

TaskData gen_blobs(const SyntheticTaskSpec& spec, Rng& rng);

// Integer quotas proportional to `weights` summing exactly to `total`.
// Leftover units go to the largest fractional parts, ties to the lower index.
std::vector<int> largest_remainder(std::span<const double> weights, int total);

// Label skew: client j draws q_j ~ Dir(alpha * uniform prior) and its
// near-equal share of samples is filled to those class proportions without
// replacement. When a class runs out, q_j is renormalized over the classes
// that still have samples (in log space, so tiny alphas keep their ordering).
std::vector<ClientShard> partition_labels_dirichlet(std::span<const Sample> samples, int num_clients,
                                                    double alpha, Rng& rng);

// Quantity skew: sizes follow z ~ Dir_N(beta) with largest-remainder rounding;
// samples are dealt from a uniform shuffle.
std::vector<ClientShard> partition_quantity_dirichlet(std::span<const Sample> samples,
                                                      int num_clients, double beta, Rng& rng);

// Picks `client_cap` clients uniformly at random, splits `gold_total` across
// them with z ~ Dir(gamma) and reveals that many true labels per client.
// Quota a client cannot hold spills to the next chosen client.
std::vector<ClientShard> assign_gold_labels(std::vector<ClientShard> shards,
                                            std::span<const Sample> samples, int gold_total,
                                            double gamma, int client_cap, Rng& rng);

// Full pipeline: label or quantity skew (at most one may be finite), then
// gold assignment. Uses substreams "partition" and "gold".
std::vector<ClientShard> make_partition(const TaskData& data, const PartitionSpec& spec,
                                        const Rng& rng);

// Every train sample becomes gold on its owning client.
std::vector<ClientShard> reveal_all_labels(std::vector<ClientShard> shards);

// hist[client][class] over gold + unlabeled samples.
std::vector<std::vector<int>> class_histograms(const std::vector<ClientShard>& shards,
                                               const TaskData& data);

double gini(std::span<const double> values);

}  // namespace fes
