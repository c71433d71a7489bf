#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fes/core.hpp"
#include "fes/rng.hpp"

namespace fes {

// Exact cosine kNN graph over one pool. Local index i stands for ids[i];
// ids are ascending, so "lower local index" and "lower sample id" agree.
struct NeighborGraph {
  int k = 0;
  std::vector<SampleId> ids;
  // V(x): the k most similar other samples, most similar first.
  std::vector<std::vector<int>> neighbors;
  // E(u) = { x : u in V(x) }, ascending.
  std::vector<std::vector<int>> reverse;
  // Zero vectors seen while building; they score similarity -1 to everything.
  int zero_norm_count = 0;

  std::size_t size() const { return ids.size(); }
};

struct SelectorConfig {
  int k = 10;
  double rho = 2.0;
  double budget_fraction = 0.05;

  void check() const;
};

struct SelectionStep {
  SampleId id = 0;
  double score = 0.0;
};

// Scores closer than this (relative) are treated as ties and go to the lower id.
inline constexpr double kScoreTieTolerance = 1e-12;

// ceil(fraction * pool), robust to the fraction not being exact in binary.
std::size_t budget_count(double fraction, std::size_t pool);

// Rows are independent and computed with OpenMP; ties in similarity go to
// the lower id. `vectors[i]` belongs to `ids[i]`; ids need not be sorted.
NeighborGraph build_graph(std::span<const SampleId> ids,
                          std::span<const std::span<const double>> vectors, int k);
NeighborGraph build_graph(std::span<const Sample> pool, int k);
// Single-threaded reference for build_graph().
NeighborGraph build_graph_serial(std::span<const SampleId> ids,
                                 std::span<const std::span<const double>> vectors, int k);

// Greedy representativeness/diversity selection over the whole graph pool:
// score(u) = sum over x in E(u) of rho^-|V(x) n L|, argmax moves to L.
// Returns ceil(budget_fraction * |pool|) picks in selection order together
// with the score each had when picked.
std::vector<SelectionStep> select(const NeighborGraph& graph, const SelectorConfig& cfg);
std::vector<SampleId> selected_ids(std::span<const SelectionStep> steps);

// Uniform sample without replacement of ceil(fraction * |pool|) ids.
std::vector<SampleId> random_select(std::span<const SampleId> pool, double fraction, Rng& rng);

}  // namespace fes
