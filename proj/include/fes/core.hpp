#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fes {

using SampleId = std::uint32_t;

// Raised for malformed inputs and violated preconditions across the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Sample {
  SampleId id = 0;
  std::vector<double> embedding;
  // True class. The simulator always knows it; training code only reads it
  // for ids listed in a shard's gold pool.
  std::optional<int> label;
};

struct PseudoLabel {
  SampleId sample_id = 0;
  int label = 0;
  double confidence = 0.0;
  int issued_at_event = 0;

  bool operator==(const PseudoLabel&) const = default;
};

struct ClientShard {
  int client_id = 0;
  std::vector<SampleId> gold;
  std::vector<SampleId> unlabeled;
  std::vector<PseudoLabel> pseudo;

  std::size_t labeled_count() const { return gold.size() + pseudo.size(); }
  std::size_t size() const { return gold.size() + unlabeled.size(); }

  bool operator==(const ClientShard&) const = default;
};

// One generated task. train[i].id == i; validation, test and public_split
// carry ids past the train range so every id in a task is unique.
struct TaskData {
  int num_classes = 0;
  int dim = 0;
  std::vector<Sample> train;
  std::vector<Sample> validation;
  std::vector<Sample> test;
  // Tiny labeled split standing in for prompt knowledge.
  std::vector<Sample> public_split;

  const Sample& train_sample(SampleId id) const { return train.at(id); }
};

// Throws Error on the first violated invariant: embedding length, label
// range, gold/unlabeled disjointness, pseudo ids inside unlabeled, one pseudo
// label per sample, and (for shards) no sample on two clients.
void validate(const TaskData& data);
void validate(const std::vector<ClientShard>& shards, const TaskData& data);

}  // namespace fes
