#include "fes/core.hpp"

#include <algorithm>
#include <unordered_set>

namespace fes {

namespace {

void validate_samples(const std::vector<Sample>& samples, const TaskData& data,
                      const char* split) {
  for (const auto& s : samples) {
    if (static_cast<int>(s.embedding.size()) != data.dim) {
      throw Error(std::string(split) + ": sample " + std::to_string(s.id) +
                  " has embedding length " + std::to_string(s.embedding.size()) +
                  ", expected " + std::to_string(data.dim));
    }
    if (s.label && (*s.label < 0 || *s.label >= data.num_classes)) {
      throw Error(std::string(split) + ": sample " + std::to_string(s.id) +
                  " label out of range");
    }
  }
}

}  // namespace

void validate(const TaskData& data) {
  if (data.num_classes < 1 || data.dim < 1) throw Error("task: num_classes and dim must be >= 1");
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    if (data.train[i].id != i) throw Error("task: train ids must be dense and ordered");
  }
  validate_samples(data.train, data, "train");
  validate_samples(data.validation, data, "validation");
  validate_samples(data.test, data, "test");
  validate_samples(data.public_split, data, "public");
}

void validate(const std::vector<ClientShard>& shards, const TaskData& data) {
  std::vector<char> owner(data.train.size(), 0);
  for (const auto& shard : shards) {
    std::unordered_set<SampleId> unl(shard.unlabeled.begin(), shard.unlabeled.end());
    for (SampleId id : shard.gold) {
      if (id >= data.train.size()) throw Error("shard: gold id out of range");
      if (unl.count(id)) throw Error("shard: sample is both gold and unlabeled");
      if (!data.train[id].label) throw Error("shard: gold sample without label");
    }
    for (SampleId id : shard.unlabeled) {
      if (id >= data.train.size()) throw Error("shard: unlabeled id out of range");
    }
    for (SampleId id : shard.gold) {
      if (owner[id]++) throw Error("shard: sample " + std::to_string(id) + " on two clients");
    }
    for (SampleId id : shard.unlabeled) {
      if (owner[id]++) throw Error("shard: sample " + std::to_string(id) + " on two clients");
    }
    std::unordered_set<SampleId> seen;
    for (const auto& p : shard.pseudo) {
      if (!unl.count(p.sample_id)) throw Error("shard: pseudo label outside unlabeled pool");
      if (!seen.insert(p.sample_id).second) throw Error("shard: duplicate pseudo label");
      if (p.label < 0 || p.label >= data.num_classes) throw Error("shard: pseudo label out of range");
      if (p.confidence < 0.0 || p.confidence > 1.0) throw Error("shard: confidence outside [0,1]");
    }
  }
}

}  // namespace fes
