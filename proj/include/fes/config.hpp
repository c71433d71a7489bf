#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fes/datagen.hpp"
#include "fes/engine.hpp"
#include "fes/planner.hpp"

namespace fes {

struct ExperimentConfig {
  SyntheticTaskSpec task;
  PartitionSpec partition;
  EngineConfig engine;
  PlanSearchConfig planner;
  std::string output_dir = "out";
  // Optional pre-generated inputs; when set, `run` and `plan` load them
  // instead of generating the task from the seed.
  std::string dataset_path;
  std::string manifest_path;
  std::uint64_t seed = 0;

  void check() const;
};

// Parses a JSON config. Unknown keys and badly typed values raise Error
// naming the offending field, e.g. "engine.pacing.mode".
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
// Every field, defaults included.
std::string dump_config(const ExperimentConfig& cfg);

// FES_SEED and FES_OUT_DIR, when set, replace the configured values.
void apply_env_overrides(ExperimentConfig& cfg);

// Engine config with the experiment seed folded in.
EngineConfig engine_config(const ExperimentConfig& cfg);

struct Workload {
  TaskData data;
  std::vector<ClientShard> shards;
};

// Loads dataset_path / manifest_path when given, otherwise generates the
// task (substream "task") and its partition from the seed.
Workload make_workload(const ExperimentConfig& cfg);

}  // namespace fes
