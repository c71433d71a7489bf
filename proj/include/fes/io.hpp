#pragma once

#include <string>
#include <vector>

#include "fes/core.hpp"
#include "fes/engine.hpp"
#include "fes/planner.hpp"
#include "fes/selector.hpp"

namespace fes {

// Dataset file: JSON lines. The first line is a header
// {"num_classes": C, "dim": d}; every further line is one sample
// {"id", "split", "label", "x"} with split in train/validation/test/public.
void write_dataset(const TaskData& data, const std::string& path);
TaskData read_dataset(const std::string& path);

// Partition manifest: one JSON line per client {"client", "gold", "unlabeled"}.
void write_manifest(const std::vector<ClientShard>& shards, const std::string& path);
std::vector<ClientShard> read_manifest(const std::string& path);

// Per-client sizes, gold counts and class histograms as JSON.
void write_stats(const std::vector<ClientShard>& shards, const TaskData& data,
                 const std::string& path);

// Embeddings for the selection audit: any JSON-lines file whose records carry
// "id" and "x" (a dataset file works; its header line is skipped).
struct EmbeddingSet {
  std::vector<SampleId> ids;
  std::vector<std::vector<double>> vectors;
};
EmbeddingSet read_embeddings(const std::string& path);

void write_selection(const std::vector<SelectionStep>& steps, const std::string& path);

inline constexpr const char* kTraceHeader =
    "round,sim_time,test_acc,val_acc,total_pseudo,pseudo_correct_frac,f,n,k,aug_e,traffic_bytes,energy";

std::string format_trace(const std::vector<RoundTrace>& trace);
void write_trace(const std::vector<RoundTrace>& trace, const std::string& path);
std::vector<RoundTrace> read_trace(const std::string& path);

void write_summary(const RunSummary& summary, const std::string& path);

// Frontier CSV: every plan the planner evaluated.
void write_frontier(const PlanSearchResult& result, const std::string& path);

struct ReportRow {
  std::string name;
  double final_acc = 0.0;
  double best_acc = 0.0;
  double time_to_target = 0.0;
  // Baseline time-to-target divided by this row's; the first trace is the
  // baseline.
  double speedup = 0.0;
  double traffic_bytes = 0.0;
  double energy = 0.0;
};

std::vector<ReportRow> make_report(const std::vector<std::string>& names,
                                   const std::vector<std::vector<RoundTrace>>& traces,
                                   double target);
std::string format_report(const std::vector<ReportRow>& rows, double target);

void write_text(const std::string& text, const std::string& path);

}  // namespace fes
