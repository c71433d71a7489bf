#include "fes/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fes/datagen.hpp"

namespace fes {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return in;
}

// Calls fn(json, line_number) for every non-blank line.
template <typename Fn>
void for_each_json_line(const std::string& path, Fn fn) {
  auto in = open_in(path);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(path + ":" + std::to_string(number) + ": " + e.what());
    }
    try {
      fn(j, number);
    } catch (const json::exception& e) {
      throw Error(path + ":" + std::to_string(number) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(path + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json sample_json(const Sample& s, const char* split) {
  json j = {{"id", s.id}, {"split", split}, {"x", s.embedding}};
  j["label"] = s.label ? json(*s.label) : json(nullptr);
  return j;
}

std::vector<SampleId> id_list(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) throw Error(std::string("missing list '") + key + "'");
  return j.at(key).get<std::vector<SampleId>>();
}

}  // namespace

void write_dataset(const TaskData& data, const std::string& path) {
  auto out = open_out(path);
  out << json{{"num_classes", data.num_classes}, {"dim", data.dim}}.dump() << '\n';
  const std::pair<const std::vector<Sample>*, const char*> splits[] = {
      {&data.train, "train"}, {&data.validation, "validation"}, {&data.test, "test"}, {&data.public_split, "public"}};
  for (const auto& [samples, name] : splits) {
    for (const auto& s : *samples) out << sample_json(s, name).dump() << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

TaskData read_dataset(const std::string& path) {
  TaskData data;
  bool header = false;
  for_each_json_line(path, [&](const json& j, int) {
    if (!header) {
      if (!j.contains("num_classes") || !j.contains("dim")) {
        throw Error("first line must be the {\"num_classes\", \"dim\"} header");
      }
      data.num_classes = j.at("num_classes").get<int>();
      data.dim = j.at("dim").get<int>();
      header = true;
      return;
    }
    Sample s;
    s.id = j.at("id").get<SampleId>();
    s.embedding = j.at("x").get<std::vector<double>>();
    if (j.contains("label") && !j.at("label").is_null()) s.label = j.at("label").get<int>();
    const auto split = j.at("split").get<std::string>();
    if (split == "train") data.train.push_back(std::move(s));
    else if (split == "validation") data.validation.push_back(std::move(s));
    else if (split == "test") data.test.push_back(std::move(s));
    else if (split == "public") data.public_split.push_back(std::move(s));
    else throw Error("unknown split '" + split + "'");
  });
  if (!header) throw Error(path + ": empty dataset file");
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    if (data.train[i].id != i) throw Error(path + ": train ids must be 0..n-1 in order");
  }
  try {
    validate(data);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
  return data;
}

void write_manifest(const std::vector<ClientShard>& shards, const std::string& path) {
  auto out = open_out(path);
  for (const auto& s : shards) {
    out << json{{"client", s.client_id}, {"gold", s.gold}, {"unlabeled", s.unlabeled}}.dump() << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

std::vector<ClientShard> read_manifest(const std::string& path) {
  std::vector<ClientShard> shards;
  for_each_json_line(path, [&](const json& j, int) {
    ClientShard s;
    s.client_id = j.at("client").get<int>();
    if (s.client_id != static_cast<int>(shards.size())) {
      throw Error("clients must be listed as 0, 1, 2, ... in order");
    }
    s.gold = id_list(j, "gold");
    s.unlabeled = id_list(j, "unlabeled");
    shards.push_back(std::move(s));
  });
  if (shards.empty()) throw Error(path + ": manifest lists no clients");
  return shards;
}

void write_stats(const std::vector<ClientShard>& shards, const TaskData& data,
                 const std::string& path) {
  const auto hist = class_histograms(shards, data);
  json clients = json::array();
  std::vector<double> sizes;
  for (std::size_t i = 0; i < shards.size(); ++i) {
    clients.push_back({{"client", shards[i].client_id},
                       {"size", shards[i].size()},
                       {"gold", shards[i].gold.size()},
                       {"class_histogram", hist[i]}});
    sizes.push_back(static_cast<double>(shards[i].size()));
  }
  json j = {{"num_clients", shards.size()}, {"size_gini", gini(sizes)}, {"clients", clients}};
  write_text(j.dump(2) + "\n", path);
}

EmbeddingSet read_embeddings(const std::string& path) {
  EmbeddingSet set;
  for_each_json_line(path, [&](const json& j, int) {
    if (!j.contains("x")) return;  // dataset header
    if (j.contains("split") && j.at("split") != "train") return;
    set.ids.push_back(j.at("id").get<SampleId>());
    set.vectors.push_back(j.at("x").get<std::vector<double>>());
  });
  if (set.ids.empty()) throw Error(path + ": no embeddings found");
  return set;
}

void write_selection(const std::vector<SelectionStep>& steps, const std::string& path) {
  std::string text = "step,id,score\n";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    text += std::to_string(i + 1) + "," + std::to_string(steps[i].id) + "," + num(steps[i].score) + "\n";
  }
  write_text(text, path);
}

std::string format_trace(const std::vector<RoundTrace>& trace) {
  std::string text = std::string(kTraceHeader) + "\n";
  for (const auto& r : trace) {
    text += std::to_string(r.round) + "," + num(r.sim_time) + "," + num(r.test_acc) + "," +
            num(r.val_acc) + "," + std::to_string(r.total_pseudo) + "," + num(r.pseudo_correct_frac) +
            "," + std::to_string(r.f) + "," + std::to_string(r.n) + "," + std::to_string(r.k) + "," +
            num(r.aug_e) + "," + num(r.traffic_bytes) + "," + num(r.energy) + "\n";
  }
  return text;
}

void write_trace(const std::vector<RoundTrace>& trace, const std::string& path) {
  write_text(format_trace(trace), path);
}

std::vector<RoundTrace> read_trace(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw Error(path + ": not a trace CSV (header mismatch)");
  }
  std::vector<RoundTrace> trace;
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 12) throw Error(path + ":" + std::to_string(number) + ": expected 12 columns");
    try {
      RoundTrace r;
      r.round = std::stoi(cells[0]);
      r.sim_time = std::stod(cells[1]);
      r.test_acc = std::stod(cells[2]);
      r.val_acc = std::stod(cells[3]);
      r.total_pseudo = std::stoi(cells[4]);
      r.pseudo_correct_frac = std::stod(cells[5]);
      r.f = std::stoi(cells[6]);
      r.n = std::stoi(cells[7]);
      r.k = std::stoi(cells[8]);
      r.aug_e = std::stod(cells[9]);
      r.traffic_bytes = std::stod(cells[10]);
      r.energy = std::stod(cells[11]);
      trace.push_back(r);
    } catch (const std::logic_error&) {
      throw Error(path + ":" + std::to_string(number) + ": malformed number");
    }
  }
  return trace;
}

void write_summary(const RunSummary& s, const std::string& path) {
  json j = {{"rounds", s.rounds},
            {"final_test_acc", s.final_test_acc},
            {"best_test_acc", s.best_test_acc},
            {"final_val_acc", s.final_val_acc},
            {"zero_shot_test_acc", s.zero_shot_test_acc},
            {"zero_shot_val_acc", s.zero_shot_val_acc},
            {"sim_time", s.sim_time},
            {"traffic_bytes", s.traffic_bytes},
            {"energy", s.energy},
            {"inference_time", s.inference_time},
            {"inference_compute", s.inference_compute},
            {"embedding_time", s.embedding_time},
            {"probe_time", s.probe_time},
            {"switches", s.switches},
            {"labeling_events", s.labeling_events},
            {"skipped_events", s.skipped_events},
            {"startup_warning", s.startup_warning},
            {"initial_config", s.initial_config}};
  write_text(j.dump(2) + "\n", path);
}

void write_frontier(const PlanSearchResult& result, const std::string& path) {
  std::string text = "plan,frozen,bias_only,accuracy,admissible,compute_time,comm_time,total_time,energy,traffic_bytes\n";
  for (const auto& e : result.evaluated) {
    text += e.plan.to_string() + "," + std::to_string(e.plan.frozen_prefix()) + "," +
            std::to_string(e.plan.count(LayerMode::BiasOnly)) + "," + num(e.accuracy) + "," +
            (e.admissible ? "1" : "0") + "," + num(e.cost.compute_time) + "," + num(e.cost.comm_time) +
            "," + num(e.cost.total_time()) + "," + num(e.cost.energy) + "," + num(e.cost.traffic_bytes) + "\n";
  }
  write_text(text, path);
}

std::vector<ReportRow> make_report(const std::vector<std::string>& names,
                                   const std::vector<std::vector<RoundTrace>>& traces,
                                   double target) {
  if (names.size() != traces.size()) throw Error("make_report: names and traces differ in length");
  std::vector<ReportRow> rows;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    ReportRow row;
    row.name = names[i];
    const auto& t = traces[i];
    if (!t.empty()) {
      row.final_acc = t.back().test_acc;
      for (const auto& r : t) row.best_acc = std::max(row.best_acc, r.test_acc);
      row.traffic_bytes = t.back().traffic_bytes;
      row.energy = t.back().energy;
    }
    row.time_to_target = time_to_accuracy(t, target);
    rows.push_back(row);
  }
  for (auto& row : rows) {
    const double base = rows.front().time_to_target;
    if (std::isinf(row.time_to_target)) row.speedup = 0.0;
    else if (std::isinf(base)) row.speedup = std::numeric_limits<double>::infinity();
    else row.speedup = base / row.time_to_target;
  }
  return rows;
}

std::string format_report(const std::vector<ReportRow>& rows, double target) {
  std::string text = "# target test accuracy " + num(target) + "; speedup relative to " +
                     (rows.empty() ? std::string("-") : rows.front().name) + "\n";
  text += "config,final_acc,best_acc,time_to_target,speedup,traffic_bytes,energy\n";
  for (const auto& r : rows) {
    text += r.name + "," + num(r.final_acc) + "," + num(r.best_acc) + "," + num(r.time_to_target) + "," +
            (r.speedup == 0.0 ? std::string("n/a") : num(r.speedup)) + "," + num(r.traffic_bytes) + "," +
            num(r.energy) + "\n";
  }
  return text;
}

void write_text(const std::string& text, const std::string& path) {
  auto out = open_out(path);
  out << text;
  if (!out) throw Error("failed writing " + path);
}

}  // namespace fes
