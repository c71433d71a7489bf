#include "fes/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fes/io.hpp"

namespace fes {

using nlohmann::json;

namespace {

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error("config field '" + label() + "': expected an object");
  }

  // Rejects keys nobody asked for, which are usually typos.
  void done() const {
    for (const auto& [key, _] : j_.items()) {
      if (!used_.count(key)) throw Error("config field '" + field(key) + "': unknown key");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw Error("expected true or false");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw Error("expected an integer");
        if (std::is_unsigned_v<T> && !v.is_number_unsigned()) throw Error("expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw Error("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw Error("expected a string");
      }
      out = v.get<T>();
    } catch (const Error& e) {
      throw Error("config field '" + field(key) + "': " + e.what());
    } catch (const json::exception& e) {
      throw Error("config field '" + field(key) + "': " + e.what());
    }
  }

  // Finite positive number, or the string "uniform" for the infinite limit.
  void get_concentration(const std::string& key, double& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (v.is_string() && v.get<std::string>() == "uniform") {
      out = kUniform;
    } else if (v.is_number()) {
      out = v.get<double>();
    } else {
      throw Error("config field '" + field(key) + "': expected a number or \"uniform\"");
    }
  }

  const json* child(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string label() const { return path_.empty() ? "<root>" : path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename Enum>
struct EnumName {
  Enum value;
  const char* name;
};

constexpr EnumName<SelectorMode> kSelectorModes[] = {
    {SelectorMode::None, "none"}, {SelectorMode::Diversity, "diversity"}, {SelectorMode::Random, "random"}};
constexpr EnumName<PacingMode> kPacingModes[] = {{PacingMode::Disabled, "disabled"},
                                                 {PacingMode::Static, "static"},
                                                 {PacingMode::FixedCount, "fixed_count"},
                                                 {PacingMode::Controller, "controller"}};

template <typename Enum, std::size_t N>
const char* enum_name(const EnumName<Enum> (&table)[N], Enum v) {
  for (const auto& e : table) {
    if (e.value == v) return e.name;
  }
  return "?";
}

template <typename Enum, std::size_t N>
void get_enum(Reader& r, const std::string& key, const EnumName<Enum> (&table)[N], Enum& out) {
  std::string s;
  r.get(key, s);
  if (s.empty()) return;
  for (const auto& e : table) {
    if (s == e.name) {
      out = e.value;
      return;
    }
  }
  std::string opts;
  for (const auto& e : table) opts += std::string(opts.empty() ? "" : ", ") + e.name;
  throw Error("config field '" + r.field(key) + "': expected one of " + opts);
}

PacingConfig read_pacing_config(const json& j, const std::string& path) {
  PacingConfig c;
  if (j.is_array()) {
    if (j.size() != 3 || !j[0].is_number_integer() || !j[1].is_number_integer() ||
        !j[2].is_number_integer()) {
      throw Error("config field '" + path + "': expected [f, n, k] integers");
    }
    c = {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
  } else {
    Reader r(j, path);
    r.get("f", c.f);
    r.get("n", c.n);
    r.get("k", c.k);
    r.done();
  }
  try {
    c.check();
  } catch (const Error& e) {
    throw Error("config field '" + path + "': " + e.what());
  }
  return c;
}

void read_task(const json& j, SyntheticTaskSpec& t) {
  Reader r(j, "task");
  r.get("num_classes", t.num_classes);
  r.get("dim", t.dim);
  r.get("per_class_count", t.per_class_count);
  r.get("cluster_spread", t.cluster_spread);
  r.get("class_center_separation", t.class_center_separation);
  r.get("test_per_class", t.test_per_class);
  r.get("validation_fraction", t.validation_fraction);
  r.get("public_per_class", t.public_per_class);
  r.get("class_proportions", t.class_proportions);
  r.done();
}

void read_partition(const json& j, PartitionSpec& p) {
  Reader r(j, "partition");
  r.get("num_clients", p.num_clients);
  r.get_concentration("alpha", p.alpha);
  r.get_concentration("beta", p.beta);
  r.get("gold_total", p.gold_total);
  r.get("gamma", p.gamma);
  r.get("gold_client_cap", p.gold_client_cap);
  r.done();
}

void read_engine(const json& j, EngineConfig& e) {
  Reader r(j, "engine");
  r.get("clients_per_training_round", e.clients_per_training_round);
  r.get("confidence_threshold", e.confidence_threshold);
  r.get("capacity_filter", e.capacity_filter);
  r.get("max_rounds", e.max_rounds);
  r.get("target_accuracy", e.target_accuracy);
  r.get("embedding_cost_ratio", e.embedding_cost_ratio);
  std::string plan;
  r.get("plan", plan);
  if (!plan.empty()) {
    try {
      e.plan = LayerPlan::parse(plan);
    } catch (const Error& err) {
      throw Error("config field 'engine.plan': " + std::string(err.what()));
    }
  }

  if (const auto* s = r.child("selector")) {
    Reader sr(*s, "engine.selector");
    get_enum(sr, "mode", kSelectorModes, e.selector_mode);
    sr.get("k", e.selector.k);
    sr.get("rho", e.selector.rho);
    sr.get("budget_fraction", e.selector.budget_fraction);
    sr.done();
  }
  if (const auto* p = r.child("pacing")) {
    Reader pr(*p, "engine.pacing");
    get_enum(pr, "mode", kPacingModes, e.pacing.mode);
    if (const auto* f = pr.child("fixed")) e.pacing.fixed = read_pacing_config(*f, "engine.pacing.fixed");
    pr.get("fixed_count", e.pacing.fixed_count);
    pr.get("trial_window", e.pacing.controller.trial_window);
    pr.get("top_t", e.pacing.controller.top_t);
    pr.get("alarm_threshold", e.pacing.controller.alarm_threshold);
    pr.get("ema_points", e.pacing.controller.ema_points);
    pr.get("switching", e.pacing.controller.switching);
    if (const auto* c = pr.child("candidates")) {
      if (!c->is_array()) throw Error("config field 'engine.pacing.candidates': expected a list");
      e.pacing.candidates.clear();
      for (std::size_t i = 0; i < c->size(); ++i) {
        e.pacing.candidates.push_back(
            read_pacing_config((*c)[i], "engine.pacing.candidates[" + std::to_string(i) + "]"));
      }
    }
    pr.done();
  }
  if (const auto* c = r.child("cost")) {
    Reader cr(*c, "engine.cost");
    cr.get("bandwidth", e.cost.bandwidth);
    cr.get("bytes_per_param", e.cost.bytes_per_param);
    cr.get("compute_fwd_per_layer", e.cost.compute_fwd_per_layer);
    cr.get("compute_bwd_per_layer", e.cost.compute_bwd_per_layer);
    cr.get("power_compute", e.cost.power_compute);
    cr.get("power_network", e.cost.power_network);
    cr.done();
  }
  if (const auto* a = r.child("aug_e")) {
    Reader ar(*a, "engine.aug_e");
    ar.get("eta", e.aug_e.eta);
    ar.get("theta", e.aug_e.theta);
    ar.get("l_i", e.aug_e.l_i);
    ar.get("l_t", e.aug_e.l_t);
    ar.done();
  }
  if (const auto* t = r.child("trainer")) {
    Reader tr(*t, "engine.trainer");
    tr.get("batch_size", e.trainer.batch_size);
    tr.get("local_epochs", e.trainer.local_epochs);
    tr.get("lr_full", e.trainer.lr_full);
    tr.get("lr_bias", e.trainer.lr_bias);
    tr.done();
  }
  if (const auto* m = r.child("model")) {
    Reader mr(*m, "engine.model");
    mr.get("hidden", e.model.hidden);
    mr.get("num_layers", e.model.num_layers);
    mr.get("pretrained", e.model.pretrained);
    mr.get("centroid_sharpness", e.model.centroid_sharpness);
    mr.done();
  }
  r.done();
}

void read_planner(const json& j, PlanSearchConfig& p) {
  Reader r(j, "planner");
  r.get("epsilon_acc", p.epsilon_acc);
  r.get("probe_rounds", p.probe_rounds);
  r.get("batches_per_round", p.batches_per_round);
  r.get("min_accuracy", p.min_accuracy);
  r.done();
}

json concentration(double v) { return std::isinf(v) ? json("uniform") : json(v); }

json pacing_json(const PacingConfig& c) { return json{{"f", c.f}, {"n", c.n}, {"k", c.k}}; }

// Re-raises a validation failure with the section it belongs to.
template <typename F>
void checked(const char* section, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    throw Error(std::string("config section '") + section + "': " + e.what());
  }
}

}  // namespace

void ExperimentConfig::check() const {
  checked("task", [&] { task.check(); });
  checked("partition", [&] { partition.check(); });
  checked("engine", [&] { engine.check(); });
  checked("planner", [&] { planner.check(); });
  if (partition.gold_client_cap > partition.num_clients) {
    throw Error("config field 'partition.gold_client_cap': must not exceed partition.num_clients");
  }
  if (output_dir.empty()) throw Error("config field 'output_dir': must not be empty");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  {
    Reader r(j, "");
    r.get("seed", cfg.seed);
    r.get("output_dir", cfg.output_dir);
    r.get("dataset_path", cfg.dataset_path);
    r.get("manifest_path", cfg.manifest_path);
    if (const auto* t = r.child("task")) read_task(*t, cfg.task);
    if (const auto* p = r.child("partition")) read_partition(*p, cfg.partition);
    if (const auto* e = r.child("engine")) read_engine(*e, cfg.engine);
    if (const auto* p = r.child("planner")) read_planner(*p, cfg.planner);
    r.done();
  }
  cfg.check();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

std::string dump_config(const ExperimentConfig& cfg) {
  const auto& e = cfg.engine;
  json cands = json::array();
  for (const auto& c : e.pacing.candidates) cands.push_back(pacing_json(c));
  json j = {
      {"seed", cfg.seed},
      {"output_dir", cfg.output_dir},
      {"dataset_path", cfg.dataset_path},
      {"manifest_path", cfg.manifest_path},
      {"task",
       {{"num_classes", cfg.task.num_classes},
        {"dim", cfg.task.dim},
        {"per_class_count", cfg.task.per_class_count},
        {"cluster_spread", cfg.task.cluster_spread},
        {"class_center_separation", cfg.task.class_center_separation},
        {"test_per_class", cfg.task.test_per_class},
        {"validation_fraction", cfg.task.validation_fraction},
        {"public_per_class", cfg.task.public_per_class},
        {"class_proportions", cfg.task.class_proportions}}},
      {"partition",
       {{"num_clients", cfg.partition.num_clients},
        {"alpha", concentration(cfg.partition.alpha)},
        {"beta", concentration(cfg.partition.beta)},
        {"gold_total", cfg.partition.gold_total},
        {"gamma", cfg.partition.gamma},
        {"gold_client_cap", cfg.partition.gold_client_cap}}},
      {"engine",
       {{"clients_per_training_round", e.clients_per_training_round},
        {"confidence_threshold", e.confidence_threshold},
        {"capacity_filter", e.capacity_filter},
        {"max_rounds", e.max_rounds},
        {"target_accuracy", e.target_accuracy},
        {"embedding_cost_ratio", e.embedding_cost_ratio},
        {"plan", e.plan.to_string()},
        {"selector",
         {{"mode", enum_name(kSelectorModes, e.selector_mode)},
          {"k", e.selector.k},
          {"rho", e.selector.rho},
          {"budget_fraction", e.selector.budget_fraction}}},
        {"pacing",
         {{"mode", enum_name(kPacingModes, e.pacing.mode)},
          {"fixed", pacing_json(e.pacing.fixed)},
          {"fixed_count", e.pacing.fixed_count},
          {"trial_window", e.pacing.controller.trial_window},
          {"top_t", e.pacing.controller.top_t},
          {"alarm_threshold", e.pacing.controller.alarm_threshold},
          {"ema_points", e.pacing.controller.ema_points},
          {"switching", e.pacing.controller.switching},
          {"candidates", cands}}},
        {"cost",
         {{"bandwidth", e.cost.bandwidth},
          {"bytes_per_param", e.cost.bytes_per_param},
          {"compute_fwd_per_layer", e.cost.compute_fwd_per_layer},
          {"compute_bwd_per_layer", e.cost.compute_bwd_per_layer},
          {"power_compute", e.cost.power_compute},
          {"power_network", e.cost.power_network}}},
        {"aug_e", {{"eta", e.aug_e.eta}, {"theta", e.aug_e.theta}, {"l_i", e.aug_e.l_i}, {"l_t", e.aug_e.l_t}}},
        {"trainer",
         {{"batch_size", e.trainer.batch_size},
          {"local_epochs", e.trainer.local_epochs},
          {"lr_full", e.trainer.lr_full},
          {"lr_bias", e.trainer.lr_bias}}},
        {"model",
         {{"hidden", e.model.hidden},
          {"num_layers", e.model.num_layers},
          {"pretrained", e.model.pretrained},
          {"centroid_sharpness", e.model.centroid_sharpness}}}}},
      {"planner",
       {{"epsilon_acc", cfg.planner.epsilon_acc},
        {"probe_rounds", cfg.planner.probe_rounds},
        {"batches_per_round", cfg.planner.batches_per_round},
        {"min_accuracy", cfg.planner.min_accuracy}}},
  };
  return j.dump(2) + "\n";
}

void apply_env_overrides(ExperimentConfig& cfg) {
  if (const char* s = std::getenv("FES_SEED"); s != nullptr && *s != '\0') {
    char* end = nullptr;
    errno = 0;
    const auto v = std::strtoull(s, &end, 10);
    if (errno != 0 || *end != '\0' || *s == '-') throw Error("FES_SEED is not an unsigned integer: " + std::string(s));
    cfg.seed = v;
  }
  if (const char* s = std::getenv("FES_OUT_DIR"); s != nullptr && *s != '\0') cfg.output_dir = s;
}

EngineConfig engine_config(const ExperimentConfig& cfg) {
  EngineConfig e = cfg.engine;
  e.seed = cfg.seed;
  return e;
}

Workload make_workload(const ExperimentConfig& cfg) {
  const Rng root(cfg.seed);
  Workload w;
  if (!cfg.dataset_path.empty()) {
    w.data = read_dataset(cfg.dataset_path);
  } else {
    Rng task_rng = split_stream(root, "task");
    w.data = gen_blobs(cfg.task, task_rng);
  }
  if (!cfg.manifest_path.empty()) {
    w.shards = read_manifest(cfg.manifest_path);
    try {
      validate(w.shards, w.data);
    } catch (const Error& e) {
      throw Error(cfg.manifest_path + ": " + e.what());
    }
  } else {
    w.shards = make_partition(w.data, cfg.partition, root);
  }
  return w;
}

}  // namespace fes
