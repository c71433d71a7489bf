#include "fes/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

namespace fes {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

char mode_char(LayerMode m) {
  switch (m) {
    case LayerMode::Frozen: return 'F';
    case LayerMode::BiasOnly: return 'B';
    case LayerMode::Full: return 'U';
  }
  return '?';
}

LayerPlan LayerPlan::uniform(int num_layers, LayerMode mode) {
  return LayerPlan{std::vector<LayerMode>(num_layers, mode)};
}

LayerPlan LayerPlan::terraced(int num_layers, int frozen, int bias_only) {
  if (frozen < 0 || bias_only < 0 || frozen + bias_only > num_layers) {
    throw Error("terraced plan: frozen + bias_only must fit in num_layers");
  }
  LayerPlan p = uniform(num_layers, LayerMode::Full);
  for (int i = 0; i < frozen; ++i) p.modes[i] = LayerMode::Frozen;
  for (int i = frozen; i < frozen + bias_only; ++i) p.modes[i] = LayerMode::BiasOnly;
  return p;
}

LayerPlan LayerPlan::parse(const std::string& s) {
  LayerPlan p;
  for (char c : s) {
    switch (c) {
      case 'F': p.modes.push_back(LayerMode::Frozen); break;
      case 'B': p.modes.push_back(LayerMode::BiasOnly); break;
      case 'U': p.modes.push_back(LayerMode::Full); break;
      default: throw Error(std::string("layer plan: unknown mode '") + c + "' (use F, B or U)");
    }
  }
  return p;
}

int LayerPlan::count(LayerMode m) const {
  return static_cast<int>(std::count(modes.begin(), modes.end(), m));
}

int LayerPlan::frozen_prefix() const {
  int n = 0;
  while (n < num_layers() && modes[n] == LayerMode::Frozen) ++n;
  return n;
}

bool LayerPlan::is_terraced() const {
  return std::is_sorted(modes.begin(), modes.end(), [](LayerMode a, LayerMode b) {
    return static_cast<int>(a) < static_cast<int>(b);
  });
}

std::string LayerPlan::to_string() const {
  std::string s;
  for (auto m : modes) s.push_back(mode_char(m));
  return s;
}

MlpModel::MlpModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.fan_in < 1 || l.fan_out < 1 ||
        l.weight.size() != static_cast<std::size_t>(l.fan_in) * l.fan_out ||
        l.bias.size() != static_cast<std::size_t>(l.fan_out)) {
      throw Error("model: malformed layer " + std::to_string(i));
    }
    if (i > 0 && layers_[i - 1].fan_out != l.fan_in) {
      throw Error("model: layer " + std::to_string(i) + " input width mismatch");
    }
  }
}

MlpModel MlpModel::random(int input_dim, int hidden, int num_layers, int num_classes, Rng& rng) {
  if (input_dim < 1 || hidden < 1 || num_layers < 1 || num_classes < 1) {
    throw Error("model: dimensions must be >= 1");
  }
  std::vector<DenseLayer> layers(num_layers);
  for (int l = 0; l < num_layers; ++l) {
    auto& layer = layers[l];
    layer.fan_in = l == 0 ? input_dim : hidden;
    layer.fan_out = l == num_layers - 1 ? num_classes : hidden;
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.fan_in));
    layer.weight.resize(static_cast<std::size_t>(layer.fan_in) * layer.fan_out);
    layer.bias.resize(layer.fan_out);
    for (auto& w : layer.weight) w = rng.uniform(-bound, bound);
    for (auto& b : layer.bias) b = rng.uniform(-bound, bound);
  }
  return MlpModel(std::move(layers));
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

std::size_t MlpModel::bias_parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.bias.size();
  return n;
}

std::size_t MlpModel::trainable_parameter_count(const LayerPlan& plan) const {
  if (plan.num_layers() != num_layers()) throw Error("plan length does not match model depth");
  std::size_t n = 0;
  for (int i = 0; i < num_layers(); ++i) {
    if (plan.modes[i] == LayerMode::Full) n += layers_[i].weight.size() + layers_[i].bias.size();
    if (plan.modes[i] == LayerMode::BiasOnly) n += layers_[i].bias.size();
  }
  return n;
}

bool MlpModel::same_shape(const MlpModel& other) const {
  if (num_layers() != other.num_layers()) return false;
  for (int i = 0; i < num_layers(); ++i) {
    if (layers_[i].fan_in != other.layers_[i].fan_in ||
        layers_[i].fan_out != other.layers_[i].fan_out) {
      return false;
    }
  }
  return true;
}

namespace {

void affine(const DenseLayer& l, std::span<const double> in, std::vector<double>& out) {
  out.assign(l.bias.begin(), l.bias.end());
  for (int o = 0; o < l.fan_out; ++o) {
    const double* row = l.weight.data() + static_cast<std::size_t>(o) * l.fan_in;
    double acc = 0.0;
    for (int i = 0; i < l.fan_in; ++i) acc += row[i] * in[i];
    out[o] += acc;
  }
}

// Activations of every layer; acts[0] is the input, acts[l+1] the output of layer l.
std::vector<std::vector<double>> forward_all(const MlpModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.input_dim()) {
    throw Error("model: input has " + std::to_string(x.size()) + " features, expected " +
                std::to_string(model.input_dim()));
  }
  const auto& layers = model.layers();
  std::vector<std::vector<double>> acts(layers.size() + 1);
  acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    affine(layers[l], acts[l], acts[l + 1]);
    if (l + 1 < layers.size()) {
      for (auto& v : acts[l + 1]) v = std::tanh(v);
    }
  }
  return acts;
}

double log_sum_exp(std::span<const double> s) {
  const double mx = *std::max_element(s.begin(), s.end());
  double sum = 0.0;
  for (double v : s) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

int lowest_trainable(const LayerPlan& plan) {
  for (int i = 0; i < plan.num_layers(); ++i) {
    if (plan.modes[i] != LayerMode::Frozen) return i;
  }
  return plan.num_layers();
}

}  // namespace

std::vector<double> MlpModel::scores(std::span<const double> x) const {
  return forward_all(*this, x).back();
}

std::vector<double> MlpModel::features(std::span<const double> x) const {
  auto acts = forward_all(*this, x);
  return acts[acts.size() - 2];
}

std::vector<Example> examples_of(std::span<const Sample> samples) {
  std::vector<Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.label) throw Error("examples_of: sample " + std::to_string(s.id) + " has no label");
    out.push_back({s.embedding, *s.label});
  }
  return out;
}

std::vector<double> softmax(std::span<const double> scores) {
  const double lse = log_sum_exp(scores);
  std::vector<double> p(scores.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(scores[i] - lse);
  return p;
}

std::vector<double> predict_dist(const MlpModel& model, std::span<const double> x) {
  return softmax(model.scores(x));
}

Prediction predict(const MlpModel& model, std::span<const double> x) {
  const auto p = predict_dist(model, x);
  const auto it = std::max_element(p.begin(), p.end());
  return {static_cast<int>(it - p.begin()), *it};
}

double accuracy_serial(const MlpModel& model, std::span<const Sample> samples) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : samples) {
    if (predict(model, s.embedding).label == s.label.value()) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

double accuracy(const MlpModel& model, std::span<const Sample> samples) {
  if (samples.empty()) return 0.0;
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  long long correct = 0;
#pragma omp parallel for reduction(+ : correct) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& s = samples[i];
    if (predict(model, s.embedding).label == s.label.value()) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

double mean_loss(const MlpModel& model, std::span<const Example> batch) {
  if (batch.empty()) throw Error("mean_loss: empty batch");
  double total = 0.0;
  for (const auto& ex : batch) {
    const auto s = model.scores(ex.x);
    total += log_sum_exp(s) - s.at(ex.label);
  }
  return total / static_cast<double>(batch.size());
}

double loss_and_gradient(const MlpModel& model, std::span<const Example> batch,
                         const LayerPlan& plan, Gradients& grad) {
  if (batch.empty()) throw Error("loss_and_gradient: empty batch");
  if (plan.num_layers() != model.num_layers()) throw Error("plan length does not match model depth");
  const auto& layers = model.layers();
  const int L = model.num_layers();
  grad.weight.assign(L, {});
  grad.bias.assign(L, {});
  for (int l = 0; l < L; ++l) {
    grad.weight[l].assign(layers[l].weight.size(), 0.0);
    grad.bias[l].assign(layers[l].bias.size(), 0.0);
  }
  const int lowest = lowest_trainable(plan);
  if (lowest == L) return mean_loss(model, batch);

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  std::vector<double> delta, below;
  for (const auto& ex : batch) {
    const auto acts = forward_all(model, ex.x);
    const auto& out = acts.back();
    if (ex.label < 0 || ex.label >= static_cast<int>(out.size())) {
      throw Error("loss_and_gradient: label out of range");
    }
    const double lse = log_sum_exp(out);
    total += lse - out[ex.label];
    delta.resize(out.size());
    for (std::size_t c = 0; c < out.size(); ++c) delta[c] = std::exp(out[c] - lse);
    delta[ex.label] -= 1.0;

    for (int l = L - 1; l >= lowest; --l) {
      const auto& layer = layers[l];
      const auto& in = acts[l];
      auto& gw = grad.weight[l];
      auto& gb = grad.bias[l];
      for (int o = 0; o < layer.fan_out; ++o) {
        const double d = delta[o] * inv_n;
        gb[o] += d;
        double* row = gw.data() + static_cast<std::size_t>(o) * layer.fan_in;
        for (int i = 0; i < layer.fan_in; ++i) row[i] += d * in[i];
      }
      if (l == lowest) break;
      below.assign(layer.fan_in, 0.0);
      for (int o = 0; o < layer.fan_out; ++o) {
        const double* row = layer.weight.data() + static_cast<std::size_t>(o) * layer.fan_in;
        for (int i = 0; i < layer.fan_in; ++i) below[i] += row[i] * delta[o];
      }
      // acts[l] is tanh output of layer l-1.
      for (int i = 0; i < layer.fan_in; ++i) below[i] *= 1.0 - in[i] * in[i];
      delta.swap(below);
    }
  }
  // Zero the parts the plan does not train so callers can rely on the mask.
  for (int l = 0; l < L; ++l) {
    if (plan.modes[l] != LayerMode::Full) std::fill(grad.weight[l].begin(), grad.weight[l].end(), 0.0);
    if (plan.modes[l] == LayerMode::Frozen) std::fill(grad.bias[l].begin(), grad.bias[l].end(), 0.0);
  }
  return total * inv_n;
}

void centroid_init(MlpModel& model, std::span<const Sample> labeled, double sharpness) {
  if (!(sharpness > 0.0)) throw Error("centroid_init: sharpness must be > 0");
  const int C = model.num_classes();
  auto& top = model.layers().back();
  std::vector<std::vector<double>> mu(C, std::vector<double>(top.fan_in, 0.0));
  std::vector<int> count(C, 0);
  for (const auto& s : labeled) {
    const int c = s.label.value();
    if (c < 0 || c >= C) throw Error("centroid_init: label out of range");
    const auto f = model.features(s.embedding);
    for (int i = 0; i < top.fan_in; ++i) mu[c][i] += f[i];
    ++count[c];
  }
  for (int c = 0; c < C; ++c) {
    if (count[c] == 0) throw Error("centroid_init: class " + std::to_string(c) + " has no samples");
    for (auto& v : mu[c]) v /= count[c];
  }
  double mean_sq = 0.0;
  int pairs = 0;
  for (int a = 0; a < C; ++a) {
    for (int b = a + 1; b < C; ++b) {
      double d = 0.0;
      for (int i = 0; i < top.fan_in; ++i) d += (mu[a][i] - mu[b][i]) * (mu[a][i] - mu[b][i]);
      mean_sq += d;
      ++pairs;
    }
  }
  if (pairs == 0 || mean_sq == 0.0) mean_sq = 1.0;
  else mean_sq /= pairs;
  // score_c(h) = beta * (mu_c . h - |mu_c|^2 / 2), i.e. -beta/2 |h - mu_c|^2 up to a shared term.
  const double beta = sharpness / mean_sq;
  for (int c = 0; c < C; ++c) {
    double sq = 0.0;
    for (int i = 0; i < top.fan_in; ++i) {
      top.weight[static_cast<std::size_t>(c) * top.fan_in + i] = beta * mu[c][i];
      sq += mu[c][i] * mu[c][i];
    }
    top.bias[c] = -0.5 * beta * sq;
  }
}

void TrainerConfig::check() const {
  if (batch_size < 1) throw Error("trainer.batch_size must be >= 1");
  if (local_epochs < 1) throw Error("trainer.local_epochs must be >= 1");
  if (!(lr_full > 0.0)) throw Error("trainer.lr_full must be > 0");
  if (!(lr_bias > 0.0)) throw Error("trainer.lr_bias must be > 0");
}

ModelUpdate local_train(MlpModel model, std::span<const Example> data, const LayerPlan& plan,
                        const TrainerConfig& cfg, Rng& rng) {
  cfg.check();
  if (data.empty()) throw Error("local_train: client has no labeled samples");
  if (plan.num_layers() != model.num_layers()) throw Error("plan length does not match model depth");
  const int L = model.num_layers();
  const bool anything = lowest_trainable(plan) < L;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Example> batch;
  Gradients grad;
  for (int epoch = 0; epoch < cfg.local_epochs && anything; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
      loss_and_gradient(model, batch, plan, grad);
      for (int l = 0; l < L; ++l) {
        auto& layer = model.layers()[l];
        switch (plan.modes[l]) {
          case LayerMode::Frozen: break;
          case LayerMode::BiasOnly:
            for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= cfg.lr_bias * grad.bias[l][i];
            break;
          case LayerMode::Full:
            for (std::size_t i = 0; i < layer.weight.size(); ++i) layer.weight[i] -= cfg.lr_full * grad.weight[l][i];
            for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= cfg.lr_full * grad.bias[l][i];
            break;
        }
      }
    }
  }
  return {std::move(model), data.size()};
}

std::vector<Example> training_examples(const ClientShard& shard, const TaskData& data) {
  std::vector<Example> out;
  out.reserve(shard.labeled_count());
  for (SampleId id : shard.gold) out.push_back({data.train_sample(id).embedding, data.train_sample(id).label.value()});
  for (const auto& p : shard.pseudo) out.push_back({data.train_sample(p.sample_id).embedding, p.label});
  return out;
}

double max_relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("max_relative_error: size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = std::abs(a[i] - b[i]);
    if (diff == 0.0) continue;
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-7});
    worst = std::max(worst, diff / scale);
  }
  return worst;
}

double grad_check(const MlpModel& model, std::span<const Example> batch, const LayerPlan& plan,
                  double step) {
  if (batch.empty()) throw Error("grad_check: empty batch");
  Gradients grad;
  loss_and_gradient(model, batch, plan, grad);
  std::vector<double> analytic, numeric;
  MlpModel probe = model;
  auto central = [&](double& param) {
    const double saved = param;
    param = saved + step;
    const double up = mean_loss(probe, batch);
    param = saved - step;
    const double down = mean_loss(probe, batch);
    param = saved;
    return (up - down) / (2.0 * step);
  };
  for (int l = 0; l < model.num_layers(); ++l) {
    auto& layer = probe.layers()[l];
    if (plan.modes[l] == LayerMode::Full) {
      for (std::size_t i = 0; i < layer.weight.size(); ++i) {
        analytic.push_back(grad.weight[l][i]);
        numeric.push_back(central(layer.weight[i]));
      }
    }
    if (plan.modes[l] != LayerMode::Frozen) {
      for (std::size_t i = 0; i < layer.bias.size(); ++i) {
        analytic.push_back(grad.bias[l][i]);
        numeric.push_back(central(layer.bias[i]));
      }
    }
  }
  return max_relative_error(analytic, numeric);
}

std::vector<double> flatten(const MlpModel& model) {
  std::vector<double> out;
  out.reserve(model.parameter_count());
  for (const auto& l : model.layers()) {
    out.insert(out.end(), l.weight.begin(), l.weight.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

namespace {

void check_updates(std::span<const ModelUpdate> updates) {
  if (updates.empty()) throw Error("fed_avg: no updates");
  for (const auto& u : updates) {
    if (u.sample_count == 0) throw Error("fed_avg: sample count must be positive");
    if (!u.model.same_shape(updates.front().model)) throw Error("fed_avg: model shape mismatch");
  }
}

// Ascending by (sample_count, parameters), ties keep input order only when
// entries are identical, so any permutation folds in the same sequence.
std::vector<std::size_t> canonical_order(std::span<const ModelUpdate> updates) {
  std::vector<std::vector<double>> flat;
  flat.reserve(updates.size());
  for (const auto& u : updates) flat.push_back(flatten(u.model));
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (updates[a].sample_count != updates[b].sample_count) {
      return updates[a].sample_count < updates[b].sample_count;
    }
    return std::lexicographical_compare(flat[a].begin(), flat[a].end(), flat[b].begin(),
                                        flat[b].end());
  });
  return order;
}

template <typename Select, typename Combine>
void for_each_param(MlpModel& out, std::span<const ModelUpdate> updates, Select select,
                    Combine combine) {
  for (int l = 0; l < out.num_layers(); ++l) {
    auto& layer = out.layers()[l];
    for (int part = 0; part < 2; ++part) {
      auto& dst = part == 0 ? layer.weight : layer.bias;
      if (!select(l, part)) continue;
      for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = combine([&](std::size_t u) -> double {
          const auto& src = updates[u].model.layers()[l];
          return part == 0 ? src.weight[i] : src.bias[i];
        }, dst[i]);
      }
    }
  }
}

}  // namespace

MlpModel fed_avg(std::span<const ModelUpdate> updates) {
  check_updates(updates);
  const auto order = canonical_order(updates);
  double total = 0.0;
  for (std::size_t u : order) total += static_cast<double>(updates[u].sample_count);
  MlpModel out = updates[order.front()].model;
  for_each_param(out, updates, [](int, int) { return true; }, [&](auto value, double current) {
    bool all_same = true;
    for (std::size_t u : order) all_same = all_same && value(u) == current;
    if (all_same) return current;
    double acc = 0.0;
    for (std::size_t u : order) acc += static_cast<double>(updates[u].sample_count) * value(u);
    return acc / total;
  });
  return out;
}

MlpModel fed_avg_deltas(const MlpModel& base, std::span<const ModelUpdate> updates,
                        const LayerPlan& plan) {
  check_updates(updates);
  if (!base.same_shape(updates.front().model)) throw Error("fed_avg: base shape mismatch");
  if (plan.num_layers() != base.num_layers()) throw Error("plan length does not match model depth");
  const auto order = canonical_order(updates);
  double total = 0.0;
  for (std::size_t u : order) total += static_cast<double>(updates[u].sample_count);
  MlpModel out = base;
  auto trains = [&](int l, int part) {
    return plan.modes[l] == LayerMode::Full || (part == 1 && plan.modes[l] == LayerMode::BiasOnly);
  };
  for_each_param(out, updates, trains, [&](auto value, double b) {
    double acc = 0.0;
    for (std::size_t u : order) acc += static_cast<double>(updates[u].sample_count) * (value(u) - b);
    return b + acc / total;
  });
  return out;
}

namespace {

constexpr char kMagic[8] = {'F', 'E', 'S', 'M', 'L', 'P', '\0', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const MlpModel& model, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  put(out, kCheckpointVersion);
  put(out, static_cast<std::uint32_t>(model.num_layers()));
  for (const auto& l : model.layers()) {
    put(out, static_cast<std::uint32_t>(l.fan_in));
    put(out, static_cast<std::uint32_t>(l.fan_out));
    out.write(reinterpret_cast<const char*>(l.weight.data()),
              static_cast<std::streamsize>(l.weight.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(l.bias.data()),
              static_cast<std::streamsize>(l.bias.size() * sizeof(double)));
  }
  if (!out) throw Error("checkpoint: write failed");
}

MlpModel load_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw Error("checkpoint: bad magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw Error("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto n = get<std::uint32_t>(in);
  if (n == 0 || n > 4096) throw Error("checkpoint: implausible layer count");
  std::vector<DenseLayer> layers(n);
  for (auto& l : layers) {
    l.fan_in = static_cast<int>(get<std::uint32_t>(in));
    l.fan_out = static_cast<int>(get<std::uint32_t>(in));
    if (l.fan_in < 1 || l.fan_out < 1 || l.fan_in > (1 << 20) || l.fan_out > (1 << 20)) {
      throw Error("checkpoint: implausible layer size");
    }
    l.weight.resize(static_cast<std::size_t>(l.fan_in) * l.fan_out);
    l.bias.resize(l.fan_out);
    in.read(reinterpret_cast<char*>(l.weight.data()),
            static_cast<std::streamsize>(l.weight.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(l.bias.data()),
            static_cast<std::streamsize>(l.bias.size() * sizeof(double)));
    if (!in) throw Error("checkpoint: truncated file");
  }
  return MlpModel(std::move(layers));
}

void save_checkpoint(const MlpModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  save_checkpoint(model, out);
}

MlpModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace fes
