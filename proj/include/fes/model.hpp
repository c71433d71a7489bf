#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fes/core.hpp"
#include "fes/rng.hpp"

namespace fes {

enum class LayerMode { Frozen, BiasOnly, Full };

char mode_char(LayerMode m);

// Per-layer training mode, index 0 is the layer nearest the input.
struct LayerPlan {
  std::vector<LayerMode> modes;

  static LayerPlan uniform(int num_layers, LayerMode mode);
  // `frozen` bottom layers, then `bias_only` layers, the rest Full.
  static LayerPlan terraced(int num_layers, int frozen, int bias_only);
  // Inverse of to_string(): one of 'F' (frozen), 'B' (bias only), 'U' (full).
  static LayerPlan parse(const std::string& s);

  int num_layers() const { return static_cast<int>(modes.size()); }
  int count(LayerMode m) const;
  int frozen_prefix() const;
  bool is_terraced() const;
  std::string to_string() const;

  bool operator==(const LayerPlan&) const = default;
};

struct DenseLayer {
  int fan_in = 0;
  int fan_out = 0;
  std::vector<double> weight;  // fan_out x fan_in, row-major
  std::vector<double> bias;    // fan_out

  bool operator==(const DenseLayer&) const = default;
};

// Fully connected classifier: tanh on hidden layers, linear output layer.
class MlpModel {
 public:
  MlpModel() = default;
  explicit MlpModel(std::vector<DenseLayer> layers);

  // Layer widths input_dim -> hidden x (num_layers-1) -> num_classes,
  // weights and biases uniform in +-1/sqrt(fan_in).
  static MlpModel random(int input_dim, int hidden, int num_layers, int num_classes, Rng& rng);

  int num_layers() const { return static_cast<int>(layers_.size()); }
  int input_dim() const { return layers_.empty() ? 0 : layers_.front().fan_in; }
  int num_classes() const { return layers_.empty() ? 0 : layers_.back().fan_out; }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  std::size_t parameter_count() const;
  std::size_t bias_parameter_count() const;
  std::size_t trainable_parameter_count(const LayerPlan& plan) const;

  bool same_shape(const MlpModel& other) const;

  // Output-layer scores.
  std::vector<double> scores(std::span<const double> x) const;
  // Input to the output layer.
  std::vector<double> features(std::span<const double> x) const;

  bool operator==(const MlpModel&) const = default;

 private:
  std::vector<DenseLayer> layers_;
};

struct Example {
  std::span<const double> x;
  int label = 0;
};

std::vector<Example> examples_of(std::span<const Sample> samples);

struct Prediction {
  int label = 0;
  double confidence = 0.0;
};

std::vector<double> softmax(std::span<const double> scores);
// Softmax over the output-layer scores.
std::vector<double> predict_dist(const MlpModel& model, std::span<const double> x);
Prediction predict(const MlpModel& model, std::span<const double> x);

// Fraction of labeled samples classified correctly. OpenMP over samples.
double accuracy(const MlpModel& model, std::span<const Sample> samples);
// Single-threaded reference for accuracy().
double accuracy_serial(const MlpModel& model, std::span<const Sample> samples);

// Mean cross-entropy over a batch.
double mean_loss(const MlpModel& model, std::span<const Example> batch);

struct Gradients {
  std::vector<std::vector<double>> weight;
  std::vector<std::vector<double>> bias;
};

// Mean cross-entropy and its gradient. Backpropagation stops at the lowest
// layer the plan trains; entries for layers the plan leaves untouched stay
// zero.
double loss_and_gradient(const MlpModel& model, std::span<const Example> batch,
                         const LayerPlan& plan, Gradients& grad);

// Sets the output layer to a scaled nearest-centroid classifier over the
// features of `labeled` (the "prompt" initialization). `sharpness` is the
// logit gap between two classes for a sample sitting on a centroid, measured
// in mean squared centroid distances.
void centroid_init(MlpModel& model, std::span<const Sample> labeled, double sharpness);

struct TrainerConfig {
  int batch_size = 4;
  int local_epochs = 1;
  double lr_full = 1e-2;
  double lr_bias = 1e-1;

  void check() const;
};

struct ModelUpdate {
  MlpModel model;
  std::size_t sample_count = 0;
};

// Minibatch SGD on `data`. Throws Error when `data` is empty (the client is
// not eligible for training).
ModelUpdate local_train(MlpModel model, std::span<const Example> data, const LayerPlan& plan,
                        const TrainerConfig& cfg, Rng& rng);

// Gold and pseudo labels of `shard` resolved against `data`. Pseudo labels
// are treated like gold ones.
std::vector<Example> training_examples(const ClientShard& shard, const TaskData& data);

double max_relative_error(std::span<const double> a, std::span<const double> b);

// Analytic gradient against central differences over every parameter the
// plan trains. Returns the largest relative error.
double grad_check(const MlpModel& model, std::span<const Example> batch, const LayerPlan& plan,
                  double step = 1e-5);

// Parameters in layer order, each layer as weight then bias.
std::vector<double> flatten(const MlpModel& model);

// Sample-count weighted parameter mean. Inputs are folded in a canonical
// order so the result does not depend on their arrangement; a parameter that
// is identical in every input is copied through unchanged.
MlpModel fed_avg(std::span<const ModelUpdate> updates);

// Same aggregate computed as base + weighted mean of the trainable deltas.
// Only parameters the plan trains are read from the updates.
MlpModel fed_avg_deltas(const MlpModel& base, std::span<const ModelUpdate> updates,
                        const LayerPlan& plan);

void save_checkpoint(const MlpModel& model, std::ostream& out);
MlpModel load_checkpoint(std::istream& in);
void save_checkpoint(const MlpModel& model, const std::string& path);
MlpModel load_checkpoint(const std::string& path);

}  // namespace fes
