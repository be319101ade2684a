#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "lrisk/layers.hpp"
#include "lrisk/tensor.hpp"

namespace lrisk {

enum class LayerKind { conv2d, avg_pool, max_pool, dropout, flatten, dense, batch_norm, softmax_output };
enum class Activation { none, relu };
enum class Mode { train, infer };

struct LayerSpec {
  LayerKind kind = LayerKind::flatten;
  std::size_t units = 0;  // filters, units or classes
  double rate = 0.0;      // dropout
  Activation activation = Activation::none;
  double momentum = 0.9;  // batch norm
  double epsilon = 1e-5;  // batch norm
  double l2_lambda = 0.0; // softmax output weights

  static LayerSpec conv2d(std::size_t filters);
  static LayerSpec avg_pool();
  static LayerSpec max_pool();
  static LayerSpec dropout(double rate);
  static LayerSpec flatten();
  static LayerSpec dense(std::size_t units, Activation activation);
  static LayerSpec batch_norm(double momentum = 0.9, double epsilon = 1e-5);
  static LayerSpec softmax_output(std::size_t classes, double l2_lambda = 0.0);

  /// One-line text form, e.g. "conv2d filters=32".
  std::string to_string() const;
  static LayerSpec parse(std::string_view line);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Filter and unit counts for the presets. Full scale is 32/64/128 filters
/// with a 1024-unit dense layer.
struct ModelScale {
  std::array<std::size_t, 3> filters = {32, 64, 128};
  std::size_t dense = 1024;

  friend bool operator==(const ModelScale&, const ModelScale&) = default;
};

inline constexpr std::array<std::string_view, 4> kPresetNames = {"vgg_b_avg", "vgg_b_max",
                                                                 "simple_cnn", "mlp"};

bool is_preset(std::string_view name);

/// vgg_b_avg / vgg_b_max: three conv groups (1, 2, 2 convs) each closed by a
/// 2x2 pool and dropout, then flatten, dense, batch norm, dropout, softmax.
/// simple_cnn: two convs straight into the softmax output.
/// mlp: two ReLU dense layers with dropout.
std::vector<LayerSpec> preset_layers(std::string_view name, const ModelScale& scale,
                                     double dropout_rate, std::size_t classes = 3,
                                     double l2_lambda = 0.0);

/// Intermediates of one forward pass, owned by the caller so that concurrent
/// inference on one model is safe.
struct Trace {
  Mode mode = Mode::infer;
  bool valid = false;
  std::vector<Tensor> inputs;   // input of each layer
  std::vector<Tensor> outputs;  // post-activation output of conv/dense layers
  std::vector<Tensor> masks;    // dropout multipliers
  std::vector<std::vector<std::uint32_t>> argmax;
  std::vector<nn::BatchNormCache> batch_norm;
  Tensor logits;
  Tensor probs;
};

struct Gradients {
  std::vector<std::vector<Tensor>> params;  // mirrors Model::params
  Tensor input;                             // empty unless requested
};

/// Ordered layer stack with parameters. Per-sample shapes exclude the batch
/// axis; forward/backward take batch-major tensors.
class Model {
 public:
  Model() = default;
  Model(Shape input_shape, std::vector<LayerSpec> layers, std::uint64_t init_seed);

  const Shape& input_shape() const noexcept { return input_shape_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::size_t num_classes() const { return layers_.back().units; }

  /// Per-sample output shape of every layer.
  std::vector<Shape> shape_trace() const;

  /// Trainable tensors per layer: {weight, bias} for conv/dense/softmax,
  /// {gamma, beta} for batch norm.
  std::vector<std::vector<Tensor>>& params() noexcept { return params_; }
  const std::vector<std::vector<Tensor>>& params() const noexcept { return params_; }
  /// Non-trainable state per layer: {running_mean, running_var} for batch norm.
  std::vector<std::vector<Tensor>>& buffers() noexcept { return buffers_; }
  const std::vector<std::vector<Tensor>>& buffers() const noexcept { return buffers_; }

  std::size_t parameter_count() const;

  /// Softmax output layer weight [features, classes].
  Tensor& output_weights() { return params_.back()[0]; }
  const Tensor& output_weights() const { return params_.back()[0]; }
  void set_output_l2(double lambda) { layers_.back().l2_lambda = lambda; }

  /// Training-mode forward: dropout draws from `rng`, batch norm uses batch
  /// statistics and updates its running estimates. Returns probabilities.
  Tensor forward_train(const Tensor& x, Trace& trace, std::mt19937_64& rng);
  /// Inference forward; returns probabilities [N, K].
  Tensor infer(const Tensor& x, Trace* trace = nullptr) const;

  /// Parameter gradients given d(loss)/d(logits). Requires a training trace.
  Gradients backward(const Trace& trace, const Tensor& dlogits, bool input_grad = false) const;
  /// d(output)/d(input) for an upstream logit gradient; works on any trace.
  Tensor input_gradient(const Trace& trace, const Tensor& dlogits) const;

  /// Text form of the architecture: input shape line plus one line per layer.
  std::string spec_text() const;

  friend bool operator==(const Model&, const Model&) = default;

 private:
  Tensor run_forward(const Tensor& x, Trace* trace, Mode mode, std::mt19937_64* rng,
                     std::vector<std::vector<Tensor>>* buffers) const;
  Gradients run_backward(const Trace& trace, const Tensor& dlogits, bool param_grads,
                         bool input_grad) const;

  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  std::vector<std::vector<Tensor>> params_;
  std::vector<std::vector<Tensor>> buffers_;
};

/// Parses the output of Model::spec_text into (input shape, layers).
std::pair<Shape, std::vector<LayerSpec>> parse_spec_text(std::string_view text);

}  // namespace lrisk
