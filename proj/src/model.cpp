#include "lrisk/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "csv.hpp"
#include "lrisk/error.hpp"

namespace lrisk {

LayerSpec LayerSpec::conv2d(std::size_t filters) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.units = filters;
  s.activation = Activation::relu;
  return s;
}

LayerSpec LayerSpec::avg_pool() {
  LayerSpec s;
  s.kind = LayerKind::avg_pool;
  return s;
}

LayerSpec LayerSpec::max_pool() {
  LayerSpec s;
  s.kind = LayerKind::max_pool;
  return s;
}

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec s;
  s.kind = LayerKind::dropout;
  s.rate = rate;
  return s;
}

LayerSpec LayerSpec::flatten() { return LayerSpec{}; }

LayerSpec LayerSpec::dense(std::size_t units, Activation activation) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.units = units;
  s.activation = activation;
  return s;
}

LayerSpec LayerSpec::batch_norm(double momentum, double epsilon) {
  LayerSpec s;
  s.kind = LayerKind::batch_norm;
  s.momentum = momentum;
  s.epsilon = epsilon;
  return s;
}

LayerSpec LayerSpec::softmax_output(std::size_t classes, double l2_lambda) {
  LayerSpec s;
  s.kind = LayerKind::softmax_output;
  s.units = classes;
  s.l2_lambda = l2_lambda;
  return s;
}

std::string LayerSpec::to_string() const {
  using csv::format_double;
  switch (kind) {
    case LayerKind::conv2d: return "conv2d filters=" + std::to_string(units);
    case LayerKind::avg_pool: return "avg_pool";
    case LayerKind::max_pool: return "max_pool";
    case LayerKind::dropout: return "dropout rate=" + format_double(rate);
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense:
      return "dense units=" + std::to_string(units) +
             " activation=" + (activation == Activation::relu ? "relu" : "none");
    case LayerKind::batch_norm:
      return "batch_norm momentum=" + format_double(momentum) + " epsilon=" + format_double(epsilon);
    case LayerKind::softmax_output:
      return "softmax classes=" + std::to_string(units) + " l2=" + format_double(l2_lambda);
  }
  return {};
}

LayerSpec LayerSpec::parse(std::string_view line) {
  std::istringstream in{std::string(line)};
  std::string name;
  in >> name;
  std::vector<std::pair<std::string, std::string>> kv;
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    require(eq != std::string::npos, "malformed layer attribute '" + tok + "'");
    kv.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
  }
  auto get = [&](const std::string& key) -> std::string {
    for (const auto& [k, v] : kv)
      if (k == key) return v;
    fail("layer '" + name + "' is missing attribute '" + key + "'");
  };
  auto number = [&](const std::string& key) {
    const auto v = csv::parse_double(get(key));
    require(v.has_value(), "layer attribute '" + key + "' is not a number");
    return *v;
  };
  auto count = [&](const std::string& key) {
    const auto v = csv::parse_int<std::size_t>(get(key));
    require(v.has_value() && *v > 0, "layer attribute '" + key + "' must be a positive integer");
    return *v;
  };

  if (name == "conv2d") return conv2d(count("filters"));
  if (name == "avg_pool") return avg_pool();
  if (name == "max_pool") return max_pool();
  if (name == "dropout") return dropout(number("rate"));
  if (name == "flatten") return flatten();
  if (name == "dense") {
    const std::string act = get("activation");
    require(act == "relu" || act == "none", "unknown activation '" + act + "'");
    return dense(count("units"), act == "relu" ? Activation::relu : Activation::none);
  }
  if (name == "batch_norm") return batch_norm(number("momentum"), number("epsilon"));
  if (name == "softmax") return softmax_output(count("classes"), number("l2"));
  fail("unknown layer type '" + name + "'");
}

bool is_preset(std::string_view name) {
  return std::find(kPresetNames.begin(), kPresetNames.end(), name) != kPresetNames.end();
}

std::vector<LayerSpec> preset_layers(std::string_view name, const ModelScale& scale,
                                     double dropout_rate, std::size_t classes, double l2_lambda) {
  const auto [f1, f2, f3] = scale.filters;
  if (name == "vgg_b_avg" || name == "vgg_b_max") {
    const LayerSpec pool = name == "vgg_b_avg" ? LayerSpec::avg_pool() : LayerSpec::max_pool();
    return {LayerSpec::conv2d(f1),
            pool,
            LayerSpec::dropout(dropout_rate),
            LayerSpec::conv2d(f2),
            LayerSpec::conv2d(f2),
            pool,
            LayerSpec::dropout(dropout_rate),
            LayerSpec::conv2d(f3),
            LayerSpec::conv2d(f3),
            pool,
            LayerSpec::dropout(dropout_rate),
            LayerSpec::flatten(),
            LayerSpec::dense(scale.dense, Activation::none),
            LayerSpec::batch_norm(),
            LayerSpec::dropout(dropout_rate),
            LayerSpec::softmax_output(classes, l2_lambda)};
  }
  if (name == "simple_cnn") {
    return {LayerSpec::conv2d(f1), LayerSpec::conv2d(f2), LayerSpec::flatten(),
            LayerSpec::softmax_output(classes, l2_lambda)};
  }
  if (name == "mlp") {
    return {LayerSpec::flatten(),
            LayerSpec::dense(scale.dense, Activation::relu),
            LayerSpec::dropout(dropout_rate),
            LayerSpec::dense(std::max<std::size_t>(1, scale.dense / 2), Activation::relu),
            LayerSpec::dropout(dropout_rate),
            LayerSpec::softmax_output(classes, l2_lambda)};
  }
  throw Error(ErrorCode::config, "unknown model preset '" + std::string(name) + "'");
}

namespace {

Shape layer_output_shape(const LayerSpec& spec, const Shape& in, std::size_t index) {
  const std::string where = "layer " + std::to_string(index) + " (" + spec.to_string() + ")";
  switch (spec.kind) {
    case LayerKind::conv2d:
      require(in.size() == 3, where + " needs an HxWxC input, got " + shape_string(in));
      return {in[0], in[1], spec.units};
    case LayerKind::avg_pool:
    case LayerKind::max_pool:
      require(in.size() == 3 && in[0] >= 2 && in[1] >= 2,
              where + " needs an HxWxC input of at least 2x2, got " + shape_string(in));
      return {in[0] / 2, in[1] / 2, in[2]};
    case LayerKind::dropout:
      require(spec.rate >= 0.0 && spec.rate < 1.0, where + " rate must lie in [0, 1)");
      return in;
    case LayerKind::flatten: return {shape_size(in)};
    case LayerKind::dense:
    case LayerKind::softmax_output:
      require(in.size() == 1, where + " needs a flat input, got " + shape_string(in));
      return {spec.units};
    case LayerKind::batch_norm: return in;
  }
  return in;
}

void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (double& v : t.values()) v = u(rng);
}

}  // namespace

Model::Model(Shape input_shape, std::vector<LayerSpec> layers, std::uint64_t init_seed)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  require(!layers_.empty(), "model has no layers");
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i)
    require(layers_[i].kind != LayerKind::softmax_output, "softmax output must be the last layer");
  require(layers_.back().kind == LayerKind::softmax_output, "last layer must be a softmax output");

  const auto trace = shape_trace();
  std::mt19937_64 rng(init_seed);
  params_.resize(layers_.size());
  buffers_.resize(layers_.size());
  Shape in = input_shape_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& spec = layers_[i];
    switch (spec.kind) {
      case LayerKind::conv2d: {
        Tensor w({3, 3, in[2], spec.units});
        glorot_uniform(w, 9 * in[2], 9 * spec.units, rng);
        params_[i] = {std::move(w), Tensor({spec.units})};
        break;
      }
      case LayerKind::dense:
      case LayerKind::softmax_output: {
        Tensor w({in[0], spec.units});
        glorot_uniform(w, in[0], spec.units, rng);
        params_[i] = {std::move(w), Tensor({spec.units})};
        break;
      }
      case LayerKind::batch_norm: {
        const std::size_t d = shape_size(in);
        params_[i] = {Tensor({d}, 1.0), Tensor({d}, 0.0)};
        buffers_[i] = {Tensor({d}, 0.0), Tensor({d}, 1.0)};
        break;
      }
      default: break;
    }
    in = trace[i];
  }
}

std::vector<Shape> Model::shape_trace() const {
  std::vector<Shape> out;
  Shape cur = input_shape_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    cur = layer_output_shape(layers_[i], cur, i);
    out.push_back(cur);
  }
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : params_)
    for (const auto& t : layer) n += t.size();
  return n;
}

Tensor Model::forward_train(const Tensor& x, Trace& trace, std::mt19937_64& rng) {
  return run_forward(x, &trace, Mode::train, &rng, &buffers_);
}

Tensor Model::infer(const Tensor& x, Trace* trace) const {
  return run_forward(x, trace, Mode::infer, nullptr, nullptr);
}

Tensor Model::run_forward(const Tensor& x, Trace* trace, Mode mode, std::mt19937_64* rng,
                          std::vector<std::vector<Tensor>>* buffers) const {
  require(x.rank() == input_shape_.size() + 1 &&
              std::equal(input_shape_.begin(), input_shape_.end(), x.shape().begin() + 1),
          "model expects input [N," + shape_string(input_shape_) + "], got " +
              shape_string(x.shape()));
  require(x.dim(0) >= 1, "empty batch");
  const bool training = mode == Mode::train;
  const std::size_t n_layers = layers_.size();
  if (trace != nullptr) {
    *trace = Trace{};
    trace->mode = mode;
    trace->inputs.resize(n_layers);
    trace->outputs.resize(n_layers);
    trace->masks.resize(n_layers);
    trace->argmax.resize(n_layers);
    trace->batch_norm.resize(n_layers);
  }

  Tensor cur = x;
  for (std::size_t i = 0; i < n_layers; ++i) {
    const LayerSpec& spec = layers_[i];
    const auto& p = params_[i];
    if (trace != nullptr) trace->inputs[i] = cur;
    switch (spec.kind) {
      case LayerKind::conv2d:
        cur = nn::conv2d_forward(cur, p[0], p[1]);
        nn::relu_inplace(cur);
        if (trace != nullptr) trace->outputs[i] = cur;
        break;
      case LayerKind::avg_pool:
      case LayerKind::max_pool: {
        auto r = nn::pool2d_forward(
            cur, spec.kind == LayerKind::avg_pool ? nn::PoolMode::avg : nn::PoolMode::max);
        if (trace != nullptr) trace->argmax[i] = std::move(r.argmax);
        cur = std::move(r.y);
        break;
      }
      case LayerKind::dropout:
        if (training) {
          require(rng != nullptr, "training forward needs a random generator");
          cur = nn::dropout_forward(cur, spec.rate, true, *rng,
                                    trace != nullptr ? &trace->masks[i] : nullptr);
        }
        break;
      case LayerKind::flatten: cur = cur.reshaped({cur.dim(0), cur.stride0()}); break;
      case LayerKind::dense:
        cur = nn::dense_forward(cur, p[0], p[1]);
        if (spec.activation == Activation::relu) nn::relu_inplace(cur);
        if (trace != nullptr) trace->outputs[i] = cur;
        break;
      case LayerKind::batch_norm:
        if (training) {
          auto& b = (*buffers)[i];
          nn::BatchNormCache local;
          cur = nn::batchnorm_forward(cur, p[0], p[1], b[0], b[1], true, spec.momentum,
                                      spec.epsilon, trace != nullptr ? &trace->batch_norm[i] : &local);
        } else {
          const auto& b = buffers_[i];
          cur = nn::batchnorm_infer(cur, p[0], p[1], b[0], b[1], spec.epsilon);
        }
        break;
      case LayerKind::softmax_output: {
        Tensor logits = nn::dense_forward(cur, p[0], p[1]);
        cur = nn::softmax_rows(logits);
        if (trace != nullptr) {
          trace->logits = std::move(logits);
          trace->probs = cur;
        }
        break;
      }
    }
  }
  if (trace != nullptr) trace->valid = true;
  return cur;
}

Gradients Model::backward(const Trace& trace, const Tensor& dlogits, bool input_grad) const {
  if (!trace.valid || trace.mode != Mode::train)
    fail("backward requires a preceding training-mode forward pass");
  return run_backward(trace, dlogits, true, input_grad);
}

Tensor Model::input_gradient(const Trace& trace, const Tensor& dlogits) const {
  require(trace.valid, "input gradient requires a recorded forward pass");
  return run_backward(trace, dlogits, false, true).input;
}

Gradients Model::run_backward(const Trace& trace, const Tensor& dlogits, bool param_grads,
                              bool input_grad) const {
  require(trace.inputs.size() == layers_.size(), "trace does not belong to this model");
  require(dlogits.rank() == 2 && dlogits.dim(0) == trace.logits.dim(0) &&
              dlogits.dim(1) == num_classes(),
          "logit gradient must be [N," + std::to_string(num_classes()) + "]");
  const bool training = trace.mode == Mode::train;

  Gradients grads;
  grads.params.resize(layers_.size());
  Tensor g = dlogits;
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    const LayerSpec& spec = layers_[idx];
    const auto& p = params_[idx];
    const bool need_dx = idx > 0 || input_grad;
    switch (spec.kind) {
      case LayerKind::softmax_output:
      case LayerKind::dense: {
        if (spec.kind == LayerKind::dense && spec.activation == Activation::relu)
          nn::relu_backward_inplace(g, trace.outputs[idx]);
        auto d = nn::dense_backward(trace.inputs[idx], p[0], g, need_dx);
        if (param_grads) {
          if (spec.kind == LayerKind::softmax_output && spec.l2_lambda != 0.0)
            for (std::size_t i = 0; i < d.dw.size(); ++i)
              d.dw[i] += 2.0 * spec.l2_lambda * p[0][i];
          grads.params[idx] = {std::move(d.dw), std::move(d.db)};
        }
        g = std::move(d.dx);
        break;
      }
      case LayerKind::conv2d: {
        nn::relu_backward_inplace(g, trace.outputs[idx]);
        auto d = nn::conv2d_backward(trace.inputs[idx], p[0], g, need_dx);
        if (param_grads) grads.params[idx] = {std::move(d.dw), std::move(d.db)};
        g = std::move(d.dx);
        break;
      }
      case LayerKind::avg_pool:
      case LayerKind::max_pool:
        if (need_dx)
          g = nn::pool2d_backward(
              g, trace.inputs[idx].shape(),
              spec.kind == LayerKind::avg_pool ? nn::PoolMode::avg : nn::PoolMode::max,
              trace.argmax[idx]);
        break;
      case LayerKind::dropout:
        if (training && spec.rate > 0.0) {
          const Tensor& m = trace.masks[idx];
          for (std::size_t i = 0; i < g.size(); ++i) g[i] *= m[i];
        }
        break;
      case LayerKind::flatten: g = g.reshaped(trace.inputs[idx].shape()); break;
      case LayerKind::batch_norm: {
        if (training) {
          auto d = nn::batchnorm_backward(g, p[0], trace.batch_norm[idx]);
          if (param_grads) grads.params[idx] = {std::move(d.dgamma), std::move(d.dbeta)};
          g = std::move(d.dx);
        } else {
          const std::size_t dsz = g.stride0();
          const auto& var = buffers_[idx][1];
          for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t j = i % dsz;
            g[i] *= p[0][j] / std::sqrt(var[j] + spec.epsilon);
          }
        }
        break;
      }
    }
    if (!need_dx) break;
  }
  if (input_grad) grads.input = std::move(g);
  return grads;
}

std::string Model::spec_text() const {
  std::string s = "input";
  for (std::size_t d : input_shape_) s += " " + std::to_string(d);
  s += "\n";
  for (const auto& l : layers_) s += l.to_string() + "\n";
  return s;
}

std::pair<Shape, std::vector<LayerSpec>> parse_spec_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  Shape shape;
  std::vector<LayerSpec> layers;
  bool have_input = false;
  while (std::getline(in, line)) {
    const auto view = csv::trim(line);
    if (view.empty()) continue;
    if (!have_input) {
      std::istringstream ls{std::string(view)};
      std::string word;
      ls >> word;
      require(word == "input", "model spec must start with an input line");
      std::size_t d = 0;
      while (ls >> d) shape.push_back(d);
      require(!shape.empty(), "model spec input line has no dimensions");
      have_input = true;
      continue;
    }
    layers.push_back(LayerSpec::parse(view));
  }
  require(have_input, "empty model spec");
  return {shape, layers};
}

}  // namespace lrisk
