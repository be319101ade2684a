#include "lrisk/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "csv.hpp"
#include "lrisk/error.hpp"

namespace lrisk {

void TrainConfig::validate() const {
  require(l2_lambda >= 0.0, "l2_lambda must be >= 0");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout rate must lie in [0, 1)");
  require(batch_size >= 1, "batch size must be >= 1");
  require(patience >= 1, "patience must be >= 1");
  require(min_delta >= 0.0, "min_delta must be >= 0");
  require(max_epochs >= 1, "max_epochs must be >= 1");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "Adam betas must lie in [0, 1)");
  require(adam_epsilon > 0.0, "Adam epsilon must be > 0");
}

double loss(const Tensor& probs, const Tensor& onehot, const Model& model, double lambda) {
  require(probs.shape() == onehot.shape() && probs.rank() == 2,
          "probabilities and one-hot labels must share an [N,K] shape");
  const std::size_t n = probs.dim(0);
  double ce = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (onehot[i] != 0.0) ce -= onehot[i] * std::log(std::max(probs[i], 1e-12));
  ce /= static_cast<double>(n);
  double l2 = 0.0;
  if (lambda != 0.0) {
    for (double w : model.output_weights().values()) l2 += w * w;
    l2 *= lambda;
  }
  return ce + l2;
}

Tensor one_hot(std::span<const int> labels, std::size_t classes) {
  Tensor t({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < classes,
            "label " + std::to_string(labels[i]) + " out of range");
    t[i * classes + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  return t;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               AdamState& state, const AdamParams& config) {
  require(params.size() == grads.size(), "parameter and gradient lists differ in length");
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  require(state.m.size() == params.size(), "optimizer state does not match the parameters");
  ++state.t;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = *grads[k];
    require(p.shape() == g.shape(), "gradient shape does not match its parameter");
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
    }
  }
}

EarlyStopping::EarlyStopping(int patience, double min_delta)
    : patience_(patience), min_delta_(min_delta) {
  require(patience >= 1, "patience must be >= 1");
}

bool EarlyStopping::record(int epoch, double loss) {
  improved_ = best_epoch_ == 0 || loss < best_loss_ - min_delta_;
  if (improved_) {
    best_epoch_ = epoch;
    best_loss_ = loss;
    waited_ = 0;
    return false;
  }
  return ++waited_ >= patience_;
}

double TrainHistory::best_loss() const {
  for (const auto& e : epochs)
    if (e.epoch == best_epoch) return e.loss;
  return std::numeric_limits<double>::quiet_NaN();
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path,
                       const std::vector<std::string>& comments) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  for (const auto& c : comments) out << "# " << c << "\n";
  out << "# best_epoch=" << history.best_epoch << " stopped_epoch=" << history.stopped_epoch
      << " restored_from_epoch=" << history.restored_from_epoch << "\n";
  out << "epoch,loss,accuracy\n";
  for (const auto& e : history.epochs)
    out << e.epoch << "," << csv::format_double(e.loss) << "," << csv::format_double(e.accuracy)
        << "\n";
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows) {
  Shape shape = t.shape();
  shape[0] = rows.size();
  Tensor out(shape);
  const std::size_t stride = t.stride0();
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::memcpy(out.data() + r * stride, t.data() + rows[r] * stride, stride * sizeof(double));
  return out;
}

namespace {

// Content key so the shuffle does not depend on the order samples arrive in.
std::uint64_t sample_key(std::span<const double> values, int label) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  mix(values.data(), values.size_bytes());
  mix(&label, sizeof(label));
  return h;
}

}  // namespace

TrainHistory train(Model& model, const Tensor& images, std::span<const int> labels,
                   const TrainConfig& config, const EpochObserver& observer) {
  config.validate();
  const std::size_t n = labels.size();
  require(n > 0, "training set is empty");
  require(images.rank() >= 2 && images.dim(0) == n, "image count does not match label count");
  const std::size_t classes = model.num_classes();
  model.set_output_l2(config.l2_lambda);

  std::vector<std::size_t> canonical(n);
  std::iota(canonical.begin(), canonical.end(), std::size_t{0});
  {
    std::vector<std::uint64_t> keys(n);
    for (std::size_t i = 0; i < n; ++i) keys[i] = sample_key(images.slice0(i), labels[i]);
    std::stable_sort(canonical.begin(), canonical.end(),
                     [&keys](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  }

  std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  AdamState adam;
  EarlyStopping stopper(config.patience, config.min_delta);
  TrainHistory history;
  Model best = model;
  Trace trace;

  std::vector<Tensor*> param_ptrs;
  for (auto& layer : model.params())
    for (auto& t : layer) param_ptrs.push_back(&t);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::vector<std::size_t> order = canonical;
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::pair<std::size_t, std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += config.batch_size)
      batches.emplace_back(start, std::min(n, start + config.batch_size));
    // A trailing single-sample batch is folded into its predecessor so that
    // batch statistics always see at least two samples.
    if (batches.size() > 1 && batches.back().second - batches.back().first == 1) {
      batches[batches.size() - 2].second = n;
      batches.pop_back();
    }

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const auto& [begin, end] : batches) {
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const Tensor x = gather_rows(images, rows);
      std::vector<int> y(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) y[i] = labels[rows[i]];
      const Tensor target = one_hot(y, classes);

      const Tensor probs = model.forward_train(x, trace, rng);
      const double batch_loss = loss(probs, target, model, config.l2_lambda);
      loss_sum += batch_loss * static_cast<double>(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i)
        if (argmax(probs.slice0(i)) == y[i]) ++correct;

      Tensor dlogits(probs.shape());
      const double inv_b = 1.0 / static_cast<double>(rows.size());
      for (std::size_t i = 0; i < probs.size(); ++i) dlogits[i] = (probs[i] - target[i]) * inv_b;
      Gradients grads = model.backward(trace, dlogits);

      std::vector<const Tensor*> grad_ptrs;
      for (auto& layer : grads.params)
        for (auto& t : layer) grad_ptrs.push_back(&t);
      adam_step(param_ptrs, grad_ptrs, adam, config.adam());
    }

    const EpochRecord rec{epoch, loss_sum / static_cast<double>(n),
                          static_cast<double>(correct) / static_cast<double>(n)};
    if (!std::isfinite(rec.loss))
      throw Error(ErrorCode::divergence,
                  "training loss became non-finite at epoch " + std::to_string(epoch));
    history.epochs.push_back(rec);
    if (observer) observer(rec);

    const bool stop = stopper.record(epoch, rec.loss);
    if (stopper.improved()) best = model;
    history.stopped_epoch = epoch;
    if (stop) break;
  }

  history.best_epoch = stopper.best_epoch();
  history.restored_from_epoch = stopper.best_epoch();
  model = std::move(best);
  return history;
}

int argmax(std::span<const double> values) {
  require(!values.empty(), "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return static_cast<int>(best);
}

std::vector<Prediction> predict(const Model& model, const Tensor& images, std::size_t batch_size) {
  require(images.rank() == model.input_shape().size() + 1 &&
              std::equal(model.input_shape().begin(), model.input_shape().end(),
                         images.shape().begin() + 1),
          "images " + shape_string(images.shape()) + " do not match the model input " +
              shape_string(model.input_shape()));
  std::vector<Prediction> out;
  const std::size_t n = images.dim(0);
  out.reserve(n);
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    rows.resize(end - start);
    std::iota(rows.begin(), rows.end(), start);
    const Tensor probs = model.infer(gather_rows(images, rows));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto row = probs.slice0(i);
      out.push_back({argmax(row), std::vector<double>(row.begin(), row.end())});
    }
  }
  return out;
}

}  // namespace lrisk
