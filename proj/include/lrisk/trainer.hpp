#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lrisk/model.hpp"

namespace lrisk {

struct AdamParams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  double l2_lambda = 1e-5;
  double learning_rate = 1e-3;
  double dropout_rate = 0.25;
  std::size_t batch_size = 32;
  int patience = 10;
  double min_delta = 0.0;
  int max_epochs = 500;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 42;

  AdamParams adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_epsilon}; }
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Mean categorical cross-entropy over the batch (probabilities clamped below
/// at 1e-12) plus lambda times the squared norm of the softmax output weights.
double loss(const Tensor& probs, const Tensor& onehot, const Model& model, double lambda);

Tensor one_hot(std::span<const int> labels, std::size_t classes);

/// First and second moment estimates for every parameter tensor.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t t = 0;
};

/// One bias-corrected Adam update; the step counter is incremented first.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               AdamState& state, const AdamParams& config);

/// Tracks the best loss seen and signals a stop once `patience` consecutive
/// epochs fail to improve on it by more than `min_delta`.
class EarlyStopping {
 public:
  EarlyStopping(int patience, double min_delta);

  /// Records an epoch's loss; returns true when training should stop.
  bool record(int epoch, double loss);
  /// True when the most recent record set a new best.
  bool improved() const noexcept { return improved_; }
  int best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_loss_; }

 private:
  int patience_;
  double min_delta_;
  int best_epoch_ = 0;
  double best_loss_ = 0.0;
  int waited_ = 0;
  bool improved_ = false;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  int stopped_epoch = 0;
  int restored_from_epoch = 0;

  double best_loss() const;
};

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path,
                       const std::vector<std::string>& comments = {});

using EpochObserver = std::function<void(const EpochRecord&)>;

/// Minibatch Adam with early stopping on the per-epoch training loss (the
/// sample-weighted mean of minibatch losses). Restores the best epoch's
/// parameters before returning. images [N,H,W,C], labels in [0, classes).
TrainHistory train(Model& model, const Tensor& images, std::span<const int> labels,
                   const TrainConfig& config, const EpochObserver& observer = {});

struct Prediction {
  int label = 0;
  std::vector<double> probs;
};

/// Index of the largest value; ties go to the lowest index.
int argmax(std::span<const double> values);

std::vector<Prediction> predict(const Model& model, const Tensor& images,
                                std::size_t batch_size = 64);

/// Rows [begin, end) of a batch-major tensor.
Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows);

}  // namespace lrisk
