#pragma once

// Layer kernels on batch-major tensors. Images are NHWC, vectors are [N, D].

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lrisk/tensor.hpp"

namespace lrisk::nn {

/// 3x3, stride 1, zero-padded ("same") cross-correlation plus bias.
/// x [N,H,W,Cin], w [3,3,Cin,Cout], b [Cout] -> [N,H,W,Cout]. No activation.
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b);

struct ConvGrads {
  Tensor dx;  // empty unless requested
  Tensor dw;
  Tensor db;
};

ConvGrads conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, bool need_dx);

enum class PoolMode { avg, max };

struct PoolResult {
  Tensor y;
  /// For max pooling: flat input offset (within the sample) of each output's
  /// winning cell; first index wins ties.
  std::vector<std::uint32_t> argmax;
};

/// 2x2 windows, stride 2; a trailing odd row or column is dropped.
PoolResult pool2d_forward(const Tensor& x, PoolMode mode);
Tensor pool2d_backward(const Tensor& dy, const Shape& x_shape, PoolMode mode,
                       const std::vector<std::uint32_t>& argmax);

/// x [N,n], w [n,m], b [m] -> [N,m]
Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b);

struct DenseGrads {
  Tensor dx;
  Tensor dw;
  Tensor db;
};

DenseGrads dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, bool need_dx);

void relu_inplace(Tensor& x);
/// dy masked where the activation output is not strictly positive.
void relu_backward_inplace(Tensor& dy, const Tensor& y);

/// Inverted dropout. In training each element is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate); `mask` receives the
/// per-element multiplier. Outside training the input passes through.
Tensor dropout_forward(const Tensor& x, double rate, bool training, std::mt19937_64& rng,
                       Tensor* mask = nullptr);

struct BatchNormCache {
  Tensor xhat;
  std::vector<double> inv_std;
};

/// Per-feature normalisation over the batch axis; features are all trailing
/// dimensions. Training uses batch statistics (batch size >= 2) and updates
/// the running estimates with running = momentum*running + (1-momentum)*batch.
Tensor batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         Tensor& running_mean, Tensor& running_var, bool training,
                         double momentum, double epsilon, BatchNormCache* cache);
/// Inference-only variant that leaves the running statistics untouched.
Tensor batchnorm_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       const Tensor& running_mean, const Tensor& running_var, double epsilon);

struct BatchNormGrads {
  Tensor dx;
  Tensor dgamma;
  Tensor dbeta;
};

BatchNormGrads batchnorm_backward(const Tensor& dy, const Tensor& gamma, const BatchNormCache& cache);

/// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);
/// Row-wise softmax of [N, K] logits.
Tensor softmax_rows(const Tensor& logits);

}  // namespace lrisk::nn
