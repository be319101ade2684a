#include "lrisk/layers.hpp"

#include <algorithm>
#include <cmath>

#include "lrisk/parallel.hpp"

namespace lrisk::nn {

namespace {

void check_conv_shapes(const Tensor& x, const Tensor& w) {
  require(x.rank() == 4, "conv2d input must be [N,H,W,C], got " + shape_string(x.shape()));
  require(w.rank() == 4 && w.dim(0) == 3 && w.dim(1) == 3,
          "conv2d kernel must be [3,3,Cin,Cout], got " + shape_string(w.shape()));
  require(w.dim(2) == x.dim(3), "conv2d kernel input channels do not match the input");
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_conv_shapes(x, w);
  const std::size_t n = x.dim(0), height = x.dim(1), width = x.dim(2);
  const std::size_t cin = x.dim(3), cout = w.dim(3);
  require(b.size() == cout, "conv2d bias size does not match the filter count");
  Tensor y({n, height, width, cout});

  parallel_for(n, [&](std::size_t s) {
    const double* xs = x.data() + s * height * width * cin;
    double* ys = y.data() + s * height * width * cout;
    for (std::size_t h = 0; h < height; ++h)
      for (std::size_t c = 0; c < width; ++c) {
        double* out = ys + (h * width + c) * cout;
        for (std::size_t o = 0; o < cout; ++o) out[o] = b[o];
        for (std::size_t kh = 0; kh < 3; ++kh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(h + kh) - 1;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(height)) continue;
          for (std::size_t kw = 0; kw < 3; ++kw) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(c + kw) - 1;
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(width)) continue;
            const double* xp = xs + (ih * width + iw) * cin;
            const double* wp = w.data() + (kh * 3 + kw) * cin * cout;
            for (std::size_t i = 0; i < cin; ++i) {
              const double xv = xp[i];
              const double* wr = wp + i * cout;
              for (std::size_t o = 0; o < cout; ++o) out[o] += xv * wr[o];
            }
          }
        }
      }
  });
  return y;
}

ConvGrads conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, bool need_dx) {
  check_conv_shapes(x, w);
  const std::size_t n = x.dim(0), height = x.dim(1), width = x.dim(2);
  const std::size_t cin = x.dim(3), cout = w.dim(3);
  require(dy.rank() == 4 && dy.dim(0) == n && dy.dim(1) == height && dy.dim(2) == width &&
              dy.dim(3) == cout,
          "conv2d output gradient has the wrong shape");

  ConvGrads g;
  if (need_dx) g.dx = Tensor(x.shape());
  const std::size_t wsize = w.size();
  // Per-sample kernel gradients, summed in sample order afterwards.
  std::vector<double> partial(n * wsize, 0.0);

  parallel_for(n, [&](std::size_t s) {
    const double* xs = x.data() + s * height * width * cin;
    const double* dys = dy.data() + s * height * width * cout;
    double* dxs = need_dx ? g.dx.data() + s * height * width * cin : nullptr;
    double* dws = partial.data() + s * wsize;
    for (std::size_t h = 0; h < height; ++h)
      for (std::size_t c = 0; c < width; ++c) {
        const double* dyp = dys + (h * width + c) * cout;
        for (std::size_t kh = 0; kh < 3; ++kh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(h + kh) - 1;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(height)) continue;
          for (std::size_t kw = 0; kw < 3; ++kw) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(c + kw) - 1;
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(width)) continue;
            const std::size_t xoff = (ih * width + iw) * cin;
            const std::size_t woff = (kh * 3 + kw) * cin * cout;
            const double* xp = xs + xoff;
            for (std::size_t i = 0; i < cin; ++i) {
              const double xv = xp[i];
              double* dwr = dws + woff + i * cout;
              for (std::size_t o = 0; o < cout; ++o) dwr[o] += xv * dyp[o];
            }
            if (dxs != nullptr) {
              const double* wp = w.data() + woff;
              double* dxp = dxs + xoff;
              for (std::size_t i = 0; i < cin; ++i) {
                const double* wr = wp + i * cout;
                double acc = 0.0;
                for (std::size_t o = 0; o < cout; ++o) acc += wr[o] * dyp[o];
                dxp[i] += acc;
              }
            }
          }
        }
      }
  });

  g.dw = Tensor(w.shape());
  for (std::size_t s = 0; s < n; ++s) {
    const double* p = partial.data() + s * wsize;
    for (std::size_t i = 0; i < wsize; ++i) g.dw[i] += p[i];
  }
  g.db = Tensor({cout});
  for (std::size_t s = 0; s < n; ++s) {
    const double* dys = dy.data() + s * height * width * cout;
    for (std::size_t p = 0; p < height * width; ++p)
      for (std::size_t o = 0; o < cout; ++o) g.db[o] += dys[p * cout + o];
  }
  return g;
}

PoolResult pool2d_forward(const Tensor& x, PoolMode mode) {
  require(x.rank() == 4, "pool input must be [N,H,W,C], got " + shape_string(x.shape()));
  const std::size_t n = x.dim(0), height = x.dim(1), width = x.dim(2), ch = x.dim(3);
  require(height >= 2 && width >= 2, "pooling needs at least a 2x2 input");
  const std::size_t oh = height / 2, ow = width / 2;
  PoolResult r;
  r.y = Tensor({n, oh, ow, ch});
  if (mode == PoolMode::max) r.argmax.assign(n * oh * ow * ch, 0);

  parallel_for(n, [&](std::size_t s) {
    const double* xs = x.data() + s * height * width * ch;
    double* ys = r.y.data() + s * oh * ow * ch;
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j)
        for (std::size_t c = 0; c < ch; ++c) {
          const std::size_t offs[4] = {((2 * i) * width + 2 * j) * ch + c,
                                       ((2 * i) * width + 2 * j + 1) * ch + c,
                                       ((2 * i + 1) * width + 2 * j) * ch + c,
                                       ((2 * i + 1) * width + 2 * j + 1) * ch + c};
          const std::size_t out = (i * ow + j) * ch + c;
          if (mode == PoolMode::avg) {
            ys[out] = (xs[offs[0]] + xs[offs[1]] + xs[offs[2]] + xs[offs[3]]) * 0.25;
          } else {
            std::size_t best = offs[0];
            for (std::size_t q = 1; q < 4; ++q)
              if (xs[offs[q]] > xs[best]) best = offs[q];
            ys[out] = xs[best];
            r.argmax[s * oh * ow * ch + out] = static_cast<std::uint32_t>(best);
          }
        }
  });
  return r;
}

Tensor pool2d_backward(const Tensor& dy, const Shape& x_shape, PoolMode mode,
                       const std::vector<std::uint32_t>& argmax) {
  require(x_shape.size() == 4, "pool input shape must be rank 4");
  const std::size_t n = x_shape[0], height = x_shape[1], width = x_shape[2], ch = x_shape[3];
  const std::size_t oh = height / 2, ow = width / 2;
  require(dy.rank() == 4 && dy.dim(0) == n && dy.dim(1) == oh && dy.dim(2) == ow && dy.dim(3) == ch,
          "pool output gradient has the wrong shape");
  Tensor dx(x_shape);
  parallel_for(n, [&](std::size_t s) {
    const double* dys = dy.data() + s * oh * ow * ch;
    double* dxs = dx.data() + s * height * width * ch;
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j)
        for (std::size_t c = 0; c < ch; ++c) {
          const std::size_t out = (i * ow + j) * ch + c;
          const double g = dys[out];
          if (mode == PoolMode::avg) {
            const double q = g * 0.25;
            dxs[((2 * i) * width + 2 * j) * ch + c] += q;
            dxs[((2 * i) * width + 2 * j + 1) * ch + c] += q;
            dxs[((2 * i + 1) * width + 2 * j) * ch + c] += q;
            dxs[((2 * i + 1) * width + 2 * j + 1) * ch + c] += q;
          } else {
            dxs[argmax[s * oh * ow * ch + out]] += g;
          }
        }
  });
  return dx;
}

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.rank() == 2, "dense input must be [N,D], got " + shape_string(x.shape()));
  require(w.rank() == 2 && w.dim(0) == x.dim(1),
          "dense weight " + shape_string(w.shape()) + " does not match input " +
              shape_string(x.shape()));
  const std::size_t n = x.dim(0), in = w.dim(0), out = w.dim(1);
  require(b.size() == out, "dense bias size does not match the unit count");
  Tensor y({n, out});
  parallel_for(n, [&](std::size_t s) {
    const double* xs = x.data() + s * in;
    double* ys = y.data() + s * out;
    for (std::size_t j = 0; j < out; ++j) ys[j] = b[j];
    for (std::size_t i = 0; i < in; ++i) {
      const double xv = xs[i];
      if (xv == 0.0) continue;
      const double* wr = w.data() + i * out;
      for (std::size_t j = 0; j < out; ++j) ys[j] += xv * wr[j];
    }
  });
  return y;
}

DenseGrads dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, bool need_dx) {
  const std::size_t n = x.dim(0), in = w.dim(0), out = w.dim(1);
  require(dy.rank() == 2 && dy.dim(0) == n && dy.dim(1) == out,
          "dense output gradient has the wrong shape");
  DenseGrads g;
  g.dw = Tensor(w.shape());
  parallel_for(in, [&](std::size_t i) {
    double* dwr = g.dw.data() + i * out;
    for (std::size_t s = 0; s < n; ++s) {
      const double xv = x[s * in + i];
      if (xv == 0.0) continue;
      const double* dys = dy.data() + s * out;
      for (std::size_t j = 0; j < out; ++j) dwr[j] += xv * dys[j];
    }
  });
  g.db = Tensor({out});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t j = 0; j < out; ++j) g.db[j] += dy[s * out + j];
  if (need_dx) {
    g.dx = Tensor(x.shape());
    parallel_for(n, [&](std::size_t s) {
      const double* dys = dy.data() + s * out;
      double* dxs = g.dx.data() + s * in;
      for (std::size_t i = 0; i < in; ++i) {
        const double* wr = w.data() + i * out;
        double acc = 0.0;
        for (std::size_t j = 0; j < out; ++j) acc += wr[j] * dys[j];
        dxs[i] = acc;
      }
    });
  }
  return g;
}

void relu_inplace(Tensor& x) {
  for (double& v : x.values()) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(Tensor& dy, const Tensor& y) {
  for (std::size_t i = 0; i < dy.size(); ++i)
    if (!(y[i] > 0.0)) dy[i] = 0.0;
}

Tensor dropout_forward(const Tensor& x, double rate, bool training, std::mt19937_64& rng,
                       Tensor* mask) {
  require(rate >= 0.0 && rate < 1.0, "dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) {
    if (mask != nullptr) *mask = Tensor(x.shape(), 1.0);
    return x;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor m(x.shape());
  Tensor y(x.shape());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    m[i] = u(rng) < rate ? 0.0 : keep_scale;
    y[i] = x[i] * m[i];
  }
  if (mask != nullptr) *mask = std::move(m);
  return y;
}

Tensor batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         Tensor& running_mean, Tensor& running_var, bool training,
                         double momentum, double epsilon, BatchNormCache* cache) {
  if (!training) return batchnorm_infer(x, gamma, beta, running_mean, running_var, epsilon);
  require(x.rank() >= 2, "batch norm input needs a batch axis");
  const std::size_t n = x.dim(0);
  const std::size_t d = x.stride0();
  require(n >= 2, "batch norm in training mode needs a batch of at least 2");
  require(gamma.size() == d && beta.size() == d, "batch norm parameter size mismatch");

  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x[s * d + j];
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = x[s * d + j] - mean[j];
      var[j] += c * c;
    }
  for (double& v : var) v /= static_cast<double>(n);

  BatchNormCache local;
  BatchNormCache& c = cache != nullptr ? *cache : local;
  c.xhat = Tensor(x.shape());
  c.inv_std.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) c.inv_std[j] = 1.0 / std::sqrt(var[j] + epsilon);

  Tensor y(x.shape());
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (x[s * d + j] - mean[j]) * c.inv_std[j];
      c.xhat[s * d + j] = xh;
      y[s * d + j] = gamma[j] * xh + beta[j];
    }
  for (std::size_t j = 0; j < d; ++j) {
    running_mean[j] = momentum * running_mean[j] + (1.0 - momentum) * mean[j];
    running_var[j] = momentum * running_var[j] + (1.0 - momentum) * var[j];
  }
  return y;
}

Tensor batchnorm_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       const Tensor& running_mean, const Tensor& running_var, double epsilon) {
  require(x.rank() >= 2, "batch norm input needs a batch axis");
  const std::size_t n = x.dim(0);
  const std::size_t d = x.stride0();
  require(gamma.size() == d && running_mean.size() == d, "batch norm parameter size mismatch");
  Tensor y(x.shape());
  for (std::size_t j = 0; j < d; ++j) {
    const double inv = 1.0 / std::sqrt(running_var[j] + epsilon);
    for (std::size_t s = 0; s < n; ++s)
      y[s * d + j] = gamma[j] * (x[s * d + j] - running_mean[j]) * inv + beta[j];
  }
  return y;
}

BatchNormGrads batchnorm_backward(const Tensor& dy, const Tensor& gamma, const BatchNormCache& cache) {
  const std::size_t n = dy.dim(0);
  const std::size_t d = dy.stride0();
  require(cache.xhat.size() == dy.size(), "batch norm cache does not match the gradient");
  BatchNormGrads g;
  g.dgamma = Tensor({d});
  g.dbeta = Tensor({d});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t j = 0; j < d; ++j) {
      g.dgamma[j] += dy[s * d + j] * cache.xhat[s * d + j];
      g.dbeta[j] += dy[s * d + j];
    }
  g.dx = Tensor(dy.shape());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < d; ++j) {
    // dxhat = dy * gamma; sums over the batch reuse dgamma/dbeta
    const double sum_dxhat = gamma[j] * g.dbeta[j];
    const double sum_dxhat_xhat = gamma[j] * g.dgamma[j];
    for (std::size_t s = 0; s < n; ++s) {
      const double dxhat = dy[s * d + j] * gamma[j];
      g.dx[s * d + j] = cache.inv_std[j] * inv_n *
                        (static_cast<double>(n) * dxhat - sum_dxhat -
                         cache.xhat[s * d + j] * sum_dxhat_xhat);
    }
  }
  return g;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

Tensor softmax_rows(const Tensor& logits) {
  require(logits.rank() == 2, "softmax expects [N,K] logits");
  Tensor p(logits.shape());
  for (std::size_t s = 0; s < logits.dim(0); ++s) {
    const auto row = softmax(logits.slice0(s));
    std::copy(row.begin(), row.end(), p.slice0(s).begin());
  }
  return p;
}

}  // namespace lrisk::nn
