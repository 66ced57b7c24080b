#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "stgcn/common.hpp"
#include "stgcn/tensor.hpp"

// Building blocks of the network: small fixed set of layers with explicit
// forward/backward passes. Reverse-mode differentiation is written by hand
// per layer; the model chains them in block order.

namespace stgcn {

template <typename S>
struct Param {
  Tensor<S> value;
  Tensor<S> grad;  // allocated on first zero_grad()
  bool trainable = true;

  void zero_grad() {
    if (grad.shape != value.shape) grad = Tensor<S>(value.shape);
    grad.fill(S(0));
  }
};

template <typename S>
using ParamVisitor = std::function<void(const std::string&, Param<S>&)>;

template <typename S>
using BufferVisitor = std::function<void(const std::string&, Tensor<S>&)>;

namespace nn {

// Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)), drawn in
// double and cast so float and double models share initial values.
template <typename S>
void init_uniform(Tensor<S>& t, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(double(std::max(1, fan_in)));
  for (auto& x : t.data) x = S(rng.uniform(-bound, bound));
}

template <typename S>
void accumulate(Tensor<S>& acc, const Tensor<S>& t) {
  for (std::size_t i = 0; i < acc.numel(); ++i) acc[i] += t[i];
}

// --------------------------------------------------------------------------
// Graph convolution: per frame, output joint j aggregates its partition
// neighborhoods, each with its own channel-mixing weights.
//   y[n,co,t,j] = bias[co] + sum_p sum_ci W[p,co,ci] * xa_p[n,ci,t,j]
//   xa_p[n,ci,t,j] = sum_i A_p[j,i] * x[n,ci,t,i]
template <typename S>
struct GraphConv {
  Param<S> weight;  // [P, Cout, Cin]
  Param<S> bias;    // [Cout]

  // caches for backward
  Tensor<S> x_in;             // [N, Cin, T, V]
  std::vector<Tensor<S>> xa;  // per partition [N, Cin, T, V]

  void build(int partitions, int in_channels, int out_channels, Rng& rng) {
    weight.value = Tensor<S>({partitions, out_channels, in_channels});
    bias.value = Tensor<S>({out_channels});
    init_uniform(weight.value, in_channels, rng);
    init_uniform(bias.value, in_channels, rng);
  }

  Tensor<S> forward(const Tensor<S>& x, const Tensor<S>& adj, bool cache) {
    const int n = x.dim(0), ci = x.dim(1), t = x.dim(2), v = x.dim(3);
    const int p = adj.dim(0);
    const int co = weight.value.dim(1);
    std::vector<Tensor<S>> agg(p);
    for (int pp = 0; pp < p; ++pp) {
      agg[pp] = Tensor<S>({n, ci, t, v});
      const S* a = adj.ptr() + std::size_t(pp) * v * v;
      for (int nn_ = 0; nn_ < n; ++nn_) {
        for (int c = 0; c < ci; ++c) {
          for (int tt = 0; tt < t; ++tt) {
            const S* xs = &x.at4(nn_, c, tt, 0);
            S* ys = &agg[pp].at4(nn_, c, tt, 0);
            for (int j = 0; j < v; ++j) {
              S acc = S(0);
              const S* row = a + std::size_t(j) * v;
              for (int i = 0; i < v; ++i) acc += row[i] * xs[i];
              ys[j] = acc;
            }
          }
        }
      }
    }
    Tensor<S> y({n, co, t, v});
    for (int nn_ = 0; nn_ < n; ++nn_) {
      for (int o = 0; o < co; ++o) {
        const S b = bias.value[o];
        for (int tt = 0; tt < t; ++tt) {
          S* ys = &y.at4(nn_, o, tt, 0);
          for (int j = 0; j < v; ++j) ys[j] = b;
          for (int pp = 0; pp < p; ++pp) {
            const S* w = &weight.value.at3(pp, o, 0);
            for (int c = 0; c < ci; ++c) {
              const S wv = w[c];
              if (wv == S(0)) continue;
              const S* xs = &agg[pp].at4(nn_, c, tt, 0);
              for (int j = 0; j < v; ++j) ys[j] += wv * xs[j];
            }
          }
        }
      }
    }
    if (cache) {
      x_in = x;
      xa = std::move(agg);
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy, const Tensor<S>& adj) {
    const int n = x_in.dim(0), ci = x_in.dim(1), t = x_in.dim(2), v = x_in.dim(3);
    const int p = adj.dim(0);
    const int co = weight.value.dim(1);
    // bias
    for (int nn_ = 0; nn_ < n; ++nn_)
      for (int o = 0; o < co; ++o) {
        S acc = S(0);
        for (int tt = 0; tt < t; ++tt) {
          const S* ds = &dy.at4(nn_, o, tt, 0);
          for (int j = 0; j < v; ++j) acc += ds[j];
        }
        bias.grad[o] += acc;
      }
    // weight and d(xa)
    std::vector<Tensor<S>> dxa(p);
    for (int pp = 0; pp < p; ++pp) dxa[pp] = Tensor<S>({n, ci, t, v});
    for (int pp = 0; pp < p; ++pp) {
      for (int nn_ = 0; nn_ < n; ++nn_) {
        for (int o = 0; o < co; ++o) {
          const S* w = &weight.value.at3(pp, o, 0);
          S* wg = &weight.grad.at3(pp, o, 0);
          for (int tt = 0; tt < t; ++tt) {
            const S* ds = &dy.at4(nn_, o, tt, 0);
            for (int c = 0; c < ci; ++c) {
              const S* xs = &xa[pp].at4(nn_, c, tt, 0);
              S* dxs = &dxa[pp].at4(nn_, c, tt, 0);
              const S wv = w[c];
              S acc = S(0);
              for (int j = 0; j < v; ++j) {
                acc += ds[j] * xs[j];
                dxs[j] += ds[j] * wv;
              }
              wg[c] += acc;
            }
          }
        }
      }
    }
    // dx[n,ci,t,i] = sum_p sum_j A_p[j,i] * dxa_p[n,ci,t,j]
    Tensor<S> dx({n, ci, t, v});
    for (int pp = 0; pp < p; ++pp) {
      const S* a = adj.ptr() + std::size_t(pp) * v * v;
      for (int nn_ = 0; nn_ < n; ++nn_) {
        for (int c = 0; c < ci; ++c) {
          for (int tt = 0; tt < t; ++tt) {
            const S* ds = &dxa[pp].at4(nn_, c, tt, 0);
            S* xs = &dx.at4(nn_, c, tt, 0);
            for (int j = 0; j < v; ++j) {
              const S dv = ds[j];
              if (dv == S(0)) continue;
              const S* row = a + std::size_t(j) * v;
              for (int i = 0; i < v; ++i) xs[i] += row[i] * dv;
            }
          }
        }
      }
    }
    return dx;
  }
};

// --------------------------------------------------------------------------
// Batch normalization over (N, T, V) per channel. Running statistics keep a
// 0.9 fraction of the old value; normalization uses the population variance.
// A frozen layer behaves as eval even during training, so freezing a block
// is bitwise-meaningful.
template <typename S>
struct BatchNorm {
  Param<S> gamma, beta;
  Tensor<S> running_mean, running_var;
  bool stats_frozen = false;

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.9;

  // caches
  Tensor<S> xhat;
  std::vector<S> inv_std;
  bool used_batch_stats = false;

  void build(int channels) {
    gamma.value = Tensor<S>({channels});
    gamma.value.fill(S(1));
    beta.value = Tensor<S>({channels});
    reset_running_stats();
  }

  void reset_running_stats() {
    running_mean = Tensor<S>(gamma.value.shape);
    running_var = Tensor<S>(gamma.value.shape);
    running_var.fill(S(1));
  }

  Tensor<S> forward(const Tensor<S>& x, bool train, bool cache) {
    const int n = x.dim(0), ch = x.dim(1), t = x.dim(2), v = x.dim(3);
    const std::size_t plane = std::size_t(t) * v;
    const std::size_t m = std::size_t(n) * plane;
    const bool batch_stats = train && !stats_frozen;
    Tensor<S> y(x.shape);
    if (cache) {
      xhat = Tensor<S>(x.shape);
      inv_std.assign(ch, S(0));
      used_batch_stats = batch_stats;
    }
    for (int c = 0; c < ch; ++c) {
      S mean, var;
      if (batch_stats) {
        double acc = 0.0;
        for (int nn_ = 0; nn_ < n; ++nn_) {
          const S* xs = &x.at4(nn_, c, 0, 0);
          for (std::size_t i = 0; i < plane; ++i) acc += double(xs[i]);
        }
        mean = S(acc / double(m));
        double vacc = 0.0;
        for (int nn_ = 0; nn_ < n; ++nn_) {
          const S* xs = &x.at4(nn_, c, 0, 0);
          for (std::size_t i = 0; i < plane; ++i) {
            const double d = double(xs[i]) - double(mean);
            vacc += d * d;
          }
        }
        var = S(vacc / double(m));
        running_mean[c] = S(kMomentum) * running_mean[c] + S(1.0 - kMomentum) * mean;
        running_var[c] = S(kMomentum) * running_var[c] + S(1.0 - kMomentum) * var;
      } else {
        mean = running_mean[c];
        var = running_var[c];
      }
      const S istd = S(1.0 / std::sqrt(double(var) + kEps));
      const S g = gamma.value[c], b = beta.value[c];
      for (int nn_ = 0; nn_ < n; ++nn_) {
        const S* xs = &x.at4(nn_, c, 0, 0);
        S* ys = &y.at4(nn_, c, 0, 0);
        S* hs = cache ? &xhat.at4(nn_, c, 0, 0) : nullptr;
        for (std::size_t i = 0; i < plane; ++i) {
          const S h = (xs[i] - mean) * istd;
          if (hs) hs[i] = h;
          ys[i] = g * h + b;
        }
      }
      if (cache) inv_std[c] = istd;
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) {
    const int n = dy.dim(0), ch = dy.dim(1), t = dy.dim(2), v = dy.dim(3);
    const std::size_t plane = std::size_t(t) * v;
    const double m = double(n) * double(plane);
    Tensor<S> dx(dy.shape);
    for (int c = 0; c < ch; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int nn_ = 0; nn_ < n; ++nn_) {
        const S* ds = &dy.at4(nn_, c, 0, 0);
        const S* hs = &xhat.at4(nn_, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) {
          sum_dy += double(ds[i]);
          sum_dy_xhat += double(ds[i]) * double(hs[i]);
        }
      }
      gamma.grad[c] += S(sum_dy_xhat);
      beta.grad[c] += S(sum_dy);
      const S g_istd = gamma.value[c] * inv_std[c];
      if (used_batch_stats) {
        const S mean_dy = S(sum_dy / m);
        const S mean_dy_xhat = S(sum_dy_xhat / m);
        for (int nn_ = 0; nn_ < n; ++nn_) {
          const S* ds = &dy.at4(nn_, c, 0, 0);
          const S* hs = &xhat.at4(nn_, c, 0, 0);
          S* xs = &dx.at4(nn_, c, 0, 0);
          for (std::size_t i = 0; i < plane; ++i)
            xs[i] = g_istd * (ds[i] - mean_dy - hs[i] * mean_dy_xhat);
        }
      } else {
        for (int nn_ = 0; nn_ < n; ++nn_) {
          const S* ds = &dy.at4(nn_, c, 0, 0);
          S* xs = &dx.at4(nn_, c, 0, 0);
          for (std::size_t i = 0; i < plane; ++i) xs[i] = g_istd * ds[i];
        }
      }
    }
    return dx;
  }
};

// --------------------------------------------------------------------------
// Temporal convolution: 1-D convolution over frames, per joint, with
// symmetric zero padding (K-1)/2. T_out = ceil(T / stride).
template <typename S>
struct TemporalConv {
  Param<S> weight;  // [Cout, Cin, K]
  Param<S> bias;    // [Cout]
  int kernel = 9;
  int stride = 1;

  Tensor<S> x_in;

  void build(int in_channels, int out_channels, int k, int s, Rng& rng) {
    kernel = k;
    stride = s;
    weight.value = Tensor<S>({out_channels, in_channels, k});
    bias.value = Tensor<S>({out_channels});
    init_uniform(weight.value, in_channels * k, rng);
    init_uniform(bias.value, in_channels * k, rng);
  }

  int out_frames(int t) const {
    const int pad = (kernel - 1) / 2;
    return (t + 2 * pad - kernel) / stride + 1;
  }

  Tensor<S> forward(const Tensor<S>& x, bool cache) {
    const int n = x.dim(0), ci = x.dim(1), t = x.dim(2), v = x.dim(3);
    const int co = weight.value.dim(0);
    const int pad = (kernel - 1) / 2;
    const int to = out_frames(t);
    Tensor<S> y({n, co, to, v});
    for (int nn_ = 0; nn_ < n; ++nn_) {
      for (int o = 0; o < co; ++o) {
        const S b = bias.value[o];
        for (int tt = 0; tt < to; ++tt) {
          S* ys = &y.at4(nn_, o, tt, 0);
          for (int j = 0; j < v; ++j) ys[j] = b;
          const int t0 = tt * stride - pad;
          for (int c = 0; c < ci; ++c) {
            const S* w = &weight.value.at3(o, c, 0);
            for (int k = 0; k < kernel; ++k) {
              const int ti = t0 + k;
              if (ti < 0 || ti >= t) continue;
              const S wv = w[k];
              const S* xs = &x.at4(nn_, c, ti, 0);
              for (int j = 0; j < v; ++j) ys[j] += wv * xs[j];
            }
          }
        }
      }
    }
    if (cache) x_in = x;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) {
    const int n = x_in.dim(0), ci = x_in.dim(1), t = x_in.dim(2), v = x_in.dim(3);
    const int co = weight.value.dim(0);
    const int pad = (kernel - 1) / 2;
    const int to = dy.dim(2);
    Tensor<S> dx({n, ci, t, v});
    for (int nn_ = 0; nn_ < n; ++nn_) {
      for (int o = 0; o < co; ++o) {
        S bacc = S(0);
        for (int tt = 0; tt < to; ++tt) {
          const S* ds = &dy.at4(nn_, o, tt, 0);
          for (int j = 0; j < v; ++j) bacc += ds[j];
          const int t0 = tt * stride - pad;
          for (int c = 0; c < ci; ++c) {
            const S* w = &weight.value.at3(o, c, 0);
            S* wg = &weight.grad.at3(o, c, 0);
            for (int k = 0; k < kernel; ++k) {
              const int ti = t0 + k;
              if (ti < 0 || ti >= t) continue;
              const S* xs = &x_in.at4(nn_, c, ti, 0);
              S* dxs = &dx.at4(nn_, c, ti, 0);
              const S wv = w[k];
              S acc = S(0);
              for (int j = 0; j < v; ++j) {
                acc += ds[j] * xs[j];
                dxs[j] += ds[j] * wv;
              }
              wg[k] += acc;
            }
          }
        }
        bias.grad[o] += bacc;
      }
    }
    return dx;
  }
};

// --------------------------------------------------------------------------
template <typename S>
struct Dense {
  Param<S> weight;  // [out, in]
  Param<S> bias;    // [out]

  Tensor<S> x_in;

  void build(int in_features, int out_features, Rng& rng) {
    weight.value = Tensor<S>({out_features, in_features});
    bias.value = Tensor<S>({out_features});
    init_uniform(weight.value, in_features, rng);
    init_uniform(bias.value, in_features, rng);
  }

  Tensor<S> forward(const Tensor<S>& x, bool cache) {
    const int n = x.dim(0), in = x.dim(1);
    const int out = weight.value.dim(0);
    Tensor<S> y({n, out});
    for (int nn_ = 0; nn_ < n; ++nn_) {
      const S* xs = &x.at2(nn_, 0);
      for (int o = 0; o < out; ++o) {
        const S* w = &weight.value.at2(o, 0);
        S acc = bias.value[o];
        for (int i = 0; i < in; ++i) acc += w[i] * xs[i];
        y.at2(nn_, o) = acc;
      }
    }
    if (cache) x_in = x;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) {
    const int n = x_in.dim(0), in = x_in.dim(1);
    const int out = weight.value.dim(0);
    Tensor<S> dx({n, in});
    for (int nn_ = 0; nn_ < n; ++nn_) {
      const S* xs = &x_in.at2(nn_, 0);
      S* dxs = &dx.at2(nn_, 0);
      const S* ds = &dy.at2(nn_, 0);
      for (int o = 0; o < out; ++o) {
        const S d = ds[o];
        if (d == S(0)) continue;
        const S* w = &weight.value.at2(o, 0);
        S* wg = &weight.grad.at2(o, 0);
        for (int i = 0; i < in; ++i) {
          wg[i] += d * xs[i];
          dxs[i] += d * w[i];
        }
        bias.grad[o] += d;
      }
    }
    return dx;
  }
};

// --------------------------------------------------------------------------
template <typename S>
struct ReluCache {
  Tensor<S> mask;  // 1 where input > 0

  Tensor<S> forward(const Tensor<S>& x, bool cache) {
    Tensor<S> y(x.shape);
    if (cache) mask = Tensor<S>(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const bool pos = x[i] > S(0);
      y[i] = pos ? x[i] : S(0);
      if (cache) mask[i] = pos ? S(1) : S(0);
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) const {
    Tensor<S> dx(dy.shape);
    for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] = dy[i] * mask[i];
    return dx;
  }
};

// Inverted dropout; identity in eval mode or at rate 0.
template <typename S>
struct DropoutCache {
  Tensor<S> mask;

  Tensor<S> forward(const Tensor<S>& x, double rate, bool train, Rng& rng, bool cache) {
    if (!train || rate <= 0.0) {
      if (cache) mask = Tensor<S>();
      return x;
    }
    const S keep_scale = S(1.0 / (1.0 - rate));
    Tensor<S> y(x.shape);
    if (cache) mask = Tensor<S>(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const bool keep = rng.next_double() >= rate;
      const S m = keep ? keep_scale : S(0);
      if (cache) mask[i] = m;
      y[i] = x[i] * m;
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) const {
    if (mask.empty()) return dy;
    Tensor<S> dx(dy.shape);
    for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] = dy[i] * mask[i];
    return dx;
  }
};

// --------------------------------------------------------------------------
// Mean softmax cross-entropy. Returns the loss; dlogits, when requested,
// holds (softmax - onehot) / N.
template <typename S>
double softmax_cross_entropy(const Tensor<S>& logits, const std::vector<int>& labels,
                             Tensor<S>* dlogits = nullptr) {
  const int n = logits.dim(0), k = logits.dim(1);
  if (int(labels.size()) != n) throw ConfigError("loss: labels/logits size mismatch");
  if (dlogits) *dlogits = Tensor<S>(logits.shape);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const S* z = &logits.at2(i, 0);
    double zmax = double(z[0]);
    for (int c = 1; c < k; ++c) zmax = std::max(zmax, double(z[c]));
    double sum = 0.0;
    for (int c = 0; c < k; ++c) sum += std::exp(double(z[c]) - zmax);
    const double lse = zmax + std::log(sum);
    const int y = labels[i];
    if (y < 0 || y >= k) throw DataError("loss: label out of range");
    total += lse - double(z[y]);
    if (dlogits) {
      S* d = &dlogits->at2(i, 0);
      for (int c = 0; c < k; ++c) {
        const double p = std::exp(double(z[c]) - lse);
        d[c] = S((p - (c == y ? 1.0 : 0.0)) / n);
      }
    }
  }
  return total / n;
}

template <typename S>
std::vector<int> argmax_rows(const Tensor<S>& logits) {
  const int n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(n, 0);
  for (int i = 0; i < n; ++i) {
    const S* z = &logits.at2(i, 0);
    int best = 0;
    for (int c = 1; c < k; ++c)
      if (z[c] > z[best]) best = c;
    out[i] = best;
  }
  return out;
}

}  // namespace nn
}  // namespace stgcn
