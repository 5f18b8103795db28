#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dapotion/rng.hpp"
#include "dapotion/tensor.hpp"

namespace dapotion::nn {

struct Context {
  bool train = false;
  Rng* rng = nullptr;  // required in train mode when dropout is active
};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// 3x3x3 convolution, zero padding 1. Output extent per axis is
/// (n - 1) / stride + 1, i.e. n for stride 1 and ceil(n / 2) for stride 2.
template <typename T>
class Conv3d {
 public:
  static constexpr int kKernel = 3;
  static constexpr int kTaps = kKernel * kKernel * kKernel;

  Conv3d(std::string name, int in_channels, int out_channels, int stride)
      : in_(in_channels),
        out_(out_channels),
        stride_(stride),
        weight_(name + ".weight", {out_channels, in_channels, kKernel, kKernel, kKernel}),
        bias_(name + ".bias", {out_channels}) {}

  static int output_extent(int n, int stride) { return (n - 1) / stride + 1; }

  Shape5 output_shape(const Shape5& s) const {
    return {s.n, out_, output_extent(s.w, stride_), output_extent(s.h, stride_), output_extent(s.d, stride_)};
  }

  Tensor5<T> forward(const Tensor5<T>& x) {
    if (x.shape().c != in_) throw ShapeError(weight_.name + ": expected " + std::to_string(in_) + " input channels, got " + std::to_string(x.shape().c));
    input_ = x;
    const Shape5 os = output_shape(x.shape());
    Tensor5<T> y(os);
    const Eigen::Index rows = static_cast<Eigen::Index>(in_) * kTaps;
    const Eigen::Index cols = static_cast<Eigen::Index>(os.spatial());
    cols_.resize(static_cast<std::size_t>(rows * cols));
    Eigen::Map<const RowMat<T>> w(weight_.value.data(), out_, rows);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias_.value.data(), out_);
    for (int n = 0; n < x.shape().n; ++n) {
      im2col(x, n, os);
      Eigen::Map<const RowMat<T>> c(cols_.data(), rows, cols);
      Eigen::Map<RowMat<T>> out(y.sample(n), out_, cols);
      out.noalias() = w * c;
      out.colwise() += b;
    }
    return y;
  }

  /// Accumulates parameter gradients. The input gradient is skipped (and an
  /// empty tensor returned) when `input_grad` is false.
  Tensor5<T> backward(const Tensor5<T>& dy, bool input_grad = true) {
    const Shape5 is = input_.shape();
    const Shape5 os = dy.shape();
    Tensor5<T> dx(input_grad ? is : Shape5{});
    const Eigen::Index rows = static_cast<Eigen::Index>(in_) * kTaps;
    const Eigen::Index cols = static_cast<Eigen::Index>(os.spatial());
    Eigen::Map<const RowMat<T>> w(weight_.value.data(), out_, rows);
    Eigen::Map<RowMat<T>> dw(weight_.grad.data(), out_, rows);
    std::vector<T> dcols(input_grad ? static_cast<std::size_t>(rows * cols) : 0);
    for (int n = 0; n < is.n; ++n) {
      im2col(input_, n, os);
      Eigen::Map<const RowMat<T>> c(cols_.data(), rows, cols);
      Eigen::Map<const RowMat<T>> g(dy.sample(n), out_, cols);
      dw.noalias() += g * c.transpose();
      for (int o = 0; o < out_; ++o) {
        T acc = T(0);
        for (Eigen::Index p = 0; p < cols; ++p) acc += g(o, p);
        bias_.grad[o] += acc;
      }
      if (!input_grad) continue;
      Eigen::Map<RowMat<T>> dc(dcols.data(), rows, cols);
      dc.noalias() = w.transpose() * g;
      col2im(dcols, dx, n, os);
    }
    return dx;
  }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  int stride() const { return stride_; }
  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

 private:
  void im2col(const Tensor5<T>& x, int n, const Shape5& os) {
    const Shape5& is = x.shape();
    const std::size_t cols = os.spatial();
    T* dst = cols_.data();
    for (int ci = 0; ci < in_; ++ci) {
      const T* src = x.plane(n, ci);
      for (int kx = 0; kx < kKernel; ++kx)
        for (int ky = 0; ky < kKernel; ++ky)
          for (int kz = 0; kz < kKernel; ++kz) {
            T* row = dst;
            for (int ox = 0; ox < os.w; ++ox) {
              const int ix = ox * stride_ - 1 + kx;
              for (int oy = 0; oy < os.h; ++oy) {
                const int iy = oy * stride_ - 1 + ky;
                T* out = row + (static_cast<std::size_t>(ox) * os.h + oy) * os.d;
                if (ix < 0 || ix >= is.w || iy < 0 || iy >= is.h) {
                  std::fill(out, out + os.d, T(0));
                  continue;
                }
                const T* line = src + (static_cast<std::size_t>(ix) * is.h + iy) * is.d;
                for (int oz = 0; oz < os.d; ++oz) {
                  const int iz = oz * stride_ - 1 + kz;
                  out[oz] = (iz >= 0 && iz < is.d) ? line[iz] : T(0);
                }
              }
            }
            dst += cols;
          }
    }
  }

  void col2im(const std::vector<T>& dcols, Tensor5<T>& dx, int n, const Shape5& os) const {
    const Shape5& is = dx.shape();
    const std::size_t cols = os.spatial();
    const T* src = dcols.data();
    for (int ci = 0; ci < in_; ++ci) {
      T* plane = dx.plane(n, ci);
      for (int kx = 0; kx < kKernel; ++kx)
        for (int ky = 0; ky < kKernel; ++ky)
          for (int kz = 0; kz < kKernel; ++kz) {
            for (int ox = 0; ox < os.w; ++ox) {
              const int ix = ox * stride_ - 1 + kx;
              if (ix < 0 || ix >= is.w) continue;
              for (int oy = 0; oy < os.h; ++oy) {
                const int iy = oy * stride_ - 1 + ky;
                if (iy < 0 || iy >= is.h) continue;
                const T* in = src + (static_cast<std::size_t>(ox) * os.h + oy) * os.d;
                T* line = plane + (static_cast<std::size_t>(ix) * is.h + iy) * is.d;
                for (int oz = 0; oz < os.d; ++oz) {
                  const int iz = oz * stride_ - 1 + kz;
                  if (iz >= 0 && iz < is.d) line[iz] += in[oz];
                }
              }
            }
            src += cols;
          }
    }
  }

  int in_, out_, stride_;
  Param<T> weight_, bias_;
  Tensor5<T> input_;
  std::vector<T> cols_;
};

/// Inverted dropout: survivors are scaled by 1 / (1 - p) in train mode, eval
/// mode is the identity.
template <typename T>
class Dropout {
 public:
  explicit Dropout(double p) : p_(p) {
    if (!(p >= 0.0 && p < 1.0)) throw Error("dropout probability must lie in [0, 1)");
  }

  Tensor5<T> forward(const Tensor5<T>& x, const Context& ctx) {
    if (!ctx.train || p_ == 0.0) {
      active_ = false;
      return x;
    }
    active_ = true;
    if (!fixed_) {
      if (!ctx.rng) throw Error("dropout in train mode needs a random generator");
      const T keep = static_cast<T>(1.0 / (1.0 - p_));
      mask_.resize(x.size());
      for (T& m : mask_) m = ctx.rng->bernoulli(p_) ? T(0) : keep;
    } else if (mask_.size() != x.size()) {
      throw ShapeError("fixed dropout mask has the wrong size");
    }
    Tensor5<T> y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] *= mask_[i];
    return y;
  }

  Tensor5<T> backward(const Tensor5<T>& dy) const {
    if (!active_) return dy;
    Tensor5<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data()[i] *= mask_[i];
    return dx;
  }

  /// Pins the mask (entries 0 or 1/(1-p)) so that train-mode passes are
  /// deterministic; used for gradient checking.
  void fix_mask(std::vector<T> mask) {
    mask_ = std::move(mask);
    fixed_ = true;
  }
  void release_mask() { fixed_ = false; }
  const std::vector<T>& mask() const { return mask_; }
  double p() const { return p_; }

 private:
  double p_;
  bool active_ = false;
  bool fixed_ = false;
  std::vector<T> mask_;
};

/// Per-channel batch normalization over (batch, W, H, D). Running statistics
/// follow an exponential moving average with the unbiased batch variance.
template <typename T>
class BatchNorm3d {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm3d(std::string name, int channels)
      : channels_(channels),
        gamma_(name + ".gamma", {channels}),
        beta_(name + ".beta", {channels}),
        running_mean_{name + ".running_mean", {channels}, std::vector<T>(channels, T(0))},
        running_var_{name + ".running_var", {channels}, std::vector<T>(channels, T(1))} {
    std::fill(gamma_.value.begin(), gamma_.value.end(), T(1));
  }

  Tensor5<T> forward(const Tensor5<T>& x, const Context& ctx) {
    const Shape5& s = x.shape();
    if (s.c != channels_) throw ShapeError(gamma_.name + ": channel mismatch");
    const std::size_t spatial = s.spatial();
    const double count = static_cast<double>(s.n) * spatial;
    train_ = ctx.train;
    inv_std_.assign(channels_, T(0));
    xhat_ = Tensor5<T>(s);
    Tensor5<T> y(s);
    for (int c = 0; c < channels_; ++c) {
      double mean, var;
      if (ctx.train) {
        double sum = 0;
        for (int n = 0; n < s.n; ++n) {
          const T* p = x.plane(n, c);
          for (std::size_t i = 0; i < spatial; ++i) sum += p[i];
        }
        mean = sum / count;
        double sq = 0;
        for (int n = 0; n < s.n; ++n) {
          const T* p = x.plane(n, c);
          for (std::size_t i = 0; i < spatial; ++i) {
            const double dv = p[i] - mean;
            sq += dv * dv;
          }
        }
        var = sq / count;
        const double unbiased = count > 1 ? sq / (count - 1) : var;
        running_mean_.value[c] = static_cast<T>((1 - kMomentum) * running_mean_.value[c] + kMomentum * mean);
        running_var_.value[c] = static_cast<T>((1 - kMomentum) * running_var_.value[c] + kMomentum * unbiased);
      } else {
        mean = running_mean_.value[c];
        var = running_var_.value[c];
      }
      const double inv = 1.0 / std::sqrt(var + kEps);
      inv_std_[c] = static_cast<T>(inv);
      const double g = gamma_.value[c], b = beta_.value[c];
      for (int n = 0; n < s.n; ++n) {
        const T* p = x.plane(n, c);
        T* xh = xhat_.plane(n, c);
        T* out = y.plane(n, c);
        for (std::size_t i = 0; i < spatial; ++i) {
          const double h = (p[i] - mean) * inv;
          xh[i] = static_cast<T>(h);
          out[i] = static_cast<T>(g * h + b);
        }
      }
    }
    return y;
  }

  Tensor5<T> backward(const Tensor5<T>& dy) {
    const Shape5& s = dy.shape();
    const std::size_t spatial = s.spatial();
    const double count = static_cast<double>(s.n) * spatial;
    Tensor5<T> dx(s);
    for (int c = 0; c < channels_; ++c) {
      double sum_dy = 0, sum_dy_xhat = 0;
      for (int n = 0; n < s.n; ++n) {
        const T* g = dy.plane(n, c);
        const T* xh = xhat_.plane(n, c);
        for (std::size_t i = 0; i < spatial; ++i) {
          sum_dy += g[i];
          sum_dy_xhat += static_cast<double>(g[i]) * xh[i];
        }
      }
      gamma_.grad[c] += static_cast<T>(sum_dy_xhat);
      beta_.grad[c] += static_cast<T>(sum_dy);
      const double gamma = gamma_.value[c];
      const double inv = inv_std_[c];
      for (int n = 0; n < s.n; ++n) {
        const T* g = dy.plane(n, c);
        const T* xh = xhat_.plane(n, c);
        T* out = dx.plane(n, c);
        for (std::size_t i = 0; i < spatial; ++i) {
          if (train_) {
            out[i] = static_cast<T>(gamma * inv / count * (count * g[i] - sum_dy - xh[i] * sum_dy_xhat));
          } else {
            out[i] = static_cast<T>(gamma * inv * g[i]);
          }
        }
      }
    }
    return dx;
  }

  Param<T>& gamma() { return gamma_; }
  Param<T>& beta() { return beta_; }
  Buffer<T>& running_mean() { return running_mean_; }
  Buffer<T>& running_var() { return running_var_; }

 private:
  int channels_;
  Param<T> gamma_, beta_;
  Buffer<T> running_mean_, running_var_;
  bool train_ = false;
  std::vector<T> inv_std_;
  Tensor5<T> xhat_;
};

template <typename T>
class ReLU {
 public:
  Tensor5<T> forward(const Tensor5<T>& x) {
    Tensor5<T> y = x;
    mask_.assign(x.size(), 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y.data()[i] > T(0)) mask_[i] = 1;
      else y.data()[i] = T(0);
    }
    return y;
  }

  Tensor5<T> backward(const Tensor5<T>& dy) const {
    Tensor5<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (!mask_[i]) dx.data()[i] = T(0);
    return dx;
  }

 private:
  std::vector<unsigned char> mask_;
};

/// (N, C, W, H, D) -> (N, C, 1, 1, 1).
template <typename T>
class GlobalAvgPool {
 public:
  Tensor5<T> forward(const Tensor5<T>& x) {
    in_shape_ = x.shape();
    Tensor5<T> y({in_shape_.n, in_shape_.c, 1, 1, 1});
    const std::size_t spatial = in_shape_.spatial();
    for (int n = 0; n < in_shape_.n; ++n)
      for (int c = 0; c < in_shape_.c; ++c) {
        const T* p = x.plane(n, c);
        double acc = 0;
        for (std::size_t i = 0; i < spatial; ++i) acc += p[i];
        y(n, c) = static_cast<T>(acc / spatial);
      }
    return y;
  }

  Tensor5<T> backward(const Tensor5<T>& dy) const {
    Tensor5<T> dx(in_shape_);
    const std::size_t spatial = in_shape_.spatial();
    for (int n = 0; n < in_shape_.n; ++n)
      for (int c = 0; c < in_shape_.c; ++c) {
        const T g = static_cast<T>(dy(n, c) / static_cast<double>(spatial));
        T* p = dx.plane(n, c);
        std::fill(p, p + spatial, g);
      }
    return dx;
  }

 private:
  Shape5 in_shape_;
};

/// Fully connected layer on pooled features: (N, C) -> (N, K).
template <typename T>
class Dense {
 public:
  Dense(std::string name, int in_features, int out_features)
      : in_(in_features),
        out_(out_features),
        weight_(name + ".weight", {out_features, in_features}),
        bias_(name + ".bias", {out_features}) {}

  Tensor5<T> forward(const Tensor5<T>& x) {
    if (x.shape().per_sample() != static_cast<std::size_t>(in_)) throw ShapeError(weight_.name + ": feature mismatch");
    input_ = x;
    const int batch = x.shape().n;
    Tensor5<T> y({batch, out_, 1, 1, 1});
    Eigen::Map<const RowMat<T>> w(weight_.value.data(), out_, in_);
    Eigen::Map<const RowMat<T>> xin(x.data(), batch, in_);
    Eigen::Map<RowMat<T>> out(y.data(), batch, out_);
    out.noalias() = xin * w.transpose();
    for (int n = 0; n < batch; ++n)
      for (int k = 0; k < out_; ++k) out(n, k) += bias_.value[k];
    return y;
  }

  Tensor5<T> backward(const Tensor5<T>& dy) {
    const int batch = dy.shape().n;
    Eigen::Map<const RowMat<T>> w(weight_.value.data(), out_, in_);
    Eigen::Map<const RowMat<T>> xin(input_.data(), batch, in_);
    Eigen::Map<const RowMat<T>> g(dy.data(), batch, out_);
    Eigen::Map<RowMat<T>> dw(weight_.grad.data(), out_, in_);
    dw.noalias() += g.transpose() * xin;
    for (int n = 0; n < batch; ++n)
      for (int k = 0; k < out_; ++k) bias_.grad[k] += g(n, k);
    Tensor5<T> dx(input_.shape());
    Eigen::Map<RowMat<T>> dxin(dx.data(), batch, in_);
    dxin.noalias() = g * w;
    return dx;
  }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  int in_features() const { return in_; }
  int out_features() const { return out_; }

 private:
  int in_, out_;
  Param<T> weight_, bias_;
  Tensor5<T> input_;
};

/// Row-wise softmax with max subtraction.
template <typename T>
Tensor5<T> softmax(const Tensor5<T>& logits) {
  const int batch = logits.shape().n;
  const int k = logits.shape().c;
  Tensor5<T> p(logits.shape());
  for (int n = 0; n < batch; ++n) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) mx = std::max(mx, static_cast<double>(logits(n, c)));
    double sum = 0;
    std::vector<double> e(k);
    for (int c = 0; c < k; ++c) sum += e[c] = std::exp(static_cast<double>(logits(n, c)) - mx);
    for (int c = 0; c < k; ++c) p(n, c) = static_cast<T>(e[c] / sum);
  }
  return p;
}

/// Mean cross-entropy of softmax(logits) against integer labels.
template <typename T>
class SoftmaxCrossEntropy {
 public:
  double forward(const Tensor5<T>& logits, std::span<const int> labels) {
    const int batch = logits.shape().n;
    const int k = logits.shape().c;
    if (static_cast<int>(labels.size()) != batch) throw ShapeError("label count does not match batch size");
    labels_.assign(labels.begin(), labels.end());
    probs_ = softmax(logits);
    double loss = 0;
    for (int n = 0; n < batch; ++n) {
      if (labels[n] < 0 || labels[n] >= k) throw Error("label out of range");
      double mx = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) mx = std::max(mx, static_cast<double>(logits(n, c)));
      double sum = 0;
      for (int c = 0; c < k; ++c) sum += std::exp(static_cast<double>(logits(n, c)) - mx);
      loss += std::log(sum) + mx - static_cast<double>(logits(n, labels[n]));
    }
    return loss / batch;
  }

  Tensor5<T> backward() const {
    Tensor5<T> d = probs_;
    const int batch = d.shape().n;
    for (int n = 0; n < batch; ++n) {
      d(n, labels_[n]) -= T(1);
      for (int c = 0; c < d.shape().c; ++c) d(n, c) /= static_cast<T>(batch);
    }
    return d;
  }

  const Tensor5<T>& probabilities() const { return probs_; }

 private:
  std::vector<int> labels_;
  Tensor5<T> probs_;
};

}  // namespace dapotion::nn
