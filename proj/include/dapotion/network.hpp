#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dapotion/layers.hpp"

namespace dapotion::nn {

struct ClassifierConfig {
  int input_channels = 0;
  int num_classes = 0;
  int blocks = 3;
  int convs_per_block = 2;  // strides (1, 2) within each block
  int kernel = 3;
  std::vector<int> filters{32, 64, 128};
  double dropout_p = 0.25;
  int epochs = 100;
  int batch_size = 8;
  double lr_init = 1e-3;
  double lr_decay = 0.97;  // per epoch
  std::uint64_t seed = 0;

  friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

void validate(const ClassifierConfig& cfg);

/// Effective learning rate during epoch `epoch` (0-based).
inline double lr_at_epoch(double lr_init, double lr_decay, int epoch) {
  return lr_init * std::pow(lr_decay, epoch);
}

/// Shallow 3D CNN: `blocks` x [conv s1, conv s2], each conv followed by
/// dropout, batchnorm and ReLU; then global average pooling and a dense
/// layer. `logits` stops before the softmax.
template <typename T>
class Network {
 public:
  struct ConvUnit {
    Conv3d<T> conv;
    Dropout<T> dropout;
    BatchNorm3d<T> bn;
    ReLU<T> relu;
  };

  explicit Network(const ClassifierConfig& cfg) : cfg_(cfg), dense_("dense", 1, 1) {
    validate(cfg);
    int in = cfg.input_channels;
    for (int b = 0; b < cfg.blocks; ++b) {
      for (int k = 0; k < 2; ++k) {
        const std::string name = "block" + std::to_string(b) + ".conv" + std::to_string(k);
        const int stride = k == 0 ? 1 : 2;
        units_.push_back(ConvUnit{Conv3d<T>(name, in, cfg.filters[b], stride), Dropout<T>(cfg.dropout_p),
                                  BatchNorm3d<T>(name + ".bn", cfg.filters[b]), ReLU<T>()});
        in = cfg.filters[b];
      }
    }
    dense_ = Dense<T>("dense", in, cfg.num_classes);
  }

  const ClassifierConfig& config() const { return cfg_; }

  /// Xavier-uniform weights, zero biases, identity batchnorm.
  void init(std::uint64_t seed) {
    Rng rng(seed);
    auto fill = [&](Param<T>& p, double fan_in, double fan_out) {
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (T& v : p.value) v = static_cast<T>(bound * (2.0 * rng.uniform() - 1.0));
    };
    constexpr int taps = Conv3d<T>::kTaps;
    for (ConvUnit& u : units_) {
      fill(u.conv.weight(), double(u.conv.in_channels()) * taps, double(u.conv.out_channels()) * taps);
      std::fill(u.conv.bias().value.begin(), u.conv.bias().value.end(), T(0));
      std::fill(u.bn.gamma().value.begin(), u.bn.gamma().value.end(), T(1));
      std::fill(u.bn.beta().value.begin(), u.bn.beta().value.end(), T(0));
      std::fill(u.bn.running_mean().value.begin(), u.bn.running_mean().value.end(), T(0));
      std::fill(u.bn.running_var().value.begin(), u.bn.running_var().value.end(), T(1));
    }
    fill(dense_.weight(), dense_.in_features(), dense_.out_features());
    std::fill(dense_.bias().value.begin(), dense_.bias().value.end(), T(0));
  }

  /// Each spatial extent must be 1 or divisible by 2^blocks.
  void check_input(const Shape5& s) const {
    if (s.c != cfg_.input_channels)
      throw ShapeError("input has " + std::to_string(s.c) + " channels, network expects " +
                       std::to_string(cfg_.input_channels));
    const int factor = 1 << cfg_.blocks;
    for (int e : {s.w, s.h, s.d})
      if (e < 1 || (e != 1 && e % factor != 0))
        throw ShapeError("spatial extent " + std::to_string(e) + " is not divisible by " + std::to_string(factor));
  }

  Tensor5<T> logits(const Tensor5<T>& x, const Context& ctx) {
    check_input(x.shape());
    block_shapes_.clear();
    Tensor5<T> h = x;
    for (std::size_t i = 0; i < units_.size(); ++i) {
      ConvUnit& u = units_[i];
      h = u.conv.forward(h);
      h = u.dropout.forward(h, ctx);
      h = u.bn.forward(h, ctx);
      h = u.relu.forward(h);
#ifndef NDEBUG
      if (!all_finite(h)) throw Error("non-finite activation after " + u.conv.weight().name);
#endif
      if (i % 2 == 1) block_shapes_.push_back(h.shape());
    }
    h = pool_.forward(h);
    h = dense_.forward(h);
    if (!all_finite(h)) throw Error("non-finite logits");
    return h;
  }

  Tensor5<T> probabilities(const Tensor5<T>& x, const Context& ctx) { return softmax(logits(x, ctx)); }

  /// Zeroes gradients, runs forward and backward, returns the mean loss.
  double forward_backward(const Tensor5<T>& x, std::span<const int> labels, const Context& ctx) {
    zero_grad();
    const double loss = loss_.forward(logits(x, ctx), labels);
    backward(loss_.backward(), false);
    return loss;
  }

  /// Backpropagates d(loss)/d(logits) through the last forward pass and
  /// returns d(loss)/d(input), or an empty tensor when `input_grad` is false.
  Tensor5<T> backward(const Tensor5<T>& dlogits, bool input_grad = true) {
    Tensor5<T> g = dense_.backward(dlogits);
    g = pool_.backward(g);
    for (auto it = units_.rbegin(); it != units_.rend(); ++it) {
      g = it->relu.backward(g);
      g = it->bn.backward(g);
      g = it->dropout.backward(g);
      g = it->conv.backward(g, input_grad || std::next(it) != units_.rend());
    }
    return g;
  }

  void zero_grad() {
    for (Param<T>* p : params()) p->zero_grad();
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    for (ConvUnit& u : units_) {
      out.push_back(&u.conv.weight());
      out.push_back(&u.conv.bias());
      out.push_back(&u.bn.gamma());
      out.push_back(&u.bn.beta());
    }
    out.push_back(&dense_.weight());
    out.push_back(&dense_.bias());
    return out;
  }

  std::vector<Buffer<T>*> buffers() {
    std::vector<Buffer<T>*> out;
    for (ConvUnit& u : units_) {
      out.push_back(&u.bn.running_mean());
      out.push_back(&u.bn.running_var());
    }
    return out;
  }

  std::vector<ConvUnit>& units() { return units_; }
  Dense<T>& dense() { return dense_; }
  const SoftmaxCrossEntropy<T>& loss() const { return loss_; }
  /// Output shape of each block in the last forward pass.
  const std::vector<Shape5>& block_shapes() const { return block_shapes_; }

 private:
  ClassifierConfig cfg_;
  std::vector<ConvUnit> units_;
  GlobalAvgPool<T> pool_;
  Dense<T> dense_;
  SoftmaxCrossEntropy<T> loss_;
  std::vector<Shape5> block_shapes_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment estimates are kept in double.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<Param<T>*>& params, double lr) {
    if (m_.empty()) {
      for (const Param<T>* p : params) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
      }
    }
    if (m_.size() != params.size()) throw ShapeError("optimizer state does not match parameter list");
    ++steps_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Param<T>& p = *params[k];
      if (p.grad.size() != m_[k].size()) throw ShapeError("gradient shape mismatch for " + p.name);
      std::vector<double>& m = m_[k];
      std::vector<double>& v = v_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        p.value[i] = static_cast<T>(p.value[i] - lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

  long steps() const { return steps_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  AdamConfig cfg_;
  long steps_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace dapotion::nn
