#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fnlearn/nn/tensor.hpp"

namespace fnlearn::nn {

/// Named non-trainable state (batch-norm running statistics).
template <class T>
struct Buffer {
  std::string name;
  Tensor<T>* value;
};

/// A differentiable stage. `forward` caches what `backward` needs; `backward`
/// takes dLoss/dOutput, accumulates parameter gradients, and returns
/// dLoss/dInput.
template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
  virtual void collect_params(std::vector<Param<T>*>&) {}
  virtual void collect_buffers(std::vector<Buffer<T>>&) {}
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual std::string kind() const = 0;
};

template <class T, class Derived>
class LayerBase : public Layer<T> {
 public:
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<Derived>(static_cast<const Derived&>(*this));
  }
};

template <class T, class Engine>
void init_uniform(Tensor<T>& t, double bound, Engine& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : t.values()) v = static_cast<T>(u(rng));
}

// ---------------------------------------------------------------------------

/// Valid (unpadded) 1-D convolution over [B, C_in, L] inputs.
template <class T>
class Conv1d final : public LayerBase<T, Conv1d<T>> {
 public:
  Conv1d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride)
      : in_(in_ch), out_(out_ch), k_(kernel), s_(stride),
        weight_(name + ".weight", {out_ch, in_ch * kernel}),
        bias_(name + ".bias", {out_ch}) {}

  static std::size_t output_length(std::size_t len, std::size_t kernel, std::size_t stride) {
    if (len < kernel) throw ShapeMismatch("sequence shorter than convolution kernel");
    return (len - kernel) / stride + 1;
  }

  template <class Engine>
  void initialize(Engine& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ * k_));
    init_uniform(weight_.value, bound, rng);
    init_uniform(bias_.value, bound, rng);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    if (x.rank() != 3 || x.dim(1) != in_) throw ShapeMismatch("Conv1d expects [B, C_in, L]");
    batch_ = x.dim(0);
    len_in_ = x.dim(2);
    len_out_ = output_length(len_in_, k_, s_);
    const std::size_t rows = batch_ * len_out_, width = in_ * k_;
    cols_.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(width));
    for (std::size_t b = 0; b < batch_; ++b)
      for (std::size_t t = 0; t < len_out_; ++t) {
        T* row = cols_.data() + (b * len_out_ + t) * width;
        for (std::size_t c = 0; c < in_; ++c) {
          const T* src = x.data() + (b * in_ + c) * len_in_ + t * s_;
          for (std::size_t j = 0; j < k_; ++j) row[c * k_ + j] = src[j];
        }
      }
    const auto w = as_matrix(weight_.value.data(), out_, width);
    RowMatrix<T> y = cols_ * w.transpose();
    Tensor<T> out({batch_, out_, len_out_});
    for (std::size_t b = 0; b < batch_; ++b)
      for (std::size_t o = 0; o < out_; ++o) {
        T* dst = out.data() + (b * out_ + o) * len_out_;
        const T bo = bias_.value[o];
        for (std::size_t t = 0; t < len_out_; ++t) dst[t] = y(b * len_out_ + t, o) + bo;
      }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const std::size_t rows = batch_ * len_out_, width = in_ * k_;
    RowMatrix<T> g(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(out_));
    for (std::size_t b = 0; b < batch_; ++b)
      for (std::size_t o = 0; o < out_; ++o) {
        const T* src = dy.data() + (b * out_ + o) * len_out_;
        for (std::size_t t = 0; t < len_out_; ++t) g(b * len_out_ + t, o) = src[t];
      }
    auto dw = as_matrix(weight_.grad.data(), out_, width);
    dw.noalias() += g.transpose() * cols_;
    const auto col_sums = g.colwise().sum();
    for (std::size_t o = 0; o < out_; ++o) bias_.grad[o] += col_sums(static_cast<Eigen::Index>(o));
    const auto w = as_matrix(weight_.value.data(), out_, width);
    RowMatrix<T> dcols = g * w;
    Tensor<T> dx({batch_, in_, len_in_});
    for (std::size_t b = 0; b < batch_; ++b)
      for (std::size_t t = 0; t < len_out_; ++t) {
        const T* row = dcols.data() + (b * len_out_ + t) * width;
        for (std::size_t c = 0; c < in_; ++c) {
          T* dst = dx.data() + (b * in_ + c) * len_in_ + t * s_;
          for (std::size_t j = 0; j < k_; ++j) dst[j] += row[c * k_ + j];
        }
      }
    return dx;
  }

  void collect_params(std::vector<Param<T>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  std::string kind() const override { return "Conv1d"; }

 private:
  std::size_t in_, out_, k_, s_;
  Param<T> weight_, bias_;
  std::size_t batch_ = 0, len_in_ = 0, len_out_ = 0;
  RowMatrix<T> cols_;
};

/// Non-overlapping max pooling; ties resolve to the earliest element.
template <class T>
class MaxPool1d final : public LayerBase<T, MaxPool1d<T>> {
 public:
  explicit MaxPool1d(std::size_t kernel) : k_(kernel) {}

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    if (x.rank() != 3) throw ShapeMismatch("MaxPool1d expects [B, C, L]");
    in_shape_ = x.shape();
    const std::size_t rows = x.dim(0) * x.dim(1), len = x.dim(2), out_len = len / k_;
    if (out_len == 0) throw ShapeMismatch("sequence shorter than pooling window");
    Tensor<T> y({x.dim(0), x.dim(1), out_len});
    argmax_.assign(rows * out_len, 0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t t = 0; t < out_len; ++t) {
        const std::size_t base = r * len + t * k_;
        std::size_t best = base;
        for (std::size_t j = 1; j < k_; ++j)
          if (x[base + j] > x[best]) best = base + j;
        argmax_[r * out_len + t] = best;
        y[r * out_len + t] = x[best];
      }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx(in_shape_);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax_[i]] += dy[i];
    return dx;
  }
  std::string kind() const override { return "MaxPool1d"; }

 private:
  std::size_t k_;
  typename Tensor<T>::Shape in_shape_;
  std::vector<std::size_t> argmax_;
};

template <class T>
class LeakyRelu final : public LayerBase<T, LeakyRelu<T>> {
 public:
  explicit LeakyRelu(double slope) : slope_(static_cast<T>(slope)) {}

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    input_ = x;
    Tensor<T> y = x;
    for (auto& v : y.values()) v = v > T(0) ? v : v * slope_;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (!(input_[i] > T(0))) dx[i] *= slope_;
    return dx;
  }
  std::string kind() const override { return "LeakyReLU"; }

 private:
  T slope_;
  Tensor<T> input_;
};

/// Per-channel batch normalization over [B, C, L] (statistics over B and L)
/// or [B, C]. Train mode normalizes with batch statistics and updates the
/// running estimates; eval mode uses the running estimates only.
template <class T>
class BatchNorm1d final : public LayerBase<T, BatchNorm1d<T>> {
 public:
  BatchNorm1d(std::string name, std::size_t channels, double eps, double momentum)
      : c_(channels), eps_(eps), momentum_(momentum),
        gamma_(name + ".gamma", {channels}), beta_(name + ".beta", {channels}),
        running_mean_({channels}, T(0)), running_var_({channels}, T(1)),
        name_(std::move(name)) {
    gamma_.value.fill(T(1));
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    if (x.rank() < 2 || x.dim(1) != c_) throw ShapeMismatch("BatchNorm1d channel mismatch");
    shape_ = x.shape();
    batch_ = x.dim(0);
    len_ = x.rank() == 3 ? x.dim(2) : 1;
    mode_ = mode;
    Tensor<T> y(shape_);
    xhat_ = Tensor<T>(shape_);
    inv_std_.assign(c_, 0.0);
    const double n = static_cast<double>(batch_ * len_);
    for (std::size_t c = 0; c < c_; ++c) {
      double mean, var;
      if (mode == Mode::kTrain) {
        double s = 0.0;
        for (std::size_t b = 0; b < batch_; ++b)
          for (std::size_t t = 0; t < len_; ++t) s += x[index(b, c, t)];
        mean = s / n;
        double ss = 0.0;
        for (std::size_t b = 0; b < batch_; ++b)
          for (std::size_t t = 0; t < len_; ++t) {
            const double d = x[index(b, c, t)] - mean;
            ss += d * d;
          }
        var = ss / n;
        const double unbiased = n > 1 ? ss / (n - 1) : var;
        running_mean_[c] = static_cast<T>((1 - momentum_) * running_mean_[c] + momentum_ * mean);
        running_var_[c] = static_cast<T>((1 - momentum_) * running_var_[c] + momentum_ * unbiased);
      } else {
        mean = running_mean_[c];
        var = running_var_[c];
      }
      const double inv = 1.0 / std::sqrt(var + eps_);
      inv_std_[c] = inv;
      const double g = gamma_.value[c], be = beta_.value[c];
      for (std::size_t b = 0; b < batch_; ++b)
        for (std::size_t t = 0; t < len_; ++t) {
          const auto i = index(b, c, t);
          const double xh = (x[i] - mean) * inv;
          xhat_[i] = static_cast<T>(xh);
          y[i] = static_cast<T>(g * xh + be);
        }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx(shape_);
    const double n = static_cast<double>(batch_ * len_);
    for (std::size_t c = 0; c < c_; ++c) {
      double sum_dy = 0.0, sum_dy_xh = 0.0;
      for (std::size_t b = 0; b < batch_; ++b)
        for (std::size_t t = 0; t < len_; ++t) {
          const auto i = index(b, c, t);
          sum_dy += dy[i];
          sum_dy_xh += static_cast<double>(dy[i]) * xhat_[i];
        }
      gamma_.grad[c] += static_cast<T>(sum_dy_xh);
      beta_.grad[c] += static_cast<T>(sum_dy);
      const double g = gamma_.value[c], inv = inv_std_[c];
      for (std::size_t b = 0; b < batch_; ++b)
        for (std::size_t t = 0; t < len_; ++t) {
          const auto i = index(b, c, t);
          if (mode_ == Mode::kTrain)
            dx[i] = static_cast<T>(g * inv / n * (n * dy[i] - sum_dy - xhat_[i] * sum_dy_xh));
          else
            dx[i] = static_cast<T>(g * inv * dy[i]);
        }
    }
    return dx;
  }

  void collect_params(std::vector<Param<T>*>& out) override {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }
  void collect_buffers(std::vector<Buffer<T>>& out) override {
    out.push_back({name_ + ".running_mean", &running_mean_});
    out.push_back({name_ + ".running_var", &running_var_});
  }
  std::string kind() const override { return "BatchNorm1d"; }

 private:
  std::size_t index(std::size_t b, std::size_t c, std::size_t t) const { return (b * c_ + c) * len_ + t; }

  std::size_t c_;
  double eps_, momentum_;
  Param<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  std::string name_;
  typename Tensor<T>::Shape shape_;
  std::size_t batch_ = 0, len_ = 0;
  Mode mode_ = Mode::kTrain;
  Tensor<T> xhat_;
  std::vector<double> inv_std_;
};

/// Collapses every axis after the first.
template <class T>
class Flatten final : public LayerBase<T, Flatten<T>> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    in_shape_ = x.shape();
    return x.reshaped({x.dim(0), x.size() / x.dim(0)});
  }
  Tensor<T> backward(const Tensor<T>& dy) override { return dy.reshaped(in_shape_); }
  std::string kind() const override { return "Flatten"; }

 private:
  typename Tensor<T>::Shape in_shape_;
};

/// y = x W^T + b over [B, in].
template <class T>
class Linear final : public LayerBase<T, Linear<T>> {
 public:
  Linear(std::string name, std::size_t in, std::size_t out)
      : in_(in), out_(out), weight_(name + ".weight", {out, in}), bias_(name + ".bias", {out}) {}

  template <class Engine>
  void initialize(Engine& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
    init_uniform(weight_.value, bound, rng);
    init_uniform(bias_.value, bound, rng);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    if (x.rank() != 2 || x.dim(1) != in_) throw ShapeMismatch("Linear expects [B, " + std::to_string(in_) + "]");
    input_ = x;
    Tensor<T> y({x.dim(0), out_});
    auto ym = as_matrix(y);
    ym.noalias() = as_matrix(x) * as_matrix(weight_.value.data(), out_, in_).transpose();
    for (std::size_t b = 0; b < x.dim(0); ++b)
      for (std::size_t o = 0; o < out_; ++o) ym(b, o) += bias_.value[o];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const auto g = as_matrix(dy);
    as_matrix(weight_.grad.data(), out_, in_).noalias() += g.transpose() * as_matrix(input_);
    const auto cs = g.colwise().sum();
    for (std::size_t o = 0; o < out_; ++o) bias_.grad[o] += cs(static_cast<Eigen::Index>(o));
    Tensor<T> dx({dy.dim(0), in_});
    as_matrix(dx).noalias() = g * as_matrix(weight_.value.data(), out_, in_);
    return dx;
  }

  void collect_params(std::vector<Param<T>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  std::string kind() const override { return "Linear"; }

 private:
  std::size_t in_, out_;
  Param<T> weight_, bias_;
  Tensor<T> input_;
};

/// Projects each row of [B, D] onto the unit sphere.
template <class T>
class L2Normalize final : public LayerBase<T, L2Normalize<T>> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    if (x.rank() != 2) throw ShapeMismatch("L2Normalize expects [B, D]");
    const std::size_t b = x.dim(0), d = x.dim(1);
    output_ = Tensor<T>(x.shape());
    norms_.assign(b, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
      double ss = 0.0;
      for (std::size_t j = 0; j < d; ++j) ss += static_cast<double>(x.at(i, j)) * x.at(i, j);
      const double n = std::max(std::sqrt(ss), 1e-12);
      norms_[i] = n;
      for (std::size_t j = 0; j < d; ++j) output_.at(i, j) = static_cast<T>(x.at(i, j) / n);
    }
    return output_;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const std::size_t b = dy.dim(0), d = dy.dim(1);
    Tensor<T> dx(dy.shape());
    for (std::size_t i = 0; i < b; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += static_cast<double>(dy.at(i, j)) * output_.at(i, j);
      for (std::size_t j = 0; j < d; ++j)
        dx.at(i, j) = static_cast<T>((dy.at(i, j) - output_.at(i, j) * dot) / norms_[i]);
    }
    return dx;
  }
  std::string kind() const override { return "L2Normalize"; }

 private:
  Tensor<T> output_;
  std::vector<double> norms_;
};

// ---------------------------------------------------------------------------

/// Ordered chain of layers; backward runs the chain in reverse.
template <class T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& o) {
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
  }
  Sequential& operator=(const Sequential& o) {
    if (this != &o) {
      layers_.clear();
      for (const auto& l : o.layers_) layers_.push_back(l->clone());
    }
    return *this;
  }
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <class L>
  L& add(L layer) {
    auto p = std::make_unique<L>(std::move(layer));
    L& ref = *p;
    layers_.push_back(std::move(p));
    return ref;
  }

  Tensor<T> forward(Tensor<T> x, Mode mode) {
    for (auto& l : layers_) x = l->forward(x, mode);
    return x;
  }

  Tensor<T> backward(Tensor<T> dy) {
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) dy = (*it)->backward(dy);
    return dy;
  }

  void collect_params(std::vector<Param<T>*>& out) {
    for (auto& l : layers_) l->collect_params(out);
  }
  void collect_buffers(std::vector<Buffer<T>>& out) {
    for (auto& l : layers_) l->collect_buffers(out);
  }

  std::size_t size() const noexcept { return layers_.size(); }
  Layer<T>& operator[](std::size_t i) { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace fnlearn::nn
