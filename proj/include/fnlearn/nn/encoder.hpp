#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fnlearn/nn/layers.hpp"
#include "fnlearn/random.hpp"

namespace fnlearn::nn {

struct EncoderConfig {
  std::size_t input_len = 100;
  std::size_t rep_dim = 128;
  std::size_t proj_dim = 128;
  std::size_t proj_hidden = 128;
  std::size_t channels = 64;
  double temperature = 0.5;
  double leaky_slope = 0.01;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
};

/// Sequence lengths after each length-changing stage of the conv stack:
/// conv(5, stride 2), pool 2, conv(5), pool 2, conv(3).
struct StackLengths {
  std::array<std::size_t, 6> stages{};
  std::size_t flat(std::size_t channels) const { return stages.back() * channels; }
};

constexpr StackLengths stack_lengths(std::size_t input_len) {
  StackLengths s;
  std::size_t len = input_len;
  s.stages[0] = len;
  len = (len - 5) / 2 + 1;
  s.stages[1] = len;
  len /= 2;
  s.stages[2] = len;
  len = len - 5 + 1;
  s.stages[3] = len;
  len /= 2;
  s.stages[4] = len;
  len = len - 3 + 1;
  s.stages[5] = len;
  return s;
}

static_assert(stack_lengths(100).stages == std::array<std::size_t, 6>{100, 48, 24, 20, 10, 8});

/// The conv encoder f and the projection head g.
///
/// f: Conv(64,5,2) MaxPool(2) LeakyReLU BN Conv(64,5,1) MaxPool(2) LeakyReLU BN
///    Conv(64,3,1) LeakyReLU Flatten Linear(rep_dim)
/// g: Linear(hidden) LeakyReLU Linear(proj_dim), then unit-normalized.
template <class T>
class Encoder {
 public:
  explicit Encoder(EncoderConfig cfg = {}, std::uint64_t seed = 0) : cfg_(cfg) {
    if (cfg.input_len < 43) throw ShapeMismatch("input too short for the conv stack");
    lengths_ = stack_lengths(cfg.input_len);
    Rng rng = make_rng(seed, {tag(Stream::kInit)});
    const auto c = cfg.channels;
    f_.add(Conv1d<T>("conv1", 1, c, 5, 2)).initialize(rng);
    f_.add(MaxPool1d<T>(2));
    f_.add(LeakyRelu<T>(cfg.leaky_slope));
    f_.add(BatchNorm1d<T>("bn1", c, cfg.bn_eps, cfg.bn_momentum));
    f_.add(Conv1d<T>("conv2", c, c, 5, 1)).initialize(rng);
    f_.add(MaxPool1d<T>(2));
    f_.add(LeakyRelu<T>(cfg.leaky_slope));
    f_.add(BatchNorm1d<T>("bn2", c, cfg.bn_eps, cfg.bn_momentum));
    f_.add(Conv1d<T>("conv3", c, c, 3, 1)).initialize(rng);
    f_.add(LeakyRelu<T>(cfg.leaky_slope));
    f_.add(Flatten<T>());
    f_.add(Linear<T>("fc", lengths_.flat(c), cfg.rep_dim)).initialize(rng);

    g_.add(Linear<T>("proj1", cfg.rep_dim, cfg.proj_hidden)).initialize(rng);
    g_.add(LeakyRelu<T>(cfg.leaky_slope));
    g_.add(Linear<T>("proj2", cfg.proj_hidden, cfg.proj_dim)).initialize(rng);
    g_.add(L2Normalize<T>());
  }

  const EncoderConfig& config() const noexcept { return cfg_; }
  const StackLengths& lengths() const noexcept { return lengths_; }

  /// [B, input_len] or [B, 1, input_len] -> [B, rep_dim].
  Tensor<T> encode(const Tensor<T>& batch, Mode mode) {
    const std::size_t b = batch.dim(0);
    const std::size_t len = batch.size() / std::max<std::size_t>(b, 1);
    if (len != cfg_.input_len || (batch.rank() == 3 && batch.dim(1) != 1) || batch.rank() < 2 || batch.rank() > 3)
      throw ShapeMismatch("encoder expects inputs of length " + std::to_string(cfg_.input_len));
    return f_.forward(batch.reshaped({b, 1, len}), mode);
  }

  /// [B, rep_dim] -> unit-norm [B, proj_dim].
  Tensor<T> project(const Tensor<T>& h, Mode mode) { return g_.forward(h, mode); }

  Tensor<T> forward(const Tensor<T>& batch, Mode mode) { return project(encode(batch, mode), mode); }

  /// Backpropagates dLoss/dProjection through g and f; returns dLoss/dInput
  /// shaped [B, 1, input_len].
  Tensor<T> backward(const Tensor<T>& dz) { return f_.backward(g_.backward(dz)); }
  Tensor<T> backward_encoder(const Tensor<T>& dh) { return f_.backward(dh); }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    f_.collect_params(out);
    g_.collect_params(out);
    return out;
  }

  std::vector<Buffer<T>> buffers() {
    std::vector<Buffer<T>> out;
    f_.collect_buffers(out);
    g_.collect_buffers(out);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->grad.fill(T(0));
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : params()) n += p->value.size();
    return n;
  }

  Sequential<T>& encoder_layers() noexcept { return f_; }
  Sequential<T>& projector_layers() noexcept { return g_; }

 private:
  EncoderConfig cfg_;
  StackLengths lengths_;
  Sequential<T> f_;
  Sequential<T> g_;
};

}  // namespace fnlearn::nn
