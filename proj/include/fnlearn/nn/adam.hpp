#pragma once

#include <cmath>
#include <vector>

#include "fnlearn/nn/tensor.hpp"

namespace fnlearn::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // L2 term added to the gradient
};

/// First and second moment estimates for one parameter array.
template <class T>
struct AdamSlot {
  std::vector<double> m, v;
};

/// Classic Adam with bias correction; weight decay enters as wd * theta added
/// to the gradient before the moment updates.
template <class T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const noexcept { return cfg_; }
  long step_count() const noexcept { return t_; }

  void step(const std::vector<Param<T>*>& params) {
    if (slots_.empty()) {
      slots_.resize(params.size());
      for (std::size_t k = 0; k < params.size(); ++k) {
        slots_[k].m.assign(params[k]->value.size(), 0.0);
        slots_[k].v.assign(params[k]->value.size(), 0.0);
      }
    }
    if (slots_.size() != params.size()) throw ShapeMismatch("parameter list changed between Adam steps");
    ++t_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = *params[k];
      auto& s = slots_[k];
      if (s.m.size() != p.value.size()) throw ShapeMismatch("parameter '" + p.name + "' changed size");
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double theta = p.value[i];
        const double g = static_cast<double>(p.grad[i]) + cfg_.weight_decay * theta;
        s.m[i] = b1 * s.m[i] + (1 - b1) * g;
        s.v[i] = b2 * s.v[i] + (1 - b2) * g * g;
        const double mhat = s.m[i] / c1, vhat = s.v[i] / c2;
        p.value[i] = static_cast<T>(theta - cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon));
      }
    }
  }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<AdamSlot<T>> slots_;
};

}  // namespace fnlearn::nn
