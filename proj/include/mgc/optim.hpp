#pragma once

#include <cstddef>
#include <vector>

#include "mgc/model.hpp"

namespace mgc {

/// lr(t) = base * (1 + cos(pi * t / total)) / 2, clamped to 0 past total.
double cosine_lr(double base, std::size_t step, std::size_t total);

struct AdamWConfig {
  double lr = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
  std::size_t total_steps = 1;
};

/// Adam moments plus decoupled weight decay: each step first scales the
/// parameter by (1 - lr * wd), then subtracts the bias-corrected Adam
/// update. Gradients are zeroed afterwards.
template <typename T>
class AdamW {
 public:
  AdamW(std::vector<NamedTensor<T>> params, AdamWConfig config);

  double current_lr() const { return cosine_lr(config_.lr, step_, config_.total_steps); }
  std::size_t step_count() const { return step_; }
  const AdamWConfig& config() const { return config_; }
  void step();

  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }

 private:
  std::vector<NamedTensor<T>> params_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  AdamWConfig config_;
  std::size_t step_ = 0;
};

}  // namespace mgc
