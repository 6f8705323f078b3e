#include "mgc/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mgc {

double cosine_lr(double base, std::size_t step, std::size_t total) {
  if (total == 0) throw std::invalid_argument("cosine_lr: total steps must be positive");
  if (step >= total) return 0.0;
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total)));
}

template <typename T>
AdamW<T>::AdamW(std::vector<NamedTensor<T>> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  if (config_.total_steps == 0) throw std::invalid_argument("AdamW: total_steps must be positive");
  if (config_.lr < 0 || config_.weight_decay < 0) throw std::invalid_argument("AdamW: negative lr or weight decay");
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.shape());
    v_.emplace_back(p.tensor.shape());
  }
}

template <typename T>
void AdamW<T>::step() {
  const double lr = current_lr();
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  const T b1 = static_cast<T>(config_.beta1);
  const T b2 = static_cast<T>(config_.beta2);
  const T decay = static_cast<T>(lr * config_.weight_decay);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor<T>& p = params_[k].tensor;
    auto w = p.data();
    auto m = m_[k].data();
    auto v = v_[k].data();
    const bool has_grad = p.has_grad();
    const auto g = p.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const T gi = has_grad ? g[i] : T(0);
      m[i] = b1 * m[i] + (T(1) - b1) * gi;
      v[i] = b2 * v[i] + (T(1) - b2) * gi * gi;
      const double mhat = static_cast<double>(m[i]) / bc1;
      const double vhat = static_cast<double>(v[i]) / bc2;
      w[i] -= decay * w[i];
      w[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + config_.eps));
    }
    p.zero_grad();
  }
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace mgc
