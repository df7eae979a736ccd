#include "ovtok/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace ovtok {

Adam::Adam(std::vector<TensorPtr> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  state_.slots.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    state_.slots[i].m.assign(params_[i]->size(), 0.0);
    state_.slots[i].v.assign(params_[i]->size(), 0.0);
  }
}

void Adam::step(double lr) {
  ++state_.step;
  state_.lr = lr;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(state_.step));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(state_.step));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i];
    auto& slot = state_.slots[i];
    if (!p.grad.empty() && p.grad.size() != p.data.size())
      throw std::invalid_argument("Adam::step: grad shape mismatch");
    for (std::size_t j = 0; j < p.data.size(); ++j) {
      const double g = p.grad.empty() ? 0.0 : p.grad[j];
      slot.m[j] = beta1_ * slot.m[j] + (1.0 - beta1_) * g;
      slot.v[j] = beta2_ * slot.v[j] + (1.0 - beta2_) * g * g;
      const double mhat = slot.m[j] / bc1;
      const double vhat = slot.v[j] / bc2;
      p.data[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p->grad.clear();
}

double scheduled_lr(long step, long total_steps, double peak, double warmup_ratio) {
  if (total_steps < 1) throw std::invalid_argument("scheduled_lr: total_steps < 1");
  const long warmup = std::max<long>(1, static_cast<long>(warmup_ratio * total_steps));
  if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
  if (total_steps <= warmup) return peak;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return peak * 0.5 * (1.0 + std::cos(3.14159265358979323846 * std::min(1.0, progress)));
}

}  // namespace ovtok
