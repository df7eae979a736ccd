#pragma once

#include <vector>

#include "ovtok/tensor.hpp"

namespace ovtok {

/// Per-parameter Adam moments plus schedule bookkeeping.
struct OptimizerState {
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  std::vector<Moments> slots;  // parallel to the parameter list
  long step = 0;               // number of completed steps
  double lr = 0.0;             // effective learning rate of the last step
  double warmup_ratio = 0.03;
};

/// Adam with bias correction. Parameters with empty grads are treated as
/// zero-gradient (left unchanged when moments are also zero).
class Adam {
 public:
  explicit Adam(std::vector<TensorPtr> params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  /// One update using the given learning rate; reads param->grad.
  void step(double lr);
  void zero_grad();

  const std::vector<TensorPtr>& params() const { return params_; }
  OptimizerState& state() { return state_; }
  const OptimizerState& state() const { return state_; }

 private:
  std::vector<TensorPtr> params_;
  OptimizerState state_;
  double beta1_, beta2_, eps_;
};

/// Linear warmup to the peak followed by cosine decay to zero.
/// Step 0 of warmup yields 0; the first post-warmup step yields the peak.
double scheduled_lr(long step, long total_steps, double peak, double warmup_ratio);

}  // namespace ovtok
