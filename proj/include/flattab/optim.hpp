#pragma once

#include <span>
#include <vector>

#include "flattab/tensor.hpp"

namespace flattab {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled; 0 gives plain Adam
};

// AdamW with decoupled weight decay:
//   p <- p - lr * ( m_hat / (sqrt(v_hat) + eps) + weight_decay * p ).
// Moment buffers are created on the first step and must keep matching the
// parameter shapes afterwards.
class AdamW {
 public:
  AdamW() = default;
  explicit AdamW(AdamConfig cfg) : cfg_(cfg) {}

  // One update over all parameters. If any gradient entry is non-finite the
  // update is rejected: parameters and moments stay untouched, the step
  // counter still advances and the event is logged. Returns whether the
  // update was applied.
  bool step(std::span<Tensor* const> params, std::span<const Tensor* const> grads);
  // Per-tensor learning rates (overrides cfg.lr).
  bool step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
            std::span<const double> lr);

  const AdamConfig& config() const { return cfg_; }
  long long step_count() const { return t_; }

  // Checkpoint access; moments are ordered like the parameter list.
  std::vector<Tensor>& moment1() { return m_; }
  std::vector<Tensor>& moment2() { return v_; }
  const std::vector<Tensor>& moment1() const { return m_; }
  const std::vector<Tensor>& moment2() const { return v_; }
  void restore(std::vector<Tensor> m, std::vector<Tensor> v, long long t);

 private:
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  long long t_ = 0;
};

}  // namespace flattab
