#include "flattab/optim.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace flattab {

void AdamW::restore(std::vector<Tensor> m, std::vector<Tensor> v, long long t) {
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

bool AdamW::step(std::span<Tensor* const> params, std::span<const Tensor* const> grads) {
  return step(params, grads, {});
}

bool AdamW::step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
                 std::span<const double> lr) {
  if (params.size() != grads.size())
    throw std::invalid_argument("AdamW::step: parameter/gradient count mismatch");
  if (!lr.empty() && lr.size() != params.size())
    throw std::invalid_argument("AdamW::step: per-tensor lr count mismatch");

  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }
  if (m_.size() != params.size())
    throw std::invalid_argument("AdamW::step: optimizer state does not match parameter count");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (!m_[t].same_shape(*params[t]))
      throw std::invalid_argument("AdamW::step: moment shape " + m_[t].shape_str() +
                                  " does not match parameter " + params[t]->shape_str());
    if (!grads[t]->same_shape(*params[t]))
      throw std::invalid_argument("AdamW::step: gradient shape " + grads[t]->shape_str() +
                                  " does not match parameter " + params[t]->shape_str());
  }

  ++t_;
  for (const Tensor* g : grads) {
    if (!g->all_finite()) {
      std::fprintf(stderr, "[flattab] adamw: non-finite gradient, update %lld rejected\n", t_);
      return false;
    }
  }

  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t];
    const Tensor& g = *grads[t];
    Tensor& m = m_[t];
    Tensor& v = v_[t];
    const double step_lr = lr.empty() ? cfg_.lr : lr[t];
    double* pp = p.data();
    const double* gp = g.data();
    double* mp = m.data();
    double* vp = v.data();
    const std::size_t n = p.size();
    for (std::size_t i = 0; i < n; ++i) {
      mp[i] = b1 * mp[i] + (1.0 - b1) * gp[i];
      vp[i] = b2 * vp[i] + (1.0 - b2) * gp[i] * gp[i];
      const double mhat = mp[i] / bc1;
      const double vhat = vp[i] / bc2;
      pp[i] -= step_lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * pp[i]);
    }
  }
  return true;
}

}  // namespace flattab
