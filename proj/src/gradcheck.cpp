#include "flattab/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace flattab {

namespace {

double rel_err(double analytic, double numeric) {
  const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / denom;
}

double eval_value(const TapeFn& f, const std::vector<Tensor>& params) {
  Tape tape(false);
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.leaf(p));
  return tape.val(f(tape, vars)).scalar_value();
}

}  // namespace

double finite_diff_check(const TapeFn& f, const std::vector<Tensor>& params, double step) {
  if (step <= 0.0) throw std::invalid_argument("finite_diff_check: step must be positive");

  std::vector<Tensor> analytic;
  {
    Tape tape(true);
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const Tensor& p : params) vars.push_back(tape.leaf(p));
    Var root = f(tape, vars);
    tape.backward(root);
    for (Var v : vars) analytic.push_back(tape.grad(v));
  }

  double worst = 0.0;
  std::vector<Tensor> work = params;
  for (std::size_t t = 0; t < work.size(); ++t) {
    for (std::size_t i = 0; i < work[t].size(); ++i) {
      const double saved = work[t][i];
      work[t][i] = saved + step;
      const double fp = eval_value(f, work);
      work[t][i] = saved - step;
      const double fm = eval_value(f, work);
      work[t][i] = saved;
      const double numeric = (fp - fm) / (2.0 * step);
      worst = std::max(worst, rel_err(analytic[t][i], numeric));
    }
  }
  return worst;
}

double finite_diff_check(const ValueFn& value, const GradFn& analytic,
                         const std::vector<Tensor>& params, double step) {
  if (step <= 0.0) throw std::invalid_argument("finite_diff_check: step must be positive");
  const std::vector<Tensor> grads = analytic(params);
  double worst = 0.0;
  std::vector<Tensor> work = params;
  for (std::size_t t = 0; t < work.size(); ++t) {
    for (std::size_t i = 0; i < work[t].size(); ++i) {
      const double saved = work[t][i];
      work[t][i] = saved + step;
      const double fp = value(work);
      work[t][i] = saved - step;
      const double fm = value(work);
      work[t][i] = saved;
      const double numeric = (fp - fm) / (2.0 * step);
      worst = std::max(worst, rel_err(grads[t][i], numeric));
    }
  }
  return worst;
}

}  // namespace flattab
