#pragma once

#include <functional>
#include <vector>

#include "flattab/autograd.hpp"
#include "flattab/tensor.hpp"

namespace flattab {

// Scalar function expressed as a tape program: given leaf variables for each
// parameter tensor (in order), build and return the scalar root.
using TapeFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Central-difference check of the tape's analytic gradient. Returns the
// maximum over all parameter coordinates of
//   |analytic - numeric| / max(1, |analytic|, |numeric|).
// f must be pure and deterministic.
double finite_diff_check(const TapeFn& f, const std::vector<Tensor>& params, double step);

// Same check against an externally supplied analytic gradient; exists so the
// checker itself can be validated against a deliberately wrong gradient.
using ValueFn = std::function<double(const std::vector<Tensor>&)>;
using GradFn = std::function<std::vector<Tensor>(const std::vector<Tensor>&)>;
double finite_diff_check(const ValueFn& value, const GradFn& analytic,
                         const std::vector<Tensor>& params, double step);

}  // namespace flattab
