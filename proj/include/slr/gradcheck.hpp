#pragma once

#include <functional>
#include <vector>

#include "slr/optim.hpp"

namespace slr {

// Central finite-difference check of analytic gradients.
//
// `forward` evaluates the scalar objective from the current parameter values
// (no side effects on grads). The analytic gradients must already be stored
// in each ParamGrad::grad before calling. Returns the maximum relative error
// over all coordinates of all parameters.
double finite_diff_check(const std::function<double()>& forward,
                         const std::vector<ParamGrad*>& params,
                         double eps = 1e-5);

}  // namespace slr
