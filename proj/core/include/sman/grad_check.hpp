#pragma once

#include <functional>
#include <string>

#include "sman/param_store.hpp"

namespace sman {

// Evaluates a scalar loss at the current parameter values and writes the
// analytic gradient into the store's accumulators (overwriting them).
template <typename T>
using LossFunction = std::function<T(ParamStore<T>&)>;

struct GradCheckReport {
  double max_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares analytic gradients with central differences over every parameter
// entry. The error of one entry is |a - n| / max(1, |a|, |n|).
template <typename T>
GradCheckReport grad_check_report(const LossFunction<T>& loss, ParamStore<T>& params, T epsilon);

template <typename T>
T grad_check(const LossFunction<T>& loss, ParamStore<T>& params, T epsilon) {
  return static_cast<T>(grad_check_report(loss, params, epsilon).max_error);
}

}  // namespace sman
