#include "sman/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace sman {

template <typename T>
GradCheckReport grad_check_report(const LossFunction<T>& loss, ParamStore<T>& params, T epsilon) {
  if (!(epsilon > T(0))) throw ConfigError("grad_check: epsilon must be positive");

  std::vector<Tensor<T>> analytic;
  const T first = loss(params);
  for (const auto& e : params) analytic.push_back(e.grad);
  const T second = loss(params);
  bool same = first == second;
  std::size_t k = 0;
  for (const auto& e : params) same = same && e.grad == analytic[k++];
  if (!same) throw DeterminismError("grad_check: two evaluations at identical parameters differ");

  GradCheckReport report;
  k = 0;
  for (auto& e : params) {
    auto values = e.value.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T saved = values[i];
      values[i] = saved + epsilon;
      const T up = loss(params);
      values[i] = saved - epsilon;
      const T down = loss(params);
      values[i] = saved;
      const double numeric = (static_cast<double>(up) - static_cast<double>(down)) /
                             (2.0 * static_cast<double>(epsilon));
      const double a = analytic[k][i];
      const double err =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (err > report.max_error || report.worst_parameter.empty()) {
        if (err >= report.max_error) {
          report.max_error = err;
          report.worst_parameter = e.name;
          report.worst_index = i;
          report.analytic = a;
          report.numeric = numeric;
        }
      }
    }
    ++k;
  }
  // Leave the store holding the gradient at the unperturbed point.
  loss(params);
  return report;
}

template GradCheckReport grad_check_report(const LossFunction<float>&, ParamStore<float>&, float);
template GradCheckReport grad_check_report(const LossFunction<double>&, ParamStore<double>&,
                                           double);

}  // namespace sman
