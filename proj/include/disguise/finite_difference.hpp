#pragma once

#include <functional>

#include "disguise/errors.hpp"
#include "disguise/tensor.hpp"

namespace disguise {

// Central-difference gradient of a scalar function, one element at a time.
// Differences are formed in 64-bit; for a clean oracle evaluate `f` on
// Tensor<double>.
template <typename T, typename F>
Tensor<double> finite_difference_grad(F&& f, const Tensor<T>& x, double h) {
  if (!(h > 0.0)) throw ContractError("finite_difference_grad: step must be positive");
  Tensor<T> probe = x;
  Tensor<double> grad(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T orig = x[i];
    probe[i] = static_cast<T>(static_cast<double>(orig) + h);
    const double up = static_cast<double>(std::invoke(f, std::as_const(probe)));
    probe[i] = static_cast<T>(static_cast<double>(orig) - h);
    const double down = static_cast<double>(std::invoke(f, std::as_const(probe)));
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace disguise
