#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "disguise/errors.hpp"

namespace disguise {

struct AdamParams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction over a fixed list of parameter blocks. Moment
// estimates are kept in 64-bit.
class Adam {
 public:
  Adam(AdamParams params, std::vector<std::size_t> block_sizes) : params_(params) {
    if (!(params.learning_rate > 0.0)) throw ContractError("adam: learning rate must be positive");
    for (std::size_t n : block_sizes) {
      m_.emplace_back(n, 0.0);
      v_.emplace_back(n, 0.0);
    }
  }

  /// Advances the step counter; call once before updating the blocks of a step.
  void begin_step() { ++t_; }

  template <typename T>
  void update(std::size_t block, std::span<T> param, std::span<const T> grad) {
    auto& m = m_.at(block);
    auto& v = v_.at(block);
    if (param.size() != m.size() || grad.size() != m.size())
      throw ContractError("adam: block size mismatch");
    const double b1 = params_.beta1, b2 = params_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double g = static_cast<double>(grad[i]);
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double step = params_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + params_.epsilon);
      param[i] = static_cast<T>(static_cast<double>(param[i]) - step);
    }
  }

  long steps() const noexcept { return t_; }

 private:
  AdamParams params_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

}  // namespace disguise
