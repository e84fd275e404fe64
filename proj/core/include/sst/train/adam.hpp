#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "sst/model/parameters.hpp"

namespace sst::train {

/// Raised before any parameter moves when a gradient holds NaN or Inf.
struct NonFiniteGradient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class T>
struct OptimizerState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<T>> first;   // one buffer per parameter
  std::vector<std::vector<T>> second;
};

/// One bias-corrected Adam update of a single buffer. `step` is the
/// 1-based count including this update.
template <class T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> first, std::span<T> second,
                 std::size_t step, double lr, double beta1, double beta2, double eps);

/// Updates every parameter from its accumulated gradient. Parameters
/// without a gradient are treated as having a zero gradient.
template <class T>
void adam_step(model::ParameterSet<T>& params, OptimizerState<T>& state, double lr);

}  // namespace sst::train
