#include "sst/train/adam.hpp"

#include <cmath>
#include <string>

namespace sst::train {

template <class T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> first, std::span<T> second,
                 std::size_t step, double lr, double beta1, double beta2, double eps) {
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
    const double m = beta1 * static_cast<double>(first[i]) + (1.0 - beta1) * g;
    const double v = beta2 * static_cast<double>(second[i]) + (1.0 - beta2) * g * g;
    first[i] = static_cast<T>(m);
    second[i] = static_cast<T>(v);
    param[i] = static_cast<T>(static_cast<double>(param[i]) - lr * (m / c1) / (std::sqrt(v / c2) + eps));
  }
}

template <class T>
void adam_step(model::ParameterSet<T>& params, OptimizerState<T>& state, double lr) {
  auto& entries = params.entries();
  if (state.first.empty()) {
    for (const auto& e : entries) {
      state.first.emplace_back(e.value.size(), T(0));
      state.second.emplace_back(e.value.size(), T(0));
    }
  }
  if (state.first.size() != entries.size()) throw std::invalid_argument("optimizer state does not match parameters");
  // Validate everything first so a rejected step leaves no partial update.
  for (const auto& e : entries) {
    if (!e.value.has_grad()) continue;
    const auto& g = e.value.node()->grad;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!std::isfinite(static_cast<double>(g[i])))
        throw NonFiniteGradient("non-finite gradient " + std::to_string(static_cast<double>(g[i])) + " in '" +
                                e.name + "' at flat index " + std::to_string(i) + " (step " +
                                std::to_string(state.step + 1) + ")");
  }
  ++state.step;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    auto value = entries[k].value;
    if (state.first[k].size() != value.size())
      throw std::invalid_argument("optimizer moment size mismatch for '" + entries[k].name + "'");
    std::span<const T> grad;
    if (value.has_grad()) grad = value.node()->grad;
    adam_update<T>(value.data(), grad, state.first[k], state.second[k], state.step, lr, state.beta1, state.beta2,
                   state.eps);
  }
}

template void adam_update<float>(std::span<float>, std::span<const float>, std::span<float>, std::span<float>,
                                 std::size_t, double, double, double, double);
template void adam_update<double>(std::span<double>, std::span<const double>, std::span<double>, std::span<double>,
                                  std::size_t, double, double, double, double);
template void adam_step(model::ParameterSet<float>&, OptimizerState<float>&, double);
template void adam_step(model::ParameterSet<double>&, OptimizerState<double>&, double);

}  // namespace sst::train
