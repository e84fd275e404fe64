#pragma once

// Multi-stage reconstruction driven by re-projection residuals:
//
//   x_0     = unmix_1(shift_back(y), M)
//   x_1     = x_0 + B_1(x_0)
//   z_n     = G(x_n)                                  (noiseless optics)
//   x_{n+1} = x_n + B_{n+1}(unmix_{n+1}(shift_back(y - z_n), M))
//
// where B is the W-shaped backbone. Each stage owns its weights. With the
// inner-reversible single-stage variant the cube is decoded after the
// spectral U, re-projected, and the measurement residual is fed into the
// spatial U.

#include <optional>
#include <vector>

#include "sst/model/backbone.hpp"

namespace sst::model {

template <class T>
struct StageWeights {
  UnmixParams<T> unmix;
  std::optional<BackboneParams<T>> backbone;  // absent for unmix-only baselines
  // Inner-reversible extras.
  std::optional<ConvParams<T>> mid_mapping;  // 1x1 base -> C, zero-initialised
  std::optional<ConvParams<T>> reembed;      // 1x1 2C -> base
};

/// Per-stage diagnostics. residual_energy[n] = ||y - G(x_{n+1})||^2.
template <class T>
struct StageTrace {
  std::vector<Tensor<T>> estimates;     // x_1 .. x_N
  std::vector<Tensor<T>> reprojections; // z_1 .. z_N
  std::vector<Tensor<T>> inputs;        // y_1 .. y_N fed to each stage
  std::vector<double> residual_energy;
};

template <class T>
class ReversibleNet {
 public:
  ReversibleNet(const SstConfig& cfg, std::uint64_t seed);

  const SstConfig& config() const { return cfg_; }
  ParameterSet<T>& parameters() { return params_; }
  const ParameterSet<T>& parameters() const { return params_; }
  const std::vector<StageWeights<T>>& stages() const { return stages_; }

  /// Initial estimate x_0 from the first stage's unmixing block.
  Tensor<T> initial_estimate(const Tensor<T>& y, const Tensor<T>& mask) const;

  /// Runs every stage; y is [H, W + d(C-1)], mask [H, W]. Returns x_N.
  Tensor<T> reconstruct(const Tensor<T>& y, const Tensor<T>& mask, StageTrace<T>* trace = nullptr) const;

 private:
  Tensor<T> stage_input(const Tensor<T>& measurement, const Tensor<T>& mask, const UnmixParams<T>& unmix) const;

  SstConfig cfg_;
  ParameterSet<T> params_;
  std::vector<StageWeights<T>> stages_;
};

extern template class ReversibleNet<float>;
extern template class ReversibleNet<double>;

}  // namespace sst::model
