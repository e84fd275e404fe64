#pragma once

// Coded-aperture snapshot spectral imaging forward model.
//
// Layout conventions shared by the whole library:
//   spectral cube   [C, H, W]              channel-major, index (m*H + x)*W + y
//   coded mask      [H, W]                 transmission in [0, 1]
//   dispersed cube  [C, H, W + d*(C-1)]
//   measurement     [H, W + d*(C-1)]
//
// Every stage is a differentiable primitive, so the same code simulates the
// sensor and re-projects reconstructions inside the network and the loss.

#include <cstdint>
#include <optional>

#include "sst/autodiff/tensor.hpp"

namespace sst::optics {

using ad::Tensor;

struct DispersionConfig {
  /// Columns of shear between adjacent channels.
  std::size_t step = 1;
  /// Channel whose image is not sheared relative to the scene.
  std::size_t reference_channel = 0;

  /// Column at which channel m is placed on the widened canvas. Offsets are
  /// linear in the channel index; the canvas origin sits on channel 0 so all
  /// placements are non-negative.
  std::size_t offset(std::size_t channel) const { return step * channel; }
  /// Signed shear of channel m relative to the reference channel.
  std::int64_t shear(std::size_t channel) const {
    return static_cast<std::int64_t>(step) *
           (static_cast<std::int64_t>(channel) - static_cast<std::int64_t>(reference_channel));
  }
  std::size_t measurement_width(std::size_t width, std::size_t channels) const {
    return width + step * (channels - 1);
  }
};

struct NoiseModel {
  enum class Kind { none, gaussian };
  Kind kind = Kind::none;
  double sigma = 0.0;  // sensor units
  std::uint64_t seed = 0;

  static NoiseModel gaussian(double sigma, std::uint64_t seed);
};

/// X'(:,:,m) = X(:,:,m) ⊙ M for every channel.
template <class T>
Tensor<T> modulate(const Tensor<T>& cube, const Tensor<T>& mask);

/// Places channel m into a zero canvas at column offset(m).
template <class T>
Tensor<T> disperse(const Tensor<T>& cube, const DispersionConfig& cfg);

/// Sums the dispersed channels onto the sensor and adds noise.
template <class T>
Tensor<T> integrate(const Tensor<T>& dispersed, const NoiseModel& noise = {});

/// integrate(disperse(modulate(cube, mask))). Serves both as the scene to
/// sensor simulation and as the re-projection of a reconstruction.
template <class T>
Tensor<T> forward_project(const Tensor<T>& cube, const Tensor<T>& mask, const DispersionConfig& cfg,
                          const NoiseModel& noise = {});

/// y when no re-projection exists yet (first stage), otherwise y - z.
template <class T>
Tensor<T> residual_input(const Tensor<T>& y, const std::optional<Tensor<T>>& reprojection);

/// Channel m of the result is the width-W window of the measurement that
/// starts at column offset(m).
template <class T>
Tensor<T> shift_back(const Tensor<T>& measurement, const DispersionConfig& cfg, std::size_t channels);

/// Throws std::invalid_argument unless every mask value lies in [0, 1].
template <class T>
void validate_mask(const Tensor<T>& mask);

}  // namespace sst::optics
