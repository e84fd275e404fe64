#pragma once

#include <cstdint>
#include <string>

#include "sst/autodiff/tensor.hpp"

namespace sst::io {

enum class SceneKind { gaussian_blobs, gradient_ramps, checker_spectra };

/// "gaussian-blobs", "gradient-ramps", "checker-spectra".
SceneKind parse_scene_kind(const std::string& name);
std::string to_string(SceneKind kind);

struct SceneSpec {
  SceneKind kind = SceneKind::gaussian_blobs;
  std::size_t height = 32, width = 32, channels = 8;
  /// Spectral smoothness; larger widens the per-material spectra.
  double smoothness = 1.0;
  std::uint64_t seed = 0;
};

/// [C,H,W] cube with values in [0, 1]; a pure function of the spec.
ad::Tensor<float> generate_scene(const SceneSpec& spec);

/// Seeded Bernoulli(density) binary mask [H,W].
ad::Tensor<float> generate_mask(std::size_t height, std::size_t width, double density, std::uint64_t seed);

}  // namespace sst::io
