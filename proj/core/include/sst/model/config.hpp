#pragma once

#include <cstddef>
#include <string>

#include "sst/optics/cassi.hpp"

namespace sst::model {

/// Architecture hyperparameters of a reconstruction network.
struct SstConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 8;  // spectral channels C

  std::size_t stages = 1;          // reversible iterations; 1/2/4/9 for the S/M/L/Lplus family
  std::size_t base_channels = 16;  // feature width at full resolution; doubles per level
  std::size_t window = 8;          // spatial attention window s
  std::size_t heads = 1;           // heads at full resolution; doubles per level
  std::size_t levels = 2;          // down/up steps inside each U
  std::size_t depth = 1;           // attention blocks per U node
  std::size_t ffn_mult = 2;        // FFN hidden expansion
  /// Single-stage only: decode to a cube between the spectral and spatial
  /// halves, re-project through the optics, and feed the residual on.
  bool inner_reversible = false;
  /// false drops the transformer so a stage is shift-back + unmixing only.
  bool use_backbone = true;

  optics::DispersionConfig dispersion{};

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
  std::size_t measurement_width() const { return dispersion.measurement_width(width, channels); }
  std::size_t channels_at(std::size_t level) const { return base_channels << level; }
  std::size_t heads_at(std::size_t level) const { return heads << level; }
  /// Spatial extent after zero padding so every level divides into windows.
  std::size_t padded_extent(std::size_t n) const;
  /// Window used at `level` for a padded full-resolution extent.
  std::size_t window_at(std::size_t padded, std::size_t level) const;
};

/// 32x32x8, d=1, s=8, 16 base channels, one stage.
SstConfig toy_config();

/// Family member by name: "sst-s", "sst-m", "sst-l", "sst-lplus". Shares the
/// remaining fields with `base`.
SstConfig family_config(const std::string& name, SstConfig base = toy_config());

}  // namespace sst::model
