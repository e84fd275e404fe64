#include "sst/model/config.hpp"

#include <algorithm>
#include <stdexcept>

namespace sst::model {

namespace {

[[noreturn]] void reject(const std::string& what) { throw std::invalid_argument("SstConfig: " + what); }

}  // namespace

std::size_t SstConfig::padded_extent(std::size_t n) const {
  const std::size_t unit = std::size_t{1} << levels;
  for (std::size_t m = ((n + unit - 1) / unit) * unit;; m += unit) {
    bool ok = true;
    for (std::size_t l = 0; l <= levels && ok; ++l) {
      const std::size_t e = m >> l;
      ok = e % std::min(window, e) == 0;
    }
    if (ok) return m;
  }
}

std::size_t SstConfig::window_at(std::size_t padded, std::size_t level) const {
  return std::min(window, padded >> level);
}

void SstConfig::validate() const {
  if (height == 0 || width == 0 || channels == 0) reject("height, width and channels must be positive");
  if (stages == 0) reject("stages must be at least 1");
  if (base_channels == 0 || heads == 0 || depth == 0 || ffn_mult == 0) reject("widths must be positive");
  if (window == 0) reject("window must be positive");
  if (levels > 6) reject("too many levels");
  for (std::size_t l = 0; l <= levels; ++l)
    if (channels_at(l) % heads_at(l) != 0)
      reject("heads (" + std::to_string(heads_at(l)) + ") must divide channels (" +
             std::to_string(channels_at(l)) + ") at level " + std::to_string(l));
  if (inner_reversible && stages != 1) reject("inner_reversible applies to single-stage networks only");
  if (inner_reversible && !use_backbone) reject("inner_reversible needs the backbone");
  if (dispersion.reference_channel >= channels) reject("reference channel out of range");
}

SstConfig toy_config() {
  SstConfig cfg;
  cfg.height = 32;
  cfg.width = 32;
  cfg.channels = 8;
  cfg.dispersion.step = 1;
  cfg.window = 8;
  cfg.base_channels = 16;
  cfg.stages = 1;
  return cfg;
}

SstConfig family_config(const std::string& name, SstConfig base) {
  base.inner_reversible = false;
  if (name == "sst-s") {
    base.stages = 1;
    base.inner_reversible = true;
  } else if (name == "sst-m") {
    base.stages = 2;
  } else if (name == "sst-l") {
    base.stages = 4;
  } else if (name == "sst-lplus") {
    base.stages = 9;
  } else {
    throw std::invalid_argument("unknown model family member '" + name + "'");
  }
  return base;
}

}  // namespace sst::model
