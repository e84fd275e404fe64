#pragma once

// W-shaped backbone: a spectral-attention U followed by a spatial-attention
// U, each with nested dense skips between same-resolution nodes.
//
// Node (i, j) lives at level i (resolution 1/2^i) and column j. Column 0 is
// the encoder path; node (i, j>0) fuses every earlier node on its level with
// the upsampled node (i+1, j-1). The U's output is node (0, levels).

#include <vector>

#include "sst/model/blocks.hpp"
#include "sst/model/config.hpp"

namespace sst::model {

template <class T, class Block>
struct UNetParams {
  std::size_t levels = 0;
  std::vector<std::vector<std::vector<Block>>> nodes;  // [level][column][depth]
  std::vector<ConvParams<T>> down;                     // 4x4 stride-2, level i -> i+1
  std::vector<std::vector<ConvParams<T>>> up;          // [level][column]: 2x2 transposed, i+1 -> i
  std::vector<std::vector<ConvParams<T>>> fuse;        // [level][column-1]: 1x1 over the concatenation
};

template <class T>
struct BackboneParams {
  std::size_t padded_height = 0, padded_width = 0;
  ConvParams<T> embed;  // 3x3, C -> base
  UNetParams<T, SpectralBlockParams<T>> spectral;
  UNetParams<T, SpatialBlockParams<T>> spatial;
  ConvParams<T> mapping;  // 1x1, base -> C, zero-initialised
};

template <class T>
BackboneParams<T> make_backbone(ParameterSet<T>& ps, const std::string& name, const SstConfig& cfg);

/// Pads to the working extent and embeds a [C,H,W] cube into base features.
template <class T>
Tensor<T> backbone_embed(const Tensor<T>& cube, const BackboneParams<T>& p);
template <class T>
Tensor<T> spectral_unet(const Tensor<T>& features, const BackboneParams<T>& p);
template <class T>
Tensor<T> spatial_unet(const Tensor<T>& features, const BackboneParams<T>& p);
/// Projects padded features through `mapping` and crops to [C, height, width].
template <class T>
Tensor<T> map_to_cube(const Tensor<T>& features, const ConvParams<T>& mapping, std::size_t height,
                      std::size_t width);

/// Full backbone: embed, spectral U, spatial U, mapping. Output has the
/// input's [C, H, W] shape.
template <class T>
Tensor<T> sst_backbone(const Tensor<T>& cube, const BackboneParams<T>& p);

}  // namespace sst::model
