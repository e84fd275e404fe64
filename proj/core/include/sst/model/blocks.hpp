#pragma once

// Building blocks of the spectral-spatial transformer. Feature maps are
// [C, H, W] tensors throughout.

#include <string>

#include "sst/model/parameters.hpp"

namespace sst::model {

// ---------------------------------------------------------------------------
// Feed-forward: 1x1 expand, GELU, depthwise 3x3, GELU, 1x1 project.

template <class T>
struct FfnParams {
  ConvParams<T> expand, depthwise, project;
};

template <class T>
FfnParams<T> make_ffn(ParameterSet<T>& ps, const std::string& name, std::size_t channels, std::size_t mult);

template <class T>
Tensor<T> feed_forward(const Tensor<T>& x, const FfnParams<T>& p);

// ---------------------------------------------------------------------------
// Spectral multi-head self-attention: each channel map is one token.

template <class T>
struct SpectralAttentionParams {
  std::size_t heads = 1;
  Tensor<T> w_query, w_key, w_value;  // [C, C], applied as W * tokens
  Tensor<T> sigma;                     // [heads], learnable temperature
  Tensor<T> w_out, b_out;              // [C, C], [C]
  ConvParams<T> position;              // depthwise 3x3 on V
};

template <class T>
SpectralAttentionParams<T> make_spectral_attention(ParameterSet<T>& ps, const std::string& name,
                                                   std::size_t channels, std::size_t heads);

/// Concatenated heads softmax(sigma_j * Qj Kj^T) Vj as a [C, H*W] matrix,
/// before the output projection and position embedding. Queries and keys
/// are L2-normalised over the spatial tokens.
template <class T>
Tensor<T> spectral_heads(const Tensor<T>& x, const SpectralAttentionParams<T>& p);

/// concat(heads) W + f(V), reshaped back to [C, H, W].
template <class T>
Tensor<T> spectral_msa(const Tensor<T>& x, const SpectralAttentionParams<T>& p);

template <class T>
struct SpectralBlockParams {
  NormParams<T> norm1, norm2;
  SpectralAttentionParams<T> attention;
  FfnParams<T> ffn;
};

template <class T>
SpectralBlockParams<T> make_spectral_block(ParameterSet<T>& ps, const std::string& name, std::size_t channels,
                                           std::size_t heads, std::size_t ffn_mult);

/// x + MSA(LN(x)), then + FFN(LN(.)).
template <class T>
Tensor<T> spectral_attention_block(const Tensor<T>& x, const SpectralBlockParams<T>& p);

// ---------------------------------------------------------------------------
// Windowed spatial self-attention with relative position bias.

template <class T>
struct WindowAttentionParams {
  std::size_t heads = 1;
  std::size_t window = 1;               // window the bias table was built for
  Tensor<T> w_query, w_key, w_value;    // [C, C], applied as tokens * W
  Tensor<T> w_out, b_out;               // [C, C], [C]
  Tensor<T> bias_table;                 // [heads, (2s-1)^2]
};

template <class T>
WindowAttentionParams<T> make_window_attention(ParameterSet<T>& ps, const std::string& name,
                                               std::size_t channels, std::size_t heads, std::size_t window);

/// [C, H, W] -> [(H/s)*(W/s)*s*s, C] tokens, window-major.
template <class T>
Tensor<T> window_partition(const Tensor<T>& x, std::size_t window);
/// Inverse of window_partition.
template <class T>
Tensor<T> window_merge(const Tensor<T>& tokens, std::size_t channels, std::size_t height, std::size_t width,
                       std::size_t window);

/// Cyclic displacement by (-s/2, -s/2) and its inverse.
template <class T>
Tensor<T> shift_windows(const Tensor<T>& x, std::size_t window);
template <class T>
Tensor<T> unshift_windows(const Tensor<T>& x, std::size_t window);

/// For each window, s^2 x s^2 additive mask that blocks attention between
/// pixels that were not adjacent before the cyclic shift. Flattened
/// [windows, s^2, s^2]; 0 where allowed, -100 where blocked.
std::vector<double> shifted_window_mask(std::size_t height, std::size_t width, std::size_t window);

/// Relative position index [s^2 * s^2] into a (2s-1)^2 bias table.
std::vector<std::size_t> relative_position_index(std::size_t window);

/// softmax(Q K^T / sqrt(d) + B [+ mask]) V per window and head, followed by
/// the output projection. Requires H and W divisible by p.window.
template <class T>
Tensor<T> window_attention(const Tensor<T>& x, const WindowAttentionParams<T>& p, bool shifted);

template <class T>
struct SpatialBlockParams {
  NormParams<T> norm1, norm2, norm3;
  WindowAttentionParams<T> regular, shifted;
  FfnParams<T> ffn;
};

template <class T>
SpatialBlockParams<T> make_spatial_block(ParameterSet<T>& ps, const std::string& name, std::size_t channels,
                                         std::size_t heads, std::size_t window, std::size_t ffn_mult);

/// W-MSA, shifted W-MSA, FFN; each pre-normalised with a residual.
template <class T>
Tensor<T> spatial_attention_block(const Tensor<T>& x, const SpatialBlockParams<T>& p);

// ---------------------------------------------------------------------------
// Mask-guided spectral unmixing.

template <class T>
struct UnmixParams {
  ConvParams<T> squeeze;             // 1x1, 2C -> C
  ConvParams<T> k3, k5, k7;          // parallel receptive fields, C -> C
};

template <class T>
UnmixParams<T> make_unmix(ParameterSet<T>& ps, const std::string& name, std::size_t channels);

/// concat(shifted, mask per channel) -> 1x1 -> conv3 + conv5 + conv7.
template <class T>
Tensor<T> spectral_unmix(const Tensor<T>& shifted, const Tensor<T>& mask, const UnmixParams<T>& p);

}  // namespace sst::model
