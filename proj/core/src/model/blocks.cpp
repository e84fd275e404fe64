#include "sst/model/blocks.hpp"

#include <cmath>
#include <stdexcept>

#include "sst/autodiff/ops.hpp"

namespace sst::model {

using namespace sst::ad;

namespace {

template <class T>
Tensor<T> conv(const Tensor<T>& x, const ConvParams<T>& p, std::size_t groups = 1) {
  return conv2d(x, p.kernel, p.bias, groups);
}

// Adds a per-row bias b[C] to a [C, ...] tensor.
template <class T>
Tensor<T> add_leading_bias(const Tensor<T>& x, const Tensor<T>& b) {
  Shape s(x.rank(), 1);
  s[0] = b.size();
  return add(x, broadcast_to(reshape(b, s), x.shape()));
}

// Adds a per-column bias b[C] to an [N, C] tensor.
template <class T>
Tensor<T> add_trailing_bias(const Tensor<T>& x, const Tensor<T>& b) {
  return add(x, broadcast_to(b, x.shape()));
}

template <class T>
struct SpectralCore {
  Tensor<T> heads;  // [C, N]
  Tensor<T> value;  // [C, N]
};

template <class T>
SpectralCore<T> spectral_core(const Tensor<T>& x, const SpectralAttentionParams<T>& p) {
  if (x.rank() != 3) throw ShapeError("spectral attention expects [C,H,W], got " + to_string(x.shape()));
  const std::size_t c = x.extent(0), n = x.extent(1) * x.extent(2);
  const std::size_t h = p.heads;
  if (h == 0 || c % h != 0)
    throw std::invalid_argument("spectral attention: " + std::to_string(h) + " heads do not divide " +
                                std::to_string(c) + " channels");
  const std::size_t d = c / h;
  auto tokens = reshape(x, {c, n});
  auto q = matmul(p.w_query, tokens);
  auto k = matmul(p.w_key, tokens);
  auto v = matmul(p.w_value, tokens);
  auto qh = l2_normalize(reshape(q, {h, d, n}), 2);
  auto kh = l2_normalize(reshape(k, {h, d, n}), 2);
  auto scores = matmul(qh, permute(kh, {0, 2, 1}));
  scores = mul(scores, broadcast_to(reshape(p.sigma, {h, 1, 1}), Shape{h, d, d}));
  auto attn = softmax(scores, 2);
  auto out = matmul(attn, reshape(v, {h, d, n}));
  return {reshape(out, {c, n}), v};
}

}  // namespace

// ---------------------------------------------------------------------------

template <class T>
FfnParams<T> make_ffn(ParameterSet<T>& ps, const std::string& name, std::size_t channels, std::size_t mult) {
  const std::size_t hidden = channels * mult;
  FfnParams<T> p;
  p.expand = make_conv(ps, name + ".expand", channels, hidden, 1);
  p.depthwise = make_conv(ps, name + ".depthwise", hidden, hidden, 3, true, hidden);
  p.project = make_conv(ps, name + ".project", hidden, channels, 1);
  return p;
}

template <class T>
Tensor<T> feed_forward(const Tensor<T>& x, const FfnParams<T>& p) {
  auto h = gelu(conv(x, p.expand));
  h = gelu(conv(h, p.depthwise, p.depthwise.kernel.extent(0)));
  return conv(h, p.project);
}

// ---------------------------------------------------------------------------

template <class T>
SpectralAttentionParams<T> make_spectral_attention(ParameterSet<T>& ps, const std::string& name,
                                                   std::size_t channels, std::size_t heads) {
  SpectralAttentionParams<T> p;
  p.heads = heads;
  p.w_query = ps.create(name + ".w_query", {channels, channels}, Init::fan_in_uniform);
  p.w_key = ps.create(name + ".w_key", {channels, channels}, Init::fan_in_uniform);
  p.w_value = ps.create(name + ".w_value", {channels, channels}, Init::fan_in_uniform);
  p.sigma = ps.create(name + ".sigma", {heads}, Init::ones);
  p.w_out = ps.create(name + ".w_out", {channels, channels}, Init::fan_in_uniform);
  p.b_out = ps.create(name + ".b_out", {channels}, Init::zeros);
  p.position = make_conv(ps, name + ".position", channels, channels, 3, false, channels);
  return p;
}

template <class T>
Tensor<T> spectral_heads(const Tensor<T>& x, const SpectralAttentionParams<T>& p) {
  return spectral_core(x, p).heads;
}

template <class T>
Tensor<T> spectral_msa(const Tensor<T>& x, const SpectralAttentionParams<T>& p) {
  const std::size_t c = x.extent(0), hh = x.extent(1), ww = x.extent(2);
  auto core = spectral_core(x, p);
  auto projected = add_leading_bias(matmul(p.w_out, core.heads), p.b_out);
  auto position = conv2d(reshape(core.value, {c, hh, ww}), p.position.kernel, p.position.bias, c);
  return add(reshape(projected, {c, hh, ww}), position);
}

template <class T>
SpectralBlockParams<T> make_spectral_block(ParameterSet<T>& ps, const std::string& name, std::size_t channels,
                                           std::size_t heads, std::size_t ffn_mult) {
  SpectralBlockParams<T> p;
  p.norm1 = make_norm(ps, name + ".norm1", channels);
  p.attention = make_spectral_attention(ps, name + ".msa", channels, heads);
  p.norm2 = make_norm(ps, name + ".norm2", channels);
  p.ffn = make_ffn(ps, name + ".ffn", channels, ffn_mult);
  return p;
}

template <class T>
Tensor<T> spectral_attention_block(const Tensor<T>& x, const SpectralBlockParams<T>& p) {
  auto y = add(x, spectral_msa(layernorm(x, 0, p.norm1.gain, p.norm1.bias), p.attention));
  return add(y, feed_forward(layernorm(y, 0, p.norm2.gain, p.norm2.bias), p.ffn));
}

// ---------------------------------------------------------------------------

template <class T>
WindowAttentionParams<T> make_window_attention(ParameterSet<T>& ps, const std::string& name,
                                               std::size_t channels, std::size_t heads, std::size_t window) {
  WindowAttentionParams<T> p;
  p.heads = heads;
  p.window = window;
  p.w_query = ps.create(name + ".w_query", {channels, channels}, Init::fan_in_uniform);
  p.w_key = ps.create(name + ".w_key", {channels, channels}, Init::fan_in_uniform);
  p.w_value = ps.create(name + ".w_value", {channels, channels}, Init::fan_in_uniform);
  p.w_out = ps.create(name + ".w_out", {channels, channels}, Init::fan_in_uniform);
  p.b_out = ps.create(name + ".b_out", {channels}, Init::zeros);
  const std::size_t span = 2 * window - 1;
  p.bias_table = ps.create(name + ".position_bias", {heads, span * span}, Init::zeros);
  return p;
}

template <class T>
Tensor<T> window_partition(const Tensor<T>& x, std::size_t window) {
  if (x.rank() != 3) throw ShapeError("window_partition expects [C,H,W], got " + to_string(x.shape()));
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  if (window == 0 || h % window || w % window)
    throw ShapeError("window " + std::to_string(window) + " does not divide " + std::to_string(h) + "x" +
                     std::to_string(w));
  auto t = reshape(permute(x, {1, 2, 0}), {h / window, window, w / window, window, c});
  t = permute(t, {0, 2, 1, 3, 4});
  return reshape(t, {h * w, c});
}

template <class T>
Tensor<T> window_merge(const Tensor<T>& tokens, std::size_t channels, std::size_t height, std::size_t width,
                       std::size_t window) {
  if (window == 0 || height % window || width % window)
    throw ShapeError("window " + std::to_string(window) + " does not divide " + std::to_string(height) + "x" +
                     std::to_string(width));
  auto t = reshape(tokens, {height / window, width / window, window, window, channels});
  t = reshape(permute(t, {0, 2, 1, 3, 4}), {height, width, channels});
  return permute(t, {2, 0, 1});
}

template <class T>
Tensor<T> shift_windows(const Tensor<T>& x, std::size_t window) {
  const auto s = static_cast<std::int64_t>(window / 2);
  return roll(roll(x, 1, -s), 2, -s);
}

template <class T>
Tensor<T> unshift_windows(const Tensor<T>& x, std::size_t window) {
  const auto s = static_cast<std::int64_t>(window / 2);
  return roll(roll(x, 2, s), 1, s);
}

std::vector<double> shifted_window_mask(std::size_t height, std::size_t width, std::size_t window) {
  const std::size_t shift = window / 2;
  auto region = [&](std::size_t i, std::size_t n) -> std::size_t {
    if (i < n - window) return 0;
    if (i < n - shift) return 1;
    return 2;
  };
  const std::size_t nwy = height / window, nwx = width / window, area = window * window;
  std::vector<double> mask(nwy * nwx * area * area, 0.0);
  std::vector<std::size_t> label(area);
  for (std::size_t wy = 0; wy < nwy; ++wy)
    for (std::size_t wx = 0; wx < nwx; ++wx) {
      for (std::size_t iy = 0; iy < window; ++iy)
        for (std::size_t ix = 0; ix < window; ++ix)
          label[iy * window + ix] = region(wy * window + iy, height) * 3 + region(wx * window + ix, width);
      double* m = mask.data() + (wy * nwx + wx) * area * area;
      for (std::size_t i = 0; i < area; ++i)
        for (std::size_t j = 0; j < area; ++j) m[i * area + j] = label[i] == label[j] ? 0.0 : -100.0;
    }
  return mask;
}

std::vector<std::size_t> relative_position_index(std::size_t window) {
  const std::size_t area = window * window, span = 2 * window - 1;
  std::vector<std::size_t> index(area * area);
  for (std::size_t i = 0; i < area; ++i)
    for (std::size_t j = 0; j < area; ++j) {
      const std::size_t dy = i / window + window - 1 - j / window;
      const std::size_t dx = i % window + window - 1 - j % window;
      index[i * area + j] = dy * span + dx;
    }
  return index;
}

template <class T>
Tensor<T> window_attention(const Tensor<T>& x, const WindowAttentionParams<T>& p, bool shifted) {
  if (x.rank() != 3) throw ShapeError("window attention expects [C,H,W], got " + to_string(x.shape()));
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::size_t s = p.window, heads = p.heads;
  if (heads == 0 || c % heads) throw std::invalid_argument("window attention: heads must divide channels");
  const std::size_t d = c / heads, area = s * s, windows = (h / s) * (w / s);

  auto source = shifted ? shift_windows(x, s) : x;
  auto tokens = window_partition(source, s);  // throws if s does not divide H, W
  auto to_heads = [&](const Tensor<T>& t) {
    return reshape(permute(reshape(t, {windows, area, heads, d}), {0, 2, 1, 3}), {windows * heads, area, d});
  };
  auto q = to_heads(matmul(tokens, p.w_query));
  auto k = to_heads(matmul(tokens, p.w_key));
  auto v = to_heads(matmul(tokens, p.w_value));

  auto scores = scale(matmul(q, permute(k, {0, 2, 1})), T(1) / std::sqrt(static_cast<T>(d)));

  const auto rel = relative_position_index(s);
  const std::size_t table = (2 * s - 1) * (2 * s - 1);
  std::vector<std::size_t> index(heads * area * area);
  for (std::size_t hd = 0; hd < heads; ++hd)
    for (std::size_t r = 0; r < rel.size(); ++r) index[hd * rel.size() + r] = hd * table + rel[r];
  auto bias = gather(p.bias_table, index, {heads, area, area});
  scores = add(scores,
               reshape(broadcast_to(bias, Shape{windows, heads, area, area}), {windows * heads, area, area}));

  if (shifted) {
    const auto m = shifted_window_mask(h, w, s);
    Tensor<T> mask({windows, 1, area, area}, std::vector<T>(m.begin(), m.end()));
    scores = add(scores,
                 reshape(broadcast_to(mask, Shape{windows, heads, area, area}), {windows * heads, area, area}));
  }

  auto attn = softmax(scores, 2);
  auto out = matmul(attn, v);
  out = reshape(permute(reshape(out, {windows, heads, area, d}), {0, 2, 1, 3}), {windows * area, c});
  out = add_trailing_bias(matmul(out, p.w_out), p.b_out);
  auto merged = window_merge(out, c, h, w, s);
  return shifted ? unshift_windows(merged, s) : merged;
}

template <class T>
SpatialBlockParams<T> make_spatial_block(ParameterSet<T>& ps, const std::string& name, std::size_t channels,
                                         std::size_t heads, std::size_t window, std::size_t ffn_mult) {
  SpatialBlockParams<T> p;
  p.norm1 = make_norm(ps, name + ".norm1", channels);
  p.regular = make_window_attention(ps, name + ".wmsa", channels, heads, window);
  p.norm2 = make_norm(ps, name + ".norm2", channels);
  p.shifted = make_window_attention(ps, name + ".swmsa", channels, heads, window);
  p.norm3 = make_norm(ps, name + ".norm3", channels);
  p.ffn = make_ffn(ps, name + ".ffn", channels, ffn_mult);
  return p;
}

template <class T>
Tensor<T> spatial_attention_block(const Tensor<T>& x, const SpatialBlockParams<T>& p) {
  auto y = add(x, window_attention(layernorm(x, 0, p.norm1.gain, p.norm1.bias), p.regular, false));
  y = add(y, window_attention(layernorm(y, 0, p.norm2.gain, p.norm2.bias), p.shifted, true));
  return add(y, feed_forward(layernorm(y, 0, p.norm3.gain, p.norm3.bias), p.ffn));
}

// ---------------------------------------------------------------------------

template <class T>
UnmixParams<T> make_unmix(ParameterSet<T>& ps, const std::string& name, std::size_t channels) {
  UnmixParams<T> p;
  p.squeeze = make_conv(ps, name + ".squeeze", 2 * channels, channels, 1);
  p.k3 = make_conv(ps, name + ".conv3", channels, channels, 3);
  p.k5 = make_conv(ps, name + ".conv5", channels, channels, 5);
  p.k7 = make_conv(ps, name + ".conv7", channels, channels, 7);
  return p;
}

template <class T>
Tensor<T> spectral_unmix(const Tensor<T>& shifted, const Tensor<T>& mask, const UnmixParams<T>& p) {
  if (shifted.rank() != 3 || mask.rank() != 2 || shifted.extent(1) != mask.extent(0) ||
      shifted.extent(2) != mask.extent(1))
    throw ShapeError("spectral_unmix: cube " + to_string(shifted.shape()) + " vs mask " + to_string(mask.shape()));
  const std::size_t c = shifted.extent(0), h = shifted.extent(1), w = shifted.extent(2);
  if (p.squeeze.kernel.extent(1) != 2 * c)
    throw ShapeError("spectral_unmix: weights built for " + std::to_string(p.squeeze.kernel.extent(1) / 2) +
                     " channels, input has " + std::to_string(c));
  auto guide = broadcast_to(reshape(mask, {1, h, w}), Shape{c, h, w});
  auto u = conv(concat<T>({shifted, guide}, 0), p.squeeze);
  return add(add(conv(u, p.k3), conv(u, p.k5)), conv(u, p.k7));
}

#define SST_INSTANTIATE(T)                                                                                       \
  template FfnParams<T> make_ffn(ParameterSet<T>&, const std::string&, std::size_t, std::size_t);               \
  template Tensor<T> feed_forward(const Tensor<T>&, const FfnParams<T>&);                                       \
  template SpectralAttentionParams<T> make_spectral_attention(ParameterSet<T>&, const std::string&, std::size_t, \
                                                              std::size_t);                                     \
  template Tensor<T> spectral_heads(const Tensor<T>&, const SpectralAttentionParams<T>&);                       \
  template Tensor<T> spectral_msa(const Tensor<T>&, const SpectralAttentionParams<T>&);                         \
  template SpectralBlockParams<T> make_spectral_block(ParameterSet<T>&, const std::string&, std::size_t,        \
                                                      std::size_t, std::size_t);                                \
  template Tensor<T> spectral_attention_block(const Tensor<T>&, const SpectralBlockParams<T>&);                 \
  template WindowAttentionParams<T> make_window_attention(ParameterSet<T>&, const std::string&, std::size_t,    \
                                                          std::size_t, std::size_t);                            \
  template Tensor<T> window_partition(const Tensor<T>&, std::size_t);                                           \
  template Tensor<T> window_merge(const Tensor<T>&, std::size_t, std::size_t, std::size_t, std::size_t);        \
  template Tensor<T> shift_windows(const Tensor<T>&, std::size_t);                                              \
  template Tensor<T> unshift_windows(const Tensor<T>&, std::size_t);                                            \
  template Tensor<T> window_attention(const Tensor<T>&, const WindowAttentionParams<T>&, bool);                 \
  template SpatialBlockParams<T> make_spatial_block(ParameterSet<T>&, const std::string&, std::size_t,          \
                                                    std::size_t, std::size_t, std::size_t);                     \
  template Tensor<T> spatial_attention_block(const Tensor<T>&, const SpatialBlockParams<T>&);                   \
  template UnmixParams<T> make_unmix(ParameterSet<T>&, const std::string&, std::size_t);                        \
  template Tensor<T> spectral_unmix(const Tensor<T>&, const Tensor<T>&, const UnmixParams<T>&);

SST_INSTANTIATE(float)
SST_INSTANTIATE(double)

}  // namespace sst::model
