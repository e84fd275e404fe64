#include "sst/model/backbone.hpp"

#include "sst/autodiff/ops.hpp"

namespace sst::model {

using namespace sst::ad;

namespace {

template <class T, class Block, class MakeBlock>
UNetParams<T, Block> make_unet(ParameterSet<T>& ps, const std::string& name, const SstConfig& cfg,
                               MakeBlock make_block) {
  UNetParams<T, Block> u;
  u.levels = cfg.levels;
  u.nodes.resize(cfg.levels + 1);
  u.up.resize(cfg.levels);
  u.fuse.resize(cfg.levels + 1);
  // Creation order is encoder first, then columns left to right, so the
  // checkpoint reads like the data flow.
  for (std::size_t col = 0; col <= cfg.levels; ++col)
    for (std::size_t lvl = 0; lvl + col <= cfg.levels; ++lvl) {
      const std::size_t ch = cfg.channels_at(lvl);
      const std::string node = name + ".node" + std::to_string(lvl) + "_" + std::to_string(col);
      if (col == 0 && lvl > 0) {
        const std::size_t prev = cfg.channels_at(lvl - 1);
        auto down = make_conv(ps, name + ".down" + std::to_string(lvl - 1), prev, ch, 4);
        u.down.push_back(down);
      }
      if (col > 0) {
        const std::size_t below = cfg.channels_at(lvl + 1);
        ConvParams<T> up;
        up.kernel = ps.create(node + ".up.weight", {below, ch, 2, 2}, Init::fan_in_uniform);
        up.bias = ps.create(node + ".up.bias", {ch}, Init::zeros);
        u.up[lvl].push_back(up);
        u.fuse[lvl].push_back(make_conv(ps, node + ".fuse", (col + 1) * ch, ch, 1));
      }
      std::vector<Block> blocks;
      for (std::size_t b = 0; b < cfg.depth; ++b)
        blocks.push_back(make_block(node + ".block" + std::to_string(b), lvl));
      u.nodes[lvl].push_back(std::move(blocks));
    }
  return u;
}

template <class T, class Block, class Apply>
Tensor<T> run_unet(const Tensor<T>& x, const UNetParams<T, Block>& u, Apply apply) {
  auto run_node = [&](Tensor<T> h, std::size_t lvl, std::size_t col) {
    for (const auto& block : u.nodes[lvl][col]) h = apply(h, block);
    return h;
  };
  // grid[lvl][col]
  std::vector<std::vector<Tensor<T>>> grid(u.levels + 1);
  grid[0].push_back(run_node(x, 0, 0));
  for (std::size_t lvl = 1; lvl <= u.levels; ++lvl) {
    const auto& down = u.down[lvl - 1];
    grid[lvl].push_back(run_node(conv2d_strided(grid[lvl - 1][0], down.kernel, down.bias, 2, 1), lvl, 0));
  }
  for (std::size_t col = 1; col <= u.levels; ++col)
    for (std::size_t lvl = 0; lvl + col <= u.levels; ++lvl) {
      const auto& up = u.up[lvl][col - 1];
      std::vector<Tensor<T>> parts = grid[lvl];
      parts.push_back(conv_transpose2d(grid[lvl + 1][col - 1], up.kernel, up.bias, 2));
      const auto& fuse = u.fuse[lvl][col - 1];
      grid[lvl].push_back(run_node(conv2d(concat(parts, 0), fuse.kernel, fuse.bias), lvl, col));
    }
  return grid[0][u.levels];
}

}  // namespace

template <class T>
BackboneParams<T> make_backbone(ParameterSet<T>& ps, const std::string& name, const SstConfig& cfg) {
  cfg.validate();
  BackboneParams<T> p;
  p.padded_height = cfg.padded_extent(cfg.height);
  p.padded_width = cfg.padded_extent(cfg.width);
  p.embed = make_conv(ps, name + ".embed", cfg.channels, cfg.base_channels, 3);
  p.spectral = make_unet<T, SpectralBlockParams<T>>(ps, name + ".spectral", cfg,
                                                     [&](const std::string& n, std::size_t lvl) {
                                                       return make_spectral_block(ps, n, cfg.channels_at(lvl),
                                                                                  cfg.heads_at(lvl), cfg.ffn_mult);
                                                     });
  const std::size_t pad_min = std::min(p.padded_height, p.padded_width);
  p.spatial = make_unet<T, SpatialBlockParams<T>>(
      ps, name + ".spatial", cfg, [&](const std::string& n, std::size_t lvl) {
        return make_spatial_block(ps, n, cfg.channels_at(lvl), cfg.heads_at(lvl), cfg.window_at(pad_min, lvl),
                                  cfg.ffn_mult);
      });
  p.mapping = make_conv(ps, name + ".mapping", cfg.base_channels, cfg.channels, 1, true, 1, Init::zeros);
  return p;
}

template <class T>
Tensor<T> backbone_embed(const Tensor<T>& cube, const BackboneParams<T>& p) {
  if (cube.rank() != 3) throw ShapeError("backbone expects [C,H,W], got " + to_string(cube.shape()));
  const std::size_t h = cube.extent(1), w = cube.extent(2);
  if (h > p.padded_height || w > p.padded_width)
    throw ShapeError("backbone built for at most " + std::to_string(p.padded_height) + "x" +
                     std::to_string(p.padded_width) + ", got " + to_string(cube.shape()));
  auto x = cube;
  if (h != p.padded_height) x = pad(x, 1, 0, p.padded_height - h);
  if (w != p.padded_width) x = pad(x, 2, 0, p.padded_width - w);
  return conv2d(x, p.embed.kernel, p.embed.bias);
}

template <class T>
Tensor<T> spectral_unet(const Tensor<T>& features, const BackboneParams<T>& p) {
  return run_unet(features, p.spectral,
                  [](const Tensor<T>& h, const SpectralBlockParams<T>& b) { return spectral_attention_block(h, b); });
}

template <class T>
Tensor<T> spatial_unet(const Tensor<T>& features, const BackboneParams<T>& p) {
  return run_unet(features, p.spatial,
                  [](const Tensor<T>& h, const SpatialBlockParams<T>& b) { return spatial_attention_block(h, b); });
}

template <class T>
Tensor<T> map_to_cube(const Tensor<T>& features, const ConvParams<T>& mapping, std::size_t height,
                      std::size_t width) {
  auto out = conv2d(features, mapping.kernel, mapping.bias);
  if (out.extent(1) != height) out = slice(out, 1, 0, height);
  if (out.extent(2) != width) out = slice(out, 2, 0, width);
  return out;
}

template <class T>
Tensor<T> sst_backbone(const Tensor<T>& cube, const BackboneParams<T>& p) {
  auto features = spatial_unet(spectral_unet(backbone_embed(cube, p), p), p);
  return map_to_cube(features, p.mapping, cube.extent(1), cube.extent(2));
}

#define SST_INSTANTIATE(T)                                                                                  \
  template BackboneParams<T> make_backbone(ParameterSet<T>&, const std::string&, const SstConfig&);        \
  template Tensor<T> backbone_embed(const Tensor<T>&, const BackboneParams<T>&);                           \
  template Tensor<T> spectral_unet(const Tensor<T>&, const BackboneParams<T>&);                            \
  template Tensor<T> spatial_unet(const Tensor<T>&, const BackboneParams<T>&);                             \
  template Tensor<T> map_to_cube(const Tensor<T>&, const ConvParams<T>&, std::size_t, std::size_t);        \
  template Tensor<T> sst_backbone(const Tensor<T>&, const BackboneParams<T>&);

SST_INSTANTIATE(float)
SST_INSTANTIATE(double)

}  // namespace sst::model
