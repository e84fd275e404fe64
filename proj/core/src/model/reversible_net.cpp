#include "sst/model/reversible_net.hpp"

#include "sst/autodiff/ops.hpp"
#include "sst/optics/cassi.hpp"

namespace sst::model {

using namespace sst::ad;

template <class T>
ReversibleNet<T>::ReversibleNet(const SstConfig& cfg, std::uint64_t seed) : cfg_(cfg), params_(seed) {
  cfg_.validate();
  for (std::size_t s = 0; s < cfg_.stages; ++s) {
    const std::string name = "stage" + std::to_string(s);
    StageWeights<T> w;
    w.unmix = make_unmix(params_, name + ".unmix", cfg_.channels);
    if (cfg_.use_backbone) w.backbone = make_backbone(params_, name + ".backbone", cfg_);
    if (cfg_.inner_reversible) {
      w.mid_mapping =
          make_conv(params_, name + ".mid_mapping", cfg_.base_channels, cfg_.channels, 1, true, 1, Init::zeros);
      w.reembed = make_conv(params_, name + ".reembed", 2 * cfg_.channels, cfg_.base_channels, 1);
    }
    stages_.push_back(std::move(w));
  }
}

template <class T>
Tensor<T> ReversibleNet<T>::stage_input(const Tensor<T>& measurement, const Tensor<T>& mask,
                                        const UnmixParams<T>& unmix) const {
  // The shifted-back measurement sums about C/2 masked channels per pixel;
  // rescale to cube magnitude before unmixing.
  auto shifted = scale(optics::shift_back(measurement, cfg_.dispersion, cfg_.channels),
                       T(2) / static_cast<T>(cfg_.channels));
  return spectral_unmix(shifted, mask, unmix);
}

template <class T>
Tensor<T> ReversibleNet<T>::initial_estimate(const Tensor<T>& y, const Tensor<T>& mask) const {
  return stage_input(y, mask, stages_.front().unmix);
}

template <class T>
Tensor<T> ReversibleNet<T>::reconstruct(const Tensor<T>& y, const Tensor<T>& mask, StageTrace<T>* trace) const {
  const std::size_t h = cfg_.height, w = cfg_.width, c = cfg_.channels;
  if (y.shape() != Shape{h, cfg_.measurement_width()} || mask.shape() != Shape{h, w})
    throw ShapeError("reconstruct: expected measurement [" + std::to_string(h) + "," +
                     std::to_string(cfg_.measurement_width()) + "] and mask [" + std::to_string(h) + "," +
                     std::to_string(w) + "], got " + to_string(y.shape()) + " and " + to_string(mask.shape()));
  auto project = [&](const Tensor<T>& cube) { return optics::forward_project(cube, mask, cfg_.dispersion); };

  Tensor<T> x;
  std::optional<Tensor<T>> z;  // re-projection of the latest estimate
  for (std::size_t n = 0; n < stages_.size(); ++n) {
    const auto& stage = stages_[n];
    const Tensor<T> input = optics::residual_input(y, z);
    auto u = stage_input(input, mask, stage.unmix);
    if (n == 0) x = u;  // x_0
    if (stage.backbone) {
      const auto& bb = *stage.backbone;
      if (stage.mid_mapping) {
        auto features = spectral_unet(backbone_embed(u, bb), bb);
        auto x_mid = add(x, map_to_cube(features, *stage.mid_mapping, h, w));
        auto residual = optics::residual_input(y, std::optional<Tensor<T>>(project(x_mid)));
        auto shifted = scale(optics::shift_back(residual, cfg_.dispersion, c), T(2) / static_cast<T>(c));
        auto guide = broadcast_to(reshape(mask, {1, h, w}), Shape{c, h, w});
        auto injected = conv2d(concat<T>({shifted, guide}, 0), stage.reembed->kernel, stage.reembed->bias);
        if (bb.padded_height != h) injected = pad(injected, 1, 0, bb.padded_height - h);
        if (bb.padded_width != w) injected = pad(injected, 2, 0, bb.padded_width - w);
        features = spatial_unet(add(features, injected), bb);
        x = add(x_mid, map_to_cube(features, bb.mapping, h, w));
      } else {
        x = add(x, sst_backbone(u, bb));
      }
    } else if (n > 0) {
      x = add(x, u);
    }
    if (trace || n + 1 < stages_.size()) z = project(x);
    if (trace) {
      trace->inputs.push_back(input);
      trace->estimates.push_back(x);
      trace->reprojections.push_back(*z);
      double energy = 0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = static_cast<double>(y.data()[i]) - static_cast<double>(z->data()[i]);
        energy += d * d;
      }
      trace->residual_energy.push_back(energy);
    }
  }
  return x;
}

template class ReversibleNet<float>;
template class ReversibleNet<double>;

}  // namespace sst::model
