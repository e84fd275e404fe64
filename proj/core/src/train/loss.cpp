#include "sst/train/loss.hpp"

#include <cmath>
#include <stdexcept>

#include "sst/autodiff/ops.hpp"

namespace sst::train {

void LossConfig::validate() const {
  if (!(xi >= 0.0) || !std::isfinite(xi)) throw std::invalid_argument("loss weight xi must be finite and >= 0");
}

template <class T>
LossTerms<T> reconstruction_loss(const Tensor<T>& x_out, const Tensor<T>& x_truth, const Tensor<T>& y,
                                 const Tensor<T>& mask, const optics::DispersionConfig& dispersion,
                                 const LossConfig& cfg) {
  cfg.validate();
  if (x_out.shape() != x_truth.shape())
    throw ad::ShapeError("loss: reconstruction " + ad::to_string(x_out.shape()) + " vs truth " +
                         ad::to_string(x_truth.shape()));
  auto reduce = [&](const Tensor<T>& d) { return cfg.normalize ? ad::mean(ad::mul(d, d)) : ad::sum_squares(d); };
  LossTerms<T> out;
  out.fidelity = reduce(ad::sub(x_out, x_truth));
  auto z = optics::forward_project(x_out, mask, dispersion);
  if (z.shape() != y.shape())
    throw ad::ShapeError("loss: measurement " + ad::to_string(y.shape()) + " vs re-projection " +
                         ad::to_string(z.shape()));
  out.reversible = reduce(ad::sub(z, y));
  out.total = cfg.xi == 0.0 ? out.fidelity : ad::add(out.fidelity, ad::scale(out.reversible, static_cast<T>(cfg.xi)));
  return out;
}

template LossTerms<float> reconstruction_loss(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                              const Tensor<float>&, const optics::DispersionConfig&,
                                              const LossConfig&);
template LossTerms<double> reconstruction_loss(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                               const Tensor<double>&, const optics::DispersionConfig&,
                                               const LossConfig&);

}  // namespace sst::train
