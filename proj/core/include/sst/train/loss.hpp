#pragma once

#include "sst/autodiff/tensor.hpp"
#include "sst/optics/cassi.hpp"

namespace sst::train {

using ad::Tensor;

struct LossConfig {
  /// Weight of the measurement-space term.
  double xi = 0.2;
  /// Mean squared error when true, raw squared sums otherwise.
  bool normalize = true;

  void validate() const;
};

template <class T>
struct LossTerms {
  Tensor<T> total;
  Tensor<T> fidelity;    // cube term
  Tensor<T> reversible;  // measurement term, before weighting
};

/// |x_out - x_truth|^2 + xi * |G(x_out) - y|^2 with the noiseless optics G.
/// Both terms stay on the tape.
template <class T>
LossTerms<T> reconstruction_loss(const Tensor<T>& x_out, const Tensor<T>& x_truth, const Tensor<T>& y,
                                 const Tensor<T>& mask, const optics::DispersionConfig& dispersion,
                                 const LossConfig& cfg = {});

}  // namespace sst::train
