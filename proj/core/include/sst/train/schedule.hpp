#pragma once

#include <cstddef>

namespace sst::train {

/// Step decay: the rate halves every `period` epochs.
struct Schedule {
  double initial_lr = 4e-4;
  std::size_t period = 50;
  std::size_t epochs = 300;

  void validate() const;
  double lr(std::size_t epoch) const;
};

}  // namespace sst::train
