#include "sst/train/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace sst::train {

void Schedule::validate() const {
  // lr = 0 is allowed so training can be frozen.
  if (!(initial_lr >= 0.0) || !std::isfinite(initial_lr)) throw std::invalid_argument("learning rate must be >= 0");
  if (period < 1) throw std::invalid_argument("halving period must be >= 1");
}

double Schedule::lr(std::size_t epoch) const {
  return std::ldexp(initial_lr, -static_cast<int>(epoch / period));
}

}  // namespace sst::train
