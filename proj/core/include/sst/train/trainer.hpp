#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "sst/model/reversible_net.hpp"
#include "sst/train/loss.hpp"
#include "sst/train/schedule.hpp"

namespace sst::train {

/// Training scenes are [C,H',W'] cubes with H' >= height and W' >= width;
/// each iteration draws a random crop. Validation scenes are used whole and
/// must match the model extent.
template <class T>
struct Dataset {
  std::vector<Tensor<T>> train;
  std::vector<Tensor<T>> validation;
  Tensor<T> mask;  // [height, width]
};

struct TrainConfig {
  Schedule schedule;
  std::size_t iterations_per_epoch = 10;
  std::size_t batch_size = 1;
  LossConfig loss;
  optics::NoiseModel noise;  // applied when simulating training measurements
  std::uint64_t seed = 0;
  /// Fill wall_ms in the log. Off makes the whole log a pure function of
  /// the inputs.
  bool record_wall_time = true;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0;  // mean training loss over the epoch
  double psnr = 0;  // validation means
  double ssim = 0;
  double lr = 0;
  double wall_ms = 0;
};

struct IterationRecord {
  double total = 0;
  double fidelity = 0;
  double reversible = 0;
};

enum class TrainStatus { completed, diverged };

template <class T>
struct TrainResult {
  TrainStatus status = TrainStatus::completed;
  std::string message;
  std::vector<EpochRecord> epochs;
  std::vector<IterationRecord> iterations;
  /// Weights with the best validation PSNR. Equals the initialization when
  /// no epoch ran.
  std::vector<std::vector<T>> best_weights;
  double best_psnr = -std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
};

struct Evaluation {
  std::vector<double> psnr;  // per scene
  std::vector<double> ssim;
  double mean_psnr = 0;
  double mean_ssim = 0;
};

/// Simulates each scene through the noiseless optics, reconstructs, and
/// scores against the scene with peak = scene maximum. Scenes are spread
/// over up to `threads` workers; results do not depend on the count.
template <class T>
Evaluation evaluate(const model::ReversibleNet<T>& net, const std::vector<Tensor<T>>& scenes, const Tensor<T>& mask,
                    std::size_t threads = 1);

/// Runs the schedule. On divergence the weights are restored to the end of
/// the last good epoch and the status says so. `on_epoch` fires after every
/// logged epoch.
template <class T>
TrainResult<T> train(model::ReversibleNet<T>& net, const Dataset<T>& data, const TrainConfig& cfg,
                     const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Metrics CSV: header `epoch,loss,psnr,ssim,lr,wall_ms`, one row per epoch.
void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const EpochRecord& r);

}  // namespace sst::train
