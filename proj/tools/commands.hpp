#pragma once

// Subcommand implementations behind the `sst` binary. They take plain
// option structs so tests can drive them without a process boundary.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sst/autodiff/tensor.hpp"
#include "sst/model/config.hpp"
#include "sst/train/trainer.hpp"

namespace sst::cli {

namespace fs = std::filesystem;

enum ExitCode : int { ok = 0, failure = 1, usage = 2, diverged = 3, verification_failed = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimulateOptions {
  std::string scene;              // HSC cube; empty means synthetic
  std::string synthetic;          // scene kind when no file is given
  std::size_t height = 32, width = 32, channels = 8;
  double smoothness = 1.0;
  std::string mask;               // HSC mask; empty means generated
  double mask_density = 0.5;
  std::size_t d = 1;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

struct SimulateResult {
  fs::path measurement, mask, scene;
  std::size_t height = 0, measurement_width = 0;
};

/// Writes scene.hsc, mask.hsc and measurement.hsc (+ .meta) into `out`.
SimulateResult simulate(const SimulateOptions& opt, std::ostream& log);

struct TrainOptions {
  std::string preset = "toy";  // toy | custom
  std::size_t stages = 1;
  std::size_t epochs = 30;
  std::size_t iterations = 10;  // per epoch
  std::size_t batch = 1;
  std::size_t period = 50;
  double lr = 4e-4;
  double xi = 0.2;
  std::uint64_t seed = 0;
  std::string out_dir;
  // custom preset
  std::size_t height = 32, width = 32, channels = 8, base_channels = 16, window = 8, heads = 1, levels = 2;
  bool inner_reversible = false;
  bool unmix_only = false;
  std::string data_dir;        // directory of training HSC cubes (custom)
  std::size_t scenes = 8;      // synthetic training scenes
  std::size_t val_scenes = 2;  // synthetic held-out scenes
  double mask_density = 0.5;
  bool wall_time = true;
  bool quiet = false;
};

struct TrainOutcome {
  bool diverged = false;
  std::string message;
  double best_psnr = 0;
  std::size_t epochs_logged = 0;
  fs::path weights, metrics;
  std::vector<train::IterationRecord> iterations;
};

model::SstConfig train_model_config(const TrainOptions& opt);
/// Writes weights.hscw (best validation PSNR), last.hscw, mask.hsc,
/// metrics.csv and loss_curve.png into out_dir.
TrainOutcome train(const TrainOptions& opt, std::ostream& log);

/// Any map from measurement and mask to a cube.
using Reconstructor = std::function<ad::Tensor<float>(const ad::Tensor<float>& y, const ad::Tensor<float>& mask)>;

struct Scores {
  double psnr = 0, ssim = 0;
};

/// Reconstructs one measurement, writes the cube (+ previews and their
/// scales) to `out`, and scores against `truth` when given.
std::optional<Scores> reconstruct_to_file(const Reconstructor& rec, const ad::Tensor<float>& y,
                                          const ad::Tensor<float>& mask, const std::optional<ad::Tensor<float>>& truth,
                                          const fs::path& out, bool previews = true);

struct ReconstructOptions {
  std::string weights, measurement, mask, truth, out, trace;
  bool previews = true;
};
int reconstruct(const ReconstructOptions& opt, std::ostream& log);

struct EvalOptions {
  std::string weights, mask;
  std::vector<std::string> truth;        // one HSC scene per entry
  std::vector<std::string> measurement;  // optional, paired with truth
  std::size_t threads = 1;
};
int eval(const EvalOptions& opt, std::ostream& log);

struct GradcheckOptions {
  std::uint64_t seed = 0;
  double tol = 1e-4;
  double tol_f32 = 1e-3;
  bool float32 = true;
  bool blocks = true;
  std::string inject_fault;
};
int gradcheck(const GradcheckOptions& opt, std::ostream& log);

struct OracleCheckOptions {
  std::uint64_t seed = 0;
  double tol = 1.0;  // multiplies every documented tolerance
  std::size_t instances = 20;
};
int oracle_check(const OracleCheckOptions& opt, std::ostream& log);

/// --threads fallback: SST_THREADS, else the hardware concurrency.
std::size_t default_threads();

/// Flat key=value file into (key, value) pairs; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_config_file(const fs::path& path);

}  // namespace sst::cli
