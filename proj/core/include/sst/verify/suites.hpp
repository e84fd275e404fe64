#pragma once

// Verification suites shared by the command-line tool and the tests.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sst::verify {

struct CheckResult {
  std::string name;       // unique label, e.g. "conv2d[f32]" or "block/ffn"
  std::string op;         // primitive op name, empty for composite checks
  double error = 0;       // worst relative error seen
  double tolerance = 0;
  bool passed = false;
};

struct GradSuiteOptions {
  std::uint64_t seed = 0;
  double tol_double = 1e-4;
  double tol_float = 1e-3;
  bool float32 = true;
  bool blocks = true;  // model blocks and the two-stage loss
};

/// Finite-difference checks of every primitive (float64, optionally
/// float32) and of the model blocks.
std::vector<CheckResult> gradcheck_suite(const GradSuiteOptions& opt = {});

struct OracleSuiteOptions {
  std::uint64_t seed = 0;
  std::size_t instances = 20;
  /// Scale factor applied to every documented tolerance.
  double tolerance_scale = 1.0;
};

/// Loop-oracle comparisons: optics stages, matmul, conv2d, softmax, loss,
/// PSNR and SSIM, plus the closed-loop residual.
std::vector<CheckResult> oracle_suite(const OracleSuiteOptions& opt = {});

/// One line per check; returns true when all passed.
bool report(std::ostream& os, const std::vector<CheckResult>& results);

}  // namespace sst::verify
