#pragma once

// Binary containers, all little-endian.
//
//   HSC   "HSC1" | u32 H | u32 W | u32 C | u32 dtype (0 = float32) | payload
//         payload is the [C,H,W] cube, index (m*H + x)*W + y
//   HSCW  "HSCW" | u32 count | count x (u32 name_len | name | u32 rank |
//         rank x u32 extent | float32 payload)
//
// Writers go through a temporary file and rename, so readers never see a
// partial file.

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sst/autodiff/tensor.hpp"

namespace sst::io {

namespace fs = std::filesystem;

class FormatError : public std::runtime_error {
 public:
  enum class Kind { io, bad_magic, truncated, unknown_dtype, trailing_data, bad_value };
  FormatError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::size_t kHscHeaderBytes = 20;

ad::Tensor<float> read_hsc(const fs::path& path);
/// Accepts [C,H,W] cubes and [H,W] images (stored with C = 1).
void write_hsc(const ad::Tensor<float>& cube, const fs::path& path);

/// In-memory forms of the same encodings.
std::vector<unsigned char> encode_hsc(const ad::Tensor<float>& cube);
ad::Tensor<float> decode_hsc(const std::vector<unsigned char>& bytes, const std::string& origin = "<memory>");

struct NamedTensor {
  std::string name;
  ad::Shape shape;
  std::vector<float> values;
};

std::vector<NamedTensor> read_hscw(const fs::path& path);
/// Rejects duplicate names and shape/size mismatches.
void write_hscw(const std::vector<NamedTensor>& tensors, const fs::path& path);
std::vector<unsigned char> encode_hscw(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_hscw(const std::vector<unsigned char>& bytes, const std::string& origin = "<memory>");

/// `<stem>.meta` next to a data file.
fs::path meta_path(const fs::path& data_file);
/// Plain `key=value` lines, keys sorted.
void write_meta(const fs::path& path, const std::map<std::string, std::string>& entries);
std::map<std::string, std::string> read_meta(const fs::path& path);

/// Atomic whole-file write.
void write_file_atomic(const fs::path& path, const std::string& contents);
void write_file_atomic(const fs::path& path, const std::vector<unsigned char>& contents);
std::vector<unsigned char> read_file(const fs::path& path);

}  // namespace sst::io
