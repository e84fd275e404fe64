#include "sst/io/formats.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

namespace sst::io {

namespace {

static_assert(std::endian::native == std::endian::little, "byte order helpers assume a little-endian host");

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_floats(std::vector<unsigned char>& out, const float* data, std::size_t n) {
  const std::size_t at = out.size();
  out.resize(at + 4 * n);
  std::memcpy(out.data() + at, data, 4 * n);
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw FormatError(FormatError::Kind::bad_value, std::string(what) + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

class Reader {
 public:
  Reader(const std::vector<unsigned char>& bytes, std::string origin) : b_(bytes), origin_(std::move(origin)) {}

  void magic(const char* expected) {
    need(4, "magic");
    if (std::memcmp(b_.data() + at_, expected, 4) != 0)
      throw FormatError(FormatError::Kind::bad_magic, origin_ + ": bad magic, expected \"" + expected + "\"");
    at_ += 4;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[at_ + i]) << (8 * i);
    at_ += 4;
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + at_), n);
    at_ += n;
    return s;
  }
  std::vector<float> floats(std::size_t n, const char* what) {
    if (n > (b_.size() - at_) / 4) truncated(what, 4 * n);
    std::vector<float> v(n);
    std::memcpy(v.data(), b_.data() + at_, 4 * n);
    at_ += 4 * n;
    return v;
  }
  void finish() const {
    if (at_ != b_.size())
      throw FormatError(FormatError::Kind::trailing_data,
                        origin_ + ": " + std::to_string(b_.size() - at_) + " unexpected trailing bytes");
  }

 private:
  void need(std::size_t n, const char* what) {
    if (b_.size() - at_ < n) truncated(what, n);
  }
  [[noreturn]] void truncated(const char* what, std::size_t n) const {
    throw FormatError(FormatError::Kind::truncated, origin_ + ": truncated " + what + " (need " + std::to_string(n) +
                                                        " bytes at offset " + std::to_string(at_) + ", have " +
                                                        std::to_string(b_.size() - at_) + ")");
  }

  const std::vector<unsigned char>& b_;
  std::string origin_;
  std::size_t at_ = 0;
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

}  // namespace

std::vector<unsigned char> encode_hsc(const ad::Tensor<float>& cube) {
  std::size_t c = 1, h = 0, w = 0;
  if (cube.rank() == 3) {
    c = cube.extent(0), h = cube.extent(1), w = cube.extent(2);
  } else if (cube.rank() == 2) {
    h = cube.extent(0), w = cube.extent(1);
  } else {
    throw ad::ShapeError("HSC holds [C,H,W] or [H,W], got " + ad::to_string(cube.shape()));
  }
  std::vector<unsigned char> out{'H', 'S', 'C', '1'};
  out.reserve(kHscHeaderBytes + 4 * cube.size());
  put_u32(out, checked_u32(h, "height"));
  put_u32(out, checked_u32(w, "width"));
  put_u32(out, checked_u32(c, "channels"));
  put_u32(out, 0);
  put_floats(out, cube.data().data(), cube.size());
  return out;
}

ad::Tensor<float> decode_hsc(const std::vector<unsigned char>& bytes, const std::string& origin) {
  Reader r(bytes, origin);
  r.magic("HSC1");
  const std::size_t h = r.u32("height"), w = r.u32("width"), c = r.u32("channels");
  const std::uint32_t dtype = r.u32("dtype");
  if (dtype != 0)
    throw FormatError(FormatError::Kind::unknown_dtype,
                      origin + ": unknown dtype code " + std::to_string(dtype) + " (only 0 = float32)");
  auto values = r.floats(c * h * w, "payload");
  r.finish();
  return ad::Tensor<float>(ad::Shape{c, h, w}, std::move(values));
}

std::vector<unsigned char> encode_hscw(const std::vector<NamedTensor>& tensors) {
  std::set<std::string> seen;
  std::vector<unsigned char> out{'H', 'S', 'C', 'W'};
  put_u32(out, checked_u32(tensors.size(), "tensor count"));
  for (const auto& t : tensors) {
    if (!seen.insert(t.name).second)
      throw FormatError(FormatError::Kind::bad_value, "duplicate tensor name '" + t.name + "'");
    if (ad::numel(t.shape) != t.values.size())
      throw FormatError(FormatError::Kind::bad_value, "tensor '" + t.name + "' has shape " + ad::to_string(t.shape) +
                                                          " but " + std::to_string(t.values.size()) + " values");
    put_u32(out, checked_u32(t.name.size(), "name length"));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u32(out, checked_u32(t.shape.size(), "rank"));
    for (auto e : t.shape) put_u32(out, checked_u32(e, "extent"));
    put_floats(out, t.values.data(), t.values.size());
  }
  return out;
}

std::vector<NamedTensor> decode_hscw(const std::vector<unsigned char>& bytes, const std::string& origin) {
  Reader r(bytes, origin);
  r.magic("HSCW");
  const std::size_t count = r.u32("tensor count");
  std::vector<NamedTensor> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.bytes(r.u32("name length"), "name");
    if (!seen.insert(t.name).second)
      throw FormatError(FormatError::Kind::bad_value, origin + ": duplicate tensor name '" + t.name + "'");
    const std::size_t rank = r.u32("rank");
    for (std::size_t k = 0; k < rank; ++k) t.shape.push_back(r.u32("extent"));
    t.values = r.floats(ad::numel(t.shape), "payload");
    out.push_back(std::move(t));
  }
  r.finish();
  return out;
}

std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_file_atomic(const fs::path& path, const std::vector<unsigned char>& contents) {
  write_file_atomic(path, std::string(contents.begin(), contents.end()));
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatError::Kind::io, "cannot create " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out.flush()) throw FormatError(FormatError::Kind::io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw FormatError(FormatError::Kind::io, "cannot rename onto " + path.string() + ": " + ec.message());
  }
}

ad::Tensor<float> read_hsc(const fs::path& path) { return decode_hsc(read_file(path), path.string()); }
void write_hsc(const ad::Tensor<float>& cube, const fs::path& path) { write_file_atomic(path, encode_hsc(cube)); }

std::vector<NamedTensor> read_hscw(const fs::path& path) { return decode_hscw(read_file(path), path.string()); }
void write_hscw(const std::vector<NamedTensor>& tensors, const fs::path& path) {
  write_file_atomic(path, encode_hscw(tensors));
}

fs::path meta_path(const fs::path& data_file) {
  fs::path p = data_file;
  return p.replace_extension(".meta");
}

void write_meta(const fs::path& path, const std::map<std::string, std::string>& entries) {
  std::ostringstream os;
  for (const auto& [k, v] : entries) {
    if (k.empty() || k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw FormatError(FormatError::Kind::bad_value, "meta entry '" + k + "' is not a single key=value line");
    os << k << '=' << v << '\n';
  }
  write_file_atomic(path, os.str());
}

std::map<std::string, std::string> read_meta(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError(FormatError::Kind::bad_value, path.string() + ":" + std::to_string(n) + ": expected key=value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

}  // namespace sst::io
