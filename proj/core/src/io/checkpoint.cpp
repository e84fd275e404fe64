#include "sst/io/checkpoint.hpp"

#include <charconv>

namespace sst::io {

namespace {

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw FormatError(FormatError::Kind::bad_value, "meta key '" + key + "': '" + v + "' is not a count");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw FormatError(FormatError::Kind::bad_value, "meta key '" + key + "': '" + v + "' is not a boolean");
}

}  // namespace

template <class T>
std::vector<NamedTensor> to_named(const model::ParameterSet<T>& params) {
  return to_named(params, params.snapshot());
}

template <class T>
std::vector<NamedTensor> to_named(const model::ParameterSet<T>& params, const std::vector<std::vector<T>>& values) {
  const auto& entries = params.entries();
  if (values.size() != entries.size()) throw std::invalid_argument("snapshot does not match parameter set");
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < entries.size(); ++i)
    out.push_back({entries[i].name, entries[i].value.shape(), std::vector<float>(values[i].begin(), values[i].end())});
  return out;
}

template <class T>
void assign_named(model::ParameterSet<T>& params, const std::vector<NamedTensor>& tensors) {
  const auto& entries = params.entries();
  if (tensors.size() != entries.size())
    throw FormatError(FormatError::Kind::bad_value, "checkpoint holds " + std::to_string(tensors.size()) +
                                                        " tensors, model expects " + std::to_string(entries.size()));
  std::vector<std::vector<T>> values;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& t = tensors[i];
    if (t.name != entries[i].name || t.shape != entries[i].value.shape())
      throw FormatError(FormatError::Kind::bad_value, "checkpoint tensor " + std::to_string(i) + " is '" + t.name +
                                                          "' " + ad::to_string(t.shape) + ", model expects '" +
                                                          entries[i].name + "' " +
                                                          ad::to_string(entries[i].value.shape()));
    values.emplace_back(t.values.begin(), t.values.end());
  }
  params.restore(values);
}

template <class T>
void save_checkpoint(const fs::path& path, const model::SstConfig& cfg, const model::ParameterSet<T>& params,
                     const std::vector<std::vector<T>>* values) {
  write_hscw(values ? to_named(params, *values) : to_named(params), path);
  write_meta(meta_path(path), config_to_meta(cfg));
}

model::SstConfig read_checkpoint_config(const fs::path& path) { return config_from_meta(read_meta(meta_path(path))); }

std::map<std::string, std::string> config_to_meta(const model::SstConfig& c) {
  auto s = [](std::size_t v) { return std::to_string(v); };
  return {{"height", s(c.height)},
          {"width", s(c.width)},
          {"channels", s(c.channels)},
          {"stages", s(c.stages)},
          {"base_channels", s(c.base_channels)},
          {"window", s(c.window)},
          {"heads", s(c.heads)},
          {"levels", s(c.levels)},
          {"depth", s(c.depth)},
          {"ffn_mult", s(c.ffn_mult)},
          {"inner_reversible", c.inner_reversible ? "1" : "0"},
          {"use_backbone", c.use_backbone ? "1" : "0"},
          {"dispersion_step", s(c.dispersion.step)},
          {"reference_channel", s(c.dispersion.reference_channel)}};
}

model::SstConfig config_from_meta(const std::map<std::string, std::string>& meta) {
  model::SstConfig c;
  for (const auto& [k, v] : meta) {
    if (k == "height") c.height = parse_size(k, v);
    else if (k == "width") c.width = parse_size(k, v);
    else if (k == "channels") c.channels = parse_size(k, v);
    else if (k == "stages") c.stages = parse_size(k, v);
    else if (k == "base_channels") c.base_channels = parse_size(k, v);
    else if (k == "window") c.window = parse_size(k, v);
    else if (k == "heads") c.heads = parse_size(k, v);
    else if (k == "levels") c.levels = parse_size(k, v);
    else if (k == "depth") c.depth = parse_size(k, v);
    else if (k == "ffn_mult") c.ffn_mult = parse_size(k, v);
    else if (k == "inner_reversible") c.inner_reversible = parse_bool(k, v);
    else if (k == "use_backbone") c.use_backbone = parse_bool(k, v);
    else if (k == "dispersion_step") c.dispersion.step = parse_size(k, v);
    else if (k == "reference_channel") c.dispersion.reference_channel = parse_size(k, v);
    else throw FormatError(FormatError::Kind::bad_value, "unknown model key '" + k + "'");
  }
  c.validate();
  return c;
}

#define SST_INSTANTIATE(T)                                                                                         \
  template std::vector<NamedTensor> to_named(const model::ParameterSet<T>&);                                       \
  template std::vector<NamedTensor> to_named(const model::ParameterSet<T>&, const std::vector<std::vector<T>>&);   \
  template void assign_named(model::ParameterSet<T>&, const std::vector<NamedTensor>&);                            \
  template void save_checkpoint(const fs::path&, const model::SstConfig&, const model::ParameterSet<T>&,           \
                                const std::vector<std::vector<T>>*);

SST_INSTANTIATE(float)
SST_INSTANTIATE(double)

}  // namespace sst::io
