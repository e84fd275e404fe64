#pragma once

#include <map>
#include <string>

#include "sst/io/formats.hpp"
#include "sst/model/config.hpp"
#include "sst/model/parameters.hpp"

namespace sst::io {

/// Parameters (or a snapshot of them) as ordered named float32 tensors.
template <class T>
std::vector<NamedTensor> to_named(const model::ParameterSet<T>& params);
template <class T>
std::vector<NamedTensor> to_named(const model::ParameterSet<T>& params, const std::vector<std::vector<T>>& values);

/// Copies values into `params`. Names, order and shapes must match exactly.
template <class T>
void assign_named(model::ParameterSet<T>& params, const std::vector<NamedTensor>& tensors);

/// Weights file plus a `.meta` sidecar holding the architecture, so a
/// checkpoint is self-describing.
template <class T>
void save_checkpoint(const fs::path& path, const model::SstConfig& cfg, const model::ParameterSet<T>& params,
                     const std::vector<std::vector<T>>* values = nullptr);
model::SstConfig read_checkpoint_config(const fs::path& path);

std::map<std::string, std::string> config_to_meta(const model::SstConfig& cfg);
/// Missing keys keep their defaults; unknown keys are errors.
model::SstConfig config_from_meta(const std::map<std::string, std::string>& meta);

}  // namespace sst::io
