#pragma once

#include <cstdint>
#include <string>

#include "mgc/container.hpp"
#include "mgc/model.hpp"

namespace mgc {

/// Writes every parameter and running statistic in visit order. Models with
/// folded norms or merged CPE are rejected, since their tensors no longer
/// match the training-form layout.
template <typename T>
void save_checkpoint(Model<T>& model, const std::string& path);

/// Builds `config` and overwrites its tensors from the file. Throws
/// FormatError naming the first entry whose name, dtype or shape disagrees.
template <typename T>
Model<T> load_checkpoint(const std::string& path, const ModelConfig& config);

template <typename T>
std::vector<Entry> checkpoint_entries(Model<T>& model);
template <typename T>
void restore_entries(Model<T>& model, const std::vector<Entry>& entries);

}  // namespace mgc
