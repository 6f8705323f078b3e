#include "mgc/checkpoint.hpp"

#include <algorithm>

namespace mgc {

template <typename T>
std::vector<Entry> checkpoint_entries(Model<T>& model) {
  if (model.norms_folded() || model.cpe_merged()) {
    throw std::logic_error("checkpoint: model has folded norms or merged CPE; save before reparameterizing");
  }
  std::vector<Entry> out;
  model.visit([&](const std::string& name, Tensor<T>& t, TensorKind) { out.push_back(Entry::from_tensor(name, t)); });
  return out;
}

template <typename T>
void restore_entries(Model<T>& model, const std::vector<Entry>& entries) {
  auto slots = model.named_tensors();
  const std::size_t n = std::min(slots.size(), entries.size());
  for (std::size_t i = 0; i < n; ++i) {
    const Entry& e = entries[i];
    NamedTensor<T>& slot = slots[i];
    if (e.name != slot.name) {
      throw FormatError("checkpoint entry " + std::to_string(i) + " is '" + e.name + "', config expects '" +
                        slot.name + "'");
    }
    if (e.shape != slot.tensor.shape()) {
      throw FormatError("shape mismatch for '" + e.name + "': file has " + e.shape.str() + ", config expects " +
                        slot.tensor.shape().str());
    }
    const Tensor<T> values = e.to_tensor<T>();
    std::ranges::copy(values.data(), slot.tensor.data().begin());
  }
  if (slots.size() != entries.size()) {
    const std::string first = entries.size() > n ? entries[n].name : slots[n].name;
    throw FormatError("checkpoint has " + std::to_string(entries.size()) + " entries, config expects " +
                      std::to_string(slots.size()) + " (first unmatched: '" + first + "')");
  }
}

template <typename T>
void save_checkpoint(Model<T>& model, const std::string& path) {
  write_container(path, kCheckpointMagic, checkpoint_entries(model));
}

template <typename T>
Model<T> load_checkpoint(const std::string& path, const ModelConfig& config) {
  const auto entries = read_container(path, kCheckpointMagic);
  Model<T> model = Model<T>::build(config, 0);
  restore_entries(model, entries);
  return model;
}

template std::vector<Entry> checkpoint_entries<float>(Model<float>&);
template std::vector<Entry> checkpoint_entries<double>(Model<double>&);
template void restore_entries<float>(Model<float>&, const std::vector<Entry>&);
template void restore_entries<double>(Model<double>&, const std::vector<Entry>&);
template void save_checkpoint<float>(Model<float>&, const std::string&);
template void save_checkpoint<double>(Model<double>&, const std::string&);
template Model<float> load_checkpoint<float>(const std::string&, const ModelConfig&);
template Model<double> load_checkpoint<double>(const std::string&, const ModelConfig&);

}  // namespace mgc
