#include "mgc/model.hpp"

#include <set>
#include <stdexcept>

namespace mgc {

template <typename T>
Model<T> Model<T>::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Model m;
  m.config_ = config;
  m.stem_ = StemParams<T>::make(rng, kImageChannels, config.stage_channels[0]);
  for (std::size_t i = 0; i < config.active_stages(); ++i) {
    Stage<T>& st = m.stages_[i];
    const std::size_t c = config.stage_channels[i];
    if (i > 0) st.down = DownsampleParams<T>::make(rng, config.stage_channels[i - 1], c);
    for (std::size_t k = 0; k < config.inverted_counts[i]; ++k) {
      st.inverted.push_back(InvertedResidualParams<T>::make(rng, c, config.expansion));
    }
    for (std::size_t k = 0; k < config.mgc_counts[i]; ++k) {
      st.graph_blocks.push_back(
          MgcBlockParams<T>::make(rng, c, config.expansion, config.cpe_kernel, config.cpe_enabled));
    }
    if (!st.graph_blocks.empty()) {
      const std::size_t extent = config.stage_extent(i);
      st.pattern = build_pattern(config.graph_spec(i), extent, extent);
    }
  }
  const std::size_t last = config.stage_channels[config.active_stages() - 1];
  m.head_ = HeadParams<T>::make(rng, last, config.head_hidden(), config.num_classes);
  return m;
}

template <typename T>
Tensor<T> Model<T>::forward(Tape<T>& tape, const Tensor<T>& batch) {
  const Shape s = batch.shape();
  if (s.c != kImageChannels || s.h != config_.input_resolution || s.w != config_.input_resolution) {
    throw ShapeError("forward: model expects (n, 3, " + std::to_string(config_.input_resolution) + ", " +
                     std::to_string(config_.input_resolution) + "), got " + s.str());
  }
  Tensor<T> x = stem_forward(tape, batch, stem_, mode_);
  for (std::size_t i = 0; i < config_.active_stages(); ++i) {
    Stage<T>& st = stages_[i];
    if (st.down) x = downsample_forward(tape, x, *st.down, mode_);
    for (auto& ir : st.inverted) x = inverted_residual_forward(tape, x, ir, mode_);
    for (auto& g : st.graph_blocks) x = mgc_block_forward(tape, x, *st.pattern, g, mode_);
  }
  return head_forward(tape, x, head_);
}

template <typename T>
void Model<T>::visit(const TensorVisitor<T>& f) {
  stem_.visit("stem", f);
  for (std::size_t i = 0; i < config_.active_stages(); ++i) {
    Stage<T>& st = stages_[i];
    const std::string prefix = "stage" + std::to_string(i + 1);
    if (st.down) st.down->visit(prefix + ".down", f);
    for (std::size_t k = 0; k < st.inverted.size(); ++k) st.inverted[k].visit(prefix + ".ir" + std::to_string(k), f);
    for (std::size_t k = 0; k < st.graph_blocks.size(); ++k) {
      st.graph_blocks[k].visit(prefix + ".mgc" + std::to_string(k), f);
    }
  }
  head_.visit("head", f);
}

template <typename T>
std::vector<NamedTensor<T>> Model<T>::named_tensors() {
  std::vector<NamedTensor<T>> out;
  visit([&](const std::string& name, Tensor<T>& t, TensorKind kind) { out.push_back({name, t, kind}); });
  return out;
}

template <typename T>
std::vector<NamedTensor<T>> Model<T>::parameters() {
  std::vector<NamedTensor<T>> out;
  visit([&](const std::string& name, Tensor<T>& t, TensorKind kind) {
    if (kind == TensorKind::parameter) out.push_back({name, t, kind});
  });
  return out;
}

template <typename T>
void Model<T>::zero_grad() {
  visit([](const std::string&, Tensor<T>& t, TensorKind) { t.zero_grad(); });
}

template <typename T>
void Model<T>::merge_cpe() {
  if (cpe_merged_) throw std::logic_error("merge_cpe: already merged");
  for (auto& st : stages_) {
    for (auto& g : st.graph_blocks) {
      if (g.cpe) g.cpe = cpe_merge(*g.cpe);
    }
  }
  cpe_merged_ = true;
}

template <typename T>
void Model<T>::fold_norms() {
  if (folded_) throw std::logic_error("fold_norms: already folded");
  auto fold_ir = [](InvertedResidualParams<T>& p) {
    p.expand.fold();
    p.depthwise.fold();
    p.project.fold();
  };
  stem_.conv1.fold();
  stem_.conv2.fold();
  for (auto& st : stages_) {
    if (st.down) st.down->conv.fold();
    for (auto& ir : st.inverted) fold_ir(ir);
    for (auto& g : st.graph_blocks) {
      g.mr.w_in.fold();
      g.mr.w_out.fold();
      g.ffn.w1.fold();
      g.ffn.w2.fold();
    }
  }
  folded_ = true;
  mode_ = Mode::eval;
}

template <typename T>
std::size_t Model<T>::count_params() {
  std::size_t total = 0;
  std::set<std::string> names;
  visit([&](const std::string& name, Tensor<T>& t, TensorKind kind) {
    if (!names.insert(name).second) throw std::logic_error("duplicate parameter name " + name);
    if (kind == TensorKind::parameter) total += t.numel();
  });
  return total;
}

template <typename T>
std::size_t Model<T>::count_macs(std::size_t resolution) const {
  if (resolution == 0 || resolution % 32 != 0) {
    throw std::invalid_argument("count_macs: resolution " + std::to_string(resolution) +
                                " is not a positive multiple of 32");
  }
  std::size_t total = stem_.macs(resolution, resolution);
  std::size_t extent = stem_.conv2.out_extent(stem_.conv1.out_extent(resolution));
  for (std::size_t i = 0; i < config_.active_stages(); ++i) {
    const Stage<T>& st = stages_[i];
    if (st.down) {
      total += st.down->macs(extent, extent);
      extent = st.down->conv.out_extent(extent);
    }
    for (const auto& ir : st.inverted) total += ir.macs(extent, extent);
    for (const auto& g : st.graph_blocks) total += g.macs(extent, extent);
  }
  return total + head_.macs();
}

template class Model<float>;
template class Model<double>;

}  // namespace mgc
