#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mgc/tensor.hpp"

namespace mgc {

/// Wengert list for reverse-mode differentiation.
///
/// Operations append an entry only when the tape is recording and at least
/// one input requires a gradient. Entries are appended after their inputs
/// exist, so the list is already in topological order and backward() is a
/// single reverse sweep. A tape belongs to one thread.
template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return entries_.size(); }

  template <typename... Ts>
  bool needs_grad(const Ts&... inputs) const {
    return recording_ && (... || (inputs.defined() && inputs.requires_grad()));
  }

  /// Registers `output` as produced by `op`. The closure reads output's
  /// gradient and accumulates into the gradients of its captured inputs.
  void record(std::string_view op, Tensor<T> output, std::function<void()> backward) {
    output.set_requires_grad(true);
    entries_.push_back(Entry{op, std::move(output), std::move(backward)});
  }

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape once in reverse.
  /// Leaf gradients accumulate across calls until zeroed; the tape is
  /// cleared afterwards.
  void backward(Tensor<T> loss) {
    if (loss.numel() != 1) {
      throw ShapeError("backward() needs a scalar loss, got shape " + loss.shape().str());
    }
    bool found = false;
    for (const auto& e : entries_) {
      if (e.output.same(loss)) {
        found = true;
        break;
      }
    }
    if (!found) {
      throw std::logic_error("backward(): loss was not produced on this tape");
    }
    loss.ensure_grad()[0] = T(1);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      if (it->output.has_grad()) {
        it->backward();
      }
    }
    clear();
  }

  void clear() { entries_.clear(); }

  /// Name of the first recorded op whose output holds a NaN or Inf.
  std::optional<std::string> first_non_finite() const {
    for (const auto& e : entries_) {
      if (!all_finite<T>(e.output.data())) {
        return std::string(e.op);
      }
    }
    return std::nullopt;
  }

 private:
  struct Entry {
    std::string_view op;
    Tensor<T> output;
    std::function<void()> backward;
  };
  std::vector<Entry> entries_;
  bool recording_;
};

}  // namespace mgc
