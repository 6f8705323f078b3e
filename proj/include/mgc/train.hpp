#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mgc/csv.hpp"
#include "mgc/dataset.hpp"
#include "mgc/model.hpp"
#include "mgc/optim.hpp"

namespace mgc {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double lr = 2e-3;
  double weight_decay = 0.05;
  /// Shuffling seed; model init uses its own seed.
  std::uint64_t seed = 0;
};

struct StepResult {
  double loss = 0;
  std::size_t correct = 0;
};

/// One optimizer step on a batch. Throws NonFiniteError naming the first op
/// with a non-finite output if the loss is NaN or Inf; parameters are left
/// untouched in that case.
template <typename T>
StepResult train_step(Model<T>& model, const Tensor<T>& images, std::span<const int> labels, AdamW<T>& opt);

/// Top-1 accuracy in eval mode; restores the previous mode.
/// Throws std::invalid_argument on an empty dataset.
template <typename T>
double evaluate(Model<T>& model, const Dataset& data, std::size_t batch_size = 64);

/// Predicted class per sample, in eval mode.
template <typename T>
std::vector<int> predict(Model<T>& model, const Dataset& data, std::size_t batch_size = 64);

struct LogRow {
  std::size_t step = 0;
  double lr = 0;
  double loss = 0;
  double train_acc = 0;
  double eval_acc = 0;
  friend bool operator==(const LogRow&, const LogRow&) = default;
};

struct TrainResult {
  std::vector<double> step_losses;
  std::vector<LogRow> log;  // one row per epoch
  double final_eval_acc = 0;
};

using EpochCallback = std::function<void(const LogRow&)>;

template <typename T>
TrainResult train(Model<T>& model, const Dataset& train_set, const Dataset& eval_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

csv::Table log_to_table(const std::vector<LogRow>& rows);
std::vector<LogRow> log_from_table(const csv::Table& table);

}  // namespace mgc
