#include "mgc/train.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mgc/random.hpp"

namespace mgc {

namespace {

template <typename T>
std::size_t count_correct(const Tensor<T>& logits, std::span<const int> labels) {
  const Shape s = logits.shape();
  auto d = logits.data();
  std::size_t correct = 0;
  for (std::size_t b = 0; b < s.n; ++b) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < s.c; ++k) {
      if (d[b * s.c + k] > d[b * s.c + best]) best = k;
    }
    if (static_cast<int>(best) == labels[b]) ++correct;
  }
  return correct;
}

}  // namespace

template <typename T>
StepResult train_step(Model<T>& model, const Tensor<T>& images, std::span<const int> labels, AdamW<T>& opt) {
  if (model.mode() != Mode::train) throw std::logic_error("train_step: model is not in train mode");
  Tape<T> tape;
  const Tensor<T> logits = model.forward(tape, images);
  const Tensor<T> loss = softmax_cross_entropy(tape, logits, labels);
  const double value = static_cast<double>(loss.item());
  if (!std::isfinite(value)) {
    const auto op = tape.first_non_finite();
    model.zero_grad();
    throw NonFiniteError("non-finite loss; first non-finite tensor produced by '" + op.value_or("input") + "'");
  }
  tape.backward(loss);
  opt.step();
  return {value, count_correct(logits, labels)};
}

template <typename T>
std::vector<int> predict(Model<T>& model, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  if (batch_size == 0) throw std::invalid_argument("evaluate: batch size must be positive");
  const Mode previous = model.mode();
  model.set_mode(Mode::eval);
  std::vector<int> out;
  out.reserve(data.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    idx.resize(std::min(batch_size, data.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    Tape<T> tape(false);
    const Tensor<T> logits = model.forward(tape, data.batch<T>(idx));
    const Shape s = logits.shape();
    auto d = logits.data();
    for (std::size_t b = 0; b < s.n; ++b) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < s.c; ++k) {
        if (d[b * s.c + k] > d[b * s.c + best]) best = k;
      }
      out.push_back(static_cast<int>(best));
    }
  }
  model.set_mode(previous);
  return out;
}

template <typename T>
double evaluate(Model<T>& model, const Dataset& data, std::size_t batch_size) {
  const auto pred = predict(model, data, batch_size);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

template <typename T>
TrainResult train(Model<T>& model, const Dataset& train_set, const Dataset& eval_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  if (train_set.size() == 0) throw std::invalid_argument("train: empty training set");
  if (config.batch_size == 0 || config.epochs == 0) throw std::invalid_argument("train: batch size and epochs must be positive");
  const std::size_t per_epoch = (train_set.size() + config.batch_size - 1) / config.batch_size;
  AdamWConfig oc;
  oc.lr = config.lr;
  oc.weight_decay = config.weight_decay;
  oc.total_steps = per_epoch * config.epochs;
  AdamW<T> opt(model.parameters(), oc);
  Rng rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  model.set_mode(Mode::train);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(i) - 1))]);
    }
    double loss_sum = 0;
    std::size_t correct = 0;
    const double lr_start = opt.current_lr();
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const std::size_t start = b * config.batch_size;
      const std::span<const std::size_t> idx(order.data() + start, std::min(config.batch_size, order.size() - start));
      const auto labels = train_set.batch_labels(idx);
      const StepResult r = train_step(model, train_set.batch<T>(idx), labels, opt);
      result.step_losses.push_back(r.loss);
      loss_sum += r.loss * static_cast<double>(idx.size());
      correct += r.correct;
    }
    LogRow row;
    row.step = opt.step_count();
    row.lr = lr_start;
    row.loss = loss_sum / static_cast<double>(train_set.size());
    row.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
    row.eval_acc = eval_set.size() ? evaluate(model, eval_set) : 0.0;
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  result.final_eval_acc = result.log.back().eval_acc;
  return result;
}

csv::Table log_to_table(const std::vector<LogRow>& rows) {
  csv::Table t;
  t.header = {"step", "lr", "loss", "train_acc", "eval_acc"};
  for (const LogRow& r : rows) {
    t.rows.push_back({std::to_string(r.step), csv::format_double(r.lr), csv::format_double(r.loss),
                      csv::format_double(r.train_acc), csv::format_double(r.eval_acc)});
  }
  return t;
}

std::vector<LogRow> log_from_table(const csv::Table& table) {
  const std::size_t cs = csv::column(table, "step");
  const std::size_t cl = csv::column(table, "lr");
  const std::size_t closs = csv::column(table, "loss");
  const std::size_t ct = csv::column(table, "train_acc");
  const std::size_t ce = csv::column(table, "eval_acc");
  std::vector<LogRow> out;
  for (const auto& row : table.rows) {
    out.push_back({static_cast<std::size_t>(csv::parse_int(row.at(cs))), csv::parse_double(row.at(cl)),
                   csv::parse_double(row.at(closs)), csv::parse_double(row.at(ct)), csv::parse_double(row.at(ce))});
  }
  return out;
}

#define MGC_INSTANTIATE(T)                                                                                   \
  template StepResult train_step<T>(Model<T>&, const Tensor<T>&, std::span<const int>, AdamW<T>&);          \
  template std::vector<int> predict<T>(Model<T>&, const Dataset&, std::size_t);                             \
  template double evaluate<T>(Model<T>&, const Dataset&, std::size_t);                                      \
  template TrainResult train<T>(Model<T>&, const Dataset&, const Dataset&, const TrainConfig&, const EpochCallback&);

MGC_INSTANTIATE(float)
MGC_INSTANTIATE(double)

}  // namespace mgc
