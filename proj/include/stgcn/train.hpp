#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "stgcn/common.hpp"
#include "stgcn/model.hpp"
#include "stgcn/nn.hpp"
#include "stgcn/preprocess.hpp"

namespace stgcn {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 4;
  std::vector<double> lr_values = {0.1, 0.01, 0.001};
  std::vector<int> lr_boundaries = {10, 20};  // epochs at which the rate drops
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
    if (lr_values.size() != lr_boundaries.size() + 1)
      throw ConfigError("train: need exactly one more lr value than boundaries");
    for (std::size_t i = 0; i + 1 < lr_values.size(); ++i)
      if (!(lr_values[i] > lr_values[i + 1]))
        throw ConfigError("train: lr values must be strictly decreasing");
    for (std::size_t i = 0; i + 1 < lr_boundaries.size(); ++i)
      if (!(lr_boundaries[i] < lr_boundaries[i + 1]))
        throw ConfigError("train: lr boundaries must be strictly increasing");
  }
};

// Piecewise-constant schedule: lr_values[k] applies from lr_boundaries[k-1]
// (inclusive) up to lr_boundaries[k].
inline double lr_at(const TrainConfig& config, int epoch) {
  config.validate();
  if (epoch < 0 || epoch >= config.epochs) throw ConfigError("lr_at: epoch out of range");
  std::size_t k = 0;
  while (k < config.lr_boundaries.size() && epoch >= config.lr_boundaries[k]) ++k;
  return config.lr_values[k];
}

struct Metrics {
  double top1_accuracy = 0.0;
  std::vector<std::vector<long long>> confusion;  // [true][predicted]
  std::vector<double> per_class_accuracy;
  double loss = 0.0;

  long long total_count() const {
    long long n = 0;
    for (const auto& row : confusion)
      for (long long c : row) n += c;
    return n;
  }
};

inline Metrics compute_metrics(const std::vector<int>& predictions,
                               const std::vector<int>& labels, int num_classes,
                               double mean_loss = 0.0) {
  if (predictions.size() != labels.size())
    throw ConfigError("compute_metrics: predictions/labels size mismatch");
  Metrics m;
  m.loss = mean_loss;
  m.confusion.assign(num_classes, std::vector<long long>(num_classes, 0));
  long long correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i], p = predictions[i];
    if (y < 0 || y >= num_classes || p < 0 || p >= num_classes)
      throw DataError("compute_metrics: class index out of range");
    ++m.confusion[y][p];
    if (y == p) ++correct;
  }
  m.top1_accuracy = labels.empty() ? 0.0 : double(correct) / double(labels.size());
  m.per_class_accuracy.assign(num_classes, 0.0);
  for (int k = 0; k < num_classes; ++k) {
    long long row = 0;
    for (long long c : m.confusion[k]) row += c;
    m.per_class_accuracy[k] = row > 0 ? double(m.confusion[k][k]) / double(row) : 0.0;
  }
  return m;
}

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  int samples_used = 0;
};

using History = std::vector<EpochRecord>;

namespace detail {

template <typename S>
std::pair<Tensor<S>, std::vector<int>> make_batch(const Dataset& data,
                                                  const std::vector<std::size_t>& indices) {
  const auto& first = data.samples.at(indices.at(0));
  Tensor<S> x({int(indices.size()), 3, first.frames, first.joints});
  std::vector<int> labels(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& s = data.samples[indices[i]];
    if (s.frames != first.frames || s.joints != first.joints)
      throw DataError("batch: samples disagree on [T, V]; run pad_to_frames first");
    S* dst = &x.at4(int(i), 0, 0, 0);
    for (std::size_t k = 0; k < s.coords.size(); ++k) dst[k] = S(s.coords[k]);
    labels[i] = s.label;
  }
  return {std::move(x), std::move(labels)};
}

// Consecutive chunks; a singleton tail is merged with the previous batch
// because batch statistics over one sample are degenerate at T*V small.
inline std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order,
                                                          int batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += std::size_t(batch_size))
    batches.emplace_back(order.begin() + i,
                         order.begin() + std::min(order.size(), i + std::size_t(batch_size)));
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back()[0]);
    batches.pop_back();
  }
  return batches;
}

}  // namespace detail

// Momentum SGD: v <- momentum * v + g; w <- w - lr * v.
template <typename S>
class SgdOptimizer {
 public:
  explicit SgdOptimizer(double momentum) : momentum_(momentum) {}

  void step(Model<S>& model, double lr) {
    std::size_t slot = 0;
    model.for_each_param([this, lr, &slot](const std::string&, Param<S>& p) {
      if (slot >= velocity_.size()) velocity_.push_back(Tensor<S>(p.value.shape));
      Tensor<S>& v = velocity_[slot++];
      if (!p.trainable) return;
      const S mom = S(momentum_);
      const S rate = S(lr);
      for (std::size_t i = 0; i < p.value.numel(); ++i) {
        v[i] = mom * v[i] + p.grad[i];
        p.value[i] -= rate * v[i];
      }
    });
  }

 private:
  double momentum_;
  std::vector<Tensor<S>> velocity_;
};

template <typename S>
Metrics evaluate(Model<S>& model, const Dataset& data) {
  if (data.samples.empty()) throw DataError("evaluate: empty dataset");
  const int k = model.config.num_classes;
  std::vector<int> predictions;
  predictions.reserve(data.size());
  double loss_sum = 0.0;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const int eval_batch = 32;
  for (std::size_t i = 0; i < order.size(); i += eval_batch) {
    std::vector<std::size_t> chunk(order.begin() + i,
                                   order.begin() + std::min(order.size(), i + eval_batch));
    auto [x, labels] = detail::make_batch<S>(data, chunk);
    Tensor<S> logits = model.forward(x, false);
    loss_sum += nn::softmax_cross_entropy(logits, labels) * double(chunk.size());
    for (int p : nn::argmax_rows(logits)) predictions.push_back(p);
  }
  std::vector<int> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) labels[i] = data.samples[i].label;
  return compute_metrics(predictions, labels, k, loss_sum / double(data.size()));
}

// Deterministic training loop. Only parameters with trainable=true move;
// batch order, dropout and every other random choice derive from the seed.
template <typename S>
History fit(Model<S>& model, const Dataset& train, const Dataset& val,
            const TrainConfig& config) {
  config.validate();
  if (train.samples.empty() || val.samples.empty())
    throw DataError("fit: train and validation datasets must be non-empty");
  for (const Dataset* d : {&train, &val})
    for (const auto& s : d->samples)
      if (s.label < 0 || s.label >= model.config.num_classes)
        throw DataError("fit: sample label out of range of the model's class count");

  model.dropout_rng = Rng(derive_seed(config.seed, "fit.dropout"));
  SgdOptimizer<S> optimizer(config.momentum);
  History history;
  history.reserve(config.epochs);
  const std::size_t n = train.size();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at(config, epoch);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(config.seed, "fit.epoch", std::uint64_t(epoch)));
    shuffle_rng.shuffle(order);
    const auto batches = detail::make_batches(order, config.batch_size);
    double loss_sum = 0.0;
    long long correct = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      auto [x, labels] = detail::make_batch<S>(train, batches[b]);
      double loss;
      Tensor<S> dlogits;
      try {
        Tensor<S> logits = model.forward(x, true);
        loss = nn::softmax_cross_entropy(logits, labels, &dlogits);
        const auto predicted = nn::argmax_rows(logits);
        for (std::size_t i = 0; i < labels.size(); ++i)
          if (predicted[i] == labels[i]) ++correct;
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                             ": " + e.what());
      }
      if (!std::isfinite(loss))
        throw NumericalError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                             ": non-finite loss");
      model.zero_grads();
      model.backward(dlogits);
      optimizer.step(model, lr);
      loss_sum += loss * double(labels.size());
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / double(n);
    rec.train_accuracy = double(correct) / double(n);
    rec.val_accuracy = evaluate(model, val).top1_accuracy;
    rec.samples_used = int(n);
    history.push_back(rec);
  }
  return history;
}

// Central-difference check of the hand-written backward passes, run in
// double precision over every trainable parameter of a (tiny) model.
inline double gradient_check(const ModelConfig& config, std::uint64_t seed,
                             int batch_size = 2) {
  if (config.head.dropout_rate != 0.0)
    throw ConfigError("gradient_check: requires dropout rate 0");
  Model<double> model = build_model<double>(config, derive_seed(seed, "gradcheck.model"));
  Rng rng(derive_seed(seed, "gradcheck.data"));
  Tensor<double> x({batch_size, config.in_channels, config.frames, config.num_joints()});
  for (auto& v : x.data) v = 0.5 * rng.normal();
  std::vector<int> labels(batch_size);
  for (auto& y : labels) y = int(rng.index(std::size_t(config.num_classes)));

  Tensor<double> dlogits;
  Tensor<double> logits = model.forward(x, true);
  nn::softmax_cross_entropy(logits, labels, &dlogits);
  model.zero_grads();
  model.backward(dlogits);

  struct Slot {
    Param<double>* param;
    Tensor<double> analytic;
  };
  std::vector<Slot> slots;
  model.for_each_param([&slots](const std::string&, Param<double>& p) {
    if (p.trainable) slots.push_back({&p, p.grad});
  });

  auto loss_at = [&]() {
    Tensor<double> l = model.forward(x, true);
    return nn::softmax_cross_entropy(l, labels);
  };
  double max_rel = 0.0;
  for (auto& slot : slots) {
    Tensor<double>& w = slot.param->value;
    for (std::size_t i = 0; i < w.numel(); ++i) {
      const double w0 = w[i];
      const double h = 1e-5 * std::max(1.0, std::fabs(w0));
      w[i] = w0 + h;
      const double lp = loss_at();
      w[i] = w0 - h;
      const double lm = loss_at();
      w[i] = w0;
      const double fd = (lp - lm) / (2.0 * h);
      const double g = slot.analytic[i];
      const double rel = std::fabs(fd - g) / std::max({1.0, std::fabs(fd), std::fabs(g)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

// ---------------------------------------------------------------------------
// CSV artifacts

inline void write_history_csv(const History& history, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "epoch,lr,train_loss,train_acc,val_acc\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g\n", r.epoch, r.lr,
                  r.train_loss, r.train_accuracy, r.val_accuracy);
    os << buf;
  }
}

inline void write_confusion_csv(const Metrics& metrics,
                                const std::vector<std::string>& class_names,
                                const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "class";
  for (const auto& name : class_names) os << ',' << name;
  os << '\n';
  for (std::size_t i = 0; i < metrics.confusion.size(); ++i) {
    os << class_names.at(i);
    for (long long c : metrics.confusion[i]) os << ',' << c;
    os << '\n';
  }
}

}  // namespace stgcn
