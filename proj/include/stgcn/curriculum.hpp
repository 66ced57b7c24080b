#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stgcn/common.hpp"
#include "stgcn/model.hpp"
#include "stgcn/train.hpp"

namespace stgcn {

struct PacingStep {
  int start_epoch = 0;
  int sample_count = 0;
};

// Per-sample easiness scores plus the epoch -> sample-count step schedule.
struct Curriculum {
  std::vector<double> scores;        // easiness in [0, 1]
  std::vector<std::size_t> order;    // descending easiness, ties by lower index
  std::vector<PacingStep> pacing;

  int count_at_epoch(int epoch) const {
    int count = 0;
    for (const auto& step : pacing)
      if (epoch >= step.start_epoch) count = step.sample_count;
    return count;
  }

  void validate(std::size_t num_samples, int epochs) const {
    if (pacing.empty()) throw ConfigError("curriculum: empty pacing");
    if (pacing.front().start_epoch != 0)
      throw ConfigError("curriculum: pacing must start at epoch 0");
    for (std::size_t i = 0; i + 1 < pacing.size(); ++i) {
      if (pacing[i].start_epoch >= pacing[i + 1].start_epoch)
        throw ConfigError("curriculum: pacing start epochs must strictly increase");
      if (pacing[i].sample_count > pacing[i + 1].sample_count)
        throw ConfigError("curriculum: pacing sample counts must be non-decreasing");
    }
    if (pacing.back().sample_count != int(num_samples))
      throw ConfigError("curriculum: final pacing step must cover all samples");
    if (pacing.back().start_epoch >= epochs)
      throw ConfigError("curriculum: pacing extends past the training epochs");
    if (order.size() != num_samples)
      throw ConfigError("curriculum: order must cover all samples");
  }
};

inline std::vector<std::size_t> order_by_easiness(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  return order;
}

// Easiness = eval-mode softmax probability of the true class, read from a
// fresh model trained for 10% of the configured epochs.
template <typename S = float>
std::vector<double> score_samples(const ModelConfig& model_config, const Dataset& train,
                                  const TrainConfig& train_config) {
  if (train.samples.empty()) throw DataError("score_samples: empty dataset");
  TrainConfig pre = train_config;
  pre.epochs = std::max(1, int(std::ceil(0.1 * train_config.epochs)));
  pre.lr_boundaries.clear();
  pre.lr_values = {train_config.lr_values.front()};
  pre.seed = derive_seed(train_config.seed, "curriculum.scoring");
  Model<S> model = build_model<S>(model_config, pre.seed);
  fit(model, train, train, pre);

  std::vector<double> scores(train.size(), 0.0);
  const int batch = 32;
  std::vector<std::size_t> indices(train.size());
  std::iota(indices.begin(), indices.end(), 0);
  for (std::size_t i = 0; i < indices.size(); i += batch) {
    std::vector<std::size_t> chunk(indices.begin() + i,
                                   indices.begin() + std::min(indices.size(), i + batch));
    auto [x, labels] = detail::make_batch<S>(train, chunk);
    Tensor<S> logits = model.forward(x, false);
    const int k = logits.dim(1);
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      const S* z = &logits.at2(int(b), 0);
      double zmax = double(z[0]);
      for (int c = 1; c < k; ++c) zmax = std::max(zmax, double(z[c]));
      double sum = 0.0;
      for (int c = 0; c < k; ++c) sum += std::exp(double(z[c]) - zmax);
      scores[chunk[b]] = std::exp(double(z[labels[b]]) - zmax) / sum;
    }
  }
  return scores;
}

// Step schedule: step s exposes ceil(num_samples * (s+1) / num_steps)
// samples. Durations follow a geometric allocation (default ratio 1.5,
// later steps longer), rounded to sum to total_epochs. When total_epochs
// admits it, durations strictly increase; below the triangular minimum they
// degrade to a non-decreasing split.
inline std::vector<PacingStep> make_pacing(int num_samples, int num_steps, int total_epochs,
                                           double ratio = 1.5) {
  if (num_samples < 1) throw ConfigError("make_pacing: need at least one sample");
  if (num_steps < 1) throw ConfigError("make_pacing: need at least one step");
  if (total_epochs < num_steps)
    throw ConfigError("make_pacing: infeasible, total_epochs < num_steps");
  if (ratio <= 1.0) throw ConfigError("make_pacing: ratio must exceed 1");

  std::vector<int> durations(num_steps, 0);
  const int triangular = num_steps * (num_steps + 1) / 2;
  if (num_steps == 1) {
    durations[0] = total_epochs;
  } else if (total_epochs >= triangular) {
    // strictly increasing baseline 1, 2, ..., n plus a geometric remainder
    for (int s = 0; s < num_steps; ++s) durations[s] = s + 1;
    int remainder = total_epochs - triangular;
    double raw_sum = 0.0;
    std::vector<double> raw(num_steps);
    for (int s = 0; s < num_steps; ++s) raw_sum += raw[s] = std::pow(ratio, s);
    std::vector<int> extra(num_steps, 0);
    std::vector<std::pair<double, int>> rem;
    int assigned = 0;
    for (int s = 0; s < num_steps; ++s) {
      const double ideal = remainder * raw[s] / raw_sum;
      extra[s] = int(ideal);
      assigned += extra[s];
      rem.push_back({ideal - extra[s], s});
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second > b.second);
    });
    for (int i = 0; i < remainder - assigned; ++i) extra[rem[i].second] += 1;
    // keeping extras sorted ascending preserves the strict increase
    std::sort(extra.begin(), extra.end());
    for (int s = 0; s < num_steps; ++s) durations[s] += extra[s];
  } else {
    // strict increase impossible; fall back to an even non-decreasing split
    const int base = total_epochs / num_steps;
    const int bump = total_epochs % num_steps;
    for (int s = 0; s < num_steps; ++s) durations[s] = base + (s >= num_steps - bump ? 1 : 0);
  }

  std::vector<PacingStep> pacing(num_steps);
  int start = 0;
  for (int s = 0; s < num_steps; ++s) {
    pacing[s].start_epoch = start;
    pacing[s].sample_count =
        int((std::int64_t(num_samples) * (s + 1) + num_steps - 1) / num_steps);
    start += durations[s];
  }
  pacing.back().sample_count = num_samples;
  return pacing;
}

// Training loop under a curriculum: each epoch trains on the easiest
// count_at_epoch(e) samples. The active subset is handled exactly like the
// full dataset in fit (same shuffle derivation), so a full-coverage pacing
// reproduces fit bit for bit.
template <typename S>
History curriculum_fit(Model<S>& model, const Dataset& train, const Dataset& val,
                       const Curriculum& curriculum, const TrainConfig& config) {
  config.validate();
  curriculum.validate(train.size(), config.epochs);
  if (train.samples.empty() || val.samples.empty())
    throw DataError("curriculum_fit: train and validation datasets must be non-empty");

  model.dropout_rng = Rng(derive_seed(config.seed, "fit.dropout"));
  SgdOptimizer<S> optimizer(config.momentum);
  History history;
  history.reserve(config.epochs);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at(config, epoch);
    const int count = curriculum.count_at_epoch(epoch);
    std::vector<std::size_t> active(curriculum.order.begin(), curriculum.order.begin() + count);
    std::sort(active.begin(), active.end());
    Rng shuffle_rng(derive_seed(config.seed, "fit.epoch", std::uint64_t(epoch)));
    shuffle_rng.shuffle(active);
    const auto batches = detail::make_batches(active, config.batch_size);
    double loss_sum = 0.0;
    long long correct = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      auto [x, labels] = detail::make_batch<S>(train, batches[b]);
      Tensor<S> dlogits;
      double loss;
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
    rec.train_loss = loss_sum / double(count);
    rec.train_accuracy = double(correct) / double(count);
    rec.val_accuracy = evaluate(model, val).top1_accuracy;
    rec.samples_used = count;
    history.push_back(rec);
  }
  return history;
}

// Confusion-matrix driven class-subset selection. Classes are ranked by
// per-class accuracy (diagonal over row sum, ties to the lower index); from
// each exclusion pair only the higher-ranked member stays eligible.
inline std::vector<int> select_classes(const std::vector<std::vector<long long>>& confusion,
                                       int target_count,
                                       const std::vector<std::pair<int, int>>& exclusion_pairs) {
  const int k = int(confusion.size());
  if (target_count < 0 || target_count > k)
    throw ConfigError("select_classes: target count out of range");
  std::vector<double> accuracy(k, 0.0);
  for (int i = 0; i < k; ++i) {
    if (int(confusion[i].size()) != k)
      throw ConfigError("select_classes: confusion matrix must be square");
    long long row = 0;
    for (long long c : confusion[i]) {
      if (c < 0) throw DataError("select_classes: negative confusion count");
      row += c;
    }
    accuracy[i] = row > 0 ? double(confusion[i][i]) / double(row) : 0.0;
  }
  std::vector<int> rank(k);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(),
                   [&accuracy](int a, int b) { return accuracy[a] > accuracy[b]; });
  std::vector<int> position(k, 0);
  for (int i = 0; i < k; ++i) position[rank[i]] = i;

  std::vector<char> eligible(k, 1);
  for (auto [a, b] : exclusion_pairs) {
    if (a < 0 || a >= k || b < 0 || b >= k)
      throw ConfigError("select_classes: exclusion pair index out of range");
    eligible[position[a] < position[b] ? b : a] = 0;
  }
  std::vector<int> selected;
  for (int idx : rank) {
    if (int(selected.size()) == target_count) break;
    if (eligible[idx]) selected.push_back(idx);
  }
  if (int(selected.size()) < target_count)
    throw ConfigError("select_classes: target count exceeds the eligible classes");
  return selected;
}

// ---------------------------------------------------------------------------
// Curriculum artifacts: scores as CSV `sample_id,score`, pacing as JSON.

inline void write_scores_csv(const std::vector<double>& scores, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "sample_id,score\n";
  char buf[64];
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.10g\n", i, scores[i]);
    os << buf;
  }
}

inline std::vector<double> read_scores_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line) || line != "sample_id,score")
    throw DataError(path + ": expected header sample_id,score");
  std::vector<double> scores;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError(path + ": malformed row");
    scores.push_back(std::stod(line.substr(comma + 1)));
  }
  return scores;
}

inline void write_pacing_json(const std::vector<PacingStep>& pacing, const std::string& path) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : pacing)
    steps.push_back({{"start_epoch", s.start_epoch}, {"sample_count", s.sample_count}});
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << nlohmann::json{{"steps", steps}}.dump(2) << '\n';
}

inline std::vector<PacingStep> read_pacing_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path);
  nlohmann::json j = nlohmann::json::parse(is);
  std::vector<PacingStep> pacing;
  for (const auto& s : j.at("steps"))
    pacing.push_back({s.at("start_epoch").get<int>(), s.at("sample_count").get<int>()});
  return pacing;
}

}  // namespace stgcn
