#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "trajclass/data.hpp"
#include "trajclass/nn/model.hpp"
#include "trajclass/rng.hpp"

namespace trajclass::nn {

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  OptimizerConfig optimizer{};
  double clip_norm = 5.0;  // global gradient-norm clip per batch; 0 disables
  std::uint64_t seed = 0;  // batch shuffling

  static TrainConfig defaults(Family f) {
    TrainConfig c;
    switch (f) {
      case Family::Dense:
        c.epochs = 600;
        c.optimizer.learning_rate = 3e-3;
        break;
      case Family::Conv1D:
        c.epochs = 150;
        c.optimizer.learning_rate = 3e-3;
        break;
      case Family::LSTM:
      case Family::GRU:
        c.epochs = 200;
        c.optimizer.learning_rate = 1e-2;
        break;
    }
    return c;
  }

  void validate() const {
    if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
    if (!(optimizer.learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be positive");
    if (clip_norm < 0.0) throw std::invalid_argument("TrainConfig: clip_norm must be non-negative");
  }
};

struct EpochRecord {
  double train_loss = 0.0;
  double val_accuracy = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainedModel {
  Model model;
  std::vector<EpochRecord> history;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pre-extracted model inputs for a dataset.
struct Batchable {
  std::vector<std::vector<double>> inputs;
  std::vector<int> labels;
};

inline Batchable prepare_inputs(const Dataset& data, std::size_t timesteps, std::size_t stride) {
  Batchable out;
  out.inputs.reserve(data.size());
  for (const auto& traj : data) {
    out.inputs.push_back(model_input(traj, timesteps, stride));
    out.labels.push_back(traj.label);
  }
  return out;
}

inline std::vector<int> predict_all(Model& model, const Batchable& data) {
  std::vector<int> out;
  out.reserve(data.inputs.size());
  for (const auto& in : data.inputs) out.push_back(argmax(model.forward(in)));
  return out;
}

inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels) {
  if (predicted.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hit += predicted[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(predicted.size());
}

inline double evaluate_accuracy(Model& model, const Dataset& data) {
  const auto b = prepare_inputs(data, model.timesteps(), model.spec().input_stride);
  return accuracy(predict_all(model, b), b.labels);
}

/// Mini-batch training. Every trajectory must already be truncated to the
/// model's T (and normalised). The final parameters are those after the last
/// epoch.
inline TrainedModel train(Model model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  const auto stride = model.spec().input_stride;
  const auto tr = prepare_inputs(train_set, model.timesteps(), stride);
  const auto va = prepare_inputs(val_set, model.timesteps(), stride);

  TrainedModel out{std::move(model), {}};
  Model& m = out.model;
  Optimizer opt(cfg.optimizer);
  Rng rng(derive_seed(cfg.seed, "shuffle"));
  std::vector<std::size_t> order(tr.inputs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      m.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const auto i = order[k];
        const auto logits = m.forward(tr.inputs[i]);
        auto loss = softmax_cross_entropy(logits, tr.labels[i]);
        if (!std::isfinite(loss.loss)) {
          throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) + ", sample " +
                                 std::to_string(i));
        }
        loss_sum += loss.loss;
        for (auto& g : loss.grad) g *= scale;
        m.backward(loss.grad);
      }
      if (cfg.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& p : m.parameters()) {
          for (double g : p.grad.values) sq += g * g;
        }
        const double norm = std::sqrt(sq);
        if (!std::isfinite(norm)) throw TrainingDiverged("non-finite gradient at epoch " + std::to_string(epoch));
        if (norm > cfg.clip_norm) {
          const double f = cfg.clip_norm / norm;
          for (auto& p : m.parameters()) {
            for (double& g : p.grad.values) g *= f;
          }
        }
      }
      opt.step(m.parameters());
    }
    EpochRecord rec;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_accuracy = va.inputs.empty() ? 0.0 : accuracy(predict_all(m, va), va.labels);
    out.history.push_back(rec);
  }
  return out;
}

}  // namespace trajclass::nn
