#pragma once

#include "nilm/data.hpp"
#include "nilm/model.hpp"

namespace nilm {

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int epochs = 500;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool shuffle_each_epoch = true;
  double clip_norm = 5.0;  // global-norm gradient clip, 0 disables
  int checkpoint_every = 0;
  std::string checkpoint_dir;

  void validate() const;
};

struct OptimizerState {
  Vector m, v;  // first/second moment accumulators
  long step = 0;
};

struct MaeResult {
  double loss = 0.0;
  Vector grad;
};

// loss = mean |pred - target|, grad = sign(pred - target)/W, sign(0) = 0
MaeResult mae_loss(const Vector& pred, const Vector& target);

void adam_step(Vector& params, const Vector& grads, OptimizerState& state,
               const TrainConfig& cfg);

struct EpochRecord {
  double train_loss = 0.0;
  double valid_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  Vector best_params;  // lowest validation loss
  double best_valid_loss = 0.0;
  int best_epoch = 0;
};

// Mini-batch MAE training with Adam; deterministic for a given cfg.seed.
// Throws DivergenceError when the loss stops being finite.
TrainResult train(Model& model, const WindowedDataset& train_set,
                  const WindowedDataset& valid_set, const TrainConfig& cfg);

double dataset_loss(const Model& model, const WindowedDataset& set);

void write_history_csv(const std::string& path,
                       const std::vector<EpochRecord>& history);

}  // namespace nilm
