#include "nilm/training.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

namespace nilm {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (learning_rate < 0.0)
    throw std::invalid_argument("train: learning rate must be >= 0");
}

MaeResult mae_loss(const Vector& pred, const Vector& target) {
  if (pred.size() != target.size())
    throw ShapeError("mae_loss: size mismatch (" + std::to_string(pred.size()) +
                     " vs " + std::to_string(target.size()) + ")");
  const double w = static_cast<double>(pred.size());
  MaeResult r;
  r.loss = (pred - target).cwiseAbs().mean();
  r.grad = ((pred - target).array().sign() / w).matrix();
  return r;
}

void adam_step(Vector& params, const Vector& grads, OptimizerState& state,
               const TrainConfig& cfg) {
  if (grads.size() != params.size())
    throw ShapeError("adam_step: gradient size mismatch");
  if (state.step == 0) {
    state.m = Vector::Zero(params.size());
    state.v = Vector::Zero(params.size());
  }
  ++state.step;
  state.m = cfg.adam_beta1 * state.m + (1.0 - cfg.adam_beta1) * grads;
  state.v = cfg.adam_beta2 * state.v +
            (1.0 - cfg.adam_beta2) * grads.cwiseProduct(grads);
  const double mc = 1.0 - std::pow(cfg.adam_beta1, state.step);
  const double vc = 1.0 - std::pow(cfg.adam_beta2, state.step);
  params.array() -= cfg.learning_rate * (state.m.array() / mc) /
                    ((state.v.array() / vc).sqrt() + cfg.adam_eps);
}

double dataset_loss(const Model& model, const WindowedDataset& set) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < set.inputs.rows(); ++r) {
    const Vector pred = model.forward(set.inputs.row(r).transpose());
    total += mae_loss(pred, set.targets.row(r).transpose()).loss;
  }
  return total / static_cast<double>(set.inputs.rows());
}

TrainResult train(Model& model, const WindowedDataset& train_set,
                  const WindowedDataset& valid_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.inputs.rows() == 0 || valid_set.inputs.rows() == 0)
    throw std::invalid_argument("train: datasets must be nonempty");
  if (train_set.window_len != model.config.window_len)
    throw ShapeError("train: dataset window " +
                     std::to_string(train_set.window_len) +
                     " != model window " +
                     std::to_string(model.config.window_len));

  const Eigen::Index n = train_set.inputs.rows();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  Vector params = model.params();
  OptimizerState opt;
  TrainResult result;
  result.best_valid_loss = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle_each_epoch) {
      // counter-based seeding keeps the permutation independent of loader order
      std::mt19937_64 rng(cfg.seed + 0x9e3779b97f4a7c15ull *
                                         static_cast<std::uint64_t>(epoch + 1));
      std::shuffle(order.begin(), order.end(), rng);
    }

    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(cfg.batch_size, n - start);
      Vector grad = Vector::Zero(params.size());
      double batch_loss = 0.0;
      for (Eigen::Index k = 0; k < count; ++k) {  // fixed reduction order
        const Eigen::Index r = order[start + k];
        Model::Cache cache;
        const Vector pred =
            model.forward(train_set.inputs.row(r).transpose(), &cache);
        const MaeResult mae =
            mae_loss(pred, train_set.targets.row(r).transpose());
        batch_loss += mae.loss;
        grad += model.backward(cache, mae.grad);
      }
      grad /= static_cast<double>(count);
      batch_loss /= static_cast<double>(count);
      epoch_loss += batch_loss * static_cast<double>(count);
      if (!std::isfinite(batch_loss))
        throw DivergenceError("training diverged: non-finite loss at epoch " +
                              std::to_string(epoch + 1));
      if (cfg.clip_norm > 0.0) {
        const double norm = grad.norm();
        if (norm > cfg.clip_norm) grad *= cfg.clip_norm / norm;
      }
      adam_step(params, grad, opt, cfg);
      model.set_params(params);
    }

    EpochRecord rec;
    rec.train_loss = epoch_loss / static_cast<double>(n);
    rec.valid_loss = dataset_loss(model, valid_set);
    if (!std::isfinite(rec.valid_loss))
      throw DivergenceError("training diverged: non-finite validation loss");
    result.history.push_back(rec);

    if (rec.valid_loss < result.best_valid_loss) {
      result.best_valid_loss = rec.valid_loss;
      result.best_params = params;
      result.best_epoch = epoch + 1;
    }
    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_dir.empty() &&
        (epoch + 1) % cfg.checkpoint_every == 0) {
      save_model(model, cfg.checkpoint_dir + "/epoch_" +
                            std::to_string(epoch + 1) + ".nilm");
    }
  }
  return result;
}

void write_history_csv(const std::string& path,
                       const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "epoch,train_loss,valid_loss\n";
  out.precision(17);
  for (std::size_t i = 0; i < history.size(); ++i)
    out << (i + 1) << ',' << history[i].train_loss << ','
        << history[i].valid_loss << '\n';
}

}  // namespace nilm
