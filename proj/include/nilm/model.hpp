#pragma once

#include <cstdint>
#include <string>

#include "nilm/layers.hpp"

namespace nilm {

struct ModelConfig {
  int window_len = 100;
  int conv_filters = 48;
  int conv_kernel_width = 4;
  int pool_size = 3;
  int lstm1_hidden = 256;
  int lstm2_hidden = 128;
  bool lstm2_returns_sequences = false;  // true enables the flatten variant
  int dense1_units = 128;
  Activation dense1_activation = Activation::Relu;
  bool relu_after_conv = false;
  double forget_bias = 1.0;
  std::uint64_t seed = 0;

  int pooled_len() const { return (window_len - pool_size) / pool_size + 1; }
  int dense1_in() const {
    return lstm2_returns_sequences ? pooled_len() * lstm2_hidden : lstm2_hidden;
  }
  void validate() const;  // throws ShapeError on an inconsistent config
};

// Conv1D -> MaxPool -> LSTM -> LSTM -> Dense -> Dense, window in, window out.
struct Model {
  ModelConfig config;
  Conv1d conv;
  MaxPool1d pool;
  Lstm lstm1, lstm2;
  Dense dense1, dense2;

  struct Cache {
    Conv1d::Cache conv;
    MaxPool1d::Cache pool;
    Lstm::Cache lstm1, lstm2;
    Dense::Cache dense1, dense2;
    Matrix relu_pre;  // conv output before the optional ReLU
  };

  Vector forward(const Vector& window, Cache* cache = nullptr) const;
  // Gradient of the composed map, flattened in checkpoint block order.
  Vector backward(const Cache& cache, const Vector& grad_out) const;

  Vector params() const;          // flattened, checkpoint block order
  void set_params(const Vector& flat);
};

Model build_model(const ModelConfig& config);
std::int64_t param_count(const ModelConfig& config);

// Binary checkpoint: magic, version, JSON config header, raw little-endian
// 64-bit parameters in block order, FNV-1a checksum.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

}  // namespace nilm
