#pragma once

#include <random>
#include <vector>

#include "nilm/tensor.hpp"

namespace nilm {

enum class Padding { Same, Valid };
enum class Activation { Relu, Linear };

// Sequences are (T, C) matrices, rows = time steps.

struct Conv1d {
  int num_filters = 0;
  int kernel_width = 0;
  int in_channels = 0;
  Padding padding = Padding::Same;
  Matrix weights;  // (F, K*C), flat column index k*C + c
  Vector bias;     // (F)

  struct Cache {
    Matrix patches;  // (T_out, K*C) im2col view of the padded input
    Eigen::Index input_len = 0;
  };
  struct Grads {
    Matrix weights;
    Vector bias;
  };

  void init(std::mt19937_64& rng);
  Eigen::Index out_len(Eigen::Index input_len) const;
  Matrix forward(const Matrix& input, Cache* cache = nullptr) const;
  Matrix backward(const Matrix& grad_out, const Cache& cache, Grads& grads) const;
};

struct MaxPool1d {
  int pool_size = 1;
  int stride = 0;  // 0 means stride == pool_size

  struct Cache {
    Eigen::MatrixXi argmax;  // (T_out, F) input row of each window max
    Eigen::Index input_len = 0;
  };

  int effective_stride() const { return stride > 0 ? stride : pool_size; }
  Eigen::Index out_len(Eigen::Index input_len) const;
  Matrix forward(const Matrix& input, Cache* cache = nullptr) const;
  Matrix backward(const Matrix& grad_out, const Cache& cache) const;
};

// Gate layout follows [h_{t-1}; x_t] concatenation, hidden part first.
struct Lstm {
  int input_dim = 0;
  int hidden_dim = 0;
  bool return_sequences = true;
  Matrix Wf, Wi, Wc, Wo;  // (H, H+D) each
  Vector bf, bi, bc, bo;  // (H) each

  struct Cache {
    std::vector<Vector> z;       // concatenated [h_prev; x], per step
    std::vector<Vector> f, i, g, o;
    std::vector<Vector> c, tanh_c;
    std::vector<Vector> c_prev;
  };
  struct Grads {
    Matrix Wf, Wi, Wc, Wo;
    Vector bf, bi, bc, bo;
  };

  void init(std::mt19937_64& rng, double forget_bias = 1.0);
  void step(const Vector& x, Vector& h, Vector& c, Cache* cache = nullptr) const;
  // (T, D) -> (T, H) when return_sequences, else (1, H) holding the final h.
  Matrix forward(const Matrix& seq, Cache* cache = nullptr) const;
  Matrix backward(const Matrix& grad_out, const Cache& cache, Grads& grads) const;
};

struct Dense {
  int in_dim = 0;
  int out_dim = 0;
  Activation activation = Activation::Linear;
  Matrix weights;  // (out, in)
  Vector bias;

  struct Cache {
    Vector input;
    Vector pre;  // pre-activation
  };
  struct Grads {
    Matrix weights;
    Vector bias;
  };

  void init(std::mt19937_64& rng);
  Vector forward(const Vector& x, Cache* cache = nullptr) const;
  Vector backward(const Vector& grad_out, const Cache& cache, Grads& grads) const;
};

// Glorot-uniform bound used for conv/dense weights.
double glorot_bound(int fan_in, int fan_out);

}  // namespace nilm
