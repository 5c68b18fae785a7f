#include "nilm/layers.hpp"

namespace nilm {

double glorot_bound(int fan_in, int fan_out) {
  return std::sqrt(6.0 / (fan_in + fan_out));
}

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound,
                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

}  // namespace

// ---------------------------------------------------------------- Conv1d

void Conv1d::init(std::mt19937_64& rng) {
  const int fan_in = kernel_width * in_channels;
  const double bound = glorot_bound(fan_in, num_filters);
  weights = uniform_matrix(num_filters, fan_in, bound, rng);
  bias = Vector::Zero(num_filters);
}

Eigen::Index Conv1d::out_len(Eigen::Index input_len) const {
  if (padding == Padding::Same) return input_len;
  return input_len - kernel_width + 1;
}

Matrix Conv1d::forward(const Matrix& input, Cache* cache) const {
  if (input.cols() != in_channels) {
    throw ShapeError("conv1d: expected " + std::to_string(in_channels) +
                     " channels, got " + std::to_string(input.cols()));
  }
  const Eigen::Index t_in = input.rows();
  const Eigen::Index t_out = out_len(t_in);
  if (t_out < 1) {
    throw ShapeError("conv1d: input length " + std::to_string(t_in) +
                     " shorter than kernel " + std::to_string(kernel_width));
  }
  // Same padding: extra zero on the right for even kernels.
  const Eigen::Index pad_left =
      padding == Padding::Same ? (kernel_width - 1) / 2 : 0;

  Matrix patches = Matrix::Zero(t_out, kernel_width * in_channels);
  for (Eigen::Index t = 0; t < t_out; ++t) {
    for (int k = 0; k < kernel_width; ++k) {
      const Eigen::Index src = t + k - pad_left;
      if (src < 0 || src >= t_in) continue;
      for (int c = 0; c < in_channels; ++c)
        patches(t, k * in_channels + c) = input(src, c);
    }
  }
  Matrix out = patches * weights.transpose();
  out.rowwise() += bias.transpose();
  if (cache) {
    cache->patches = std::move(patches);
    cache->input_len = t_in;
  }
  return out;
}

Matrix Conv1d::backward(const Matrix& grad_out, const Cache& cache,
                        Grads& grads) const {
  if (grad_out.rows() != cache.patches.rows() || grad_out.cols() != num_filters)
    throw ShapeError("conv1d backward: grad_out shape mismatch");
  grads.weights = grad_out.transpose() * cache.patches;
  grads.bias = grad_out.colwise().sum().transpose();

  const Eigen::Index pad_left =
      padding == Padding::Same ? (kernel_width - 1) / 2 : 0;
  Matrix grad_patches = grad_out * weights;  // (T_out, K*C)
  Matrix grad_in = Matrix::Zero(cache.input_len, in_channels);
  for (Eigen::Index t = 0; t < grad_patches.rows(); ++t) {
    for (int k = 0; k < kernel_width; ++k) {
      const Eigen::Index src = t + k - pad_left;
      if (src < 0 || src >= cache.input_len) continue;
      for (int c = 0; c < in_channels; ++c)
        grad_in(src, c) += grad_patches(t, k * in_channels + c);
    }
  }
  return grad_in;
}

// ------------------------------------------------------------- MaxPool1d

Eigen::Index MaxPool1d::out_len(Eigen::Index input_len) const {
  if (input_len < pool_size)
    throw ShapeError("maxpool1d: input length " + std::to_string(input_len) +
                     " shorter than pool size " + std::to_string(pool_size));
  return (input_len - pool_size) / effective_stride() + 1;
}

Matrix MaxPool1d::forward(const Matrix& input, Cache* cache) const {
  const Eigen::Index t_out = out_len(input.rows());
  const int s = effective_stride();
  Matrix out(t_out, input.cols());
  Eigen::MatrixXi argmax(t_out, input.cols());
  for (Eigen::Index t = 0; t < t_out; ++t) {
    for (Eigen::Index f = 0; f < input.cols(); ++f) {
      Eigen::Index best = t * s;
      for (int k = 1; k < pool_size; ++k)
        if (input(t * s + k, f) > input(best, f)) best = t * s + k;  // ties keep first
      out(t, f) = input(best, f);
      argmax(t, f) = static_cast<int>(best);
    }
  }
  if (cache) {
    cache->argmax = std::move(argmax);
    cache->input_len = input.rows();
  }
  return out;
}

Matrix MaxPool1d::backward(const Matrix& grad_out, const Cache& cache) const {
  if (grad_out.rows() != cache.argmax.rows() ||
      grad_out.cols() != cache.argmax.cols())
    throw ShapeError("maxpool1d backward: grad_out shape mismatch");
  Matrix grad_in = Matrix::Zero(cache.input_len, grad_out.cols());
  for (Eigen::Index t = 0; t < grad_out.rows(); ++t)
    for (Eigen::Index f = 0; f < grad_out.cols(); ++f)
      grad_in(cache.argmax(t, f), f) += grad_out(t, f);
  return grad_in;
}

// ------------------------------------------------------------------ Lstm

void Lstm::init(std::mt19937_64& rng, double forget_bias) {
  const double bound = std::sqrt(1.0 / hidden_dim);
  const Eigen::Index cols = hidden_dim + input_dim;
  Wf = uniform_matrix(hidden_dim, cols, bound, rng);
  Wi = uniform_matrix(hidden_dim, cols, bound, rng);
  Wc = uniform_matrix(hidden_dim, cols, bound, rng);
  Wo = uniform_matrix(hidden_dim, cols, bound, rng);
  bf = Vector::Constant(hidden_dim, forget_bias);
  bi = Vector::Zero(hidden_dim);
  bc = Vector::Zero(hidden_dim);
  bo = Vector::Zero(hidden_dim);
}

void Lstm::step(const Vector& x, Vector& h, Vector& c, Cache* cache) const {
  if (x.size() != input_dim || h.size() != hidden_dim || c.size() != hidden_dim)
    throw ShapeError("lstm step: state/input size mismatch");
  Vector z(hidden_dim + input_dim);
  z << h, x;
  const Vector f = sigmoid((Wf * z + bf).array()).matrix();
  const Vector i = sigmoid((Wi * z + bi).array()).matrix();
  const Vector g = (Wc * z + bc).array().tanh().matrix();
  const Vector o = sigmoid((Wo * z + bo).array()).matrix();
  const Vector c_prev = c;
  c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
  const Vector tc = c.array().tanh().matrix();
  h = o.cwiseProduct(tc);
  if (cache) {
    cache->z.push_back(std::move(z));
    cache->f.push_back(f);
    cache->i.push_back(i);
    cache->g.push_back(g);
    cache->o.push_back(o);
    cache->c.push_back(c);
    cache->tanh_c.push_back(tc);
    cache->c_prev.push_back(c_prev);
  }
}

Matrix Lstm::forward(const Matrix& seq, Cache* cache) const {
  if (seq.rows() < 1) throw ShapeError("lstm: empty sequence");
  if (seq.cols() != input_dim)
    throw ShapeError("lstm: expected input dim " + std::to_string(input_dim) +
                     ", got " + std::to_string(seq.cols()));
  Vector h = Vector::Zero(hidden_dim);
  Vector c = Vector::Zero(hidden_dim);
  Matrix out(return_sequences ? seq.rows() : 1, hidden_dim);
  for (Eigen::Index t = 0; t < seq.rows(); ++t) {
    step(seq.row(t).transpose(), h, c, cache);
    if (return_sequences) out.row(t) = h.transpose();
  }
  if (!return_sequences) out.row(0) = h.transpose();
  return out;
}

Matrix Lstm::backward(const Matrix& grad_out, const Cache& cache,
                      Grads& grads) const {
  const auto T = static_cast<Eigen::Index>(cache.z.size());
  if (T == 0) throw ShapeError("lstm backward: empty cache");
  if (return_sequences ? (grad_out.rows() != T) : (grad_out.rows() != 1))
    throw ShapeError("lstm backward: grad_out row count mismatch");

  const Eigen::Index cols = hidden_dim + input_dim;
  grads.Wf = Matrix::Zero(hidden_dim, cols);
  grads.Wi = Matrix::Zero(hidden_dim, cols);
  grads.Wc = Matrix::Zero(hidden_dim, cols);
  grads.Wo = Matrix::Zero(hidden_dim, cols);
  grads.bf = Vector::Zero(hidden_dim);
  grads.bi = Vector::Zero(hidden_dim);
  grads.bc = Vector::Zero(hidden_dim);
  grads.bo = Vector::Zero(hidden_dim);

  Matrix grad_seq(T, input_dim);
  Vector dh_next = Vector::Zero(hidden_dim);
  Vector dc_next = Vector::Zero(hidden_dim);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    Vector dh = dh_next;
    if (return_sequences)
      dh += grad_out.row(t).transpose();
    else if (t == T - 1)
      dh += grad_out.row(0).transpose();

    const Vector& f = cache.f[t];
    const Vector& i = cache.i[t];
    const Vector& g = cache.g[t];
    const Vector& o = cache.o[t];
    const Vector& tc = cache.tanh_c[t];

    const Vector d_o = dh.cwiseProduct(tc);
    Vector dc = dc_next +
                (dh.array() * o.array() * (1.0 - tc.array().square())).matrix();
    const Vector d_f = dc.cwiseProduct(cache.c_prev[t]);
    const Vector d_i = dc.cwiseProduct(g);
    const Vector d_g = dc.cwiseProduct(i);

    // pre-activation gradients
    const Vector af = (d_f.array() * f.array() * (1.0 - f.array())).matrix();
    const Vector ai = (d_i.array() * i.array() * (1.0 - i.array())).matrix();
    const Vector ac = (d_g.array() * (1.0 - g.array().square())).matrix();
    const Vector ao = (d_o.array() * o.array() * (1.0 - o.array())).matrix();

    const Vector& z = cache.z[t];
    grads.Wf.noalias() += af * z.transpose();
    grads.Wi.noalias() += ai * z.transpose();
    grads.Wc.noalias() += ac * z.transpose();
    grads.Wo.noalias() += ao * z.transpose();
    grads.bf += af;
    grads.bi += ai;
    grads.bc += ac;
    grads.bo += ao;

    const Vector dz = Wf.transpose() * af + Wi.transpose() * ai +
                      Wc.transpose() * ac + Wo.transpose() * ao;
    dh_next = dz.head(hidden_dim);
    grad_seq.row(t) = dz.tail(input_dim).transpose();
    dc_next = dc.cwiseProduct(f);
  }
  return grad_seq;
}

// ----------------------------------------------------------------- Dense

void Dense::init(std::mt19937_64& rng) {
  weights = uniform_matrix(out_dim, in_dim, glorot_bound(in_dim, out_dim), rng);
  bias = Vector::Zero(out_dim);
}

Vector Dense::forward(const Vector& x, Cache* cache) const {
  if (x.size() != in_dim)
    throw ShapeError("dense: expected input dim " + std::to_string(in_dim) +
                     ", got " + std::to_string(x.size()));
  Vector pre = weights * x + bias;
  Vector out = activation == Activation::Relu
                   ? pre.cwiseMax(0.0).eval()
                   : pre;
  if (cache) {
    cache->input = x;
    cache->pre = std::move(pre);
  }
  return out;
}

Vector Dense::backward(const Vector& grad_out, const Cache& cache,
                       Grads& grads) const {
  if (grad_out.size() != out_dim)
    throw ShapeError("dense backward: grad_out size mismatch");
  Vector d = grad_out;
  if (activation == Activation::Relu) {
    // subgradient 0 at pre == 0
    for (Eigen::Index j = 0; j < d.size(); ++j)
      if (cache.pre[j] <= 0.0) d[j] = 0.0;
  }
  grads.weights = d * cache.input.transpose();
  grads.bias = d;
  return weights.transpose() * d;
}

}  // namespace nilm
