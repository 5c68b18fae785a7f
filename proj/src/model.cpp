#include "nilm/model.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace nilm {

namespace {

constexpr char kMagic[8] = {'N', 'I', 'L', 'M', 'M', 'D', 'L', '1'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const unsigned char* data, std::size_t len) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= data[i];
    h *= 1099511628211ull;
  }
  return h;
}

void append(Vector& out, Eigen::Index& pos, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[pos++] = m(r, c);
}
void append(Vector& out, Eigen::Index& pos, const Vector& v) {
  out.segment(pos, v.size()) = v;
  pos += v.size();
}
void take(const Vector& in, Eigen::Index& pos, Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = in[pos++];
}
void take(const Vector& in, Eigen::Index& pos, Vector& v) {
  v = in.segment(pos, v.size());
  pos += v.size();
}

template <typename M, typename Fn>
void for_each_block(M& m, Fn&& fn) {
  fn(m.conv.weights); fn(m.conv.bias);
  for (auto* l : {&m.lstm1, &m.lstm2}) {
    fn(l->Wf); fn(l->Wi); fn(l->Wc); fn(l->Wo);
    fn(l->bf); fn(l->bi); fn(l->bc); fn(l->bo);
  }
  fn(m.dense1.weights); fn(m.dense1.bias);
  fn(m.dense2.weights); fn(m.dense2.bias);
}

}  // namespace

void ModelConfig::validate() const {
  if (window_len < 1 || conv_filters < 1 || conv_kernel_width < 1 ||
      pool_size < 1 || lstm1_hidden < 1 || lstm2_hidden < 1 ||
      dense1_units < 1)
    throw ShapeError("model config: all dimensions must be >= 1");
  if (window_len < pool_size)
    throw ShapeError("model config: pooled length < 1 (window " +
                     std::to_string(window_len) + ", pool " +
                     std::to_string(pool_size) + ")");
}

Model build_model(const ModelConfig& config) {
  config.validate();
  Model m;
  m.config = config;
  m.conv = Conv1d{config.conv_filters, config.conv_kernel_width, 1,
                  Padding::Same};
  m.pool = MaxPool1d{config.pool_size, 0};
  m.lstm1 = Lstm{config.conv_filters, config.lstm1_hidden, true};
  m.lstm2 = Lstm{config.lstm1_hidden, config.lstm2_hidden,
                 config.lstm2_returns_sequences};
  m.dense1 = Dense{config.dense1_in(), config.dense1_units,
                   config.dense1_activation};
  m.dense2 = Dense{config.dense1_units, config.window_len, Activation::Linear};

  std::mt19937_64 rng(config.seed);
  m.conv.init(rng);
  m.lstm1.init(rng, config.forget_bias);
  m.lstm2.init(rng, config.forget_bias);
  m.dense1.init(rng);
  m.dense2.init(rng);
  return m;
}

std::int64_t param_count(const ModelConfig& config) {
  config.validate();
  const std::int64_t conv =
      std::int64_t{config.conv_filters} * config.conv_kernel_width * 1 +
      config.conv_filters;
  auto lstm = [](std::int64_t h, std::int64_t d) { return 4 * (h * (d + h) + h); };
  const std::int64_t l1 = lstm(config.lstm1_hidden, config.conv_filters);
  const std::int64_t l2 = lstm(config.lstm2_hidden, config.lstm1_hidden);
  const std::int64_t d1 =
      std::int64_t{config.dense1_units} * config.dense1_in() + config.dense1_units;
  const std::int64_t d2 =
      std::int64_t{config.window_len} * config.dense1_units + config.window_len;
  return conv + l1 + l2 + d1 + d2;
}

Vector Model::forward(const Vector& window, Cache* cache) const {
  if (window.size() != config.window_len)
    throw ShapeError("model: expected window of " +
                     std::to_string(config.window_len) + " samples, got " +
                     std::to_string(window.size()));
  Matrix x = window;  // (W, 1)
  Matrix conv_out = conv.forward(x, cache ? &cache->conv : nullptr);
  if (config.relu_after_conv) {
    if (cache) cache->relu_pre = conv_out;
    conv_out = conv_out.cwiseMax(0.0);
  }
  Matrix pooled = pool.forward(conv_out, cache ? &cache->pool : nullptr);
  Matrix h1 = lstm1.forward(pooled, cache ? &cache->lstm1 : nullptr);
  Matrix h2 = lstm2.forward(h1, cache ? &cache->lstm2 : nullptr);

  Vector flat(h2.size());
  Eigen::Index pos = 0;
  append(flat, pos, h2);  // row-major: time-major when sequences are returned
  Vector d1 = dense1.forward(flat, cache ? &cache->dense1 : nullptr);
  return dense2.forward(d1, cache ? &cache->dense2 : nullptr);
}

Vector Model::backward(const Cache& cache, const Vector& grad_out) const {
  Dense::Grads g_dense2, g_dense1;
  Vector d1 = dense2.backward(grad_out, cache.dense2, g_dense2);
  Vector flat = dense1.backward(d1, cache.dense1, g_dense1);

  Matrix g_h2(config.lstm2_returns_sequences ? config.pooled_len() : 1,
              config.lstm2_hidden);
  Eigen::Index pos = 0;
  take(flat, pos, g_h2);

  Lstm::Grads g_lstm2, g_lstm1;
  Matrix g_h1 = lstm2.backward(g_h2, cache.lstm2, g_lstm2);
  Matrix g_pool = lstm1.backward(g_h1, cache.lstm1, g_lstm1);
  Matrix g_conv_out = pool.backward(g_pool, cache.pool);
  if (config.relu_after_conv)
    g_conv_out =
        ((cache.relu_pre.array() > 0.0).cast<double>() * g_conv_out.array())
            .matrix();
  Conv1d::Grads g_conv;
  conv.backward(g_conv_out, cache.conv, g_conv);

  Vector out(param_count(config));
  pos = 0;
  append(out, pos, g_conv.weights);
  append(out, pos, g_conv.bias);
  for (const Lstm::Grads* g : {&g_lstm1, &g_lstm2}) {
    append(out, pos, g->Wf); append(out, pos, g->Wi);
    append(out, pos, g->Wc); append(out, pos, g->Wo);
    append(out, pos, g->bf); append(out, pos, g->bi);
    append(out, pos, g->bc); append(out, pos, g->bo);
  }
  append(out, pos, g_dense1.weights);
  append(out, pos, g_dense1.bias);
  append(out, pos, g_dense2.weights);
  append(out, pos, g_dense2.bias);
  return out;
}

Vector Model::params() const {
  Vector out(param_count(config));
  Eigen::Index pos = 0;
  for_each_block(*this, [&](const auto& block) { append(out, pos, block); });
  return out;
}

void Model::set_params(const Vector& flat) {
  if (flat.size() != param_count(config))
    throw ShapeError("set_params: expected " +
                     std::to_string(param_count(config)) + " values, got " +
                     std::to_string(flat.size()));
  Eigen::Index pos = 0;
  for_each_block(*this, [&](auto& block) { take(flat, pos, block); });
}

std::string config_to_json(const ModelConfig& c) {
  nlohmann::json j{
      {"window_len", c.window_len},
      {"conv_filters", c.conv_filters},
      {"conv_kernel_width", c.conv_kernel_width},
      {"pool_size", c.pool_size},
      {"lstm1_hidden", c.lstm1_hidden},
      {"lstm2_hidden", c.lstm2_hidden},
      {"lstm2_returns_sequences", c.lstm2_returns_sequences},
      {"dense1_units", c.dense1_units},
      {"dense1_activation",
       c.dense1_activation == Activation::Relu ? "relu" : "linear"},
      {"relu_after_conv", c.relu_after_conv},
      {"forget_bias", c.forget_bias},
      {"seed", c.seed},
  };
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelConfig c;
  c.window_len = j.value("window_len", c.window_len);
  c.conv_filters = j.value("conv_filters", c.conv_filters);
  c.conv_kernel_width = j.value("conv_kernel_width", c.conv_kernel_width);
  c.pool_size = j.value("pool_size", c.pool_size);
  c.lstm1_hidden = j.value("lstm1_hidden", c.lstm1_hidden);
  c.lstm2_hidden = j.value("lstm2_hidden", c.lstm2_hidden);
  c.lstm2_returns_sequences =
      j.value("lstm2_returns_sequences", c.lstm2_returns_sequences);
  c.dense1_units = j.value("dense1_units", c.dense1_units);
  c.dense1_activation = j.value("dense1_activation", std::string("relu")) ==
                                "linear"
                            ? Activation::Linear
                            : Activation::Relu;
  c.relu_after_conv = j.value("relu_after_conv", c.relu_after_conv);
  c.forget_bias = j.value("forget_bias", c.forget_bias);
  c.seed = j.value("seed", c.seed);
  return c;
}

void save_model(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_model: cannot open " + path);
  const std::string header = config_to_json(model.config);
  const Vector p = model.params();
  const std::uint32_t header_len = static_cast<std::uint32_t>(header.size());
  const std::uint64_t n = static_cast<std::uint64_t>(p.size());
  const std::uint64_t checksum =
      fnv1a(reinterpret_cast<const unsigned char*>(p.data()),
            n * sizeof(double));
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header.data(), header_len);
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(p.data()), n * sizeof(double));
  out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
  if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  char magic[8];
  std::uint32_t version = 0, header_len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_model: " + path + " is not a checkpoint");
  if (version != kVersion)
    throw std::runtime_error("load_model: unsupported checkpoint version " +
                             std::to_string(version));
  std::string header(header_len, '\0');
  in.read(header.data(), header_len);
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in) throw std::runtime_error("load_model: truncated checkpoint " + path);

  const ModelConfig config = config_from_json(header);
  if (n != static_cast<std::uint64_t>(param_count(config)))
    throw ShapeError("load_model: checkpoint holds " + std::to_string(n) +
                     " parameters but its config needs " +
                     std::to_string(param_count(config)));
  Vector p(static_cast<Eigen::Index>(n));
  in.read(reinterpret_cast<char*>(p.data()), n * sizeof(double));
  std::uint64_t stored = 0;
  in.read(reinterpret_cast<char*>(&stored), sizeof(stored));
  if (!in) throw std::runtime_error("load_model: truncated checkpoint " + path);
  const std::uint64_t checksum =
      fnv1a(reinterpret_cast<const unsigned char*>(p.data()),
            n * sizeof(double));
  if (stored != checksum)
    throw std::runtime_error("load_model: checksum mismatch in " + path);

  Model m = build_model(config);
  m.set_params(p);
  return m;
}

}  // namespace nilm
