#include "ctin/model.hpp"

#include <algorithm>
#include <cmath>

#include "ctin/autodiff/ops.hpp"
#include "ctin/errors.hpp"

namespace ctin {

using ad::Mode;
using ad::Shape;
using ad::Tensor;
using ad::Var;

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("model config: " + msg);
  };
  need(window_len >= 2, "window_len must be >= 2");
  need(input_channels >= 1, "input_channels must be >= 1");
  need(model_dim >= 2 && model_dim % 2 == 0, "model_dim must be even and >= 2");
  need(heads >= 1 && model_dim % heads == 0, "model_dim must be divisible by heads");
  need(bottleneck() % heads == 0, "model_dim / 2 must be divisible by heads");
  need(encoder_layers >= 0 && decoder_layers >= 0, "layer counts must be >= 0");
  need(ffn_dim >= 0 && lstm_hidden >= 0, "ffn_dim and lstm_hidden must be >= 0");
  need(hidden() >= 1, "lstm hidden size must be >= 1");
  need(local_kernel >= 1 && local_kernel % 2 == 1, "local_kernel must be odd");
  need(dropout_encoder >= 0 && dropout_encoder < 1, "dropout_encoder must be in [0, 1)");
  need(dropout_decoder >= 0 && dropout_decoder < 1, "dropout_decoder must be in [0, 1)");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"window_len", c.window_len},
          {"input_channels", c.input_channels},
          {"model_dim", c.model_dim},
          {"heads", c.heads},
          {"encoder_layers", c.encoder_layers},
          {"decoder_layers", c.decoder_layers},
          {"ffn_dim", c.ffn()},
          {"lstm_hidden", c.hidden()},
          {"dropout_encoder", c.dropout_encoder},
          {"dropout_decoder", c.dropout_decoder},
          {"local_kernel", c.local_kernel},
          {"init_seed", c.init_seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  static const char* kKeys[] = {"window_len",      "input_channels",  "model_dim",
                                "heads",           "encoder_layers",  "decoder_layers",
                                "ffn_dim",         "lstm_hidden",     "dropout_encoder",
                                "dropout_decoder", "local_kernel",    "init_seed"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(std::begin(kKeys), std::end(kKeys), it.key()) == std::end(kKeys)) {
      throw ConfigError("model config: unknown key '" + it.key() + "'");
    }
  }
  ModelConfig c;
  try {
    c.window_len = j.value("window_len", c.window_len);
    c.input_channels = j.value("input_channels", c.input_channels);
    c.model_dim = j.value("model_dim", c.model_dim);
    c.heads = j.value("heads", c.heads);
    c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
    c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
    c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
    c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
    c.dropout_encoder = j.value("dropout_encoder", c.dropout_encoder);
    c.dropout_decoder = j.value("dropout_decoder", c.dropout_decoder);
    c.local_kernel = j.value("local_kernel", c.local_kernel);
    c.init_seed = j.value("init_seed", c.init_seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

Var multi_head_attention(const Var& q_in, const Var& kv_in, const MhaParams& p, int heads,
                         bool causal, Tensor* weights_out) {
  const int width = q_in.dim(-1);
  if (width % heads != 0) {
    throw DimensionError("attention width " + std::to_string(width) + " not divisible by " +
                         std::to_string(heads) + " heads");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(width / heads));
  const Var q = ad::split_heads(ad::matmul(q_in, p.wq), heads);
  const Var k = ad::split_heads(ad::matmul(kv_in, p.wk), heads);
  const Var v = ad::split_heads(ad::matmul(kv_in, p.wv), heads);
  const Var o = ad::merge_heads(ad::attention(q, k, v, scale, causal, weights_out), heads);
  return ad::add(ad::matmul(o, p.wo), p.bo);
}

Var local_self_attention(const Var& x, const LocalAttentionParams& p, int heads,
                         Tensor* weights_out) {
  if (x.value().rank() != 3) {
    throw DimensionError("local attention input must be [B, T, C], got " +
                         ad::shape_str(x.shape()));
  }
  const int batch = x.dim(0), time = x.dim(1), width = x.dim(2);
  const Var c1 = ad::conv1d(x, p.w_key, heads);
  const Var v = ad::matmul(x, p.w_value);
  const Var scores =
      ad::relu(ad::add(ad::matmul(ad::concat({x, c1}, -1), p.w_score), p.b_score));
  // Normalize each head's scores over time.
  const Var gamma = ad::reshape(ad::softmax(ad::transpose(scores)), Shape{batch * heads, 1, time});
  if (weights_out) *weights_out = gamma.value();
  const Var c2 = ad::reshape(ad::matmul(gamma, ad::split_heads(v, heads)), Shape{batch, 1, width});
  const Var gate_scores =
      ad::add(ad::add(ad::matmul(c1, ad::slice(p.w_gate, 0, 0, width)),
                      ad::matmul(c2, ad::slice(p.w_gate, 0, width, width))),
              p.b_gate);
  const Var w = ad::softmax(gate_scores);
  return ad::add(ad::mul(ad::slice(w, -1, 0, 1), c1), ad::mul(ad::slice(w, -1, 1, 1), c2));
}

namespace {

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Tensor uniform(Shape shape, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng_);
    return t;
  }

 private:
  std::mt19937_64 rng_;
};

Tensor* trace_slot(ForwardTrace* trace, const std::string& name) {
  if (!trace) return nullptr;
  trace->names.push_back(name);
  trace->weights.emplace_back();
  return &trace->weights.back();
}

}  // namespace

CtinModel::CtinModel(ModelConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  Initializer init(cfg_.init_seed);
  const int d = cfg_.model_dim;
  const int cin = cfg_.input_channels;
  const int hid = cfg_.hidden();
  const int b = cfg_.bottleneck();
  const int h = cfg_.heads;
  auto zeros = [](Shape s) { return Tensor(std::move(s), 0.0); };
  auto ones = [](Shape s) { return Tensor(std::move(s), 1.0); };
  auto add_linear = [&](const std::string& prefix, int in, int out, bool zero = false) {
    store_.add(prefix + ".w", zero ? zeros({in, out}) : init.uniform({in, out}, in));
    store_.add(prefix + ".b", zeros({out}));
  };
  auto add_bn = [&](const std::string& prefix, int c) {
    store_.add(prefix + ".gain", ones({c}));
    store_.add(prefix + ".bias", zeros({c}));
    store_.add_buffer(prefix + ".running_mean", zeros({c}));
    store_.add_buffer(prefix + ".running_var", ones({c}));
  };
  auto add_ln = [&](const std::string& prefix, int c) {
    store_.add(prefix + ".gain", ones({c}));
    store_.add(prefix + ".bias", zeros({c}));
  };
  auto add_mha = [&](const std::string& prefix, int c, bool zero_out) {
    store_.add(prefix + ".wq", init.uniform({c, c}, c));
    store_.add(prefix + ".wk", init.uniform({c, c}, c));
    store_.add(prefix + ".wv", init.uniform({c, c}, c));
    store_.add(prefix + ".wo", zero_out ? zeros({c, c}) : init.uniform({c, c}, c));
    store_.add(prefix + ".bo", zeros({c}));
  };
  auto add_lstm = [&](const std::string& prefix) {
    store_.add(prefix + ".w_ih", init.uniform({cin, 4 * hid}, hid));
    store_.add(prefix + ".w_hh", init.uniform({hid, 4 * hid}, hid));
    Tensor bias = zeros({4 * hid});
    for (int i = hid; i < 2 * hid; ++i) bias[i] = 1.0;
    store_.add(prefix + ".bias", std::move(bias));
  };

  store_.add_buffer("input.mean", zeros({cin}));
  store_.add_buffer("input.std", ones({cin}));

  store_.add("spatial.conv.w", init.uniform({3, cin, d}, 3 * cin));
  add_bn("spatial.bn", d);
  add_linear("spatial.proj", d, d);

  add_lstm("temporal.lstm.fwd");
  add_lstm("temporal.lstm.rev");
  add_linear("temporal.proj", 2 * hid, d);
  store_.add("temporal.pos", zeros({cfg_.window_len, d}));

  for (int i = 0; i < cfg_.encoder_layers; ++i) {
    const std::string pre = "encoder.block" + std::to_string(i);
    store_.add(pre + ".reduce.w", init.uniform({d, b}, d));
    add_bn(pre + ".bn1", b);
    store_.add(pre + ".local.w_key", init.uniform({cfg_.local_kernel, b / h, b},
                                                  cfg_.local_kernel * (b / h)));
    store_.add(pre + ".local.w_value", init.uniform({b, b}, b));
    store_.add(pre + ".local.w_score", init.uniform({2 * b, h}, 2 * b));
    store_.add(pre + ".local.b_score", zeros({h}));
    store_.add(pre + ".local.w_gate", zeros({2 * b, 2}));
    store_.add(pre + ".local.b_gate", zeros({2}));
    add_bn(pre + ".bn2", b);
    add_mha(pre + ".global", b, false);
    add_bn(pre + ".bn3", b);
    add_linear(pre + ".expand", b, d, true);
  }

  for (int i = 0; i < cfg_.decoder_layers; ++i) {
    const std::string pre = "decoder.layer" + std::to_string(i);
    add_ln(pre + ".ln1", d);
    add_mha(pre + ".self", d, true);
    add_ln(pre + ".ln2", d);
    add_mha(pre + ".cross", d, true);
    add_ln(pre + ".ln3", d);
    add_linear(pre + ".ffn1", d, cfg_.ffn());
    add_linear(pre + ".ffn2", cfg_.ffn(), d, true);
  }

  for (const char* branch : {"head.vel", "head.cov"}) {
    const std::string pre = branch;
    add_linear(pre + ".fc1", d, d);
    add_ln(pre + ".ln", d);
    add_linear(pre + ".fc2", d, 2);
  }
}

void CtinModel::set_input_normalization(const Eigen::VectorXd& mean, const Eigen::VectorXd& std) {
  const auto c = static_cast<Eigen::Index>(cfg_.input_channels);
  if (mean.size() != c || std.size() != c || (std.array() <= 0.0).any()) {
    throw ConfigError("input normalization needs " + std::to_string(c) +
                      " means and positive stds");
  }
  Tensor& m = store_.buffer("input.mean");
  Tensor& s = store_.buffer("input.std");
  for (Eigen::Index i = 0; i < c; ++i) {
    m[static_cast<std::size_t>(i)] = mean(i);
    s[static_cast<std::size_t>(i)] = std(i);
  }
}

MhaParams CtinModel::mha_params(const std::string& prefix) const {
  return {p(prefix + ".wq"), p(prefix + ".wk"), p(prefix + ".wv"), p(prefix + ".wo"),
          p(prefix + ".bo")};
}

LocalAttentionParams CtinModel::local_params(const std::string& prefix) const {
  return {p(prefix + ".w_key"),   p(prefix + ".w_value"), p(prefix + ".w_score"),
          p(prefix + ".b_score"), p(prefix + ".w_gate"),  p(prefix + ".b_gate")};
}

Var CtinModel::linear(const Var& x, const std::string& prefix) const {
  return ad::add(ad::matmul(x, p(prefix + ".w")), p(prefix + ".b"));
}

Var CtinModel::bn(const Var& x, const std::string& prefix, const ForwardOptions& opts) {
  ad::RunningStats stats{&store_.buffer(prefix + ".running_mean"),
                         &store_.buffer(prefix + ".running_var")};
  return ad::batch_norm(x, p(prefix + ".gain"), p(prefix + ".bias"), stats, opts.mode);
}

Var CtinModel::standardize(const Var& imu) const {
  const Var mean = ad::constant(store_.buffer("input.mean"));
  const Var std = ad::constant(store_.buffer("input.std"));
  return ad::div(ad::sub(imu, mean), std);
}

Var CtinModel::spatial_embed(const Var& x, const ForwardOptions& opts) {
  const Var c = ad::conv1d(x, p("spatial.conv.w"));
  return linear(ad::relu(bn(c, "spatial.bn", opts)), "spatial.proj");
}

Var CtinModel::temporal_embed(const Var& x) const {
  const ad::LstmParams fwd{p("temporal.lstm.fwd.w_ih"), p("temporal.lstm.fwd.w_hh"),
                           p("temporal.lstm.fwd.bias")};
  const ad::LstmParams rev{p("temporal.lstm.rev.w_ih"), p("temporal.lstm.rev.w_hh"),
                           p("temporal.lstm.rev.bias")};
  const Var proj = linear(ad::bilstm_layer(x, fwd, rev), "temporal.proj");
  const int m = x.dim(-2);
  if (m != cfg_.window_len) {
    throw DimensionError("window length " + std::to_string(m) + " does not match model's " +
                         std::to_string(cfg_.window_len));
  }
  return ad::add(proj, p("temporal.pos"));
}

Var CtinModel::encoder_block(int index, const Var& x, const ForwardOptions& opts) {
  const std::string pre = "encoder.block" + std::to_string(index);
  Var y = ad::matmul(x, p(pre + ".reduce.w"));
  y = ad::relu(bn(y, pre + ".bn1", opts));
  y = local_self_attention(y, local_params(pre + ".local"), cfg_.heads,
                           trace_slot(opts.trace, pre + ".local"));
  y = ad::relu(bn(y, pre + ".bn2", opts));
  y = global_self_attention(y, mha_params(pre + ".global"), cfg_.heads,
                            trace_slot(opts.trace, pre + ".global"));
  y = ad::relu(bn(y, pre + ".bn3", opts));
  y = linear(y, pre + ".expand");
  return ad::add(x, ad::dropout(y, cfg_.dropout_encoder, opts.mode, opts.rng));
}

Var CtinModel::encoder_forward(const Var& x, const ForwardOptions& opts) {
  Var z = x;
  for (int i = 0; i < cfg_.encoder_layers; ++i) z = encoder_block(i, z, opts);
  return z;
}

Var CtinModel::decoder_layer(int index, const Var& y_in, const Var& z,
                             const ForwardOptions& opts) const {
  const std::string pre = "decoder.layer" + std::to_string(index);
  const double pdrop = cfg_.dropout_decoder;
  auto ln = [&](const Var& v, const std::string& name) {
    return ad::layer_norm(v, p(pre + name + ".gain"), p(pre + name + ".bias"));
  };
  Var y = y_in;
  const Var n1 = ln(y, ".ln1");
  Var a = multi_head_attention(n1, n1, mha_params(pre + ".self"), cfg_.heads, true,
                               trace_slot(opts.trace, pre + ".self"));
  y = ad::add(y, ad::dropout(a, pdrop, opts.mode, opts.rng));
  a = multi_head_attention(ln(y, ".ln2"), z, mha_params(pre + ".cross"), cfg_.heads, false,
                           trace_slot(opts.trace, pre + ".cross"));
  y = ad::add(y, ad::dropout(a, pdrop, opts.mode, opts.rng));
  a = linear(ad::relu(linear(ln(y, ".ln3"), pre + ".ffn1")), pre + ".ffn2");
  return ad::add(y, ad::dropout(a, pdrop, opts.mode, opts.rng));
}

Var CtinModel::decoder_forward(const Var& y, const Var& z, const ForwardOptions& opts) const {
  Var h = y;
  for (int i = 0; i < cfg_.decoder_layers; ++i) h = decoder_layer(i, h, z, opts);
  return h;
}

ModelOutput CtinModel::heads(const Var& h) const {
  auto branch = [&](const std::string& pre) {
    const Var a = linear(h, pre + ".fc1");
    const Var n = ad::layer_norm(a, p(pre + ".ln.gain"), p(pre + ".ln.bias"));
    return linear(n, pre + ".fc2");
  };
  const Var vel = branch("head.vel");
  const Var cov = ad::exp(ad::clamp(branch("head.cov"), -10.0, 10.0));
  return {vel, cov};
}

ModelOutput CtinModel::forward(const Var& imu, const ForwardOptions& opts) {
  const Var x = standardize(imu);
  const Var z = encoder_forward(spatial_embed(x, opts), opts);
  const Var h = decoder_forward(temporal_embed(x), z, opts);
  return heads(h);
}

Tensor windows_to_batch(std::span<const Window* const> windows) {
  if (windows.empty()) throw DataError("cannot batch zero windows");
  const auto m = windows.front()->imu.rows();
  const auto c = windows.front()->imu.cols();
  Tensor t(Shape{static_cast<int>(windows.size()), static_cast<int>(m), static_cast<int>(c)});
  double* dst = t.data();
  for (const Window* w : windows) {
    if (w->imu.rows() != m || w->imu.cols() != c) {
      throw DimensionError("windows in one batch must share a shape");
    }
    std::copy_n(w->imu.data(), m * c, dst);
    dst += m * c;
  }
  return t;
}

VelocityEstimate ctin_forward(CtinModel& model, const Window& window, Mode mode,
                              std::mt19937_64* rng) {
  if (window.imu.cols() != model.config().input_channels ||
      window.imu.rows() != model.config().window_len) {
    throw DimensionError("window imu is " + std::to_string(window.imu.rows()) + "x" +
                         std::to_string(window.imu.cols()) + ", model expects " +
                         std::to_string(model.config().window_len) + "x" +
                         std::to_string(model.config().input_channels));
  }
  const Window* ptr = &window;
  const Var x = ad::constant(windows_to_batch(std::span<const Window* const>(&ptr, 1)));
  const ModelOutput out = model.forward(x, {mode, rng, nullptr});
  const auto m = window.imu.rows();
  VelocityEstimate est;
  est.vel = Eigen::Map<const RowMatrix>(out.vel.value().data(), m, 2);
  est.cov_diag = Eigen::Map<const RowMatrix>(out.cov.value().data(), m, 2);
  return est;
}

nlohmann::json checkpoint_json(const CtinModel& model) {
  nlohmann::json doc = model.params().to_json();
  doc["model_config"] = to_json(model.config());
  return doc;
}

CtinModel model_from_checkpoint(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("model_config")) {
    throw FormatError("checkpoint has no model_config");
  }
  CtinModel model(model_config_from_json(doc.at("model_config")));
  model.params().load_json(doc);
  return model;
}

}  // namespace ctin
