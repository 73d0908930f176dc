#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctin/autodiff/nn.hpp"
#include "ctin/autodiff/param_store.hpp"
#include "ctin/pipeline.hpp"

namespace ctin {

struct ModelConfig {
  int window_len = 200;
  int input_channels = 6;
  int model_dim = 64;
  int heads = 8;
  int encoder_layers = 1;
  int decoder_layers = 4;
  int ffn_dim = 0;      // 0 means 4 * model_dim
  int lstm_hidden = 0;  // 0 means model_dim / 2 (per direction)
  double dropout_encoder = 0.5;
  double dropout_decoder = 0.05;
  int local_kernel = 3;
  std::uint64_t init_seed = 0;

  int ffn() const { return ffn_dim > 0 ? ffn_dim : 4 * model_dim; }
  int hidden() const { return lstm_hidden > 0 ? lstm_hidden : model_dim / 2; }
  // Width inside the encoder's bottleneck blocks.
  int bottleneck() const { return model_dim / 2; }

  /// Throws ConfigError on inconsistent sizes.
  void validate() const;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Per-timestamp planar velocity and diagonal covariance.
struct VelocityEstimate {
  RowMatrix vel;       // m x 2, m/s
  RowMatrix cov_diag;  // m x 2, (m/s)^2
};

// Attention building blocks. Inputs are [B, T, C].

struct MhaParams {
  ad::Var wq, wk, wv;  // [C, C]
  ad::Var wo, bo;      // [C, C], [C]
};

/// Multi-head dot-product attention with queries from `q_in` and keys and
/// values from `kv_in`, split into `heads` groups and output-projected.
ad::Var multi_head_attention(const ad::Var& q_in, const ad::Var& kv_in, const MhaParams& p,
                             int heads, bool causal, ad::Tensor* weights_out = nullptr);

inline ad::Var global_self_attention(const ad::Var& x, const MhaParams& p, int heads,
                                     ad::Tensor* weights_out = nullptr) {
  return multi_head_attention(x, x, p, heads, false, weights_out);
}

struct LocalAttentionParams {
  ad::Var w_key;    // [K, C / heads, C] grouped temporal kernel
  ad::Var w_value;  // [C, C]
  ad::Var w_score;  // [2C, heads] on [X; C1]
  ad::Var b_score;  // [heads]
  ad::Var w_gate;   // [2C, 2] on [C1; C2]
  ad::Var b_gate;   // [2]
};

/// C1 = grouped conv of X; per-head scores ReLU(W[X; C1]) normalized over
/// time weight V = X W_v into a context C2 per head; a two-way softmax gate
/// from [C1; C2] mixes Y = w1 C1 + w2 C2. `weights_out` receives the score
/// distributions as [B * heads, 1, T].
ad::Var local_self_attention(const ad::Var& x, const LocalAttentionParams& p, int heads,
                             ad::Tensor* weights_out = nullptr);

/// Attention distributions recorded during a forward pass.
struct ForwardTrace {
  std::vector<std::string> names;
  std::vector<ad::Tensor> weights;  // [*, rows, cols]; each row sums to 1
};

struct ForwardOptions {
  ad::Mode mode = ad::Mode::kEval;
  std::mt19937_64* rng = nullptr;  // needed for dropout in train mode
  ForwardTrace* trace = nullptr;
};

struct ModelOutput {
  ad::Var vel;  // [B, m, 2]
  ad::Var cov;  // [B, m, 2], strictly positive
};

class CtinModel {
 public:
  explicit CtinModel(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  ad::ParamStore& params() { return store_; }
  const ad::ParamStore& params() const { return store_; }

  /// Per-channel input standardization applied before both embeddings.
  void set_input_normalization(const Eigen::VectorXd& mean, const Eigen::VectorXd& std);

  /// imu: [B, m, 6] navigation-frame windows.
  ModelOutput forward(const ad::Var& imu, const ForwardOptions& opts);

  ad::Var standardize(const ad::Var& imu) const;
  ad::Var spatial_embed(const ad::Var& x, const ForwardOptions& opts);
  ad::Var temporal_embed(const ad::Var& x) const;
  ad::Var encoder_block(int index, const ad::Var& x, const ForwardOptions& opts);
  ad::Var encoder_forward(const ad::Var& x, const ForwardOptions& opts);
  ad::Var decoder_layer(int index, const ad::Var& y, const ad::Var& z,
                        const ForwardOptions& opts) const;
  ad::Var decoder_forward(const ad::Var& y, const ad::Var& z, const ForwardOptions& opts) const;
  ModelOutput heads(const ad::Var& h) const;

  MhaParams mha_params(const std::string& prefix) const;
  LocalAttentionParams local_params(const std::string& prefix) const;

 private:
  ad::Var p(const std::string& name) const { return store_.get(name); }
  ad::Var linear(const ad::Var& x, const std::string& prefix) const;
  ad::Var bn(const ad::Var& x, const std::string& prefix, const ForwardOptions& opts);

  ModelConfig cfg_;
  ad::ParamStore store_;
};

/// Stacks windows into a [B, m, 6] constant.
ad::Tensor windows_to_batch(std::span<const Window* const> windows);

/// Eval- or train-mode forward of a single window.
VelocityEstimate ctin_forward(CtinModel& model, const Window& window, ad::Mode mode,
                              std::mt19937_64* rng = nullptr);

/// Writes {"version": "1", "model_config": ..., "parameters": ..., "buffers": ...}.
nlohmann::json checkpoint_json(const CtinModel& model);
CtinModel model_from_checkpoint(const nlohmann::json& doc);

}  // namespace ctin
