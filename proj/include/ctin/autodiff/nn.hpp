#pragma once

#include <random>
#include <utility>

#include "ctin/autodiff/graph.hpp"

namespace ctin::ad {

enum class Mode { kTrain, kEval };

/// Normalizes each row over the last axis, then applies gain and bias.
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

struct RunningStats {
  Tensor* mean = nullptr;
  Tensor* var = nullptr;
  double momentum = 0.1;
};

/// Per-channel normalization over every axis but the last. Train mode uses
/// batch statistics (biased variance) and updates the running estimates with
/// the unbiased variance; eval mode uses the running estimates.
Var batch_norm(const Var& x, const Var& gain, const Var& bias, RunningStats stats, Mode mode,
               double eps = 1e-5);

/// Inverted dropout; eval mode and p = 0 return x unchanged.
Var dropout(const Var& x, double p, Mode mode, std::mt19937_64* rng);

struct LstmParams {
  Var w_ih;  // [Cin, 4H], gate order i, f, g, o
  Var w_hh;  // [H, 4H]
  Var bias;  // [4H]
};

/// One LSTM step built from primitive ops. x: [B, Cin], h and c: [B, H].
std::pair<Var, Var> lstm_cell(const Var& x, const Var& h, const Var& c, const LstmParams& p);

/// Bidirectional single-layer LSTM with zero initial state, fused forward and
/// backward-through-time. x: [B, T, Cin] -> [B, T, 2H] (forward half first).
Var bilstm_layer(const Var& x, const LstmParams& forward, const LstmParams& reverse);

/// Same computation unrolled through lstm_cell; slow, used as a reference.
Var bilstm_reference(const Var& x, const LstmParams& forward, const LstmParams& reverse);

/// softmax(scale * Q K^T [+ causal mask]) V over [B, T, dk] tensors.
/// When `weights_out` is non-null the attention weights are copied there.
Var attention(const Var& q, const Var& k, const Var& v, double scale, bool causal,
              Tensor* weights_out = nullptr);

}  // namespace ctin::ad
