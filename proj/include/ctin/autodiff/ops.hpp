#pragma once

#include <random>
#include <utility>
#include <vector>

#include "ctin/autodiff/graph.hpp"

namespace ctin::ad {

// Elementwise binary ops broadcast numpy-style (size-1 or missing leading
// axes stretch to match).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var scale(const Var& x, double factor);
Var add_scalar(const Var& x, double c);
Var neg(const Var& x);
Var square(const Var& x);

Var relu(const Var& x);
Var sigmoid(const Var& x);
Var tanh(const Var& x);
Var softplus(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
/// Gradient passes only where lo < x < hi.
Var clamp(const Var& x, double lo, double hi);

/// [.., n, k] x [k, p] (shared weight) or [B, n, k] x [B, k, p] (batched).
Var matmul(const Var& a, const Var& b);

/// Stride-1 temporal convolution with zero "same" padding.
/// x: [B, T, Cin] or [T, Cin]; weight: [K, Cin / groups, Cout]; K odd.
Var conv1d(const Var& x, const Var& weight, int groups = 1);

/// Softmax over the last axis.
Var softmax(const Var& x);

Var concat(const std::vector<Var>& parts, int axis);
Var slice(const Var& x, int axis, int start, int length);
Var reshape(const Var& x, Shape shape);
/// Swaps the last two axes.
Var transpose(const Var& x);

Var sum(const Var& x);
Var mean(const Var& x);

/// Running sum along `axis`; exclusive sums start at 0.
Var cumsum(const Var& x, int axis, bool exclusive = false);

/// [B, T, h * dk] -> [B * h, T, dk] and back.
Var split_heads(const Var& x, int heads);
Var merge_heads(const Var& x, int heads);

/// Sets entries above the diagonal of the last two axes to -inf.
Var causal_mask(const Var& scores);

}  // namespace ctin::ad
