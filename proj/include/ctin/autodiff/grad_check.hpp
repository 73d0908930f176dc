#pragma once

#include <functional>
#include <vector>

#include "ctin/autodiff/graph.hpp"

namespace ctin::ad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_raw_rel_error = 0.0;  // same, without the rounding allowance
  std::size_t checked = 0;
  std::size_t excluded = 0;  // coordinates at a non-differentiable point
};

/// Compares reverse-mode gradients of the scalar `f` with respect to each
/// input against central differences with step h * max(1, |x|), Richardson
/// extrapolated with the h / 2 quotient. The relative error per coordinate is
/// (|a - n| - r) / max(|a|, |n|, 1e-8), where r bounds the rounding error of
/// the quotient (clamped at 0). When that exceeds 1e-6 the coordinate is scored
/// with the coarsest extrapolation that agrees with the next finer one; if no
/// pair down to h / 16 agrees, a kink sits next to x and the coordinate is
/// counted as excluded instead of scored. A kink exactly at x is recognized
/// by one-sided slopes whose gap does not shrink with the step.
GradCheckResult grad_check(const std::function<Var()>& f, const std::vector<Var>& inputs,
                           double h = 1e-4);

}  // namespace ctin::ad
