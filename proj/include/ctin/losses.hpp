#pragma once

#include "ctin/autodiff/graph.hpp"
#include "ctin/autodiff/param_store.hpp"

namespace ctin {

// All losses take [.., m, 2] tensors (optionally batched) and reduce by the
// mean over batch and time.

ad::Var mse_loss(const ad::Var& pred, const ad::Var& gt);

/// Integral velocity loss L^p + L^e. Positions are compared as displacements
/// from each window's first sample, so the absolute start position cancels:
///   L^p = mean_t |sum_{s<t} pred_s dt - (gt_pos_t - gt_pos_0)|^2
///   L^e = mean_t |sum_{s<=t} (pred_s - gt_vel_s) dt|^2
ad::Var ivl(const ad::Var& pred_vel, const ad::Var& gt_vel, const ad::Var& gt_pos, double dt);

/// Diagonal Gaussian negative log-likelihood without the 2 pi constant:
/// mean_t 1/2 [e_x^2/s_x + e_y^2/s_y + ln(s_x s_y)].
ad::Var cnl(const ad::Var& pred_vel, const ad::Var& cov_diag, const ad::Var& gt_vel);

struct MultiTaskParams {
  ad::Var log_var_v;  // log delta_v^2
  ad::Var log_var_c;  // log delta_c^2

  /// Registers both scalars (initialized to 0) as "loss.log_var_v" and
  /// "loss.log_var_c".
  static MultiTaskParams create(ad::ParamStore& store);
};

/// 1/2 exp(-lv) L_v + 1/2 exp(-lc) L_c + 1/2 (lv + lc).
ad::Var multitask_loss(const ad::Var& l_v, const ad::Var& l_c, const MultiTaskParams& mt);

}  // namespace ctin
