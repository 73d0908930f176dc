#include "ctin/losses.hpp"

#include "ctin/autodiff/ops.hpp"
#include "ctin/errors.hpp"

namespace ctin {

using ad::Shape;
using ad::Tensor;
using ad::Var;

namespace {

void check_pair(const Var& a, const Var& b, const char* what) {
  if (a.shape() != b.shape() || a.value().rank() < 2 || a.dim(-1) != 2) {
    throw DimensionError(std::string(what) + ": shapes " + ad::shape_str(a.shape()) + " and " +
                         ad::shape_str(b.shape()) + " must match and end in 2");
  }
}

// Mean over every axis but the last, summed over the last.
Var row_mean_of_sum(const Var& x) {
  const double rows = static_cast<double>(x.value().size() / static_cast<std::size_t>(x.dim(-1)));
  return ad::scale(ad::sum(x), 1.0 / rows);
}

}  // namespace

Var mse_loss(const Var& pred, const Var& gt) {
  check_pair(pred, gt, "mse_loss");
  return ad::mean(ad::square(ad::sub(pred, gt)));
}

Var ivl(const Var& pred_vel, const Var& gt_vel, const Var& gt_pos, double dt) {
  check_pair(pred_vel, gt_vel, "ivl");
  check_pair(pred_vel, gt_pos, "ivl");
  if (!(dt > 0.0)) throw ConfigError("ivl: dt must be positive");
  const int axis = pred_vel.value().rank() - 2;
  // Ground-truth displacement from the first row of each window.
  const Tensor& gp = gt_pos.value();
  Tensor disp(gp.shape());
  const std::size_t m = static_cast<std::size_t>(gp.dim(-2));
  const std::size_t windows = gp.size() / (2 * m);
  for (std::size_t w = 0; w < windows; ++w) {
    const double* src = gp.data() + w * m * 2;
    double* dst = disp.data() + w * m * 2;
    for (std::size_t t = 0; t < m; ++t) {
      dst[2 * t] = src[2 * t] - src[0];
      dst[2 * t + 1] = src[2 * t + 1] - src[1];
    }
  }
  const Var pred_disp = ad::scale(ad::cumsum(pred_vel, axis, true), dt);
  const Var lp = row_mean_of_sum(ad::square(ad::sub(pred_disp, ad::constant(std::move(disp)))));
  const Var cum_err = ad::scale(ad::cumsum(ad::sub(pred_vel, gt_vel), axis, false), dt);
  const Var le = row_mean_of_sum(ad::square(cum_err));
  return ad::add(lp, le);
}

Var cnl(const Var& pred_vel, const Var& cov_diag, const Var& gt_vel) {
  check_pair(pred_vel, gt_vel, "cnl");
  check_pair(pred_vel, cov_diag, "cnl");
  if ((cov_diag.value().array() <= 0.0).any()) {
    throw DataError("cnl: covariance diagonal must be strictly positive");
  }
  const Var e2 = ad::square(ad::sub(gt_vel, pred_vel));
  const Var terms = ad::add(ad::div(e2, cov_diag), ad::log(cov_diag));
  return ad::scale(row_mean_of_sum(terms), 0.5);
}

MultiTaskParams MultiTaskParams::create(ad::ParamStore& store) {
  return {store.add("loss.log_var_v", Tensor::scalar(0.0)),
          store.add("loss.log_var_c", Tensor::scalar(0.0))};
}

Var multitask_loss(const Var& l_v, const Var& l_c, const MultiTaskParams& mt) {
  const Var wv = ad::mul(ad::exp(ad::neg(mt.log_var_v)), l_v);
  const Var wc = ad::mul(ad::exp(ad::neg(mt.log_var_c)), l_c);
  return ad::scale(ad::add(ad::add(wv, wc), ad::add(mt.log_var_v, mt.log_var_c)), 0.5);
}

}  // namespace ctin
