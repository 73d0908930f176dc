#include "ctin/autodiff/nn.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "ctin/autodiff/ops.hpp"
#include "ctin/errors.hpp"

namespace ctin::ad {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;
using StridedMap = Eigen::Map<Mat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const Mat, 0, Eigen::OuterStride<>>;
using RowVec = Eigen::RowVectorXd;

void check_affine(const Var& x, const Var& gain, const Var& bias, const char* what) {
  const int c = x.value().rank() == 0 ? 1 : x.dim(-1);
  if (gain.value().size() != static_cast<std::size_t>(c) ||
      bias.value().size() != static_cast<std::size_t>(c)) {
    throw DimensionError(std::string(what) + ": input " + shape_str(x.shape()) + " gain " +
                         shape_str(gain.shape()) + " bias " + shape_str(bias.shape()));
  }
}

}  // namespace

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  check_affine(x, gain, bias, "layer_norm");
  const auto xm = x.value().matrix();
  const Eigen::Index n = xm.rows();
  const Eigen::Index c = xm.cols();
  auto xhat = std::make_shared<Mat>(n, c);
  auto rstd = std::make_shared<Eigen::VectorXd>(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = xm.row(r).mean();
    const double var = (xm.row(r).array() - mu).square().mean();
    (*rstd)(r) = 1.0 / std::sqrt(var + eps);
    xhat->row(r) = (xm.row(r).array() - mu) * (*rstd)(r);
  }
  Tensor out(x.shape());
  const Eigen::Map<const RowVec> gm(gain.value().data(), c);
  const Eigen::Map<const RowVec> bm(bias.value().data(), c);
  MatMap om(out.data(), n, c);
  om = (xhat->array().rowwise() * gm.array()).rowwise() + bm.array();
  return make_node(std::move(out), {x, gain, bias}, [xhat, rstd, n, c](Node& self) {
    Node& px = *self.parents[0];
    Node& pg = *self.parents[1];
    Node& pb = *self.parents[2];
    ConstMatMap g(self.grad.data(), n, c);
    if (pg.requires_grad) {
      Eigen::Map<RowVec>(pg.ensure_grad().data(), c) +=
          (g.array() * xhat->array()).colwise().sum().matrix();
    }
    if (pb.requires_grad) {
      Eigen::Map<RowVec>(pb.ensure_grad().data(), c) += g.colwise().sum();
    }
    if (px.requires_grad) {
      const Eigen::Map<const RowVec> gm(pg.value.data(), c);
      MatMap dx(px.ensure_grad().data(), n, c);
      for (Eigen::Index r = 0; r < n; ++r) {
        const RowVec dxhat = g.row(r).cwiseProduct(gm);
        const double m1 = dxhat.mean();
        const double m2 = dxhat.cwiseProduct(xhat->row(r)).mean();
        dx.row(r).array() +=
            (*rstd)(r) * (dxhat.array() - m1 - xhat->row(r).array() * m2);
      }
    }
  });
}

Var batch_norm(const Var& x, const Var& gain, const Var& bias, RunningStats stats, Mode mode,
               double eps) {
  check_affine(x, gain, bias, "batch_norm");
  const auto xm = x.value().matrix();
  const Eigen::Index n = xm.rows();
  const Eigen::Index c = xm.cols();
  RowVec mu(c);
  RowVec var(c);
  if (mode == Mode::kTrain) {
    if (n < 2) {
      throw DimensionError("batch_norm in train mode needs at least 2 values per channel, got " +
                           shape_str(x.shape()));
    }
    mu = xm.colwise().mean();
    var = (xm.rowwise() - mu).array().square().colwise().mean().matrix();
    if (stats.mean && stats.var) {
      const double m = stats.momentum;
      Eigen::Map<RowVec> rm(stats.mean->data(), c);
      Eigen::Map<RowVec> rv(stats.var->data(), c);
      rm = (1.0 - m) * rm + m * mu;
      rv = (1.0 - m) * rv + m * var * (static_cast<double>(n) / static_cast<double>(n - 1));
    }
  } else {
    if (!stats.mean || !stats.var) throw ConfigError("batch_norm eval mode needs running stats");
    mu = Eigen::Map<const RowVec>(stats.mean->data(), c);
    var = Eigen::Map<const RowVec>(stats.var->data(), c);
  }
  auto rstd = std::make_shared<RowVec>((var.array() + eps).rsqrt().matrix());
  auto xhat = std::make_shared<Mat>((xm.rowwise() - mu).array().rowwise() * rstd->array());
  Tensor out(x.shape());
  const Eigen::Map<const RowVec> gm(gain.value().data(), c);
  const Eigen::Map<const RowVec> bm(bias.value().data(), c);
  MatMap(out.data(), n, c) = (xhat->array().rowwise() * gm.array()).rowwise() + bm.array();
  const bool train = mode == Mode::kTrain;
  return make_node(std::move(out), {x, gain, bias}, [xhat, rstd, n, c, train](Node& self) {
    Node& px = *self.parents[0];
    Node& pg = *self.parents[1];
    Node& pb = *self.parents[2];
    ConstMatMap g(self.grad.data(), n, c);
    if (pg.requires_grad) {
      Eigen::Map<RowVec>(pg.ensure_grad().data(), c) +=
          (g.array() * xhat->array()).colwise().sum().matrix();
    }
    if (pb.requires_grad) {
      Eigen::Map<RowVec>(pb.ensure_grad().data(), c) += g.colwise().sum();
    }
    if (!px.requires_grad) return;
    const Eigen::Map<const RowVec> gm(pg.value.data(), c);
    MatMap dx(px.ensure_grad().data(), n, c);
    const Mat dxhat = g.array().rowwise() * gm.array();
    if (!train) {
      dx.array() += dxhat.array().rowwise() * rstd->array();
      return;
    }
    const RowVec s1 = dxhat.colwise().mean();
    const RowVec s2 = (dxhat.array() * xhat->array()).colwise().mean().matrix();
    dx.array() += ((dxhat.rowwise() - s1).array() - xhat->array().rowwise() * s2.array())
                      .rowwise() *
                  rstd->array();
  });
}

Var dropout(const Var& x, double p, Mode mode, std::mt19937_64* rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout probability must be in [0, 1)");
  if (mode == Mode::kEval || p == 0.0) return x;
  if (!rng) throw ConfigError("dropout in train mode needs an rng");
  auto mask = std::make_shared<Tensor>(x.shape());
  const double keep_scale = 1.0 / (1.0 - p);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < mask->size(); ++i) (*mask)[i] = u(*rng) < p ? 0.0 : keep_scale;
  Tensor out(x.shape());
  out.array() = x.value().array() * mask->array();
  return make_node(std::move(out), {x}, [mask](Node& self) {
    Node& px = *self.parents[0];
    px.ensure_grad().array() += self.grad.array() * mask->array();
  });
}

std::pair<Var, Var> lstm_cell(const Var& x, const Var& h, const Var& c, const LstmParams& p) {
  const int hidden = h.dim(-1);
  const Var gates = add(add(matmul(x, p.w_ih), matmul(h, p.w_hh)), p.bias);
  const Var i = sigmoid(slice(gates, -1, 0, hidden));
  const Var f = sigmoid(slice(gates, -1, hidden, hidden));
  const Var g = tanh(slice(gates, -1, 2 * hidden, hidden));
  const Var o = sigmoid(slice(gates, -1, 3 * hidden, hidden));
  const Var c_next = add(mul(f, c), mul(i, g));
  const Var h_next = mul(o, tanh(c_next));
  return {h_next, c_next};
}

namespace {

struct LstmDims {
  int batch, time, cin, hidden;
};

LstmDims lstm_dims(const Var& x, const LstmParams& a, const LstmParams& b) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 && xv.rank() != 3) {
    throw DimensionError("bilstm input must be [T, C] or [B, T, C], got " +
                         shape_str(x.shape()));
  }
  LstmDims d{};
  d.batch = xv.rank() == 3 ? xv.dim(0) : 1;
  d.time = xv.dim(-2);
  d.cin = xv.dim(-1);
  for (const LstmParams* p : {&a, &b}) {
    const Shape& wi = p->w_ih.shape();
    const Shape& wh = p->w_hh.shape();
    if (wi.size() != 2 || wh.size() != 2 || wi[0] != d.cin || wh[1] != wi[1] ||
        wh[1] != 4 * wh[0] || p->bias.value().size() != static_cast<std::size_t>(wi[1])) {
      throw DimensionError("bilstm weights " + shape_str(wi) + ", " + shape_str(wh) + ", " +
                           shape_str(p->bias.shape()) + " for input " + shape_str(x.shape()));
    }
  }
  d.hidden = a.w_hh.dim(0);
  if (b.w_hh.dim(0) != d.hidden) throw DimensionError("bilstm directions differ in hidden size");
  return d;
}

double sigm(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Activations of one direction, indexed by processing step.
struct LstmTrace {
  std::vector<Mat> gates;  // [B, 4H] post-activation (i, f, g, o)
  std::vector<Mat> cell;   // [B, H]
  std::vector<Mat> hid;    // [B, H]
};

int time_index(int step, int time, bool reverse) { return reverse ? time - 1 - step : step; }

void run_direction(const LstmDims& d, const double* x, const Tensor& w_ih, const Tensor& w_hh,
                   const Tensor& bias, bool reverse, double* out, int out_offset,
                   LstmTrace& tr) {
  const int H = d.hidden;
  const int G = 4 * H;
  const Eigen::Index rows = static_cast<Eigen::Index>(d.batch) * d.time;
  Mat xw = ConstMatMap(x, rows, d.cin) * ConstMatMap(w_ih.data(), d.cin, G);
  xw.rowwise() += Eigen::Map<const RowVec>(bias.data(), G);
  const ConstMatMap whh(w_hh.data(), H, G);
  tr.gates.assign(d.time, Mat());
  tr.cell.assign(d.time, Mat());
  tr.hid.assign(d.time, Mat());
  Mat h = Mat::Zero(d.batch, H);
  Mat c = Mat::Zero(d.batch, H);
  for (int s = 0; s < d.time; ++s) {
    const int t = time_index(s, d.time, reverse);
    Mat a = ConstStridedMap(xw.data() + static_cast<std::size_t>(t) * G, d.batch, G,
                            Eigen::OuterStride<>(static_cast<Eigen::Index>(d.time) * G));
    a.noalias() += h * whh;
    a.leftCols(H) = a.leftCols(H).unaryExpr(&sigm);
    a.middleCols(H, H) = a.middleCols(H, H).unaryExpr(&sigm);
    a.middleCols(2 * H, H) = a.middleCols(2 * H, H).array().tanh().matrix();
    a.rightCols(H) = a.rightCols(H).unaryExpr(&sigm);
    c = a.middleCols(H, H).cwiseProduct(c) + a.leftCols(H).cwiseProduct(a.middleCols(2 * H, H));
    h = a.rightCols(H).cwiseProduct(c.array().tanh().matrix());
    StridedMap(out + static_cast<std::size_t>(t) * 2 * H + out_offset, d.batch, H,
               Eigen::OuterStride<>(static_cast<Eigen::Index>(d.time) * 2 * H)) = h;
    tr.gates[s] = std::move(a);
    tr.cell[s] = c;
    tr.hid[s] = h;
  }
}

void backprop_direction(const LstmDims& d, const LstmTrace& tr, const double* dy,
                        int out_offset, bool reverse, Node& px, Node& pwi, Node& pwh,
                        Node& pb) {
  const int H = d.hidden;
  const int G = 4 * H;
  const Eigen::Index rows = static_cast<Eigen::Index>(d.batch) * d.time;
  Mat dxw = Mat::Zero(rows, G);
  const ConstMatMap whh(pwh.value.data(), H, G);
  Mat dwhh = Mat::Zero(H, G);
  Mat dh_next = Mat::Zero(d.batch, H);
  Mat dc_next = Mat::Zero(d.batch, H);
  const Mat zeros = Mat::Zero(d.batch, H);
  for (int s = d.time - 1; s >= 0; --s) {
    const int t = time_index(s, d.time, reverse);
    const Mat& a = tr.gates[s];
    const Mat& c = tr.cell[s];
    const Mat& c_prev = s > 0 ? tr.cell[s - 1] : zeros;
    const Mat& h_prev = s > 0 ? tr.hid[s - 1] : zeros;
    const Mat dh = ConstStridedMap(dy + static_cast<std::size_t>(t) * 2 * H + out_offset,
                                   d.batch, H,
                                   Eigen::OuterStride<>(static_cast<Eigen::Index>(d.time) * 2 * H)) +
                   dh_next;
    const auto ig = a.leftCols(H).array();
    const auto fg = a.middleCols(H, H).array();
    const auto gg = a.middleCols(2 * H, H).array();
    const auto og = a.rightCols(H).array();
    const Eigen::ArrayXXd tc = c.array().tanh();
    const Eigen::ArrayXXd dc = dh.array() * og * (1.0 - tc.square()) + dc_next.array();
    Mat da(d.batch, G);
    da.leftCols(H) = (dc * gg * ig * (1.0 - ig)).matrix();
    da.middleCols(H, H) = (dc * c_prev.array() * fg * (1.0 - fg)).matrix();
    da.middleCols(2 * H, H) = (dc * ig * (1.0 - gg.square())).matrix();
    da.rightCols(H) = (dh.array() * tc * og * (1.0 - og)).matrix();
    dc_next = (dc * fg).matrix();
    dwhh.noalias() += h_prev.transpose() * da;
    dh_next.noalias() = da * whh.transpose();
    StridedMap(dxw.data() + static_cast<std::size_t>(t) * G, d.batch, G,
               Eigen::OuterStride<>(static_cast<Eigen::Index>(d.time) * G)) = da;
  }
  if (pwh.requires_grad) MatMap(pwh.ensure_grad().data(), H, G) += dwhh;
  if (pb.requires_grad) {
    Eigen::Map<RowVec>(pb.ensure_grad().data(), G) += dxw.colwise().sum();
  }
  if (pwi.requires_grad) {
    MatMap(pwi.ensure_grad().data(), d.cin, G).noalias() +=
        ConstMatMap(px.value.data(), rows, d.cin).transpose() * dxw;
  }
  if (px.requires_grad) {
    MatMap(px.ensure_grad().data(), rows, d.cin).noalias() +=
        dxw * ConstMatMap(pwi.value.data(), d.cin, G).transpose();
  }
}

}  // namespace

Var bilstm_layer(const Var& x, const LstmParams& forward, const LstmParams& reverse) {
  const LstmDims d = lstm_dims(x, forward, reverse);
  Shape out_shape = x.shape();
  out_shape.back() = 2 * d.hidden;
  Tensor out(out_shape);
  auto fwd = std::make_shared<LstmTrace>();
  auto rev = std::make_shared<LstmTrace>();
  run_direction(d, x.value().data(), forward.w_ih.value(), forward.w_hh.value(),
                forward.bias.value(), false, out.data(), 0, *fwd);
  run_direction(d, x.value().data(), reverse.w_ih.value(), reverse.w_hh.value(),
                reverse.bias.value(), true, out.data(), d.hidden, *rev);
  return make_node(std::move(out),
                   {x, forward.w_ih, forward.w_hh, forward.bias, reverse.w_ih, reverse.w_hh,
                    reverse.bias},
                   [d, fwd, rev](Node& self) {
                     auto& ps = self.parents;
                     backprop_direction(d, *fwd, self.grad.data(), 0, false, *ps[0], *ps[1],
                                        *ps[2], *ps[3]);
                     backprop_direction(d, *rev, self.grad.data(), d.hidden, true, *ps[0],
                                        *ps[4], *ps[5], *ps[6]);
                   });
}

Var bilstm_reference(const Var& x, const LstmParams& forward, const LstmParams& reverse) {
  const LstmDims d = lstm_dims(x, forward, reverse);
  const Var x3 = reshape(x, Shape{d.batch, d.time, d.cin});
  auto run = [&](const LstmParams& p, bool rev) {
    std::vector<Var> outs(d.time);
    Var h = constant(Tensor(Shape{d.batch, d.hidden}));
    Var c = constant(Tensor(Shape{d.batch, d.hidden}));
    for (int s = 0; s < d.time; ++s) {
      const int t = time_index(s, d.time, rev);
      const Var xt = reshape(slice(x3, 1, t, 1), Shape{d.batch, d.cin});
      std::tie(h, c) = lstm_cell(xt, h, c, p);
      outs[t] = reshape(h, Shape{d.batch, 1, d.hidden});
    }
    return concat(outs, 1);
  };
  Var y = concat({run(forward, false), run(reverse, true)}, 2);
  Shape out_shape = x.shape();
  out_shape.back() = 2 * d.hidden;
  return reshape(y, out_shape);
}

Var attention(const Var& q, const Var& k, const Var& v, double scale, bool causal,
              Tensor* weights_out) {
  const Shape& qs = q.shape();
  const Shape& ks = k.shape();
  const Shape& vs = v.shape();
  if (qs.size() != 3 || ks.size() != 3 || vs.size() != 3 || qs[0] != ks[0] ||
      ks[0] != vs[0] || qs[2] != ks[2] || ks[1] != vs[1] || (causal && qs[1] > ks[1])) {
    throw DimensionError("attention q " + shape_str(qs) + " k " + shape_str(ks) + " v " +
                         shape_str(vs));
  }
  const int batch = qs[0], tq = qs[1], tk = ks[1], dk = qs[2], dv = vs[2];
  auto probs = std::make_shared<Tensor>(Shape{batch, tq, tk});
  Tensor out(Shape{batch, tq, dv});
  for (int b = 0; b < batch; ++b) {
    const std::size_t ob = static_cast<std::size_t>(b);
    MatMap p(probs->data() + ob * tq * tk, tq, tk);
    p.noalias() = ConstMatMap(q.value().data() + ob * tq * dk, tq, dk) *
                  ConstMatMap(k.value().data() + ob * tk * dk, tk, dk).transpose();
    p *= scale;
    for (int i = 0; i < tq; ++i) {
      // Masked entries are exact zeros; exp of the masked logits would only
      // produce denormals.
      const int live = causal ? i + 1 : tk;
      auto row = p.row(i).head(live).array();
      row = (row - row.maxCoeff()).exp();
      row /= row.sum();
      p.row(i).tail(tk - live).setZero();
    }
    MatMap(out.data() + ob * tq * dv, tq, dv).noalias() =
        p * ConstMatMap(v.value().data() + ob * tk * dv, tk, dv);
  }
  if (weights_out) *weights_out = *probs;
  return make_node(std::move(out), {q, k, v},
                   [probs, batch, tq, tk, dk, dv, scale](Node& self) {
                     Node& pq = *self.parents[0];
                     Node& pk = *self.parents[1];
                     Node& pv = *self.parents[2];
                     Mat ds(tq, tk);
                     for (int b = 0; b < batch; ++b) {
                       const std::size_t ob = static_cast<std::size_t>(b);
                       ConstMatMap p(probs->data() + ob * tq * tk, tq, tk);
                       ConstMatMap g(self.grad.data() + ob * tq * dv, tq, dv);
                       ConstMatMap vm(pv.value.data() + ob * tk * dv, tk, dv);
                       if (pv.requires_grad) {
                         MatMap(pv.ensure_grad().data() + ob * tk * dv, tk, dv).noalias() +=
                             p.transpose() * g;
                       }
                       if (!pq.requires_grad && !pk.requires_grad) continue;
                       ds.noalias() = g * vm.transpose();
                       const Eigen::VectorXd rs = (ds.array() * p.array()).rowwise().sum();
                       ds = (p.array() * (ds.colwise() - rs).array()) * scale;
                       if (pq.requires_grad) {
                         MatMap(pq.ensure_grad().data() + ob * tq * dk, tq, dk).noalias() +=
                             ds * ConstMatMap(pk.value.data() + ob * tk * dk, tk, dk);
                       }
                       if (pk.requires_grad) {
                         MatMap(pk.ensure_grad().data() + ob * tk * dk, tk, dk).noalias() +=
                             ds.transpose() * ConstMatMap(pq.value.data() + ob * tq * dk, tq, dk);
                       }
                     }
                   });
}

}  // namespace ctin::ad
