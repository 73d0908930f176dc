#include "ctin/autodiff/ops.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "ctin/errors.hpp"

namespace ctin::ad {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

int normalize_axis(int axis, int rank, const Shape& shape) {
  const int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw DimensionError("axis " + std::to_string(axis) + " invalid for shape " +
                         shape_str(shape));
  }
  return a;
}

// Splits a shape around `axis` into outer x mid x inner extents.
struct AxisSplit {
  std::size_t outer = 1, mid = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, int axis) {
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= static_cast<std::size_t>(shape[i]);
  s.mid = static_cast<std::size_t>(shape[axis]);
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) {
    s.inner *= static_cast<std::size_t>(shape[i]);
  }
  return s;
}

// Broadcast bookkeeping over shapes padded to rank 3.
struct Broadcast {
  Shape out;
  std::array<std::size_t, 3> dims{};
  std::array<std::size_t, 3> a_stride{};
  std::array<std::size_t, 3> b_stride{};
  bool same = false;
};

std::array<std::size_t, 3> padded(const Shape& s) {
  std::array<std::size_t, 3> d{1, 1, 1};
  const std::size_t off = 3 - s.size();
  for (std::size_t i = 0; i < s.size(); ++i) d[off + i] = static_cast<std::size_t>(s[i]);
  return d;
}

Broadcast broadcast(const Shape& a, const Shape& b) {
  Broadcast bc;
  if (a == b) {
    bc.out = a;
    bc.same = true;
    return bc;
  }
  const auto pa = padded(a);
  const auto pb = padded(b);
  const std::size_t rank = std::max(a.size(), b.size());
  for (int i = 0; i < 3; ++i) {
    if (pa[i] == pb[i] || pb[i] == 1) {
      bc.dims[i] = pa[i];
    } else if (pa[i] == 1) {
      bc.dims[i] = pb[i];
    } else {
      throw DimensionError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
  }
  for (std::size_t i = 3 - rank; i < 3; ++i) bc.out.push_back(static_cast<int>(bc.dims[i]));
  std::array<std::size_t, 3> sa{pa[1] * pa[2], pa[2], 1};
  std::array<std::size_t, 3> sb{pb[1] * pb[2], pb[2], 1};
  for (int i = 0; i < 3; ++i) {
    bc.a_stride[i] = (pa[i] == 1 && bc.dims[i] != 1) ? 0 : sa[i];
    bc.b_stride[i] = (pb[i] == 1 && bc.dims[i] != 1) ? 0 : sb[i];
  }
  return bc;
}

template <typename Fn>
void for_each_broadcast(const Broadcast& bc, Fn&& fn) {
  std::size_t o = 0;
  for (std::size_t i0 = 0; i0 < bc.dims[0]; ++i0) {
    for (std::size_t i1 = 0; i1 < bc.dims[1]; ++i1) {
      const std::size_t ab = i0 * bc.a_stride[0] + i1 * bc.a_stride[1];
      const std::size_t bb = i0 * bc.b_stride[0] + i1 * bc.b_stride[1];
      for (std::size_t i2 = 0; i2 < bc.dims[2]; ++i2, ++o) {
        fn(o, ab + i2 * bc.a_stride[2], bb + i2 * bc.b_stride[2]);
      }
    }
  }
}

// Elementwise binary op with broadcasting. `fwd(x, y)`, and partials
// `da(x, y)`, `db(x, y)` multiply the upstream gradient.
template <typename Fwd, typename Da, typename Db>
Var binary(const Var& a, const Var& b, Fwd fwd, Da da, Db db) {
  const Broadcast bc = broadcast(a.shape(), b.shape());
  Tensor out(bc.out);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (bc.same) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  } else {
    for_each_broadcast(bc, [&](std::size_t o, std::size_t ia, std::size_t ib) {
      out[o] = fwd(av[ia], bv[ib]);
    });
  }
  return make_node(std::move(out), {a, b}, [bc, da, db](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const Tensor& g = self.grad;
    const Tensor& av = pa.value;
    const Tensor& bv = pb.value;
    if (pa.requires_grad) {
      Tensor& ga = pa.ensure_grad();
      if (bc.same) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(av[i], bv[i]);
      } else {
        for_each_broadcast(bc, [&](std::size_t o, std::size_t ia, std::size_t ib) {
          ga[ia] += g[o] * da(av[ia], bv[ib]);
        });
      }
    }
    if (pb.requires_grad) {
      Tensor& gb = pb.ensure_grad();
      if (bc.same) {
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * db(av[i], bv[i]);
      } else {
        for_each_broadcast(bc, [&](std::size_t o, std::size_t ia, std::size_t ib) {
          gb[ib] += g[o] * db(av[ia], bv[ib]);
        });
      }
    }
  });
}

// Unary op whose derivative is expressed through input x and output y.
template <typename Fwd, typename Deriv>
Var unary(const Var& x, Fwd fwd, Deriv deriv) {
  Tensor out(x.shape());
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  return make_node(std::move(out), {x}, [deriv](Node& self) {
    Node& p = *self.parents[0];
    Tensor& gp = p.ensure_grad();
    const Tensor& g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      gp[i] += g[i] * deriv(p.value[i], self.value[i]);
    }
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  if (a.shape() == b.shape()) {
    Tensor out = a.value();
    out.array() += b.value().array();
    return make_node(std::move(out), {a, b}, [](Node& self) {
      accumulate(*self.parents[0], self.grad);
      accumulate(*self.parents[1], self.grad);
    });
  }
  return binary(
      a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary(
      a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary(
      a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var div(const Var& a, const Var& b) {
  return binary(
      a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

Var scale(const Var& x, double factor) {
  Tensor out = x.value();
  out.array() *= factor;
  return make_node(std::move(out), {x}, [factor](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad().array() += factor * self.grad.array();
  });
}

Var add_scalar(const Var& x, double c) {
  Tensor out = x.value();
  out.array() += c;
  return make_node(std::move(out), {x},
                   [](Node& self) { accumulate(*self.parents[0], self.grad); });
}

Var neg(const Var& x) { return scale(x, -1.0); }

Var square(const Var& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var relu(const Var& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var softplus(const Var& x) {
  return unary(
      x, [](double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); },
      [](double v, double) { return 1.0 / (1.0 + std::exp(-v)); });
}

Var exp(const Var& x) {
  Tensor out(x.shape());
  out.array() = x.value().array().exp();
  return make_node(std::move(out), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad().array() += self.grad.array() * self.value.array();
  });
}

Var log(const Var& x) {
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var clamp(const Var& x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (bv.rank() == 2 && (av.rank() == 2 || av.rank() == 3)) {
    const int k = av.dim(-1);
    if (bv.dim(0) != k) {
      throw DimensionError("matmul " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    const int p = bv.dim(1);
    const Eigen::Index rows = static_cast<Eigen::Index>(av.size()) / std::max(k, 1);
    Shape out_shape = a.shape();
    out_shape.back() = p;
    Tensor out(out_shape);
    MatMap(out.data(), rows, p).noalias() =
        ConstMatMap(av.data(), rows, k) * ConstMatMap(bv.data(), k, p);
    return make_node(std::move(out), {a, b}, [rows, k, p](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      ConstMatMap g(self.grad.data(), rows, p);
      if (pa.requires_grad) {
        MatMap(pa.ensure_grad().data(), rows, k).noalias() +=
            g * ConstMatMap(pb.value.data(), k, p).transpose();
      }
      if (pb.requires_grad) {
        MatMap(pb.ensure_grad().data(), k, p).noalias() +=
            ConstMatMap(pa.value.data(), rows, k).transpose() * g;
      }
    });
  }
  if (av.rank() == 3 && bv.rank() == 3 && av.dim(0) == bv.dim(0) && av.dim(2) == bv.dim(1)) {
    const int batch = av.dim(0), n = av.dim(1), k = av.dim(2), p = bv.dim(2);
    Tensor out(Shape{batch, n, p});
    for (int i = 0; i < batch; ++i) {
      MatMap(out.data() + static_cast<std::size_t>(i) * n * p, n, p).noalias() =
          ConstMatMap(av.data() + static_cast<std::size_t>(i) * n * k, n, k) *
          ConstMatMap(bv.data() + static_cast<std::size_t>(i) * k * p, k, p);
    }
    return make_node(std::move(out), {a, b}, [batch, n, k, p](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      for (int i = 0; i < batch; ++i) {
        ConstMatMap g(self.grad.data() + static_cast<std::size_t>(i) * n * p, n, p);
        if (pa.requires_grad) {
          MatMap(pa.ensure_grad().data() + static_cast<std::size_t>(i) * n * k, n, k)
              .noalias() +=
              g * ConstMatMap(pb.value.data() + static_cast<std::size_t>(i) * k * p, k, p)
                      .transpose();
        }
        if (pb.requires_grad) {
          MatMap(pb.ensure_grad().data() + static_cast<std::size_t>(i) * k * p, k, p)
              .noalias() +=
              ConstMatMap(pa.value.data() + static_cast<std::size_t>(i) * n * k, n, k)
                  .transpose() *
              g;
        }
      }
    });
  }
  throw DimensionError("matmul " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
}

namespace {

struct ConvGeometry {
  int batch, time, cin, cout, kernel, groups, cin_g, cout_g, pad;
};

// Gathers the receptive fields of one group into a (batch*time) x (K*cin_g)
// matrix.
void im2col(const ConvGeometry& cg, const double* x, int group, Mat& cols) {
  cols.setZero(static_cast<Eigen::Index>(cg.batch) * cg.time,
               static_cast<Eigen::Index>(cg.kernel) * cg.cin_g);
  for (int b = 0; b < cg.batch; ++b) {
    for (int t = 0; t < cg.time; ++t) {
      double* row = cols.data() + (static_cast<std::size_t>(b) * cg.time + t) * cols.cols();
      for (int k = 0; k < cg.kernel; ++k) {
        const int src = t + k - cg.pad;
        if (src < 0 || src >= cg.time) continue;
        const double* xs = x + (static_cast<std::size_t>(b) * cg.time + src) * cg.cin +
                           static_cast<std::size_t>(group) * cg.cin_g;
        for (int c = 0; c < cg.cin_g; ++c) row[k * cg.cin_g + c] = xs[c];
      }
    }
  }
}

void col2im_add(const ConvGeometry& cg, const Mat& cols, int group, double* dx) {
  for (int b = 0; b < cg.batch; ++b) {
    for (int t = 0; t < cg.time; ++t) {
      const double* row =
          cols.data() + (static_cast<std::size_t>(b) * cg.time + t) * cols.cols();
      for (int k = 0; k < cg.kernel; ++k) {
        const int src = t + k - cg.pad;
        if (src < 0 || src >= cg.time) continue;
        double* xs = dx + (static_cast<std::size_t>(b) * cg.time + src) * cg.cin +
                     static_cast<std::size_t>(group) * cg.cin_g;
        for (int c = 0; c < cg.cin_g; ++c) xs[c] += row[k * cg.cin_g + c];
      }
    }
  }
}

Mat group_weight(const ConvGeometry& cg, const double* w, int group) {
  Mat wg(static_cast<Eigen::Index>(cg.kernel) * cg.cin_g, cg.cout_g);
  for (int k = 0; k < cg.kernel; ++k) {
    for (int c = 0; c < cg.cin_g; ++c) {
      const double* src = w + (static_cast<std::size_t>(k) * cg.cin_g + c) * cg.cout +
                          static_cast<std::size_t>(group) * cg.cout_g;
      for (int o = 0; o < cg.cout_g; ++o) wg(k * cg.cin_g + c, o) = src[o];
    }
  }
  return wg;
}

}  // namespace

Var conv1d(const Var& x, const Var& weight, int groups) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  if ((xv.rank() != 2 && xv.rank() != 3) || wv.rank() != 3 || groups < 1) {
    throw DimensionError("conv1d " + shape_str(x.shape()) + " with weight " +
                         shape_str(weight.shape()));
  }
  ConvGeometry cg{};
  cg.batch = xv.rank() == 3 ? xv.dim(0) : 1;
  cg.time = xv.dim(-2);
  cg.cin = xv.dim(-1);
  cg.kernel = wv.dim(0);
  cg.cin_g = wv.dim(1);
  cg.cout = wv.dim(2);
  cg.groups = groups;
  if (cg.kernel % 2 == 0 || cg.cin_g * groups != cg.cin || cg.cout % groups != 0) {
    throw DimensionError("conv1d " + shape_str(x.shape()) + " with weight " +
                         shape_str(weight.shape()) + " and " + std::to_string(groups) +
                         " groups");
  }
  cg.cout_g = cg.cout / groups;
  cg.pad = (cg.kernel - 1) / 2;

  if (cg.kernel == 1 && groups == 1) {
    return matmul(x, reshape(weight, Shape{cg.cin, cg.cout}));
  }

  Shape out_shape = x.shape();
  out_shape.back() = cg.cout;
  Tensor out(out_shape);
  const Eigen::Index rows = static_cast<Eigen::Index>(cg.batch) * cg.time;
  MatMap out_m(out.data(), rows, cg.cout);
  Mat cols;
  for (int g = 0; g < groups; ++g) {
    im2col(cg, xv.data(), g, cols);
    out_m.middleCols(static_cast<Eigen::Index>(g) * cg.cout_g, cg.cout_g).noalias() =
        cols * group_weight(cg, wv.data(), g);
  }
  return make_node(std::move(out), {x, weight}, [cg, rows](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    ConstMatMap g_all(self.grad.data(), rows, cg.cout);
    Mat cols;
    for (int g = 0; g < cg.groups; ++g) {
      const auto g_blk = g_all.middleCols(static_cast<Eigen::Index>(g) * cg.cout_g, cg.cout_g);
      if (pw.requires_grad) {
        im2col(cg, px.value.data(), g, cols);
        const Mat dwg = cols.transpose() * g_blk;
        double* dw = pw.ensure_grad().data();
        for (int k = 0; k < cg.kernel; ++k) {
          for (int c = 0; c < cg.cin_g; ++c) {
            double* dst = dw + (static_cast<std::size_t>(k) * cg.cin_g + c) * cg.cout +
                          static_cast<std::size_t>(g) * cg.cout_g;
            for (int o = 0; o < cg.cout_g; ++o) dst[o] += dwg(k * cg.cin_g + c, o);
          }
        }
      }
      if (px.requires_grad) {
        const Mat dcols = g_blk * group_weight(cg, pw.value.data(), g).transpose();
        col2im_add(cg, dcols, g, px.ensure_grad().data());
      }
    }
  });
}

Var softmax(const Var& x) {
  Tensor out = x.value();
  auto m = out.matrix();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r).array();
    row = (row - row.maxCoeff()).exp();
    row /= row.sum();
  }
  return make_node(std::move(out), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    auto y = self.value.matrix();
    auto g = self.grad.matrix();
    auto gp = p.ensure_grad().matrix();
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = y.row(r).dot(g.row(r));
      gp.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  const int rank = static_cast<int>(first.size());
  const int ax = normalize_axis(axis, rank, first);
  Shape out_shape = first;
  out_shape[ax] = 0;
  std::vector<int> offsets;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = static_cast<int>(s.size()) == rank;
    for (int i = 0; ok && i < rank; ++i) ok = (i == ax) || s[i] == first[i];
    if (!ok) throw DimensionError("concat " + shape_str(first) + " with " + shape_str(s));
    offsets.push_back(out_shape[ax]);
    out_shape[ax] += s[ax];
  }
  Tensor out(out_shape);
  const AxisSplit os = split_at(out_shape, ax);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    const AxisSplit ps = split_at(v.shape(), ax);
    for (std::size_t o = 0; o < ps.outer; ++o) {
      std::copy_n(v.data() + o * ps.mid * ps.inner, ps.mid * ps.inner,
                  out.data() + (o * os.mid + offsets[k]) * os.inner);
    }
  }
  return make_node(std::move(out), parts, [ax, offsets, os](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      const AxisSplit ps = split_at(p.value.shape(), ax);
      double* gp = p.ensure_grad().data();
      for (std::size_t o = 0; o < ps.outer; ++o) {
        const double* src = self.grad.data() + (o * os.mid + offsets[k]) * os.inner;
        double* dst = gp + o * ps.mid * ps.inner;
        for (std::size_t i = 0; i < ps.mid * ps.inner; ++i) dst[i] += src[i];
      }
    }
  });
}

Var slice(const Var& x, int axis, int start, int length) {
  const Shape& s = x.shape();
  const int ax = normalize_axis(axis, static_cast<int>(s.size()), s);
  if (start < 0 || length < 0 || start + length > s[ax]) {
    throw DimensionError("slice [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") on axis " + std::to_string(ax) +
                         " of " + shape_str(s));
  }
  Shape out_shape = s;
  out_shape[ax] = length;
  Tensor out(out_shape);
  const AxisSplit in = split_at(s, ax);
  const std::size_t chunk = static_cast<std::size_t>(length) * in.inner;
  for (std::size_t o = 0; o < in.outer; ++o) {
    std::copy_n(x.value().data() + (o * in.mid + start) * in.inner, chunk,
                out.data() + o * chunk);
  }
  return make_node(std::move(out), {x}, [in, start, chunk](Node& self) {
    Node& p = *self.parents[0];
    double* gp = p.ensure_grad().data();
    for (std::size_t o = 0; o < in.outer; ++o) {
      double* dst = gp + (o * in.mid + start) * in.inner;
      const double* src = self.grad.data() + o * chunk;
      for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_node(std::move(out), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad().array() += self.grad.array();
  });
}

Var transpose(const Var& x) {
  const Shape& s = x.shape();
  if (s.size() < 2) throw DimensionError("transpose needs rank >= 2, got " + shape_str(s));
  const int n = s[s.size() - 2];
  const int m = s[s.size() - 1];
  const std::size_t batch = x.value().size() / (static_cast<std::size_t>(n) * m);
  Shape out_shape = s;
  std::swap(out_shape[s.size() - 2], out_shape[s.size() - 1]);
  Tensor out(out_shape);
  for (std::size_t b = 0; b < batch; ++b) {
    MatMap(out.data() + b * n * m, m, n) =
        ConstMatMap(x.value().data() + b * n * m, n, m).transpose();
  }
  return make_node(std::move(out), {x}, [batch, n, m](Node& self) {
    Node& p = *self.parents[0];
    double* gp = p.ensure_grad().data();
    for (std::size_t b = 0; b < batch; ++b) {
      MatMap(gp + b * n * m, n, m) += ConstMatMap(self.grad.data() + b * n * m, m, n).transpose();
    }
  });
}

Var sum(const Var& x) {
  return make_node(Tensor::scalar(x.value().array().sum()), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad().array() += self.grad[0];
  });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(x.value().size());
  return make_node(Tensor::scalar(x.value().array().sum() / n), {x}, [n](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad().array() += self.grad[0] / n;
  });
}

Var cumsum(const Var& x, int axis, bool exclusive) {
  const Shape& s = x.shape();
  const int ax = normalize_axis(axis, static_cast<int>(s.size()), s);
  const AxisSplit sp = split_at(s, ax);
  Tensor out(s);
  const double* xv = x.value().data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      double acc = 0.0;
      for (std::size_t t = 0; t < sp.mid; ++t) {
        const std::size_t idx = (o * sp.mid + t) * sp.inner + i;
        if (exclusive) {
          out[idx] = acc;
          acc += xv[idx];
        } else {
          acc += xv[idx];
          out[idx] = acc;
        }
      }
    }
  }
  return make_node(std::move(out), {x}, [sp, exclusive](Node& self) {
    Node& p = *self.parents[0];
    double* gp = p.ensure_grad().data();
    const double* g = self.grad.data();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        double acc = 0.0;
        for (std::size_t t = sp.mid; t-- > 0;) {
          const std::size_t idx = (o * sp.mid + t) * sp.inner + i;
          if (exclusive) {
            gp[idx] += acc;
            acc += g[idx];
          } else {
            acc += g[idx];
            gp[idx] += acc;
          }
        }
      }
    }
  });
}

Var split_heads(const Var& x, int heads) {
  const Shape& s = x.shape();
  if (s.size() != 3 || heads < 1 || s[2] % heads != 0) {
    throw DimensionError("split_heads(" + std::to_string(heads) + ") on " + shape_str(s));
  }
  const int batch = s[0], time = s[1], width = s[2], dk = width / heads;
  Tensor out(Shape{batch * heads, time, dk});
  const double* xv = x.value().data();
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      for (int t = 0; t < time; ++t) {
        std::copy_n(xv + (static_cast<std::size_t>(b) * time + t) * width + h * dk, dk,
                    out.data() + ((static_cast<std::size_t>(b) * heads + h) * time + t) * dk);
      }
    }
  }
  return make_node(std::move(out), {x}, [batch, heads, time, width, dk](Node& self) {
    Node& p = *self.parents[0];
    double* gp = p.ensure_grad().data();
    const double* g = self.grad.data();
    for (int b = 0; b < batch; ++b) {
      for (int h = 0; h < heads; ++h) {
        for (int t = 0; t < time; ++t) {
          double* dst = gp + (static_cast<std::size_t>(b) * time + t) * width + h * dk;
          const double* src = g + ((static_cast<std::size_t>(b) * heads + h) * time + t) * dk;
          for (int j = 0; j < dk; ++j) dst[j] += src[j];
        }
      }
    }
  });
}

Var merge_heads(const Var& x, int heads) {
  const Shape& s = x.shape();
  if (s.size() != 3 || heads < 1 || s[0] % heads != 0) {
    throw DimensionError("merge_heads(" + std::to_string(heads) + ") on " + shape_str(s));
  }
  const int batch = s[0] / heads, time = s[1], dk = s[2], width = dk * heads;
  Tensor out(Shape{batch, time, width});
  const double* xv = x.value().data();
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      for (int t = 0; t < time; ++t) {
        std::copy_n(xv + ((static_cast<std::size_t>(b) * heads + h) * time + t) * dk, dk,
                    out.data() + (static_cast<std::size_t>(b) * time + t) * width + h * dk);
      }
    }
  }
  return make_node(std::move(out), {x}, [batch, heads, time, width, dk](Node& self) {
    Node& p = *self.parents[0];
    double* gp = p.ensure_grad().data();
    const double* g = self.grad.data();
    for (int b = 0; b < batch; ++b) {
      for (int h = 0; h < heads; ++h) {
        for (int t = 0; t < time; ++t) {
          double* dst = gp + ((static_cast<std::size_t>(b) * heads + h) * time + t) * dk;
          const double* src = g + (static_cast<std::size_t>(b) * time + t) * width + h * dk;
          for (int j = 0; j < dk; ++j) dst[j] += src[j];
        }
      }
    }
  });
}

Var causal_mask(const Var& scores) {
  const Shape& s = scores.shape();
  if (s.size() < 2) throw DimensionError("causal_mask needs rank >= 2, got " + shape_str(s));
  const int n = s[s.size() - 2];
  const int m = s[s.size() - 1];
  const std::size_t batch = scores.value().size() / (static_cast<std::size_t>(n) * m);
  Tensor out = scores.value();
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < batch; ++b) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < m; ++j) out[(b * n + i) * m + j] = -inf;
    }
  }
  return make_node(std::move(out), {scores}, [batch, n, m](Node& self) {
    Node& p = *self.parents[0];
    double* gp = p.ensure_grad().data();
    for (std::size_t b = 0; b < batch; ++b) {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= std::min(i, m - 1); ++j) {
          gp[(b * n + i) * m + j] += self.grad[(b * n + i) * m + j];
        }
      }
    }
  });
}

}  // namespace ctin::ad
