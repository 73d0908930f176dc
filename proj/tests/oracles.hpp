#pragma once

// Plain-loop reference computations, written from the defining equations and
// sharing no code with the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace ctin::oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat out = zeros(a.size(), b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

inline std::vector<double> softmax(std::vector<double> s) {
  const double mx = *std::max_element(s.begin(), s.end());
  double z = 0.0;
  for (double& v : s) z += (v = std::exp(v - mx));
  for (double& v : s) v /= z;
  return s;
}

/// Multi-head scaled dot-product attention, heads concatenated, projected.
/// `weights` receives [head][query][key].
inline Mat attention(const Mat& xq, const Mat& xkv, const Mat& wq, const Mat& wk, const Mat& wv,
                     const Mat& wo, const std::vector<double>& bo, int heads, bool causal,
                     std::vector<Mat>* weights = nullptr) {
  const Mat q = matmul(xq, wq), k = matmul(xkv, wk), v = matmul(xkv, wv);
  const std::size_t width = wq[0].size(), dk = width / heads;
  Mat concat = zeros(xq.size(), width);
  if (weights) weights->assign(heads, Mat());
  for (int h = 0; h < heads; ++h) {
    for (std::size_t t = 0; t < xq.size(); ++t) {
      std::vector<double> s;
      for (std::size_t u = 0; u < xkv.size(); ++u) {
        if (causal && u > t) break;
        double dot = 0.0;
        for (std::size_t j = 0; j < dk; ++j) dot += q[t][h * dk + j] * k[u][h * dk + j];
        s.push_back(dot / std::sqrt(static_cast<double>(dk)));
      }
      std::vector<double> w = softmax(s);
      w.resize(xkv.size(), 0.0);
      for (std::size_t u = 0; u < xkv.size(); ++u)
        for (std::size_t j = 0; j < dk; ++j) concat[t][h * dk + j] += w[u] * v[u][h * dk + j];
      if (weights) (*weights)[h].push_back(w);
    }
  }
  Mat out = matmul(concat, wo);
  for (auto& row : out)
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bo[j];
  return out;
}

struct LocalWeights {
  std::vector<Mat> w_key;  // [K][C / heads][C]
  Mat w_value;             // [C][C]
  Mat w_score;             // [2C][heads]
  std::vector<double> b_score;
  Mat w_gate;  // [2C][2]
  std::vector<double> b_gate;
};

/// C1 = grouped same-padded temporal conv of X; per-head scores
/// relu([X, C1] W + b) softmaxed over time weight V = X W_v into one context
/// row C2; Y_t = g1 C1_t + g2 C2 with (g1, g2) = softmax([C1_t, C2] W_g + b_g).
/// `gamma` receives [head][time].
inline Mat local_attention(const Mat& x, const LocalWeights& p, int heads,
                           Mat* gamma_out = nullptr) {
  const std::size_t T = x.size(), C = x[0].size(), g = C / heads;
  const int K = static_cast<int>(p.w_key.size()), pad = K / 2;
  Mat c1 = zeros(T, C);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t o = 0; o < C; ++o) {
      const std::size_t grp = o / g;
      for (int k = 0; k < K; ++k) {
        const long src = static_cast<long>(t) + k - pad;
        if (src < 0 || src >= static_cast<long>(T)) continue;
        for (std::size_t c = 0; c < g; ++c) c1[t][o] += p.w_key[k][c][o] * x[src][grp * g + c];
      }
    }
  const Mat v = matmul(x, p.w_value);
  Mat gamma = zeros(heads, T);
  for (int h = 0; h < heads; ++h) {
    std::vector<double> s(T);
    for (std::size_t t = 0; t < T; ++t) {
      double acc = p.b_score[h];
      for (std::size_t j = 0; j < C; ++j) acc += x[t][j] * p.w_score[j][h];
      for (std::size_t j = 0; j < C; ++j) acc += c1[t][j] * p.w_score[C + j][h];
      s[t] = std::max(acc, 0.0);
    }
    gamma[h] = softmax(s);
  }
  std::vector<double> c2(C, 0.0);
  for (int h = 0; h < heads; ++h)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < g; ++j) c2[h * g + j] += gamma[h][t] * v[t][h * g + j];
  Mat y = zeros(T, C);
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> s(p.b_gate);
    for (int r = 0; r < 2; ++r)
      for (std::size_t j = 0; j < C; ++j)
        s[r] += c1[t][j] * p.w_gate[j][r] + c2[j] * p.w_gate[C + j][r];
    const auto w = softmax(s);
    for (std::size_t j = 0; j < C; ++j) y[t][j] = w[0] * c1[t][j] + w[1] * c2[j];
  }
  if (gamma_out) *gamma_out = gamma;
  return y;
}

// Losses over one window: rows of (x, y).

inline double mse(const Mat& a, const Mat& b) {
  double s = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t)
    for (int j = 0; j < 2; ++j) s += (a[t][j] - b[t][j]) * (a[t][j] - b[t][j]);
  return s / (2.0 * a.size());
}

/// Sum of two independent 1D Gaussian NLLs per step with the ln(2 pi)
/// constants removed, averaged over steps.
inline double gaussian_nll(const Mat& pred, const Mat& var, const Mat& gt) {
  const double pi = 3.14159265358979323846;
  double s = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t)
    for (int j = 0; j < 2; ++j) {
      const double e = gt[t][j] - pred[t][j];
      const double nll = 0.5 * std::log(2.0 * pi * var[t][j]) + e * e / (2.0 * var[t][j]);
      s += nll - 0.5 * std::log(2.0 * pi);
    }
  return s / pred.size();
}

inline double ivl(const Mat& pred, const Mat& gt_vel, const Mat& gt_pos, double dt) {
  const std::size_t m = pred.size();
  double lp = 0.0, le = 0.0;
  for (std::size_t t = 0; t < m; ++t) {
    for (int j = 0; j < 2; ++j) {
      double p = 0.0, e = 0.0;
      for (std::size_t s = 0; s < t; ++s) p += pred[s][j] * dt;
      for (std::size_t s = 0; s <= t; ++s) e += (pred[s][j] - gt_vel[s][j]) * dt;
      const double d = p - (gt_pos[t][j] - gt_pos[0][j]);
      lp += d * d;
      le += e * e;
    }
  }
  return (lp + le) / m;
}

// Metrics over planar point lists.

using Path = std::vector<std::array<double, 2>>;

inline double dist(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

inline double ate(const Path& gt, const Path& pred) {
  double s = 0.0;
  for (std::size_t t = 0; t < gt.size(); ++t) s += std::pow(dist(gt[t], pred[t]), 2);
  return std::sqrt(s / gt.size());
}

inline double rel_err(const Path& gt, const Path& pred, std::size_t a, std::size_t b) {
  const double ex = (gt[b][0] - gt[a][0]) - (pred[b][0] - pred[a][0]);
  const double ey = (gt[b][1] - gt[a][1]) - (pred[b][1] - pred[a][1]);
  return ex * ex + ey * ey;
}

inline double t_rte(const Path& gt, const Path& pred, std::size_t k) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t a = 0; a + k < gt.size(); ++a, ++n) s += rel_err(gt, pred, a, a + k);
  return std::sqrt(s / n);
}

inline double d_rte(const Path& gt, const Path& pred, double d) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t a = 0; a < gt.size(); ++a) {
    double len = 0.0;
    std::size_t b = a;
    while (b + 1 < gt.size() && len < d * (1.0 - 1e-9)) {
      len += dist(gt[b], gt[b + 1]);
      ++b;
    }
    if (len < d * (1.0 - 1e-9)) break;
    s += rel_err(gt, pred, a, b);
    ++n;
  }
  return std::sqrt(s / n);
}

inline double pde(const Path& gt, const Path& pred) {
  double len = 0.0;
  for (std::size_t t = 1; t < gt.size(); ++t) len += dist(gt[t - 1], gt[t]);
  return dist(gt.back(), pred.back()) / len;
}

}  // namespace ctin::oracle
