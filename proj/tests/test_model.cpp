#include <random>

#include <gtest/gtest.h>

#include "ctin/autodiff/grad_check.hpp"
#include "ctin/autodiff/ops.hpp"
#include "ctin/errors.hpp"
#include "ctin/model.hpp"
#include "oracles.hpp"

namespace ad = ctin::ad;
using ad::Shape;
using ad::Tensor;
using ad::Var;
using ctin::CtinModel;
using ctin::ModelConfig;
namespace oracle = ctin::oracle;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

oracle::Mat to_mat(const Tensor& t) {
  auto m = t.matrix();
  oracle::Mat out(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

std::vector<oracle::Mat> to_kernel(const Tensor& t) {
  std::vector<oracle::Mat> out(t.dim(0), oracle::Mat(t.dim(1), std::vector<double>(t.dim(2))));
  std::size_t i = 0;
  for (auto& m : out)
    for (auto& row : m)
      for (double& v : row) v = t[i++];
  return out;
}

std::vector<double> to_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

double max_diff(const Tensor& t, const oracle::Mat& m) {
  auto a = t.matrix();
  double d = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) d = std::max(d, std::abs(a(r, c) - m[r][c]));
  return d;
}

ModelConfig small_config(int m = 8, int d = 8, int heads = 2) {
  ModelConfig c;
  c.window_len = m;
  c.model_dim = d;
  c.heads = heads;
  c.decoder_layers = 2;
  c.ffn_dim = 12;
  return c;
}

// Replaces every parameter with uniform noise so no block is trivially zero.
void randomize(CtinModel& model, std::mt19937_64& rng, double amp = 0.5) {
  for (auto& [name, entry] : model.params().entries()) {
    Tensor& v = entry.var.mutable_value();
    v = random_tensor(v.shape(), rng, -amp, amp);
  }
}

ctin::ForwardOptions eval_opts() { return {}; }

}  // namespace

TEST(ModelConfig, DefaultsAndValidation) {
  ModelConfig c;
  EXPECT_EQ(c.window_len, 200);
  EXPECT_EQ(c.model_dim, 64);
  EXPECT_EQ(c.heads, 8);
  EXPECT_EQ(c.encoder_layers, 1);
  EXPECT_EQ(c.decoder_layers, 4);
  EXPECT_EQ(c.ffn(), 256);
  EXPECT_EQ(c.hidden(), 32);
  EXPECT_DOUBLE_EQ(c.dropout_encoder, 0.5);
  EXPECT_DOUBLE_EQ(c.dropout_decoder, 0.05);
  EXPECT_EQ(c.local_kernel, 3);
  EXPECT_NO_THROW(c.validate());

  ModelConfig bad = c;
  bad.heads = 5;
  EXPECT_THROW(bad.validate(), ctin::ConfigError);
  bad = c;
  bad.local_kernel = 4;
  EXPECT_THROW(bad.validate(), ctin::ConfigError);

  ModelConfig r = ctin::model_config_from_json(ctin::to_json(small_config()));
  EXPECT_EQ(ctin::to_json(r), ctin::to_json(small_config()));
}

TEST(SpatialEmbed, ShapeAndZeroInput) {
  CtinModel model(small_config());
  std::mt19937_64 rng(1);
  Var y = model.spatial_embed(ad::constant(random_tensor({2, 8, 6}, rng)), eval_opts());
  EXPECT_EQ(y.shape(), (Shape{2, 8, 8}));
  for (ad::Mode mode : {ad::Mode::kEval, ad::Mode::kTrain}) {
    Var z = model.spatial_embed(ad::constant(Tensor({2, 8, 6}, 0.0)), {mode, &rng, nullptr});
    EXPECT_EQ(z.value().array().abs().maxCoeff(), 0.0);
  }
}

TEST(SpatialEmbed, Gradient) {
  CtinModel model(small_config());
  std::mt19937_64 rng(2);
  Var x = ad::parameter(random_tensor({2, 8, 6}, rng));
  Var w = ad::constant(random_tensor({2, 8, 8}, rng, 0.5, 1.5));
  std::vector<Var> inputs{x};
  for (const char* n : {"spatial.conv.w", "spatial.bn.gain", "spatial.proj.w"})
    inputs.push_back(model.params().get(n));
  auto r = ad::grad_check(
      [&] {
        return ad::sum(ad::mul(model.spatial_embed(x, {ad::Mode::kTrain, &rng, nullptr}), w));
      },
      inputs);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(TemporalEmbed, ZeroPositionalTableIsAdditiveIdentity) {
  CtinModel model(small_config());
  std::mt19937_64 rng(3);
  Var x = ad::constant(random_tensor({2, 8, 6}, rng));
  Var y = model.temporal_embed(x);
  EXPECT_EQ(y.shape(), (Shape{2, 8, 8}));
  const auto& s = model.params();
  ad::LstmParams f{s.get("temporal.lstm.fwd.w_ih"), s.get("temporal.lstm.fwd.w_hh"),
                   s.get("temporal.lstm.fwd.bias")};
  ad::LstmParams b{s.get("temporal.lstm.rev.w_ih"), s.get("temporal.lstm.rev.w_hh"),
                   s.get("temporal.lstm.rev.bias")};
  Var proj = ad::add(ad::matmul(ad::bilstm_layer(x, f, b), s.get("temporal.proj.w")),
                     s.get("temporal.proj.b"));
  EXPECT_EQ(y.value().values(), proj.value().values());
}

TEST(TemporalEmbed, TimestepPermutationChangesOutput) {
  CtinModel model(small_config());
  std::mt19937_64 rng(4);
  Tensor x = random_tensor({1, 8, 6}, rng);
  Tensor perm = x;
  std::vector<int> order{3, 0, 6, 1, 7, 2, 5, 4};
  for (int t = 0; t < 8; ++t)
    for (int c = 0; c < 6; ++c) perm[t * 6 + c] = x[order[t] * 6 + c];
  Var a = model.temporal_embed(ad::constant(x));
  Var b = model.temporal_embed(ad::constant(perm));
  // compare the permuted output of a pointwise map against the actual output
  double diff = 0.0;
  for (int t = 0; t < 8; ++t)
    for (int c = 0; c < 8; ++c)
      diff = std::max(diff, std::abs(b.value()[t * 8 + c] - a.value()[order[t] * 8 + c]));
  EXPECT_GT(diff, 1e-3);
}

TEST(GlobalAttention, IdenticalRowsGiveIdenticalOutputs) {
  CtinModel model(small_config());
  std::mt19937_64 rng(5);
  randomize(model, rng);
  Tensor row = random_tensor({4}, rng);
  Tensor x({1, 6, 4});
  for (int t = 0; t < 6; ++t)
    for (int c = 0; c < 4; ++c) x[t * 4 + c] = row[c];
  Tensor w;
  Var y = ctin::global_self_attention(ad::constant(x),
                                      model.mha_params("encoder.block0.global"), 2, &w);
  auto m = y.value().matrix();
  for (Eigen::Index t = 1; t < m.rows(); ++t) EXPECT_EQ(m.row(t), m.row(0));
  auto wm = w.matrix();
  for (Eigen::Index r = 0; r < wm.rows(); ++r) EXPECT_NEAR(wm.row(r).sum(), 1.0, 1e-6);
}

TEST(GlobalAttention, MatchesBruteForce) {
  std::mt19937_64 rng(6);
  for (auto [m, d, h] : {std::tuple{2, 2, 1}, std::tuple{2, 4, 2}, std::tuple{5, 6, 3}}) {
    ctin::MhaParams p{ad::constant(random_tensor({d, d}, rng)),
                      ad::constant(random_tensor({d, d}, rng)),
                      ad::constant(random_tensor({d, d}, rng)),
                      ad::constant(random_tensor({d, d}, rng)),
                      ad::constant(random_tensor({d}, rng))};
    Tensor x = random_tensor({1, m, d}, rng, -2, 2);
    for (bool causal : {false, true}) {
      Tensor w;
      Var y = ctin::multi_head_attention(ad::constant(x), ad::constant(x), p, h, causal, &w);
      std::vector<oracle::Mat> ow;
      auto expected = oracle::attention(to_mat(x), to_mat(x), to_mat(p.wq.value()),
                                        to_mat(p.wk.value()), to_mat(p.wv.value()),
                                        to_mat(p.wo.value()), to_vec(p.bo.value()), h, causal,
                                        &ow);
      EXPECT_LT(max_diff(y.value(), expected), 1e-12) << m << " " << d << " " << h;
      for (int head = 0; head < h; ++head)
        for (int t = 0; t < m; ++t)
          for (int u = 0; u < m; ++u)
            EXPECT_NEAR(w[(head * m + t) * m + u], ow[head][t][u], 1e-12);
    }
  }
}

TEST(LocalAttention, MatchesBruteForce) {
  std::mt19937_64 rng(7);
  for (auto [m, d, h, k] : {std::tuple{4, 2, 1, 3}, std::tuple{6, 4, 2, 3}, std::tuple{7, 6, 3, 5}}) {
    ctin::LocalAttentionParams p{ad::constant(random_tensor({k, d / h, d}, rng)),
                                 ad::constant(random_tensor({d, d}, rng)),
                                 ad::constant(random_tensor({2 * d, h}, rng)),
                                 ad::constant(random_tensor({h}, rng)),
                                 ad::constant(random_tensor({2 * d, 2}, rng)),
                                 ad::constant(random_tensor({2}, rng))};
    Tensor x = random_tensor({1, m, d}, rng, -2, 2);
    Tensor w;
    Var y = ctin::local_self_attention(ad::constant(x), p, h, &w);
    oracle::LocalWeights ow{to_kernel(p.w_key.value()), to_mat(p.w_value.value()),
                            to_mat(p.w_score.value()), to_vec(p.b_score.value()),
                            to_mat(p.w_gate.value()), to_vec(p.b_gate.value())};
    oracle::Mat gamma;
    auto expected = oracle::local_attention(to_mat(x), ow, h, &gamma);
    EXPECT_LT(max_diff(y.value(), expected), 1e-12) << m << " " << d << " " << h;
    for (int head = 0; head < h; ++head)
      for (int t = 0; t < m; ++t) EXPECT_NEAR(w[head * m + t], gamma[head][t], 1e-12);
    auto wm = w.matrix();
    for (Eigen::Index r = 0; r < wm.rows(); ++r) EXPECT_NEAR(wm.row(r).sum(), 1.0, 1e-6);
  }
}

TEST(LocalAttention, SaturatedGateGivesLocalContext) {
  std::mt19937_64 rng(8);
  const int d = 4, h = 2;
  ctin::LocalAttentionParams p{ad::constant(random_tensor({3, d / h, d}, rng)),
                               ad::constant(random_tensor({d, d}, rng)),
                               ad::constant(random_tensor({2 * d, h}, rng)),
                               ad::constant(random_tensor({h}, rng)),
                               ad::constant(Tensor({2 * d, 2}, 0.0)),
                               ad::constant(Tensor({2}, std::vector<double>{1e3, -1e3}))};
  Var x = ad::constant(random_tensor({2, 6, d}, rng));
  Var y = ctin::local_self_attention(x, p, h);
  Var c1 = ad::conv1d(x, p.w_key, h);
  EXPECT_EQ(y.value().values(), c1.value().values());
}

TEST(EncoderBlock, ZeroFinalConvIsIdentity) {
  CtinModel model(small_config());
  std::mt19937_64 rng(9);
  Var x = ad::constant(random_tensor({2, 8, 8}, rng));
  for (ad::Mode mode : {ad::Mode::kEval, ad::Mode::kTrain}) {
    Var y = model.encoder_forward(x, {mode, &rng, nullptr});
    EXPECT_EQ(y.shape(), (Shape{2, 8, 8}));
    EXPECT_EQ(y.value().values(), x.value().values());
  }
}

TEST(EncoderBlock, Gradient) {
  CtinModel model(small_config());
  std::mt19937_64 rng(10);
  randomize(model, rng);
  Var x = ad::parameter(random_tensor({2, 8, 8}, rng));
  Var w = ad::constant(random_tensor({2, 8, 8}, rng, 0.5, 1.5));
  std::vector<Var> inputs{x};
  for (auto& [name, e] : model.params().entries())
    if (name.rfind("encoder.", 0) == 0) inputs.push_back(e.var);
  auto r = ad::grad_check(
      [&] {
        ctin::ForwardOptions o{ad::Mode::kEval, nullptr, nullptr};
        return ad::sum(ad::mul(model.encoder_block(0, x, o), w));
      },
      inputs);
  EXPECT_LT(r.max_rel_error, 1e-4);
  EXPECT_EQ(r.checked + r.excluded, 368u);
  EXPECT_GT(r.checked, 350u);
}

TEST(Decoder, CausalityUnderFuturePerturbation) {
  CtinModel model(small_config());
  std::mt19937_64 rng(11);
  randomize(model, rng);
  Tensor y = random_tensor({1, 8, 8}, rng);
  Var z = ad::constant(random_tensor({1, 8, 8}, rng));
  const auto opts = eval_opts();
  Var base_layer = model.decoder_layer(0, ad::constant(y), z, opts);
  Var base_stack = model.decoder_forward(ad::constant(y), z, opts);
  for (int t = 0; t < 7; ++t) {
    Tensor yp = y;
    for (int u = t + 1; u < 8; ++u)
      for (int c = 0; c < 8; ++c) yp[u * 8 + c] += 3.0 * std::sin(u + c);
    Var layer = model.decoder_layer(0, ad::constant(yp), z, opts);
    Var stack = model.decoder_forward(ad::constant(yp), z, opts);
    for (int r = 0; r <= t; ++r)
      for (int c = 0; c < 8; ++c) {
        EXPECT_NEAR(layer.value()[r * 8 + c], base_layer.value()[r * 8 + c], 1e-9);
        EXPECT_NEAR(stack.value()[r * 8 + c], base_stack.value()[r * 8 + c], 1e-9);
      }
    double later = 0.0;
    for (int c = 0; c < 8; ++c)
      later = std::max(later, std::abs(stack.value()[(t + 1) * 8 + c] -
                                       base_stack.value()[(t + 1) * 8 + c]));
    EXPECT_GT(later, 1e-6);
  }
}

TEST(Decoder, MaskedSelfAttentionIgnoresFuture) {
  std::mt19937_64 rng(12);
  const int d = 4;
  ctin::MhaParams p{ad::constant(random_tensor({d, d}, rng)),
                    ad::constant(random_tensor({d, d}, rng)),
                    ad::constant(random_tensor({d, d}, rng)),
                    ad::constant(random_tensor({d, d}, rng)),
                    ad::constant(random_tensor({d}, rng))};
  Tensor x = random_tensor({1, 6, d}, rng);
  Tensor w;
  ctin::multi_head_attention(ad::constant(x), ad::constant(x), p, 2, true, &w);
  for (int head = 0; head < 2; ++head)
    for (int t = 0; t < 6; ++t)
      for (int u = t + 1; u < 6; ++u) EXPECT_EQ(w[(head * 6 + t) * 6 + u], 0.0);
}

TEST(Decoder, EqualMemoryRowsGiveEqualCrossAttention) {
  CtinModel model(small_config());
  std::mt19937_64 rng(13);
  randomize(model, rng);
  Tensor row = random_tensor({8}, rng);
  Tensor z({1, 8, 8});
  for (int t = 0; t < 8; ++t)
    for (int c = 0; c < 8; ++c) z[t * 8 + c] = row[c];
  Var y = ctin::multi_head_attention(ad::constant(random_tensor({1, 8, 8}, rng)),
                                     ad::constant(z), model.mha_params("decoder.layer0.cross"),
                                     2, false);
  auto m = y.value().matrix();
  for (Eigen::Index t = 1; t < m.rows(); ++t)
    EXPECT_LT((m.row(t) - m.row(0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Heads, PositiveCovarianceAndUnitVariance) {
  CtinModel model(small_config());
  std::mt19937_64 rng(14);
  randomize(model, rng, 3.0);
  Var h = ad::constant(random_tensor({1, 10000, 8}, rng, -10, 10));
  auto out = model.heads(h);
  EXPECT_EQ(out.vel.shape(), (Shape{1, 10000, 2}));
  EXPECT_GT(out.cov.value().array().minCoeff(), 0.0);
  EXPECT_TRUE(out.cov.value().array().isFinite().all());

  model.params().get("head.cov.fc2.w").mutable_value().fill(0.0);
  model.params().get("head.cov.fc2.b").mutable_value().fill(0.0);
  auto unit = model.heads(h);
  EXPECT_EQ(unit.cov.value().array().minCoeff(), 1.0);
  EXPECT_EQ(unit.cov.value().array().maxCoeff(), 1.0);
}

TEST(Heads, Gradient) {
  CtinModel model(small_config());
  std::mt19937_64 rng(15);
  randomize(model, rng);
  Var h = ad::parameter(random_tensor({2, 4, 8}, rng));
  std::vector<Var> inputs{h};
  for (auto& [name, e] : model.params().entries())
    if (name.rfind("head.", 0) == 0) inputs.push_back(e.var);
  auto r = ad::grad_check(
      [&] {
        auto o = model.heads(h);
        return ad::add(ad::sum(ad::square(o.vel)), ad::sum(o.cov));
      },
      inputs);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(CtinForward, ShapesAndDeterminism) {
  CtinModel model(small_config());
  std::mt19937_64 rng(16);
  randomize(model, rng, 0.3);
  ctin::Window w;
  w.imu = ctin::RowMatrix::Random(8, 6);
  auto a = ctin::ctin_forward(model, w, ad::Mode::kEval);
  auto b = ctin::ctin_forward(model, w, ad::Mode::kEval);
  EXPECT_EQ(a.vel.rows(), 8);
  EXPECT_EQ(a.vel.cols(), 2);
  EXPECT_EQ(a.cov_diag.rows(), 8);
  EXPECT_EQ(a.cov_diag.cols(), 2);
  EXPECT_EQ(a.vel, b.vel);
  EXPECT_EQ(a.cov_diag, b.cov_diag);
  EXPECT_GT(a.cov_diag.minCoeff(), 0.0);

  ctin::Window wrong;
  wrong.imu = ctin::RowMatrix::Zero(9, 6);
  EXPECT_THROW(ctin::ctin_forward(model, wrong, ad::Mode::kEval), ctin::DimensionError);
}

TEST(CtinForward, InitialisationIdentity) {
  CtinModel model(small_config());
  std::mt19937_64 rng(17);
  Var x = ad::constant(random_tensor({3, 8, 6}, rng));
  auto full = model.forward(x, eval_opts());
  auto direct = model.heads(model.temporal_embed(model.standardize(x)));
  EXPECT_EQ(full.vel.value().values(), direct.vel.value().values());
  EXPECT_EQ(full.cov.value().values(), direct.cov.value().values());
}

TEST(CtinForward, EndToEndGradient) {
  CtinModel model(small_config());
  std::mt19937_64 rng(18);
  randomize(model, rng);
  Var x = ad::constant(random_tensor({2, 8, 6}, rng));
  Var target = ad::constant(random_tensor({2, 8, 2}, rng));
  std::vector<Var> inputs;
  for (auto& [name, e] : model.params().entries()) inputs.push_back(e.var);
  auto r = ad::grad_check(
      [&] {
        auto o = model.forward(x, eval_opts());
        return ad::add(ad::sum(ad::div(ad::square(ad::sub(o.vel, target)), o.cov)),
                       ad::sum(ad::log(o.cov)));
      },
      inputs);
  EXPECT_LT(r.max_rel_error, 1e-4);
  EXPECT_GT(r.checked, 0.99 * static_cast<double>(model.params().parameter_count()));
}

TEST(CtinForward, AttentionTraceIsNormalized) {
  CtinModel model(small_config());
  std::mt19937_64 rng(19);
  randomize(model, rng);
  ctin::ForwardTrace trace;
  model.forward(ad::constant(random_tensor({2, 8, 6}, rng)), {ad::Mode::kEval, nullptr, &trace});
  EXPECT_EQ(trace.names.size(), 2u + 2u * 2u);
  for (const auto& w : trace.weights) {
    auto m = w.matrix();
    EXPECT_GE(m.minCoeff(), 0.0);
    for (Eigen::Index r = 0; r < m.rows(); ++r) EXPECT_NEAR(m.row(r).sum(), 1.0, 1e-6);
  }
}

TEST(CtinModel, ParameterCountAndCheckpointStable) {
  CtinModel a{ModelConfig{}}, b{ModelConfig{}};
  EXPECT_EQ(a.params().parameter_count(), b.params().parameter_count());
  EXPECT_GT(a.params().parameter_count(), 50000u);
  EXPECT_EQ(ctin::checkpoint_json(a).dump(), ctin::checkpoint_json(b).dump());

  CtinModel small(small_config());
  std::mt19937_64 rng(20);
  randomize(small, rng);
  const std::string text = ctin::checkpoint_json(small).dump();
  CtinModel loaded = ctin::model_from_checkpoint(nlohmann::json::parse(text));
  ctin::Window w;
  w.imu = ctin::RowMatrix::Random(8, 6);
  EXPECT_EQ(ctin::ctin_forward(small, w, ad::Mode::kEval).vel,
            ctin::ctin_forward(loaded, w, ad::Mode::kEval).vel);
}
