#include "ctin/gradcheck_suite.hpp"

#include <functional>
#include <memory>
#include <random>

#include "ctin/autodiff/grad_check.hpp"
#include "ctin/autodiff/nn.hpp"
#include "ctin/autodiff/ops.hpp"
#include "ctin/losses.hpp"
#include "ctin/model.hpp"

namespace ctin {

using ad::Shape;
using ad::Tensor;
using ad::Var;

namespace {

using Rng = std::mt19937_64;

int pick(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.values()) v = u(rng);
  return t;
}

Var leaf(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return ad::parameter(random_tensor(std::move(shape), rng, lo, hi));
}

// Values bounded away from zero, either sign.
Var nonzero_leaf(Shape shape, Rng& rng) {
  Tensor t = random_tensor(std::move(shape), rng, 0.5, 2.0);
  std::bernoulli_distribution sign(0.5);
  for (double& v : t.values()) v = sign(rng) ? v : -v;
  return ad::parameter(std::move(t));
}

struct Probe {
  std::function<Var()> f;
  std::vector<Var> inputs;
};

// Reduces the op output against fixed random weights so every output
// coordinate contributes with a distinct factor.
Probe probe(std::vector<Var> inputs, std::function<Var()> op, Rng& rng) {
  const Shape shape = op().shape();
  const Var w = ad::constant(random_tensor(shape, rng, 0.5, 1.5));
  return {[op, w] { return ad::sum(ad::mul(op(), w)); }, std::move(inputs)};
}

using Builder = std::function<Probe(Rng&, int shape_index)>;

Probe elementwise_binary(Rng& rng, int i, Var (*op)(const Var&, const Var&), bool nonzero_rhs) {
  const int b = pick(rng, 1, 3), t = pick(rng, 1, 5), c = pick(rng, 1, 4);
  Shape rhs;
  switch (i % 3) {
    case 0: rhs = {b, t, c}; break;
    case 1: rhs = {c}; break;
    default: rhs = {b, 1, c}; break;
  }
  Var x = leaf({b, t, c}, rng);
  Var y = nonzero_rhs ? nonzero_leaf(rhs, rng) : leaf(rhs, rng);
  return probe({x, y}, [=] { return op(x, y); }, rng);
}

Probe elementwise_unary(Rng& rng, std::function<Var(const Var&)> op, double lo = -2.0,
                        double hi = 2.0) {
  Var x = leaf({pick(rng, 1, 3), pick(rng, 1, 5), pick(rng, 1, 4)}, rng, lo, hi);
  return probe({x}, [=] { return op(x); }, rng);
}

ad::LstmParams lstm_params(int cin, int hidden, Rng& rng) {
  return {leaf({cin, 4 * hidden}, rng, -0.5, 0.5), leaf({hidden, 4 * hidden}, rng, -0.5, 0.5),
          leaf({4 * hidden}, rng, -0.5, 0.5)};
}

MhaParams mha(int c, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(c));
  return {leaf({c, c}, rng, -s, s), leaf({c, c}, rng, -s, s), leaf({c, c}, rng, -s, s),
          leaf({c, c}, rng, -s, s), leaf({c}, rng, -s, s)};
}

std::vector<std::pair<std::string, Builder>> cases() {
  std::vector<std::pair<std::string, Builder>> out;
  auto add = [&](std::string name, Builder b) { out.emplace_back(std::move(name), std::move(b)); };

  add("add", [](Rng& r, int i) { return elementwise_binary(r, i, ad::add, false); });
  add("sub", [](Rng& r, int i) { return elementwise_binary(r, i, ad::sub, false); });
  add("mul", [](Rng& r, int i) { return elementwise_binary(r, i, ad::mul, false); });
  add("div", [](Rng& r, int i) { return elementwise_binary(r, i, ad::div, true); });
  add("scale", [](Rng& r, int) {
    return elementwise_unary(r, [](const Var& x) { return ad::scale(x, -1.7); });
  });
  add("add_scalar", [](Rng& r, int) {
    return elementwise_unary(r, [](const Var& x) { return ad::add_scalar(x, 0.3); });
  });
  add("neg", [](Rng& r, int) { return elementwise_unary(r, ad::neg); });
  add("square", [](Rng& r, int) { return elementwise_unary(r, ad::square); });
  add("relu", [](Rng& r, int) { return elementwise_unary(r, ad::relu); });
  add("sigmoid", [](Rng& r, int) { return elementwise_unary(r, ad::sigmoid); });
  add("tanh", [](Rng& r, int) { return elementwise_unary(r, ad::tanh); });
  add("softplus", [](Rng& r, int) { return elementwise_unary(r, ad::softplus); });
  add("exp", [](Rng& r, int) { return elementwise_unary(r, ad::exp); });
  add("log", [](Rng& r, int) { return elementwise_unary(r, ad::log, 0.3, 3.0); });
  add("clamp", [](Rng& r, int) {
    return elementwise_unary(r, [](const Var& x) { return ad::clamp(x, -1.0, 1.0); });
  });
  add("matmul_shared", [](Rng& r, int) {
    const int b = pick(r, 1, 3), n = pick(r, 1, 5), k = pick(r, 1, 5), p = pick(r, 1, 4);
    Var a = leaf({b, n, k}, r), w = leaf({k, p}, r);
    return probe({a, w}, [=] { return ad::matmul(a, w); }, r);
  });
  add("matmul_batched", [](Rng& r, int) {
    const int b = pick(r, 1, 3), n = pick(r, 1, 5), k = pick(r, 1, 5), p = pick(r, 1, 4);
    Var a = leaf({b, n, k}, r), w = leaf({b, k, p}, r);
    return probe({a, w}, [=] { return ad::matmul(a, w); }, r);
  });
  add("conv1d", [](Rng& r, int i) {
    const int g = pick(r, 1, 2), k = 2 * pick(r, 0, 2) + 1;
    const int cin = g * pick(r, 1, 3), cout = g * pick(r, 1, 3), t = pick(r, 1, 7);
    Shape xs = i % 2 == 0 ? Shape{pick(r, 1, 3), t, cin} : Shape{t, cin};
    Var x = leaf(xs, r), w = leaf({k, cin / g, cout}, r);
    return probe({x, w}, [=] { return ad::conv1d(x, w, g); }, r);
  });
  add("softmax", [](Rng& r, int) { return elementwise_unary(r, ad::softmax); });
  add("concat", [](Rng& r, int) {
    const int axis = pick(r, 0, 2);
    std::vector<Var> parts;
    const int n = pick(r, 2, 3);
    for (int j = 0; j < n; ++j) {
      Shape s{2, 3, 2};
      s[static_cast<std::size_t>(axis)] = pick(r, 1, 3);
      parts.push_back(leaf(s, r));
    }
    return probe(parts, [=] { return ad::concat(parts, axis); }, r);
  });
  add("slice", [](Rng& r, int) {
    const int axis = pick(r, 0, 2);
    Shape s{pick(r, 1, 3), pick(r, 2, 5), pick(r, 2, 4)};
    const int n = s[static_cast<std::size_t>(axis)];
    const int start = pick(r, 0, n - 1), len = pick(r, 1, n - start);
    Var x = leaf(s, r);
    return probe({x}, [=] { return ad::slice(x, axis, start, len); }, r);
  });
  add("reshape", [](Rng& r, int) {
    const int b = pick(r, 1, 3), t = pick(r, 1, 4), c = pick(r, 1, 4);
    Var x = leaf({b, t, c}, r);
    return probe({x}, [=] { return ad::reshape(x, {b * t, c}); }, r);
  });
  add("transpose", [](Rng& r, int) { return elementwise_unary(r, ad::transpose); });
  add("sum", [](Rng& r, int) { return elementwise_unary(r, ad::sum); });
  add("mean", [](Rng& r, int) { return elementwise_unary(r, ad::mean); });
  add("cumsum", [](Rng& r, int i) {
    const int axis = pick(r, 0, 2);
    const bool exclusive = i % 2 == 1;
    return elementwise_unary(r, [=](const Var& x) { return ad::cumsum(x, axis, exclusive); });
  });
  add("split_heads", [](Rng& r, int) {
    const int h = pick(r, 1, 3);
    Var x = leaf({pick(r, 1, 2), pick(r, 1, 4), h * pick(r, 1, 3)}, r);
    return probe({x}, [=] { return ad::split_heads(x, h); }, r);
  });
  add("merge_heads", [](Rng& r, int) {
    const int h = pick(r, 1, 3);
    Var x = leaf({h * pick(r, 1, 2), pick(r, 1, 4), pick(r, 1, 3)}, r);
    return probe({x}, [=] { return ad::merge_heads(x, h); }, r);
  });
  add("causal_mask", [](Rng& r, int) {
    const int t = pick(r, 1, 5);
    Var x = leaf({pick(r, 1, 3), t, t}, r, -2.0, 2.0);
    return probe({x}, [=] { return ad::softmax(ad::causal_mask(x)); }, r);
  });
  add("layer_norm", [](Rng& r, int) {
    const int c = pick(r, 2, 6);
    Var x = leaf({pick(r, 1, 3), pick(r, 1, 4), c}, r), g = leaf({c}, r, 0.5, 1.5),
        b = leaf({c}, r);
    return probe({x, g, b}, [=] { return ad::layer_norm(x, g, b); }, r);
  });
  add("batch_norm", [](Rng& r, int) {
    const int c = pick(r, 1, 4);
    Var x = leaf({pick(r, 1, 3), pick(r, 2, 4), c}, r), g = leaf({c}, r, 0.5, 1.5),
        b = leaf({c}, r);
    auto mean = std::make_shared<Tensor>(Shape{c}, 0.0);
    auto var = std::make_shared<Tensor>(Shape{c}, 1.0);
    return probe({x, g, b}, [=] {
      return ad::batch_norm(x, g, b, {mean.get(), var.get()}, ad::Mode::kTrain);
    }, r);
  });
  add("dropout", [](Rng& r, int i) {
    const std::uint64_t mask_seed = r();
    return elementwise_unary(r, [=](const Var& x) {
      Rng mask_rng(mask_seed);
      return ad::dropout(x, 0.1 * (i % 5 + 1), ad::Mode::kTrain, &mask_rng);
    });
  });
  add("lstm_cell", [](Rng& r, int) {
    const int b = pick(r, 1, 3), cin = pick(r, 1, 4), hid = pick(r, 1, 3);
    Var x = leaf({b, cin}, r), h = leaf({b, hid}, r), c = leaf({b, hid}, r);
    const ad::LstmParams p = lstm_params(cin, hid, r);
    return probe({x, h, c, p.w_ih, p.w_hh, p.bias}, [=] {
      auto [h1, c1] = ad::lstm_cell(x, h, c, p);
      return ad::concat({h1, c1}, 1);
    }, r);
  });
  add("bilstm_layer", [](Rng& r, int) {
    const int b = pick(r, 1, 2), t = pick(r, 1, 5), cin = pick(r, 1, 4), hid = pick(r, 1, 3);
    Var x = leaf({b, t, cin}, r);
    const ad::LstmParams f = lstm_params(cin, hid, r), v = lstm_params(cin, hid, r);
    return probe({x, f.w_ih, f.w_hh, f.bias, v.w_ih, v.w_hh, v.bias},
                 [=] { return ad::bilstm_layer(x, f, v); }, r);
  });
  add("attention", [](Rng& r, int i) {
    const bool causal = i % 2 == 0;
    const int b = pick(r, 1, 3), tq = pick(r, 1, 5), dk = pick(r, 1, 4);
    const int tk = causal ? tq : pick(r, 1, 5);
    Var q = leaf({b, tq, dk}, r), k = leaf({b, tk, dk}, r), v = leaf({b, tk, dk}, r);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    return probe({q, k, v}, [=] { return ad::attention(q, k, v, scale, causal); }, r);
  });
  add("multi_head_attention", [](Rng& r, int i) {
    const bool causal = i % 2 == 0;
    const int h = pick(r, 1, 2), c = h * pick(r, 1, 3), b = pick(r, 1, 2), t = pick(r, 1, 4);
    const int s = causal ? t : pick(r, 1, 4);
    Var q = leaf({b, t, c}, r), kv = leaf({b, s, c}, r);
    const MhaParams p = mha(c, r);
    return probe({q, kv, p.wq, p.wk, p.wv, p.wo, p.bo},
                 [=] { return multi_head_attention(q, kv, p, h, causal); }, r);
  });
  add("local_self_attention", [](Rng& r, int) {
    const int h = pick(r, 1, 2), c = h * pick(r, 1, 3), k = 2 * pick(r, 0, 1) + 1;
    Var x = leaf({pick(r, 1, 2), pick(r, 1, 5), c}, r);
    LocalAttentionParams p{leaf({k, c / h, c}, r),  leaf({c, c}, r), leaf({2 * c, h}, r),
                           leaf({h}, r),            leaf({2 * c, 2}, r), leaf({2}, r)};
    return probe({x, p.w_key, p.w_value, p.w_score, p.b_score, p.w_gate, p.b_gate},
                 [=] { return local_self_attention(x, p, h); }, r);
  });
  add("mse_loss", [](Rng& r, int) {
    const int b = pick(r, 1, 3), m = pick(r, 1, 6);
    Var p = leaf({b, m, 2}, r), g = leaf({b, m, 2}, r);
    return Probe{[=] { return mse_loss(p, g); }, {p, g}};
  });
  add("ivl", [](Rng& r, int) {
    const int b = pick(r, 1, 3), m = pick(r, 1, 6);
    Var p = leaf({b, m, 2}, r), g = leaf({b, m, 2}, r);
    Var pos = ad::constant(random_tensor({b, m, 2}, r, -3.0, 3.0));
    return Probe{[=] { return ivl(p, g, pos, 0.05); }, {p, g}};
  });
  add("cnl", [](Rng& r, int) {
    const int b = pick(r, 1, 3), m = pick(r, 1, 6);
    Var p = leaf({b, m, 2}, r), s = leaf({b, m, 2}, r, 0.3, 2.0), g = leaf({b, m, 2}, r);
    return Probe{[=] { return cnl(p, s, g); }, {p, s, g}};
  });
  add("multitask_loss", [](Rng& r, int) {
    Var lv = leaf({}, r, 0.1, 3.0), lc = leaf({}, r, -2.0, 2.0);
    MultiTaskParams mt{leaf({}, r), leaf({}, r)};
    return Probe{[=] { return multitask_loss(lv, lc, mt); }, {lv, lc, mt.log_var_v, mt.log_var_c}};
  });
  add("ctin_end_to_end", [](Rng& r, int i) {
    ModelConfig cfg;
    cfg.window_len = pick(r, 3, 6);
    cfg.model_dim = 8;
    cfg.heads = 2;
    cfg.ffn_dim = 12;
    cfg.encoder_layers = 1;
    cfg.decoder_layers = pick(r, 1, 2);
    cfg.init_seed = static_cast<std::uint64_t>(i);
    auto model = std::make_shared<CtinModel>(cfg);
    auto loss_store = std::make_shared<ad::ParamStore>();
    const MultiTaskParams mt = MultiTaskParams::create(*loss_store);
    std::vector<Var> inputs;
    // Random values everywhere so no zero-initialized layer masks a gradient.
    for (auto* store : {&model->params(), loss_store.get()}) {
      for (auto& [name, entry] : store->entries()) {
        if (!entry.trainable) continue;
        for (double& v : entry.var.mutable_value().values()) {
          v = std::uniform_real_distribution<double>(-0.5, 0.5)(r);
        }
        inputs.push_back(entry.var);
      }
    }
    const int b = pick(r, 2, 3), m = cfg.window_len;
    Var imu = ad::constant(random_tensor({b, m, 6}, r, -2.0, 2.0));
    Var gv = ad::constant(random_tensor({b, m, 2}, r));
    Var gp = ad::constant(random_tensor({b, m, 2}, r, -3.0, 3.0));
    const std::uint64_t dropout_seed = r();
    return Probe{[=] {
      Rng dr(dropout_seed);
      const ModelOutput out = model->forward(imu, {ad::Mode::kTrain, &dr, nullptr});
      return multitask_loss(ivl(out.vel, gv, gp, 0.05), cnl(out.vel, out.cov, gv), mt);
    }, inputs};
  });
  return out;
}

}  // namespace

std::vector<OracleCase> run_gradcheck_suite(int shapes, std::uint64_t seed, double tolerance) {
  std::vector<OracleCase> results;
  std::uint64_t case_index = 0;
  for (const auto& [name, build] : cases()) {
    OracleCase oc;
    oc.name = name;
    oc.shapes = shapes;
    for (int i = 0; i < shapes; ++i) {
      Rng rng(seed * 1000003u + case_index * 7919u + static_cast<std::uint64_t>(i));
      const Probe p = build(rng, i);
      const ad::GradCheckResult res = ad::grad_check(p.f, p.inputs);
      oc.max_rel_error = std::max(oc.max_rel_error, res.max_rel_error);
      oc.max_raw_rel_error = std::max(oc.max_raw_rel_error, res.max_raw_rel_error);
      oc.checked += res.checked;
      oc.excluded += res.excluded;
    }
    oc.passed = oc.checked > 0 && oc.max_rel_error < tolerance;
    results.push_back(oc);
    ++case_index;
  }
  return results;
}

}  // namespace ctin
