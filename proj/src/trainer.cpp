#include "ctin/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "ctin/autodiff/ops.hpp"
#include "ctin/errors.hpp"

namespace ctin {

using ad::Mode;
using ad::Shape;
using ad::Tensor;
using ad::Var;

LossKind parse_loss_kind(std::string_view name) {
  if (name == "mse" || name == "MSE") return LossKind::kMse;
  if (name == "ivl" || name == "IVL") return LossKind::kIvl;
  if (name == "cnl" || name == "CNL") return LossKind::kCnl;
  if (name == "ivl+cnl" || name == "IVL+CNL") return LossKind::kIvlCnl;
  throw ConfigError("unknown loss kind '" + std::string(name) + "'");
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kMse: return "mse";
    case LossKind::kIvl: return "ivl";
    case LossKind::kCnl: return "cnl";
    case LossKind::kIvlCnl: return "ivl+cnl";
  }
  return "?";
}

void TrainConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("train config: " + msg);
  };
  need(lr > 0.0, "lr must be positive");
  need(weight_decay >= 0.0, "weight_decay must be >= 0");
  need(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must be in [0, 1)");
  need(eps > 0.0, "eps must be positive");
  need(grad_clip > 0.0, "grad_clip must be positive");
  need(batch_size >= 1, "batch_size must be >= 1");
  need(max_epochs >= 1, "max_epochs must be >= 1");
  need(patience >= 1, "patience must be >= 1");
  need(split[0] >= 0 && split[1] >= 0 && split[2] >= 0, "split ratios must be >= 0");
  need(std::abs(split[0] + split[1] + split[2] - 1.0) < 1e-9, "split ratios must sum to 1");
  need(train_step >= 0 && eval_step >= 0 && random_shift >= 0, "steps must be >= 0");
  need(max_train_windows >= 0 && max_val_windows >= 0, "window caps must be >= 0");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"grad_clip", c.grad_clip},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"loss", to_string(c.loss_kind)},
          {"rng_seed", c.rng_seed},
          {"split", c.split},
          {"train_step", c.train_step},
          {"random_shift", c.random_shift},
          {"eval_step", c.eval_step},
          {"max_train_windows", c.max_train_windows},
          {"max_val_windows", c.max_val_windows},
          {"augment_yaw", c.augment_yaw},
          {"perturb_bias", c.perturb_bias},
          {"bias_frame", c.bias_frame == BiasFrame::kBody ? "body" : "navigation"}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  TrainConfig c;
  const nlohmann::json defaults = to_json(c);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!defaults.contains(it.key())) {
      throw ConfigError("train config: unknown key '" + it.key() + "'");
    }
  }
  try {
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    if (j.contains("loss")) c.loss_kind = parse_loss_kind(j.at("loss").get<std::string>());
    c.rng_seed = j.value("rng_seed", c.rng_seed);
    c.split = j.value("split", c.split);
    c.train_step = j.value("train_step", c.train_step);
    c.random_shift = j.value("random_shift", c.random_shift);
    c.eval_step = j.value("eval_step", c.eval_step);
    c.max_train_windows = j.value("max_train_windows", c.max_train_windows);
    c.max_val_windows = j.value("max_val_windows", c.max_val_windows);
    c.augment_yaw = j.value("augment_yaw", c.augment_yaw);
    c.perturb_bias = j.value("perturb_bias", c.perturb_bias);
    if (j.contains("bias_frame")) {
      const auto f = j.at("bias_frame").get<std::string>();
      if (f == "body") {
        c.bias_frame = BiasFrame::kBody;
      } else if (f == "navigation") {
        c.bias_frame = BiasFrame::kNavigation;
      } else {
        throw ConfigError("train config: bias_frame must be 'navigation' or 'body'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

double TrainHistory::best_val_loss() const {
  if (best_epoch < 0) return std::numeric_limits<double>::infinity();
  return epochs.at(static_cast<std::size_t>(best_epoch)).val_loss;
}

nlohmann::json to_json(const TrainHistory& h, bool include_timing) {
  nlohmann::json train = nlohmann::json::array();
  nlohmann::json val = nlohmann::json::array();
  nlohmann::json wall = nlohmann::json::array();
  for (const auto& e : h.epochs) {
    train.push_back(e.train_loss);
    val.push_back(e.val_loss);
    wall.push_back(e.wall_time_s);
  }
  nlohmann::json j = {{"train_loss", train},
                      {"val_loss", val},
                      {"best_epoch", h.best_epoch},
                      {"stop_reason", h.stop_reason}};
  if (include_timing) j["wall_time_s"] = wall;
  return j;
}

TrainHistory train_history_from_json(const nlohmann::json& j) {
  try {
    TrainHistory h;
    const auto train = j.at("train_loss").get<std::vector<double>>();
    const auto val = j.at("val_loss").get<std::vector<double>>();
    const auto wall = j.value("wall_time_s", std::vector<double>(train.size(), 0.0));
    if (val.size() != train.size() || wall.size() != train.size()) {
      throw FormatError("history arrays differ in length");
    }
    for (std::size_t i = 0; i < train.size(); ++i) h.epochs.push_back({train[i], val[i], wall[i]});
    h.best_epoch = j.at("best_epoch").get<int>();
    h.stop_reason = j.at("stop_reason").get<std::string>();
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad training history: ") + e.what());
  }
}

void adam_step(ad::ParamStore& store, const TrainConfig& cfg, long step_count) {
  if (step_count < 1) throw ConfigError("adam step count starts at 1");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_count));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_count));
  for (auto& [name, e] : store.entries()) {
    if (!e.trainable) continue;
    ad::Node* n = e.var.node();
    auto theta = n->value.array();
    auto m = e.adam_m.array();
    auto v = e.adam_v.array();
    if (n->has_grad()) {
      const auto g = n->grad.array();
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.square();
    } else {
      m *= cfg.beta1;
      v *= cfg.beta2;
    }
    theta -= cfg.lr * cfg.weight_decay * theta +
             cfg.lr * (m / bc1) / ((v / bc2).sqrt() + cfg.eps);
  }
}

double clip_grad_norm(const std::vector<ad::ParamStore*>& stores, double max_norm) {
  double sq = 0.0;
  for (auto* s : stores) {
    for (auto& [name, e] : s->entries()) {
      if (e.trainable && e.var.node()->has_grad()) sq += e.var.node()->grad.array().square().sum();
    }
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (auto* s : stores) {
      for (auto& [name, e] : s->entries()) {
        if (e.trainable && e.var.node()->has_grad()) e.var.node()->grad.array() *= f;
      }
    }
  }
  return norm;
}

bool early_stop(const TrainHistory& history, int patience) {
  if (history.epochs.empty()) throw ConfigError("early_stop needs at least one epoch");
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.epochs.size(); ++i) {
    if (history.epochs[i].val_loss < history.epochs[best].val_loss) best = i;
  }
  return history.epochs.size() - 1 - best >= static_cast<std::size_t>(patience);
}

std::vector<NamedSequence> load_dataset(const std::filesystem::path& dir) {
  std::vector<NamedSequence> out;
  for (const auto& path : list_sequences(dir)) {
    out.push_back({path.stem().string(), load_sequence(path)});
  }
  if (out.empty()) throw DataError("no sequences found in " + dir.string());
  return out;
}

DatasetSplit split_dataset(std::size_t n, const std::array<double, 3>& ratios,
                           std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
  auto n_val = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n)));
  n_train = std::min(n_train, n);
  n_val = std::min(n_val, n - n_train);
  DatasetSplit s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                      idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  return s;
}

namespace {

DatasetKind kind_of(const ImuSequence& seq) { return parse_dataset_kind(seq.meta.dataset_kind); }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::seed_seq s{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                  static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                  static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  std::mt19937_64 rng(s);
  return rng();
}

struct Batch {
  Var imu;
  Var gt_vel;
  Var gt_pos;
  double dt = 0.0;
};

Batch make_batch(const std::vector<const Window*>& ws) {
  const int b = static_cast<int>(ws.size());
  const int m = static_cast<int>(ws.front()->length());
  Tensor vel(Shape{b, m, 2});
  Tensor pos(Shape{b, m, 2});
  for (int i = 0; i < b; ++i) {
    std::copy_n(ws[static_cast<std::size_t>(i)]->gt_vel.data(), 2 * m,
                vel.data() + static_cast<std::size_t>(i) * 2 * m);
    std::copy_n(ws[static_cast<std::size_t>(i)]->gt_pos.data(), 2 * m,
                pos.data() + static_cast<std::size_t>(i) * 2 * m);
  }
  return {ad::constant(windows_to_batch(ws)), ad::constant(std::move(vel)),
          ad::constant(std::move(pos)), ws.front()->dt};
}

Var compute_loss(LossKind kind, const ModelOutput& out, const Batch& b,
                 const ad::ParamStore& loss_params) {
  switch (kind) {
    case LossKind::kMse: return mse_loss(out.vel, b.gt_vel);
    case LossKind::kIvl: return ivl(out.vel, b.gt_vel, b.gt_pos, b.dt);
    case LossKind::kCnl: return cnl(out.vel, out.cov, b.gt_vel);
    case LossKind::kIvlCnl: {
      const MultiTaskParams mt{loss_params.get("loss.log_var_v"),
                               loss_params.get("loss.log_var_c")};
      return multitask_loss(ivl(out.vel, b.gt_vel, b.gt_pos, b.dt),
                            cnl(out.vel, out.cov, b.gt_vel), mt);
    }
  }
  throw ConfigError("unknown loss kind");
}

std::size_t resolve_step(int configured, const ImuSequence& seq) {
  return configured > 0 ? static_cast<std::size_t>(configured) : default_step(kind_of(seq));
}

template <typename T>
void take_subset(std::vector<T>& items, int cap, std::mt19937_64& rng) {
  if (cap <= 0 || items.size() <= static_cast<std::size_t>(cap)) return;
  std::shuffle(items.begin(), items.end(), rng);
  items.resize(static_cast<std::size_t>(cap));
}

}  // namespace

std::vector<Window> sequence_windows(const ImuSequence& seq, Phase phase,
                                     const WindowOptions& opts) {
  const auto orient = orientation_stream(seq, select_orientation(kind_of(seq), phase));
  return make_windows(seq, std::span<const UnitQuaternion>(orient), opts);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> input_statistics(const std::vector<Window>& windows) {
  if (windows.empty()) throw DataError("no windows for input statistics");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd std = Eigen::VectorXd::Ones(6);
  for (int base : {0, 3}) {
    double horiz_sq = 0.0, z_sum = 0.0, z_sq = 0.0;
    double n = 0.0;
    for (const auto& w : windows) {
      horiz_sq += w.imu.col(base).squaredNorm() + w.imu.col(base + 1).squaredNorm();
      z_sum += w.imu.col(base + 2).sum();
      z_sq += w.imu.col(base + 2).squaredNorm();
      n += static_cast<double>(w.imu.rows());
    }
    const double h_std = std::sqrt(horiz_sq / (2.0 * n));
    const double z_mean = z_sum / n;
    const double z_std = std::sqrt(std::max(z_sq / n - z_mean * z_mean, 0.0));
    std(base) = std(base + 1) = h_std > 1e-8 ? h_std : 1.0;
    mean(base + 2) = z_mean;
    std(base + 2) = z_std > 1e-8 ? z_std : 1.0;
  }
  return {mean, std};
}

double validation_loss(CtinModel& model, const ad::ParamStore& loss_params,
                       const TrainConfig& cfg, const std::vector<Window>& windows) {
  if (windows.empty()) throw DataError("empty validation set");
  double total = 0.0;
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t i = 0; i < windows.size(); i += bs) {
    std::vector<const Window*> ws;
    for (std::size_t k = i; k < std::min(i + bs, windows.size()); ++k) ws.push_back(&windows[k]);
    const Batch b = make_batch(ws);
    const ModelOutput out = model.forward(b.imu, {Mode::kEval, nullptr, nullptr});
    total += compute_loss(cfg.loss_kind, out, b, loss_params).value().item() *
             static_cast<double>(ws.size());
  }
  return total / static_cast<double>(windows.size());
}

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const std::vector<const ImuSequence*>& train_seqs,
                  const std::vector<const ImuSequence*>& val_seqs, const TrainHooks& hooks) {
  cfg.validate();
  model_cfg.validate();
  if (train_seqs.empty()) throw DataError("training split is empty");
  if (val_seqs.empty()) throw DataError("validation split is empty");
  const auto m = static_cast<std::size_t>(model_cfg.window_len);

  TrainResult res;
  res.model = std::make_unique<CtinModel>(model_cfg);
  CtinModel& model = *res.model;
  if (cfg.loss_kind == LossKind::kIvlCnl) MultiTaskParams::create(res.loss_params);

  // Orientation streams and window start grids per training sequence.
  std::vector<std::vector<UnitQuaternion>> orient;
  for (const auto* s : train_seqs) {
    s->validate();
    orient.push_back(orientation_stream(*s, select_orientation(kind_of(*s), Phase::kTrain)));
  }

  {
    std::vector<Window> plain;
    for (std::size_t i = 0; i < train_seqs.size(); ++i) {
      WindowOptions o{m, resolve_step(cfg.train_step, *train_seqs[i]), 0, 0};
      auto ws = make_windows(*train_seqs[i], std::span<const UnitQuaternion>(orient[i]), o);
      plain.insert(plain.end(), std::make_move_iterator(ws.begin()),
                   std::make_move_iterator(ws.end()));
    }
    const auto [mean, std] = input_statistics(plain);
    model.set_input_normalization(mean, std);
  }

  std::vector<Window> val_windows;
  for (const auto* s : val_seqs) {
    s->validate();
    const std::size_t step = cfg.eval_step > 0 ? static_cast<std::size_t>(cfg.eval_step) : m;
    auto ws = sequence_windows(*s, Phase::kValidate, {m, step, 0, 0});
    val_windows.insert(val_windows.end(), std::make_move_iterator(ws.begin()),
                       std::make_move_iterator(ws.end()));
  }
  {
    std::mt19937_64 vrng(mix_seed(cfg.rng_seed, 0x5a17, 0));
    take_subset(val_windows, cfg.max_val_windows, vrng);
  }

  std::mt19937_64 rng(cfg.rng_seed);
  long step_count = 0;
  ad::ParamStore::Snapshot best_model;
  ad::ParamStore::Snapshot best_loss;
  const std::vector<ad::ParamStore*> stores{&model.params(), &res.loss_params};

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();

    // Shifted window grid for this epoch, then a seeded subset and order.
    std::vector<std::pair<std::size_t, std::size_t>> picks;
    for (std::size_t i = 0; i < train_seqs.size(); ++i) {
      const std::size_t step = resolve_step(cfg.train_step, *train_seqs[i]);
      WindowOptions o{m, step, static_cast<std::size_t>(cfg.random_shift),
                      mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(epoch), i)};
      for (std::size_t s : window_starts(train_seqs[i]->size(), o)) picks.emplace_back(i, s);
    }
    std::shuffle(picks.begin(), picks.end(), rng);
    take_subset(picks, cfg.max_train_windows, rng);

    double loss_sum = 0.0;
    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t first = 0; first < picks.size(); first += bs) {
      const std::size_t last = std::min(first + bs, picks.size());
      std::vector<Window> batch_windows;
      for (std::size_t k = first; k < last; ++k) {
        const auto [si, start] = picks[k];
        Window w = make_window(*train_seqs[si], std::span<const UnitQuaternion>(orient[si]),
                               start, m);
        if (cfg.augment_yaw) {
          std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
          w = augment_yaw(w, angle(rng));
        }
        if (cfg.perturb_bias) w = perturb_bias(w, rng, cfg.bias_frame);
        batch_windows.push_back(std::move(w));
      }
      if (hooks.on_train_batch) hooks.on_train_batch(epoch, batch_windows);
      std::vector<const Window*> ptrs;
      for (const auto& w : batch_windows) ptrs.push_back(&w);
      const Batch b = make_batch(ptrs);
      const ModelOutput out = model.forward(b.imu, {Mode::kTrain, &rng, nullptr});
      const Var loss = compute_loss(cfg.loss_kind, out, b, res.loss_params);
      const double lv = loss.value().item();
      if (!std::isfinite(lv)) {
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(first / bs));
      }
      loss_sum += lv * static_cast<double>(ptrs.size());
      ad::backward(loss);
      clip_grad_norm(stores, cfg.grad_clip);
      ++step_count;
      for (auto* s : stores) {
        adam_step(*s, cfg, step_count);
        s->zero_grad();
      }
    }

    EpochRecord rec;
    rec.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(picks.size(), 1));
    if (hooks.on_validation) {
      hooks.on_validation({epoch, Mode::kEval, false, val_windows.size()});
    }
    rec.val_loss = validation_loss(model, res.loss_params, cfg, val_windows);
    if (hooks.validation_override) rec.val_loss = hooks.validation_override(epoch, rec.val_loss);
    if (!std::isfinite(rec.val_loss)) {
      throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.history.epochs.push_back(rec);
    if (res.history.best_epoch < 0 || rec.val_loss < res.history.best_val_loss()) {
      res.history.best_epoch = epoch;
      best_model = model.params().snapshot();
      best_loss = res.loss_params.snapshot();
    }
    if (hooks.on_epoch) hooks.on_epoch(epoch, rec);
    if (early_stop(res.history, cfg.patience)) {
      res.history.stop_reason = "early_stop";
      break;
    }
  }
  if (res.history.stop_reason.empty()) res.history.stop_reason = "max_epochs";
  model.params().restore(best_model);
  res.loss_params.restore(best_loss);
  return res;
}

std::vector<std::size_t> evaluation_starts(std::size_t sequence_len, std::size_t window_len,
                                           std::size_t step) {
  if (window_len > sequence_len) {
    throw DataError("sequence of " + std::to_string(sequence_len) +
                    " samples is shorter than the window length " + std::to_string(window_len));
  }
  if (step == 0) step = window_len;
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + window_len <= sequence_len; s += step) starts.push_back(s);
  if (starts.back() + window_len < sequence_len) starts.push_back(sequence_len - window_len);
  return starts;
}

RowMatrix sequence_velocity(const ImuSequence& seq) {
  return window_ground_truth(seq, 0, seq.size(), seq.dt()).gt_vel;
}

MetricReport evaluate_predictor(const std::vector<const NamedSequence*>& seqs,
                                const VelocityPredictor& predictor, std::size_t window_len,
                                std::size_t eval_step, const MetricConfig& metric_cfg) {
  MetricReport report;
  constexpr std::size_t kBatch = 32;
  for (const auto* ns : seqs) {
    const ImuSequence& seq = ns->seq;
    seq.validate();
    const auto orient = orientation_stream(seq, select_orientation(kind_of(seq), Phase::kTest));
    const auto starts = evaluation_starts(seq.size(), window_len, eval_step);
    std::vector<WindowVelocity> est;
    for (std::size_t i = 0; i < starts.size(); i += kBatch) {
      std::vector<Window> ws;
      for (std::size_t k = i; k < std::min(i + kBatch, starts.size()); ++k) {
        ws.push_back(make_window(seq, std::span<const UnitQuaternion>(orient), starts[k],
                                 window_len));
      }
      std::vector<const Window*> ptrs;
      for (const auto& w : ws) ptrs.push_back(&w);
      auto vels = predictor(ptrs);
      if (vels.size() != ws.size()) throw DimensionError("predictor returned wrong batch size");
      for (std::size_t k = 0; k < ws.size(); ++k) {
        est.push_back({ws[k].origin_index, std::move(vels[k])});
      }
    }
    const RowMatrix vel = stitch_velocities(est, seq.size());
    Trajectory gt{seq.timestamps, seq.gt_positions};
    gt = gt.planar();
    const Vec2 p0 = gt.positions.front().head<2>();
    const Trajectory pred = integrate_velocity(vel, p0, seq.dt(), seq.timestamps.front());
    SequenceMetrics sm = compute_metrics(ns->name, gt, pred, seq.meta.sample_rate_hz, metric_cfg);
    sm.vel_mse = (vel - sequence_velocity(seq)).array().square().mean();
    report.sequences.push_back(sm);
  }
  return report;
}

MetricReport evaluate(CtinModel& model, const std::vector<const NamedSequence*>& seqs,
                      const MetricConfig& metric_cfg, std::size_t eval_step) {
  const VelocityPredictor predictor = [&model](const std::vector<const Window*>& batch) {
    const Var x = ad::constant(windows_to_batch(batch));
    const ModelOutput out = model.forward(x, {Mode::kEval, nullptr, nullptr});
    const auto m = static_cast<Eigen::Index>(batch.front()->length());
    std::vector<RowMatrix> vels;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      vels.emplace_back(Eigen::Map<const RowMatrix>(
          out.vel.value().data() + i * static_cast<std::size_t>(m) * 2, m, 2));
    }
    return vels;
  };
  MetricReport r = evaluate_predictor(seqs, predictor,
                                      static_cast<std::size_t>(model.config().window_len),
                                      eval_step, metric_cfg);
  r.method = "ctin";
  return r;
}

BaselineMethod parse_baseline_method(std::string_view name) {
  if (name == "sins") return BaselineMethod::kSins;
  if (name == "pdr") return BaselineMethod::kPdr;
  throw ConfigError("unknown baseline method: " + std::string(name));
}

std::string to_string(BaselineMethod method) {
  return method == BaselineMethod::kSins ? "sins" : "pdr";
}

MetricReport evaluate_baseline(const std::vector<const NamedSequence*>& seqs,
                               BaselineMethod method, const BaselineOptions& opts,
                               const MetricConfig& metric_cfg) {
  MetricReport report;
  report.method = to_string(method);
  for (const auto* ns : seqs) {
    ImuSequence seq = ns->seq;
    seq.validate();
    for (auto& w : seq.gyro) w += opts.gyro_bias;
    const OrientationSource source =
        opts.orientation.value_or(select_orientation(kind_of(seq), Phase::kTest));
    Trajectory pred = method == BaselineMethod::kSins
                          ? sins_integrate(seq, source, initial_state_from_truth(seq))
                          : pdr_track(seq, opts.stride_m, source);
    pred = pred.planar();
    Trajectory gt{seq.timestamps, seq.gt_positions};
    gt = gt.planar();
    SequenceMetrics sm = compute_metrics(ns->name, gt, pred, seq.meta.sample_rate_hz, metric_cfg);
    const auto n = static_cast<Eigen::Index>(seq.size());
    RowMatrix vel(n, 2);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      vel.row(i) = (pred.positions[static_cast<std::size_t>(i + 1)] -
                    pred.positions[static_cast<std::size_t>(i)])
                       .head<2>()
                       .transpose() /
                   seq.dt();
    }
    vel.row(n - 1) = n > 1 ? RowMatrix(vel.row(n - 2)) : RowMatrix::Zero(1, 2);
    sm.vel_mse = (vel - sequence_velocity(seq)).array().square().mean();
    report.sequences.push_back(sm);
  }
  return report;
}

}  // namespace ctin
