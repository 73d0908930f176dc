#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctin/autodiff/param_store.hpp"
#include "ctin/baselines.hpp"
#include "ctin/dataio.hpp"
#include "ctin/losses.hpp"
#include "ctin/metrics.hpp"
#include "ctin/model.hpp"
#include "ctin/pipeline.hpp"

namespace ctin {

enum class LossKind { kMse, kIvl, kCnl, kIvlCnl };

LossKind parse_loss_kind(std::string_view name);
std::string to_string(LossKind kind);

struct TrainConfig {
  double lr = 5e-4;
  double weight_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 10.0;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 30;
  LossKind loss_kind = LossKind::kIvlCnl;
  std::uint64_t rng_seed = 0;
  std::array<double, 3> split{0.8, 0.1, 0.1};
  // Window extraction. train_step 0 means the dataset default.
  int train_step = 0;
  int random_shift = 0;  // max shift, must be below the step
  int eval_step = 0;     // 0 means non-overlapping windows
  int max_train_windows = 0;  // per-epoch random subset; 0 keeps all
  int max_val_windows = 0;
  bool augment_yaw = true;
  bool perturb_bias = true;
  BiasFrame bias_frame = BiasFrame::kNavigation;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochRecord {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_time_s = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  std::string stop_reason;

  double best_val_loss() const;
};

/// Serialized history. Wall times are left out unless asked for, so equal
/// runs give identical documents.
nlohmann::json to_json(const TrainHistory& h, bool include_timing = false);
TrainHistory train_history_from_json(const nlohmann::json& j);

/// Adam with bias correction (step_count starts at 1) plus decoupled weight
/// decay theta -= lr * wd * theta. Reads gradients from every trainable entry.
void adam_step(ad::ParamStore& store, const TrainConfig& cfg, long step_count);

/// Scales all trainable gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(const std::vector<ad::ParamStore*>& stores, double max_norm);

/// True once the best (strictly lowest) validation loss is `patience` or
/// more epochs old.
bool early_stop(const TrainHistory& history, int patience);

struct NamedSequence {
  std::string name;
  ImuSequence seq;
};

std::vector<NamedSequence> load_dataset(const std::filesystem::path& dir);

struct DatasetSplit {
  std::vector<std::size_t> train, validation, test;
};

/// Seeded shuffle of sequence indices cut by the ratios.
DatasetSplit split_dataset(std::size_t n, const std::array<double, 3>& ratios,
                           std::uint64_t seed);

/// Windows of a sequence with the orientation source chosen for `phase`.
std::vector<Window> sequence_windows(const ImuSequence& seq, Phase phase,
                                     const WindowOptions& opts);

/// Yaw-invariant standardization: the horizontal axes of each triplet share a
/// zero mean and a pooled std; the vertical axis uses its own moments.
std::pair<Eigen::VectorXd, Eigen::VectorXd> input_statistics(const std::vector<Window>& windows);

struct ValidationProbe {
  int epoch = 0;
  ad::Mode mode = ad::Mode::kEval;
  bool augmented = false;
  std::size_t windows = 0;
};

struct TrainHooks {
  // When set, maps the computed validation loss to the value recorded.
  std::function<double(int epoch, double computed)> validation_override;
  std::function<void(const ValidationProbe&)> on_validation;
  std::function<void(int epoch, const EpochRecord&)> on_epoch;
  // Sees each training batch after augmentation.
  std::function<void(int epoch, const std::vector<Window>&)> on_train_batch;
};

struct TrainResult {
  std::unique_ptr<CtinModel> model;
  ad::ParamStore loss_params;
  TrainHistory history;
};

/// Runs the optimization loop on prepared train/validation sequences.
TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const std::vector<const ImuSequence*>& train_seqs,
                  const std::vector<const ImuSequence*>& val_seqs, const TrainHooks& hooks = {});

/// Loss of the configured kind over windows in eval mode.
double validation_loss(CtinModel& model, const ad::ParamStore& loss_params,
                       const TrainConfig& cfg, const std::vector<Window>& windows);

/// Maps a batch of windows to per-window m x 2 velocity predictions.
using VelocityPredictor =
    std::function<std::vector<RowMatrix>(const std::vector<const Window*>& batch)>;

/// Windows at eval_step (default non-overlapping plus a final tail window).
std::vector<std::size_t> evaluation_starts(std::size_t sequence_len, std::size_t window_len,
                                           std::size_t step);

/// Per-sequence metrics of a predictor, trajectories integrated from the
/// ground-truth start position.
MetricReport evaluate_predictor(const std::vector<const NamedSequence*>& seqs,
                                const VelocityPredictor& predictor, std::size_t window_len,
                                std::size_t eval_step, const MetricConfig& metric_cfg);

MetricReport evaluate(CtinModel& model, const std::vector<const NamedSequence*>& seqs,
                      const MetricConfig& metric_cfg, std::size_t eval_step = 0);

enum class BaselineMethod { kSins, kPdr };

BaselineMethod parse_baseline_method(std::string_view name);
std::string to_string(BaselineMethod method);

struct BaselineOptions {
  // Added to every gyro sample before integration.
  Vec3 gyro_bias = Vec3::Zero();
  // Unset uses the dataset's test-phase policy.
  std::optional<OrientationSource> orientation;
  double stride_m = 0.67;
};

/// Runs SINS or PDR on each sequence and scores it like a model. vel_mse uses
/// forward differences of the baseline's horizontal positions.
MetricReport evaluate_baseline(const std::vector<const NamedSequence*>& seqs,
                               BaselineMethod method, const BaselineOptions& opts,
                               const MetricConfig& metric_cfg);

/// Forward differences of the ground-truth horizontal positions over the
/// whole sequence, last row repeated.
RowMatrix sequence_velocity(const ImuSequence& seq);

}  // namespace ctin
