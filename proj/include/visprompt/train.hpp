#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "visprompt/run_config.hpp"
#include "visprompt/sequence.hpp"
#include "visprompt/taskbank.hpp"
#include "visprompt/vit.hpp"

namespace visprompt {

struct VariantSpec {
  Order order;
  MaskStrategy mask;
};

/// promptgip = (QAQA, mask_both), painter = (QQAA, mask_both),
/// direct = (QAQA, mask_last). No other combination is constructible.
VariantSpec variant_spec(Variant v);

// --- loss ------------------------------------------------------------------

template <typename T>
struct LossResult {
  double loss = 0.0;
  Mat<T> d_pred;
  std::int64_t entries = 0;  ///< number of masked pixel entries N
};

/// Mean |pred - target| over the entries of masked rows; gradient
/// sign(pred - target) / N on those entries (sign(0) = 0), zero elsewhere.
template <typename T>
LossResult<T> l1_masked_loss(const Mat<T>& pred, const Mat<T>& target,
                             const std::vector<std::uint8_t>& row_mask);

// --- optimizer ---------------------------------------------------------

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

template <typename T>
struct OptState {
  std::vector<Mat<T>> m;
  std::vector<Mat<T>> v;
  std::int64_t step = 0;

  static OptState zeros_like(const ModelParams<T>& params);
};

/// One decoupled-weight-decay Adam step. Decay (theta -= lr * wd * theta)
/// only touches linear-layer weight matrices; the bias-corrected update
/// theta -= lr * m_hat / (sqrt(v_hat) + eps) touches every tensor.
template <typename T>
void adamw_step(ModelParams<T>& params, const ModelParams<T>& grads, OptState<T>& state,
                double lr, const AdamWConfig& cfg = {});

/// The same update for one scalar, used as a reference in tests.
struct ScalarAdamW {
  double theta;
  double m = 0.0;
  double v = 0.0;
  std::int64_t step = 0;
  void update(double grad, double lr, const AdamWConfig& cfg, bool decay);
};

/// Linear warmup over round(warmup_frac * total) steps, then cosine decay
/// to zero at `total`.
double cosine_lr(std::int64_t step, std::int64_t total, double base, double warmup_frac = 0.05);

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename T>
double clip_global_norm(ModelParams<T>& grads, double max_norm);

template <typename T>
double global_norm(const ModelParams<T>& grads);

// --- training loop -----------------------------------------------------

/// Episode construction used by the trainer for item `item` of step `step`.
struct EpisodeDraw {
  Episode episode;
  TokenSequence sequence;
};
EpisodeDraw draw_training_item(const RunConfig& cfg, const std::vector<Image>& corpus,
                               std::int64_t step, int item);

struct StepLog {
  std::int64_t step = 0;  ///< 1-based
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  int masked_tokens = 0;
};

struct TrainOptions {
  /// Resume from this checkpoint (must hold optimizer state).
  std::optional<std::filesystem::path> resume;
  /// Stop after this many total steps (defaults to config.steps) while
  /// keeping the schedule of the full run.
  std::optional<std::int64_t> stop_after;
  /// Called after every step.
  std::function<void(const StepLog&)> on_step;
  /// Write CSV logs and checkpoints below config.out_dir.
  bool write_files = true;
};

struct TrainResult {
  ModelParams<float> params;
  OptState<float> opt;
  std::vector<StepLog> log;
  std::filesystem::path final_checkpoint;
};

/// Uniform task sampling, per-variant packing and masking, masked L1,
/// global-norm clipping, AdamW with the cosine schedule. Files written to
/// config.out_dir: train_log.csv (step,lr,train_loss), packing.csv,
/// config.json, checkpoint.gipt (+ .json), periodic checkpoint_<step>.gipt.
TrainResult train(const RunConfig& config, const TrainOptions& options = {});

/// Moving average over the trailing `window` entries ending at `index`
/// (0-based, inclusive).
double smoothed_loss(const std::vector<StepLog>& log, std::size_t index, std::size_t window);

/// Clean training corpus for a config.
std::vector<Image> training_corpus(const RunConfig& cfg);

}  // namespace visprompt
