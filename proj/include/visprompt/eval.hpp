#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "visprompt/image.hpp"
#include "visprompt/run_config.hpp"
#include "visprompt/taskbank.hpp"
#include "visprompt/vit.hpp"

namespace visprompt {

// --- metrics ---------------------------------------------------------------

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE) over all RGB entries; identical images give kPsnrCap.
double psnr(const Image& a, const Image& b);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, L = 1, valid positions only, averaged over RGB.
double ssim(const Image& a, const Image& b);
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

/// 255 * mean |a - b| over all RGB entries.
double mae(const Image& a, const Image& b);

struct Metrics {
  double psnr = 0.0;
  double ssim = 0.0;
  double mae = 0.0;
};
Metrics compute_metrics(const Image& out, const Image& target);

// --- inference -------------------------------------------------------------

/// Packs (prompt.Q, prompt.A, query, placeholder) with A2 fully masked and
/// reads the prediction for the A2 slot.
Image infer(const ModelParams<float>& model, const Image& prompt_q, const Image& prompt_a,
            const Image& query, Order order = Order::QAQA);
Image infer(const ModelParams<float>& model, const QAPair& prompt, const Image& query,
            Order order = Order::QAQA);
/// Batched form: one prompt, many queries.
std::vector<Image> infer_many(const ModelParams<float>& model, const QAPair& prompt,
                              const std::vector<Image>& queries, Order order = Order::QAQA);

// --- evaluation sets -------------------------------------------------------

/// Held-out clean images and prompt sources use their own streams so they
/// never coincide with the training corpus.
std::vector<Image> test_corpus(const RunConfig& cfg, int n);
std::vector<Image> prompt_corpus(const RunConfig& cfg, int n);

/// Query pairs for `task` built from the test corpus.
std::vector<QAPair> make_test_pairs(const RunConfig& cfg, TaskId task, int n);

/// Prompt pair number `prompt_id` for `task`.
QAPair make_prompt(const RunConfig& cfg, TaskId task, std::uint64_t prompt_id);

struct EvalRow {
  int image = 0;
  Metrics output;    ///< model answer vs target
  Metrics baseline;  ///< question vs target
};

struct TaskEval {
  TaskId task = TaskId::GaussNoise;
  std::uint64_t prompt_id = 0;
  std::vector<EvalRow> rows;
  Metrics mean_output;
  Metrics mean_baseline;
  std::vector<Image> outputs;
};

TaskEval evaluate_task(const ModelParams<float>& model, const QAPair& prompt,
                       const std::vector<QAPair>& tests, Order order = Order::QAQA);

// --- prompt sweep ----------------------------------------------------------

struct Aggregate {
  Metrics best;
  Metrics avg;
  Metrics std;  ///< population standard deviation
};

/// best = max PSNR/SSIM and min MAE; avg and population std per metric.
Aggregate aggregate(const std::vector<Metrics>& per_prompt);

struct SweepReport {
  TaskId task = TaskId::GaussNoise;
  std::vector<std::uint64_t> prompt_ids;
  std::vector<Metrics> per_prompt;  ///< mean over the test set per prompt
  Aggregate agg;
};

SweepReport sweep(const ModelParams<float>& model, const RunConfig& cfg, TaskId task,
                  const std::vector<QAPair>& tests, int n_prompts, Order order = Order::QAQA);

// --- report files ----------------------------------------------------------

std::string format_metric(double v);
void write_eval_csv(const std::filesystem::path& path, const TaskEval& ev);
/// One row per prompt followed by `avg` and `std` rows (n + 2 rows); the
/// `best` column marks the best prompt by PSNR (by MAE for edge tasks).
void write_sweep_csv(const std::filesystem::path& path, const SweepReport& rep);
/// best / avg / std rows for every metric.
void write_sweep_summary(const std::filesystem::path& path, const SweepReport& rep);
/// Index of the best prompt by PSNR, or by MAE for edge tasks.
std::size_t best_prompt(const SweepReport& rep);
/// Horizontal strip: query | output | target, separated by a 1-pixel gap.
Image make_grid(const std::vector<Image>& images);

bool is_edge_task(TaskId task);

}  // namespace visprompt
