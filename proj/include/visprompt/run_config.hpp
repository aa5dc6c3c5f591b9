#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "visprompt/task_id.hpp"

namespace visprompt {

/// Training arm. Each arm fixes the packing order and answer-mask strategy:
///   promptgip  Q1-A1-Q2-A2, mask both answers
///   painter    Q1-Q2-A1-A2, mask both answers
///   direct     Q1-A1-Q2-A2, mask only the last answer
enum class Variant { PromptGip, Painter, Direct };

std::string_view variant_name(Variant v);
Variant variant_from_name(std::string_view name);

struct RunConfig {
  std::uint64_t seed = 0;
  int image_size = 32;
  int patch_size = 8;
  int embed_dim = 128;
  int depth = 4;
  int heads = 4;
  int mlp_ratio = 4;
  double mask_ratio = 0.85;
  double base_lr = 1e-4;
  int batch_size = 16;
  int steps = 5000;
  Variant variant = Variant::PromptGip;
  std::vector<TaskId> tasks{kAllTasks.begin(), kAllTasks.end()};
  int corpus_size = 1000;
  std::string out_dir = "run";

  // Recipe values the reference recipe leaves unstated.
  double weight_decay = 0.05;
  double warmup_frac = 0.05;
  double grad_clip = 1.0;
  int log_every = 1;
  int checkpoint_every = 1000;
  int threads = 1;
  /// Fraction of training episodes built from mixed degradations.
  double mixed_fraction = 0.0;
  /// Per-task parameter pins, e.g. {"gauss_noise": {"sigma_255": 25}}.
  nlohmann::json task_overrides = nlohmann::json::object();

  int patches_per_side() const { return image_size / patch_size; }
  int patches_per_image() const { return patches_per_side() * patches_per_side(); }

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  /// The two-task desk-scale setup: Gaussian noise pinned at sigma 25 and
  /// Canny edges.
  static RunConfig two_task_default();
};

nlohmann::json to_json(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& cfg);

}  // namespace visprompt
