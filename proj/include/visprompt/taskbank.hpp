#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "visprompt/degrade.hpp"
#include "visprompt/image.hpp"
#include "visprompt/operators.hpp"
#include "visprompt/rng.hpp"
#include "visprompt/task_id.hpp"

namespace visprompt {

// --- procedural clean corpus ----------------------------------------------

/// Probability that an image gets a sinusoidal grating layer.
inline constexpr double kGratingWeight = 0.35;
/// Probability that an image gets a value-noise texture layer.
inline constexpr double kValueNoiseWeight = 0.5;
inline constexpr double kMinDynamicRange = 0.4;
inline constexpr double kMinChannelMean = 0.2;
inline constexpr double kMaxChannelMean = 0.8;

enum class LayerKind { LinearGradient, RadialGradient, Grating, ValueNoise, Polygon, Circle };

struct CleanImageInfo {
  std::vector<LayerKind> layers;
  int attempts = 0;  ///< parameter draws until the image was accepted
  bool stretched = false;  ///< true if the fallback contrast stretch ran
  bool has(LayerKind k) const;
};

/// One composite image. The layer plan (2-5 layers: a base gradient, then
/// optional grating and value noise, then filled shapes) is drawn first;
/// rejected images re-draw layer parameters under the same plan. Accepted
/// images have luma range >= kMinDynamicRange and every channel mean in
/// [kMinChannelMean, kMaxChannelMean].
Image gen_clean_image(int size, Rng& rng, CleanImageInfo* info = nullptr);

/// Image i is drawn from rng.child("clean", i), so corpora of different
/// lengths share their common prefix.
std::vector<Image> gen_clean_corpus(int n, int size, const Rng& rng,
                                    std::vector<CleanImageInfo>* info = nullptr);

bool corpus_invariants_hold(const Image& img);

// --- Q/A pairs ----------------------------------------------------------

/// Everything needed to rebuild a pair from its clean image.
struct PairSpec {
  TaskId task = TaskId::GaussNoise;
  /// Degradations applied in order (one for a restoration task, two or
  /// three for a mixed pair, empty otherwise).
  std::vector<degrade::DegradationSpec> chain;
  bool mixed = false;
  ops::LowlightParams lowlight;
  std::uint64_t lowlight_seed = 0;
  ops::LocalLaplacianParams llf;
  ops::CannyParams canny;

  friend bool operator==(const PairSpec& a, const PairSpec& b);
};

nlohmann::json to_json(const PairSpec& spec);
PairSpec pair_spec_from_json(const nlohmann::json& j);

struct QAPair {
  Image question;
  Image answer;
  PairSpec spec;

  TaskId task() const { return spec.task; }
};

degrade::Kind degradation_for(TaskId task);

/// Draws task parameters. `overrides` pins named parameters of the task,
/// e.g. {"sigma_255": 25} for gauss_noise.
PairSpec sample_pair_spec(TaskId task, Rng& rng, int image_size,
                          const nlohmann::json& overrides = nlohmann::json::object());
PairSpec sample_mixed_spec(const std::vector<degrade::Kind>& kinds, Rng& rng, int image_size);

/// Deterministic construction of (Q, A) from a clean image.
QAPair build_pair(const Image& clean, const PairSpec& spec);

QAPair make_pair(TaskId task, const Image& clean, Rng& rng,
                 const nlohmann::json& overrides = nlohmann::json::object());

// --- episodes -----------------------------------------------------------

struct Episode {
  QAPair prompt;
  QAPair query;
  /// Empty for mixed-degradation episodes.
  std::optional<TaskId> task;
  std::vector<degrade::Kind> mixed_kinds;
  std::size_t prompt_index = 0;
  std::size_t query_index = 0;
};

/// Per-task override object from a RunConfig-style {"task": {...}} map.
nlohmann::json overrides_for(const nlohmann::json& task_overrides, TaskId task);

/// Two distinct corpus images, each with independently drawn parameters.
Episode make_episode(TaskId task, const std::vector<Image>& corpus, Rng& rng,
                     const nlohmann::json& overrides = nlohmann::json::object());

/// Shares one kind sequence between prompt and query, parameters redrawn.
Episode make_mixed_episode(const std::vector<Image>& corpus, Rng& rng);

TaskId sample_task(const std::vector<TaskId>& tasks, Rng& rng);

}  // namespace visprompt
