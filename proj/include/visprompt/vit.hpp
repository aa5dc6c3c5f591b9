#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "visprompt/rng.hpp"
#include "visprompt/run_config.hpp"
#include "visprompt/sequence.hpp"

namespace visprompt {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelDims {
  int patch_size = 8;
  int patches_per_image = 16;
  int embed_dim = 128;
  int depth = 4;
  int heads = 4;
  int mlp_ratio = 4;

  int token_dim() const { return patch_size * patch_size * 3; }
  int hidden_dim() const { return embed_dim * mlp_ratio; }
  int head_dim() const { return embed_dim / heads; }
  int seq_len() const { return kSlots * patches_per_image; }

  static ModelDims from_config(const RunConfig& cfg);
  void validate() const;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

template <typename T>
struct BlockParams {
  Mat<T> ln1_g, ln1_b;
  Mat<T> qkv_w, qkv_b;
  Mat<T> proj_w, proj_b;
  Mat<T> ln2_g, ln2_b;
  Mat<T> fc1_w, fc1_b;
  Mat<T> fc2_w, fc2_b;
};

template <typename T>
struct ParamRef {
  std::string name;
  Mat<T>* value;
  bool decay;  ///< linear-layer weight matrix (receives weight decay)
};

/// Learnable tensors. Linear layers compute y = x W + b with row-vector
/// activations, so W is (in x out) and b is (1 x out).
template <typename T>
struct ModelParams {
  ModelDims dims;
  Mat<T> patch_w, patch_b;
  Mat<T> mask_emb;
  Mat<T> pos_emb;   ///< patches_per_image x D, shared across slots
  Mat<T> slot_emb;  ///< 4 x D
  std::vector<BlockParams<T>> blocks;
  Mat<T> lnf_g, lnf_b;
  Mat<T> head_w, head_b;

  /// All tensors zero-filled with the right shapes.
  static ModelParams zeros(const ModelDims& dims);

  /// Stable order: embeddings, blocks (in order), final norm, head.
  std::vector<ParamRef<T>> refs();
  std::vector<ParamRef<T>> refs() const;

  std::size_t parameter_count() const;
  bool all_finite() const;

  template <typename U>
  ModelParams<U> cast() const;
};

/// Truncated normal (std 0.02, cut at 3 std) for weights and embeddings,
/// zero biases, LN gamma 1 and beta 0.
template <typename T>
ModelParams<T> init_params(const ModelDims& dims, std::uint64_t seed);
inline constexpr double kInitStd = 0.02;

/// A batch of packed sequences stacked along rows.
template <typename T>
struct Batch {
  int batch = 0;
  int seq_len = 0;
  Mat<T> tokens;  ///< (batch * seq_len) x token_dim
  std::vector<int> slot;
  std::vector<int> pos;
  std::vector<std::uint8_t> masked;
};

template <typename T>
Batch<T> make_batch(const std::vector<const TokenSequence*>& seqs);

template <typename T>
struct BlockTape {
  Mat<T> xhat1, a;
  std::vector<T> rstd1;
  Mat<T> qkv;
  std::vector<Mat<T>> probs;  ///< batch * heads matrices, seq_len x seq_len
  Mat<T> ctx;
  Mat<T> xhat2, c;
  std::vector<T> rstd2;
  Mat<T> u, g;
};

/// Activations cached by forward; backward consumes it once.
template <typename T>
struct ForwardTape {
  int batch = 0;
  int seq_len = 0;
  Mat<T> x_unmasked;  ///< input tokens with masked rows zeroed
  std::vector<int> slot;
  std::vector<int> pos;
  std::vector<std::uint8_t> masked;
  std::vector<BlockTape<T>> blocks;
  Mat<T> xhatf, z;
  std::vector<T> rstdf;
  Mat<T> pred;
  bool consumed = false;
  bool filled = false;
};

inline constexpr double kLayerNormEps = 1e-5;

/// Per-token pixel predictions in (0,1), (batch * seq_len) x token_dim.
template <typename T>
Mat<T> forward(const ModelParams<T>& params, const Batch<T>& batch, ForwardTape<T>* tape = nullptr);

/// Gradients of sum(d_pred .* pred) w.r.t. every parameter.
template <typename T>
ModelParams<T> backward(const ModelParams<T>& params, ForwardTape<T>& tape, const Mat<T>& d_pred);

/// Convenience single-sequence forward.
Mat<float> predict(const ModelParams<float>& params, const TokenSequence& seq);

struct GradCheckConfig {
  ModelDims dims{4, 4, 16, 2, 2, 4};  ///< 8x8 images, p = 4, D = 16, depth 2
  double eps = 1e-4;
  int min_samples = 256;
  int per_tensor = 8;
  /// Parameters are moved away from their initial scale by N(0, jitter)
  /// so that gradients are well above round-off.
  double jitter = 0.1;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  int samples = 0;
  std::string worst_param;
};

/// Central finite differences in double precision against the analytic
/// backward pass for a smooth random-projection loss.
GradCheckResult grad_check(const GradCheckConfig& cfg, std::uint64_t seed);

// --- checkpoints -------------------------------------------------------

struct Checkpoint {
  RunConfig config;
  ModelParams<float> params;
  /// Optimizer moments (empty unless saved for resuming).
  std::vector<Mat<float>> adam_m;
  std::vector<Mat<float>> adam_v;
  std::int64_t step = 0;
};

/// Writes `path` (tensor archive) and `path + ".json"` (config sidecar).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& path);

extern template struct ModelParams<float>;
extern template struct ModelParams<double>;

}  // namespace visprompt
