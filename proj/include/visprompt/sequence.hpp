#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "visprompt/image.hpp"
#include "visprompt/rng.hpp"
#include "visprompt/taskbank.hpp"

namespace visprompt {

/// Image roles inside an episode. Slot ids are stable across packing orders.
enum Slot : int { kQ1 = 0, kA1 = 1, kQ2 = 2, kA2 = 3 };
inline constexpr int kSlots = 4;

enum class Order { QAQA, QQAA };
enum class MaskStrategy { MaskBoth, MaskLast, FullMaskA2 };

std::string_view order_name(Order o);
std::string_view mask_strategy_name(MaskStrategy m);

struct MaskPlan {
  MaskStrategy strategy = MaskStrategy::MaskBoth;
  double ratio = 0.85;
};

/// Flat patch list: patch k occupies values [k * dim, (k + 1) * dim) with
/// dim = p * p * 3. Patches are row-major over the grid; inside a patch,
/// pixels are row-major with interleaved channels.
std::vector<float> patchify(const Image& img, int p);
Image unpatchify(const std::vector<float>& patches, int height, int width, int p);

struct TokenSequence {
  int patch_size = 0;
  int image_height = 0;
  int image_width = 0;
  int patches_per_image = 0;
  Order order = Order::QAQA;
  /// length() x token_dim() row-major.
  std::vector<float> tokens;
  std::vector<int> slot_of;
  std::vector<int> patch_index;
  std::vector<std::uint8_t> masked;

  int token_dim() const { return patch_size * patch_size * Image::kChannels; }
  int length() const { return kSlots * patches_per_image; }
  const float* token(int i) const { return tokens.data() + static_cast<std::size_t>(i) * token_dim(); }
  float* token(int i) { return tokens.data() + static_cast<std::size_t>(i) * token_dim(); }

  /// Position of slot `s` in the packing order.
  int block_of_slot(int s) const;
  /// Index of the first token belonging to slot `s`.
  int first_token(int s) const { return block_of_slot(s) * patches_per_image; }

  std::vector<int> mask_indices() const;
  int masked_count() const;
};

/// Slot order of the four blocks for a packing order.
std::array<int, kSlots> slot_sequence(Order order);

TokenSequence pack_images(const std::array<const Image*, kSlots>& slots, int p, Order order);
TokenSequence pack_episode(const Episode& ep, int p, Order order);
/// Reassembles the image for slot `s` from the token contents.
Image unpack_slot(const TokenSequence& seq, int s);
/// Same, reading patch vectors from `values` laid out like seq.tokens.
Image unpack_slot(const TokenSequence& seq, int s, const std::vector<float>& values);

/// Masked tokens per answer image: max(1, round(ratio * patches_per_image)).
int mask_count(double ratio, int patches_per_image);

/// Replaces the mask set according to `plan`.
void sample_mask(TokenSequence& seq, const MaskPlan& plan, Rng& rng);

}  // namespace visprompt
