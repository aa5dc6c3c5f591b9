#include "visprompt/sequence.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "visprompt/error.hpp"

namespace visprompt {

std::string_view order_name(Order o) { return o == Order::QAQA ? "QAQA" : "QQAA"; }

std::string_view mask_strategy_name(MaskStrategy m) {
  switch (m) {
    case MaskStrategy::MaskBoth: return "mask_both";
    case MaskStrategy::MaskLast: return "mask_last";
    case MaskStrategy::FullMaskA2: return "full_mask_A2";
  }
  return "unknown";
}

std::vector<float> patchify(const Image& img, int p) {
  if (p < 1 || img.height % p != 0 || img.width % p != 0) {
    throw ShapeError("patchify: " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                     " is not divisible by patch size " + std::to_string(p));
  }
  const int gy = img.height / p;
  const int gx = img.width / p;
  const int dim = p * p * Image::kChannels;
  std::vector<float> out(static_cast<std::size_t>(gy) * gx * dim);
  std::size_t k = 0;
  for (int py = 0; py < gy; ++py)
    for (int px = 0; px < gx; ++px)
      for (int y = 0; y < p; ++y)
        for (int x = 0; x < p; ++x)
          for (int c = 0; c < Image::kChannels; ++c) out[k++] = img.at(py * p + y, px * p + x, c);
  return out;
}

Image unpatchify(const std::vector<float>& patches, int height, int width, int p) {
  if (p < 1 || height % p != 0 || width % p != 0) {
    throw ShapeError("unpatchify: dimensions not divisible by patch size");
  }
  if (patches.size() != static_cast<std::size_t>(height) * width * Image::kChannels) {
    throw ShapeError("unpatchify: patch data has the wrong length");
  }
  Image img(height, width);
  const int gy = height / p;
  const int gx = width / p;
  std::size_t k = 0;
  for (int py = 0; py < gy; ++py)
    for (int px = 0; px < gx; ++px)
      for (int y = 0; y < p; ++y)
        for (int x = 0; x < p; ++x)
          for (int c = 0; c < Image::kChannels; ++c) img.at(py * p + y, px * p + x, c) = patches[k++];
  return img;
}

std::array<int, kSlots> slot_sequence(Order order) {
  if (order == Order::QAQA) return {kQ1, kA1, kQ2, kA2};
  return {kQ1, kQ2, kA1, kA2};
}

int TokenSequence::block_of_slot(int s) const {
  const auto seq = slot_sequence(order);
  for (int b = 0; b < kSlots; ++b) {
    if (seq[b] == s) return b;
  }
  throw ParameterError("invalid slot " + std::to_string(s));
}

std::vector<int> TokenSequence::mask_indices() const {
  std::vector<int> idx;
  for (int i = 0; i < length(); ++i) {
    if (masked[i] != 0) idx.push_back(i);
  }
  return idx;
}

int TokenSequence::masked_count() const {
  return static_cast<int>(std::count(masked.begin(), masked.end(), std::uint8_t{1}));
}

TokenSequence pack_images(const std::array<const Image*, kSlots>& slots, int p, Order order) {
  const Image& first = *slots[0];
  for (const Image* img : slots) {
    if (!img->same_shape(first)) throw ShapeError("episode images differ in size");
  }
  TokenSequence seq;
  seq.patch_size = p;
  seq.image_height = first.height;
  seq.image_width = first.width;
  seq.order = order;
  std::array<std::vector<float>, kSlots> patches;
  for (int s = 0; s < kSlots; ++s) patches[s] = patchify(*slots[s], p);
  seq.patches_per_image = static_cast<int>(patches[0].size()) / seq.token_dim();
  const int n = seq.length();
  seq.tokens.reserve(static_cast<std::size_t>(n) * seq.token_dim());
  seq.slot_of.reserve(n);
  seq.patch_index.reserve(n);
  for (int s : slot_sequence(order)) {
    seq.tokens.insert(seq.tokens.end(), patches[s].begin(), patches[s].end());
    for (int k = 0; k < seq.patches_per_image; ++k) {
      seq.slot_of.push_back(s);
      seq.patch_index.push_back(k);
    }
  }
  seq.masked.assign(n, 0);
  return seq;
}

TokenSequence pack_episode(const Episode& ep, int p, Order order) {
  return pack_images({&ep.prompt.question, &ep.prompt.answer, &ep.query.question, &ep.query.answer},
                     p, order);
}

Image unpack_slot(const TokenSequence& seq, int s, const std::vector<float>& values) {
  const int dim = seq.token_dim();
  const auto begin = static_cast<std::size_t>(seq.first_token(s)) * dim;
  const auto count = static_cast<std::size_t>(seq.patches_per_image) * dim;
  if (values.size() < begin + count) throw ShapeError("unpack_slot: value buffer too short");
  std::vector<float> patches(values.begin() + begin, values.begin() + begin + count);
  return unpatchify(patches, seq.image_height, seq.image_width, seq.patch_size);
}

Image unpack_slot(const TokenSequence& seq, int s) { return unpack_slot(seq, s, seq.tokens); }

int mask_count(double ratio, int patches_per_image) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ParameterError("mask ratio must lie in (0,1]");
  const long k = std::lround(ratio * patches_per_image);
  return static_cast<int>(std::clamp<long>(k, 1, patches_per_image));
}

namespace {

void mask_random_subset(TokenSequence& seq, int slot, int k, Rng& rng) {
  const int n = seq.patches_per_image;
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  for (int i = 0; i < k; ++i) {
    const auto j = static_cast<int>(rng.uniform_int(i, n - 1));
    std::swap(idx[i], idx[j]);
  }
  const int base = seq.first_token(slot);
  for (int i = 0; i < k; ++i) seq.masked[base + idx[i]] = 1;
}

}  // namespace

void sample_mask(TokenSequence& seq, const MaskPlan& plan, Rng& rng) {
  seq.masked.assign(seq.length(), 0);
  switch (plan.strategy) {
    case MaskStrategy::MaskBoth: {
      const int k = mask_count(plan.ratio, seq.patches_per_image);
      mask_random_subset(seq, kA1, k, rng);
      mask_random_subset(seq, kA2, k, rng);
      break;
    }
    case MaskStrategy::MaskLast:
      mask_random_subset(seq, kA2, mask_count(plan.ratio, seq.patches_per_image), rng);
      break;
    case MaskStrategy::FullMaskA2: {
      const int base = seq.first_token(kA2);
      for (int i = 0; i < seq.patches_per_image; ++i) seq.masked[base + i] = 1;
      break;
    }
  }
}

}  // namespace visprompt
