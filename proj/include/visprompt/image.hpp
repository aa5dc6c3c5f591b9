#pragma once

#include <cstddef>
#include <vector>

namespace visprompt {

/// H x W x 3 RGB image, row-major with interleaved channels. Pixel values
/// live in [0,1]; every public operator clamps its output into that range.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, float fill = 0.0f);

  static constexpr int kChannels = 3;

  float& at(int y, int x, int c) { return data[index(y, x, c)]; }
  float at(int y, int x, int c) const { return data[index(y, x, c)]; }

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * kChannels + c;
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  bool empty() const { return data.empty(); }
  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Single-channel double-precision plane used inside operators.
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Plane() = default;
  Plane(int h, int w, double fill = 0.0);

  double& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return data.size(); }
};

inline float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }
inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

/// Clamps to [0,1] and maps NaN to 0 so nothing non-finite escapes.
void clamp_inplace(Image& img);
Image clamped(Image img);

Plane extract_channel(const Image& img, int c);
void insert_channel(Image& img, int c, const Plane& plane);

/// BT.601 luma: 0.299 R + 0.587 G + 0.114 B.
Plane luma(const Image& img);

/// Replicates a plane into all three channels, clamped to [0,1].
Image gray_to_rgb(const Plane& plane);

/// Applies `fn` to each channel plane and reassembles the image, clamped.
template <typename Fn>
Image map_channels(const Image& img, Fn&& fn) {
  Image out(img.height, img.width);
  for (int c = 0; c < Image::kChannels; ++c) {
    insert_channel(out, c, fn(extract_channel(img, c)));
  }
  clamp_inplace(out);
  return out;
}

double mean(const Image& img);
double channel_mean(const Image& img, int c);

void require_same_shape(const Image& a, const Image& b, const char* what);

}  // namespace visprompt
