#include "visprompt/image.hpp"

#include <cmath>
#include <string>

#include "visprompt/error.hpp"

namespace visprompt {

Image::Image(int h, int w, float fill) : height(h), width(w) {
  if (h <= 0 || w <= 0) {
    throw ShapeError("image dimensions must be positive, got " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
  data.assign(static_cast<std::size_t>(h) * w * kChannels, fill);
}

Plane::Plane(int h, int w, double fill) : height(h), width(w) {
  if (h <= 0 || w <= 0) {
    throw ShapeError("plane dimensions must be positive, got " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
  data.assign(static_cast<std::size_t>(h) * w, fill);
}

void clamp_inplace(Image& img) {
  for (float& v : img.data) {
    v = std::isnan(v) ? 0.0f : clamp01(v);
  }
}

Image clamped(Image img) {
  clamp_inplace(img);
  return img;
}

Plane extract_channel(const Image& img, int c) {
  Plane p(img.height, img.width);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    p.data[i] = img.data[i * Image::kChannels + c];
  }
  return p;
}

void insert_channel(Image& img, int c, const Plane& plane) {
  if (plane.height != img.height || plane.width != img.width) {
    throw ShapeError("insert_channel: plane and image differ in size");
  }
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    img.data[i * Image::kChannels + c] = static_cast<float>(plane.data[i]);
  }
}

Plane luma(const Image& img) {
  Plane p(img.height, img.width);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const float* px = &img.data[i * Image::kChannels];
    p.data[i] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }
  return p;
}

Image gray_to_rgb(const Plane& plane) {
  Image out(plane.height, plane.width);
  for (std::size_t i = 0; i < plane.size(); ++i) {
    const float v = clamp01(static_cast<float>(plane.data[i]));
    for (int c = 0; c < Image::kChannels; ++c) out.data[i * Image::kChannels + c] = v;
  }
  return out;
}

double mean(const Image& img) {
  double s = 0.0;
  for (float v : img.data) s += v;
  return img.data.empty() ? 0.0 : s / static_cast<double>(img.data.size());
}

double channel_mean(const Image& img, int c) {
  double s = 0.0;
  for (std::size_t i = 0; i < img.pixel_count(); ++i) s += img.data[i * Image::kChannels + c];
  return s / static_cast<double>(img.pixel_count());
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": dimension mismatch " + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                     std::to_string(b.width));
  }
}

}  // namespace visprompt
