#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "visprompt/image.hpp"
#include "visprompt/rng.hpp"

namespace visprompt::testing {

inline Image random_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Image img(h, w);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform01());
  return img;
}

inline Image constant_image(int h, int w, float v) { return Image(h, w, v); }

/// Left `split` columns at `lo`, the rest at `hi`.
inline Image step_image(int h, int w, int split, float lo = 0.0f, float hi = 1.0f) {
  Image img(h, w, lo);
  for (int y = 0; y < h; ++y)
    for (int x = split; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = hi;
  return img;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data[i]) - b.data[i]));
  return m;
}

inline double max_abs_diff(const Plane& a, const Plane& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("visprompt_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace visprompt::testing
