#include "visprompt/pyramid.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <string>

#include "visprompt/error.hpp"
#include "visprompt/filter.hpp"

namespace visprompt {

namespace {

constexpr std::array<double, 5> kBinomial = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

template <typename Fn1d>
Plane apply_rows(const Plane& in, int out_w, Fn1d&& fn) {
  Plane out(in.height, out_w);
  std::vector<double> line(in.width);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) line[x] = in.at(y, x);
    const auto r = fn(line);
    for (int x = 0; x < out_w; ++x) out.at(y, x) = r[x];
  }
  return out;
}

template <typename Fn1d>
Plane apply_cols(const Plane& in, int out_h, Fn1d&& fn) {
  Plane out(out_h, in.width);
  std::vector<double> line(in.height);
  for (int x = 0; x < in.width; ++x) {
    for (int y = 0; y < in.height; ++y) line[y] = in.at(y, x);
    const auto r = fn(line);
    for (int y = 0; y < out_h; ++y) out.at(y, x) = r[y];
  }
  return out;
}

void check_levels(int height, int width, int levels) {
  if (levels < 1) throw ParameterError("pyramid needs at least one level");
  if (levels == 1) return;
  int h = height;
  int w = width;
  for (int l = 1; l < levels; ++l) {
    h = (h + 1) / 2;
    w = (w + 1) / 2;
  }
  if (h < 2 || w < 2) {
    throw ParameterError("pyramid with " + std::to_string(levels) + " levels is too deep for " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
}

}  // namespace

int auto_pyramid_levels(int height, int width) {
  const int m = std::min(height, width);
  const int levels = std::bit_width(static_cast<unsigned>(m)) - 1 - 2;
  return levels < 1 ? 1 : levels;
}

std::vector<double> downsample_1d(const std::vector<double>& in) {
  const int n = static_cast<int>(in.size());
  const int m = (n + 1) / 2;
  std::vector<double> out(m);
  for (int j = 0; j < m; ++j) {
    double acc = 0.0;
    for (int k = -2; k <= 2; ++k) acc += kBinomial[k + 2] * in[reflect_index(2 * j + k, n)];
    out[j] = acc;
  }
  return out;
}

std::vector<double> upsample_1d(const std::vector<double>& in, int n) {
  const int m = static_cast<int>(in.size());
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    double norm = 0.0;
    for (int k = -2; k <= 2; ++k) {
      const int src = i - k;
      if (src < 0 || src >= n || (src % 2) != 0) continue;
      const int j = src / 2;
      if (j >= m) continue;
      acc += kBinomial[k + 2] * in[j];
      norm += kBinomial[k + 2];
    }
    out[i] = norm > 0.0 ? acc / norm : 0.0;
  }
  return out;
}

Plane downsample(const Plane& in) {
  const auto down = [](const std::vector<double>& v) { return downsample_1d(v); };
  const Plane r = apply_rows(in, (in.width + 1) / 2, down);
  return apply_cols(r, (in.height + 1) / 2, down);
}

Plane upsample(const Plane& in, int height, int width) {
  const Plane r = apply_rows(in, width, [width](const std::vector<double>& v) {
    return upsample_1d(v, width);
  });
  return apply_cols(r, height, [height](const std::vector<double>& v) {
    return upsample_1d(v, height);
  });
}

Pyramid gaussian_pyramid(const Plane& in, int levels) {
  check_levels(in.height, in.width, levels);
  Pyramid pyr{PyramidKind::Gaussian, {in}};
  for (int l = 1; l < levels; ++l) pyr.levels.push_back(downsample(pyr.levels.back()));
  return pyr;
}

Pyramid laplacian_pyramid(const Plane& in, int levels) {
  Pyramid g = gaussian_pyramid(in, levels);
  Pyramid pyr{PyramidKind::Laplacian, {}};
  for (int l = 0; l + 1 < levels; ++l) {
    const Plane& cur = g.levels[l];
    const Plane up = upsample(g.levels[l + 1], cur.height, cur.width);
    Plane band = cur;
    for (std::size_t i = 0; i < band.size(); ++i) band.data[i] -= up.data[i];
    pyr.levels.push_back(std::move(band));
  }
  pyr.levels.push_back(g.levels.back());
  return pyr;
}

Plane collapse(const Pyramid& pyr) {
  if (pyr.kind != PyramidKind::Laplacian || pyr.levels.empty()) {
    throw ParameterError("collapse needs a non-empty Laplacian pyramid");
  }
  Plane cur = pyr.levels.back();
  for (int l = static_cast<int>(pyr.levels.size()) - 2; l >= 0; --l) {
    const Plane& band = pyr.levels[l];
    Plane up = upsample(cur, band.height, band.width);
    for (std::size_t i = 0; i < up.size(); ++i) up.data[i] += band.data[i];
    cur = std::move(up);
  }
  return cur;
}

}  // namespace visprompt
