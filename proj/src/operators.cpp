#include "visprompt/operators.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <string>
#include <utility>

#include "visprompt/error.hpp"
#include "visprompt/pyramid.hpp"

namespace visprompt::ops {

namespace {

constexpr double kCannySigma = 1.4;
constexpr int kCannyRadius = 2;

struct Gradients {
  Plane gx;
  Plane gy;
  Plane mag;
};

Gradients sobel_8bit(const Image& img) {
  Plane l = luma(img);
  for (double& v : l.data) v *= 255.0;
  const auto taps = gaussian_taps(kCannySigma, kCannyRadius);
  const Plane s = convolve_separable(l, taps, taps);

  const int h = s.height;
  const int w = s.width;
  Gradients g{Plane(h, w), Plane(h, w), Plane(h, w)};
  auto px = [&](int y, int x) { return s.at(reflect_index(y, h), reflect_index(x, w)); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (px(y - 1, x + 1) + 2.0 * px(y, x + 1) + px(y + 1, x + 1)) -
                        (px(y - 1, x - 1) + 2.0 * px(y, x - 1) + px(y + 1, x - 1));
      const double gy = (px(y + 1, x - 1) + 2.0 * px(y + 1, x) + px(y + 1, x + 1)) -
                        (px(y - 1, x - 1) + 2.0 * px(y - 1, x) + px(y - 1, x + 1));
      g.gx.at(y, x) = gx;
      g.gy.at(y, x) = gy;
      g.mag.at(y, x) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return g;
}

Plane non_max_suppress(const Gradients& g) {
  const double tan22 = std::tan(22.5 * std::numbers::pi / 180.0);
  const double tan67 = std::tan(67.5 * std::numbers::pi / 180.0);
  const int h = g.mag.height;
  const int w = g.mag.width;
  auto mag = [&](int y, int x) {
    return (y < 0 || y >= h || x < 0 || x >= w) ? 0.0 : g.mag.at(y, x);
  };
  Plane out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double m = g.mag.at(y, x);
      if (m <= 0.0) continue;
      const double gx = g.gx.at(y, x);
      const double gy = g.gy.at(y, x);
      const double ax = std::abs(gx);
      const double ay = std::abs(gy);
      // (dy, dx) step along the gradient direction.
      int dy = 0;
      int dx = 0;
      if (ay <= ax * tan22) {
        dx = gx >= 0 ? 1 : -1;
      } else if (ay >= ax * tan67) {
        dy = gy >= 0 ? 1 : -1;
      } else {
        dx = gx >= 0 ? 1 : -1;
        dy = gy >= 0 ? 1 : -1;
      }
      const double forward = mag(y + dy, x + dx);
      const double backward = mag(y - dy, x - dx);
      if (m > backward && m >= forward) out.at(y, x) = m;
    }
  }
  return out;
}

}  // namespace

Plane canny_suppressed_magnitude(const Image& img) { return non_max_suppress(sobel_8bit(img)); }

Image canny(const Image& img, const CannyParams& params) {
  if (!(params.low <= params.high)) throw ParameterError("canny: low threshold exceeds high");
  const Plane nms = canny_suppressed_magnitude(img);
  const int h = nms.height;
  const int w = nms.width;
  Plane edges(h, w);
  std::deque<std::pair<int, int>> frontier;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (nms.at(y, x) >= params.high) {
        edges.at(y, x) = 1.0;
        frontier.emplace_back(y, x);
      }
    }
  }
  while (!frontier.empty()) {
    const auto [y, x] = frontier.front();
    frontier.pop_front();
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int ny = y + dy;
        const int nx = x + dx;
        if (ny < 0 || ny >= h || nx < 0 || nx >= w || edges.at(ny, nx) != 0.0) continue;
        const double m = nms.at(ny, nx);
        if (m > 0.0 && m >= params.low) {
          edges.at(ny, nx) = 1.0;
          frontier.emplace_back(ny, nx);
        }
      }
    }
  }
  return gray_to_rgb(edges);
}

Plane laplacian_response(const Image& img) {
  const Plane l = luma(img);
  const int h = l.height;
  const int w = l.width;
  Plane out(h, w);
  auto px = [&](int y, int x) { return l.at(reflect_index(y, h), reflect_index(x, w)); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out.at(y, x) = px(y - 1, x) + px(y + 1, x) + px(y, x - 1) + px(y, x + 1) - 4.0 * px(y, x);
    }
  }
  return out;
}

Image laplacian_edge(const Image& img) {
  Plane r = laplacian_response(img);
  for (double& v : r.data) v = clamp01(std::abs(v) * kLaplacianGain);
  return gray_to_rgb(r);
}

double llf_remap(double i, double g, double sigma_r, double alpha) {
  const double d = i - g;
  const double ad = std::abs(d);
  if (ad > sigma_r) return i;
  const double mag = sigma_r * std::pow(ad / sigma_r, alpha);
  return d >= 0.0 ? g + mag : g - mag;
}

namespace {

// Dense matrix of a 1-D linear map, built by pushing unit vectors through it.
struct LinearMap {
  int rows = 0;
  int cols = 0;
  std::vector<double> m;  // row-major

  double at(int r, int c) const { return m[static_cast<std::size_t>(r) * cols + c]; }
};

template <typename Fn>
LinearMap tabulate(int n_in, int n_out, Fn&& fn) {
  LinearMap map{n_out, n_in, std::vector<double>(static_cast<std::size_t>(n_out) * n_in)};
  std::vector<double> unit(n_in, 0.0);
  for (int c = 0; c < n_in; ++c) {
    unit[c] = 1.0;
    const auto col = fn(unit);
    for (int r = 0; r < n_out; ++r) map.m[static_cast<std::size_t>(r) * n_in + c] = col[r];
    unit[c] = 0.0;
  }
  return map;
}

LinearMap compose(const LinearMap& a, const LinearMap& b) {  // a * b
  LinearMap out{a.rows, b.cols, std::vector<double>(static_cast<std::size_t>(a.rows) * b.cols)};
  for (int r = 0; r < a.rows; ++r)
    for (int k = 0; k < a.cols; ++k) {
      const double v = a.at(r, k);
      if (v == 0.0) continue;
      for (int c = 0; c < b.cols; ++c) out.m[static_cast<std::size_t>(r) * b.cols + c] += v * b.at(k, c);
    }
  return out;
}

LinearMap identity(int n) {
  LinearMap id{n, n, std::vector<double>(static_cast<std::size_t>(n) * n)};
  for (int i = 0; i < n; ++i) id.m[static_cast<std::size_t>(i) * n + i] = 1.0;
  return id;
}

// Per-axis operators of a Laplacian band: band(l) = G_l - up(G_{l+1}) where
// G_l = R_l x R_l^T along each axis. `gauss[l]` maps the input axis to level
// l; `up_gauss[l]` maps the input axis to up(level l+1) at level-l size.
struct AxisMaps {
  std::vector<LinearMap> gauss;
  std::vector<LinearMap> up_gauss;
};

AxisMaps axis_maps(int n, int levels) {
  AxisMaps a;
  a.gauss.push_back(identity(n));
  std::vector<int> sizes{n};
  for (int l = 1; l < levels; ++l) {
    const int prev = sizes.back();
    const int next = (prev + 1) / 2;
    const auto down = tabulate(prev, next, [](const std::vector<double>& v) { return downsample_1d(v); });
    a.gauss.push_back(compose(down, a.gauss.back()));
    sizes.push_back(next);
  }
  for (int l = 0; l + 1 < levels; ++l) {
    const int target = sizes[l];
    const auto up = tabulate(sizes[l + 1], target,
                             [target](const std::vector<double>& v) { return upsample_1d(v, target); });
    a.up_gauss.push_back(compose(up, a.gauss[l + 1]));
  }
  return a;
}

// Nonzero input support of one output row, for both maps of a band.
struct Support {
  std::vector<int> index;
  std::vector<double> gauss;
  std::vector<double> up;
};

Support support_of(const LinearMap& g, const LinearMap& u, int row) {
  Support s;
  for (int c = 0; c < g.cols; ++c) {
    const double a = g.at(row, c);
    const double b = u.at(row, c);
    if (a == 0.0 && b == 0.0) continue;
    s.index.push_back(c);
    s.gauss.push_back(a);
    s.up.push_back(b);
  }
  return s;
}

}  // namespace

Plane local_laplacian_plane(const Plane& in, const LocalLaplacianParams& params) {
  if (!(params.alpha > 0.0)) throw ParameterError("local_laplacian: alpha must be positive");
  if (!(params.sigma_r > 0.0)) throw ParameterError("local_laplacian: sigma_r must be positive");
  const int levels = params.levels > 0 ? params.levels : auto_pyramid_levels(in.height, in.width);
  const Pyramid gauss = gaussian_pyramid(in, levels);
  if (levels == 1) {
    // Single level: the whole image is the residual.
    return in;
  }

  const AxisMaps rows = axis_maps(in.height, levels);
  const AxisMaps cols = axis_maps(in.width, levels);

  Pyramid out{PyramidKind::Laplacian, {}};
  std::vector<double> remapped;
  for (int l = 0; l + 1 < levels; ++l) {
    const Plane& g_level = gauss.levels[l];
    Plane band(g_level.height, g_level.width);
    std::vector<Support> col_support;
    for (int x = 0; x < g_level.width; ++x) {
      col_support.push_back(support_of(cols.gauss[l], cols.up_gauss[l], x));
    }
    for (int y = 0; y < g_level.height; ++y) {
      const Support rs = support_of(rows.gauss[l], rows.up_gauss[l], y);
      for (int x = 0; x < g_level.width; ++x) {
        const Support& cs = col_support[x];
        const double g = g_level.at(y, x);
        double acc = 0.0;
        for (std::size_t i = 0; i < rs.index.size(); ++i) {
          const int p = rs.index[i];
          for (std::size_t j = 0; j < cs.index.size(); ++j) {
            const double w = rs.gauss[i] * cs.gauss[j] - rs.up[i] * cs.up[j];
            if (w == 0.0) continue;
            acc += w * llf_remap(in.at(p, cs.index[j]), g, params.sigma_r, params.alpha);
          }
        }
        band.at(y, x) = acc;
      }
    }
    out.levels.push_back(std::move(band));
  }
  out.levels.push_back(gauss.levels.back());
  return collapse(out);
}

Image local_laplacian(const Image& img, const LocalLaplacianParams& params) {
  return map_channels(img, [&](const Plane& p) { return local_laplacian_plane(p, params); });
}

Image richardson_lucy(const Image& observed, const Kernel2D& psf, int iters) {
  if (iters < 1) throw ParameterError("richardson_lucy: iters must be >= 1");
  for (double w : psf.weights) {
    if (!(w >= 0.0)) throw ParameterError("richardson_lucy: PSF has negative or NaN entries");
  }
  const double s = psf.sum();
  if (!(s > 0.0)) throw ParameterError("richardson_lucy: PSF sums to zero");
  if (std::abs(s - 1.0) > 1e-6) throw ParameterError("richardson_lucy: PSF must sum to 1");
  const Kernel2D flipped = psf.rotated180();

  return map_channels(observed, [&](const Plane& d) {
    Plane u = d;
    for (int t = 0; t < iters; ++t) {
      Plane ratio = convolve2d(u, psf);
      for (std::size_t i = 0; i < ratio.size(); ++i) {
        ratio.data[i] = d.data[i] / std::max(ratio.data[i], kRlEpsilon);
      }
      const Plane corr = convolve2d(ratio, flipped);
      for (std::size_t i = 0; i < u.size(); ++i) u.data[i] *= corr.data[i];
    }
    return u;
  });
}

Image richardson_lucy_separable(const Image& observed, const std::vector<double>& taps, int iters) {
  if (iters < 1) throw ParameterError("richardson_lucy: iters must be >= 1");
  if (taps.size() % 2 != 1) throw ParameterError("richardson_lucy: taps must have odd length");
  double s = 0.0;
  for (double t : taps) {
    if (!(t >= 0.0)) throw ParameterError("richardson_lucy: PSF has negative or NaN entries");
    s += t;
  }
  if (std::abs(s - 1.0) > 1e-6) throw ParameterError("richardson_lucy: PSF must sum to 1");
  for (std::size_t i = 0; i < taps.size() / 2; ++i) {
    if (taps[i] != taps[taps.size() - 1 - i]) {
      throw ParameterError("richardson_lucy: separable taps must be symmetric");
    }
  }

  return map_channels(observed, [&](const Plane& d) {
    Plane u = d;
    for (int t = 0; t < iters; ++t) {
      Plane ratio = convolve_separable(u, taps, taps);
      for (std::size_t i = 0; i < ratio.size(); ++i) {
        ratio.data[i] = d.data[i] / std::max(ratio.data[i], kRlEpsilon);
      }
      const Plane corr = convolve_separable(ratio, taps, taps);
      for (std::size_t i = 0; i < u.size(); ++i) u.data[i] *= corr.data[i];
    }
    return u;
  });
}

LowlightParams sample_lowlight(Rng& rng) {
  LowlightParams p;
  p.gamma = rng.uniform(2.0, 3.5);
  p.scale = rng.uniform(0.10, 0.30);
  p.noise_255 = rng.uniform(3.0, 8.0);
  return p;
}

Image darken_lowlight(const Image& img, const LowlightParams& params, Rng& rng) {
  if (!(params.gamma > 0.0) || !(params.scale >= 0.0) || !(params.noise_255 >= 0.0)) {
    throw ParameterError("darken_lowlight: gamma > 0, scale >= 0 and noise >= 0 required");
  }
  Image out = img;
  const double sigma = params.noise_255 / 255.0;
  for (float& v : out.data) {
    double o = params.scale * std::pow(static_cast<double>(v), params.gamma);
    if (sigma > 0.0) o += rng.normal(0.0, sigma);
    v = static_cast<float>(o);
  }
  clamp_inplace(out);
  return out;
}

}  // namespace visprompt::ops
