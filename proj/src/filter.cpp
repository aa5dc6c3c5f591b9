#include "visprompt/filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "visprompt/error.hpp"

namespace visprompt {

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

Kernel2D::Kernel2D(int ry, int rx, double fill) : radius_y(ry), radius_x(rx) {
  if (ry < 0 || rx < 0) throw ParameterError("kernel radius must be >= 0");
  weights.assign(static_cast<std::size_t>(rows()) * cols(), fill);
}

double Kernel2D::sum() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

Kernel2D Kernel2D::rotated180() const {
  Kernel2D r = *this;
  std::reverse(r.weights.begin(), r.weights.end());
  return r;
}

Kernel2D Kernel2D::delta() { return Kernel2D(0, 0, 1.0); }

std::vector<double> gaussian_taps(double sigma, int radius) {
  if (!(sigma > 0.0)) throw ParameterError("gaussian_taps: sigma must be positive");
  std::vector<double> taps(2 * radius + 1);
  double s = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    taps[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    s += taps[i + radius];
  }
  for (double& t : taps) t /= s;
  return taps;
}

Kernel2D outer(const std::vector<double>& row_taps, const std::vector<double>& col_taps) {
  const int ry = static_cast<int>(row_taps.size()) / 2;
  const int rx = static_cast<int>(col_taps.size()) / 2;
  Kernel2D k(ry, rx);
  for (int dy = -ry; dy <= ry; ++dy)
    for (int dx = -rx; dx <= rx; ++dx) k.at(dy, dx) = row_taps[dy + ry] * col_taps[dx + rx];
  return k;
}

Kernel2D gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  const auto taps = gaussian_taps(sigma, radius);
  return outer(taps, taps);
}

Plane convolve_separable(const Plane& in, const std::vector<double>& taps_y,
                         const std::vector<double>& taps_x) {
  const int ry = static_cast<int>(taps_y.size()) / 2;
  const int rx = static_cast<int>(taps_x.size()) / 2;
  const int h = in.height;
  const int w = in.width;

  Plane tmp(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -rx; k <= rx; ++k) acc += taps_x[k + rx] * in.at(y, reflect_index(x - k, w));
      tmp.at(y, x) = acc;
    }
  }
  Plane out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -ry; k <= ry; ++k) acc += taps_y[k + ry] * tmp.at(reflect_index(y - k, h), x);
      out.at(y, x) = acc;
    }
  }
  return out;
}

Plane convolve2d(const Plane& in, const Kernel2D& k) {
  const int h = in.height;
  const int w = in.width;
  Plane out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -k.radius_y; dy <= k.radius_y; ++dy) {
        const int sy = reflect_index(y - dy, h);
        for (int dx = -k.radius_x; dx <= k.radius_x; ++dx) {
          acc += k.at(dy, dx) * in.at(sy, reflect_index(x - dx, w));
        }
      }
      out.at(y, x) = acc;
    }
  }
  return out;
}

}  // namespace visprompt
