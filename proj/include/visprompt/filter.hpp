#pragma once

#include <vector>

#include "visprompt/image.hpp"

namespace visprompt {

/// Mirror index without edge repetition (…c b | a b c d | c b…).
int reflect_index(int i, int n);

/// Odd-sized 2-D kernel, row-major, centred at (radius_y, radius_x).
struct Kernel2D {
  int radius_y = 0;
  int radius_x = 0;
  std::vector<double> weights;

  Kernel2D() = default;
  Kernel2D(int ry, int rx, double fill = 0.0);

  int rows() const { return 2 * radius_y + 1; }
  int cols() const { return 2 * radius_x + 1; }
  double& at(int dy, int dx) { return weights[(dy + radius_y) * cols() + (dx + radius_x)]; }
  double at(int dy, int dx) const { return weights[(dy + radius_y) * cols() + (dx + radius_x)]; }

  double sum() const;
  Kernel2D rotated180() const;
  static Kernel2D delta();
};

/// Normalized 1-D Gaussian taps exp(-x^2 / 2 sigma^2), x in [-radius, radius].
std::vector<double> gaussian_taps(double sigma, int radius);
/// Outer product of two 1-D tap vectors.
Kernel2D outer(const std::vector<double>& row_taps, const std::vector<double>& col_taps);
/// Isotropic Gaussian PSF with radius ceil(3 sigma), normalized to sum 1.
Kernel2D gaussian_kernel(double sigma);

/// Separable convolution with symmetric odd taps and reflect padding;
/// `taps_y` runs along rows (vertical), `taps_x` along columns.
Plane convolve_separable(const Plane& in, const std::vector<double>& taps_y,
                         const std::vector<double>& taps_x);

/// True 2-D convolution out(y,x) = sum k(i,j) in(y-i, x-j), reflect padding.
Plane convolve2d(const Plane& in, const Kernel2D& k);

}  // namespace visprompt
