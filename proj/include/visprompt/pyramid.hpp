#pragma once

#include <vector>

#include "visprompt/image.hpp"

namespace visprompt {

enum class PyramidKind { Gaussian, Laplacian };

/// Level 0 is full resolution; each further level has ceil(n/2) rows and
/// columns. In a Laplacian pyramid the last level holds the Gaussian residual.
struct Pyramid {
  PyramidKind kind = PyramidKind::Gaussian;
  std::vector<Plane> levels;
};

/// floor(log2(min(h, w))) - 2, at least 1.
int auto_pyramid_levels(int height, int width);

/// 5-tap binomial [1,4,6,4,1]/16 blur with reflect padding, then keep even
/// samples.
std::vector<double> downsample_1d(const std::vector<double>& in);
/// Zero-insert to length `n` and blur with the binomial taps, normalizing by
/// the weight that actually lands on samples (constant-preserving at borders).
std::vector<double> upsample_1d(const std::vector<double>& in, int n);

Plane downsample(const Plane& in);
Plane upsample(const Plane& in, int height, int width);

Pyramid gaussian_pyramid(const Plane& in, int levels);
Pyramid laplacian_pyramid(const Plane& in, int levels);
/// Inverse of laplacian_pyramid.
Plane collapse(const Pyramid& pyr);

}  // namespace visprompt
