#pragma once

#include "visprompt/filter.hpp"
#include "visprompt/image.hpp"
#include "visprompt/rng.hpp"

namespace visprompt::ops {

struct CannyParams {
  double low = 50.0;   ///< weak threshold, 8-bit gradient-magnitude scale
  double high = 200.0;  ///< strong threshold
};

/// Binary Canny edge map replicated to RGB.
///
/// Pipeline: BT.601 luma; 5x5 Gaussian (sigma 1.4); 3x3 Sobel; magnitude
/// sqrt(gx^2 + gy^2) on the 0..255 scale; non-maximum suppression along the
/// gradient direction quantized to 0/45/90/135 degrees (a pixel survives when
/// it is strictly above its backward neighbour and not below its forward
/// one); hysteresis keeps pixels >= high plus pixels in [low, high) that are
/// 8-connected to them.
Image canny(const Image& img, const CannyParams& params = {});

/// Non-maximum-suppressed gradient magnitude before hysteresis (diagnostic).
Plane canny_suppressed_magnitude(const Image& img);

/// Raw 4-neighbour Laplacian response of the luma plane, reflect padding.
Plane laplacian_response(const Image& img);

/// clamp(4 * |laplacian_response|) replicated to RGB.
Image laplacian_edge(const Image& img);
inline constexpr double kLaplacianGain = 4.0;

struct LocalLaplacianParams {
  double sigma_r = 0.2;
  double alpha = 0.5;
  int levels = 0;  ///< 0 selects auto_pyramid_levels
};

/// Detail remapping used per pyramid coefficient:
/// r(i) = g + sign(i - g) * sigma_r * (|i - g| / sigma_r)^alpha for
/// |i - g| <= sigma_r, otherwise i.
double llf_remap(double i, double g, double sigma_r, double alpha);

/// Local Laplacian filter applied per RGB channel. Every output coefficient
/// (l, y, x) is taken from the Laplacian pyramid of the full image remapped
/// around g = G_l(y, x); the residual level is copied from the input.
Image local_laplacian(const Image& img, const LocalLaplacianParams& params = {});
Plane local_laplacian_plane(const Plane& in, const LocalLaplacianParams& params);

/// Richardson-Lucy deconvolution: u0 = observed,
/// u <- u * ((d / max(u (*) psf, eps)) (*) psf_flipped), eps = 1e-8.
/// The PSF must be non-negative and sum to 1 (within 1e-6).
Image richardson_lucy(const Image& observed, const Kernel2D& psf, int iters);
/// Same iteration for a symmetric separable PSF taps x taps (its own flip).
Image richardson_lucy_separable(const Image& observed, const std::vector<double>& taps, int iters);
inline constexpr double kRlEpsilon = 1e-8;

/// Low-light synthesis (dataset substitute): out = clamp(s * img^gamma + n),
/// n ~ N(0, (noise_255 / 255)^2) per channel.
struct LowlightParams {
  double gamma = 2.5;
  double scale = 0.2;
  double noise_255 = 5.0;
};
LowlightParams sample_lowlight(Rng& rng);
Image darken_lowlight(const Image& img, const LowlightParams& params, Rng& rng);

}  // namespace visprompt::ops
