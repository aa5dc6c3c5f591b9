#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "visprompt/filter.hpp"
#include "visprompt/image.hpp"
#include "visprompt/rng.hpp"

namespace visprompt::degrade {

enum class Kind {
  GaussianNoise,
  GaussianBlur,
  PoissonNoise,
  SaltPepper,
  Jpeg,
  Ringing,
  RlArtifact,
  InpaintMask,
  Haze,
  RainSimple,
  RainComplex,
};

inline constexpr std::array<Kind, 11> kAllKinds = {
    Kind::GaussianNoise, Kind::GaussianBlur, Kind::PoissonNoise, Kind::SaltPepper,
    Kind::Jpeg,          Kind::Ringing,      Kind::RlArtifact,   Kind::InpaintMask,
    Kind::Haze,          Kind::RainSimple,   Kind::RainComplex,
};

std::string_view kind_name(Kind kind);
Kind kind_from_name(std::string_view name);

/// A degradation kind with its sampled parameters and the seed of the
/// stream that drives any randomness inside the degradation. Applying the
/// same spec to the same image always gives the same output.
struct DegradationSpec {
  Kind kind = Kind::GaussianNoise;
  std::map<std::string, double> params;
  std::uint64_t seed = 0;

  double param(const std::string& name) const;
  friend bool operator==(const DegradationSpec&, const DegradationSpec&) = default;
};

nlohmann::json to_json(const DegradationSpec& spec);
DegradationSpec spec_from_json(const nlohmann::json& j);

// --- individual degradations -------------------------------------------

/// out = clamp(img + n), n ~ N(0, (sigma_255 / 255)^2) i.i.d. per entry.
Image gaussian_noise(const Image& img, double sigma_255, Rng& rng);

/// Separable isotropic Gaussian, radius ceil(3 sigma), reflect padding.
/// sigma below kBlurIdentitySigma returns the input unchanged.
Image gaussian_blur(const Image& img, double sigma);
inline constexpr double kBlurIdentitySigma = 0.01;

/// out = clamp(Poisson(x * 255 * level) / (255 * level)).
Image poisson_noise(const Image& img, double level, Rng& rng);

/// Each pixel is replaced with probability 1 - snr by white or black (50/50),
/// jointly across channels.
Image salt_pepper(const Image& img, double snr, Rng& rng);

// JPEG without entropy coding: full-range BT.601 YCbCr, no chroma
// subsampling, 8x8 orthonormal DCT-II, Annex K tables scaled by the IJG
// quality rule, dequantization, inverse transform.
using Block = std::array<double, 64>;
Block dct8x8(const Block& spatial);
Block idct8x8(const Block& freq);
std::array<int, 64> jpeg_quant_table(int quality, bool chroma);
/// `quantize = false` runs the transform pipeline without the lossy step.
Image jpeg_roundtrip(const Image& img, int quality, bool quantize = true);
Image jpeg_artifacts(const Image& img, int quality);

/// Hann-windowed circular sinc (jinc) low-pass:
///   k(r) = cutoff * J1(cutoff * r) / (2 pi r),  k(0) = cutoff^2 / (4 pi)
///   w(r) = 0.5 * (1 + cos(pi * r / (radius + 1))) for r < radius + 1
/// normalized to sum 1.
inline constexpr int kRingingRadius = 10;
Kernel2D ringing_kernel(double cutoff, int radius = kRingingRadius);
Image ringing(const Image& img, double cutoff);

/// Blur with an isotropic Gaussian PSF, then run `iters` Richardson-Lucy
/// iterations against the same PSF.
Image rl_artifact(const Image& img, double psf_sigma, int iters);

struct Point {
  double x = 0.0;
  double y = 0.0;
};
using Polyline = std::vector<Point>;

/// Streaks of `thickness` pixels: a pixel is covered when its centre lies
/// within thickness / 2 of a polyline.
struct InpaintParams {
  int streaks = 5;
  double thickness = 1.0;
};
std::vector<Polyline> sample_streaks(int height, int width, int count, Rng& rng);
double distance_to_polyline(const Point& p, const Polyline& line);
/// Covered-pixel mask (1 covered, 0 untouched).
Plane inpaint_coverage(int height, int width, const std::vector<Polyline>& lines,
                       double thickness);
Image inpaint_mask(const Image& img, const InpaintParams& params, Rng& rng);

/// Atmospheric scattering I = J t + A (1 - t), t = exp(-beta (d + offset)).
/// The depth d is a linear ramp at `angle` blended with radial distance
/// from (cx, cy) (fractions of the image size) by `radial_weight`, then
/// min-max normalized to [0,1]. `depth_offset` exists for limit checks.
struct HazeParams {
  double beta = 1.0;
  double airlight = 0.85;
  double angle = 0.0;
  double cx = 0.5;
  double cy = 0.5;
  double radial_weight = 0.5;
  double depth_offset = 0.0;
};
Plane haze_depth(int height, int width, const HazeParams& params);
Image synthesize_haze(const Image& img, const HazeParams& params);

/// One streak layer: seed pixels drawn with probability `density`, each
/// extended into a line of `length` pixels at `angle_deg` (90 = vertical)
/// carrying `intensity` times a per-seed factor in [0.5, 1].
struct RainLayer {
  double angle_deg = 90.0;
  double density = 0.05;
  double intensity = 0.4;
  double length = 6.0;
};
enum class RainMode { Simple, Complex };
struct RainParams {
  std::vector<RainLayer> layers;
  double veil = 0.0;  ///< global lift is veil * 0.1
};
/// Non-negative additive rain map (before clamping).
Plane rain_streaks(int height, int width, const RainParams& params, Rng& rng);
Image synthesize_rain(const Image& img, const RainParams& params, Rng& rng);

// --- specs -------------------------------------------------------------

struct ParamRange {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
  bool integer = false;
};

/// Sampling ranges for a kind at a given image size. Rain-complex layer
/// parameters are listed once with the suffix "_i".
std::vector<ParamRange> param_ranges(Kind kind, int image_size);

DegradationSpec sample_spec(Kind kind, Rng& rng, int image_size);
/// Empty when every parameter lies inside its sampling range.
std::optional<std::string> range_violation(const DegradationSpec& spec, int image_size);

Image apply(const DegradationSpec& spec, const Image& img);

/// Kinds eligible for mixed degradation.
std::vector<Kind> mixable_kinds();
/// Two or three distinct kinds; an inpainting mask, if drawn, goes last.
std::vector<Kind> sample_mixed_kinds(Rng& rng);
/// Applies the specs in order. Requires a non-empty list of distinct kinds
/// with any inpaint mask in final position.
Image compose_mixed(const Image& img, const std::vector<DegradationSpec>& specs);
void validate_mixed(const std::vector<DegradationSpec>& specs);

}  // namespace visprompt::degrade
