#include "visprompt/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <cctype>
#include <limits>
#include <set>

#include "visprompt/error.hpp"
#include "visprompt/operators.hpp"

namespace visprompt::degrade {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Kind, std::string_view>, 11> kKindNames = {{
    {Kind::GaussianNoise, "gaussian_noise"},
    {Kind::GaussianBlur, "gaussian_blur"},
    {Kind::PoissonNoise, "poisson_noise"},
    {Kind::SaltPepper, "salt_pepper"},
    {Kind::Jpeg, "jpeg"},
    {Kind::Ringing, "ringing"},
    {Kind::RlArtifact, "rl_artifact"},
    {Kind::InpaintMask, "inpaint_mask"},
    {Kind::Haze, "haze"},
    {Kind::RainSimple, "rain_simple"},
    {Kind::RainComplex, "rain_complex"},
}};

constexpr double kPi = std::numbers::pi;

}  // namespace

std::string_view kind_name(Kind kind) {
  for (const auto& [k, n] : kKindNames) {
    if (k == kind) return n;
  }
  return "unknown";
}

Kind kind_from_name(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw ParameterError("unknown degradation kind '" + std::string(name) + "'");
}

double DegradationSpec::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) {
    throw ParameterError("degradation " + std::string(kind_name(kind)) + " lacks parameter '" +
                         name + "'");
  }
  return it->second;
}

json to_json(const DegradationSpec& spec) {
  json params = json::object();
  for (const auto& [k, v] : spec.params) params[k] = v;
  return json{{"kind", std::string(kind_name(spec.kind))}, {"params", params}, {"seed", spec.seed}};
}

DegradationSpec spec_from_json(const json& j) {
  DegradationSpec spec;
  try {
    spec.kind = kind_from_name(j.at("kind").get<std::string>());
    for (const auto& [k, v] : j.at("params").items()) spec.params[k] = v.get<double>();
    spec.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ParameterError(std::string("malformed degradation spec: ") + e.what());
  }
  return spec;
}

// --- noise ---------------------------------------------------------------

Image gaussian_noise(const Image& img, double sigma_255, Rng& rng) {
  if (!(sigma_255 >= 0.0)) throw ParameterError("gaussian_noise: sigma must be >= 0");
  Image out = img;
  if (sigma_255 == 0.0) return clamped(std::move(out));
  const double sigma = sigma_255 / 255.0;
  for (float& v : out.data) v = static_cast<float>(v + rng.normal(0.0, sigma));
  clamp_inplace(out);
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (!(sigma >= 0.0)) throw ParameterError("gaussian_blur: sigma must be >= 0");
  if (sigma < kBlurIdentitySigma) return clamped(img);
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  const auto taps = gaussian_taps(sigma, radius);
  return map_channels(img, [&](const Plane& p) { return convolve_separable(p, taps, taps); });
}

Image poisson_noise(const Image& img, double level, Rng& rng) {
  if (!(level > 0.0)) throw ParameterError("poisson_noise: level must be positive");
  Image out = img;
  const double scale = 255.0 * level;
  for (float& v : out.data) {
    const double lambda = clamp01(static_cast<double>(v)) * scale;
    v = static_cast<float>(static_cast<double>(rng.poisson(lambda)) / scale);
  }
  clamp_inplace(out);
  return out;
}

Image salt_pepper(const Image& img, double snr, Rng& rng) {
  if (!(snr >= 0.0 && snr <= 1.0)) throw ParameterError("salt_pepper: snr must lie in [0,1]");
  Image out = clamped(img);
  const double p = 1.0 - snr;
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    if (rng.uniform01() >= p) continue;
    const float v = rng.bernoulli(0.5) ? 1.0f : 0.0f;
    for (int c = 0; c < Image::kChannels; ++c) out.data[i * Image::kChannels + c] = v;
  }
  return out;
}

// --- JPEG ----------------------------------------------------------------

namespace {

constexpr std::array<int, 64> kLumaTable = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

constexpr std::array<int, 64> kChromaTable = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

// Full-range BT.601.
constexpr double kKr = 0.299;
constexpr double kKg = 0.587;
constexpr double kKb = 0.114;

struct DctBasis {
  std::array<double, 64> c{};  // c[u * 8 + x] = C(u) cos((2x + 1) u pi / 16)
  DctBasis() {
    for (int u = 0; u < 8; ++u) {
      const double cu = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x) c[u * 8 + x] = cu * std::cos((2 * x + 1) * u * kPi / 16.0);
    }
  }
};

const DctBasis& basis() {
  static const DctBasis b;
  return b;
}

}  // namespace

Block dct8x8(const Block& s) {
  const auto& c = basis().c;
  Block tmp{};
  Block out{};
  for (int y = 0; y < 8; ++y)
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int x = 0; x < 8; ++x) acc += c[u * 8 + x] * s[y * 8 + x];
      tmp[y * 8 + u] = acc;
    }
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int y = 0; y < 8; ++y) acc += c[v * 8 + y] * tmp[y * 8 + u];
      out[v * 8 + u] = acc;
    }
  return out;
}

Block idct8x8(const Block& f) {
  const auto& c = basis().c;
  Block tmp{};
  Block out{};
  for (int v = 0; v < 8; ++v)
    for (int x = 0; x < 8; ++x) {
      double acc = 0.0;
      for (int u = 0; u < 8; ++u) acc += c[u * 8 + x] * f[v * 8 + u];
      tmp[v * 8 + x] = acc;
    }
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double acc = 0.0;
      for (int v = 0; v < 8; ++v) acc += c[v * 8 + y] * tmp[v * 8 + x];
      out[y * 8 + x] = acc;
    }
  return out;
}

std::array<int, 64> jpeg_quant_table(int quality, bool chroma) {
  if (quality < 1 || quality > 100) throw ParameterError("jpeg: quality must lie in [1,100]");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  const auto& base = chroma ? kChromaTable : kLumaTable;
  std::array<int, 64> table{};
  for (int i = 0; i < 64; ++i) table[i] = std::clamp((base[i] * scale + 50) / 100, 1, 255);
  return table;
}

Image jpeg_roundtrip(const Image& img, int quality, bool quantize) {
  const auto luma_q = jpeg_quant_table(quality, false);
  const auto chroma_q = jpeg_quant_table(quality, true);
  const int h = img.height;
  const int w = img.width;
  const int ph = (h + 7) / 8 * 8;
  const int pw = (w + 7) / 8 * 8;

  // Level-shifted YCbCr planes on the 0..255 scale, edge-replicated padding.
  std::array<Plane, 3> ycc = {Plane(ph, pw), Plane(ph, pw), Plane(ph, pw)};
  for (int y = 0; y < ph; ++y) {
    for (int x = 0; x < pw; ++x) {
      const int sy = std::min(y, h - 1);
      const int sx = std::min(x, w - 1);
      const double r = 255.0 * img.at(sy, sx, 0);
      const double g = 255.0 * img.at(sy, sx, 1);
      const double b = 255.0 * img.at(sy, sx, 2);
      const double yy = kKr * r + kKg * g + kKb * b;
      ycc[0].at(y, x) = yy - 128.0;
      ycc[1].at(y, x) = (b - yy) / (2.0 * (1.0 - kKb));
      ycc[2].at(y, x) = (r - yy) / (2.0 * (1.0 - kKr));
    }
  }

  for (int ch = 0; ch < 3; ++ch) {
    const auto& table = ch == 0 ? luma_q : chroma_q;
    Plane& p = ycc[ch];
    for (int by = 0; by < ph; by += 8) {
      for (int bx = 0; bx < pw; bx += 8) {
        Block blk{};
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) blk[y * 8 + x] = p.at(by + y, bx + x);
        Block f = dct8x8(blk);
        if (quantize) {
          for (int i = 0; i < 64; ++i) f[i] = std::round(f[i] / table[i]) * table[i];
        }
        const Block back = idct8x8(f);
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) p.at(by + y, bx + x) = back[y * 8 + x];
      }
    }
  }

  Image out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double yy = ycc[0].at(y, x) + 128.0;
      const double cb = ycc[1].at(y, x);
      const double cr = ycc[2].at(y, x);
      const double r = yy + 2.0 * (1.0 - kKr) * cr;
      const double b = yy + 2.0 * (1.0 - kKb) * cb;
      const double g = (yy - kKr * r - kKb * b) / kKg;
      out.at(y, x, 0) = static_cast<float>(r / 255.0);
      out.at(y, x, 1) = static_cast<float>(g / 255.0);
      out.at(y, x, 2) = static_cast<float>(b / 255.0);
    }
  }
  clamp_inplace(out);
  return out;
}

Image jpeg_artifacts(const Image& img, int quality) { return jpeg_roundtrip(img, quality, true); }

// --- ringing -------------------------------------------------------------

Kernel2D ringing_kernel(double cutoff, int radius) {
  if (!(cutoff > 0.0 && cutoff <= kPi)) throw ParameterError("ringing: cutoff must lie in (0, pi]");
  if (radius < 1) throw ParameterError("ringing: radius must be >= 1");
  Kernel2D k(radius, radius);
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const double r = std::hypot(static_cast<double>(dx), static_cast<double>(dy));
      if (r >= radius + 1) continue;
      const double jinc = r == 0.0 ? cutoff * cutoff / (4.0 * kPi)
                                   : cutoff * std::cyl_bessel_j(1.0, cutoff * r) / (2.0 * kPi * r);
      const double window = 0.5 * (1.0 + std::cos(kPi * r / (radius + 1)));
      k.at(dy, dx) = jinc * window;
    }
  }
  const double s = k.sum();
  for (double& w : k.weights) w /= s;
  return k;
}

Image ringing(const Image& img, double cutoff) {
  const Kernel2D k = ringing_kernel(cutoff);
  return map_channels(img, [&](const Plane& p) { return convolve2d(p, k); });
}

// --- Richardson-Lucy artifacts ---------------------------------------------

Image rl_artifact(const Image& img, double psf_sigma, int iters) {
  if (iters < 1) throw ParameterError("rl_artifact: iters must be >= 1");
  if (!(psf_sigma >= 0.0)) throw ParameterError("rl_artifact: psf_sigma must be >= 0");
  if (psf_sigma < kBlurIdentitySigma) return clamped(img);
  const int radius = static_cast<int>(std::ceil(3.0 * psf_sigma));
  const auto taps = gaussian_taps(psf_sigma, radius);
  const Image blurred = gaussian_blur(img, psf_sigma);
  return ops::richardson_lucy_separable(blurred, taps, iters);
}

// --- inpainting streaks ----------------------------------------------------

std::vector<Polyline> sample_streaks(int height, int width, int count, Rng& rng) {
  std::vector<Polyline> lines;
  for (int i = 0; i < count; ++i) {
    const auto n = rng.uniform_int(3, 6);
    Polyline line;
    for (std::int64_t k = 0; k < n; ++k) {
      line.push_back({rng.uniform(0.0, width), rng.uniform(0.0, height)});
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

double distance_to_polyline(const Point& p, const Polyline& line) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const Point& a = line[i];
    const Point& b = line[i + 1];
    const double vx = b.x - a.x;
    const double vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    best = std::min(best, std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy)));
  }
  return best;
}

Plane inpaint_coverage(int height, int width, const std::vector<Polyline>& lines,
                       double thickness) {
  Plane mask(height, width);
  const double half = thickness / 2.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Point centre{x + 0.5, y + 0.5};
      for (const auto& line : lines) {
        if (distance_to_polyline(centre, line) <= half) {
          mask.at(y, x) = 1.0;
          break;
        }
      }
    }
  }
  return mask;
}

Image inpaint_mask(const Image& img, const InpaintParams& params, Rng& rng) {
  if (params.streaks < 0) throw ParameterError("inpaint_mask: streak count must be >= 0");
  if (!(params.thickness > 0.0)) throw ParameterError("inpaint_mask: thickness must be positive");
  Image out = clamped(img);
  const auto lines = sample_streaks(img.height, img.width, params.streaks, rng);
  const Plane mask = inpaint_coverage(img.height, img.width, lines, params.thickness);
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    if (mask.data[i] == 0.0) continue;
    for (int c = 0; c < Image::kChannels; ++c) out.data[i * Image::kChannels + c] = 0.0f;
  }
  return out;
}

// --- haze ----------------------------------------------------------------

Plane haze_depth(int height, int width, const HazeParams& params) {
  Plane d(height, width);
  const double ca = std::cos(params.angle);
  const double sa = std::sin(params.angle);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = width > 1 ? static_cast<double>(x) / (width - 1) : 0.0;
      const double v = height > 1 ? static_cast<double>(y) / (height - 1) : 0.0;
      const double linear = u * ca + v * sa;
      const double radial = std::hypot(u - params.cx, v - params.cy);
      d.at(y, x) = (1.0 - params.radial_weight) * linear + params.radial_weight * radial;
    }
  }
  const auto [lo, hi] = std::minmax_element(d.data.begin(), d.data.end());
  const double mn = *lo;
  const double range = *hi - *lo;
  for (double& v : d.data) v = range > 0.0 ? (v - mn) / range : 0.0;
  return d;
}

Image synthesize_haze(const Image& img, const HazeParams& params) {
  if (!(params.beta >= 0.0)) throw ParameterError("haze: beta must be >= 0");
  if (!(params.airlight >= 0.0 && params.airlight <= 1.0)) {
    throw ParameterError("haze: airlight must lie in [0,1]");
  }
  const Plane depth = haze_depth(img.height, img.width, params);
  Image out = img;
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    const double t = std::exp(-params.beta * (depth.data[i] + params.depth_offset));
    for (int c = 0; c < Image::kChannels; ++c) {
      float& v = out.data[i * Image::kChannels + c];
      v = static_cast<float>(v * t + params.airlight * (1.0 - t));
    }
  }
  clamp_inplace(out);
  return out;
}

// --- rain ----------------------------------------------------------------

Plane rain_streaks(int height, int width, const RainParams& params, Rng& rng) {
  Plane rain(height, width);
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const RainLayer& layer = params.layers[li];
    if (!(layer.density >= 0.0 && layer.density <= 1.0)) {
      throw ParameterError("rain: density must lie in [0,1]");
    }
    if (!(layer.intensity >= 0.0)) throw ParameterError("rain: intensity must be >= 0");
    Rng lr = rng.child("rain_layer", li);
    const double theta = layer.angle_deg * kPi / 180.0;
    const double dx = std::cos(theta);
    const double dy = std::sin(theta);
    const int length = std::max(1, static_cast<int>(std::lround(layer.length)));
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        // Both draws happen for every pixel so that a denser layer on the
        // same stream is a superset of a sparser one.
        const double u = lr.uniform01();
        const double strength = layer.intensity * (0.5 + 0.5 * lr.uniform01());
        if (u >= layer.density) continue;
        for (int t = 0; t < length; ++t) {
          const long px = std::lround(x + t * dx);
          const long py = std::lround(y + t * dy);
          if (px < 0 || px >= width || py < 0 || py >= height) break;
          rain.at(static_cast<int>(py), static_cast<int>(px)) += strength;
        }
      }
    }
  }
  return rain;
}

Image synthesize_rain(const Image& img, const RainParams& params, Rng& rng) {
  if (!(params.veil >= 0.0)) throw ParameterError("rain: veil must be >= 0");
  const Plane rain = rain_streaks(img.height, img.width, params, rng);
  const double lift = 0.1 * params.veil;
  Image out = img;
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    for (int c = 0; c < Image::kChannels; ++c) {
      float& v = out.data[i * Image::kChannels + c];
      v = static_cast<float>(v + rain.data[i] + lift);
    }
  }
  clamp_inplace(out);
  return out;
}

// --- specs ---------------------------------------------------------------

namespace {

double scaled(int image_size, double px_at_256) { return px_at_256 * image_size / 256.0; }

double inpaint_thickness_lo(int image_size) { return std::max(1.0, scaled(image_size, 5.0)); }
double inpaint_thickness_hi(int image_size) { return std::max(1.0, scaled(image_size, 10.0)); }

double rain_length_lo(int image_size) { return std::max(2.0, image_size / 10.0); }
double rain_length_hi(int image_size) { return std::max(3.0, image_size / 3.0); }

RainParams rain_params_from_spec(const DegradationSpec& spec) {
  RainParams rp;
  if (spec.kind == Kind::RainSimple) {
    rp.layers.push_back({spec.param("angle_deg"), spec.param("density"), spec.param("intensity"),
                         spec.param("length")});
    return rp;
  }
  const int layers = static_cast<int>(spec.param("layers"));
  for (int i = 0; i < layers; ++i) {
    const std::string s = "_" + std::to_string(i);
    rp.layers.push_back({spec.param("angle_deg" + s), spec.param("density" + s),
                         spec.param("intensity" + s), spec.param("length" + s)});
  }
  rp.veil = spec.param("veil");
  return rp;
}

HazeParams haze_params_from_spec(const DegradationSpec& spec) {
  HazeParams hp;
  hp.beta = spec.param("beta");
  hp.airlight = spec.param("airlight");
  hp.angle = spec.param("angle");
  hp.cx = spec.param("cx");
  hp.cy = spec.param("cy");
  hp.radial_weight = spec.param("radial_weight");
  return hp;
}

std::string base_name(const std::string& key) {
  const auto pos = key.rfind('_');
  if (pos == std::string::npos || pos + 1 >= key.size()) return key;
  for (std::size_t i = pos + 1; i < key.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(key[i]))) return key;
  }
  return key.substr(0, pos) + "_i";
}

}  // namespace

std::vector<ParamRange> param_ranges(Kind kind, int image_size) {
  switch (kind) {
    case Kind::GaussianNoise: return {{"sigma_255", 10.0, 50.0}};
    case Kind::GaussianBlur: return {{"sigma", 2.0, 4.0}};
    case Kind::PoissonNoise: return {{"level", 2.0, 2.0}};
    case Kind::SaltPepper: return {{"snr", 0.95, 0.95}};
    case Kind::Jpeg: return {{"quality", 10.0, 40.0, true}};
    case Kind::Ringing: return {{"cutoff", kPi / 3.0, kPi}};
    case Kind::RlArtifact: return {{"psf_sigma", 2.0, 4.0}, {"iters", 10.0, 30.0, true}};
    case Kind::InpaintMask:
      return {{"streaks", 5.0, 10.0, true},
              {"thickness", inpaint_thickness_lo(image_size), inpaint_thickness_hi(image_size)}};
    case Kind::Haze:
      return {{"beta", 0.6, 1.8},      {"airlight", 0.7, 1.0}, {"angle", 0.0, 2.0 * kPi},
              {"cx", 0.0, 1.0},        {"cy", 0.0, 1.0},       {"radial_weight", 0.0, 1.0}};
    case Kind::RainSimple:
      return {{"angle_deg", 70.0, 110.0},
              {"density", 0.02, 0.08},
              {"intensity", 0.2, 0.6},
              {"length", rain_length_lo(image_size), rain_length_hi(image_size)}};
    case Kind::RainComplex:
      return {{"layers", 2.0, 3.0, true},
              {"angle_deg_i", 60.0, 120.0},
              {"density_i", 0.01, 0.05},
              {"intensity_i", 0.15, 0.5},
              {"length_i", rain_length_lo(image_size), rain_length_hi(image_size)},
              {"veil", 0.0, 1.0}};
  }
  return {};
}

DegradationSpec sample_spec(Kind kind, Rng& rng, int image_size) {
  DegradationSpec spec;
  spec.kind = kind;
  auto draw = [&](const ParamRange& r) {
    if (r.lo == r.hi) return r.lo;
    if (r.integer) {
      return static_cast<double>(rng.uniform_int(static_cast<std::int64_t>(r.lo),
                                                 static_cast<std::int64_t>(r.hi)));
    }
    return rng.uniform(r.lo, r.hi);
  };
  const auto ranges = param_ranges(kind, image_size);
  if (kind == Kind::RainComplex) {
    const int layers = static_cast<int>(draw(ranges[0]));
    spec.params["layers"] = layers;
    std::vector<double> angles;
    for (int i = 0; i < layers; ++i) {
      const std::string s = "_" + std::to_string(i);
      // Layers keep visibly distinct orientations.
      double angle = draw(ranges[1]);
      for (int attempt = 0; attempt < 64; ++attempt) {
        const bool clash = std::any_of(angles.begin(), angles.end(),
                                       [&](double a) { return std::abs(a - angle) < 8.0; });
        if (!clash) break;
        angle = draw(ranges[1]);
      }
      angles.push_back(angle);
      spec.params["angle_deg" + s] = angle;
      spec.params["density" + s] = draw(ranges[2]);
      spec.params["intensity" + s] = draw(ranges[3]);
      spec.params["length" + s] = draw(ranges[4]);
    }
    spec.params["veil"] = draw(ranges[5]);
  } else {
    for (const auto& r : ranges) spec.params[r.name] = draw(r);
  }
  spec.seed = rng.next();
  return spec;
}

std::optional<std::string> range_violation(const DegradationSpec& spec, int image_size) {
  const auto ranges = param_ranges(spec.kind, image_size);
  auto find_range = [&](const std::string& key) -> const ParamRange* {
    const std::string base = spec.kind == Kind::RainComplex ? base_name(key) : key;
    for (const auto& r : ranges) {
      if (r.name == base) return &r;
    }
    return nullptr;
  };
  for (const auto& [key, value] : spec.params) {
    const ParamRange* r = find_range(key);
    if (r == nullptr) return "unexpected parameter '" + key + "'";
    const bool upper_open = spec.kind == Kind::Ringing || (r->lo != r->hi && !r->integer);
    const bool above = upper_open && r->lo != r->hi ? value >= r->hi : value > r->hi;
    if (value < r->lo || above) {
      return key + "=" + std::to_string(value) + " outside [" + std::to_string(r->lo) + ", " +
             std::to_string(r->hi) + "]";
    }
    if (r->integer && value != std::floor(value)) return key + " must be an integer";
  }
  for (const auto& r : ranges) {
    if (r.name.ends_with("_i")) continue;
    if (!spec.params.contains(r.name)) return "missing parameter '" + r.name + "'";
  }
  return std::nullopt;
}

Image apply(const DegradationSpec& spec, const Image& img) {
  Rng rng(spec.seed);
  switch (spec.kind) {
    case Kind::GaussianNoise: return gaussian_noise(img, spec.param("sigma_255"), rng);
    case Kind::GaussianBlur: return gaussian_blur(img, spec.param("sigma"));
    case Kind::PoissonNoise: return poisson_noise(img, spec.param("level"), rng);
    case Kind::SaltPepper: return salt_pepper(img, spec.param("snr"), rng);
    case Kind::Jpeg: return jpeg_artifacts(img, static_cast<int>(spec.param("quality")));
    case Kind::Ringing: return ringing(img, spec.param("cutoff"));
    case Kind::RlArtifact:
      return rl_artifact(img, spec.param("psf_sigma"), static_cast<int>(spec.param("iters")));
    case Kind::InpaintMask:
      return inpaint_mask(
          img, {static_cast<int>(spec.param("streaks")), spec.param("thickness")}, rng);
    case Kind::Haze: return synthesize_haze(img, haze_params_from_spec(spec));
    case Kind::RainSimple:
    case Kind::RainComplex: return synthesize_rain(img, rain_params_from_spec(spec), rng);
  }
  throw ParameterError("unhandled degradation kind");
}

std::vector<Kind> mixable_kinds() {
  return {Kind::GaussianNoise, Kind::GaussianBlur, Kind::PoissonNoise, Kind::SaltPepper,
          Kind::Jpeg,          Kind::Ringing,      Kind::Haze,         Kind::RainSimple,
          Kind::InpaintMask};
}

std::vector<Kind> sample_mixed_kinds(Rng& rng) {
  auto pool = mixable_kinds();
  const auto n = rng.uniform_int(2, 3);
  std::vector<Kind> kinds;
  for (std::int64_t i = 0; i < n; ++i) {
    const auto j = rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1);
    kinds.push_back(pool[j]);
    pool.erase(pool.begin() + j);
  }
  std::stable_partition(kinds.begin(), kinds.end(), [](Kind k) { return k != Kind::InpaintMask; });
  return kinds;
}

void validate_mixed(const std::vector<DegradationSpec>& specs) {
  if (specs.empty()) throw ParameterError("compose_mixed: spec list is empty");
  std::set<Kind> seen;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!seen.insert(specs[i].kind).second) {
      throw ParameterError("compose_mixed: kind " + std::string(kind_name(specs[i].kind)) +
                           " appears twice");
    }
    if (specs[i].kind == Kind::InpaintMask && i + 1 != specs.size()) {
      throw ParameterError("compose_mixed: inpaint_mask must be the last degradation");
    }
  }
}

Image compose_mixed(const Image& img, const std::vector<DegradationSpec>& specs) {
  validate_mixed(specs);
  Image out = img;
  for (const auto& spec : specs) out = apply(spec, out);
  return out;
}

}  // namespace visprompt::degrade
