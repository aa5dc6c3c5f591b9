#include "visprompt/taskbank.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "visprompt/error.hpp"

namespace visprompt {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxAttempts = 64;

using Rgb = std::array<double, 3>;

Rgb random_color(Rng& rng) { return {rng.uniform01(), rng.uniform01(), rng.uniform01()}; }

void blend(Image& img, int y, int x, const Rgb& c, double alpha) {
  for (int ch = 0; ch < 3; ++ch) {
    float& v = img.at(y, x, ch);
    v = static_cast<float>(v * (1.0 - alpha) + c[ch] * alpha);
  }
}

void paint_gradient(Image& img, bool radial, Rng& rng) {
  const int s = img.height;
  const Rgb c0 = random_color(rng);
  const Rgb c1 = random_color(rng);
  const double angle = rng.uniform(0.0, 2.0 * kPi);
  const double cx = rng.uniform(0.0, s);
  const double cy = rng.uniform(0.0, s);
  const double radius = rng.uniform(0.5 * s, 1.2 * s);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      double t;
      if (radial) {
        t = std::min(1.0, std::hypot(x + 0.5 - cx, y + 0.5 - cy) / radius);
      } else {
        const double u = ((x + 0.5 - s / 2.0) * std::cos(angle) +
                          (y + 0.5 - s / 2.0) * std::sin(angle)) / s;
        t = std::clamp(u + 0.5, 0.0, 1.0);
      }
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = static_cast<float>(c0[ch] + (c1[ch] - c0[ch]) * t);
    }
  }
}

void paint_grating(Image& img, Rng& rng) {
  const int s = img.height;
  const double period = rng.uniform(4.0, 16.0);
  const double angle = rng.uniform(0.0, kPi);
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const double alpha = rng.uniform(0.3, 0.8);
  const Rgb c = random_color(rng);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const double u = x * std::cos(angle) + y * std::sin(angle);
      const double w = 0.5 + 0.5 * std::sin(2.0 * kPi * u / period + phase);
      blend(img, y, x, c, alpha * w);
    }
  }
}

void paint_value_noise(Image& img, Rng& rng) {
  const int s = img.height;
  const double cell = rng.uniform(3.0, 8.0);
  const double amplitude = rng.uniform(0.2, 0.5);
  const int g = static_cast<int>(std::ceil(s / cell)) + 2;
  std::vector<double> grid(static_cast<std::size_t>(g) * g);
  for (double& v : grid) v = rng.uniform01();
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const double gx = x / cell;
      const double gy = y / cell;
      const int ix = static_cast<int>(gx);
      const int iy = static_cast<int>(gy);
      const double fx = gx - ix;
      const double fy = gy - iy;
      // Smoothstep interpolation between lattice values.
      const double sx = fx * fx * (3.0 - 2.0 * fx);
      const double sy = fy * fy * (3.0 - 2.0 * fy);
      auto at = [&](int a, int b) { return grid[static_cast<std::size_t>(b) * g + a]; };
      const double top = at(ix, iy) + (at(ix + 1, iy) - at(ix, iy)) * sx;
      const double bot = at(ix, iy + 1) + (at(ix + 1, iy + 1) - at(ix, iy + 1)) * sx;
      const double n = top + (bot - top) * sy;
      for (int ch = 0; ch < 3; ++ch) {
        float& v = img.at(y, x, ch);
        v = static_cast<float>(v + amplitude * (n - 0.5));
      }
    }
  }
}

bool inside_polygon(double px, double py, const std::vector<degrade::Point>& poly) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y > py) != (b.y > py) && px < (b.x - a.x) * (py - a.y) / (b.y - a.y) + a.x) in = !in;
  }
  return in;
}

void paint_polygon(Image& img, Rng& rng) {
  const int s = img.height;
  const auto n = rng.uniform_int(3, 6);
  const double cx = rng.uniform(0.0, s);
  const double cy = rng.uniform(0.0, s);
  std::vector<double> angles(static_cast<std::size_t>(n));
  for (double& a : angles) a = rng.uniform(0.0, 2.0 * kPi);
  std::sort(angles.begin(), angles.end());
  std::vector<degrade::Point> poly;
  for (double a : angles) {
    const double r = rng.uniform(0.15 * s, 0.45 * s);
    poly.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
  }
  const Rgb c = random_color(rng);
  const double alpha = rng.uniform(0.7, 1.0);
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x)
      if (inside_polygon(x + 0.5, y + 0.5, poly)) blend(img, y, x, c, alpha);
}

void paint_circle(Image& img, Rng& rng) {
  const int s = img.height;
  const double cx = rng.uniform(0.0, s);
  const double cy = rng.uniform(0.0, s);
  const double r = rng.uniform(0.1 * s, 0.4 * s);
  const Rgb c = random_color(rng);
  const double alpha = rng.uniform(0.7, 1.0);
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x)
      if (std::hypot(x + 0.5 - cx, y + 0.5 - cy) <= r) blend(img, y, x, c, alpha);
}

std::vector<LayerKind> draw_plan(Rng& rng) {
  std::vector<LayerKind> plan;
  plan.push_back(rng.bernoulli(0.5) ? LayerKind::LinearGradient : LayerKind::RadialGradient);
  if (rng.bernoulli(kGratingWeight)) plan.push_back(LayerKind::Grating);
  if (rng.bernoulli(kValueNoiseWeight)) plan.push_back(LayerKind::ValueNoise);
  const auto total = rng.uniform_int(2, 5);
  while (static_cast<std::int64_t>(plan.size()) < total) {
    plan.push_back(rng.bernoulli(0.5) ? LayerKind::Polygon : LayerKind::Circle);
  }
  return plan;
}

Image render(int size, const std::vector<LayerKind>& plan, Rng& rng) {
  Image img(size, size);
  for (LayerKind k : plan) {
    switch (k) {
      case LayerKind::LinearGradient: paint_gradient(img, false, rng); break;
      case LayerKind::RadialGradient: paint_gradient(img, true, rng); break;
      case LayerKind::Grating: paint_grating(img, rng); break;
      case LayerKind::ValueNoise: paint_value_noise(img, rng); break;
      case LayerKind::Polygon: paint_polygon(img, rng); break;
      case LayerKind::Circle: paint_circle(img, rng); break;
    }
    clamp_inplace(img);
  }
  return img;
}

// Last-resort contrast stretch into [0.2, 0.8]; plus a luma ramp when the
// image carries no luma variation at all.
Image stretch(Image img) {
  const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
  const double mn = *lo;
  const double range = *hi - *lo;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double ramp = img.height > 1 ? static_cast<double>(y) / (img.height - 1) : 0.0;
      for (int c = 0; c < 3; ++c) {
        float& v = img.at(y, x, c);
        const double t = range > 1e-6 ? (v - mn) / range : 0.0;
        v = static_cast<float>(0.2 + 0.6 * (0.5 * t + 0.5 * ramp));
      }
    }
  }
  return img;
}

void apply_overrides(std::map<std::string, double>& params, const json& overrides,
                     std::string_view task) {
  for (const auto& [key, value] : overrides.items()) {
    auto it = params.find(key);
    if (it == params.end()) {
      throw ConfigError("override '" + key + "' is not a parameter of task " + std::string(task));
    }
    it->second = value.get<double>();
  }
}

json degradation_list(const std::vector<degrade::DegradationSpec>& chain) {
  json arr = json::array();
  for (const auto& d : chain) arr.push_back(degrade::to_json(d));
  return arr;
}

}  // namespace

bool CleanImageInfo::has(LayerKind k) const {
  return std::find(layers.begin(), layers.end(), k) != layers.end();
}

bool corpus_invariants_hold(const Image& img) {
  const Plane y = luma(img);
  const auto [lo, hi] = std::minmax_element(y.data.begin(), y.data.end());
  if (*hi - *lo < kMinDynamicRange) return false;
  for (int c = 0; c < 3; ++c) {
    const double m = channel_mean(img, c);
    if (m < kMinChannelMean || m > kMaxChannelMean) return false;
  }
  return true;
}

Image gen_clean_image(int size, Rng& rng, CleanImageInfo* info) {
  if (size < 2) throw ParameterError("clean image size must be >= 2");
  Rng plan_rng = rng.child("plan");
  const auto plan = draw_plan(plan_rng);
  CleanImageInfo local;
  local.layers = plan;
  Image img;
  bool ok = false;
  for (int a = 0; a < kMaxAttempts && !ok; ++a) {
    Rng layer_rng = rng.child("attempt", static_cast<std::uint64_t>(a));
    img = render(size, plan, layer_rng);
    local.attempts = a + 1;
    ok = corpus_invariants_hold(img);
  }
  if (!ok) {
    img = stretch(std::move(img));
    local.stretched = true;
  }
  if (info != nullptr) *info = local;
  return img;
}

std::vector<Image> gen_clean_corpus(int n, int size, const Rng& rng,
                                    std::vector<CleanImageInfo>* info) {
  if (n < 1) throw ParameterError("corpus size must be >= 1");
  std::vector<Image> corpus;
  corpus.reserve(static_cast<std::size_t>(n));
  if (info != nullptr) info->clear();
  for (int i = 0; i < n; ++i) {
    Rng r = rng.child("clean", static_cast<std::uint64_t>(i));
    CleanImageInfo ci;
    corpus.push_back(gen_clean_image(size, r, &ci));
    if (info != nullptr) info->push_back(std::move(ci));
  }
  return corpus;
}

// --- pairs ----------------------------------------------------------------

bool operator==(const PairSpec& a, const PairSpec& b) {
  return a.task == b.task && a.chain == b.chain && a.mixed == b.mixed &&
         a.lowlight.gamma == b.lowlight.gamma && a.lowlight.scale == b.lowlight.scale &&
         a.lowlight.noise_255 == b.lowlight.noise_255 && a.lowlight_seed == b.lowlight_seed &&
         a.llf.sigma_r == b.llf.sigma_r && a.llf.alpha == b.llf.alpha &&
         a.llf.levels == b.llf.levels && a.canny.low == b.canny.low && a.canny.high == b.canny.high;
}

json to_json(const PairSpec& spec) {
  json j;
  j["task"] = spec.mixed ? "mixed" : std::string(task_name(spec.task));
  switch (spec.mixed ? TaskId::GaussNoise : spec.task) {
    case TaskId::Lowlight:
      j["params"] = {{"gamma", spec.lowlight.gamma},
                     {"scale", spec.lowlight.scale},
                     {"noise_255", spec.lowlight.noise_255}};
      j["seed"] = spec.lowlight_seed;
      break;
    case TaskId::Llf:
      j["params"] = {{"sigma_r", spec.llf.sigma_r}, {"alpha", spec.llf.alpha}, {"levels", spec.llf.levels}};
      break;
    case TaskId::Canny:
      j["params"] = {{"low", spec.canny.low}, {"high", spec.canny.high}};
      break;
    case TaskId::Laplacian:
      j["params"] = json::object();
      break;
    default:
      j["degradations"] = degradation_list(spec.chain);
      break;
  }
  return j;
}

PairSpec pair_spec_from_json(const json& j) {
  PairSpec spec;
  try {
    const std::string task = j.at("task").get<std::string>();
    if (task == "mixed") {
      spec.mixed = true;
    } else {
      spec.task = task_from_name(task);
    }
    if (j.contains("degradations")) {
      for (const auto& d : j.at("degradations")) spec.chain.push_back(degrade::spec_from_json(d));
    }
    if (!spec.mixed) {
      const json params = j.value("params", json::object());
      switch (spec.task) {
        case TaskId::Lowlight:
          spec.lowlight = {params.at("gamma").get<double>(), params.at("scale").get<double>(),
                           params.at("noise_255").get<double>()};
          spec.lowlight_seed = j.at("seed").get<std::uint64_t>();
          break;
        case TaskId::Llf:
          spec.llf = {params.at("sigma_r").get<double>(), params.at("alpha").get<double>(),
                      params.at("levels").get<int>()};
          break;
        case TaskId::Canny:
          spec.canny = {params.at("low").get<double>(), params.at("high").get<double>()};
          break;
        default:
          break;
      }
    }
  } catch (const json::exception& e) {
    throw ParameterError(std::string("malformed pair spec: ") + e.what());
  }
  return spec;
}

degrade::Kind degradation_for(TaskId task) {
  using degrade::Kind;
  switch (task) {
    case TaskId::GaussNoise: return Kind::GaussianNoise;
    case TaskId::PoissonNoise: return Kind::PoissonNoise;
    case TaskId::SpNoise: return Kind::SaltPepper;
    case TaskId::GaussBlur: return Kind::GaussianBlur;
    case TaskId::Jpeg: return Kind::Jpeg;
    case TaskId::Ringing: return Kind::Ringing;
    case TaskId::Rl: return Kind::RlArtifact;
    case TaskId::Inpaint: return Kind::InpaintMask;
    case TaskId::RainSimple: return Kind::RainSimple;
    case TaskId::RainComplex: return Kind::RainComplex;
    case TaskId::Haze: return Kind::Haze;
    default: break;
  }
  throw ParameterError("task " + std::string(task_name(task)) + " is not a degradation task");
}

PairSpec sample_pair_spec(TaskId task, Rng& rng, int image_size, const json& overrides) {
  PairSpec spec;
  spec.task = task;
  const std::string_view name = task_name(task);
  switch (task) {
    case TaskId::Lowlight: {
      spec.lowlight = ops::sample_lowlight(rng);
      std::map<std::string, double> p = {{"gamma", spec.lowlight.gamma},
                                         {"scale", spec.lowlight.scale},
                                         {"noise_255", spec.lowlight.noise_255}};
      apply_overrides(p, overrides, name);
      spec.lowlight = {p["gamma"], p["scale"], p["noise_255"]};
      spec.lowlight_seed = rng.next();
      return spec;
    }
    case TaskId::Llf: {
      std::map<std::string, double> p = {{"sigma_r", spec.llf.sigma_r},
                                         {"alpha", spec.llf.alpha},
                                         {"levels", static_cast<double>(spec.llf.levels)}};
      apply_overrides(p, overrides, name);
      spec.llf = {p["sigma_r"], p["alpha"], static_cast<int>(p["levels"])};
      return spec;
    }
    case TaskId::Canny: {
      std::map<std::string, double> p = {{"low", spec.canny.low}, {"high", spec.canny.high}};
      apply_overrides(p, overrides, name);
      spec.canny = {p["low"], p["high"]};
      return spec;
    }
    case TaskId::Laplacian: {
      std::map<std::string, double> none;
      apply_overrides(none, overrides, name);
      return spec;
    }
    default: {
      auto d = degrade::sample_spec(degradation_for(task), rng, image_size);
      apply_overrides(d.params, overrides, name);
      spec.chain.push_back(std::move(d));
      return spec;
    }
  }
}

PairSpec sample_mixed_spec(const std::vector<degrade::Kind>& kinds, Rng& rng, int image_size) {
  PairSpec spec;
  spec.mixed = true;
  for (degrade::Kind k : kinds) spec.chain.push_back(degrade::sample_spec(k, rng, image_size));
  degrade::validate_mixed(spec.chain);
  return spec;
}

QAPair build_pair(const Image& clean, const PairSpec& spec) {
  QAPair pair;
  pair.spec = spec;
  if (spec.mixed) {
    pair.question = degrade::compose_mixed(clean, spec.chain);
    pair.answer = clean;
    return pair;
  }
  switch (spec.task) {
    case TaskId::Lowlight: {
      Rng r(spec.lowlight_seed);
      pair.question = ops::darken_lowlight(clean, spec.lowlight, r);
      pair.answer = clean;
      break;
    }
    case TaskId::Llf:
      pair.question = clean;
      pair.answer = ops::local_laplacian(clean, spec.llf);
      break;
    case TaskId::Canny:
      pair.question = clean;
      pair.answer = ops::canny(clean, spec.canny);
      break;
    case TaskId::Laplacian:
      pair.question = clean;
      pair.answer = ops::laplacian_edge(clean);
      break;
    default: {
      if (spec.chain.empty()) {
        throw ParameterError("pair spec for " + std::string(task_name(spec.task)) +
                             " has no degradation");
      }
      Image q = clean;
      for (const auto& d : spec.chain) q = degrade::apply(d, q);
      pair.question = std::move(q);
      pair.answer = clean;
      break;
    }
  }
  return pair;
}

QAPair make_pair(TaskId task, const Image& clean, Rng& rng, const json& overrides) {
  return build_pair(clean, sample_pair_spec(task, rng, clean.height, overrides));
}

// --- episodes ---------------------------------------------------------------

namespace {

std::pair<std::size_t, std::size_t> distinct_indices(std::size_t n, Rng& rng) {
  if (n < 2) throw ParameterError("episode needs a corpus of at least 2 images");
  const auto last = static_cast<std::int64_t>(n) - 1;
  const auto i = static_cast<std::size_t>(rng.uniform_int(0, last));
  auto j = static_cast<std::size_t>(rng.uniform_int(0, last - 1));
  if (j >= i) ++j;
  return {i, j};
}

}  // namespace

json overrides_for(const json& task_overrides, TaskId task) {
  if (!task_overrides.is_object()) return json::object();
  auto it = task_overrides.find(std::string(task_name(task)));
  return it == task_overrides.end() ? json::object() : *it;
}

Episode make_episode(TaskId task, const std::vector<Image>& corpus, Rng& rng,
                     const json& overrides) {
  Episode ep;
  ep.task = task;
  std::tie(ep.prompt_index, ep.query_index) = distinct_indices(corpus.size(), rng);
  Rng prompt_rng(rng.next());
  Rng query_rng(rng.next());
  const Image& pc = corpus[ep.prompt_index];
  const Image& qc = corpus[ep.query_index];
  ep.prompt = build_pair(pc, sample_pair_spec(task, prompt_rng, pc.height, overrides));
  ep.query = build_pair(qc, sample_pair_spec(task, query_rng, qc.height, overrides));
  return ep;
}

Episode make_mixed_episode(const std::vector<Image>& corpus, Rng& rng) {
  Episode ep;
  std::tie(ep.prompt_index, ep.query_index) = distinct_indices(corpus.size(), rng);
  ep.mixed_kinds = degrade::sample_mixed_kinds(rng);
  Rng prompt_rng(rng.next());
  Rng query_rng(rng.next());
  const Image& pc = corpus[ep.prompt_index];
  const Image& qc = corpus[ep.query_index];
  ep.prompt = build_pair(pc, sample_mixed_spec(ep.mixed_kinds, prompt_rng, pc.height));
  ep.query = build_pair(qc, sample_mixed_spec(ep.mixed_kinds, query_rng, qc.height));
  return ep;
}

TaskId sample_task(const std::vector<TaskId>& tasks, Rng& rng) {
  if (tasks.empty()) throw ParameterError("task list is empty");
  return tasks[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(tasks.size()) - 1))];
}

}  // namespace visprompt
