#include "visprompt/run_config.hpp"

#include <fstream>
#include <set>

#include "visprompt/error.hpp"

namespace visprompt {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<TaskId, std::string_view>, 15> kTaskNames = {{
    {TaskId::GaussNoise, "gauss_noise"},
    {TaskId::PoissonNoise, "poisson_noise"},
    {TaskId::SpNoise, "sp_noise"},
    {TaskId::GaussBlur, "gauss_blur"},
    {TaskId::Jpeg, "jpeg"},
    {TaskId::Ringing, "ringing"},
    {TaskId::Rl, "rl"},
    {TaskId::Inpaint, "inpaint"},
    {TaskId::RainSimple, "rain_simple"},
    {TaskId::RainComplex, "rain_complex"},
    {TaskId::Haze, "haze"},
    {TaskId::Lowlight, "lowlight"},
    {TaskId::Llf, "llf"},
    {TaskId::Canny, "canny"},
    {TaskId::Laplacian, "laplacian"},
}};

}  // namespace

std::string_view task_name(TaskId task) {
  for (const auto& [id, name] : kTaskNames) {
    if (id == task) return name;
  }
  return "unknown";
}

std::optional<TaskId> parse_task(std::string_view name) {
  for (const auto& [id, n] : kTaskNames) {
    if (n == name) return id;
  }
  return std::nullopt;
}

TaskId task_from_name(std::string_view name) {
  if (auto t = parse_task(name)) return *t;
  throw ParameterError("unknown task id '" + std::string(name) + "'");
}

bool is_restoration(TaskId task) {
  switch (task) {
    case TaskId::Lowlight:
    case TaskId::Llf:
    case TaskId::Canny:
    case TaskId::Laplacian:
      return false;
    default:
      return true;
  }
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::PromptGip: return "promptgip";
    case Variant::Painter: return "painter";
    case Variant::Direct: return "direct";
  }
  return "unknown";
}

Variant variant_from_name(std::string_view name) {
  if (name == "promptgip") return Variant::PromptGip;
  if (name == "painter") return Variant::Painter;
  if (name == "direct") return Variant::Direct;
  throw ConfigError("unknown variant '" + std::string(name) + "' (expected promptgip, painter or direct)");
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid config: " + msg); };
  if (image_size <= 0 || patch_size <= 0) fail("image_size and patch_size must be positive");
  if (image_size % patch_size != 0) fail("image_size must be divisible by patch_size");
  if (!(mask_ratio > 0.0 && mask_ratio <= 1.0)) fail("mask_ratio must lie in (0,1]");
  if (embed_dim <= 0 || heads <= 0 || embed_dim % heads != 0) {
    fail("embed_dim must be a positive multiple of heads");
  }
  if (depth < 0) fail("depth must be >= 0");
  if (mlp_ratio <= 0) fail("mlp_ratio must be positive");
  if (!(base_lr >= 0.0)) fail("base_lr must be >= 0");
  if (batch_size <= 0) fail("batch_size must be positive");
  if (steps < 0) fail("steps must be >= 0");
  if (tasks.empty()) fail("task list is empty");
  if (corpus_size < 2) fail("corpus_size must be at least 2");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (!(warmup_frac >= 0.0 && warmup_frac < 1.0)) fail("warmup_frac must lie in [0,1)");
  if (!(grad_clip > 0.0)) fail("grad_clip must be positive");
  if (log_every <= 0 || checkpoint_every <= 0) fail("log_every and checkpoint_every must be positive");
  if (threads <= 0) fail("threads must be positive");
  if (!(mixed_fraction >= 0.0 && mixed_fraction <= 1.0)) fail("mixed_fraction must lie in [0,1]");
  if (!task_overrides.is_object()) fail("task_overrides must be an object");
  for (const auto& [name, params] : task_overrides.items()) {
    if (!parse_task(name)) fail("task_overrides names unknown task '" + name + "'");
    if (!params.is_object()) fail("task_overrides." + name + " must be an object");
  }
}

RunConfig RunConfig::two_task_default() {
  RunConfig cfg;
  cfg.tasks = {TaskId::GaussNoise, TaskId::Canny};
  cfg.task_overrides = json{{"gauss_noise", {{"sigma_255", 25.0}}}};
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json tasks = json::array();
  for (TaskId t : cfg.tasks) tasks.push_back(std::string(task_name(t)));
  return json{
      {"seed", cfg.seed},
      {"image_size", cfg.image_size},
      {"patch_size", cfg.patch_size},
      {"embed_dim", cfg.embed_dim},
      {"depth", cfg.depth},
      {"heads", cfg.heads},
      {"mlp_ratio", cfg.mlp_ratio},
      {"mask_ratio", cfg.mask_ratio},
      {"base_lr", cfg.base_lr},
      {"batch_size", cfg.batch_size},
      {"steps", cfg.steps},
      {"variant", std::string(variant_name(cfg.variant))},
      {"tasks", tasks},
      {"corpus_size", cfg.corpus_size},
      {"out_dir", cfg.out_dir},
      {"weight_decay", cfg.weight_decay},
      {"warmup_frac", cfg.warmup_frac},
      {"grad_clip", cfg.grad_clip},
      {"log_every", cfg.log_every},
      {"checkpoint_every", cfg.checkpoint_every},
      {"threads", cfg.threads},
      {"mixed_fraction", cfg.mixed_fraction},
      {"task_overrides", cfg.task_overrides},
  };
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "seed",         "image_size",  "patch_size",  "embed_dim",      "depth",
      "heads",        "mlp_ratio",   "mask_ratio",  "base_lr",        "batch_size",
      "steps",        "variant",     "tasks",       "corpus_size",    "out_dir",
      "weight_decay", "warmup_frac", "grad_clip",   "log_every",      "checkpoint_every",
      "threads",      "mixed_fraction", "task_overrides"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  RunConfig cfg;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("seed", cfg.seed);
    get("image_size", cfg.image_size);
    get("patch_size", cfg.patch_size);
    get("embed_dim", cfg.embed_dim);
    get("depth", cfg.depth);
    get("heads", cfg.heads);
    get("mlp_ratio", cfg.mlp_ratio);
    get("mask_ratio", cfg.mask_ratio);
    get("base_lr", cfg.base_lr);
    get("batch_size", cfg.batch_size);
    get("steps", cfg.steps);
    get("corpus_size", cfg.corpus_size);
    get("out_dir", cfg.out_dir);
    get("weight_decay", cfg.weight_decay);
    get("warmup_frac", cfg.warmup_frac);
    get("grad_clip", cfg.grad_clip);
    get("log_every", cfg.log_every);
    get("checkpoint_every", cfg.checkpoint_every);
    get("threads", cfg.threads);
    get("mixed_fraction", cfg.mixed_fraction);
    if (j.contains("variant")) cfg.variant = variant_from_name(j.at("variant").get<std::string>());
    if (j.contains("tasks")) {
      cfg.tasks.clear();
      for (const auto& t : j.at("tasks")) {
        auto id = parse_task(t.get<std::string>());
        if (!id) throw ConfigError("unknown task '" + t.get<std::string>() + "' in config");
        cfg.tasks.push_back(*id);
      }
    }
    if (j.contains("task_overrides")) cfg.task_overrides = j.at("task_overrides");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write config " + path);
  os << to_json(cfg).dump(2) << '\n';
}

}  // namespace visprompt
