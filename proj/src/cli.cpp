#include "visprompt/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <set>

#include "visprompt/degrade.hpp"
#include "visprompt/error.hpp"
#include "visprompt/eval.hpp"
#include "visprompt/io.hpp"
#include "visprompt/operators.hpp"
#include "visprompt/run_config.hpp"
#include "visprompt/sequence.hpp"
#include "visprompt/taskbank.hpp"
#include "visprompt/train.hpp"
#include "visprompt/vit.hpp"

namespace visprompt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

std::string pad(std::size_t i, int width = 4) {
  std::string s = std::to_string(i);
  return std::string(s.size() < static_cast<std::size_t>(width) ? width - s.size() : 0, '0') + s;
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

json parse_json_arg(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(what + " is not valid JSON: " + e.what());
  }
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& sets,
                      const Globals& g) {
  json j = path.empty() ? to_json(RunConfig{}) : to_json(load_run_config(path));
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    const std::string key = s.substr(0, eq);
    const std::string value = s.substr(eq + 1);
    json v;
    try {
      v = json::parse(value);
    } catch (const json::exception&) {
      v = value;  // bare strings such as variant names
    }
    j[key] = v;
  }
  RunConfig cfg = run_config_from_json(j);
  if (g.seed) cfg.seed = *g.seed;
  if (g.threads) cfg.threads = *g.threads;
  cfg.validate();
  return cfg;
}

Order inference_order(const RunConfig& cfg) { return variant_spec(cfg.variant).order; }

// --- synth -----------------------------------------------------------------

Tensor int_tensor(const std::vector<int>& v) {
  Tensor t;
  t.shape = {v.size()};
  for (int x : v) t.values.push_back(static_cast<float>(x));
  return t;
}

void dump_tokens(const fs::path& path, const TokenSequence& seq) {
  TensorArchive ar;
  Tensor tokens;
  tokens.shape = {static_cast<std::uint64_t>(seq.length()), static_cast<std::uint64_t>(seq.token_dim())};
  tokens.values = seq.tokens;
  ar.emplace_back("tokens", std::move(tokens));
  ar.emplace_back("slot_of", int_tensor(seq.slot_of));
  ar.emplace_back("patch_index", int_tensor(seq.patch_index));
  std::vector<int> masked(seq.masked.begin(), seq.masked.end());
  ar.emplace_back("masked", int_tensor(masked));
  save_archive(path, ar);
}

int cmd_synth(const RunConfig& cfg, const fs::path& out, int episodes, bool tokens, std::ostream& os) {
  fs::create_directories(out / "corpus");
  fs::create_directories(out / "episodes");
  const auto corpus = training_corpus(cfg);
  json manifest;
  manifest["config"] = to_json(cfg);
  json files = json::array();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::string name = "corpus/clean_" + pad(i) + ".ppm";
    write_ppm(out / name, corpus[i]);
    files.push_back(name);
  }
  manifest["corpus"] = files;
  json eps = json::array();
  for (int e = 0; e < episodes; ++e) {
    // Episode e of the manifest is item e of training step 1.
    const EpisodeDraw d = draw_training_item(cfg, corpus, 1, e);
    const std::string stem = "episodes/ep_" + pad(static_cast<std::size_t>(e));
    const std::array<std::pair<const char*, const Image*>, 4> imgs = {{
        {"q1", &d.episode.prompt.question},
        {"a1", &d.episode.prompt.answer},
        {"q2", &d.episode.query.question},
        {"a2", &d.episode.query.answer},
    }};
    json entry;
    entry["task"] = d.episode.task ? std::string(task_name(*d.episode.task)) : "mixed";
    entry["step"] = 1;
    entry["item"] = e;
    entry["prompt_index"] = d.episode.prompt_index;
    entry["query_index"] = d.episode.query_index;
    entry["prompt_spec"] = to_json(d.episode.prompt.spec);
    entry["query_spec"] = to_json(d.episode.query.spec);
    json paths;
    for (const auto& [slot, img] : imgs) {
      const std::string name = stem + "_" + slot + ".ppm";
      write_ppm(out / name, *img);
      paths[slot] = name;
    }
    if (tokens) {
      const std::string name = stem + "_tokens.gipt";
      dump_tokens(out / name, d.sequence);
      paths["tokens"] = name;
    }
    entry["files"] = paths;
    eps.push_back(entry);
  }
  manifest["episodes"] = eps;
  write_json(out / "manifest.json", manifest);
  os << "wrote " << corpus.size() << " clean images and " << episodes << " episodes to "
     << out.string() << "\n";
  return 0;
}

// --- op --------------------------------------------------------------------

double param_or(const json& p, const char* key, double fallback) {
  return p.contains(key) ? p.at(key).get<double>() : fallback;
}

void reject_unknown(const json& p, const std::set<std::string>& allowed, const std::string& op) {
  for (const auto& [k, v] : p.items()) {
    if (!allowed.contains(k)) throw ConfigError("operator " + op + " has no parameter '" + k + "'");
  }
}

Image apply_operator(const std::string& name, const Image& img, const json& p, std::uint64_t seed) {
  if (name == "canny") {
    reject_unknown(p, {"low", "high"}, name);
    return ops::canny(img, {param_or(p, "low", 50.0), param_or(p, "high", 200.0)});
  }
  if (name == "laplacian") {
    reject_unknown(p, {}, name);
    return ops::laplacian_edge(img);
  }
  if (name == "llf" || name == "local_laplacian") {
    reject_unknown(p, {"sigma_r", "alpha", "levels"}, name);
    return ops::local_laplacian(img, {param_or(p, "sigma_r", 0.2), param_or(p, "alpha", 0.5),
                                      static_cast<int>(param_or(p, "levels", 0))});
  }
  if (name == "richardson_lucy") {
    reject_unknown(p, {"psf_sigma", "iters"}, name);
    const double sigma = param_or(p, "psf_sigma", 2.0);
    return ops::richardson_lucy(img, gaussian_kernel(sigma), static_cast<int>(param_or(p, "iters", 20)));
  }
  if (name == "lowlight") {
    reject_unknown(p, {"gamma", "scale", "noise_255"}, name);
    Rng rng(seed);
    ops::LowlightParams lp = ops::sample_lowlight(rng);
    lp = {param_or(p, "gamma", lp.gamma), param_or(p, "scale", lp.scale),
          param_or(p, "noise_255", lp.noise_255)};
    return ops::darken_lowlight(img, lp, rng);
  }
  const degrade::Kind kind = degrade::kind_from_name(name);
  Rng rng(seed);
  degrade::DegradationSpec spec = degrade::sample_spec(kind, rng, std::min(img.height, img.width));
  for (const auto& [k, v] : p.items()) {
    const bool known = spec.params.contains(k) || (kind == degrade::Kind::RainComplex);
    if (!known) throw ConfigError("degradation " + name + " has no parameter '" + k + "'");
    spec.params[k] = v.get<double>();
  }
  return degrade::apply(spec, img);
}

int cmd_op(const std::string& name, const fs::path& in, const fs::path& out, const std::string& params,
           std::uint64_t seed, std::ostream& os) {
  const json p = params.empty() ? json::object() : parse_json_arg(params, "--params");
  if (!p.is_object()) throw ConfigError("--params must be a JSON object");
  const Image img = read_image(in);
  const Image res = apply_operator(name, img, p, seed);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_image(out, res);
  os << "wrote " << out.string() << "\n";
  return 0;
}

// --- train / eval / sweep / ablate -------------------------------------------

TrainResult run_training(const RunConfig& cfg, const std::optional<fs::path>& resume,
                         std::optional<std::int64_t> stop_after, std::ostream& os) {
  TrainOptions opts;
  opts.resume = resume;
  opts.stop_after = stop_after;
  opts.on_step = [&os](const StepLog& s) {
    if (s.step % 100 == 0) {
      os << "step " << s.step << " lr " << s.lr << " loss " << s.loss << "\n" << std::flush;
    }
  };
  return train(cfg, opts);
}

struct LoadedModel {
  Checkpoint ckpt;
  Order order;
};

LoadedModel load_model(const fs::path& path, const Globals& g) {
  LoadedModel m;
  m.ckpt = load_checkpoint(path);
  if (g.seed) m.ckpt.config.seed = *g.seed;
  m.order = inference_order(m.ckpt.config);
  return m;
}

void write_grids(const fs::path& dir, const TaskEval& ev, const std::vector<QAPair>& tests, int count) {
  fs::create_directories(dir);
  for (int i = 0; i < count && i < static_cast<int>(tests.size()); ++i) {
    write_ppm(dir / ("grid_" + pad(static_cast<std::size_t>(i), 3) + ".ppm"),
              make_grid({tests[static_cast<std::size_t>(i)].question, ev.outputs[static_cast<std::size_t>(i)],
                         tests[static_cast<std::size_t>(i)].answer}));
  }
}

int cmd_eval(const fs::path& ckpt, const std::string& task_str, std::uint64_t prompt_seed,
             const fs::path& out, int n, int grids, const Globals& g, std::ostream& os) {
  const LoadedModel m = load_model(ckpt, g);
  const TaskId task = task_from_name(task_str);
  const QAPair prompt = make_prompt(m.ckpt.config, task, prompt_seed);
  const auto tests = make_test_pairs(m.ckpt.config, task, n);
  TaskEval ev = evaluate_task(m.ckpt.params, prompt, tests, m.order);
  ev.prompt_id = prompt_seed;
  fs::create_directories(out);
  write_eval_csv(out / "metrics.csv", ev);
  write_ppm(out / "prompt.ppm", make_grid({prompt.question, prompt.answer}));
  write_grids(out / "grids", ev, tests, grids);
  os << task_name(task) << " prompt " << prompt_seed << ": psnr " << ev.mean_output.psnr << " (input "
     << ev.mean_baseline.psnr << ") ssim " << ev.mean_output.ssim << " mae " << ev.mean_output.mae
     << "\n";
  return 0;
}

int cmd_sweep(const fs::path& ckpt, const std::string& task_str, int n_prompts, int n_tests,
              const fs::path& out, const Globals& g, std::ostream& os) {
  const LoadedModel m = load_model(ckpt, g);
  const TaskId task = task_from_name(task_str);
  const auto tests = make_test_pairs(m.ckpt.config, task, n_tests);
  const SweepReport rep = sweep(m.ckpt.params, m.ckpt.config, task, tests, n_prompts, m.order);
  fs::create_directories(out);
  write_sweep_csv(out / "sweep.csv", rep);
  write_sweep_summary(out / "sweep_summary.csv", rep);
  os << task_name(task) << " over " << n_prompts << " prompts: best psnr " << rep.agg.best.psnr
     << " avg " << rep.agg.avg.psnr << " std " << rep.agg.std.psnr << "\n";
  return 0;
}

int cmd_ablate(const RunConfig& base, const fs::path& out, int n_tests, std::ostream& os) {
  fs::create_directories(out);
  const std::array<Variant, 3> variants = {Variant::PromptGip, Variant::Painter, Variant::Direct};
  std::ofstream table(out / "ablation.csv", std::ios::trunc);
  std::ofstream packing(out / "ablation_packing.csv", std::ios::trunc);
  if (!table || !packing) throw IoError("cannot write ablation tables under " + out.string());
  table << "variant,order,mask_strategy";
  for (TaskId t : base.tasks) {
    const std::string n(task_name(t));
    table << "," << n << "_psnr," << n << "_ssim," << n << "_mae";
  }
  table << "\n";
  packing << "variant,order,mask_strategy,steps_logged\n";
  for (Variant v : variants) {
    RunConfig cfg = base;
    cfg.variant = v;
    cfg.out_dir = (out / std::string(variant_name(v))).string();
    os << "training " << variant_name(v) << "\n";
    const TrainResult tr = run_training(cfg, std::nullopt, std::nullopt, os);
    const VariantSpec vs = variant_spec(v);

    // Summarize what the trainer actually logged as packing.
    std::ifstream pin(fs::path(cfg.out_dir) / "packing.csv");
    std::string line;
    std::getline(pin, line);
    std::set<std::string> orders;
    std::set<std::string> masks;
    std::size_t rows = 0;
    while (std::getline(pin, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cols;
      std::stringstream ss(line);
      for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
      if (cols.size() >= 4) {
        orders.insert(cols[2]);
        masks.insert(cols[3]);
      }
      ++rows;
    }
    auto joined = [](const std::set<std::string>& s) {
      std::string r;
      for (const auto& x : s) r += (r.empty() ? "" : "|") + x;
      return r;
    };
    packing << variant_name(v) << "," << joined(orders) << "," << joined(masks) << "," << rows << "\n";

    table << variant_name(v) << "," << order_name(vs.order) << "," << mask_strategy_name(vs.mask);
    for (TaskId t : base.tasks) {
      const auto tests = make_test_pairs(cfg, t, n_tests);
      const QAPair prompt = make_prompt(cfg, t, 0);
      const TaskEval ev = evaluate_task(tr.params, prompt, tests, vs.order);
      table << "," << format_metric(ev.mean_output.psnr) << "," << format_metric(ev.mean_output.ssim)
            << "," << format_metric(ev.mean_output.mae);
    }
    table << "\n";
  }
  os << "wrote " << (out / "ablation.csv").string() << "\n";
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::ostream& os) {
  const GradCheckResult r = grad_check({}, seed);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6e", r.max_rel_error);
  os << "max_relative_error " << buf << "\n";
  os << "samples " << r.samples << "\n";
  os << "worst " << r.worst_param << "\n";
  return r.max_rel_error < 1e-4 ? 0 : 1;
}

std::string json_error(const std::string& kind, const std::string& message) {
  return json{{"error", kind}, {"message", message}}.dump();
}

}  // namespace

Image apply_named_operator(const std::string& name, const Image& img, const std::string& params_json,
                           std::uint64_t seed) {
  const json p = params_json.empty() ? json::object() : parse_json_arg(params_json, "params");
  if (!p.is_object()) throw ConfigError("params must be a JSON object");
  return apply_operator(name, img, p, seed);
}

std::vector<std::string> operator_names() {
  std::vector<std::string> names = {"canny", "laplacian", "llf", "local_laplacian", "richardson_lucy",
                                    "lowlight"};
  for (auto k : degrade::kAllKinds) names.emplace_back(degrade::kind_name(k));
  return names;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Visual prompting toolkit: task synthesis, training and evaluation", "visprompt"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed_value = 0;
  int threads_value = 1;
  auto* seed_opt = app.add_option("--seed", seed_value, "Seed overriding the config seed");
  auto* threads_opt =
      app.add_option("--threads", threads_value, "Worker threads (1 = deterministic mode)")
          ->check(CLI::PositiveNumber);

  std::string config_path;
  std::vector<std::string> sets;
  fs::path out_dir;

  auto* synth = app.add_subcommand("synth", "Write a clean corpus and sample episodes");
  int episodes = 16;
  bool tokens = false;
  synth->add_option("--config", config_path, "Run config JSON")->check(CLI::ExistingFile);
  synth->add_option("--set", sets, "Config override key=value");
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--episodes", episodes, "Number of episodes")->check(CLI::NonNegativeNumber);
  synth->add_flag("--dump-tokens", tokens, "Also write packed token sequences");

  auto* op = app.add_subcommand("op", "Apply one operator or degradation to an image");
  std::string op_name;
  fs::path op_in;
  fs::path op_out;
  std::string op_params;
  op->add_option("--name", op_name, "Operator name")->required()->check(CLI::IsMember(operator_names()));
  op->add_option("--in", op_in, "Input image (.ppm or raw tensor)")->required()->check(CLI::ExistingFile);
  op->add_option("--out", op_out, "Output image")->required();
  op->add_option("--params", op_params, "Parameters as a JSON object");

  auto* tr = app.add_subcommand("train", "Train a model");
  std::string resume;
  std::int64_t stop_after = -1;
  tr->add_option("--config", config_path, "Run config JSON")->check(CLI::ExistingFile);
  tr->add_option("--set", sets, "Config override key=value");
  tr->add_option("--out", out_dir, "Output directory")->required();
  tr->add_option("--resume", resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
  tr->add_option("--stop-after", stop_after, "Stop after this many steps (schedule unchanged)");

  auto* ev = app.add_subcommand("eval", "Prompt-conditioned evaluation on held-out images");
  fs::path ckpt;
  std::string task;
  std::uint64_t prompt_seed = 0;
  int n_images = 50;
  int n_grids = 8;
  ev->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--task", task, "Task id")->required();
  ev->add_option("--prompt-seed", prompt_seed, "Prompt id");
  ev->add_option("--out", out_dir, "Output directory")->required();
  ev->add_option("--images", n_images, "Held-out images")->check(CLI::PositiveNumber);
  ev->add_option("--grids", n_grids, "Image grids to write")->check(CLI::NonNegativeNumber);

  auto* sw = app.add_subcommand("sweep", "Evaluate one task under many prompts");
  int n_prompts = 20;
  sw->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  sw->add_option("--task", task, "Task id")->required();
  sw->add_option("--n", n_prompts, "Number of prompts")->check(CLI::PositiveNumber);
  sw->add_option("--images", n_images, "Held-out images")->check(CLI::PositiveNumber);
  sw->add_option("--out", out_dir, "Output directory")->required();

  auto* ab = app.add_subcommand("ablate", "Train the three packing/masking variants and compare");
  int ab_images = 20;
  ab->add_option("--config", config_path, "Run config JSON")->check(CLI::ExistingFile);
  ab->add_option("--set", sets, "Config override key=value");
  ab->add_option("--out", out_dir, "Output directory")->required();
  ab->add_option("--images", ab_images, "Held-out images per task")->check(CLI::PositiveNumber);

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the analytic gradients");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << json_error("usage", e.what()) << "\n";
    return 2;
  }
  if (seed_opt->count() > 0) g.seed = seed_value;
  if (threads_opt->count() > 0) g.threads = threads_value;

  try {
    if (synth->parsed()) {
      return cmd_synth(load_config(config_path, sets, g), out_dir, episodes, tokens, out);
    }
    if (op->parsed()) return cmd_op(op_name, op_in, op_out, op_params, g.seed.value_or(0), out);
    if (tr->parsed()) {
      RunConfig cfg = load_config(config_path, sets, g);
      cfg.out_dir = out_dir.string();
      std::optional<fs::path> res;
      if (!resume.empty()) res = resume;
      std::optional<std::int64_t> stop;
      if (stop_after >= 0) stop = stop_after;
      const TrainResult r = run_training(cfg, res, stop, out);
      out << "wrote " << r.final_checkpoint.string() << "\n";
      return 0;
    }
    if (ev->parsed()) return cmd_eval(ckpt, task, prompt_seed, out_dir, n_images, n_grids, g, out);
    if (sw->parsed()) return cmd_sweep(ckpt, task, n_prompts, n_images, out_dir, g, out);
    if (ab->parsed()) return cmd_ablate(load_config(config_path, sets, g), out_dir, ab_images, out);
    if (gc->parsed()) return cmd_gradcheck(g.seed.value_or(0), out);
  } catch (const ConfigError& e) {
    err << json_error("config", e.what()) << "\n";
    return 1;
  } catch (const IoError& e) {
    err << json_error("io", e.what()) << "\n";
    return 1;
  } catch (const Error& e) {
    err << json_error("runtime", e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << json_error("internal", e.what()) << "\n";
    return 1;
  }
  return 2;
}

int run(const std::vector<std::string>& args) { return run(args, std::cout, std::cerr); }

}  // namespace visprompt::cli
