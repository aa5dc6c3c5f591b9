// Acceptance runner: one PASS/FAIL line per criterion.
//
//   visprompt_acceptance [--workdir DIR] [--reuse-run] [--only N[,N...]]
//                        [--expected-fail N[,N...]]
//
// AC-5, AC-6 and AC-8 share one training run of the default two-task
// configuration under DIR/ac5. With --reuse-run an existing completed run
// whose config.json matches is evaluated instead of retraining.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "reference_canny.hpp"
#include "support.hpp"
#include "visprompt/cli.hpp"
#include "visprompt/degrade.hpp"
#include "visprompt/eval.hpp"
#include "visprompt/io.hpp"
#include "visprompt/operators.hpp"
#include "visprompt/pyramid.hpp"
#include "visprompt/sequence.hpp"
#include "visprompt/train.hpp"
#include "visprompt/vit.hpp"

namespace fs = std::filesystem;
using namespace visprompt;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& s) { notes_.push_back(s); }
  Outcome outcome() const {
    Outcome o;
    o.pass = failures_.empty();
    std::string d;
    for (const auto& f : failures_) d += (d.empty() ? "failed: " : "; ") + f;
    for (const auto& n : notes_) d += (d.empty() ? "" : "; ") + n;
    o.detail = d;
    return o;
  }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream is(p);
  std::vector<std::string> lines;
  for (std::string l; std::getline(is, l);) lines.push_back(l);
  return lines;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string c; std::getline(ss, c, sep);) out.push_back(c);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

nlohmann::json without_out_dir(nlohmann::json j) {
  if (j.is_object()) {
    j.erase("out_dir");
    for (auto& [k, v] : j.items()) v = without_out_dir(v);
  }
  return j;
}

int run_cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::fprintf(stderr, "cli %s failed: %s\n", args.front().c_str(), err.str().c_str());
  return code;
}

// --- AC-1 ------------------------------------------------------------------

Outcome ac1() {
  Checks c;
  const GradCheckResult r = grad_check({}, 0);
  c.expect(r.samples >= 200, "fewer than 200 sampled parameters");
  c.expect(r.max_rel_error < 1e-4, "max relative error " + fmt("%.3e", r.max_rel_error));
  c.note("max_rel_error " + fmt("%.3e", r.max_rel_error) + " over " + std::to_string(r.samples) + " parameters");
  return c.outcome();
}

// --- AC-2 ------------------------------------------------------------------

Outcome ac2() {
  Checks c;
  double pyr_worst = 0.0;
  Rng rng(2);
  for (int t = 0; t < 40; ++t) {
    const int h = static_cast<int>(rng.uniform_int(8, 128));
    const int w = static_cast<int>(rng.uniform_int(8, 128));
    Plane p(h, w);
    for (double& v : p.data) v = rng.uniform01();
    pyr_worst = std::max(pyr_worst, testing::max_abs_diff(collapse(laplacian_pyramid(p, auto_pyramid_levels(h, w))), p));
  }
  for (int h : {8, 9, 127}) {
    Plane p(h, 11);
    for (double& v : p.data) v = rng.uniform01();
    pyr_worst = std::max(pyr_worst, testing::max_abs_diff(collapse(laplacian_pyramid(p, auto_pyramid_levels(h, 11))), p));
  }
  c.expect(pyr_worst < 1e-6, "pyramid roundtrip " + fmt("%.2e", pyr_worst));

  double dct_worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    degrade::Block b{};
    for (auto& v : b) v = rng.uniform(-128.0, 127.0);
    const auto back = degrade::idct8x8(degrade::dct8x8(b));
    for (int i = 0; i < 64; ++i) dct_worst = std::max(dct_worst, std::abs(back[i] - b[i]));
  }
  c.expect(dct_worst < 1e-6, "DCT roundtrip " + fmt("%.2e", dct_worst));

  const Image step = testing::step_image(16, 16, 8);
  const Image canny = ops::canny(step);
  const Plane ref = testing::reference_canny(step, 50.0, 200.0);
  bool same = true;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int ch = 0; ch < 3; ++ch) same = same && canny.at(y, x, ch) == static_cast<float>(ref.at(y, x));
  c.expect(same, "canny step edge differs from reference");

  double llf_worst = 0.0;
  for (double sr : {0.1, 0.2, 0.5}) {
    const Image img = testing::random_image(37, 45, static_cast<std::uint64_t>(sr * 100));
    llf_worst = std::max(llf_worst, testing::max_abs_diff(ops::local_laplacian(img, {sr, 1.0, 0}), img));
  }
  c.expect(llf_worst < 1e-5, "llf alpha=1 " + fmt("%.2e", llf_worst));

  const Image img = testing::random_image(24, 19, 5);
  c.expect(ops::richardson_lucy(img, Kernel2D::delta(), 10) == img, "RL delta PSF not a fixed point");
  const Image flat(24, 24, 0.37f);
  c.expect(ops::richardson_lucy(flat, gaussian_kernel(2.0), 10) == flat, "RL constant not a fixed point");
  c.note("pyramid " + fmt("%.1e", pyr_worst) + ", dct " + fmt("%.1e", dct_worst) + ", llf " + fmt("%.1e", llf_worst));
  return c.outcome();
}

// --- AC-3 ------------------------------------------------------------------

Outcome ac3() {
  Checks c;
  auto residual_var = [](const Image& out, const Image& in) {
    double s = 0.0;
    double s2 = 0.0;
    for (std::size_t i = 0; i < in.data.size(); ++i) {
      const double d = static_cast<double>(out.data[i]) - in.data[i];
      s += d;
      s2 += d * d;
    }
    const double n = static_cast<double>(in.data.size());
    return s2 / n - (s / n) * (s / n);
  };
  const Image half(64, 64, 0.5f);
  Rng r(3);
  const double sd = std::sqrt(residual_var(degrade::gaussian_noise(half, 25.0, r), half));
  c.expect(std::abs(sd - 25.0 / 255.0) <= 0.05 * 25.0 / 255.0, "gaussian std " + fmt("%.5f", sd));

  const Image big(256, 256, 0.5f);
  const Image sp = degrade::salt_pepper(big, 0.95, r);
  std::size_t corrupted = 0;
  for (std::size_t i = 0; i < sp.pixel_count(); ++i) corrupted += sp.data[i * 3] != 0.5f;
  const double frac = static_cast<double>(corrupted) / sp.pixel_count();
  c.expect(std::abs(frac - 0.05) <= 0.005, "salt-pepper fraction " + fmt("%.4f", frac));

  const Image p128(128, 128, 0.5f);
  const double pv = residual_var(degrade::poisson_noise(p128, 2.0, r), p128);
  const double expect = 0.5 / (255.0 * 2.0);
  c.expect(std::abs(pv - expect) <= 0.10 * expect, "poisson variance " + fmt("%.3e", pv));

  const Image img = testing::random_image(32, 32, 7);
  c.expect(degrade::gaussian_noise(img, 0.0, r) == img, "sigma 0");
  c.expect(degrade::salt_pepper(img, 1.0, r) == img, "snr 1");
  c.expect(degrade::gaussian_blur(img, 0.001) == img, "blur sigma 0");
  c.expect(degrade::synthesize_rain(img, {{{90.0, 0.0, 0.5, 6.0}}, 0.0}, r) == img, "rain density 0");
  degrade::HazeParams hp;
  hp.beta = 0.0;
  c.expect(degrade::synthesize_haze(img, hp) == img, "haze beta 0");
  c.expect(testing::max_abs_diff(degrade::jpeg_roundtrip(img, 20, false), img) < 1e-6, "unquantized DCT");
  Rng ri(1);
  c.expect(degrade::inpaint_mask(img, {0, 2.0}, ri) == img, "zero streaks");
  c.note("std " + fmt("%.5f", sd) + ", s&p " + fmt("%.4f", frac) + ", poisson var " + fmt("%.3e", pv));
  return c.outcome();
}

// --- AC-4 ------------------------------------------------------------------

Outcome ac4() {
  Checks c;
  const Image q1 = testing::random_image(32, 32, 1);
  const Image a1 = testing::random_image(32, 32, 2);
  const Image q2 = testing::random_image(32, 32, 3);
  const Image a2 = testing::random_image(32, 32, 4);
  for (Order order : {Order::QAQA, Order::QQAA}) {
    TokenSequence seq = pack_images({&q1, &a1, &q2, &a2}, 8, order);
    Rng rng(order == Order::QAQA ? 4 : 5);
    bool counts_ok = true;
    bool q_clean = true;
    for (int d = 0; d < 10000; ++d) {
      sample_mask(seq, {MaskStrategy::MaskBoth, 0.85}, rng);
      int m1 = 0;
      int m2 = 0;
      for (int i = 0; i < seq.length(); ++i) {
        if (!seq.masked[i]) continue;
        m1 += seq.slot_of[i] == kA1;
        m2 += seq.slot_of[i] == kA2;
        q_clean = q_clean && seq.slot_of[i] != kQ1 && seq.slot_of[i] != kQ2;
      }
      counts_ok = counts_ok && m1 == 14 && m2 == 14;
    }
    c.expect(counts_ok, std::string("mask count != 14 in ") + std::string(order_name(order)));
    c.expect(q_clean, std::string("question token masked in ") + std::string(order_name(order)));
  }

  RunConfig cfg = RunConfig::two_task_default();
  const auto model = init_params<float>(ModelDims::from_config(cfg), 9);
  const Image zero(32, 32, 0.0f);
  const Image noise = testing::random_image(32, 32, 99);
  for (Order order : {Order::QAQA, Order::QQAA}) {
    TokenSequence s1 = pack_images({&q1, &a1, &q2, &zero}, 8, order);
    TokenSequence s2 = pack_images({&q1, &a1, &q2, &noise}, 8, order);
    Rng r(1);
    sample_mask(s1, {MaskStrategy::FullMaskA2, 0.85}, r);
    sample_mask(s2, {MaskStrategy::FullMaskA2, 0.85}, r);
    c.expect(predict(model, s1) == predict(model, s2), "placeholder changes the output");
  }
  c.note("10^4 masks per order, 14 of 16 per answer image");
  return c.outcome();
}

// --- training run shared by AC-5, AC-6, AC-8 --------------------------------

struct SharedRun {
  RunConfig cfg;
  fs::path dir;
  std::vector<StepLog> log;
  std::optional<Checkpoint> ckpt;
  double seconds = 0.0;
  bool reused = false;
};

std::vector<StepLog> read_log(const fs::path& csv) {
  std::vector<StepLog> log;
  const auto lines = read_lines(csv);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cols = split(lines[i], ',');
    if (cols.size() < 3) continue;
    StepLog s;
    s.step = std::stoll(cols[0]);
    s.lr = std::stod(cols[1]);
    s.loss = std::stod(cols[2]);
    log.push_back(s);
  }
  return log;
}

SharedRun& shared_run(const fs::path& workdir, bool reuse) {
  static std::optional<SharedRun> run;
  if (run) return *run;
  run.emplace();
  run->cfg = RunConfig::two_task_default();
  run->dir = workdir / "ac5";
  run->cfg.out_dir = run->dir.string();
  const auto start = std::chrono::steady_clock::now();
  const fs::path final_ckpt = run->dir / "checkpoint.gipt";
  bool done = false;
  if (reuse && fs::exists(final_ckpt) && fs::exists(run->dir / "config.json")) {
    const RunConfig saved = load_run_config((run->dir / "config.json").string());
    Checkpoint ck = load_checkpoint(final_ckpt);
    auto a = to_json(saved);
    auto b = to_json(run->cfg);
    a.erase("out_dir");
    b.erase("out_dir");
    if (a == b && ck.step == run->cfg.steps) {
      run->log = read_log(run->dir / "train_log.csv");
      run->ckpt = std::move(ck);
      run->reused = true;
      done = true;
    }
  }
  if (!done) {
    fs::remove_all(run->dir);
    TrainOptions opts;
    opts.on_step = [](const StepLog& s) {
      if (s.step % 500 == 0) std::fprintf(stderr, "  training step %lld loss %.4f\n", static_cast<long long>(s.step), s.loss);
    };
    TrainResult tr = train(run->cfg, opts);
    run->log = std::move(tr.log);
    run->ckpt = load_checkpoint(tr.final_checkpoint);
  }
  run->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return *run;
}

Outcome ac5(const fs::path& workdir, bool reuse) {
  Checks c;
  const SharedRun& run = shared_run(workdir, reuse);
  c.expect(static_cast<int>(run.log.size()) == run.cfg.steps, "log has " + std::to_string(run.log.size()) + " rows");
  if (static_cast<int>(run.log.size()) != run.cfg.steps) return c.outcome();
  const double early = smoothed_loss(run.log, 199, 200);
  const double late = smoothed_loss(run.log, run.log.size() - 1, 200);
  c.expect(late < 0.5 * early, "smoothed loss " + fmt("%.4f", late) + " vs " + fmt("%.4f", early));
  c.note("smoothed loss @200 " + fmt("%.4f", early) + ", @" + std::to_string(run.cfg.steps) + " " +
         fmt("%.4f", late) + " (ratio " + fmt("%.3f", late / early) + ")" +
         (run.reused ? ", reused run" : ", trained in " + fmt("%.0f", run.seconds) + " s"));
  return c.outcome();
}

Outcome ac6(const fs::path& workdir, bool reuse) {
  Checks c;
  const SharedRun& run = shared_run(workdir, reuse);
  const auto& model = run.ckpt->params;
  const RunConfig& cfg = run.ckpt->config;
  const Order order = variant_spec(cfg.variant).order;

  const auto noisy = make_test_pairs(cfg, TaskId::GaussNoise, 50);
  const TaskEval dn = evaluate_task(model, make_prompt(cfg, TaskId::GaussNoise, 0), noisy, order);
  const double gain = dn.mean_output.psnr - dn.mean_baseline.psnr;
  c.expect(gain >= 1.0, "denoise gain below 1 dB");

  const auto edges = make_test_pairs(cfg, TaskId::Canny, 50);
  const TaskEval ed = evaluate_task(model, make_prompt(cfg, TaskId::Canny, 0), edges, order);
  double zero_mae = 0.0;
  for (const auto& p : edges) zero_mae += mae(Image(p.answer.height, p.answer.width, 0.0f), p.answer);
  zero_mae /= static_cast<double>(edges.size());
  c.expect(ed.mean_output.mae < zero_mae, "canny MAE not below the all-zero map");

  c.note("denoise PSNR " + fmt("%.2f", dn.mean_output.psnr) + " vs input " + fmt("%.2f", dn.mean_baseline.psnr) +
         " (" + fmt("%+.2f", gain) + " dB); canny MAE " + fmt("%.2f", ed.mean_output.mae) + " vs zero " +
         fmt("%.2f", zero_mae));
  return c.outcome();
}

// --- AC-7 ------------------------------------------------------------------

Outcome ac7(const fs::path& workdir) {
  Checks c;
  const fs::path dir = workdir / "ac7";
  fs::remove_all(dir);
  RunConfig cfg = RunConfig::two_task_default();
  cfg.steps = 150;
  fs::create_directories(dir);
  save_run_config((dir / "config.json").string(), cfg);
  c.expect(run_cli({"ablate", "--config", (dir / "config.json").string(), "--out", (dir / "out").string(),
                    "--images", "20"}) == 0,
           "ablate command failed");

  const auto table = read_lines(dir / "out" / "ablation.csv");
  c.expect(table.size() == 4, "ablation table has " + std::to_string(table.size()) + " lines");
  const std::vector<std::array<std::string, 3>> expected = {
      {"promptgip", "QAQA", "mask_both"}, {"painter", "QQAA", "mask_both"}, {"direct", "QAQA", "mask_last"}};
  std::vector<nlohmann::json> configs;
  std::vector<double> psnrs;
  for (std::size_t i = 0; i < expected.size() && i + 1 < table.size(); ++i) {
    const auto cols = split(table[i + 1], ',');
    c.expect(cols.size() == 9, "row width");
    if (cols.size() < 4) continue;
    c.expect(cols[0] == expected[i][0] && cols[1] == expected[i][1] && cols[2] == expected[i][2],
             "row " + std::to_string(i) + " is " + cols[0]);
    psnrs.push_back(std::stod(cols[3]));

    // Logged packing must match the variant on every step.
    const auto packing = read_lines(dir / "out" / expected[i][0] / "packing.csv");
    bool consistent = packing.size() == static_cast<std::size_t>(cfg.steps) + 1;
    for (std::size_t k = 1; k < packing.size(); ++k) {
      const auto p = split(packing[k], ',');
      consistent = consistent && p.size() >= 4 && p[1] == expected[i][0] && p[2] == expected[i][1] &&
                   p[3] == expected[i][2];
    }
    c.expect(consistent, "packing log of " + expected[i][0]);
    auto j = nlohmann::json::parse(slurp(dir / "out" / expected[i][0] / "config.json"));
    j.erase("variant");
    j.erase("out_dir");
    configs.push_back(j);
  }
  c.expect(configs.size() == 3 && configs[0] == configs[1] && configs[1] == configs[2],
           "runs differ in more than variant");
  if (psnrs.size() == 3) {
    const bool promptgip_best = psnrs[0] >= psnrs[1] && psnrs[0] >= psnrs[2];
    c.note("gauss_noise PSNR promptgip " + fmt("%.2f", psnrs[0]) + ", painter " + fmt("%.2f", psnrs[1]) +
           ", direct " + fmt("%.2f", psnrs[2]) + (promptgip_best ? " (promptgip best)" : " (promptgip not best)") +
           ", not asserted");
  }
  return c.outcome();
}

// --- AC-8 ------------------------------------------------------------------

Outcome ac8(const fs::path& workdir, bool reuse) {
  Checks c;
  const SharedRun& run = shared_run(workdir, reuse);
  const fs::path out = workdir / "ac8";
  fs::remove_all(out);
  c.expect(run_cli({"sweep", "--ckpt", (run.dir / "checkpoint.gipt").string(), "--task", "gauss_noise", "--n", "20",
                    "--images", "50", "--out", out.string()}) == 0,
           "sweep command failed");
  const auto lines = read_lines(out / "sweep.csv");
  c.expect(lines.size() == 1 + 20 + 2, "sweep.csv has " + std::to_string(lines.size()) + " lines");
  if (lines.size() != 23) return c.outcome();

  std::vector<std::array<double, 3>> rows;
  for (std::size_t i = 1; i <= 20; ++i) {
    const auto cols = split(lines[i], ',');
    rows.push_back({std::stod(cols[2]), std::stod(cols[3]), std::stod(cols[4])});
  }
  const auto avg_cols = split(lines[21], ',');
  const auto std_cols = split(lines[22], ',');
  c.expect(avg_cols[1] == "avg" && std_cols[1] == "std", "aggregate row labels");
  double worst = 0.0;
  for (int k = 0; k < 3; ++k) {
    long double s = 0.0L;
    for (const auto& r : rows) s += r[k];
    const double mean = static_cast<double>(s / rows.size());
    long double v = 0.0L;
    for (const auto& r : rows) v += (r[k] - mean) * (r[k] - mean);
    const double sd = std::sqrt(static_cast<double>(v / rows.size()));
    worst = std::max({worst, std::abs(mean - std::stod(avg_cols[2 + k])), std::abs(sd - std::stod(std_cols[2 + k]))});
  }
  c.expect(worst <= 1e-12, "aggregate mismatch " + fmt("%.2e", worst));

  const auto summary = read_lines(out / "sweep_summary.csv");
  c.expect(summary.size() == 4, "summary rows");
  double best = -1e300;
  for (const auto& r : rows) best = std::max(best, r[0]);
  if (summary.size() == 4) {
    const auto bcols = split(summary[1], ',');
    c.expect(bcols[1] == "best" && std::stod(bcols[2]) == best, "best PSNR row");
  }
  const double sd_psnr = std::stod(std_cols[2]);
  c.expect(sd_psnr > 0.0, "prompt-to-prompt std is zero");
  c.note("PSNR best " + fmt("%.3f", best) + " avg " + avg_cols[2].substr(0, 7) + " std " + fmt("%.4f", sd_psnr) +
         "; recomputation error " + fmt("%.1e", worst));
  return c.outcome();
}

// --- AC-9 ------------------------------------------------------------------

Outcome ac9() {
  Checks c;
  const double p = psnr(Image(32, 32, 0.0f), Image(32, 32, 0.5f));
  c.expect(std::abs(p - 6.0206) <= 1e-3, "psnr " + fmt("%.6f", p));
  const Image a = testing::random_image(32, 32, 9);
  c.expect(ssim(a, a) == 1.0, "ssim(x,x) " + fmt("%.17g", ssim(a, a)));
  const double m = mae(Image(32, 32, 0.0f), Image(32, 32, 1.0f));
  c.expect(m == 255.0, "mae " + fmt("%.17g", m));
  c.note("psnr " + fmt("%.6f", p) + " dB, ssim 1, mae 255");
  return c.outcome();
}

// --- AC-10 -----------------------------------------------------------------

Outcome ac10(const fs::path& workdir) {
  Checks c;
  const fs::path dir = workdir / "ac10";
  fs::remove_all(dir);
  fs::create_directories(dir);
  RunConfig cfg = RunConfig::two_task_default();
  cfg.steps = 200;
  cfg.checkpoint_every = 100;
  save_run_config((dir / "config.json").string(), cfg);
  const std::string config = (dir / "config.json").string();

  std::vector<std::string> csvs;
  for (const char* rep : {"a", "b"}) {
    const fs::path r = dir / rep;
    const std::vector<std::string> common = {"--seed", "11", "--threads", "1"};
    auto args = [&](std::vector<std::string> tail) {
      std::vector<std::string> a = common;
      a.insert(a.end(), tail.begin(), tail.end());
      return a;
    };
    c.expect(run_cli(args({"synth", "--config", config, "--out", (r / "synth").string(), "--episodes", "8"})) == 0, "synth");
    c.expect(run_cli(args({"train", "--config", config, "--out", (r / "train").string()})) == 0, "train");
    for (const char* task : {"gauss_noise", "canny"}) {
      c.expect(run_cli(args({"eval", "--ckpt", (r / "train" / "checkpoint.gipt").string(), "--task", task,
                             "--prompt-seed", "3", "--images", "20", "--out", (r / "eval" / task).string()})) == 0,
               "eval");
    }
  }
  int compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    const auto ext = entry.path().extension();
    if (ext != ".csv" && ext != ".json" && ext != ".gipt" && ext != ".ppm") continue;
    const fs::path rel = fs::relative(entry.path(), dir / "a");
    bool same = fs::exists(dir / "b" / rel);
    if (same && ext == ".json") {
      // The recorded output directory is the only field allowed to differ.
      same = without_out_dir(nlohmann::json::parse(slurp(entry.path()))) ==
             without_out_dir(nlohmann::json::parse(slurp(dir / "b" / rel)));
    } else if (same) {
      same = slurp(entry.path()) == slurp(dir / "b" / rel);
    }
    if (ext == ".csv") ++compared;
    c.expect(same, rel.string() + " differs");
  }
  c.expect(compared >= 4, "expected at least 4 CSV files");
  c.note(std::to_string(compared) + " CSV files byte-identical across two runs, checkpoints and images too");
  return c.outcome();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"visprompt acceptance runner"};
  std::string workdir = "acceptance_work";
  bool reuse = false;
  std::vector<int> only;
  std::vector<int> expected_fail;
  app.add_option("--workdir", workdir, "Scratch directory for training runs");
  app.add_flag("--reuse-run", reuse, "Reuse a completed shared training run");
  app.add_option("--only", only, "Criteria to run")->delimiter(',');
  app.add_option("--expected-fail", expected_fail,
                 "Criteria known not to be met; they still print FAIL but do not set the exit code")
      ->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);
  const fs::path wd = fs::absolute(workdir);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, ac1},
      {2, ac2},
      {3, ac3},
      {4, ac4},
      {5, [&] { return ac5(wd, reuse); }},
      {6, [&] { return ac6(wd, reuse); }},
      {7, [&] { return ac7(wd); }},
      {8, [&] { return ac8(wd, reuse); }},
      {9, ac9},
      {10, [&] { return ac10(wd); }},
  };
  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool known = std::find(expected_fail.begin(), expected_fail.end(), id) != expected_fail.end();
    failed += (o.pass || known) ? 0 : 1;
    const char* tag = o.pass ? (known ? "  (listed as expected failure)" : "") : (known ? "  (expected failure)" : "");
    std::printf("AC-%d %s  %s  [%.1f s]%s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs, tag);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
