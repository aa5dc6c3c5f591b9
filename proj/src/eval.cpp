#include "visprompt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "visprompt/error.hpp"
#include "visprompt/filter.hpp"
#include "visprompt/sequence.hpp"

namespace visprompt {

namespace fs = std::filesystem;

// --- metrics ---------------------------------------------------------------

double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.data.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  if (a.height < kSsimWindow || a.width < kSsimWindow) {
    throw ShapeError("ssim needs images of at least " + std::to_string(kSsimWindow) + "x" +
                     std::to_string(kSsimWindow));
  }
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  constexpr int r = kSsimWindow / 2;
  const Kernel2D w = gaussian_kernel(kSsimSigma);
  const int oh = a.height - 2 * r;
  const int ow = a.width - 2 * r;
  double total = 0.0;
  for (int c = 0; c < Image::kChannels; ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            const double k = w.at(dy, dx);
            const double va = a.at(y + r + dy, x + r + dx, c);
            const double vb = b.at(y + r + dy, x + r + dx, c);
            mx += k * va;
            my += k * vb;
            sxx += k * va * va;
            syy += k * vb * vb;
            sxy += k * va * vb;
          }
        }
        const double vx = sxx - mx * mx;
        const double vy = syy - my * my;
        const double cxy = sxy - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) /
                 ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
    }
  }
  return total / (static_cast<double>(oh) * ow * Image::kChannels);
}

double mae(const Image& a, const Image& b) {
  require_same_shape(a, b, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    s += std::abs(static_cast<double>(a.data[i]) - b.data[i]);
  }
  return 255.0 * s / static_cast<double>(a.data.size());
}

Metrics compute_metrics(const Image& out, const Image& target) {
  return {psnr(out, target), ssim(out, target), mae(out, target)};
}

// --- inference -------------------------------------------------------------

namespace {

constexpr std::size_t kInferChunk = 64;

TokenSequence inference_sequence(const ModelParams<float>& model, const Image& pq, const Image& pa,
                                 const Image& query, Order order) {
  if (!pq.same_shape(query) || !pa.same_shape(query)) {
    throw ShapeError("infer: prompt and query images differ in size");
  }
  const Image placeholder(query.height, query.width);
  TokenSequence seq = pack_images({&pq, &pa, &query, &placeholder}, model.dims.patch_size, order);
  if (seq.patches_per_image != model.dims.patches_per_image) {
    throw ShapeError("infer: image size does not match the model");
  }
  Rng unused(0);
  sample_mask(seq, {MaskStrategy::FullMaskA2, 1.0}, unused);
  return seq;
}

Image answer_from(const TokenSequence& seq, const Mat<float>& pred, Eigen::Index row0) {
  const auto n = static_cast<std::size_t>(seq.length()) * seq.token_dim();
  std::vector<float> values(pred.data() + row0 * pred.cols(), pred.data() + row0 * pred.cols() + n);
  Image out = unpack_slot(seq, kA2, values);
  clamp_inplace(out);
  return out;
}

}  // namespace

Image infer(const ModelParams<float>& model, const Image& prompt_q, const Image& prompt_a,
            const Image& query, Order order) {
  const TokenSequence seq = inference_sequence(model, prompt_q, prompt_a, query, order);
  return answer_from(seq, predict(model, seq), 0);
}

Image infer(const ModelParams<float>& model, const QAPair& prompt, const Image& query, Order order) {
  return infer(model, prompt.question, prompt.answer, query, order);
}

std::vector<Image> infer_many(const ModelParams<float>& model, const QAPair& prompt,
                              const std::vector<Image>& queries, Order order) {
  std::vector<Image> out;
  out.reserve(queries.size());
  for (std::size_t begin = 0; begin < queries.size(); begin += kInferChunk) {
    const std::size_t end = std::min(queries.size(), begin + kInferChunk);
    std::vector<TokenSequence> seqs;
    for (std::size_t i = begin; i < end; ++i) {
      seqs.push_back(inference_sequence(model, prompt.question, prompt.answer, queries[i], order));
    }
    std::vector<const TokenSequence*> ptrs;
    for (const auto& s : seqs) ptrs.push_back(&s);
    const Mat<float> pred = forward(model, make_batch<float>(ptrs));
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      out.push_back(answer_from(seqs[i], pred, static_cast<Eigen::Index>(i) * seqs[i].length()));
    }
  }
  return out;
}

// --- evaluation sets -------------------------------------------------------

std::vector<Image> test_corpus(const RunConfig& cfg, int n) {
  return gen_clean_corpus(n, cfg.image_size, Rng::stream(cfg.seed, "test_corpus"));
}

std::vector<Image> prompt_corpus(const RunConfig& cfg, int n) {
  return gen_clean_corpus(n, cfg.image_size, Rng::stream(cfg.seed, "prompt_corpus"));
}

std::vector<QAPair> make_test_pairs(const RunConfig& cfg, TaskId task, int n) {
  const auto clean = test_corpus(cfg, n);
  const auto overrides = overrides_for(cfg.task_overrides, task);
  std::vector<QAPair> pairs;
  for (int i = 0; i < n; ++i) {
    Rng r = Rng::stream(cfg.seed, "test_pair", static_cast<std::uint64_t>(i)).child(task_name(task));
    pairs.push_back(make_pair(task, clean[static_cast<std::size_t>(i)], r, overrides));
  }
  return pairs;
}

QAPair make_prompt(const RunConfig& cfg, TaskId task, std::uint64_t prompt_id) {
  Rng clean_rng = Rng::stream(cfg.seed, "prompt_corpus").child("clean", prompt_id);
  const Image clean = gen_clean_image(cfg.image_size, clean_rng);
  Rng r = Rng::stream(cfg.seed, "prompt_pair", prompt_id).child(task_name(task));
  return make_pair(task, clean, r, overrides_for(cfg.task_overrides, task));
}

namespace {

Metrics mean_of(const std::vector<Metrics>& m) {
  Metrics s;
  for (const auto& x : m) {
    s.psnr += x.psnr;
    s.ssim += x.ssim;
    s.mae += x.mae;
  }
  const double n = static_cast<double>(m.size());
  return {s.psnr / n, s.ssim / n, s.mae / n};
}

}  // namespace

TaskEval evaluate_task(const ModelParams<float>& model, const QAPair& prompt,
                       const std::vector<QAPair>& tests, Order order) {
  if (tests.empty()) throw ParameterError("evaluation needs at least one test pair");
  TaskEval ev;
  ev.task = prompt.task();
  std::vector<Image> queries;
  for (const auto& t : tests) queries.push_back(t.question);
  ev.outputs = infer_many(model, prompt, queries, order);
  std::vector<Metrics> outs;
  std::vector<Metrics> bases;
  for (std::size_t i = 0; i < tests.size(); ++i) {
    EvalRow row;
    row.image = static_cast<int>(i);
    row.output = compute_metrics(ev.outputs[i], tests[i].answer);
    row.baseline = compute_metrics(tests[i].question, tests[i].answer);
    outs.push_back(row.output);
    bases.push_back(row.baseline);
    ev.rows.push_back(row);
  }
  ev.mean_output = mean_of(outs);
  ev.mean_baseline = mean_of(bases);
  return ev;
}

// --- sweep -------------------------------------------------------------

Aggregate aggregate(const std::vector<Metrics>& per_prompt) {
  if (per_prompt.empty()) throw ParameterError("aggregate needs at least one prompt");
  Aggregate a;
  a.avg = mean_of(per_prompt);
  a.best = per_prompt.front();
  Metrics sq;
  for (const auto& m : per_prompt) {
    a.best.psnr = std::max(a.best.psnr, m.psnr);
    a.best.ssim = std::max(a.best.ssim, m.ssim);
    a.best.mae = std::min(a.best.mae, m.mae);
    sq.psnr += (m.psnr - a.avg.psnr) * (m.psnr - a.avg.psnr);
    sq.ssim += (m.ssim - a.avg.ssim) * (m.ssim - a.avg.ssim);
    sq.mae += (m.mae - a.avg.mae) * (m.mae - a.avg.mae);
  }
  const double n = static_cast<double>(per_prompt.size());
  a.std = {std::sqrt(sq.psnr / n), std::sqrt(sq.ssim / n), std::sqrt(sq.mae / n)};
  return a;
}

SweepReport sweep(const ModelParams<float>& model, const RunConfig& cfg, TaskId task,
                  const std::vector<QAPair>& tests, int n_prompts, Order order) {
  if (n_prompts < 1) throw ParameterError("sweep needs at least one prompt");
  if (tests.empty()) throw ParameterError("sweep needs at least one test pair");
  SweepReport rep;
  rep.task = task;
  for (int k = 0; k < n_prompts; ++k) {
    const auto id = static_cast<std::uint64_t>(k);
    const QAPair prompt = make_prompt(cfg, task, id);
    rep.prompt_ids.push_back(id);
    rep.per_prompt.push_back(evaluate_task(model, prompt, tests, order).mean_output);
  }
  rep.agg = aggregate(rep.per_prompt);
  return rep;
}

// --- report files ----------------------------------------------------------

bool is_edge_task(TaskId task) { return task == TaskId::Canny || task == TaskId::Laplacian; }

std::string format_metric(double v) {
  char buf[64];
  // Round-trip precision so reports can be re-aggregated exactly.
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_csv(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

std::string metric_cols(const Metrics& m) {
  return format_metric(m.psnr) + "," + format_metric(m.ssim) + "," + format_metric(m.mae);
}

}  // namespace

void write_eval_csv(const fs::path& path, const TaskEval& ev) {
  auto os = open_csv(path);
  os << "task,prompt_id,image,psnr,ssim,mae,input_psnr,input_ssim,input_mae\n";
  const std::string prefix = std::string(task_name(ev.task)) + "," + std::to_string(ev.prompt_id) + ",";
  for (const auto& r : ev.rows) {
    os << prefix << r.image << "," << metric_cols(r.output) << "," << metric_cols(r.baseline) << "\n";
  }
  os << prefix << "mean," << metric_cols(ev.mean_output) << "," << metric_cols(ev.mean_baseline) << "\n";
}

std::size_t best_prompt(const SweepReport& rep) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < rep.per_prompt.size(); ++i) {
    const Metrics& m = rep.per_prompt[i];
    const Metrics& b = rep.per_prompt[best];
    if (is_edge_task(rep.task) ? m.mae < b.mae : m.psnr > b.psnr) best = i;
  }
  return best;
}

void write_sweep_csv(const fs::path& path, const SweepReport& rep) {
  auto os = open_csv(path);
  os << "task,prompt,psnr,ssim,mae,best\n";
  const std::string task(task_name(rep.task));
  const std::size_t best = best_prompt(rep);
  for (std::size_t i = 0; i < rep.per_prompt.size(); ++i) {
    os << task << "," << rep.prompt_ids[i] << "," << metric_cols(rep.per_prompt[i]) << ","
       << (i == best ? 1 : 0) << "\n";
  }
  os << task << ",avg," << metric_cols(rep.agg.avg) << ",\n";
  os << task << ",std," << metric_cols(rep.agg.std) << ",\n";
}

void write_sweep_summary(const fs::path& path, const SweepReport& rep) {
  auto os = open_csv(path);
  os << "task,row,psnr,ssim,mae\n";
  const std::string task(task_name(rep.task));
  os << task << ",best," << metric_cols(rep.agg.best) << "\n";
  os << task << ",avg," << metric_cols(rep.agg.avg) << "\n";
  os << task << ",std," << metric_cols(rep.agg.std) << "\n";
}

Image make_grid(const std::vector<Image>& images) {
  if (images.empty()) throw ParameterError("grid needs at least one image");
  const Image& first = images.front();
  for (const auto& im : images) {
    if (!im.same_shape(first)) throw ShapeError("grid images differ in size");
  }
  const int n = static_cast<int>(images.size());
  Image grid(first.height, n * first.width + (n - 1), 1.0f);
  for (int k = 0; k < n; ++k) {
    const int x0 = k * (first.width + 1);
    for (int y = 0; y < first.height; ++y)
      for (int x = 0; x < first.width; ++x)
        for (int c = 0; c < Image::kChannels; ++c) grid.at(y, x0 + x, c) = images[k].at(y, x, c);
  }
  return grid;
}

}  // namespace visprompt
