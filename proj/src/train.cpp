#include "visprompt/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

#include "visprompt/error.hpp"

namespace visprompt {

namespace fs = std::filesystem;

VariantSpec variant_spec(Variant v) {
  switch (v) {
    case Variant::PromptGip: return {Order::QAQA, MaskStrategy::MaskBoth};
    case Variant::Painter: return {Order::QQAA, MaskStrategy::MaskBoth};
    case Variant::Direct: return {Order::QAQA, MaskStrategy::MaskLast};
  }
  throw ConfigError("unknown variant");
}

// --- loss ------------------------------------------------------------------

namespace {

template <typename T>
double l1_accumulate(const Mat<T>& pred, const Mat<T>& target,
                     const std::vector<std::uint8_t>& row_mask, double norm, Mat<T>& d_pred) {
  d_pred = Mat<T>::Zero(pred.rows(), pred.cols());
  double sum = 0.0;
  const T g = static_cast<T>(1.0 / norm);
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    if (row_mask[static_cast<std::size_t>(r)] == 0) continue;
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
      const T diff = pred(r, c) - target(r, c);
      sum += std::abs(static_cast<double>(diff));
      d_pred(r, c) = diff > T(0) ? g : (diff < T(0) ? -g : T(0));
    }
  }
  return sum / norm;
}

}  // namespace

template <typename T>
LossResult<T> l1_masked_loss(const Mat<T>& pred, const Mat<T>& target,
                             const std::vector<std::uint8_t>& row_mask) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() ||
      static_cast<std::size_t>(pred.rows()) != row_mask.size()) {
    throw ShapeError("l1_masked_loss: prediction, target and mask disagree in shape");
  }
  std::int64_t rows = 0;
  for (auto m : row_mask) rows += m != 0 ? 1 : 0;
  if (rows == 0) throw ParameterError("l1_masked_loss: mask is empty");
  LossResult<T> res;
  res.entries = rows * pred.cols();
  res.loss = l1_accumulate(pred, target, row_mask, static_cast<double>(res.entries), res.d_pred);
  return res;
}

template LossResult<float> l1_masked_loss<float>(const Mat<float>&, const Mat<float>&,
                                                 const std::vector<std::uint8_t>&);
template LossResult<double> l1_masked_loss<double>(const Mat<double>&, const Mat<double>&,
                                                   const std::vector<std::uint8_t>&);

// --- optimizer ---------------------------------------------------------

template <typename T>
OptState<T> OptState<T>::zeros_like(const ModelParams<T>& params) {
  OptState s;
  for (const auto& r : params.refs()) {
    s.m.push_back(Mat<T>::Zero(r.value->rows(), r.value->cols()));
    s.v.push_back(Mat<T>::Zero(r.value->rows(), r.value->cols()));
  }
  return s;
}

template struct OptState<float>;
template struct OptState<double>;

template <typename T>
void adamw_step(ModelParams<T>& params, const ModelParams<T>& grads, OptState<T>& state,
                double lr, const AdamWConfig& cfg) {
  auto p = params.refs();
  const auto g = grads.refs();
  if (state.m.size() != p.size() || state.v.size() != p.size() || g.size() != p.size()) {
    throw ShapeError("adamw_step: optimizer state does not match parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T bc1 = static_cast<T>(1.0 - std::pow(cfg.beta1, t));
  const T bc2 = static_cast<T>(1.0 - std::pow(cfg.beta2, t));
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T eps = static_cast<T>(cfg.eps);
  const T step = static_cast<T>(lr);
  const T decay = static_cast<T>(1.0 - lr * cfg.weight_decay);
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto theta = p[i].value->array();
    const auto grad = g[i].value->array();
    auto m = state.m[i].array();
    auto v = state.v[i].array();
    if (p[i].decay) theta *= decay;
    m = b1 * m + (T(1) - b1) * grad;
    v = b2 * v + (T(1) - b2) * grad.square();
    theta -= step * (m / bc1) / ((v / bc2).sqrt() + eps);
  }
}

template void adamw_step<float>(ModelParams<float>&, const ModelParams<float>&, OptState<float>&,
                                double, const AdamWConfig&);
template void adamw_step<double>(ModelParams<double>&, const ModelParams<double>&,
                                 OptState<double>&, double, const AdamWConfig&);

void ScalarAdamW::update(double grad, double lr, const AdamWConfig& cfg, bool decay) {
  ++step;
  if (decay) theta *= 1.0 - lr * cfg.weight_decay;
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
  const double mhat = m / (1.0 - std::pow(cfg.beta1, static_cast<double>(step)));
  const double vhat = v / (1.0 - std::pow(cfg.beta2, static_cast<double>(step)));
  theta -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
}

double cosine_lr(std::int64_t step, std::int64_t total, double base, double warmup_frac) {
  if (total < 1 || step < 0 || step > total) {
    throw ParameterError("cosine_lr: need 0 <= step <= total and total >= 1");
  }
  const auto warmup = static_cast<std::int64_t>(std::llround(warmup_frac * static_cast<double>(total)));
  if (step < warmup) return base * static_cast<double>(step) / static_cast<double>(warmup);
  if (total == warmup) return base;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
double global_norm(const ModelParams<T>& grads) {
  double sq = 0.0;
  for (const auto& r : grads.refs()) sq += r.value->template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

template <typename T>
double clip_global_norm(ModelParams<T>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm && norm > 0.0) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto& r : grads.refs()) *r.value *= s;
  }
  return norm;
}

template double global_norm<float>(const ModelParams<float>&);
template double global_norm<double>(const ModelParams<double>&);
template double clip_global_norm<float>(ModelParams<float>&, double);
template double clip_global_norm<double>(ModelParams<double>&, double);

// --- training loop -----------------------------------------------------

std::vector<Image> training_corpus(const RunConfig& cfg) {
  return gen_clean_corpus(cfg.corpus_size, cfg.image_size, Rng::stream(cfg.seed, "corpus"));
}

EpisodeDraw draw_training_item(const RunConfig& cfg, const std::vector<Image>& corpus,
                               std::int64_t step, int item) {
  Rng r = Rng::stream(cfg.seed, "episode", static_cast<std::uint64_t>(step))
              .child("item", static_cast<std::uint64_t>(item));
  const bool mixed = r.uniform01() < cfg.mixed_fraction;
  EpisodeDraw d;
  if (mixed) {
    d.episode = make_mixed_episode(corpus, r);
  } else {
    const TaskId task = sample_task(cfg.tasks, r);
    d.episode = make_episode(task, corpus, r, overrides_for(cfg.task_overrides, task));
  }
  const VariantSpec vs = variant_spec(cfg.variant);
  d.sequence = pack_episode(d.episode, cfg.patch_size, vs.order);
  Rng mr = r.child("mask");
  sample_mask(d.sequence, {vs.mask, cfg.mask_ratio}, mr);
  return d;
}

double smoothed_loss(const std::vector<StepLog>& log, std::size_t index, std::size_t window) {
  if (log.empty() || index >= log.size() || window == 0) {
    throw ParameterError("smoothed_loss: index outside the log");
  }
  const std::size_t begin = index + 1 >= window ? index + 1 - window : 0;
  double s = 0.0;
  for (std::size_t i = begin; i <= index; ++i) s += log[i].loss;
  return s / static_cast<double>(index + 1 - begin);
}

namespace {

struct ChunkResult {
  ModelParams<float> grads;
  double loss = 0.0;
};

// Forward, masked L1 (normalized by the whole batch's entry count) and
// backward for one contiguous slice of the batch.
ChunkResult run_chunk(const ModelParams<float>& params, const std::vector<EpisodeDraw>& items,
                      std::size_t begin, std::size_t end, double norm) {
  std::vector<const TokenSequence*> seqs;
  for (std::size_t i = begin; i < end; ++i) seqs.push_back(&items[i].sequence);
  const Batch<float> batch = make_batch<float>(seqs);
  ForwardTape<float> tape;
  const Mat<float> pred = forward(params, batch, &tape);
  // Masked rows hold the true patch pixels in the stored sequence.
  Mat<float> d_pred;
  ChunkResult res;
  res.loss = l1_accumulate(pred, batch.tokens, batch.masked, norm, d_pred);
  res.grads = backward(params, tape, d_pred);
  return res;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Keeps the header and rows whose first column is <= `last_step`.
void truncate_csv(const fs::path& path, std::int64_t last_step) {
  std::ifstream is(path);
  if (!is) return;
  std::string header;
  std::getline(is, header);
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (std::stoll(line.substr(0, line.find(','))) <= last_step) keep.push_back(line);
  }
  is.close();
  std::ofstream os(path, std::ios::trunc);
  os << header << '\n';
  for (const auto& l : keep) os << l << '\n';
}

std::string task_mix(const std::vector<EpisodeDraw>& items) {
  std::map<std::string, int> counts;
  for (const auto& it : items) {
    counts[it.episode.task ? std::string(task_name(*it.episode.task)) : "mixed"]++;
  }
  std::string s;
  for (const auto& [k, v] : counts) s += (s.empty() ? "" : " ") + k + "=" + std::to_string(v);
  return s;
}

}  // namespace

TrainResult train(const RunConfig& config, const TrainOptions& options) {
  config.validate();
  const ModelDims dims = ModelDims::from_config(config);
  const std::int64_t total = config.steps;
  const std::int64_t stop = options.stop_after.value_or(total);
  if (stop < 0 || stop > total) throw ConfigError("stop_after must lie in [0, steps]");

  TrainResult res;
  std::int64_t start = 0;
  if (options.resume) {
    Checkpoint ck = load_checkpoint(*options.resume);
    if (ModelDims::from_config(ck.config) != dims) {
      throw ConfigError("checkpoint " + options.resume->string() + " has different model dimensions");
    }
    if (ck.adam_m.empty()) {
      throw ConfigError("checkpoint " + options.resume->string() + " holds no optimizer state");
    }
    res.params = std::move(ck.params);
    res.opt.m = std::move(ck.adam_m);
    res.opt.v = std::move(ck.adam_v);
    res.opt.step = ck.step;
    start = ck.step;
  } else {
    res.params = init_params<float>(dims, config.seed);
    res.opt = OptState<float>::zeros_like(res.params);
  }

  const std::vector<Image> corpus = training_corpus(config);
  const VariantSpec vs = variant_spec(config.variant);
  const AdamWConfig adam{0.9, 0.999, 1e-8, config.weight_decay};

  const fs::path out = config.out_dir;
  std::ofstream log_csv;
  std::ofstream pack_csv;
  if (options.write_files) {
    fs::create_directories(out);
    save_run_config((out / "config.json").string(), config);
    const auto log_path = out / "train_log.csv";
    const auto pack_path = out / "packing.csv";
    if (start > 0) {
      truncate_csv(log_path, start);
      truncate_csv(pack_path, start);
      log_csv.open(log_path, std::ios::app);
      pack_csv.open(pack_path, std::ios::app);
    } else {
      log_csv.open(log_path, std::ios::trunc);
      pack_csv.open(pack_path, std::ios::trunc);
      log_csv << "step,lr,train_loss\n";
      pack_csv << "step,variant,order,mask_strategy,masked_tokens\n";
    }
    if (!log_csv || !pack_csv) throw IoError("cannot write logs under " + out.string());
  }

  auto save = [&](const fs::path& path, std::int64_t step) {
    Checkpoint ck;
    ck.config = config;
    ck.params = res.params;
    ck.adam_m = res.opt.m;
    ck.adam_v = res.opt.v;
    ck.step = step;
    save_checkpoint(path, ck);
  };

  const int threads = std::max(1, config.threads);
  const int batch = config.batch_size;
  std::vector<EpisodeDraw> items(static_cast<std::size_t>(batch));

  for (std::int64_t step = start + 1; step <= stop; ++step) {
    // Episodes come from per-item streams, so drawing them in parallel
    // cannot change their content.
    auto draw = [&](int lo, int hi) {
      for (int i = lo; i < hi; ++i) items[static_cast<std::size_t>(i)] = draw_training_item(config, corpus, step, i);
    };
    if (threads == 1) {
      draw(0, batch);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < threads; ++t) {
        pool.emplace_back(draw, batch * t / threads, batch * (t + 1) / threads);
      }
      for (auto& th : pool) th.join();
    }

    int masked_tokens = 0;
    for (const auto& it : items) masked_tokens += it.sequence.masked_count();
    const double norm = static_cast<double>(masked_tokens) * dims.token_dim();

    // Chunks are reduced in index order so a given thread count always
    // produces the same sums.
    const int chunks = std::min(threads, batch);
    std::vector<ChunkResult> parts(static_cast<std::size_t>(chunks));
    auto work = [&](int c) {
      parts[static_cast<std::size_t>(c)] =
          run_chunk(res.params, items, static_cast<std::size_t>(batch * c / chunks),
                    static_cast<std::size_t>(batch * (c + 1) / chunks), norm);
    };
    if (chunks == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (int c = 0; c < chunks; ++c) pool.emplace_back(work, c);
      for (auto& th : pool) th.join();
    }
    ModelParams<float> grads = std::move(parts[0].grads);
    double loss = parts[0].loss;
    for (int c = 1; c < chunks; ++c) {
      auto dst = grads.refs();
      const auto src = parts[static_cast<std::size_t>(c)].grads.refs();
      for (std::size_t i = 0; i < dst.size(); ++i) *dst[i].value += *src[i].value;
      loss += parts[static_cast<std::size_t>(c)].loss;
    }

    const double lr = cosine_lr(step, total, config.base_lr, config.warmup_frac);
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "non-finite training loss at step " << step << " (lr " << lr << ", tasks "
          << task_mix(items) << ")";
      throw Error(msg.str());
    }
    const double gnorm = clip_global_norm(grads, config.grad_clip);
    adamw_step(res.params, grads, res.opt, lr, adam);

    StepLog entry{step, lr, loss, gnorm, masked_tokens};
    res.log.push_back(entry);
    if (options.write_files) {
      if (config.log_every > 0 && (step % config.log_every == 0 || step == stop)) {
        log_csv << step << ',' << format_double(lr) << ',' << format_double(loss) << '\n';
      }
      pack_csv << step << ',' << variant_name(config.variant) << ',' << order_name(vs.order) << ','
               << mask_strategy_name(vs.mask) << ',' << masked_tokens << '\n';
      if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0 && step != stop) {
        save(out / ("checkpoint_" + std::to_string(step) + ".gipt"), step);
      }
    }
    if (options.on_step) options.on_step(entry);
  }

  if (options.write_files) {
    log_csv.flush();
    pack_csv.flush();
    res.final_checkpoint = out / "checkpoint.gipt";
    save(res.final_checkpoint, stop);
  }
  return res;
}

}  // namespace visprompt
