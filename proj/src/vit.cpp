#include "visprompt/vit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "visprompt/error.hpp"
#include "visprompt/io.hpp"

namespace visprompt {

using nlohmann::json;
using Eigen::Index;

ModelDims ModelDims::from_config(const RunConfig& cfg) {
  ModelDims d;
  d.patch_size = cfg.patch_size;
  d.patches_per_image = cfg.patches_per_image();
  d.embed_dim = cfg.embed_dim;
  d.depth = cfg.depth;
  d.heads = cfg.heads;
  d.mlp_ratio = cfg.mlp_ratio;
  return d;
}

void ModelDims::validate() const {
  if (patch_size < 1 || patches_per_image < 1 || embed_dim < 1 || depth < 0 || heads < 1 ||
      mlp_ratio < 1) {
    throw ShapeError("model dimensions must be positive (depth may be 0)");
  }
  if (embed_dim % heads != 0) {
    throw ShapeError("embed_dim " + std::to_string(embed_dim) + " is not divisible by heads " +
                     std::to_string(heads));
  }
}

// --- parameter container ---------------------------------------------------

template <typename T>
ModelParams<T> ModelParams<T>::zeros(const ModelDims& dims) {
  dims.validate();
  const Index D = dims.embed_dim;
  const Index P = dims.token_dim();
  const Index H = dims.hidden_dim();
  ModelParams p;
  p.dims = dims;
  p.patch_w = Mat<T>::Zero(P, D);
  p.patch_b = Mat<T>::Zero(1, D);
  p.mask_emb = Mat<T>::Zero(1, D);
  p.pos_emb = Mat<T>::Zero(dims.patches_per_image, D);
  p.slot_emb = Mat<T>::Zero(kSlots, D);
  p.blocks.resize(static_cast<std::size_t>(dims.depth));
  for (auto& b : p.blocks) {
    b.ln1_g = Mat<T>::Zero(1, D);
    b.ln1_b = Mat<T>::Zero(1, D);
    b.qkv_w = Mat<T>::Zero(D, 3 * D);
    b.qkv_b = Mat<T>::Zero(1, 3 * D);
    b.proj_w = Mat<T>::Zero(D, D);
    b.proj_b = Mat<T>::Zero(1, D);
    b.ln2_g = Mat<T>::Zero(1, D);
    b.ln2_b = Mat<T>::Zero(1, D);
    b.fc1_w = Mat<T>::Zero(D, H);
    b.fc1_b = Mat<T>::Zero(1, H);
    b.fc2_w = Mat<T>::Zero(H, D);
    b.fc2_b = Mat<T>::Zero(1, D);
  }
  p.lnf_g = Mat<T>::Zero(1, D);
  p.lnf_b = Mat<T>::Zero(1, D);
  p.head_w = Mat<T>::Zero(D, P);
  p.head_b = Mat<T>::Zero(1, P);
  return p;
}

template <typename T>
std::vector<ParamRef<T>> ModelParams<T>::refs() {
  std::vector<ParamRef<T>> r = {
      {"patch_w", &patch_w, true},
      {"patch_b", &patch_b, false},
      {"mask_emb", &mask_emb, false},
      {"pos_emb", &pos_emb, false},
      {"slot_emb", &slot_emb, false},
  };
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto& b = blocks[i];
    const std::string pre = "blocks." + std::to_string(i) + ".";
    r.push_back({pre + "ln1_g", &b.ln1_g, false});
    r.push_back({pre + "ln1_b", &b.ln1_b, false});
    r.push_back({pre + "qkv_w", &b.qkv_w, true});
    r.push_back({pre + "qkv_b", &b.qkv_b, false});
    r.push_back({pre + "proj_w", &b.proj_w, true});
    r.push_back({pre + "proj_b", &b.proj_b, false});
    r.push_back({pre + "ln2_g", &b.ln2_g, false});
    r.push_back({pre + "ln2_b", &b.ln2_b, false});
    r.push_back({pre + "fc1_w", &b.fc1_w, true});
    r.push_back({pre + "fc1_b", &b.fc1_b, false});
    r.push_back({pre + "fc2_w", &b.fc2_w, true});
    r.push_back({pre + "fc2_b", &b.fc2_b, false});
  }
  r.push_back({"lnf_g", &lnf_g, false});
  r.push_back({"lnf_b", &lnf_b, false});
  r.push_back({"head_w", &head_w, true});
  r.push_back({"head_b", &head_b, false});
  return r;
}

template <typename T>
std::vector<ParamRef<T>> ModelParams<T>::refs() const {
  return const_cast<ModelParams<T>*>(this)->refs();
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& r : refs()) n += static_cast<std::size_t>(r.value->size());
  return n;
}

template <typename T>
bool ModelParams<T>::all_finite() const {
  for (const auto& r : refs()) {
    if (!r.value->allFinite()) return false;
  }
  return true;
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out = ModelParams<U>::zeros(dims);
  auto src = refs();
  auto dst = out.refs();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].value = src[i].value->template cast<U>();
  return out;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;

template <typename T>
ModelParams<T> init_params(const ModelDims& dims, std::uint64_t seed) {
  ModelParams<T> p = ModelParams<T>::zeros(dims);
  const Rng root = Rng::stream(seed, "init");
  for (auto& r : p.refs()) {
    const std::string& n = r.name;
    const bool is_gamma = n.ends_with("_g");
    const bool is_random = r.decay || n == "mask_emb" || n == "pos_emb" || n == "slot_emb";
    if (is_gamma) {
      r.value->setOnes();
    } else if (is_random) {
      Rng rng = root.child(n);
      for (Index i = 0; i < r.value->size(); ++i) {
        double z;
        do {
          z = rng.normal();
        } while (std::abs(z) > 3.0);
        r.value->data()[i] = static_cast<T>(kInitStd * z);
      }
    }
  }
  return p;
}

template ModelParams<float> init_params<float>(const ModelDims&, std::uint64_t);
template ModelParams<double> init_params<double>(const ModelDims&, std::uint64_t);

template <typename T>
Batch<T> make_batch(const std::vector<const TokenSequence*>& seqs) {
  if (seqs.empty()) throw ShapeError("empty batch");
  const TokenSequence& first = *seqs.front();
  Batch<T> b;
  b.batch = static_cast<int>(seqs.size());
  b.seq_len = first.length();
  const Index dim = first.token_dim();
  b.tokens.resize(static_cast<Index>(b.batch) * b.seq_len, dim);
  Index row = 0;
  for (const TokenSequence* s : seqs) {
    if (s->length() != b.seq_len || s->token_dim() != dim) {
      throw ShapeError("batch sequences differ in length or token size");
    }
    for (int i = 0; i < s->length(); ++i, ++row) {
      const float* t = s->token(i);
      for (Index k = 0; k < dim; ++k) b.tokens(row, k) = static_cast<T>(t[k]);
      b.slot.push_back(s->slot_of[i]);
      b.pos.push_back(s->patch_index[i]);
      b.masked.push_back(s->masked[i]);
    }
  }
  return b;
}

template Batch<float> make_batch<float>(const std::vector<const TokenSequence*>&);
template Batch<double> make_batch<double>(const std::vector<const TokenSequence*>&);

// --- layers ------------------------------------------------------------------

namespace {

template <typename T>
void add_bias(Mat<T>& y, const Mat<T>& b) {
  y.rowwise() += b.row(0);
}

template <typename T>
void layer_norm(const Mat<T>& x, const Mat<T>& g, const Mat<T>& b, Mat<T>& xhat,
                std::vector<T>& rstd, Mat<T>& y) {
  const Index rows = x.rows();
  xhat.resize(rows, x.cols());
  rstd.resize(static_cast<std::size_t>(rows));
  for (Index i = 0; i < rows; ++i) {
    const T mu = x.row(i).mean();
    const T var = (x.row(i).array() - mu).square().mean();
    const T rs = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    rstd[static_cast<std::size_t>(i)] = rs;
    xhat.row(i) = (x.row(i).array() - mu) * rs;
  }
  y = ((xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array()).matrix();
}

template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const Mat<T>& xhat, const std::vector<T>& rstd,
                           const Mat<T>& g, Mat<T>& dg, Mat<T>& db) {
  dg += (dy.array() * xhat.array()).colwise().sum().matrix();
  db += dy.colwise().sum();
  const Mat<T> dxhat = (dy.array().rowwise() * g.row(0).array()).matrix();
  Mat<T> dx(dy.rows(), dy.cols());
  for (Index i = 0; i < dy.rows(); ++i) {
    const T m1 = dxhat.row(i).mean();
    const T m2 = (dxhat.row(i).array() * xhat.row(i).array()).mean();
    dx.row(i) = rstd[static_cast<std::size_t>(i)] *
                (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
  }
  return dx;
}

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * static_cast<T>(std::numbers::sqrt2 / 2)));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x * static_cast<T>(std::numbers::sqrt2 / 2)));
  const T pdf = std::exp(T(-0.5) * x * x) * static_cast<T>(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
  return cdf + x * pdf;
}

}  // namespace

// --- forward -------------------------------------------------------------

template <typename T>
Mat<T> forward(const ModelParams<T>& params, const Batch<T>& batch, ForwardTape<T>* tape) {
  const ModelDims& d = params.dims;
  const Index B = batch.batch;
  const Index N = batch.seq_len;
  const Index R = B * N;
  const Index D = d.embed_dim;
  const Index heads = d.heads;
  const Index dh = d.head_dim();
  if (batch.tokens.rows() != R || batch.tokens.cols() != d.token_dim()) {
    throw ShapeError("forward: token matrix is " + std::to_string(batch.tokens.rows()) + "x" +
                     std::to_string(batch.tokens.cols()) + ", expected " + std::to_string(R) +
                     "x" + std::to_string(d.token_dim()));
  }
  if (N != d.seq_len()) {
    throw ShapeError("forward: sequence length " + std::to_string(N) + " does not match model (" +
                     std::to_string(d.seq_len()) + ")");
  }
  for (Index r = 0; r < R; ++r) {
    const int s = batch.slot[static_cast<std::size_t>(r)];
    const int p = batch.pos[static_cast<std::size_t>(r)];
    if (s < 0 || s >= kSlots || p < 0 || p >= d.patches_per_image) {
      throw ShapeError("forward: slot or position index out of range");
    }
  }

  ForwardTape<T> local;
  ForwardTape<T>& tp = tape != nullptr ? *tape : local;
  tp = ForwardTape<T>{};
  tp.batch = batch.batch;
  tp.seq_len = batch.seq_len;
  tp.slot = batch.slot;
  tp.pos = batch.pos;
  tp.masked = batch.masked;

  // Masked rows never see their pixels: zero them before the embedding.
  tp.x_unmasked = batch.tokens;
  for (Index r = 0; r < R; ++r) {
    if (batch.masked[static_cast<std::size_t>(r)] != 0) tp.x_unmasked.row(r).setZero();
  }
  Mat<T> h = tp.x_unmasked * params.patch_w;
  add_bias(h, params.patch_b);
  for (Index r = 0; r < R; ++r) {
    const auto ri = static_cast<std::size_t>(r);
    if (batch.masked[ri] != 0) h.row(r) = params.mask_emb.row(0);
    h.row(r) += params.pos_emb.row(batch.pos[ri]) + params.slot_emb.row(batch.slot[ri]);
  }

  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  tp.blocks.resize(params.blocks.size());
  for (std::size_t l = 0; l < params.blocks.size(); ++l) {
    const BlockParams<T>& bp = params.blocks[l];
    BlockTape<T>& bt = tp.blocks[l];

    layer_norm(h, bp.ln1_g, bp.ln1_b, bt.xhat1, bt.rstd1, bt.a);
    bt.qkv.noalias() = bt.a * bp.qkv_w;
    add_bias(bt.qkv, bp.qkv_b);
    bt.ctx.resize(R, D);
    bt.probs.resize(static_cast<std::size_t>(B * heads));
    for (Index b = 0; b < B; ++b) {
      for (Index hd = 0; hd < heads; ++hd) {
        const auto q = bt.qkv.block(b * N, hd * dh, N, dh);
        const auto k = bt.qkv.block(b * N, D + hd * dh, N, dh);
        const auto v = bt.qkv.block(b * N, 2 * D + hd * dh, N, dh);
        Mat<T> s = (q * k.transpose()) * scale;
        for (Index i = 0; i < N; ++i) {
          const T m = s.row(i).maxCoeff();
          s.row(i) = (s.row(i).array() - m).exp();
          s.row(i) /= s.row(i).sum();
        }
        bt.ctx.block(b * N, hd * dh, N, dh).noalias() = s * v;
        bt.probs[static_cast<std::size_t>(b * heads + hd)] = std::move(s);
      }
    }
    Mat<T> attn = bt.ctx * bp.proj_w;
    add_bias(attn, bp.proj_b);
    h += attn;

    layer_norm(h, bp.ln2_g, bp.ln2_b, bt.xhat2, bt.rstd2, bt.c);
    bt.u.noalias() = bt.c * bp.fc1_w;
    add_bias(bt.u, bp.fc1_b);
    bt.g = bt.u.unaryExpr([](T x) { return gelu(x); });
    Mat<T> m = bt.g * bp.fc2_w;
    add_bias(m, bp.fc2_b);
    h += m;
  }

  Mat<T> out;
  layer_norm(h, params.lnf_g, params.lnf_b, tp.xhatf, tp.rstdf, tp.z);
  out.noalias() = tp.z * params.head_w;
  add_bias(out, params.head_b);
  tp.pred = out.unaryExpr([](T x) { return T(1) / (T(1) + std::exp(-x)); });
  tp.filled = true;
  return tp.pred;
}

template Mat<float> forward<float>(const ModelParams<float>&, const Batch<float>&, ForwardTape<float>*);
template Mat<double> forward<double>(const ModelParams<double>&, const Batch<double>&, ForwardTape<double>*);

// --- backward ----------------------------------------------------------------

template <typename T>
ModelParams<T> backward(const ModelParams<T>& params, ForwardTape<T>& tape, const Mat<T>& d_pred) {
  if (!tape.filled) throw Error("backward: tape was not produced by forward");
  if (tape.consumed) throw Error("backward: tape has already been consumed");
  if (d_pred.rows() != tape.pred.rows() || d_pred.cols() != tape.pred.cols()) {
    throw ShapeError("backward: upstream gradient shape does not match predictions");
  }
  tape.consumed = true;

  const ModelDims& d = params.dims;
  const Index B = tape.batch;
  const Index N = tape.seq_len;
  const Index R = B * N;
  const Index D = d.embed_dim;
  const Index heads = d.heads;
  const Index dh = d.head_dim();
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  ModelParams<T> g = ModelParams<T>::zeros(d);

  const Mat<T> dout = (d_pred.array() * tape.pred.array() * (T(1) - tape.pred.array())).matrix();
  g.head_w.noalias() = tape.z.transpose() * dout;
  g.head_b = dout.colwise().sum();
  const Mat<T> dz = dout * params.head_w.transpose();
  Mat<T> dh_res = layer_norm_backward(dz, tape.xhatf, tape.rstdf, params.lnf_g, g.lnf_g, g.lnf_b);

  for (Index l = static_cast<Index>(params.blocks.size()) - 1; l >= 0; --l) {
    const BlockParams<T>& bp = params.blocks[static_cast<std::size_t>(l)];
    const BlockTape<T>& bt = tape.blocks[static_cast<std::size_t>(l)];
    BlockParams<T>& gb = g.blocks[static_cast<std::size_t>(l)];

    // MLP branch.
    gb.fc2_w.noalias() = bt.g.transpose() * dh_res;
    gb.fc2_b = dh_res.colwise().sum();
    Mat<T> du = dh_res * bp.fc2_w.transpose();
    du.array() *= bt.u.unaryExpr([](T x) { return gelu_grad(x); }).array();
    gb.fc1_w.noalias() = bt.c.transpose() * du;
    gb.fc1_b = du.colwise().sum();
    const Mat<T> dc = du * bp.fc1_w.transpose();
    dh_res += layer_norm_backward(dc, bt.xhat2, bt.rstd2, bp.ln2_g, gb.ln2_g, gb.ln2_b);

    // Attention branch.
    gb.proj_w.noalias() = bt.ctx.transpose() * dh_res;
    gb.proj_b = dh_res.colwise().sum();
    const Mat<T> dctx = dh_res * bp.proj_w.transpose();
    Mat<T> dqkv(R, 3 * D);
    for (Index b = 0; b < B; ++b) {
      for (Index hd = 0; hd < heads; ++hd) {
        const Mat<T>& p = bt.probs[static_cast<std::size_t>(b * heads + hd)];
        const auto q = bt.qkv.block(b * N, hd * dh, N, dh);
        const auto k = bt.qkv.block(b * N, D + hd * dh, N, dh);
        const auto v = bt.qkv.block(b * N, 2 * D + hd * dh, N, dh);
        const auto d_o = dctx.block(b * N, hd * dh, N, dh);
        const Mat<T> dp = d_o * v.transpose();
        dqkv.block(b * N, 2 * D + hd * dh, N, dh).noalias() = p.transpose() * d_o;
        const auto row_dot = (dp.array() * p.array()).rowwise().sum();
        const Mat<T> ds = ((dp.array().colwise() - row_dot) * p.array() * scale).matrix();
        dqkv.block(b * N, hd * dh, N, dh).noalias() = ds * k;
        dqkv.block(b * N, D + hd * dh, N, dh).noalias() = ds.transpose() * q;
      }
    }
    gb.qkv_w.noalias() = bt.a.transpose() * dqkv;
    gb.qkv_b = dqkv.colwise().sum();
    const Mat<T> da = dqkv * bp.qkv_w.transpose();
    dh_res += layer_norm_backward(da, bt.xhat1, bt.rstd1, bp.ln1_g, gb.ln1_g, gb.ln1_b);
  }

  for (Index r = 0; r < R; ++r) {
    const auto ri = static_cast<std::size_t>(r);
    g.pos_emb.row(tape.pos[ri]) += dh_res.row(r);
    g.slot_emb.row(tape.slot[ri]) += dh_res.row(r);
    if (tape.masked[ri] != 0) {
      g.mask_emb.row(0) += dh_res.row(r);
      dh_res.row(r).setZero();
    }
  }
  g.patch_w.noalias() = tape.x_unmasked.transpose() * dh_res;
  g.patch_b = dh_res.colwise().sum();
  return g;
}

template ModelParams<float> backward<float>(const ModelParams<float>&, ForwardTape<float>&, const Mat<float>&);
template ModelParams<double> backward<double>(const ModelParams<double>&, ForwardTape<double>&, const Mat<double>&);

Mat<float> predict(const ModelParams<float>& params, const TokenSequence& seq) {
  return forward(params, make_batch<float>({&seq}));
}

// --- gradient check ------------------------------------------------------

GradCheckResult grad_check(const GradCheckConfig& cfg, std::uint64_t seed) {
  const ModelDims& dims = cfg.dims;
  dims.validate();
  Rng rng = Rng::stream(seed, "gradcheck");
  ModelParams<double> params = init_params<double>(dims, seed);
  for (auto& r : params.refs()) {
    for (Index i = 0; i < r.value->size(); ++i) r.value->data()[i] += rng.normal(0.0, cfg.jitter);
  }

  // Two random sequences with roughly half of the answer tokens masked.
  constexpr int kBatch = 2;
  Batch<double> batch;
  batch.batch = kBatch;
  batch.seq_len = dims.seq_len();
  batch.tokens.resize(static_cast<Index>(kBatch) * batch.seq_len, dims.token_dim());
  for (Index i = 0; i < batch.tokens.size(); ++i) batch.tokens.data()[i] = rng.uniform01();
  for (int b = 0; b < kBatch; ++b) {
    for (int t = 0; t < batch.seq_len; ++t) {
      const int slot = t / dims.patches_per_image;
      batch.slot.push_back(slot);
      batch.pos.push_back(t % dims.patches_per_image);
      const bool answer = slot == kA1 || slot == kA2;
      batch.masked.push_back(answer && rng.bernoulli(0.5) ? 1 : 0);
    }
  }
  batch.masked[static_cast<std::size_t>(kA2 * dims.patches_per_image)] = 1;

  Mat<double> proj(batch.tokens.rows(), batch.tokens.cols());
  for (Index i = 0; i < proj.size(); ++i) proj.data()[i] = rng.normal();
  auto predict_all = [&](const ModelParams<double>& p) { return forward(p, batch); };

  ForwardTape<double> tape;
  forward(params, batch, &tape);
  const ModelParams<double> grads = backward(params, tape, proj);

  auto prefs = params.refs();
  auto grefs = grads.refs();

  // Key biases shift every score in a softmax row equally, so their exact
  // gradient is zero and carries no signal; they are not sampled.
  auto eligible = [&](std::size_t t, Index i) {
    const std::string& n = prefs[t].name;
    if (n.ends_with("qkv_b")) {
      const Index D = dims.embed_dim;
      return i < D || i >= 2 * D;
    }
    return true;
  };

  std::vector<std::pair<std::size_t, Index>> picks;
  std::set<std::pair<std::size_t, Index>> seen;
  auto pick = [&](std::size_t t) {
    const Index size = prefs[t].value->size();
    for (int attempt = 0; attempt < 64; ++attempt) {
      const Index i = static_cast<Index>(rng.uniform_int(0, size - 1));
      if (!eligible(t, i) || seen.contains({t, i})) continue;
      seen.insert({t, i});
      picks.emplace_back(t, i);
      return;
    }
  };
  for (std::size_t t = 0; t < prefs.size(); ++t) {
    const int n = static_cast<int>(std::min<Index>(cfg.per_tensor, prefs[t].value->size()));
    for (int k = 0; k < n; ++k) pick(t);
  }
  while (static_cast<int>(picks.size()) < cfg.min_samples) {
    pick(static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(prefs.size()) - 1)));
  }

  GradCheckResult result;
  for (const auto& [t, i] : picks) {
    double& theta = prefs[t].value->data()[i];
    const double saved = theta;
    theta = saved + cfg.eps;
    const Mat<double> pp = predict_all(params);
    theta = saved - cfg.eps;
    const Mat<double> pm = predict_all(params);
    theta = saved;
    // Differencing the predictions before projecting avoids cancellation
    // in the summed loss.
    const double fd = ((pp - pm).array() * proj.array()).sum() / (2.0 * cfg.eps);
    const double an = grefs[t].value->data()[i];
    const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8});
    if (rel >= result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_param = prefs[t].name + "[" + std::to_string(i) + "]";
    }
    ++result.samples;
  }
  return result;
}

// --- checkpoints ---------------------------------------------------------------

namespace {

constexpr const char* kCheckpointFormat = "visprompt-checkpoint";

Tensor to_tensor(const Mat<float>& m) {
  Tensor t;
  t.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  t.values.assign(m.data(), m.data() + m.size());
  return t;
}

Mat<float> from_tensor(const Tensor& t, Index rows, Index cols, const std::string& name) {
  if (t.shape.size() != 2 || t.shape[0] != static_cast<std::uint64_t>(rows) ||
      t.shape[1] != static_cast<std::uint64_t>(cols)) {
    throw ShapeError("checkpoint tensor '" + name + "' has the wrong shape");
  }
  Mat<float> m(rows, cols);
  std::copy(t.values.begin(), t.values.end(), m.data());
  return m;
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  TensorArchive archive;
  const auto refs = ckpt.params.refs();
  for (const auto& r : refs) archive.emplace_back(r.name, to_tensor(*r.value));
  const bool with_moments = !ckpt.adam_m.empty();
  if (with_moments) {
    if (ckpt.adam_m.size() != refs.size() || ckpt.adam_v.size() != refs.size()) {
      throw ShapeError("optimizer state does not match the parameter list");
    }
    for (std::size_t i = 0; i < refs.size(); ++i) {
      archive.emplace_back("adam_m/" + refs[i].name, to_tensor(ckpt.adam_m[i]));
      archive.emplace_back("adam_v/" + refs[i].name, to_tensor(ckpt.adam_v[i]));
    }
  }
  save_archive(path, archive);
  json side = {{"format", kCheckpointFormat},
               {"version", 1},
               {"step", ckpt.step},
               {"optimizer_state", with_moments},
               {"config", to_json(ckpt.config)}};
  std::ofstream os(sidecar_path(path), std::ios::binary);
  if (!os) throw IoError("cannot write " + sidecar_path(path).string());
  os << side.dump(2) << '\n';
  if (!os) throw IoError("write failed for " + sidecar_path(path).string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto side_path = sidecar_path(path);
  std::ifstream is(side_path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint sidecar " + side_path.string());
  json side;
  try {
    side = json::parse(is);
  } catch (const json::exception& e) {
    throw IoError("malformed checkpoint sidecar " + side_path.string() + ": " + e.what());
  }
  if (side.value("format", "") != kCheckpointFormat) {
    throw IoError(side_path.string() + " is not a checkpoint sidecar");
  }
  Checkpoint ckpt;
  ckpt.config = run_config_from_json(side.at("config"));
  ckpt.step = side.value("step", std::int64_t{0});
  const TensorArchive archive = load_archive(path);
  ckpt.params = ModelParams<float>::zeros(ModelDims::from_config(ckpt.config));
  const bool with_moments = side.value("optimizer_state", false);
  for (auto& r : ckpt.params.refs()) {
    *r.value = from_tensor(find_tensor(archive, r.name), r.value->rows(), r.value->cols(), r.name);
    if (with_moments) {
      ckpt.adam_m.push_back(from_tensor(find_tensor(archive, "adam_m/" + r.name), r.value->rows(),
                                        r.value->cols(), "adam_m/" + r.name));
      ckpt.adam_v.push_back(from_tensor(find_tensor(archive, "adam_v/" + r.name), r.value->rows(),
                                        r.value->cols(), "adam_v/" + r.name));
    }
  }
  return ckpt;
}

}  // namespace visprompt
