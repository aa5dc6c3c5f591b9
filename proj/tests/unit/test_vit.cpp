#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "support.hpp"
#include "visprompt/error.hpp"
#include "visprompt/vit.hpp"

using namespace visprompt;
using Catch::Approx;
using testing::random_image;

namespace {

const ModelDims kTiny{4, 4, 16, 2, 2, 4};

TokenSequence tiny_sequence(std::uint64_t seed, MaskStrategy strategy = MaskStrategy::MaskBoth) {
  const Image q1 = random_image(8, 8, seed * 4 + 0);
  const Image a1 = random_image(8, 8, seed * 4 + 1);
  const Image q2 = random_image(8, 8, seed * 4 + 2);
  const Image a2 = random_image(8, 8, seed * 4 + 3);
  TokenSequence seq = pack_images({&q1, &a1, &q2, &a2}, 4, Order::QAQA);
  Rng rng(seed);
  sample_mask(seq, {strategy, 0.5}, rng);
  return seq;
}

template <typename T>
Mat<T> rows_of_slot(const Mat<T>& pred, const TokenSequence& seq, int slot) {
  const int first = seq.first_token(slot);
  return pred.middleRows(first, seq.patches_per_image);
}

}  // namespace

TEST_CASE("parameter initialization", "[vit][init]") {
  const ModelDims dims{8, 16, 128, 4, 4, 4};
  const auto a = init_params<float>(dims, 3);
  const auto b = init_params<float>(dims, 3);
  auto ra = a.refs();
  auto rb = b.refs();
  REQUIRE(ra.size() == rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) REQUIRE(*ra[i].value == *rb[i].value);

  const double n = static_cast<double>(a.patch_w.size());
  const double m = a.patch_w.template cast<double>().mean();
  const double sd = std::sqrt((a.patch_w.template cast<double>().array() - m).square().sum() / n);
  REQUIRE(sd == Approx(kInitStd).epsilon(0.10));
  REQUIRE(a.patch_w.cwiseAbs().maxCoeff() <= 3.0 * kInitStd + 1e-7);

  for (const auto& blk : a.blocks) {
    REQUIRE((blk.ln1_g.array() == 1.0f).all());
    REQUIRE((blk.ln2_g.array() == 1.0f).all());
    REQUIRE((blk.ln1_b.array() == 0.0f).all());
    REQUIRE((blk.qkv_b.array() == 0.0f).all());
  }
  REQUIRE((a.lnf_g.array() == 1.0f).all());
  REQUIRE((a.head_b.array() == 0.0f).all());
  REQUIRE(a.all_finite());

  for (const auto& r : ra) {
    const bool is_weight = r.name.size() > 2 && r.name.substr(r.name.size() - 2) == "_w";
    REQUIRE(r.decay == is_weight);
  }
  REQUIRE(a.patch_w.rows() == 192);
  REQUIRE(a.patch_w.cols() == 128);
  REQUIRE(a.pos_emb.rows() == 16);
  REQUIRE(a.slot_emb.rows() == 4);
  REQUIRE(a.blocks.size() == 4u);
  REQUIRE(a.blocks[0].fc1_w.cols() == 512);
}

TEST_CASE("forward pass contracts", "[vit][forward]") {
  auto params = init_params<double>(kTiny, 1);
  // Larger weights so attention is far from uniform.
  Rng rng(5);
  for (auto& r : params.refs())
    for (auto& v : r.value->reshaped()) v += rng.normal(0.0, 0.3);

  const TokenSequence s1 = tiny_sequence(1);
  const TokenSequence s2 = tiny_sequence(2);
  const Batch<double> batch = make_batch<double>({&s1, &s2});
  ForwardTape<double> tape;
  const Mat<double> pred = forward(params, batch, &tape);
  REQUIRE(pred.rows() == 2 * 16);
  REQUIRE(pred.cols() == kTiny.token_dim());
  REQUIRE((pred.array() > 0.0).all());
  REQUIRE((pred.array() < 1.0).all());
  for (const auto& blk : tape.blocks) {
    REQUIRE(blk.probs.size() == 2u * kTiny.heads);
    for (const auto& p : blk.probs)
      for (int r = 0; r < p.rows(); ++r) REQUIRE(std::abs(p.row(r).sum() - 1.0) < 1e-6);
  }
  REQUIRE(forward(params, batch) == pred);

  // Batched rows equal single-sequence rows.
  const Mat<double> alone = forward(params, make_batch<double>({&s2}));
  REQUIRE((alone - pred.bottomRows(16)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("masked token content never reaches the output", "[vit][forward]") {
  const auto params = init_params<float>(kTiny, 2);
  TokenSequence seq = tiny_sequence(3);
  const Mat<float> base = predict(params, seq);
  for (int i : seq.mask_indices())
    for (int k = 0; k < seq.token_dim(); ++k) seq.token(i)[k] = 1.0f - seq.token(i)[k];
  REQUIRE(predict(params, seq) == base);
}

TEST_CASE("swapping two Q1 tokens together with their positions", "[vit][forward]") {
  auto params = init_params<double>(kTiny, 4);
  Rng rng(9);
  for (auto& r : params.refs())
    for (auto& v : r.value->reshaped()) v += rng.normal(0.0, 0.2);
  TokenSequence seq = tiny_sequence(4);
  const Mat<double> base = forward(params, make_batch<double>({&seq}));

  const int i = seq.first_token(kQ1);
  const int j = i + 2;
  for (int k = 0; k < seq.token_dim(); ++k) std::swap(seq.token(i)[k], seq.token(j)[k]);
  std::swap(seq.patch_index[i], seq.patch_index[j]);
  const Mat<double> moved = forward(params, make_batch<double>({&seq}));
  REQUIRE((rows_of_slot(moved, seq, kA2) - rows_of_slot(base, seq, kA2)).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("backward pass contracts", "[vit][backward]") {
  const auto params = init_params<double>(kTiny, 6);
  const TokenSequence seq = tiny_sequence(5);
  const Batch<double> batch = make_batch<double>({&seq});

  ForwardTape<double> tape;
  const Mat<double> pred = forward(params, batch, &tape);
  const Mat<double> zero = Mat<double>::Zero(pred.rows(), pred.cols());
  auto g0 = backward(params, tape, zero);
  for (const auto& r : g0.refs()) REQUIRE(r.value->cwiseAbs().maxCoeff() == 0.0);
  REQUIRE_THROWS_AS(backward(params, tape, zero), Error);

  Rng rng(7);
  Mat<double> up(pred.rows(), pred.cols());
  for (auto& v : up.reshaped()) v = rng.normal();
  ForwardTape<double> tape2;
  forward(params, batch, &tape2);
  const auto g = backward(params, tape2, up);
  const Mat<double> expect = (up.array() * pred.array() * (1.0 - pred.array())).colwise().sum();
  REQUIRE((g.head_b - expect).cwiseAbs().maxCoeff() < 1e-12);

  ForwardTape<double> fresh;
  REQUIRE_THROWS_AS(backward(params, fresh, up), Error);
}

TEST_CASE("finite-difference gradient check", "[vit][gradcheck]") {
  const GradCheckResult r = grad_check({}, 0);
  INFO("worst " << r.worst_param);
  REQUIRE(r.samples >= 200);
  REQUIRE(r.max_rel_error < 1e-4);
  REQUIRE(grad_check({}, 0).max_rel_error == r.max_rel_error);
  REQUIRE(grad_check({}, 1).max_rel_error < 1e-4);

  // Without transformer blocks only the embedding, final norm and head
  // remain; the finite difference is then accurate to about 1e-7.
  GradCheckConfig shallow;
  shallow.dims.depth = 0;
  shallow.eps = 1e-5;
  for (std::uint64_t seed : {0u, 1u, 2u}) REQUIRE(grad_check(shallow, seed).max_rel_error < 1e-6);
}

TEST_CASE("checkpoints roundtrip losslessly", "[vit][checkpoint]") {
  testing::TempDir dir("ckpt");
  RunConfig cfg;
  cfg.image_size = 8;
  cfg.patch_size = 4;
  cfg.embed_dim = 16;
  cfg.depth = 2;
  cfg.heads = 2;
  Checkpoint ck;
  ck.config = cfg;
  ck.params = init_params<float>(ModelDims::from_config(cfg), 11);
  ck.step = 42;
  for (const auto& r : ck.params.refs()) {
    ck.adam_m.push_back(Mat<float>::Constant(r.value->rows(), r.value->cols(), 0.125f));
    ck.adam_v.push_back(Mat<float>::Constant(r.value->rows(), r.value->cols(), 3.5e-9f));
  }
  save_checkpoint(dir / "c.gipt", ck);
  REQUIRE(std::filesystem::exists(sidecar_path(dir / "c.gipt")));
  const Checkpoint back = load_checkpoint(dir / "c.gipt");
  REQUIRE(back.step == 42);
  REQUIRE(to_json(back.config) == to_json(cfg));
  auto ra = ck.params.refs();
  auto rb = back.params.refs();
  for (std::size_t i = 0; i < ra.size(); ++i) {
    REQUIRE(ra[i].name == rb[i].name);
    REQUIRE(*ra[i].value == *rb[i].value);
    REQUIRE(back.adam_m[i] == ck.adam_m[i]);
    REQUIRE(back.adam_v[i] == ck.adam_v[i]);
  }
  TokenSequence seq = tiny_sequence(8);
  REQUIRE(predict(ck.params, seq) == predict(back.params, seq));

  REQUIRE_THROWS_AS(load_checkpoint(dir / "missing.gipt"), IoError);
}

TEST_CASE("shape errors", "[vit]") {
  const auto params = init_params<float>(kTiny, 1);
  const Image big = random_image(16, 16, 1);
  const TokenSequence wrong = pack_images({&big, &big, &big, &big}, 4, Order::QAQA);
  REQUIRE_THROWS_AS(predict(params, wrong), ShapeError);
  ModelDims bad = kTiny;
  bad.heads = 3;
  REQUIRE_THROWS_AS(bad.validate(), ShapeError);
}
