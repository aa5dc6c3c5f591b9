#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>

#include "support.hpp"
#include "visprompt/degrade.hpp"
#include "visprompt/error.hpp"
#include "visprompt/eval.hpp"

using namespace visprompt;
using Catch::Approx;
using testing::constant_image;
using testing::random_image;

namespace {

RunConfig tiny_config() {
  RunConfig cfg;
  cfg.image_size = 16;
  cfg.patch_size = 8;
  cfg.embed_dim = 16;
  cfg.depth = 1;
  cfg.heads = 2;
  return cfg;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::vector<std::string> lines;
  for (std::string l; std::getline(is, l);) lines.push_back(l);
  return lines;
}

}  // namespace

TEST_CASE("psnr closed forms", "[eval][metrics]") {
  const Image a = random_image(16, 16, 1);
  REQUIRE(psnr(a, a) == kPsnrCap);
  REQUIRE(psnr(constant_image(8, 8, 0.0f), constant_image(8, 8, 0.5f)) == Approx(10 * std::log10(4.0)).margin(1e-9));
  REQUIRE(psnr(constant_image(8, 8, 0.2f), constant_image(8, 8, 0.3f)) == Approx(20.0).margin(1e-4));
  REQUIRE_THROWS_AS(psnr(a, random_image(8, 16, 1)), ShapeError);
}

TEST_CASE("ssim closed forms", "[eval][metrics]") {
  const Image a = random_image(16, 16, 2);
  REQUIRE(ssim(a, a) == 1.0);

  const double mu = 0.5;
  const double c = 0.2;
  const double c1 = 1e-4;
  const double expect = (2 * mu * (mu + c) + c1) / (mu * mu + (mu + c) * (mu + c) + c1);
  const Image x = constant_image(16, 16, 0.5f);
  const Image y = constant_image(16, 16, 0.7f);
  REQUIRE(ssim(x, y) == Approx(expect).margin(1e-6));

  Image board(16, 16);
  for (int r = 0; r < 16; ++r)
    for (int k = 0; k < 16; ++k)
      for (int ch = 0; ch < 3; ++ch) board.at(r, k, ch) = static_cast<float>((r + k) % 2);
  Image inv = board;
  for (float& v : inv.data) v = 1.0f - v;
  REQUIRE(ssim(board, inv) < 0.0);
  REQUIRE_THROWS_AS(ssim(random_image(10, 10, 1), random_image(10, 10, 2)), ShapeError);
}

TEST_CASE("mae closed forms", "[eval][metrics]") {
  const Image a = random_image(8, 8, 3);
  REQUIRE(mae(a, a) == 0.0);
  REQUIRE(mae(constant_image(8, 8, 0.0f), constant_image(8, 8, 1.0f)) == 255.0);
  Image half(8, 8, 0.0f);
  for (std::size_t i = 0; i < half.data.size(); i += 2) half.data[i] = 1.0f;
  REQUIRE(mae(half, constant_image(8, 8, 0.0f)) == 127.5);
}

TEST_CASE("metrics are symmetric", "[eval][metrics]") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Image a = random_image(20, 20, s);
    const Image b = random_image(20, 20, s + 100);
    REQUIRE(psnr(a, b) == psnr(b, a));
    REQUIRE(ssim(a, b) == Approx(ssim(b, a)).margin(1e-12));
    REQUIRE(mae(a, b) == mae(b, a));
  }
}

TEST_CASE("psnr decreases with noise strength", "[eval][metrics]") {
  Rng rng(4);
  const Image clean = gen_clean_image(32, rng);
  double lo = 0.0;
  double hi = 0.0;
  for (int t = 0; t < 100; ++t) {
    Rng a(1000 + t);
    Rng b(5000 + t);
    lo += psnr(clean, degrade::gaussian_noise(clean, 10.0, a));
    hi += psnr(clean, degrade::gaussian_noise(clean, 30.0, b));
  }
  REQUIRE(hi < lo);
}

TEST_CASE("prompted inference", "[eval][infer]") {
  const RunConfig cfg = tiny_config();
  const auto model = init_params<float>(ModelDims::from_config(cfg), 3);
  const QAPair prompt = make_prompt(cfg, TaskId::GaussNoise, 0);
  const auto tests = make_test_pairs(cfg, TaskId::GaussNoise, 5);

  const Image out = infer(model, prompt, tests[0].question);
  REQUIRE(out.same_shape(tests[0].question));
  for (float v : out.data) REQUIRE((v >= 0.0f && v <= 1.0f));
  REQUIRE(infer(model, prompt, tests[0].question) == out);

  // The placeholder never reaches the model output.
  const Image noise = random_image(16, 16, 77);
  TokenSequence s1 = pack_images({&prompt.question, &prompt.answer, &tests[0].question, &noise}, 8, Order::QAQA);
  Rng r(1);
  sample_mask(s1, {MaskStrategy::FullMaskA2, 0.85}, r);
  const Image blank(16, 16, 0.0f);
  TokenSequence s2 = pack_images({&prompt.question, &prompt.answer, &tests[0].question, &blank}, 8, Order::QAQA);
  sample_mask(s2, {MaskStrategy::FullMaskA2, 0.85}, r);
  REQUIRE(predict(model, s1) == predict(model, s2));

  std::vector<Image> queries;
  for (const auto& t : tests) queries.push_back(t.question);
  const auto many = infer_many(model, prompt, queries);
  for (std::size_t i = 0; i < many.size(); ++i) {
    const Image single = infer(model, prompt, queries[i]);
    REQUIRE(testing::max_abs_diff(many[i], single) < 1e-6);
  }
  REQUIRE_THROWS_AS(infer(model, prompt, random_image(24, 24, 1)), ShapeError);
}

TEST_CASE("held-out sets are disjoint from training and reproducible", "[eval][data]") {
  const RunConfig cfg = tiny_config();
  const auto train_imgs = gen_clean_corpus(20, cfg.image_size, Rng::stream(cfg.seed, "corpus"));
  const auto test_imgs = test_corpus(cfg, 20);
  for (const auto& t : test_imgs)
    for (const auto& c : train_imgs) REQUIRE(t != c);
  REQUIRE(make_test_pairs(cfg, TaskId::Canny, 3)[2].question == make_test_pairs(cfg, TaskId::Canny, 3)[2].question);
  REQUIRE(make_prompt(cfg, TaskId::Jpeg, 4).question == make_prompt(cfg, TaskId::Jpeg, 4).question);
  REQUIRE(make_prompt(cfg, TaskId::Jpeg, 4).question != make_prompt(cfg, TaskId::Jpeg, 5).question);
}

TEST_CASE("sweep aggregates", "[eval][sweep]") {
  const Aggregate a = aggregate({{20, 0.5, 9}, {22, 0.7, 4}, {24, 0.6, 5}});
  REQUIRE(a.avg.psnr == Approx(22.0).margin(1e-12));
  REQUIRE(a.std.psnr == Approx(std::sqrt(8.0 / 3.0)).margin(1e-12));
  REQUIRE(a.best.psnr == 24.0);
  REQUIRE(a.best.ssim == 0.7);
  REQUIRE(a.best.mae == 4.0);
  REQUIRE(a.best.psnr >= a.avg.psnr);
  REQUIRE(a.best.mae <= a.avg.mae);

  const Aggregate one = aggregate({{21.5, 0.4, 7}});
  REQUIRE(one.std.psnr == 0.0);
  REQUIRE(one.std.mae == 0.0);
  REQUIRE(one.best.psnr == one.avg.psnr);
  REQUIRE_THROWS_AS(aggregate({}), ParameterError);
}

TEST_CASE("sweep report format", "[eval][sweep]") {
  testing::TempDir dir("sweep");
  const RunConfig cfg = tiny_config();
  const auto model = init_params<float>(ModelDims::from_config(cfg), 5);
  const auto tests = make_test_pairs(cfg, TaskId::Canny, 4);
  const SweepReport rep = sweep(model, cfg, TaskId::Canny, tests, 3);
  REQUIRE(rep.per_prompt.size() == 3u);
  write_sweep_csv(dir / "s.csv", rep);
  write_sweep_summary(dir / "sum.csv", rep);
  const auto lines = read_lines(dir / "s.csv");
  REQUIRE(lines.size() == 1u + 3u + 2u);
  REQUIRE(lines[0] == "task,prompt,psnr,ssim,mae,best");
  REQUIRE(lines[4].rfind("canny,avg,", 0) == 0);
  REQUIRE(lines[5].rfind("canny,std,", 0) == 0);
  REQUIRE(read_lines(dir / "sum.csv").size() == 4u);
  REQUIRE(best_prompt(rep) < 3u);
  REQUIRE(std::stod(format_metric(0.1)) == 0.1);
}

TEST_CASE("evaluation rows and grid", "[eval]") {
  testing::TempDir dir("eval");
  const RunConfig cfg = tiny_config();
  const auto model = init_params<float>(ModelDims::from_config(cfg), 6);
  const auto tests = make_test_pairs(cfg, TaskId::GaussNoise, 3);
  const TaskEval ev = evaluate_task(model, make_prompt(cfg, TaskId::GaussNoise, 0), tests);
  REQUIRE(ev.rows.size() == 3u);
  REQUIRE(ev.rows[1].baseline.psnr == psnr(tests[1].question, tests[1].answer));
  write_eval_csv(dir / "m.csv", ev);
  REQUIRE(read_lines(dir / "m.csv").size() == 5u);

  const Image g = make_grid({Image(4, 3, 0.2f), Image(4, 3, 0.4f), Image(4, 3, 0.6f)});
  REQUIRE(g.height == 4);
  REQUIRE(g.width == 3 * 3 + 2);
  REQUIRE(g.at(0, 3, 0) == 1.0f);
  REQUIRE(g.at(0, 4, 0) == 0.4f);
}
