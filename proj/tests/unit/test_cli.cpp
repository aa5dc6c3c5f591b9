#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "support.hpp"
#include "visprompt/cli.hpp"
#include "visprompt/io.hpp"

using namespace visprompt;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> tiny_sets() {
  return {"--set", "image_size=16", "--set", "embed_dim=16", "--set", "depth=1", "--set", "heads=2",
          "--set", "batch_size=2", "--set", "steps=4", "--set", "corpus_size=6",
          "--set", R"(tasks=["gauss_noise","canny"])"};
}

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST_CASE("gradcheck is deterministic", "[cli]") {
  const Result a = run({"gradcheck", "--seed", "7"});
  const Result b = run({"--seed", "7", "gradcheck"});
  REQUIRE(a.code == 0);
  REQUIRE(a.out.rfind("max_relative_error ", 0) == 0);
  REQUIRE(a.out == b.out);
}

TEST_CASE("op applies operators to image files", "[cli]") {
  testing::TempDir dir("cliop");
  write_ppm(dir / "flat.ppm", Image(12, 12, 0.6f));
  const Result r = run({"op", "--name", "laplacian", "--in", (dir / "flat.ppm").string(), "--out",
                        (dir / "edge.ppm").string()});
  REQUIRE(r.code == 0);
  REQUIRE(read_ppm(dir / "edge.ppm") == Image(12, 12, 0.0f));

  REQUIRE(run({"op", "--name", "gaussian_noise", "--in", (dir / "flat.ppm").string(), "--out",
               (dir / "n.gipt").string(), "--params", R"({"sigma_255": 0})"}).code == 0);
  REQUIRE(read_image(dir / "n.gipt") == read_ppm(dir / "flat.ppm"));

  const Result bad = run({"op", "--name", "canny", "--in", (dir / "flat.ppm").string(), "--out",
                          (dir / "c.ppm").string(), "--params", R"({"threshold": 3})"});
  REQUIRE(bad.code != 0);
  REQUIRE(nlohmann::json::parse(bad.err).at("message").get<std::string>().find("threshold") != std::string::npos);
}

TEST_CASE("errors are machine-readable", "[cli]") {
  testing::TempDir dir("clierr");
  const Result unknown = run({"synth", "--out", (dir / "x").string(), "--bogus"});
  REQUIRE(unknown.code == 2);
  REQUIRE(nlohmann::json::parse(unknown.err).at("error") == "usage");

  const Result missing = run({"eval", "--ckpt", (dir / "none.gipt").string(), "--task", "canny", "--out", "o"});
  REQUIRE(missing.code != 0);
  REQUIRE(missing.err.find("none.gipt") != std::string::npos);

  const Result invalid = run({"synth", "--out", (dir / "y").string(), "--set", "image_size=30"});
  REQUIRE(invalid.code == 1);
  REQUIRE(nlohmann::json::parse(invalid.err).at("error") == "config");

  REQUIRE(run({}).code == 2);
  REQUIRE(run({"--help"}).code == 0);
}

TEST_CASE("synth writes a manifest", "[cli]") {
  testing::TempDir dir("clisynth");
  const Result r = run(with({"synth", "--out", (dir / "s").string(), "--episodes", "3", "--dump-tokens"}, tiny_sets()));
  REQUIRE(r.code == 0);
  const auto manifest = nlohmann::json::parse(slurp(dir / "s" / "manifest.json"));
  REQUIRE(manifest.at("corpus").size() == 6u);
  REQUIRE(manifest.at("episodes").size() == 3u);
  for (const auto& ep : manifest.at("episodes")) {
    for (const char* k : {"q1", "a1", "q2", "a2", "tokens"})
      REQUIRE(std::filesystem::exists(dir / "s" / ep.at("files").at(k).get<std::string>()));
  }
  const auto ar = load_archive(dir / "s" / manifest["episodes"][0]["files"]["tokens"].get<std::string>());
  REQUIRE(find_tensor(ar, "tokens").shape == std::vector<std::uint64_t>{16, 192});

  REQUIRE(run(with({"synth", "--out", (dir / "t").string(), "--episodes", "3"}, tiny_sets())).code == 0);
  REQUIRE(slurp(dir / "t" / "episodes" / "ep_0002_q2.ppm") == slurp(dir / "s" / "episodes" / "ep_0002_q2.ppm"));

  REQUIRE(run(with({"--seed", "9", "synth", "--out", (dir / "u").string(), "--episodes", "1"}, tiny_sets())).code == 0);
  REQUIRE(slurp(dir / "u" / "corpus" / "clean_0000.ppm") != slurp(dir / "t" / "corpus" / "clean_0000.ppm"));
}

TEST_CASE("train, eval, sweep and ablate", "[cli]") {
  testing::TempDir dir("clirun");
  const auto run_dir = dir / "run";
  REQUIRE(run(with({"train", "--out", run_dir.string()}, tiny_sets())).code == 0);
  const auto ckpt = (run_dir / "checkpoint.gipt").string();

  REQUIRE(run({"eval", "--ckpt", ckpt, "--task", "gauss_noise", "--prompt-seed", "2", "--images", "3",
               "--out", (dir / "ev").string()}).code == 0);
  REQUIRE(std::filesystem::exists(dir / "ev" / "metrics.csv"));
  REQUIRE(std::filesystem::exists(dir / "ev" / "grids" / "grid_000.ppm"));

  REQUIRE(run({"sweep", "--ckpt", ckpt, "--task", "canny", "--n", "2", "--images", "2", "--out",
               (dir / "sw").string()}).code == 0);
  REQUIRE(std::filesystem::exists(dir / "sw" / "sweep.csv"));
  REQUIRE(run({"eval", "--ckpt", ckpt, "--task", "fog", "--out", (dir / "x").string()}).code != 0);

  REQUIRE(run(with({"ablate", "--out", (dir / "ab").string(), "--images", "2"}, tiny_sets())).code == 0);
  std::ifstream table(dir / "ab" / "ablation.csv");
  std::vector<std::string> lines;
  for (std::string l; std::getline(table, l);) lines.push_back(l);
  REQUIRE(lines.size() == 4u);
  REQUIRE(lines[1].rfind("promptgip,QAQA,mask_both,", 0) == 0);
  REQUIRE(lines[2].rfind("painter,QQAA,mask_both,", 0) == 0);
  REQUIRE(lines[3].rfind("direct,QAQA,mask_last,", 0) == 0);
}
