#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "test_util.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

// Runs the CLI with FRAGQ_OUT_ROOT pointing at `root`.
Run fragq_cli(const fs::path& root, const std::string& args) {
  const fs::path err_file = root / "stderr.txt";
  const std::string cmd = "FRAGQ_OUT_ROOT='" + root.string() + "' '" FRAGQ_CLI_PATH "' " + args + " 2>'" +
                          err_file.string() + "'";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p) != nullptr) r.out += buf.data();
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream is(err_file);
  r.err.assign(std::istreambuf_iterator<char>(is), {});
  return r;
}

std::string error_class(const Run& r) {
  const auto nl = r.err.find_last_of('{');
  if (nl == std::string::npos) return {};
  try {
    return json::parse(r.err.substr(nl))["error_class"];
  } catch (const json::exception&) {
    return {};
  }
}

}  // namespace

TEST(Cli, UsageAndConfigErrors) {
  fragq::test::TempDir root("cli_err");
  auto r = fragq_cli(root.path(), "synth --n 0 --out c");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(error_class(r), "usage_error");
  r = fragq_cli(root.path(), "synth --n 3 --bogus 1 --out c");
  EXPECT_EQ(r.code, 2);
  r = fragq_cli(root.path(), "synth --n abc --out c");
  EXPECT_EQ(r.code, 2);
  std::ofstream(root / "cfg.json") << R"({"synth": {"nn": 3}})";
  r = fragq_cli(root.path(), "synth --config '" + (root / "cfg.json").string() + "' --out c");
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(error_class(r), "config_error");
  r = fragq_cli(root.path(), "synth --profile smeared --out c");
  EXPECT_EQ(r.code, 3);
  r = fragq_cli(root.path(), "fragments --in '" + (root / "nope.fvc").string() + "' --out f");
  EXPECT_EQ(r.code, 4);
  EXPECT_EQ(error_class(r), "decode_error");
}

TEST(Cli, EndToEndWorkflow) {
  fragq::test::TempDir root("cli_e2e");
  auto r = fragq_cli(root.path(), "synth --n 10 --frames 2 --height 64 --width 72 --seed 3 --out corpus");
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path corpus = root / "corpus";
  ASSERT_TRUE(fs::exists(corpus / "manifest.tsv"));
  const json eff = json::parse(std::ifstream(corpus / "effective_config.json"));
  EXPECT_EQ(eff["config"]["n"], 10);
  EXPECT_EQ(eff["config_hash"].get<std::string>().size(), 16u);

  // Refuses a non-empty output directory unless forced.
  EXPECT_EQ(fragq_cli(root.path(), "synth --n 2 --out corpus").code, 2);
  std::ofstream(root / "small.json") << R"({"n": 10, "frames": 2, "height": 64, "width": 72, "seed": 3})";
  r = fragq_cli(root.path(), "synth --config '" + (root / "small.json").string() + "' --out corpus --force");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(std::ifstream(corpus / "effective_config.json"))["config_hash"], eff["config_hash"]);

  const std::string clip = (corpus / "clips" / "syn3_0.fvc").string();
  r = fragq_cli(root.path(), "fragments --in '" + clip + "' --gf 2 --sf 32 --t 2 --out frag");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(root / "frag" / "fragments.frg"));
  r = fragq_cli(root.path(), "fragments --in '" + clip + "' --gf 3 --sf 32 --t 2 --out frag2");
  EXPECT_EQ(r.code, 5);
  EXPECT_EQ(error_class(r), "fragment_infeasible");

  const std::string manifest = (corpus / "manifest.tsv").string();
  r = fragq_cli(root.path(), "train --manifest '" + manifest +
                                 "' --gf 2 --t 2 --epochs 1 --batch-size 2 --preset tiny --out run");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string ckpt = (root / "run" / "model.ckpt").string();
  ASSERT_TRUE(fs::exists(ckpt));
  EXPECT_TRUE(fs::exists(root / "run" / "metrics.jsonl"));
  EXPECT_EQ(fragq_cli(root.path(), "train --manifest '" + manifest + "' --gf 2 --t 2 --batch-size 1 --out run1").code, 3);

  r = fragq_cli(root.path(), "eval --checkpoint '" + ckpt + "' --manifest '" + manifest + "' --split train");
  ASSERT_EQ(r.code, 0) << r.err;
  const json ev = json::parse(r.out);
  EXPECT_EQ(ev["schema"], "fragq.eval/1");
  EXPECT_EQ(ev["videos"].size(), 6u);

  r = fragq_cli(root.path(), "score --checkpoint '" + ckpt + "' '" + clip + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find(clip), std::string::npos);

  r = fragq_cli(root.path(), "map --checkpoint '" + ckpt + "' --in '" + clip + "' --out map");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(root / "map" / "quality_map.json"));
  EXPECT_TRUE(fs::exists(root / "map" / "overlay.ppm"));

  r = fragq_cli(root.path(), "stability --checkpoint '" + ckpt + "' --manifest '" + manifest +
                                 "' --split train --repeats 2 --ensemble 2");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["schema"], "fragq.stability/1");

  r = fragq_cli(root.path(), "sweep --checkpoint '" + ckpt + "' --group a='" + manifest + "' --split train");
  ASSERT_EQ(r.code, 0) << r.err;

  r = fragq_cli(root.path(), "flops --preset tiny --t 8 --gf 2 --sf 32");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["input_shape"], json({8, 64, 64, 3}));
}
