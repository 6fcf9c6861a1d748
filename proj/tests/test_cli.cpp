#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "latticeforge/assembly.hpp"
#include "latticeforge/builtin_tilesets.hpp"
#include "latticeforge/cli.hpp"
#include "latticeforge/config.hpp"

using namespace latticeforge;
namespace fs = std::filesystem;

namespace {

struct Invocation {
  int code;
  std::string out;
  std::string err;
};

Invocation run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = cli::run_command(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("latticeforge_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }
  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

  fs::path dir_;
};

std::shared_ptr<const Ruleset> shared_builtin(const char* name) {
  return std::make_shared<const Ruleset>(load_tileset(*builtin_tileset(name)));
}

}  // namespace

TEST_F(CliTest, ValidateBuiltin) {
  Invocation r = run({"validate", "--tileset", "checkerboard"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "0 errors, 0 warnings\n");
}

TEST_F(CliTest, ValidateReportsWarningsAndErrors) {
  const std::string line = write("line.json", R"({"version": 1, "rank": 2,
    "tiles": [{"id": 0, "name": "A"}], "rules": [{"a": 0, "dir": "+x", "b": 0}]})");
  Invocation r = run({"validate", "--tileset", line});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("2 warnings"), std::string::npos);
  EXPECT_NE(r.out.find("+y"), std::string::npos);

  const std::string bad = write("bad.json", R"({"version": 1, "rank": 2, "tiles": [{"id": 0, "weight": 0}]})");
  r = run({"validate", "--tileset", bad});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.out, "1 errors, 0 warnings\n");
  EXPECT_EQ(run({"validate", "--tileset", path("missing.json")}).code, 1);
}

TEST_F(CliTest, RolloutCheckerboardCompletes) {
  Invocation r = run({"rollout", "--tileset", "checkerboard", "--dims", "4x4", "--policy", "random", "--consistency",
               "propagate", "--seed", "7"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(doc["status"], "Complete");
  EXPECT_EQ(doc["metrics"]["coverage"], 1.0);
  EXPECT_EQ(doc["metrics"]["steps"], 15);
  EXPECT_EQ(doc["dims"], (std::vector<int>{4, 4}));
  EXPECT_EQ(doc["seed"], 7u);
  for (int c : doc["cells"].get<std::vector<int>>()) EXPECT_GE(c, 0);
}

TEST_F(CliTest, RolloutIsByteIdenticalUnderSeed) {
  const std::vector<std::string> base{"rollout", "--tileset", "islands", "--dims", "9x7", "--seed", "123"};
  auto a = base, b = base;
  a.insert(a.end(), {"--out", path("a.json")});
  b.insert(b.end(), {"--out", path("b.json")});
  ASSERT_EQ(run(a).code, 0);
  ASSERT_EQ(run(b).code, 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  EXPECT_FALSE(slurp(path("a.json")).empty());
}

TEST_F(CliTest, RolloutFromConfigDocument) {
  const std::string cfg = write("env.json", R"({"tileset": "towers", "dims": "6x6", "consistency": "propagate",
    "master_seed": 4, "reward": {"coverage_weight": 0.5, "stability_weight": 0.5}})");
  Invocation r = run({"rollout", "--config", cfg});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["seed"], 4u);
}

TEST_F(CliTest, ContradictionBudgetExitsWithDomainError) {
  // A single tile with no vertical partner: every canvas taller than one row fails.
  const std::string flat = write("flat.json", R"({"version": 1, "rank": 2,
    "tiles": [{"id": 0, "name": "A"}], "rules": [{"a": 0, "dir": "+x", "b": 0}]})");
  Invocation r = run({"rollout", "--tileset", flat, "--dims", "3x3", "--attempts", "3", "--out", path("o.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(nlohmann::json::parse(slurp(path("o.json")))["status"], "Invalid");
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"validate"}).code, 2);
  EXPECT_EQ(run({"rollout", "--tileset", "checkerboard", "--dims", "4by4"}).code, 2);
  EXPECT_EQ(run({"rollout", "--tileset", "checkerboard", "--dims", "4x4", "--consistency", "eager"}).code, 2);
  EXPECT_EQ(run({"rollout", "--tileset", "checkerboard", "--dims", "4x4", "--seed", "minus"}).code, 2);
  EXPECT_EQ(run({"rollout", "--tileset", "checkerboard"}).code, 2);
  EXPECT_EQ(run({"rollout", "--tileset", "checkerboard", "--dims", "4x4", "--attempts", "0"}).code, 2);
  EXPECT_EQ(run({"export", "--assembly", path("x.json"), "--format", "svg"}).code, 1);
}

TEST_F(CliTest, DomainErrorsExitOne) {
  EXPECT_EQ(run({"rollout", "--tileset", "no-such-tileset", "--dims", "4x4"}).code, 1);
  EXPECT_EQ(run({"rollout", "--tileset", "checkerboard", "--dims", "4x4x4"}).code, 1);
  EXPECT_EQ(run({"eval", "--policy", "random", "--tileset", "checkerboard", "--dims", "4x4", "--episodes", "0"}).code,
            1);
  EXPECT_EQ(run({"eval", "--ckpt", path("nothing")}).code, 1);
}

TEST_F(CliTest, TrainThenEvaluate) {
  const std::string cfg = write("train.cfg", R"({"steps_per_update": 32, "minibatch_size": 16,
    "epochs_per_update": 1, "total_steps": 64, "hidden": 8, "checkpoint_every": 1})");
  const std::string out = path("run");
  Invocation t = run({"train", "--tileset", "checkerboard", "--dims", "8x8", "--config", cfg, "--out", out, "--seed", "3"});
  ASSERT_EQ(t.code, 0) << t.err;
  std::ifstream metrics(out + "/metrics.csv");
  std::vector<std::string> lines;
  for (std::string line; std::getline(metrics, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[1], kMetricsHeader);
  EXPECT_TRUE(fs::exists(out + "/ckpt_final.json"));
  EXPECT_TRUE(fs::exists(out + "/ckpt_1.json"));

  Invocation e = run({"eval", "--ckpt", out + "/ckpt_final", "--episodes", "20"});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("episodes      20"), std::string::npos);
  EXPECT_NE(e.out.find("mean_reward"), std::string::npos);
  EXPECT_NE(e.out.find("mean_coverage "), std::string::npos);
  EXPECT_NE(e.out.find("invalid_rate"), std::string::npos);
  EXPECT_EQ(e.out, run({"eval", "--ckpt", out + "/ckpt_final.json", "--episodes", "20"}).out);

  Invocation roll = run({"rollout", "--tileset", "checkerboard", "--dims", "8x8", "--radius", "2", "--policy",
                  out + "/ckpt_final.json"});
  EXPECT_EQ(roll.code, 0) << roll.err;

  // Resuming from the first checkpoint finishes the remaining update only.
  const std::string resumed = path("resumed");
  fs::create_directories(resumed);
  Invocation r = run({"train", "--tileset", "checkerboard", "--dims", "8x8", "--config", cfg, "--out", resumed, "--seed", "3",
               "--resume", out + "/ckpt_1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(resumed + "/ckpt_final.json"), slurp(out + "/ckpt_final.json"));
}

TEST_F(CliTest, ExtractFromSample) {
  const std::string sample = write("sample.json", R"({"dims": [2, 2], "cells": [0, 1, 1, 0],
    "names": {"0": "A", "1": "B"}})");
  Invocation r = run({"extract", "--sample", sample, "--out", path("rules.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  Ruleset got = load_tileset(slurp(path("rules.json")));
  Ruleset board = load_tileset(*builtin_tileset("checkerboard"));
  for (TileId a = 0; a < 2; ++a)
    for (TileId b = 0; b < 2; ++b)
      for (int d = 0; d < 4; ++d)
        EXPECT_EQ(got.compatible(a, Direction::from_index(d), b), board.compatible(a, Direction::from_index(d), b));
  EXPECT_EQ(got.tile(0).name, "A");
  EXPECT_EQ(run({"validate", "--tileset", path("rules.json")}).out, "0 errors, 0 warnings\n");
  const std::string empty = write("empty.json", R"({"dims": [0, 0], "cells": []})");
  EXPECT_NE(run({"extract", "--sample", empty}).code, 0);
}

TEST_F(CliTest, ExportRoundTrip) {
  ASSERT_EQ(run({"rollout", "--tileset", "mostly-floor", "--dims", "6x5", "--seed", "11", "--out", path("a.json")}).code,
            0);
  Invocation e = run({"export", "--assembly", path("a.json"), "--out", path("b.json")});
  ASSERT_EQ(e.code, 0) << e.err;
  auto a = nlohmann::json::parse(slurp(path("a.json")));
  auto b = nlohmann::json::parse(slurp(path("b.json")));
  EXPECT_EQ(a["metrics"], b["metrics"]);
  EXPECT_EQ(a["cells"], b["cells"]);
  EXPECT_EQ(a["status"], b["status"]);

  Invocation ascii = run({"export", "--assembly", path("a.json"), "--format", "ascii"});
  ASSERT_EQ(ascii.code, 0);
  Assembly parsed = assembly_from_json(a);
  Canvas canvas = Canvas::restore(shared_builtin("mostly-floor"), parsed.dims, parsed.cells);
  EXPECT_EQ(ascii.out, render_ascii(canvas) + "\n");
  EXPECT_EQ(std::count(ascii.out.begin(), ascii.out.end(), '\n'), 5);
}

TEST(RenderAscii, Examples) {
  auto board = shared_builtin("checkerboard");
  // Row-major from y = 0: (0,0)=B (1,0)=A (0,1)=A (1,1)=B
  EXPECT_EQ(render_ascii(Canvas::restore(board, {2, 2}, {1, 0, 0, 1})), "AB\nBA");
  EXPECT_EQ(render_ascii(Canvas::restore(board, {1, 1}, {-1})), ".");
  auto floor = shared_builtin("mostly-floor");
  const TileId v = *floor->void_tile();
  EXPECT_EQ(render_ascii(Canvas::restore(floor, {3, 1}, {0, v, 1})), "f b");
  auto cube = shared_builtin("blocks3d");
  try {
    render_ascii(Canvas::restore(cube, {2, 2, 2}, std::vector<int>(8, -1)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedRank);
  }
}

TEST(ConfigDocs, EnvironmentRoundTrip) {
  EnvConfig cfg = env_config_from_json(nlohmann::json::parse(R"({"tileset": "islands", "dims": [5, 4],
    "consistency": "propagate", "radius": 1, "max_steps": 9, "master_seed": 8, "seed_cell": [1, 2],
    "reward": {"coverage_weight": 0.25, "tile_target": {"land": {"fraction": 0.5, "weight": 1.0}}}})"));
  EXPECT_EQ(cfg.mode, Consistency::Propagate);
  EXPECT_EQ(cfg.seed.cell, (Coord{1, 2, 0}));
  EXPECT_EQ(cfg.reward.tile_target.at(*cfg.ruleset->find("land")).fraction, 0.5);
  EnvConfig back = env_config_from_json(env_config_to_json(cfg));
  EXPECT_EQ(env_config_to_json(back), env_config_to_json(cfg));
  EXPECT_EQ(*back.ruleset, *cfg.ruleset);
}
