#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <memory>
#include <set>
#include <vector>

#include "latticeforge/builtin_tilesets.hpp"
#include "latticeforge/environment.hpp"
#include "oracles.hpp"

using namespace latticeforge;

namespace {

std::shared_ptr<const Ruleset> shared_builtin(const char* name) {
  return std::make_shared<const Ruleset>(load_tileset(*builtin_tileset(name)));
}

EnvConfig config(const char* tileset, std::vector<int> dims, Consistency mode = Consistency::Local, int radius = 2) {
  EnvConfig cfg;
  cfg.ruleset = shared_builtin(tileset);
  cfg.dims = std::move(dims);
  cfg.mode = mode;
  cfg.radius = radius;
  return cfg;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::BadConfig;
}

// Recomputes the observation from the canvas and the selected node and
// compares it with what the environment emitted.
void expect_observation_matches(const Environment& env, const Observation& obs) {
  const Canvas& c = env.canvas();
  const Lattice& lat = c.lattice();
  const int n = env.n_actions();
  const int r = env.config().radius;
  const std::size_t channels = static_cast<std::size_t>(n + 2);
  ASSERT_EQ(obs.features.size(), env.obs_dim());
  const Coord center = env.selected_node();
  std::size_t w = 0;
  for (int dz = lat.rank() == 3 ? -r : 0; dz <= (lat.rank() == 3 ? r : 0); ++dz)
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx, ++w) {
        Coord cc{center[0] + dx, center[1] + dy, center[2] + dz};
        std::size_t expected = !lat.contains(cc)        ? channels - 1
                               : c.cells()[lat.index(cc)] >= 0 ? static_cast<std::size_t>(c.cells()[lat.index(cc)])
                                                               : channels - 2;
        double hot = 0.0;
        for (std::size_t ch = 0; ch < channels; ++ch) {
          double v = obs.features[w * channels + ch];
          EXPECT_TRUE(v == 0.0 || v == 1.0);
          hot += v;
        }
        EXPECT_EQ(hot, 1.0);
        EXPECT_EQ(obs.features[w * channels + expected], 1.0);
      }
  const double cells = static_cast<double>(lat.cell_count());
  EXPECT_DOUBLE_EQ(obs.features[w * channels], static_cast<double>(c.decided_count()) / cells);
  EXPECT_DOUBLE_EQ(obs.features[w * channels + 1], static_cast<double>(c.frontier_size()) / cells);
  EXPECT_DOUBLE_EQ(obs.features[w * channels + 2],
                   static_cast<double>(env.steps()) / static_cast<double>(env.config().max_steps));
  ASSERT_EQ(obs.mask.size(), static_cast<std::size_t>(n));
  if (env.done()) {
    for (auto m : obs.mask) EXPECT_EQ(m, 0);
  } else {
    TileMask valid = valid_tiles(c, center);
    for (int a = 0; a < n; ++a) EXPECT_EQ(obs.mask[static_cast<std::size_t>(a)] != 0, (valid & tile_bit(a)) != 0);
  }
}

std::size_t solid_count(const Canvas& c) {
  std::size_t n = 0;
  for (TileId t : c.cells())
    if (t >= 0 && !c.ruleset().is_void(t)) ++n;
  return n;
}

}  // namespace

TEST(Environment, ObservationLength) {
  Environment env(config("checkerboard", {5, 5}, Consistency::Local, 1));
  EXPECT_EQ(env.obs_dim(), 39u);
  Rng rng = derive_rng(1);
  EXPECT_EQ(env.reset(rng).features.size(), 39u);
  Environment cube(config("blocks3d", {4, 4, 4}, Consistency::Local, 1));
  EXPECT_EQ(cube.obs_dim(), 27u * static_cast<std::size_t>(cube.n_actions() + 2) + 3u);
}

TEST(Environment, ResetIsDeterministic) {
  Environment a(config("pipes", {6, 6})), b(config("pipes", {6, 6}));
  Rng ra = derive_rng(8), rb = derive_rng(8);
  Observation oa = a.reset(ra), ob = b.reset(rb);
  EXPECT_EQ(oa.features, ob.features);
  EXPECT_EQ(oa.mask, ob.mask);
  EXPECT_EQ(a.selected_node(), b.selected_node());
  bool any = false;
  for (auto m : oa.mask) any = any || m;
  EXPECT_TRUE(any || a.done());
}

TEST(Environment, StepErrors) {
  Environment env(config("checkerboard", {3, 3}));
  EXPECT_EQ(code_of([&] { env.step(0); }), ErrorCode::EpisodeFinished);
  Rng rng = derive_rng(2);
  Observation obs = env.reset(rng);
  TileId masked = obs.mask[0] ? 1 : 0;
  EXPECT_EQ(code_of([&] { env.step(masked); }), ErrorCode::IllegalAction);
  EXPECT_EQ(code_of([&] { env.step(7); }), ErrorCode::IllegalAction);
  EXPECT_EQ(env.steps(), 0);
  Trajectory t = rollout(env, weighted_random_policy(env.config().ruleset), rng);
  EXPECT_TRUE(env.done());
  EXPECT_EQ(code_of([&] { env.step(0); }), ErrorCode::EpisodeFinished);
}

TEST(Environment, CheckerboardRolloutCompletes) {
  Environment env(config("checkerboard", {4, 4}, Consistency::Propagate));
  auto policy = weighted_random_policy(env.config().ruleset);
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng = derive_rng(s);
    Trajectory t = rollout(env, policy, rng);
    EXPECT_EQ(t.steps.size(), 15u);
    EXPECT_EQ(t.final_status, Status::Complete);
    EXPECT_DOUBLE_EQ(t.final_coverage, 1.0);
    EXPECT_DOUBLE_EQ(t.terminal_reward, 1.0);
    EXPECT_FALSE(t.truncated);
    for (std::size_t k = 0; k + 1 < t.steps.size(); ++k) {
      EXPECT_EQ(t.steps[k].reward, 0.0);
      EXPECT_FALSE(t.steps[k].done);
    }
    EXPECT_TRUE(t.steps.back().done);
    EXPECT_EQ(t.steps.back().reward, 1.0);
  }
}

TEST(Environment, MaxStepsTruncates) {
  EnvConfig cfg = config("mostly-floor", {8, 8});
  cfg.max_steps = 3;
  Environment env(cfg);
  Rng rng = derive_rng(4);
  Trajectory t = rollout(env, weighted_random_policy(cfg.ruleset), rng);
  if (t.final_status == Status::InProgress) {
    EXPECT_EQ(t.steps.size(), 3u);
    EXPECT_TRUE(t.truncated);
    EXPECT_TRUE(t.steps.back().truncated);
    EXPECT_TRUE(t.steps.back().done);
  } else {
    // The void tile can seal a tiny structure before the step limit.
    EXPECT_LE(t.steps.size(), 3u);
  }

  EnvConfig board = config("checkerboard", {8, 8});
  board.max_steps = 3;
  Environment env2(board);
  Trajectory t2 = rollout(env2, weighted_random_policy(board.ruleset), rng);
  EXPECT_EQ(t2.steps.size(), 3u);
  EXPECT_TRUE(t2.truncated);
  EXPECT_EQ(t2.final_status, Status::InProgress);
  EXPECT_DOUBLE_EQ(t2.terminal_reward, 4.0 / 64.0);
}

TEST(Environment, IdenticalSeedsGiveIdenticalTrajectories) {
  Environment env(config("islands", {7, 7}, Consistency::Propagate));
  auto policy = weighted_random_policy(env.config().ruleset);
  Rng a = derive_rng(12), b = derive_rng(12);
  Trajectory ta = rollout(env, policy, a);
  auto cells_a = env.canvas().cells();
  Trajectory tb = rollout(env, policy, b);
  ASSERT_EQ(ta.steps.size(), tb.steps.size());
  for (std::size_t k = 0; k < ta.steps.size(); ++k) {
    EXPECT_EQ(ta.steps[k].obs.features, tb.steps[k].obs.features);
    EXPECT_EQ(ta.steps[k].action, tb.steps[k].action);
  }
  EXPECT_EQ(cells_a, env.canvas().cells());
}

TEST(Coverage, Examples) {
  auto floor = shared_builtin("mostly-floor");
  const TileId v = *floor->void_tile();
  EXPECT_DOUBLE_EQ(coverage(Canvas::restore(floor, {4, 4}, std::vector<int>(16, 0))), 1.0);
  std::vector<int> half(16, -1);
  for (int i = 0; i < 8; ++i) half[static_cast<std::size_t>(i)] = i % 2;
  half[8] = v;
  EXPECT_DOUBLE_EQ(coverage(Canvas::restore(floor, {4, 4}, half)), 0.5);
  EXPECT_DOUBLE_EQ(coverage(Canvas::restore(floor, {4, 4}, std::vector<int>(16, v))), 0.0);
}

TEST(Stability, Examples) {
  auto floor = shared_builtin("mostly-floor");
  std::vector<int> column(15, -1);
  for (int y = 0; y < 5; ++y) column[static_cast<std::size_t>(y * 3 + 1)] = 0;
  Stability s = stability_proxy(Canvas::restore(floor, {3, 5}, column));
  EXPECT_EQ(s.max_displacement, 0.0);
  EXPECT_EQ(s.score, 1.0);

  // (0,0), (0,1), (1,1) on a 2x2 canvas
  s = stability_proxy(Canvas::restore(floor, {2, 2}, {0, -1, 0, 0}));
  EXPECT_EQ(s.max_displacement, 1.0);
  EXPECT_EQ(s.score, 0.5);

  std::vector<int> floating(64, -1);
  floating[3 * 8 + 3] = 0;
  s = stability_proxy(Canvas::restore(floor, {8, 8}, floating));
  EXPECT_EQ(s.max_displacement, 8.0);
  EXPECT_DOUBLE_EQ(s.score, 1.0 / 9.0);

  s = stability_proxy(Canvas::restore(floor, {4, 4}, std::vector<int>(16, -1)));
  EXPECT_EQ(s.max_displacement, 0.0);
  EXPECT_EQ(s.score, 1.0);

  // A void cell is not support: the block above it has to walk sideways.
  const TileId v = *floor->void_tile();
  s = stability_proxy(Canvas::restore(floor, {2, 2}, {v, 0, 0, -1}));
  EXPECT_EQ(s.max_displacement, 2.0);
}

TEST(Stability, UnreachableUsesWidestHorizontalExtentIn3D) {
  auto blocks = shared_builtin("blocks3d");
  std::vector<int> cells(3 * 4 * 6, -1);
  Lattice lat({3, 4, 6});
  cells[lat.index({1, 2, 1})] = 0;
  ASSERT_FALSE(blocks->is_void(0));
  EXPECT_EQ(stability_proxy(Canvas::restore(blocks, {3, 4, 6}, cells)).max_displacement, 6.0);
}

TEST(EvaluateTerminal, Examples) {
  auto floor = shared_builtin("mostly-floor");
  const TileId v = *floor->void_tile();
  Canvas full = Canvas::restore(floor, {3, 3}, std::vector<int>(9, 0));
  RewardSpec cov;
  EXPECT_DOUBLE_EQ(evaluate_terminal(full, cov, Status::Complete), 1.0);

  // coverage 0.75, stability score 0.5
  Canvas l_shape = Canvas::restore(floor, {2, 2}, {0, v, 0, 0});
  RewardSpec mix;
  mix.coverage_weight = 0.5;
  mix.stability_weight = 0.5;
  EXPECT_DOUBLE_EQ(evaluate_terminal(l_shape, mix, Status::Complete), 0.5 * 0.75 + 0.5 * 0.5);

  Canvas partial = Canvas::restore(floor, {5, 1}, {0, 0, 0, -1, -1});
  RewardSpec penalised;
  penalised.invalid_penalty = 0.2;
  EXPECT_DOUBLE_EQ(evaluate_terminal(partial, penalised, Status::Invalid), 0.4);
  EXPECT_DOUBLE_EQ(evaluate_terminal(partial, penalised, Status::Complete), 0.6);

  // 6 floor, 3 block of 9: floor fraction 2/3 against target 1/2
  Canvas mixed = Canvas::restore(floor, {3, 3}, {0, 0, 0, 0, 0, 0, 1, 1, 1});
  RewardSpec target;
  target.coverage_weight = 0.0;
  target.tile_target[0] = {0.5, 2.0};
  EXPECT_DOUBLE_EQ(evaluate_terminal(mixed, target, Status::Complete), 2.0 * (1.0 - (2.0 / 3.0 - 0.5)));
}

TEST(EvaluateTerminal, RewardSpecValidation) {
  RewardSpec zero;
  zero.coverage_weight = 0.0;
  EXPECT_EQ(code_of([&] { zero.validate(); }), ErrorCode::BadConfig);
  RewardSpec negative;
  negative.stability_weight = -1.0;
  EXPECT_EQ(code_of([&] { negative.validate(); }), ErrorCode::BadConfig);
  EnvConfig cfg = config("checkerboard", {3, 3});
  cfg.reward = zero;
  EXPECT_EQ(code_of([&] { Environment env(cfg); }), ErrorCode::BadConfig);
  EXPECT_EQ(code_of([&] { Environment env(config("checkerboard", {3, 3, 3})); }), ErrorCode::BadDims);
}

TEST(EnvironmentProperties, StepInvariants) {
  const char* names[] = {"checkerboard", "pipes", "mostly-floor", "stripes", "islands", "towers"};
  Rng rng = derive_rng(99);
  for (const char* name : names)
    for (Consistency mode : {Consistency::Local, Consistency::Propagate})
      for (int episode = 0; episode < 6; ++episode) {
        EnvConfig cfg = config(name, {3 + static_cast<int>(uniform_below(rng, 5)), 3 + static_cast<int>(uniform_below(rng, 5))},
                               mode, static_cast<int>(uniform_below(rng, 3)));
        cfg.reward.stability_weight = 0.5;
        Environment env(cfg);
        auto policy = weighted_random_policy(cfg.ruleset);
        Observation obs = env.reset(rng);
        expect_observation_matches(env, obs);
        const double cells = static_cast<double>(env.canvas().cell_count());
        double total_reward = 0.0;
        int length = 0;
        while (!env.done()) {
          const std::size_t solid_before = solid_count(env.canvas());
          const double cov_before = coverage(env.canvas());
          TileId a = policy(obs, rng).action;
          StepResult res = env.step(a);
          ++length;
          total_reward += res.reward;
          if (!res.done) {
            EXPECT_EQ(res.reward, 0.0);
          }
          const double cov = coverage(env.canvas());
          EXPECT_GE(cov, 0.0);
          EXPECT_LE(cov, 1.0);
          if (cfg.ruleset->is_void(a)) {
            EXPECT_EQ(cov, cov_before);
          } else {
            EXPECT_EQ(solid_count(env.canvas()), solid_before + 1);
            EXPECT_NEAR(cov - cov_before, 1.0 / cells, 1e-12);
          }
          EXPECT_DOUBLE_EQ(res.info.coverage, cov);
          EXPECT_EQ(res.info.status, status(env.canvas()));
          expect_observation_matches(env, res.obs);
          obs = res.obs;
        }
        EXPECT_LE(length, static_cast<int>(cells) - 1);
        EXPECT_LE(length, env.config().max_steps);
        EXPECT_DOUBLE_EQ(total_reward, env.terminal_reward());
        EXPECT_DOUBLE_EQ(env.terminal_reward(), evaluate_terminal(env.canvas(), cfg.reward, env.current_status()));
      }
}

TEST(EnvironmentProperties, ObservationIn3D) {
  EnvConfig cfg = config("blocks3d", {4, 3, 4}, Consistency::Propagate, 1);
  Environment env(cfg);
  Rng rng = derive_rng(6);
  auto policy = weighted_random_policy(cfg.ruleset);
  Observation obs = env.reset(rng);
  while (!env.done()) {
    expect_observation_matches(env, obs);
    obs = env.step(policy(obs, rng).action).obs;
  }
  expect_observation_matches(env, obs);
}

TEST(StabilityProperties, MatchesBellmanFord) {
  Rng rng = derive_rng(5);
  auto floor = shared_builtin("mostly-floor");
  auto blocks = shared_builtin("blocks3d");
  for (int trial = 0; trial < 300; ++trial) {
    const bool cube = trial % 3 == 0;
    auto rs = cube ? blocks : floor;
    std::vector<int> dims{1 + static_cast<int>(uniform_below(rng, 6)), 1 + static_cast<int>(uniform_below(rng, 6))};
    if (cube) dims.push_back(1 + static_cast<int>(uniform_below(rng, 4)));
    Lattice lat(dims);
    const double fill = uniform01(rng);
    std::vector<int> cells(lat.cell_count(), -1);
    for (auto& c : cells)
      if (uniform01(rng) < fill) c = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(rs->tile_count())));
    Canvas canvas = Canvas::restore(rs, dims, cells);
    Stability s = stability_proxy(canvas);
    EXPECT_EQ(s.max_displacement, oracle::displacement_bellman_ford(canvas)) << trial;
    EXPECT_DOUBLE_EQ(s.score, 1.0 / (1.0 + s.max_displacement));
    EXPECT_GT(s.score, 0.0);
    EXPECT_LE(s.score, 1.0);
  }
}

TEST(StabilityProperties, IndependentOfPlacementOrder) {
  auto floor = shared_builtin("mostly-floor");
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng = derive_rng(seed);
    Canvas first = init_canvas({6, 6}, floor, SeedSpec::center(), rng);
    while (status(first) == Status::InProgress) {
      Coord c = select_node(first, rng);
      place(first, c, sample_weighted(*floor, valid_tiles(first, c), rng));
    }
    // Replay the same cells in a different frontier order. Every pair is
    // compatible in this tileset, so any frontier order is legal.
    const Lattice& lat = first.lattice();
    Canvas second = init_canvas({6, 6}, floor, SeedSpec::at(lat.center(), *first.tile_at(lat.center())), rng);
    std::set<Coord> todo;
    for (std::size_t i = 0; i < lat.cell_count(); ++i)
      if (first.cells()[i] >= 0 && lat.coord(i) != lat.center()) todo.insert(lat.coord(i));
    while (!todo.empty()) {
      std::vector<Coord> ready;
      for (const Coord& c : todo)
        if (second.in_frontier(c)) ready.push_back(c);
      ASSERT_FALSE(ready.empty());
      Coord pick = ready[uniform_below(rng, ready.size())];
      place(second, pick, *first.tile_at(pick));
      todo.erase(pick);
    }
    EXPECT_EQ(first.cells(), second.cells());
    EXPECT_EQ(stability_proxy(first).max_displacement, stability_proxy(second).max_displacement);
  }
}

TEST(StabilityProperties, GroundedSupportNeverHurts) {
  Rng rng = derive_rng(17);
  auto floor = shared_builtin("mostly-floor");
  const TileId v = *floor->void_tile();
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<int> dims{2 + static_cast<int>(uniform_below(rng, 5)), 2 + static_cast<int>(uniform_below(rng, 5))};
    Lattice lat(dims);
    std::vector<int> cells(lat.cell_count(), -1);
    for (auto& c : cells) {
      double u = uniform01(rng);
      c = u < 0.35 ? 0 : (u < 0.45 ? v : -1);
    }
    // Find a solid tile with a gap directly below and fill the gap down to
    // the first solid tile or the ground row with a column of blocks.
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < lat.cell_count(); ++i) {
      Coord c = lat.coord(i);
      if (c[1] > 0 && cells[i] == 0 && cells[lat.index({c[0], c[1] - 1, 0})] < 0) candidates.push_back(i);
    }
    if (candidates.empty()) continue;
    Coord top = lat.coord(candidates[uniform_below(rng, candidates.size())]);
    const double before = stability_proxy(Canvas::restore(floor, dims, cells)).max_displacement;
    for (int y = top[1] - 1; y >= 0; --y) {
      int& cell = cells[lat.index({top[0], y, 0})];
      if (cell == 0) break;
      cell = 0;
    }
    const double after = stability_proxy(Canvas::restore(floor, dims, cells)).max_displacement;
    EXPECT_LE(after, before) << trial;
  }
}
