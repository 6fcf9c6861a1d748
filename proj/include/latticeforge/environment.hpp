#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "latticeforge/error.hpp"
#include "latticeforge/lattice.hpp"
#include "latticeforge/random.hpp"
#include "latticeforge/solver.hpp"
#include "latticeforge/tileset.hpp"

namespace latticeforge {

// ---------------------------------------------------------------------------
// Terminal objectives

/// Fraction of the canvas decided with non-void tiles.
inline double coverage(const Canvas& canvas) {
  std::size_t solid = 0;
  for (TileId t : canvas.cells())
    if (t >= 0 && !canvas.ruleset().is_void(t)) ++solid;
  return static_cast<double>(solid) / static_cast<double>(canvas.cell_count());
}

struct Stability {
  double max_displacement = 0.0;
  double score = 1.0;
};

/// Deterministic stand-in for a physics displacement measurement.
///
/// Solid tiles form a graph over orthogonal adjacency. Stepping onto the tile
/// directly below (-y) is free, every other step costs 1. A tile's
/// displacement is its cheapest path to any tile in the ground row y = 0, or
/// the horizontal extent of the canvas when no path exists.
inline Stability stability_proxy(const Canvas& canvas) {
  const Lattice& lat = canvas.lattice();
  const auto& cells = canvas.cells();
  const Ruleset& rs = canvas.ruleset();
  auto solid = [&](std::size_t i) { return cells[i] >= 0 && !rs.is_void(cells[i]); };

  double unreachable = lat.extent(0);
  if (lat.rank() == 3) unreachable = std::max(lat.extent(0), lat.extent(2));

  constexpr int kUnset = std::numeric_limits<int>::max();
  std::vector<int> dist(lat.cell_count(), kUnset);
  std::deque<std::size_t> queue;
  bool any = false;
  for (std::size_t i = 0; i < lat.cell_count(); ++i) {
    if (!solid(i)) continue;
    any = true;
    if (lat.coord(i)[1] == 0) {
      dist[i] = 0;
      queue.push_back(i);
    }
  }
  if (!any) return {0.0, 1.0};

  // 0-1 BFS on reversed edges, seeded from the ground row.
  const Direction up{1, +1};
  while (!queue.empty()) {
    std::size_t q = queue.front();
    queue.pop_front();
    for (int di = 0; di < direction_count(lat.rank()); ++di) {
      Direction d = Direction::from_index(di);
      auto p = lat.neighbor(q, d);
      if (!p || !solid(*p)) continue;
      int cost = (d == up) ? 0 : 1;  // p sits directly above q
      if (dist[q] + cost < dist[*p]) {
        dist[*p] = dist[q] + cost;
        if (cost == 0)
          queue.push_front(*p);
        else
          queue.push_back(*p);
      }
    }
  }

  double worst = 0.0;
  for (std::size_t i = 0; i < lat.cell_count(); ++i) {
    if (!solid(i)) continue;
    worst = std::max(worst, dist[i] == kUnset ? unreachable : static_cast<double>(dist[i]));
  }
  return {worst, 1.0 / (1.0 + worst)};
}

struct TileTarget {
  double fraction = 0.0;
  double weight = 0.0;
};

struct RewardSpec {
  double coverage_weight = 1.0;
  double stability_weight = 0.0;
  double invalid_penalty = 0.0;
  std::map<TileId, TileTarget> tile_target;

  void validate() const {
    auto bad = [](double w) { return !(w >= 0.0) || !std::isfinite(w); };
    if (bad(coverage_weight) || bad(stability_weight) || bad(invalid_penalty))
      throw Error(ErrorCode::BadConfig, "reward weights must be finite and non-negative");
    bool positive = coverage_weight > 0.0 || stability_weight > 0.0;
    for (const auto& [tile, target] : tile_target) {
      if (bad(target.weight)) throw Error(ErrorCode::BadConfig, "tile target weights must be non-negative");
      positive = positive || target.weight > 0.0;
    }
    if (!positive) throw Error(ErrorCode::BadConfig, "at least one reward weight must be positive");
  }
};

/// Weighted sum of the terminal objectives. Each targeted tile contributes
/// weight * (1 - |actual fraction - target fraction|).
inline double evaluate_terminal(const Canvas& canvas, const RewardSpec& spec, Status st) {
  double reward = spec.coverage_weight * coverage(canvas);
  if (spec.stability_weight != 0.0) reward += spec.stability_weight * stability_proxy(canvas).score;
  if (!spec.tile_target.empty()) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(canvas.ruleset().tile_count()), 0);
    for (TileId t : canvas.cells())
      if (t >= 0) ++counts[static_cast<std::size_t>(t)];
    const double total = static_cast<double>(canvas.cell_count());
    for (const auto& [tile, target] : spec.tile_target) {
      canvas.ruleset().tile(tile);
      double actual = static_cast<double>(counts[static_cast<std::size_t>(tile)]) / total;
      reward += target.weight * (1.0 - std::abs(actual - target.fraction));
    }
  }
  if (st == Status::Invalid) reward -= spec.invalid_penalty;
  return reward;
}

// ---------------------------------------------------------------------------
// Episodic wrapper

struct EnvConfig {
  std::shared_ptr<const Ruleset> ruleset;
  std::vector<int> dims;
  Consistency mode = Consistency::Local;
  int radius = 2;
  /// 0 means "one step per cell".
  int max_steps = 0;
  RewardSpec reward;
  SeedSpec seed = SeedSpec::center();
  std::uint64_t master_seed = 0;
};

/// Window one-hot block, then [fill fraction, frontier / cells, step / max_steps].
struct Observation {
  std::vector<double> features;
  std::vector<std::uint8_t> mask;
};

struct StepInfo {
  Status status = Status::InProgress;
  double coverage = 0.0;
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  bool truncated = false;
  StepInfo info;
};

struct Transition {
  Observation obs;
  TileId action = 0;
  double logprob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
  bool truncated = false;
};

struct Trajectory {
  std::vector<Transition> steps;
  Status final_status = Status::InProgress;
  double final_coverage = 0.0;
  /// Reward of the terminal evaluation; also set when the episode ended at reset.
  double terminal_reward = 0.0;
  bool truncated = false;
};

struct ActionChoice {
  TileId action = 0;
  double logprob = 0.0;
  double value = 0.0;
};

/// Anything that picks a mask-valid tile for an observation.
using PolicyFn = std::function<ActionChoice(const Observation&, Rng&)>;

class Environment {
 public:
  explicit Environment(EnvConfig cfg) : cfg_(std::move(cfg)) {
    if (!cfg_.ruleset) throw Error(ErrorCode::BadConfig, "environment needs a ruleset");
    Lattice lat(cfg_.dims);
    if (lat.rank() != cfg_.ruleset->rank()) throw Error(ErrorCode::BadDims, "dims rank does not match tileset rank");
    if (cfg_.radius < 0) throw Error(ErrorCode::BadConfig, "window radius must be non-negative");
    if (cfg_.max_steps < 0) throw Error(ErrorCode::BadConfig, "max_steps must be non-negative");
    if (cfg_.max_steps == 0) cfg_.max_steps = static_cast<int>(lat.cell_count());
    cfg_.reward.validate();
    window_side_ = 2 * cfg_.radius + 1;
    window_cells_ = 1;
    for (int a = 0; a < lat.rank(); ++a) window_cells_ *= static_cast<std::size_t>(window_side_);
  }

  const EnvConfig& config() const { return cfg_; }
  int n_actions() const { return cfg_.ruleset->tile_count(); }
  std::size_t obs_dim() const { return window_cells_ * static_cast<std::size_t>(n_actions() + 2) + 3; }

  Observation reset(Rng& rng) {
    episode_rng_ = Rng(rng());
    canvas_.emplace(init_canvas(cfg_.dims, cfg_.ruleset, cfg_.seed, episode_rng_, cfg_.mode));
    steps_ = 0;
    reward_ = 0.0;
    truncated_ = false;
    status_ = latticeforge::status(*canvas_);
    done_ = status_ != Status::InProgress;
    node_ = canvas_->lattice().index(cfg_.seed.kind == SeedSpec::Kind::Center ? canvas_->lattice().center()
                                                                                 : cfg_.seed.cell);
    if (done_) {
      reward_ = evaluate_terminal(*canvas_, cfg_.reward, status_);
    } else {
      node_ = canvas_->lattice().index(select_node(*canvas_, episode_rng_));
    }
    return observe();
  }

  StepResult step(TileId action) {
    if (!canvas_ || done_) throw Error(ErrorCode::EpisodeFinished, "episode is over; call reset");
    const Coord node = canvas_->lattice().coord(node_);
    if (!cfg_.ruleset->valid_id(action) || !(canvas_->domain(node) & tile_bit(action)))
      throw Error(ErrorCode::IllegalAction, "action " + std::to_string(action) + " is masked out");
    place(*canvas_, node, action);
    ++steps_;
    status_ = latticeforge::status(*canvas_);
    StepResult out;
    if (status_ != Status::InProgress || steps_ >= cfg_.max_steps) {
      done_ = true;
      truncated_ = status_ == Status::InProgress;
      reward_ = evaluate_terminal(*canvas_, cfg_.reward, status_);
      out.reward = reward_;
    } else {
      node_ = canvas_->lattice().index(select_node(*canvas_, episode_rng_));
    }
    out.done = done_;
    out.truncated = truncated_;
    out.info = {status_, coverage(*canvas_)};
    out.obs = observe();
    return out;
  }

  bool done() const { return done_; }
  bool truncated() const { return truncated_; }
  Status current_status() const { return status_; }
  int steps() const { return steps_; }
  /// Reward of the terminal evaluation once the episode is done, else 0.
  double terminal_reward() const { return done_ ? reward_ : 0.0; }
  const Canvas& canvas() const {
    if (!canvas_) throw Error(ErrorCode::EpisodeFinished, "no episode has been started");
    return *canvas_;
  }
  /// The node the next action will be placed at.
  Coord selected_node() const { return canvas().lattice().coord(node_); }

 private:
  Observation observe() const {
    const Canvas& canvas = *canvas_;
    const Lattice& lat = canvas.lattice();
    const std::size_t channels = static_cast<std::size_t>(n_actions() + 2);
    const std::size_t empty_ch = static_cast<std::size_t>(n_actions());
    const std::size_t outside_ch = empty_ch + 1;
    Observation obs;
    obs.features.assign(obs_dim(), 0.0);
    const Coord center = lat.coord(node_);
    const int r = cfg_.radius;
    const int z_span = lat.rank() == 3 ? r : 0;
    std::size_t w = 0;
    for (int dz = -z_span; dz <= z_span; ++dz)
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx, ++w) {
          Coord c{center[0] + dx, center[1] + dy, center[2] + dz};
          std::size_t ch;
          if (!lat.contains(c)) {
            ch = outside_ch;
          } else {
            TileId t = canvas.cells()[lat.index(c)];
            ch = t >= 0 ? static_cast<std::size_t>(t) : empty_ch;
          }
          obs.features[w * channels + ch] = 1.0;
        }
    const std::size_t g = window_cells_ * channels;
    const double cells = static_cast<double>(canvas.cell_count());
    obs.features[g] = static_cast<double>(canvas.decided_count()) / cells;
    obs.features[g + 1] = static_cast<double>(canvas.frontier_size()) / cells;
    obs.features[g + 2] = static_cast<double>(steps_) / static_cast<double>(cfg_.max_steps);

    obs.mask.assign(static_cast<std::size_t>(n_actions()), 0);
    if (!done_) {
      for_each_tile(canvas.domain(center), [&](TileId t) { obs.mask[static_cast<std::size_t>(t)] = 1; });
    }
    return obs;
  }

  EnvConfig cfg_;
  int window_side_ = 5;
  std::size_t window_cells_ = 25;
  std::optional<Canvas> canvas_;
  Rng episode_rng_;
  std::size_t node_ = 0;
  int steps_ = 0;
  bool done_ = true;
  bool truncated_ = false;
  Status status_ = Status::InProgress;
  double reward_ = 0.0;
};

/// Resets, then steps with `policy` until the episode is done.
inline Trajectory rollout(Environment& env, const PolicyFn& policy, Rng& rng) {
  Trajectory traj;
  Observation obs = env.reset(rng);
  while (!env.done()) {
    ActionChoice choice = policy(obs, rng);
    StepResult res = env.step(choice.action);
    traj.steps.push_back({std::move(obs), choice.action, choice.logprob, choice.value, res.reward, res.done,
                          res.truncated});
    obs = std::move(res.obs);
  }
  traj.final_status = env.current_status();
  traj.final_coverage = coverage(env.canvas());
  traj.terminal_reward = env.terminal_reward();
  traj.truncated = env.truncated();
  return traj;
}

/// Baseline: mask-valid tiles drawn in proportion to their authoring weights.
inline PolicyFn weighted_random_policy(std::shared_ptr<const Ruleset> rs) {
  return [rs = std::move(rs)](const Observation& obs, Rng& rng) {
    TileMask mask = 0;
    for (std::size_t a = 0; a < obs.mask.size(); ++a)
      if (obs.mask[a]) mask |= tile_bit(static_cast<TileId>(a));
    if (mask == 0) throw Error(ErrorCode::EmptyMask, "no valid action");
    TileId a = sample_weighted(*rs, mask, rng);
    double total = 0.0;
    for_each_tile(mask, [&](TileId t) { total += rs->tile(t).weight; });
    return ActionChoice{a, std::log(rs->tile(a).weight / total), 0.0};
  };
}

}  // namespace latticeforge
