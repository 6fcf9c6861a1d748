#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "latticeforge/environment.hpp"
#include "latticeforge/error.hpp"
#include "latticeforge/policy.hpp"
#include "latticeforge/random.hpp"

namespace latticeforge {

struct TrainConfig {
  double gamma = 0.99;
  double lam = 0.95;
  double clip_eps = 0.2;
  int epochs_per_update = 4;
  int minibatch_size = 64;
  int steps_per_update = 1024;
  std::int64_t total_steps = 100000;
  double learning_rate = 3e-4;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  int n_envs = 1;
  std::uint64_t master_seed = 0;
  int hidden = 64;
  /// Write ckpt_<update>.json every this many updates (0 disables); a final
  /// checkpoint is always written when an output directory is set.
  int checkpoint_every = 10;

  void validate() const {
    auto fail = [](const char* what) { throw Error(ErrorCode::BadConfig, what); };
    if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must lie in (0, 1]");
    if (!(lam >= 0.0 && lam <= 1.0)) fail("lam must lie in [0, 1]");
    if (!(clip_eps > 0.0)) fail("clip_eps must be positive");
    if (epochs_per_update < 1) fail("epochs_per_update must be positive");
    if (minibatch_size < 1) fail("minibatch_size must be positive");
    if (steps_per_update < 1) fail("steps_per_update must be positive");
    if (minibatch_size > steps_per_update) fail("minibatch_size must not exceed steps_per_update");
    if (total_steps < 1) fail("total_steps must be positive");
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (!(entropy_coef >= 0.0) || !(value_coef >= 0.0)) fail("loss coefficients must be non-negative");
    if (n_envs < 1) fail("n_envs must be positive");
    if (hidden < 1) fail("hidden must be positive");
    if (checkpoint_every < 0) fail("checkpoint_every must be non-negative");
  }

  LossSpec loss() const { return {clip_eps, value_coef, entropy_coef}; }
};

// ---------------------------------------------------------------------------
// Advantage estimation

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t
/// A_t     = delta_t + gamma * lam * (1 - done_t) * A_{t+1}
/// `last_value` stands in for V_T after the final step.
inline GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                             std::span<const std::uint8_t> dones, double gamma, double lam, double last_value = 0.0) {
  if (rewards.size() != values.size() || rewards.size() != dones.size())
    throw Error(ErrorCode::LengthMismatch, "rewards, values and dones must have equal length");
  const std::size_t n = rewards.size();
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  double next_value = last_value;
  for (std::size_t t = n; t-- > 0;) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_value * live - values[t];
    next_adv = delta + gamma * lam * live * next_adv;
    out.advantages[t] = next_adv;
    out.returns[t] = next_adv + values[t];
    next_value = values[t];
  }
  return out;
}

/// Shift to zero mean and, unless the spread is negligible, scale to unit variance.
inline void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  var /= n;
  const double scale = var > 1e-16 ? 1.0 / std::sqrt(var) : 1.0;
  for (double& a : adv) a = (a - mean) * scale;
}

// ---------------------------------------------------------------------------
// Rollout collection

struct EpisodeSummary {
  double reward = 0.0;
  double coverage = 0.0;
  Status status = Status::InProgress;
  std::size_t length = 0;
};

struct RolloutBuffer {
  std::vector<Transition> transitions;
  std::vector<EpisodeSummary> episodes;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return transitions.size(); }
};

/// Samples from the network and records value and log-probability at collection time.
inline PolicyFn network_policy(const PolicyParams& params, bool greedy = false) {
  return [&params, greedy](const Observation& obs, Rng& rng) {
    MaskedDistribution dist = policy_forward(params, obs.features, obs.mask);
    SampledAction s = greedy ? greedy_action(dist) : sample_action(dist, rng);
    return ActionChoice{s.action, s.logprob, value_forward(params, obs.features)};
  };
}

/// Whole episodes only. Each round runs one episode per environment (in
/// parallel when there are several); episodes are appended in environment
/// order until `steps` transitions are held, and the rest of that round is
/// discarded so the result does not depend on scheduling.
inline RolloutBuffer collect_rollouts(std::vector<Environment>& envs, const PolicyParams& params, std::size_t steps,
                                      std::span<Rng> rngs) {
  if (envs.empty() || rngs.size() != envs.size())
    throw Error(ErrorCode::BadConfig, "need one rng stream per environment");
  RolloutBuffer buffer;
  const PolicyFn policy = network_policy(params);
  std::vector<Trajectory> round(envs.size());
  while (buffer.size() < steps) {
    if (envs.size() == 1) {
      round[0] = rollout(envs[0], policy, rngs[0]);
    } else {
      std::vector<std::thread> workers;
      workers.reserve(envs.size());
      for (std::size_t e = 0; e < envs.size(); ++e)
        workers.emplace_back([&, e] { round[e] = rollout(envs[e], policy, rngs[e]); });
      for (auto& w : workers) w.join();
    }
    std::size_t empty_episodes = 0;
    for (auto& traj : round) {
      if (buffer.size() >= steps) break;
      if (traj.steps.empty()) {
        ++empty_episodes;
        continue;
      }
      buffer.episodes.push_back({traj.terminal_reward, traj.final_coverage, traj.final_status, traj.steps.size()});
      for (auto& t : traj.steps) buffer.transitions.push_back(std::move(t));
    }
    if (empty_episodes == round.size())
      throw Error(ErrorCode::BadConfig, "every episode ends at reset; nothing to learn from");
  }
  return buffer;
}

inline void compute_advantages(RolloutBuffer& buffer, double gamma, double lam) {
  std::vector<double> rewards, values;
  std::vector<std::uint8_t> dones;
  rewards.reserve(buffer.size());
  values.reserve(buffer.size());
  dones.reserve(buffer.size());
  for (const auto& t : buffer.transitions) {
    rewards.push_back(t.reward);
    values.push_back(t.value);
    // Truncated episodes were scored at the cut, so they end like terminal ones.
    dones.push_back(t.done ? 1 : 0);
  }
  GaeResult gae = compute_gae(rewards, values, dones, gamma, lam, 0.0);
  buffer.advantages = std::move(gae.advantages);
  buffer.returns = std::move(gae.returns);
  normalize_advantages(buffer.advantages);
}

// ---------------------------------------------------------------------------
// Optimisation

/// Adam with bias correction and fixed step size.
struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  PolicyParams m;
  PolicyParams v;
  std::uint64_t t = 0;

  static AdamState for_params(const PolicyParams& p) { return {zeros_like(p), zeros_like(p), 0}; }

  void step(PolicyParams& params, PolicyParams& grad, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
    auto pb = parameter_blocks(params);
    auto gb = parameter_blocks(grad);
    auto mb = parameter_blocks(m);
    auto vb = parameter_blocks(v);
    for (std::size_t b = 0; b < pb.size(); ++b)
      for (std::size_t i = 0; i < pb[b].size(); ++i) {
        const double g = gb[b][i];
        mb[b][i] = kBeta1 * mb[b][i] + (1.0 - kBeta1) * g;
        vb[b][i] = kBeta2 * vb[b][i] + (1.0 - kBeta2) * g * g;
        pb[b][i] -= lr * (mb[b][i] / c1) / (std::sqrt(vb[b][i] / c2) + kEpsilon);
      }
  }
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  /// Stats of the very first minibatch, taken before any parameter change.
  LossStats first_minibatch;
};

inline std::vector<Sample> make_samples(const RolloutBuffer& buffer) {
  std::vector<Sample> samples;
  samples.reserve(buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const Transition& t = buffer.transitions[i];
    samples.push_back({t.obs.features, t.obs.mask, t.action, t.logprob, buffer.advantages[i], buffer.returns[i]});
  }
  return samples;
}

/// epochs_per_update shuffled passes of minibatch Adam steps. Reported stats
/// are averages over every minibatch, measured before that minibatch's step.
inline UpdateStats ppo_update(PolicyParams& params, const RolloutBuffer& buffer, const TrainConfig& cfg,
                              AdamState& adam, Rng& rng) {
  if (buffer.advantages.size() != buffer.size() || buffer.returns.size() != buffer.size())
    throw Error(ErrorCode::LengthMismatch, "buffer has no advantages; run compute_advantages first");
  const std::vector<Sample> samples = make_samples(buffer);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Sample> mb;
  UpdateStats stats;
  std::size_t batches = 0;
  const LossSpec spec = cfg.loss();
  const std::size_t mb_size = static_cast<std::size_t>(cfg.minibatch_size);
  for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
    // Fisher-Yates with the library's own uniform draw keeps shuffles portable.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_below(rng, i)]);
    for (std::size_t start = 0; start < order.size(); start += mb_size) {
      const std::size_t end = std::min(order.size(), start + mb_size);
      mb.clear();
      for (std::size_t k = start; k < end; ++k) mb.push_back(samples[order[k]]);
      PolicyParams grad = zeros_like(params);
      LossStats ls = ppo_loss(params, mb, spec, &grad);
      if (batches == 0) stats.first_minibatch = ls;
      stats.policy_loss += ls.policy_loss;
      stats.value_loss += ls.value_loss;
      stats.entropy += ls.entropy;
      stats.approx_kl += ls.approx_kl;
      stats.clip_fraction += ls.clip_fraction;
      ++batches;
      adam.step(params, grad, cfg.learning_rate);
    }
  }
  if (batches) {
    const double inv = 1.0 / static_cast<double>(batches);
    stats.policy_loss *= inv;
    stats.value_loss *= inv;
    stats.entropy *= inv;
    stats.approx_kl *= inv;
    stats.clip_fraction *= inv;
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalStats {
  double mean_reward = 0.0;
  double std_reward = 0.0;
  double mean_coverage = 0.0;
  double invalid_rate = 0.0;
  int episodes = 0;
};

inline EvalStats evaluate(Environment& env, const PolicyFn& policy, int n_episodes, Rng& rng) {
  if (n_episodes < 1) throw Error(ErrorCode::BadEpisodeCount, "need at least one episode");
  std::vector<double> rewards;
  EvalStats s;
  s.episodes = n_episodes;
  for (int e = 0; e < n_episodes; ++e) {
    Trajectory traj = rollout(env, policy, rng);
    rewards.push_back(traj.terminal_reward);
    s.mean_coverage += traj.final_coverage;
    if (traj.final_status == Status::Invalid) s.invalid_rate += 1.0;
  }
  const double n = static_cast<double>(n_episodes);
  s.mean_reward = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  for (double r : rewards) s.std_reward += (r - s.mean_reward) * (r - s.mean_reward);
  s.std_reward = std::sqrt(s.std_reward / n);
  s.mean_coverage /= n;
  s.invalid_rate /= n;
  return s;
}

inline EvalStats evaluate_policy(const PolicyParams& params, Environment& env, int n_episodes, Rng& rng,
                                 bool greedy = false) {
  return evaluate(env, network_policy(params, greedy), n_episodes, rng);
}

// ---------------------------------------------------------------------------
// Training loop

struct MetricsRow {
  int update = 0;
  std::int64_t steps = 0;
  double mean_reward = 0.0;
  double mean_coverage = 0.0;
  double invalid_rate = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "update,steps,mean_reward,mean_coverage,invalid_rate,policy_loss,value_loss,entropy,approx_kl,clip_fraction";

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_metrics_row(const MetricsRow& r) {
  std::string out = std::to_string(r.update) + ',' + std::to_string(r.steps);
  for (double v : {r.mean_reward, r.mean_coverage, r.invalid_rate, r.policy_loss, r.value_loss, r.entropy, r.approx_kl,
                   r.clip_fraction})
    out += ',' + format_real(v);
  return out;
}

inline std::string optimizer_preamble(const TrainConfig& cfg) {
  return "# optimizer=adam beta1=" + format_real(AdamState::kBeta1) + " beta2=" + format_real(AdamState::kBeta2) +
         " epsilon=" + format_real(AdamState::kEpsilon) + " learning_rate=" + format_real(cfg.learning_rate);
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"gamma", c.gamma},
          {"lam", c.lam},
          {"clip_eps", c.clip_eps},
          {"epochs_per_update", c.epochs_per_update},
          {"minibatch_size", c.minibatch_size},
          {"steps_per_update", c.steps_per_update},
          {"total_steps", c.total_steps},
          {"learning_rate", c.learning_rate},
          {"entropy_coef", c.entropy_coef},
          {"value_coef", c.value_coef},
          {"n_envs", c.n_envs},
          {"master_seed", c.master_seed},
          {"hidden", c.hidden},
          {"checkpoint_every", c.checkpoint_every}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig c = {}) {
  if (!doc.is_object()) throw Error(ErrorCode::BadConfig, "train config must be an object");
  try {
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      const std::string& k = it.key();
      const auto& v = it.value();
      if (k == "gamma") c.gamma = v.get<double>();
      else if (k == "lam") c.lam = v.get<double>();
      else if (k == "clip_eps") c.clip_eps = v.get<double>();
      else if (k == "epochs_per_update") c.epochs_per_update = v.get<int>();
      else if (k == "minibatch_size") c.minibatch_size = v.get<int>();
      else if (k == "steps_per_update") c.steps_per_update = v.get<int>();
      else if (k == "total_steps") c.total_steps = v.get<std::int64_t>();
      else if (k == "learning_rate") c.learning_rate = v.get<double>();
      else if (k == "entropy_coef") c.entropy_coef = v.get<double>();
      else if (k == "value_coef") c.value_coef = v.get<double>();
      else if (k == "n_envs") c.n_envs = v.get<int>();
      else if (k == "master_seed") c.master_seed = v.get<std::uint64_t>();
      else if (k == "hidden") c.hidden = v.get<int>();
      else if (k == "checkpoint_every") c.checkpoint_every = v.get<int>();
      else throw Error(ErrorCode::BadConfig, "unknown train config field '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("train config: ") + e.what());
  }
  return c;
}

/// Full training state after `update` updates have completed.
struct TrainState {
  PolicyParams params;
  AdamState adam;
  int update = 0;
  std::int64_t steps = 0;
};

inline nlohmann::json checkpoint_to_json(const TrainState& s, const TrainConfig& cfg,
                                         const nlohmann::json& environment = nullptr) {
  nlohmann::json doc = params_to_json(s.params, static_cast<std::uint64_t>(s.steps));
  doc["trainer"] = {{"update", s.update},
                    {"adam_t", s.adam.t},
                    {"adam_m", params_to_json(s.adam.m)},
                    {"adam_v", params_to_json(s.adam.v)},
                    {"config", train_config_to_json(cfg)}};
  if (!environment.is_null()) doc["environment"] = environment;
  return doc;
}

inline TrainState train_state_from_json(const nlohmann::json& doc) {
  TrainState s;
  std::uint64_t steps = 0;
  s.params = params_from_json(doc, &steps);
  s.steps = static_cast<std::int64_t>(steps);
  if (!doc.contains("trainer")) {
    s.adam = AdamState::for_params(s.params);
    return s;
  }
  try {
    const auto& t = doc.at("trainer");
    s.update = t.at("update").get<int>();
    s.adam.t = t.at("adam_t").get<std::uint64_t>();
    s.adam.m = params_from_json(t.at("adam_m"));
    s.adam.v = params_from_json(t.at("adam_v"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedDocument, std::string("checkpoint trainer state: ") + e.what());
  }
  return s;
}

struct TrainOptions {
  /// Directory for metrics.csv and checkpoints; empty keeps everything in memory.
  std::filesystem::path out_dir;
  /// Checkpoint to continue from.
  std::optional<TrainState> resume;
  /// Stored in checkpoints so evaluation can rebuild the environment.
  nlohmann::json environment_doc = nullptr;
  /// Called after each update with the row just produced.
  std::function<void(const MetricsRow&)> on_update;
};

struct TrainResult {
  TrainState state;
  std::vector<MetricsRow> metrics;
};

inline int update_count(const TrainConfig& cfg) {
  return static_cast<int>((cfg.total_steps + cfg.steps_per_update - 1) / cfg.steps_per_update);
}

/// Every update draws its randomness from streams derived from
/// (master_seed, update, env index), so a resumed run replays exactly.
inline TrainResult train(const TrainConfig& cfg, const EnvConfig& env_cfg, const TrainOptions& opts = {}) {
  cfg.validate();
  std::vector<Environment> envs;
  for (int e = 0; e < cfg.n_envs; ++e) envs.emplace_back(env_cfg);
  const auto obs_dim = static_cast<int>(envs.front().obs_dim());
  const int n_actions = envs.front().n_actions();

  TrainResult result;
  TrainState& s = result.state;
  if (opts.resume) {
    s = *opts.resume;
    if (s.params.obs_dim != obs_dim || s.params.n_actions != n_actions)
      throw Error(ErrorCode::DimensionMismatch, "checkpoint architecture does not match the environment");
  } else {
    s.params = init_params(obs_dim, n_actions, cfg.hidden, cfg.master_seed);
    s.adam = AdamState::for_params(s.params);
  }

  std::ofstream metrics_file;
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    const auto path = opts.out_dir / "metrics.csv";
    if (opts.resume && std::filesystem::exists(path)) {
      metrics_file.open(path, std::ios::app);
    } else {
      metrics_file.open(path);
      metrics_file << optimizer_preamble(cfg) << '\n' << kMetricsHeader << '\n';
    }
    if (!metrics_file) throw Error(ErrorCode::BadConfig, "cannot write " + path.string());
  }
  auto write_checkpoint = [&](const std::string& name) {
    if (opts.out_dir.empty()) return;
    std::ofstream f(opts.out_dir / name);
    f << checkpoint_to_json(s, cfg, opts.environment_doc).dump() << '\n';
  };

  const int total_updates = update_count(cfg);
  while (s.update < total_updates) {
    const int u = s.update;
    std::vector<Rng> rngs;
    for (int e = 0; e < cfg.n_envs; ++e)
      rngs.push_back(derive_rng(cfg.master_seed, static_cast<std::uint64_t>(u) + 1, static_cast<std::uint64_t>(e)));
    RolloutBuffer buffer =
        collect_rollouts(envs, s.params, static_cast<std::size_t>(cfg.steps_per_update), rngs);
    compute_advantages(buffer, cfg.gamma, cfg.lam);
    Rng shuffle = derive_rng(cfg.master_seed, static_cast<std::uint64_t>(u) + 1, 0xffffffffULL);
    UpdateStats us = ppo_update(s.params, buffer, cfg, s.adam, shuffle);

    MetricsRow row;
    row.update = u;
    s.steps += static_cast<std::int64_t>(buffer.size());
    row.steps = s.steps;
    for (const auto& ep : buffer.episodes) {
      row.mean_reward += ep.reward;
      row.mean_coverage += ep.coverage;
      if (ep.status == Status::Invalid) row.invalid_rate += 1.0;
    }
    const double n_ep = static_cast<double>(buffer.episodes.size());
    row.mean_reward /= n_ep;
    row.mean_coverage /= n_ep;
    row.invalid_rate /= n_ep;
    row.policy_loss = us.policy_loss;
    row.value_loss = us.value_loss;
    row.entropy = us.entropy;
    row.approx_kl = us.approx_kl;
    row.clip_fraction = us.clip_fraction;
    result.metrics.push_back(row);
    s.update = u + 1;

    if (metrics_file.is_open()) metrics_file << format_metrics_row(row) << '\n' << std::flush;
    if (opts.on_update) opts.on_update(row);
    if (cfg.checkpoint_every > 0 && s.update % cfg.checkpoint_every == 0)
      write_checkpoint("ckpt_" + std::to_string(s.update) + ".json");
  }
  write_checkpoint("ckpt_final.json");
  return result;
}

}  // namespace latticeforge
