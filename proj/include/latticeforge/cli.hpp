#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "latticeforge/assembly.hpp"
#include "latticeforge/config.hpp"
#include "latticeforge/environment.hpp"
#include "latticeforge/error.hpp"
#include "latticeforge/policy.hpp"
#include "latticeforge/solver.hpp"
#include "latticeforge/tileset.hpp"
#include "latticeforge/trainer.hpp"

namespace latticeforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

/// LATTICEFORGE_LOG = error | info | debug; anything else means info.
inline LogLevel log_level_from_env() {
  const char* v = std::getenv("LATTICEFORGE_LOG");
  if (!v) return LogLevel::Info;
  std::string s(v);
  if (s == "error") return LogLevel::Error;
  if (s == "debug") return LogLevel::Debug;
  return LogLevel::Info;
}

/// A malformed flag value; maps to the usage exit code.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Context {
  std::ostream& out;
  std::ostream& err;
  LogLevel level;

  void info(const std::string& msg) const {
    if (level >= LogLevel::Info) err << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (level >= LogLevel::Debug) err << "[debug] " << msg << '\n';
  }
};

template <typename Fn>
auto usage_guard(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

inline void write_text(const std::string& path, const std::string& text) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorCode::BadConfig, "cannot write " + path);
  f << text;
}

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

/// A checkpoint path given with or without its .json suffix.
inline std::string resolve_checkpoint(const std::string& path) {
  if (std::filesystem::exists(path)) return path;
  if (std::filesystem::exists(path + ".json")) return path + ".json";
  throw Error(ErrorCode::MalformedDocument, "no checkpoint at '" + path + "'");
}

struct EnvFlags {
  std::string tileset;
  std::string dims;
  std::string consistency;
  std::optional<std::uint64_t> seed;
  std::optional<int> radius;
  std::optional<int> max_steps;
};

inline void add_env_flags(CLI::App* cmd, EnvFlags& f) {
  cmd->add_option("--tileset", f.tileset, "Tileset document path or built-in name");
  cmd->add_option("--dims", f.dims, "Canvas extents, WxH or WxHxD");
  cmd->add_option("--consistency", f.consistency, "local or propagate");
  cmd->add_option("--seed", f.seed, "Master seed (u64)");
  cmd->add_option("--radius", f.radius, "Observation window radius");
  cmd->add_option("--max-steps", f.max_steps, "Episode step limit (0 = one per cell)");
}

/// Starts from `base` (a parsed environment document, possibly null) and
/// applies whatever flags were given.
inline EnvConfig build_env(const EnvFlags& f, const nlohmann::json& base) {
  nlohmann::json doc = base.is_object() ? base : nlohmann::json::object();
  if (!f.tileset.empty()) doc["tileset"] = f.tileset;
  if (!f.dims.empty()) doc["dims"] = usage_guard([&] { return parse_dims(f.dims); });
  if (!f.consistency.empty()) {
    usage_guard([&] { return parse_consistency(f.consistency); });
    doc["consistency"] = f.consistency;
  }
  if (f.seed) doc["master_seed"] = *f.seed;
  if (f.radius) doc["radius"] = *f.radius;
  if (f.max_steps) doc["max_steps"] = *f.max_steps;
  if (!doc.contains("tileset")) throw UsageError("--tileset is required");
  if (!doc.contains("dims")) throw UsageError("--dims is required");
  return env_config_from_json(doc);
}

inline int cmd_validate(const Context& ctx, const std::string& tileset) {
  Ruleset rs;
  try {
    rs = resolve_tileset(tileset);
  } catch (const Error& e) {
    ctx.out << "1 errors, 0 warnings\n";
    ctx.err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  auto diags = validate_ruleset(rs);
  for (const auto& d : diags) ctx.out << "warning: " << d.message(rs) << '\n';
  ctx.out << "0 errors, " << diags.size() << " warnings\n";
  return kExitOk;
}

inline int cmd_extract(const Context& ctx, const std::string& sample_path, const std::string& out_path) {
  nlohmann::json doc = parse_json(read_file(sample_path), "sample");
  Grid grid;
  std::map<int, std::string> names;
  try {
    grid.dims = doc.at("dims").get<std::vector<int>>();
    grid.cells = doc.at("cells").get<std::vector<int>>();
    if (doc.contains("names"))
      for (auto it = doc.at("names").begin(); it != doc.at("names").end(); ++it)
        names[std::stoi(it.key())] = it.value().get<std::string>();
  } catch (const std::exception& e) {
    throw Error(ErrorCode::MalformedDocument, std::string("sample: ") + e.what());
  }
  Ruleset rs = extract_rules(grid, names);
  const std::string text = serialize_tileset(rs) + "\n";
  if (out_path.empty())
    ctx.out << text;
  else
    write_text(out_path, text);
  auto diags = validate_ruleset(rs);
  ctx.info("extracted " + std::to_string(rs.tile_count()) + " tiles, " + std::to_string(diags.size()) + " warnings");
  for (const auto& d : diags) ctx.debug(d.message(rs));
  return kExitOk;
}

inline PolicyFn make_policy(const std::string& spec, const std::shared_ptr<const Ruleset>& rs,
                            std::shared_ptr<PolicyParams>& holder, bool greedy) {
  if (spec.empty() || spec == "random") return weighted_random_policy(rs);
  nlohmann::json doc = parse_json(read_file(resolve_checkpoint(spec)), "checkpoint");
  holder = std::make_shared<PolicyParams>(params_from_json(doc));
  return network_policy(*holder, greedy);
}

inline int cmd_rollout(const Context& ctx, const EnvFlags& flags, const std::string& config_path,
                       const std::string& policy_spec, const std::string& out_path, int attempts, bool greedy) {
  nlohmann::json base = nullptr;
  if (!config_path.empty()) {
    nlohmann::json cfg = parse_json(read_file(config_path), "config");
    base = cfg.contains("environment") ? cfg.at("environment") : cfg;
  }
  EnvConfig env_cfg = build_env(flags, base);
  if (attempts < 1) throw UsageError("--attempts must be at least 1");
  std::shared_ptr<PolicyParams> params;
  PolicyFn policy = make_policy(policy_spec, env_cfg.ruleset, params, greedy);
  Environment env(env_cfg);
  if (params && (params->obs_dim != static_cast<int>(env.obs_dim()) || params->n_actions != env.n_actions()))
    throw Error(ErrorCode::DimensionMismatch, "checkpoint does not fit this tileset and window");

  const std::uint64_t seed = env_cfg.master_seed;
  Trajectory traj;
  int attempt = 0;
  for (; attempt < attempts; ++attempt) {
    Rng rng = derive_rng(seed, static_cast<std::uint64_t>(attempt));
    traj = rollout(env, policy, rng);
    ctx.debug("attempt " + std::to_string(attempt) + ": " + std::string(to_string(traj.final_status)));
    if (traj.final_status != Status::Invalid) break;
  }
  Assembly assembly = make_assembly(env.canvas(), seed, static_cast<int>(traj.steps.size()));
  assembly.status = traj.final_status;
  const std::string text = assembly_to_json(assembly).dump(2) + "\n";
  if (out_path.empty())
    ctx.out << text;
  else
    write_text(out_path, text);
  if (env.canvas().lattice().rank() == 2) ctx.info(render_ascii(env.canvas()));
  ctx.info("status " + std::string(to_string(traj.final_status)) + ", coverage " + fixed(assembly.metrics.coverage) +
           ", stability " + fixed(assembly.metrics.stability) + ", steps " + std::to_string(traj.steps.size()));
  if (traj.final_status == Status::Invalid) {
    ctx.err << "error: contradiction in every one of " << attempts << " attempt(s)\n";
    return kExitDomain;
  }
  return kExitOk;
}

inline int cmd_train(const Context& ctx, const EnvFlags& flags, const std::string& config_path,
                     const std::string& out_dir, std::optional<int> n_envs, std::optional<std::int64_t> total_steps,
                     const std::string& resume_path) {
  nlohmann::json cfg_doc = nlohmann::json::object();
  if (!config_path.empty()) cfg_doc = parse_json(read_file(config_path), "config");
  nlohmann::json env_base = cfg_doc.contains("environment") ? cfg_doc.at("environment") : nlohmann::json(nullptr);
  // Either {environment, train} or a bare train block.
  TrainConfig tcfg;
  if (cfg_doc.contains("train"))
    tcfg = train_config_from_json(cfg_doc.at("train"));
  else if (!cfg_doc.contains("environment"))
    tcfg = train_config_from_json(cfg_doc);
  if (flags.seed) tcfg.master_seed = *flags.seed;
  if (n_envs) tcfg.n_envs = *n_envs;
  if (total_steps) tcfg.total_steps = *total_steps;
  usage_guard([&] {
    tcfg.validate();
    return 0;
  });
  EnvConfig env_cfg = build_env(flags, env_base);

  TrainOptions opts;
  opts.out_dir = out_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(out_dir);
  opts.environment_doc = env_config_to_json(env_cfg);
  if (!resume_path.empty())
    opts.resume = train_state_from_json(parse_json(read_file(resolve_checkpoint(resume_path)), "checkpoint"));
  opts.on_update = [&ctx](const MetricsRow& r) {
    ctx.info("update " + std::to_string(r.update) + " steps " + std::to_string(r.steps) + " reward " +
             fixed(r.mean_reward) + " coverage " + fixed(r.mean_coverage) + " invalid " + fixed(r.invalid_rate));
  };
  TrainResult res = train(tcfg, env_cfg, opts);
  ctx.info("wrote " + (opts.out_dir / "metrics.csv").string() + " and " + (opts.out_dir / "ckpt_final.json").string());
  ctx.debug("final update " + std::to_string(res.state.update));
  return kExitOk;
}

inline int cmd_eval(const Context& ctx, const EnvFlags& flags, const std::string& ckpt, const std::string& policy_spec,
                    int episodes, bool greedy) {
  if (episodes < 1) throw Error(ErrorCode::BadEpisodeCount, "--episodes must be at least 1");
  nlohmann::json env_base = nullptr;
  std::string policy = policy_spec;
  if (!ckpt.empty()) {
    nlohmann::json doc = parse_json(read_file(resolve_checkpoint(ckpt)), "checkpoint");
    if (doc.contains("environment")) env_base = doc.at("environment");
    if (policy.empty()) policy = resolve_checkpoint(ckpt);
  }
  if (policy.empty()) throw UsageError("eval needs --ckpt or --policy");
  EnvConfig env_cfg = build_env(flags, env_base);
  std::shared_ptr<PolicyParams> params;
  PolicyFn fn = make_policy(policy, env_cfg.ruleset, params, greedy);
  Environment env(env_cfg);
  if (params && (params->obs_dim != static_cast<int>(env.obs_dim()) || params->n_actions != env.n_actions()))
    throw Error(ErrorCode::DimensionMismatch, "checkpoint does not fit this tileset and window");
  Rng rng = derive_rng(env_cfg.master_seed, 0xe7a1);
  EvalStats s = evaluate(env, fn, episodes, rng);
  ctx.out << "episodes      " << s.episodes << '\n'
          << "mean_reward   " << fixed(s.mean_reward, 6) << '\n'
          << "std_reward    " << fixed(s.std_reward, 6) << '\n'
          << "mean_coverage " << fixed(s.mean_coverage, 6) << '\n'
          << "invalid_rate  " << fixed(s.invalid_rate, 6) << '\n';
  return kExitOk;
}

inline int cmd_export(const Context& ctx, const std::string& assembly_path, const std::string& tileset,
                      const std::string& format, const std::string& out_path) {
  Assembly a = assembly_from_json(parse_json(read_file(assembly_path), "assembly"));
  Ruleset rs;
  if (!tileset.empty())
    rs = resolve_tileset(tileset);
  else if (!a.tileset.is_null())
    rs = ruleset_from_json(a.tileset);
  else
    throw UsageError("the assembly carries no tileset; pass --tileset");
  Canvas canvas = Canvas::restore(std::make_shared<const Ruleset>(rs), a.dims, a.cells);
  Assembly again = make_assembly(canvas, a.seed, a.metrics.steps);
  again.status = a.status;
  std::string text;
  if (format == "ascii")
    text = render_ascii(canvas) + "\n";
  else if (format == "json")
    text = assembly_to_json(again).dump(2) + "\n";
  else
    throw UsageError("--format must be json or ascii");
  if (out_path.empty())
    ctx.out << text;
  else
    write_text(out_path, text);
  ctx.info("coverage " + fixed(again.metrics.coverage) + ", stability " + fixed(again.metrics.stability));
  return kExitOk;
}

}  // namespace detail

/// Parses argv (without the program name) and runs the subcommand.
inline int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  detail::Context ctx{out, err, log_level_from_env()};

  CLI::App app{"latticeforge: constraint-grown tile assemblies and learned tile policies", "latticeforge"};
  app.require_subcommand(1);

  std::string tileset, sample, out_path, config, policy, ckpt, assembly, format = "json", resume;
  int episodes = 100, attempts = 1;
  std::optional<int> n_envs;
  std::optional<std::int64_t> total_steps;
  bool greedy = false;
  detail::EnvFlags rollout_flags, train_flags, eval_flags;

  auto* validate = app.add_subcommand("validate", "Load a tileset and report diagnostics");
  validate->add_option("--tileset", tileset, "Tileset document path or built-in name")->required();

  auto* extract = app.add_subcommand("extract", "Derive a tileset from an exemplar grid");
  extract->add_option("--sample", sample, "Sample document {dims, cells[, names]}")->required();
  extract->add_option("--out", out_path, "Output tileset path (stdout if omitted)");

  auto* roll = app.add_subcommand("rollout", "Grow one assembly");
  detail::add_env_flags(roll, rollout_flags);
  roll->add_option("--config", config, "Environment config document");
  roll->add_option("--policy", policy, "random or a checkpoint path");
  roll->add_option("--out", out_path, "Assembly output path (stdout if omitted)");
  roll->add_option("--attempts", attempts, "Rollouts tried before giving up on contradictions");
  roll->add_flag("--greedy", greedy, "Take the most probable tile instead of sampling");

  auto* tr = app.add_subcommand("train", "Self-play training");
  detail::add_env_flags(tr, train_flags);
  tr->add_option("--config", config, "Config document {environment, train}");
  tr->add_option("--out", out_path, "Output directory for metrics and checkpoints");
  tr->add_option("--n-envs", n_envs, "Parallel rollout environments");
  tr->add_option("--total-steps", total_steps, "Environment step budget");
  tr->add_option("--resume", resume, "Checkpoint to continue from");

  auto* ev = app.add_subcommand("eval", "Evaluate a policy");
  detail::add_env_flags(ev, eval_flags);
  ev->add_option("--ckpt", ckpt, "Checkpoint path (the .json suffix may be omitted)");
  ev->add_option("--policy", policy, "random or a checkpoint path; overrides --ckpt's policy");
  ev->add_option("--episodes", episodes, "Episode count");
  ev->add_flag("--greedy", greedy, "Take the most probable tile instead of sampling");

  auto* ex = app.add_subcommand("export", "Re-measure and re-emit an assembly document");
  ex->add_option("--assembly", assembly, "Assembly document")->required();
  ex->add_option("--tileset", tileset, "Tileset (defaults to the one embedded in the assembly)");
  ex->add_option("--format", format, "json or ascii");
  ex->add_option("--out", out_path, "Output path (stdout if omitted)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (validate->parsed()) return detail::cmd_validate(ctx, tileset);
    if (extract->parsed()) return detail::cmd_extract(ctx, sample, out_path);
    if (roll->parsed()) return detail::cmd_rollout(ctx, rollout_flags, config, policy, out_path, attempts, greedy);
    if (tr->parsed()) return detail::cmd_train(ctx, train_flags, config, out_path, n_envs, total_steps, resume);
    if (ev->parsed()) return detail::cmd_eval(ctx, eval_flags, ckpt, policy, episodes, greedy);
    if (ex->parsed()) return detail::cmd_export(ctx, assembly, tileset, format, out_path);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace latticeforge::cli
