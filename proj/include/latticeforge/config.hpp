#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "latticeforge/builtin_tilesets.hpp"
#include "latticeforge/environment.hpp"
#include "latticeforge/error.hpp"
#include "latticeforge/solver.hpp"
#include "latticeforge/tileset.hpp"

namespace latticeforge {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MalformedDocument, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json parse_json(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedDocument, what + ": " + e.what());
  }
}

/// A path to a tileset document, or the name of a built-in tileset.
inline Ruleset resolve_tileset(const std::string& source) {
  if (std::filesystem::exists(source)) return load_tileset(read_file(source));
  if (auto text = builtin_tileset(source)) return load_tileset(*text);
  throw Error(ErrorCode::MalformedDocument, "no tileset file or built-in named '" + source + "'");
}

inline nlohmann::json reward_to_json(const RewardSpec& r) {
  nlohmann::json doc{{"coverage_weight", r.coverage_weight},
                     {"stability_weight", r.stability_weight},
                     {"invalid_penalty", r.invalid_penalty}};
  auto targets = nlohmann::json::array();
  for (const auto& [tile, t] : r.tile_target)
    targets.push_back({{"tile", tile}, {"fraction", t.fraction}, {"weight", t.weight}});
  doc["tile_target"] = targets;
  return doc;
}

inline RewardSpec reward_from_json(const nlohmann::json& doc, const Ruleset& rs) {
  RewardSpec r;
  try {
    r.coverage_weight = doc.value("coverage_weight", 0.0);
    r.stability_weight = doc.value("stability_weight", 0.0);
    r.invalid_penalty = doc.value("invalid_penalty", 0.0);
    // Either a list of {tile, fraction, weight} or an object keyed by tile.
    std::vector<std::pair<nlohmann::json, nlohmann::json>> entries;
    if (doc.contains("tile_target")) {
      const auto& targets = doc.at("tile_target");
      if (targets.is_object())
        for (auto it = targets.begin(); it != targets.end(); ++it) entries.emplace_back(it.key(), it.value());
      else
        for (const auto& t : targets) entries.emplace_back(t.at("tile"), t);
    }
    for (const auto& [ref, t] : entries) {
      TileId id;
      if (ref.is_string()) {
        auto found = rs.find(ref.get<std::string>());
        if (!found) throw Error(ErrorCode::UnknownTile, "tile target names unknown tile");
        id = *found;
      } else {
        id = ref.get<TileId>();
        rs.tile(id);
      }
      r.tile_target[id] = {t.at("fraction").get<double>(), t.value("weight", 1.0)};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("reward spec: ") + e.what());
  }
  r.validate();
  return r;
}

/// Environment config document. `tileset` is a path, a built-in name, or an
/// inline tileset document.
inline EnvConfig env_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::BadConfig, "environment config must be an object");
  EnvConfig cfg;
  try {
    const auto& ts = doc.at("tileset");
    cfg.ruleset = std::make_shared<const Ruleset>(ts.is_object() ? ruleset_from_json(ts)
                                                                 : resolve_tileset(ts.get<std::string>()));
    const auto& dims = doc.at("dims");
    cfg.dims = dims.is_string() ? parse_dims(dims.get<std::string>()) : dims.get<std::vector<int>>();
    cfg.mode = parse_consistency(doc.value("consistency", std::string("local")));
    cfg.radius = doc.value("radius", 2);
    cfg.max_steps = doc.value("max_steps", 0);
    cfg.master_seed = doc.value("master_seed", std::uint64_t{0});
    if (doc.contains("seed_cell")) {
      auto c = doc.at("seed_cell").get<std::vector<int>>();
      Coord cell{0, 0, 0};
      for (std::size_t a = 0; a < c.size() && a < cell.size(); ++a) cell[a] = c[a];
      cfg.seed = SeedSpec::at(cell);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("environment config: ") + e.what());
  }
  cfg.reward = doc.contains("reward") ? reward_from_json(doc.at("reward"), *cfg.ruleset) : RewardSpec{};
  return cfg;
}

/// The tileset is written inline so the document is self-contained.
inline nlohmann::json env_config_to_json(const EnvConfig& cfg) {
  nlohmann::json doc{{"tileset", ruleset_to_json(*cfg.ruleset)},
                     {"dims", cfg.dims},
                     {"consistency", std::string(to_string(cfg.mode))},
                     {"radius", cfg.radius},
                     {"max_steps", cfg.max_steps},
                     {"reward", reward_to_json(cfg.reward)},
                     {"master_seed", cfg.master_seed}};
  if (cfg.seed.kind != SeedSpec::Kind::Center)
    doc["seed_cell"] = std::vector<int>(cfg.seed.cell.begin(), cfg.seed.cell.begin() + cfg.dims.size());
  return doc;
}

}  // namespace latticeforge
