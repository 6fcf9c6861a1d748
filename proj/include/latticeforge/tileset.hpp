#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "latticeforge/error.hpp"
#include "latticeforge/lattice.hpp"

namespace latticeforge {

using TileId = int;
/// Bit t set means tile t is a member. Rulesets are limited to 64 tiles.
using TileMask = std::uint64_t;
inline constexpr int kMaxTiles = 64;

inline constexpr TileMask tile_bit(TileId t) { return TileMask{1} << t; }
inline int popcount(TileMask m) { return std::popcount(m); }

template <typename Fn>
void for_each_tile(TileMask m, Fn&& fn) {
  while (m) {
    fn(static_cast<TileId>(std::countr_zero(m)));
    m &= m - 1;
  }
}

struct Tile {
  TileId id = 0;
  std::string name;
  double weight = 1.0;
  /// Either empty or one label per direction, indexed by Direction::index().
  std::vector<std::string> sockets;

  friend bool operator==(const Tile&, const Tile&) = default;
};

/// Tile dictionary plus the per-direction adjacency relation.
///
/// `allowed(a, dir, b)` reads "b may sit on the `dir` side of a". The
/// relation is kept closed under mirroring: allowing (a, dir, b) also allows
/// (b, opposite(dir), a).
class Ruleset {
 public:
  Ruleset() = default;

  Ruleset(int rank, std::vector<Tile> tiles, std::optional<TileId> void_tile = std::nullopt)
      : rank_(rank), tiles_(std::move(tiles)), void_tile_(void_tile) {
    if (rank_ < 2 || rank_ > kMaxRank)
      throw Error(ErrorCode::MalformedDocument, "rank must be 2 or 3, got " + std::to_string(rank_));
    if (tiles_.empty()) throw Error(ErrorCode::MalformedDocument, "a ruleset needs at least one tile");
    if (tiles_.size() > static_cast<std::size_t>(kMaxTiles))
      throw Error(ErrorCode::MalformedDocument, "at most 64 tiles are supported");
    std::sort(tiles_.begin(), tiles_.end(), [](const Tile& l, const Tile& r) { return l.id < r.id; });
    for (std::size_t i = 0; i < tiles_.size(); ++i) {
      const Tile& t = tiles_[i];
      if (t.id != static_cast<TileId>(i))
        throw Error(ErrorCode::MalformedDocument, "tile ids must be unique and dense from 0");
      if (!(t.weight > 0.0))
        throw Error(ErrorCode::NonPositiveWeight, "tile '" + t.name + "' has weight " + std::to_string(t.weight));
      if (!t.sockets.empty() && t.sockets.size() != static_cast<std::size_t>(direction_count(rank_)))
        throw Error(ErrorCode::MalformedDocument, "tile '" + t.name + "' must label every face or none");
    }
    if (void_tile_ && !valid_id(*void_tile_))
      throw Error(ErrorCode::UnknownTile, "void tile " + std::to_string(*void_tile_) + " is not declared");
    allowed_.assign(tiles_.size() * static_cast<std::size_t>(direction_count(rank_)), 0);
  }

  int rank() const { return rank_; }
  int tile_count() const { return static_cast<int>(tiles_.size()); }
  const std::vector<Tile>& tiles() const { return tiles_; }
  const Tile& tile(TileId id) const {
    check_id(id);
    return tiles_[static_cast<std::size_t>(id)];
  }
  std::optional<TileId> void_tile() const { return void_tile_; }
  bool is_void(TileId id) const { return void_tile_ && *void_tile_ == id; }
  bool valid_id(TileId id) const { return id >= 0 && id < tile_count(); }

  TileMask all_tiles() const {
    return tiles_.size() == 64 ? ~TileMask{0} : (tile_bit(tile_count()) - 1);
  }

  void allow(TileId a, Direction dir, TileId b) {
    check_id(a);
    check_id(b);
    check_dir(dir);
    allowed_[slot(a, dir)] |= tile_bit(b);
    allowed_[slot(b, dir.opposite())] |= tile_bit(a);
  }

  bool compatible(TileId a, Direction dir, TileId b) const {
    check_id(a);
    check_id(b);
    check_dir(dir);
    return (allowed_[slot(a, dir)] & tile_bit(b)) != 0;
  }

  /// Tiles that may sit on the `dir` side of `a`.
  TileMask neighbors(TileId a, Direction dir) const { return allowed_[slot(a, dir)]; }

  /// Tiles that may sit on the `dir` side of some member of `set`.
  TileMask support(TileMask set, Direction dir) const {
    TileMask out = 0;
    for_each_tile(set, [&](TileId t) { out |= allowed_[slot(t, dir)]; });
    return out;
  }

  std::optional<TileId> find(const std::string& name) const {
    for (const Tile& t : tiles_)
      if (t.name == name) return t.id;
    return std::nullopt;
  }

  friend bool operator==(const Ruleset&, const Ruleset&) = default;

 private:
  std::size_t slot(TileId a, Direction dir) const {
    return static_cast<std::size_t>(a) * static_cast<std::size_t>(direction_count(rank_)) +
           static_cast<std::size_t>(dir.index());
  }
  void check_id(TileId id) const {
    if (!valid_id(id)) throw Error(ErrorCode::UnknownTile, "tile id " + std::to_string(id) + " is not declared");
  }
  void check_dir(Direction d) const {
    if (d.axis < 0 || d.axis >= rank_ || (d.sign != 1 && d.sign != -1))
      throw Error(ErrorCode::BadDirection, "direction outside the lattice");
  }

  int rank_ = 2;
  std::vector<Tile> tiles_;
  std::optional<TileId> void_tile_;
  std::vector<TileMask> allowed_;
};

inline bool compatible(const Ruleset& rs, TileId a, Direction dir, TileId b) { return rs.compatible(a, dir, b); }

// ---------------------------------------------------------------------------
// Tileset documents

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key))
    throw Error(ErrorCode::MalformedDocument, std::string("missing field '") + key + "'");
  return doc.at(key);
}

template <typename T>
T get_as(const nlohmann::json& value, const char* what) {
  try {
    return value.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::MalformedDocument, std::string("field '") + what + "' has the wrong type");
  }
}

inline TileId rule_tile(const nlohmann::json& ref, const Ruleset& rs) {
  if (ref.is_string()) {
    auto id = rs.find(ref.get<std::string>());
    if (!id) throw Error(ErrorCode::UnknownTile, "rule names undeclared tile '" + ref.get<std::string>() + "'");
    return *id;
  }
  if (!ref.is_number_integer()) throw Error(ErrorCode::MalformedDocument, "rule tile must be an id or a name");
  TileId id = ref.get<TileId>();
  if (!rs.valid_id(id)) throw Error(ErrorCode::UnknownTile, "rule references undeclared tile id " + std::to_string(id));
  return id;
}

}  // namespace detail

inline Ruleset ruleset_from_json(const nlohmann::json& doc) {
  using detail::get_as;
  using detail::require;
  if (!doc.is_object()) throw Error(ErrorCode::MalformedDocument, "tileset document must be an object");
  if (get_as<int>(require(doc, "version"), "version") != 1)
    throw Error(ErrorCode::MalformedDocument, "unsupported tileset version");
  const int rank = get_as<int>(require(doc, "rank"), "rank");
  if (rank != 2 && rank != 3) throw Error(ErrorCode::MalformedDocument, "rank must be 2 or 3");

  const auto& tile_docs = require(doc, "tiles");
  if (!tile_docs.is_array()) throw Error(ErrorCode::MalformedDocument, "'tiles' must be a list");
  std::vector<Tile> tiles;
  std::set<TileId> seen;
  for (const auto& td : tile_docs) {
    Tile t;
    t.id = get_as<TileId>(require(td, "id"), "id");
    t.name = td.contains("name") ? get_as<std::string>(td.at("name"), "name") : std::to_string(t.id);
    t.weight = td.contains("weight") ? get_as<double>(td.at("weight"), "weight") : 1.0;
    if (!seen.insert(t.id).second)
      throw Error(ErrorCode::MalformedDocument, "duplicate tile id " + std::to_string(t.id));
    if (td.contains("sockets")) {
      const auto& sd = td.at("sockets");
      if (!sd.is_object()) throw Error(ErrorCode::MalformedDocument, "'sockets' must map direction to label");
      t.sockets.assign(static_cast<std::size_t>(direction_count(rank)), std::string{});
      std::vector<bool> labelled(t.sockets.size(), false);
      for (auto it = sd.begin(); it != sd.end(); ++it) {
        Direction d = parse_direction(it.key(), rank);
        t.sockets[static_cast<std::size_t>(d.index())] = get_as<std::string>(it.value(), "sockets");
        labelled[static_cast<std::size_t>(d.index())] = true;
      }
      if (std::find(labelled.begin(), labelled.end(), false) != labelled.end())
        throw Error(ErrorCode::MalformedDocument, "tile '" + t.name + "' must label every face");
    }
    tiles.push_back(std::move(t));
  }

  std::optional<TileId> void_tile;
  if (doc.contains("void_tile") && !doc.at("void_tile").is_null())
    void_tile = get_as<TileId>(doc.at("void_tile"), "void_tile");

  // Unknown ids fail before the dense-id check so the more specific error wins.
  if (doc.contains("rules")) {
    for (const auto& rd : doc.at("rules")) {
      for (const char* key : {"a", "b"}) {
        const auto& ref = require(rd, key);
        if (ref.is_number_integer() && !seen.count(ref.get<TileId>()))
          throw Error(ErrorCode::UnknownTile, "rule references undeclared tile id " + std::to_string(ref.get<TileId>()));
      }
    }
  }

  Ruleset rs(rank, std::move(tiles), void_tile);

  if (doc.contains("rules")) {
    const auto& rules = doc.at("rules");
    if (!rules.is_array()) throw Error(ErrorCode::MalformedDocument, "'rules' must be a list");
    for (const auto& rd : rules) {
      TileId a = detail::rule_tile(require(rd, "a"), rs);
      TileId b = detail::rule_tile(require(rd, "b"), rs);
      Direction dir = parse_direction(get_as<std::string>(require(rd, "dir"), "dir"), rank);
      rs.allow(a, dir, b);
    }
  }

  std::set<std::pair<std::string, std::string>> compat;
  if (doc.contains("socket_compat")) {
    const auto& sc = doc.at("socket_compat");
    if (!sc.is_array()) throw Error(ErrorCode::MalformedDocument, "'socket_compat' must be a list of pairs");
    for (const auto& pair : sc) {
      if (!pair.is_array() || pair.size() != 2)
        throw Error(ErrorCode::MalformedDocument, "'socket_compat' entries must be [label, label]");
      auto l = get_as<std::string>(pair[0], "socket_compat");
      auto r = get_as<std::string>(pair[1], "socket_compat");
      compat.emplace(l, r);
      compat.emplace(r, l);
    }
  }
  // Two faces fit iff their labels form a compatible pair.
  for (const Tile& a : rs.tiles()) {
    if (a.sockets.empty()) continue;
    for (const Tile& b : rs.tiles()) {
      if (b.sockets.empty()) continue;
      for (int di = 0; di < direction_count(rank); ++di) {
        Direction d = Direction::from_index(di);
        const auto& la = a.sockets[static_cast<std::size_t>(di)];
        const auto& lb = b.sockets[static_cast<std::size_t>(d.opposite().index())];
        if (compat.count({la, lb})) rs.allow(a.id, d, b.id);
      }
    }
  }
  return rs;
}

inline Ruleset load_tileset(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedDocument, e.what());
  }
  return ruleset_from_json(doc);
}

/// Emits the relation as explicit rules over the positive directions only;
/// closure on load restores the mirrored entries.
inline nlohmann::json ruleset_to_json(const Ruleset& rs) {
  nlohmann::json doc;
  doc["version"] = 1;
  doc["rank"] = rs.rank();
  auto tiles = nlohmann::json::array();
  for (const Tile& t : rs.tiles()) {
    nlohmann::json td{{"id", t.id}, {"name", t.name}, {"weight", t.weight}};
    if (!t.sockets.empty()) {
      nlohmann::json sd = nlohmann::json::object();
      for (int di = 0; di < direction_count(rs.rank()); ++di)
        sd[direction_name(Direction::from_index(di))] = t.sockets[static_cast<std::size_t>(di)];
      td["sockets"] = sd;
    }
    tiles.push_back(td);
  }
  doc["tiles"] = tiles;
  auto rules = nlohmann::json::array();
  for (const Tile& a : rs.tiles())
    for (int axis = 0; axis < rs.rank(); ++axis) {
      Direction d{axis, +1};
      for_each_tile(rs.neighbors(a.id, d), [&](TileId b) {
        rules.push_back({{"a", a.id}, {"dir", direction_name(d)}, {"b", b}});
      });
    }
  doc["rules"] = rules;
  doc["socket_compat"] = nlohmann::json::array();
  if (rs.void_tile()) doc["void_tile"] = *rs.void_tile();
  return doc;
}

inline std::string serialize_tileset(const Ruleset& rs) { return ruleset_to_json(rs).dump(2); }

// ---------------------------------------------------------------------------
// Diagnostics

struct Diagnostic {
  enum class Kind { DeadEnd, UnreachableTile };
  Kind kind;
  TileId tile;
  std::optional<Direction> dir;

  std::string message(const Ruleset& rs) const {
    const std::string& name = rs.tile(tile).name;
    if (kind == Kind::DeadEnd)
      return "DeadEnd: tile '" + name + "' has no compatible neighbor toward " + direction_name(*dir);
    return "UnreachableTile: tile '" + name + "' appears in no rule";
  }

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

inline std::vector<Diagnostic> validate_ruleset(const Ruleset& rs) {
  std::vector<Diagnostic> out;
  for (const Tile& t : rs.tiles()) {
    bool used = false;
    for (int di = 0; di < direction_count(rs.rank()); ++di) {
      Direction d = Direction::from_index(di);
      if (rs.neighbors(t.id, d) == 0)
        out.push_back({Diagnostic::Kind::DeadEnd, t.id, d});
      else
        used = true;
    }
    // By closure, a tile appears in some rule iff it has a neighbor in some direction.
    if (!used) out.push_back({Diagnostic::Kind::UnreachableTile, t.id, std::nullopt});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exemplar extraction

/// A dense sample of tile ids laid out like the lattice (x fastest).
struct Grid {
  std::vector<int> dims;
  std::vector<int> cells;
};

/// Builds the ruleset whose relation is exactly the set of adjacent pairs in
/// the sample. Distinct sample ids are renumbered densely in ascending order;
/// a tile's weight is its occurrence count and its name is `names[id]` when
/// given, otherwise the original id.
inline Ruleset extract_rules(const Grid& sample, const std::map<int, std::string>& names = {}) {
  if (sample.cells.empty()) throw Error(ErrorCode::EmptySample, "sample has no cells");
  Lattice lattice(sample.dims);
  if (lattice.cell_count() != sample.cells.size())
    throw Error(ErrorCode::MalformedDocument, "sample cell count does not match its dims");

  std::map<int, int> counts;
  for (int id : sample.cells) {
    if (id < 0) throw Error(ErrorCode::MalformedDocument, "sample ids must be non-negative");
    ++counts[id];
  }
  std::map<int, TileId> dense;
  std::vector<Tile> tiles;
  for (auto [id, count] : counts) {
    TileId t = static_cast<TileId>(tiles.size());
    dense[id] = t;
    auto it = names.find(id);
    tiles.push_back({t, it != names.end() ? it->second : std::to_string(id), static_cast<double>(count), {}});
  }
  Ruleset rs(lattice.rank(), std::move(tiles));
  for (std::size_t i = 0; i < lattice.cell_count(); ++i)
    for (int axis = 0; axis < lattice.rank(); ++axis) {
      Direction d{axis, +1};
      if (auto n = lattice.neighbor(i, d)) rs.allow(dense[sample.cells[i]], d, dense[sample.cells[*n]]);
    }
  return rs;
}

/// Rows are indexed by y (rows[0] is y = 0), columns by x.
inline Ruleset extract_rules_from_rows(const std::vector<std::vector<int>>& rows, int rank = 2) {
  if (rows.empty() || rows.front().empty()) throw Error(ErrorCode::EmptySample, "sample has no cells");
  Grid g;
  const int width = static_cast<int>(rows.front().size());
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != width)
      throw Error(ErrorCode::MalformedDocument, "sample rows must have equal length");
    g.cells.insert(g.cells.end(), row.begin(), row.end());
  }
  g.dims = {width, static_cast<int>(rows.size())};
  if (rank == 3) g.dims.push_back(1);
  return extract_rules(g);
}

}  // namespace latticeforge
