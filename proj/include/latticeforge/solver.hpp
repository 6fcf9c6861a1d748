#pragma once

#include <cstddef>
#include <deque>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "latticeforge/error.hpp"
#include "latticeforge/lattice.hpp"
#include "latticeforge/random.hpp"
#include "latticeforge/tileset.hpp"

namespace latticeforge {

/// Local: a cell's domain only reflects its decided neighbours.
/// Propagate: domains are kept arc-consistent across all open cells.
enum class Consistency { Local, Propagate };

enum class Status { InProgress, Complete, Invalid };

inline std::string_view to_string(Consistency c) { return c == Consistency::Local ? "local" : "propagate"; }

inline Consistency parse_consistency(std::string_view text) {
  if (text == "local") return Consistency::Local;
  if (text == "propagate") return Consistency::Propagate;
  throw Error(ErrorCode::BadConfig, "consistency must be 'local' or 'propagate', got '" + std::string(text) + "'");
}

inline std::string_view to_string(Status s) {
  switch (s) {
    case Status::InProgress: return "InProgress";
    case Status::Complete: return "Complete";
    case Status::Invalid: return "Invalid";
  }
  return "InProgress";
}

inline Status parse_status(std::string_view text) {
  if (text == "Complete") return Status::Complete;
  if (text == "Invalid") return Status::Invalid;
  if (text == "InProgress") return Status::InProgress;
  throw Error(ErrorCode::MalformedDocument, "unknown status '" + std::string(text) + "'");
}

struct SeedSpec {
  enum class Kind { Center, Cell, CellTile };
  Kind kind = Kind::Center;
  Coord cell{0, 0, 0};
  TileId tile = 0;

  static SeedSpec center() { return {}; }
  static SeedSpec at(Coord c) { return {Kind::Cell, c, 0}; }
  static SeedSpec at(Coord c, TileId t) { return {Kind::CellTile, c, t}; }
};

struct PlacementOutcome {
  bool contradiction = false;
  /// Open cells whose domain shrank; the placed cell itself is not listed.
  std::vector<Coord> changed_cells;
};

class Canvas;
Canvas init_canvas(const std::vector<int>& dims, std::shared_ptr<const Ruleset> rs, const SeedSpec& seed, Rng& rng,
                   Consistency mode = Consistency::Local);
PlacementOutcome place(Canvas& canvas, const Coord& cell, TileId tile);

/// The partial assembly: decided cells, candidate domains of open cells and
/// the frontier of open cells touching the structure.
class Canvas {
 public:
  /// Rebuilds a canvas from a cell list (tile id or -1 per cell, row-major).
  /// Domains and frontier are recomputed; adjacency is not re-validated.
  static Canvas restore(std::shared_ptr<const Ruleset> rs, const std::vector<int>& dims, const std::vector<int>& cells,
                        Consistency mode = Consistency::Local) {
    Canvas canvas(std::move(rs), Lattice(dims), mode);
    if (cells.size() != canvas.lattice_.cell_count())
      throw Error(ErrorCode::MalformedDocument, "cell list does not match dims");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i] < 0) continue;
      canvas.ruleset_->tile(cells[i]);
      canvas.decided_[i] = cells[i];
      canvas.domain_[i] = tile_bit(cells[i]);
      ++canvas.decided_count_;
    }
    if (mode == Consistency::Propagate) {
      canvas.propagate_all();
    } else {
      for (std::size_t i = 0; i < cells.size(); ++i)
        if (canvas.decided_[i] < 0) canvas.set_domain(i, canvas.local_domain(i));
    }
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (canvas.decided_[i] >= 0 && !canvas.ruleset_->is_void(canvas.decided_[i])) canvas.open_neighbors(i);
    return canvas;
  }

  const Lattice& lattice() const { return lattice_; }
  const Ruleset& ruleset() const { return *ruleset_; }
  std::shared_ptr<const Ruleset> ruleset_ptr() const { return ruleset_; }
  Consistency mode() const { return mode_; }

  bool is_decided(const Coord& c) const { return decided_[checked(c)] >= 0; }
  std::optional<TileId> tile_at(const Coord& c) const {
    TileId t = decided_[checked(c)];
    return t >= 0 ? std::optional<TileId>(t) : std::nullopt;
  }
  TileMask domain(const Coord& c) const { return domain_[checked(c)]; }

  std::vector<Coord> frontier() const {
    std::vector<Coord> out;
    out.reserve(frontier_.size());
    for (std::size_t i : frontier_) out.push_back(lattice_.coord(i));
    return out;
  }
  bool in_frontier(const Coord& c) const { return frontier_.count(checked(c)) != 0; }
  std::size_t frontier_size() const { return frontier_.size(); }

  /// Candidate count maintained incrementally for every open cell.
  int cached_entropy(const Coord& c) const { return entropy_[checked(c)]; }

  std::size_t decided_count() const { return decided_count_; }
  std::size_t cell_count() const { return lattice_.cell_count(); }
  /// True once any open cell's domain has been emptied.
  bool contradiction() const { return contradiction_; }

  /// Tile id per cell (row-major), -1 where undecided.
  const std::vector<TileId>& cells() const { return decided_; }

 private:
  friend Canvas init_canvas(const std::vector<int>&, std::shared_ptr<const Ruleset>, const SeedSpec&, Rng&,
                            Consistency);
  friend PlacementOutcome place(Canvas&, const Coord&, TileId);

  Canvas(std::shared_ptr<const Ruleset> rs, Lattice lattice, Consistency mode)
      : ruleset_(std::move(rs)), lattice_(std::move(lattice)), mode_(mode) {
    if (!ruleset_) throw Error(ErrorCode::MalformedDocument, "canvas needs a ruleset");
    if (ruleset_->rank() != lattice_.rank())
      throw Error(ErrorCode::BadDims, "dims rank " + std::to_string(lattice_.rank()) + " does not match tileset rank " +
                                          std::to_string(ruleset_->rank()));
    const std::size_t n = lattice_.cell_count();
    decided_.assign(n, -1);
    domain_.assign(n, ruleset_->all_tiles());
    entropy_.assign(n, ruleset_->tile_count());
  }

  std::size_t checked(const Coord& c) const {
    if (!lattice_.contains(c)) throw Error(ErrorCode::OutOfBounds, "cell outside the canvas");
    return lattice_.index(c);
  }

  void set_domain(std::size_t i, TileMask m) {
    domain_[i] = m;
    entropy_[i] = popcount(m);
    if (m == 0) contradiction_ = true;
  }

  TileMask local_domain(std::size_t i) const {
    TileMask m = ruleset_->all_tiles();
    for (int di = 0; di < direction_count(lattice_.rank()); ++di) {
      Direction d = Direction::from_index(di);
      auto n = lattice_.neighbor(i, d);
      if (n && decided_[*n] >= 0) m &= ruleset_->neighbors(decided_[*n], d.opposite());
    }
    return m;
  }

  void open_neighbors(std::size_t i) {
    for (int di = 0; di < direction_count(lattice_.rank()); ++di)
      if (auto n = lattice_.neighbor(i, Direction::from_index(di)); n && decided_[*n] < 0) frontier_.insert(*n);
  }

  // AC-3 style worklist: narrow each open neighbour of a changed cell to the
  // tiles supported by the changed cell's domain, until nothing changes.
  void propagate(std::deque<std::size_t> work, std::vector<std::size_t>* changed) {
    std::vector<bool> queued(lattice_.cell_count(), false);
    for (std::size_t i : work) queued[i] = true;
    while (!work.empty()) {
      std::size_t c = work.front();
      work.pop_front();
      queued[c] = false;
      for (int di = 0; di < direction_count(lattice_.rank()); ++di) {
        Direction d = Direction::from_index(di);
        auto n = lattice_.neighbor(c, d);
        if (!n || decided_[*n] >= 0) continue;
        TileMask narrowed = domain_[*n] & ruleset_->support(domain_[c], d);
        if (narrowed == domain_[*n]) continue;
        set_domain(*n, narrowed);
        if (changed) changed->push_back(*n);
        if (!queued[*n]) {
          queued[*n] = true;
          work.push_back(*n);
        }
      }
    }
  }

  void propagate_all() {
    std::deque<std::size_t> work;
    for (std::size_t i = 0; i < lattice_.cell_count(); ++i) work.push_back(i);
    propagate(std::move(work), nullptr);
  }

  PlacementOutcome decide(std::size_t i, TileId tile) {
    PlacementOutcome outcome;
    std::vector<std::size_t> changed;
    decided_[i] = tile;
    domain_[i] = tile_bit(tile);
    entropy_[i] = 1;
    ++decided_count_;
    frontier_.erase(i);
    const bool was_contradiction = contradiction_;
    contradiction_ = false;
    if (mode_ == Consistency::Local) {
      for (int di = 0; di < direction_count(lattice_.rank()); ++di) {
        Direction d = Direction::from_index(di);
        auto n = lattice_.neighbor(i, d);
        if (!n || decided_[*n] >= 0) continue;
        TileMask narrowed = domain_[*n] & ruleset_->neighbors(tile, d);
        if (narrowed == domain_[*n]) continue;
        set_domain(*n, narrowed);
        changed.push_back(*n);
      }
    } else {
      propagate({i}, &changed);
    }
    outcome.contradiction = contradiction_;
    contradiction_ = contradiction_ || was_contradiction;
    if (!ruleset_->is_void(tile)) open_neighbors(i);
    std::set<std::size_t> unique(changed.begin(), changed.end());
    for (std::size_t c : unique) outcome.changed_cells.push_back(lattice_.coord(c));
    return outcome;
  }

  std::shared_ptr<const Ruleset> ruleset_;
  Lattice lattice_;
  Consistency mode_;
  std::vector<TileId> decided_;
  std::vector<TileMask> domain_;
  std::vector<int> entropy_;
  std::set<std::size_t> frontier_;
  std::size_t decided_count_ = 0;
  bool contradiction_ = false;
};

/// Weight-proportional draw from `candidates`; `candidates` must be non-empty.
inline TileId sample_weighted(const Ruleset& rs, TileMask candidates, Rng& rng) {
  double total = 0.0;
  for_each_tile(candidates, [&](TileId t) { total += rs.tile(t).weight; });
  double r = uniform01(rng) * total;
  TileId pick = -1;
  for_each_tile(candidates, [&](TileId t) {
    if (pick >= 0) return;
    r -= rs.tile(t).weight;
    if (r < 0.0) pick = t;
  });
  if (pick < 0) {
    // Rounding left r marginally non-negative; fall back to the last candidate.
    for_each_tile(candidates, [&](TileId t) { pick = t; });
  }
  return pick;
}

inline Canvas init_canvas(const std::vector<int>& dims, std::shared_ptr<const Ruleset> rs, const SeedSpec& seed,
                          Rng& rng, Consistency mode) {
  Canvas canvas(std::move(rs), Lattice(dims), mode);
  const Lattice& lat = canvas.lattice_;
  Coord cell = seed.kind == SeedSpec::Kind::Center ? lat.center() : seed.cell;
  if (!lat.contains(cell)) throw Error(ErrorCode::OutOfBounds, "seed cell outside the canvas");
  const std::size_t i = lat.index(cell);
  if (mode == Consistency::Propagate) canvas.propagate_all();

  TileMask allowed = canvas.domain_[i];
  if (auto v = canvas.ruleset_->void_tile()) allowed &= ~tile_bit(*v);
  TileId tile;
  if (seed.kind == SeedSpec::Kind::CellTile) {
    canvas.ruleset_->tile(seed.tile);
    if (canvas.ruleset_->is_void(seed.tile))
      throw Error(ErrorCode::InvalidSeedTile, "the void tile cannot seed an assembly");
    if (!(allowed & tile_bit(seed.tile)))
      throw Error(ErrorCode::InvalidSeedTile, "seed tile admits no consistent neighbourhood at the seed cell");
    tile = seed.tile;
  } else {
    if (allowed == 0) throw Error(ErrorCode::InvalidSeedTile, "no non-void tile can be placed at the seed cell");
    tile = sample_weighted(*canvas.ruleset_, allowed, rng);
  }
  canvas.decide(i, tile);
  return canvas;
}

inline TileMask valid_tiles(const Canvas& canvas, const Coord& cell) {
  if (canvas.is_decided(cell)) throw Error(ErrorCode::CellDecided, "cell is already decided");
  return canvas.domain(cell);
}

inline int entropy(const Canvas& canvas, const Coord& cell) { return popcount(valid_tiles(canvas, cell)); }

/// Most constrained frontier cell; ties are broken uniformly with `rng`.
inline Coord select_node(const Canvas& canvas, Rng& rng) {
  const auto frontier = canvas.frontier();
  if (frontier.empty()) throw Error(ErrorCode::NoFrontier, "frontier is empty");
  int best = std::numeric_limits<int>::max();
  std::vector<Coord> ties;
  for (const Coord& c : frontier) {
    int e = canvas.cached_entropy(c);
    if (e < best) {
      best = e;
      ties.clear();
    }
    if (e == best) ties.push_back(c);
  }
  if (ties.size() == 1) return ties.front();
  return ties[uniform_below(rng, ties.size())];
}

inline PlacementOutcome place(Canvas& canvas, const Coord& cell, TileId tile) {
  if (canvas.is_decided(cell)) throw Error(ErrorCode::CellDecided, "cell is already decided");
  canvas.ruleset().tile(tile);
  if (!canvas.in_frontier(cell)) throw Error(ErrorCode::InvalidPlacement, "cell is not on the frontier");
  if (!(canvas.domain(cell) & tile_bit(tile)))
    throw Error(ErrorCode::InvalidPlacement,
                "tile '" + canvas.ruleset().tile(tile).name + "' is not valid at this cell");
  return canvas.decide(canvas.lattice().index(cell), tile);
}

inline Status status(const Canvas& canvas) {
  const auto frontier = canvas.frontier();
  for (const Coord& c : frontier)
    if (canvas.cached_entropy(c) == 0) return Status::Invalid;
  return frontier.empty() ? Status::Complete : Status::InProgress;
}

}  // namespace latticeforge
