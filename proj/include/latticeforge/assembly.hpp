#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "latticeforge/environment.hpp"
#include "latticeforge/error.hpp"
#include "latticeforge/solver.hpp"
#include "latticeforge/tileset.hpp"

namespace latticeforge {

struct AssemblyMetrics {
  double coverage = 0.0;
  double stability = 1.0;
  int steps = 0;
};

/// An exported assembly: row-major tile ids with -1 for undecided cells.
struct Assembly {
  int rank = 2;
  std::vector<int> dims;
  std::vector<int> cells;
  Status status = Status::InProgress;
  std::uint64_t seed = 0;
  AssemblyMetrics metrics;
  /// Inline tileset document, when known.
  nlohmann::json tileset = nullptr;
};

inline AssemblyMetrics measure(const Canvas& canvas, int steps) {
  return {coverage(canvas), stability_proxy(canvas).score, steps};
}

inline Assembly make_assembly(const Canvas& canvas, std::uint64_t seed, int steps) {
  Assembly a;
  a.rank = canvas.lattice().rank();
  a.dims = canvas.lattice().extents();
  a.cells = canvas.cells();
  a.status = status(canvas);
  a.seed = seed;
  a.metrics = measure(canvas, steps);
  a.tileset = ruleset_to_json(canvas.ruleset());
  return a;
}

inline nlohmann::json assembly_to_json(const Assembly& a) {
  nlohmann::json doc{{"version", 1},
                     {"rank", a.rank},
                     {"dims", a.dims},
                     {"cells", a.cells},
                     {"status", std::string(to_string(a.status))},
                     {"seed", a.seed},
                     {"metrics",
                      {{"coverage", a.metrics.coverage}, {"stability", a.metrics.stability}, {"steps", a.metrics.steps}}}};
  if (!a.tileset.is_null()) doc["tileset"] = a.tileset;
  return doc;
}

inline Assembly assembly_from_json(const nlohmann::json& doc) {
  Assembly a;
  try {
    if (doc.at("version").get<int>() != 1) throw Error(ErrorCode::MalformedDocument, "unsupported assembly version");
    a.rank = doc.at("rank").get<int>();
    a.dims = doc.at("dims").get<std::vector<int>>();
    a.cells = doc.at("cells").get<std::vector<int>>();
    a.status = parse_status(doc.at("status").get<std::string>());
    a.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("metrics")) {
      const auto& m = doc.at("metrics");
      a.metrics = {m.at("coverage").get<double>(), m.at("stability").get<double>(), m.at("steps").get<int>()};
    }
    if (doc.contains("tileset")) a.tileset = doc.at("tileset");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedDocument, std::string("assembly: ") + e.what());
  }
  if (static_cast<int>(a.dims.size()) != a.rank)
    throw Error(ErrorCode::MalformedDocument, "assembly dims do not match its rank");
  return a;
}

/// One character per cell: the tile name's initial, '.' when undecided,
/// ' ' for void. The top line is the highest y.
inline std::string render_ascii(const Canvas& canvas) {
  const Lattice& lat = canvas.lattice();
  if (lat.rank() != 2) throw Error(ErrorCode::UnsupportedRank, "ascii rendering needs a rank-2 canvas; use export");
  const Ruleset& rs = canvas.ruleset();
  std::string out;
  for (int y = lat.extent(1) - 1; y >= 0; --y) {
    for (int x = 0; x < lat.extent(0); ++x) {
      TileId t = canvas.cells()[lat.index({x, y, 0})];
      if (t < 0)
        out += '.';
      else if (rs.is_void(t))
        out += ' ';
      else
        out += rs.tile(t).name.empty() ? '?' : rs.tile(t).name.front();
    }
    if (y > 0) out += '\n';
  }
  return out;
}

}  // namespace latticeforge
