#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace latticeforge {

namespace builtin {

inline constexpr std::string_view kCheckerboard = R"({
  "version": 1, "rank": 2,
  "tiles": [ {"id": 0, "name": "A", "weight": 1.0}, {"id": 1, "name": "B", "weight": 1.0} ],
  "rules": [ {"a": 0, "dir": "+x", "b": 1}, {"a": 1, "dir": "+x", "b": 0},
             {"a": 0, "dir": "+y", "b": 1}, {"a": 1, "dir": "+y", "b": 0} ]
})";

// Straight pipe segments authored with sockets: "p" faces carry a pipe, "n" faces do not.
inline constexpr std::string_view kPipes = R"({
  "version": 1, "rank": 2,
  "tiles": [
    {"id": 0, "name": "empty", "weight": 1.0, "sockets": {"+x": "n", "-x": "n", "+y": "n", "-y": "n"}},
    {"id": 1, "name": "horizontal", "weight": 1.0, "sockets": {"+x": "p", "-x": "p", "+y": "n", "-y": "n"}},
    {"id": 2, "name": "vertical", "weight": 1.0, "sockets": {"+x": "n", "-x": "n", "+y": "p", "-y": "p"}}
  ],
  "socket_compat": [["n", "n"], ["p", "p"]]
})";

// Floor and block go anywhere; void seals the frontier.
inline constexpr std::string_view kMostlyFloor = R"({
  "version": 1, "rank": 2,
  "tiles": [ {"id": 0, "name": "floor", "weight": 1.0}, {"id": 1, "name": "block", "weight": 1.0},
             {"id": 2, "name": "void", "weight": 1.0} ],
  "rules": [ {"a": 0, "dir": "+x", "b": 0}, {"a": 0, "dir": "+x", "b": 1}, {"a": 0, "dir": "+x", "b": 2},
             {"a": 1, "dir": "+x", "b": 0}, {"a": 1, "dir": "+x", "b": 1}, {"a": 1, "dir": "+x", "b": 2},
             {"a": 2, "dir": "+x", "b": 0}, {"a": 2, "dir": "+x", "b": 1}, {"a": 2, "dir": "+x", "b": 2},
             {"a": 0, "dir": "+y", "b": 0}, {"a": 0, "dir": "+y", "b": 1}, {"a": 0, "dir": "+y", "b": 2},
             {"a": 1, "dir": "+y", "b": 0}, {"a": 1, "dir": "+y", "b": 1}, {"a": 1, "dir": "+y", "b": 2},
             {"a": 2, "dir": "+y", "b": 0}, {"a": 2, "dir": "+y", "b": 1}, {"a": 2, "dir": "+y", "b": 2} ],
  "void_tile": 2
})";

// Rows of a single colour; any colour may stack on any other.
inline constexpr std::string_view kStripes = R"({
  "version": 1, "rank": 2,
  "tiles": [ {"id": 0, "name": "red", "weight": 2.0}, {"id": 1, "name": "green", "weight": 1.0} ],
  "rules": [ {"a": 0, "dir": "+x", "b": 0}, {"a": 1, "dir": "+x", "b": 1},
             {"a": 0, "dir": "+y", "b": 0}, {"a": 0, "dir": "+y", "b": 1},
             {"a": 1, "dir": "+y", "b": 0}, {"a": 1, "dir": "+y", "b": 1} ]
})";

// Land must be buffered from water by coast; water is the void filler.
inline constexpr std::string_view kIslands = R"({
  "version": 1, "rank": 2,
  "tiles": [ {"id": 0, "name": "land", "weight": 3.0}, {"id": 1, "name": "coast", "weight": 1.0},
             {"id": 2, "name": "water", "weight": 1.0} ],
  "rules": [ {"a": 0, "dir": "+x", "b": 0}, {"a": 0, "dir": "+x", "b": 1}, {"a": 1, "dir": "+x", "b": 0},
             {"a": 1, "dir": "+x", "b": 1}, {"a": 1, "dir": "+x", "b": 2}, {"a": 2, "dir": "+x", "b": 1},
             {"a": 2, "dir": "+x", "b": 2},
             {"a": 0, "dir": "+y", "b": 0}, {"a": 0, "dir": "+y", "b": 1}, {"a": 1, "dir": "+y", "b": 0},
             {"a": 1, "dir": "+y", "b": 1}, {"a": 1, "dir": "+y", "b": 2}, {"a": 2, "dir": "+y", "b": 1},
             {"a": 2, "dir": "+y", "b": 2} ],
  "void_tile": 2
})";

// Walls rise from the ground and must be capped by a roof; sky only above roofs or sky.
inline constexpr std::string_view kTowers = R"({
  "version": 1, "rank": 2,
  "tiles": [ {"id": 0, "name": "wall", "weight": 2.0}, {"id": 1, "name": "roof", "weight": 1.0},
             {"id": 2, "name": "sky", "weight": 1.0} ],
  "rules": [ {"a": 0, "dir": "+y", "b": 0}, {"a": 0, "dir": "+y", "b": 1}, {"a": 1, "dir": "+y", "b": 2},
             {"a": 2, "dir": "+y", "b": 2},
             {"a": 0, "dir": "+x", "b": 0}, {"a": 0, "dir": "+x", "b": 2}, {"a": 2, "dir": "+x", "b": 0},
             {"a": 1, "dir": "+x", "b": 1}, {"a": 1, "dir": "+x", "b": 2}, {"a": 2, "dir": "+x", "b": 1},
             {"a": 2, "dir": "+x", "b": 2} ]
})";

inline constexpr std::string_view kBlocks3d = R"({
  "version": 1, "rank": 3,
  "tiles": [ {"id": 0, "name": "beam", "weight": 1.0}, {"id": 1, "name": "slab", "weight": 1.0},
             {"id": 2, "name": "void", "weight": 1.0} ],
  "rules": [ {"a": 0, "dir": "+x", "b": 0}, {"a": 0, "dir": "+x", "b": 2}, {"a": 2, "dir": "+x", "b": 0},
             {"a": 1, "dir": "+x", "b": 1}, {"a": 1, "dir": "+x", "b": 2}, {"a": 2, "dir": "+x", "b": 1},
             {"a": 2, "dir": "+x", "b": 2},
             {"a": 0, "dir": "+y", "b": 0}, {"a": 0, "dir": "+y", "b": 1}, {"a": 1, "dir": "+y", "b": 0},
             {"a": 0, "dir": "+y", "b": 2}, {"a": 1, "dir": "+y", "b": 2}, {"a": 2, "dir": "+y", "b": 2},
             {"a": 0, "dir": "+z", "b": 0}, {"a": 1, "dir": "+z", "b": 1}, {"a": 0, "dir": "+z", "b": 2},
             {"a": 1, "dir": "+z", "b": 2}, {"a": 2, "dir": "+z", "b": 0}, {"a": 2, "dir": "+z", "b": 1},
             {"a": 2, "dir": "+z", "b": 2} ],
  "void_tile": 2
})";

struct Entry {
  std::string_view name;
  std::string_view text;
};

inline constexpr Entry kAll[] = {
    {"checkerboard", kCheckerboard}, {"pipes", kPipes},   {"mostly-floor", kMostlyFloor},
    {"stripes", kStripes},           {"islands", kIslands}, {"towers", kTowers},
    {"blocks3d", kBlocks3d},
};

}  // namespace builtin

inline std::optional<std::string> builtin_tileset(std::string_view name) {
  for (const auto& e : builtin::kAll)
    if (e.name == name) return std::string(e.text);
  return std::nullopt;
}

inline std::vector<std::string> builtin_tileset_names() {
  std::vector<std::string> names;
  for (const auto& e : builtin::kAll) names.emplace_back(e.name);
  return names;
}

}  // namespace latticeforge
