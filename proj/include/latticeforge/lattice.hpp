#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "latticeforge/error.hpp"

namespace latticeforge {

inline constexpr int kMaxRank = 3;

/// One of the 2d axis-aligned directions of a d-dimensional lattice.
struct Direction {
  int axis = 0;
  int sign = +1;

  constexpr Direction opposite() const { return {axis, -sign}; }

  /// Dense index in [0, 2d): +x, -x, +y, -y, +z, -z.
  constexpr int index() const { return 2 * axis + (sign > 0 ? 0 : 1); }
  static constexpr Direction from_index(int i) { return {i / 2, (i % 2 == 0) ? +1 : -1}; }

  friend constexpr bool operator==(Direction, Direction) = default;
};

constexpr int direction_count(int rank) { return 2 * rank; }

inline std::string direction_name(Direction d) {
  std::string name(1, d.sign > 0 ? '+' : '-');
  name += static_cast<char>('x' + d.axis);
  return name;
}

/// Parses "+x" ... "-z"; directions whose axis is not below `rank` are rejected.
inline Direction parse_direction(std::string_view name, int rank) {
  if (name.size() == 2 && (name[0] == '+' || name[0] == '-') && name[1] >= 'x' && name[1] <= 'z') {
    Direction d{name[1] - 'x', name[0] == '+' ? +1 : -1};
    if (d.axis < rank) return d;
  }
  throw Error(ErrorCode::BadDirection,
              "direction '" + std::string(name) + "' is not valid for rank " + std::to_string(rank));
}

using Coord = std::array<int, kMaxRank>;

/// Rectangular lattice of rank 2 or 3. Cells are addressed by a flat
/// row-major index with x varying fastest, then y, then z.
class Lattice {
 public:
  Lattice() = default;

  explicit Lattice(std::vector<int> extents) : rank_(static_cast<int>(extents.size())) {
    if (rank_ < 2 || rank_ > kMaxRank)
      throw Error(ErrorCode::BadDims, "lattice rank must be 2 or 3, got " + std::to_string(rank_));
    cell_count_ = 1;
    for (int a = 0; a < rank_; ++a) {
      if (extents[a] < 1) throw Error(ErrorCode::BadDims, "every extent must be at least 1");
      extent_[a] = extents[a];
      cell_count_ *= static_cast<std::size_t>(extents[a]);
    }
  }

  int rank() const { return rank_; }
  int extent(int axis) const { return extent_[axis]; }
  std::vector<int> extents() const { return {extent_.begin(), extent_.begin() + rank_}; }
  std::size_t cell_count() const { return cell_count_; }

  bool contains(const Coord& c) const {
    for (int a = 0; a < rank_; ++a)
      if (c[a] < 0 || c[a] >= extent_[a]) return false;
    for (int a = rank_; a < kMaxRank; ++a)
      if (c[a] != 0) return false;
    return true;
  }

  std::size_t index(const Coord& c) const {
    std::size_t i = 0;
    for (int a = rank_ - 1; a >= 0; --a) i = i * static_cast<std::size_t>(extent_[a]) + static_cast<std::size_t>(c[a]);
    return i;
  }

  Coord coord(std::size_t i) const {
    Coord c{0, 0, 0};
    for (int a = 0; a < rank_; ++a) {
      c[a] = static_cast<int>(i % static_cast<std::size_t>(extent_[a]));
      i /= static_cast<std::size_t>(extent_[a]);
    }
    return c;
  }

  std::optional<std::size_t> neighbor(std::size_t i, Direction d) const {
    Coord c = coord(i);
    c[d.axis] += d.sign;
    if (c[d.axis] < 0 || c[d.axis] >= extent_[d.axis]) return std::nullopt;
    return index(c);
  }

  Coord center() const {
    Coord c{0, 0, 0};
    for (int a = 0; a < rank_; ++a) c[a] = extent_[a] / 2;
    return c;
  }

  friend bool operator==(const Lattice&, const Lattice&) = default;

 private:
  int rank_ = 2;
  std::array<int, kMaxRank> extent_{1, 1, 1};
  std::size_t cell_count_ = 1;
};

/// Parses the `WxH` / `WxHxD` grammar.
inline std::vector<int> parse_dims(std::string_view text) {
  std::vector<int> dims;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('x', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view part = text.substr(start, end - start);
    if (part.empty() || part.size() > 9)
      throw Error(ErrorCode::BadDims, "cannot parse dims '" + std::string(text) + "'");
    int value = 0;
    for (char ch : part) {
      if (ch < '0' || ch > '9') throw Error(ErrorCode::BadDims, "cannot parse dims '" + std::string(text) + "'");
      value = value * 10 + (ch - '0');
    }
    dims.push_back(value);
    start = end + 1;
  }
  if (dims.size() < 2 || dims.size() > 3)
    throw Error(ErrorCode::BadDims, "dims must be WxH or WxHxD, got '" + std::string(text) + "'");
  return dims;
}

inline std::string format_dims(const std::vector<int>& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(dims[i]);
  }
  return out;
}

}  // namespace latticeforge
