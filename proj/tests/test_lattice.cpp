#include <gtest/gtest.h>

#include "latticeforge/lattice.hpp"

using namespace latticeforge;

TEST(Direction, OppositeIsAnInvolution) {
  for (int rank : {2, 3}) {
    ASSERT_EQ(direction_count(rank), 2 * rank);
    for (int i = 0; i < direction_count(rank); ++i) {
      Direction d = Direction::from_index(i);
      EXPECT_EQ(d.index(), i);
      EXPECT_EQ(d.opposite().opposite(), d);
      EXPECT_NE(d.opposite(), d);
    }
  }
}

TEST(Direction, ParseRespectsRank) {
  EXPECT_EQ(parse_direction("+x", 2), (Direction{0, +1}));
  EXPECT_EQ(parse_direction("-y", 2), (Direction{1, -1}));
  EXPECT_EQ(parse_direction("-z", 3), (Direction{2, -1}));
  EXPECT_THROW(parse_direction("+z", 2), Error);
  EXPECT_THROW(parse_direction("x", 2), Error);
  EXPECT_THROW(parse_direction("+w", 3), Error);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(parse_direction(direction_name(Direction::from_index(i)), 3).index(), i);
}

TEST(Lattice, IndexCoordRoundTrip) {
  Lattice lat({3, 4, 2});
  ASSERT_EQ(lat.cell_count(), 24u);
  for (std::size_t i = 0; i < lat.cell_count(); ++i) EXPECT_EQ(lat.index(lat.coord(i)), i);
  EXPECT_EQ(lat.index({1, 0, 0}), 1u);
  EXPECT_EQ(lat.index({0, 1, 0}), 3u);
  EXPECT_EQ(lat.index({0, 0, 1}), 12u);
  EXPECT_FALSE(lat.neighbor(0, {0, -1}).has_value());
  EXPECT_EQ(*lat.neighbor(0, {1, +1}), 3u);
}

TEST(Lattice, RejectsBadExtents) {
  try {
    Lattice bad({0, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadDims);
  }
  EXPECT_THROW(Lattice({3}), Error);
  EXPECT_THROW(Lattice({2, 2, 2, 2}), Error);
}

TEST(Dims, Grammar) {
  EXPECT_EQ(parse_dims("8x8"), (std::vector<int>{8, 8}));
  EXPECT_EQ(parse_dims("3x4x5"), (std::vector<int>{3, 4, 5}));
  for (const char* bad : {"8", "8x", "x8", "8y8", "1x2x3x4", "", "-1x2"}) EXPECT_THROW(parse_dims(bad), Error) << bad;
  EXPECT_EQ(format_dims({3, 4, 5}), "3x4x5");
}
