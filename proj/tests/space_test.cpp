#include "tsmhpo/space.hpp"

#include <gtest/gtest.h>

#include <set>
#include <string>
#include <vector>

#include "tsmhpo/config.hpp"

namespace {

using namespace tsmhpo;

HyperparameterDef batch_def(int bit_width = 0) {
  return {"batch_size", 8.0, 512.0, 8.0, 256.0, bit_width};
}

HyperparameterDef lr_def() {
  return {"learning_rate", 0.0001, 0.0032, 0.0001, 0.0016, 0};
}

// ---- grid counts ----

TEST(GridCount, PublishedGrids) {
  EXPECT_EQ(grid_count(batch_def()), 64);
  EXPECT_EQ(grid_count({"flag", 0.0, 1.0, 1.0, 1.0, 0}), 2);
  EXPECT_EQ(grid_count({"dense", 32.0, 1024.0, 32.0, 512.0, 0}), 32);
}

TEST(GridCount, MatchesEnumeration) {
  // Independent oracle: walk the grid until passing upper.
  const auto def = lr_def();
  int walked = 0;
  for (double v = def.lower; v <= def.upper + 1e-12; v += def.step) ++walked;
  EXPECT_EQ(grid_count(def), walked);
}

TEST(GridCount, FractionalStepIsExact) {
  EXPECT_EQ(grid_count(lr_def()), 32);
}

// ---- validation ----

TEST(HyperparameterDef, ValidatesInvariants) {
  EXPECT_NO_THROW(batch_def().validate());
  EXPECT_NO_THROW(lr_def().validate());

  auto bad = batch_def();
  bad.step = -1.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);

  bad = batch_def();
  bad.upper = 510.0;  // not a multiple of step above lower
  EXPECT_THROW(bad.validate(), std::invalid_argument);

  bad = batch_def();
  bad.threshold = 250.0;  // off grid
  EXPECT_THROW(bad.validate(), std::invalid_argument);

  bad = batch_def();
  bad.threshold = 8.0;  // threshold must exceed lower
  EXPECT_THROW(bad.validate(), std::invalid_argument);

  bad = batch_def();
  bad.bit_width = 5;  // 64 points need 6 bits
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(SearchSpace, RejectsDuplicateNames) {
  SearchSpace space;
  space.dims = {batch_def(), batch_def()};
  EXPECT_THROW(space.validate(), std::invalid_argument);
}

// ---- encoding ----

TEST(Encode, SevenBitBatchExample) {
  // 64-point grid carried in 7 bits via an explicit width override.
  EXPECT_EQ(encode(batch_def(7), 16.0), "0000001");
}

TEST(Encode, LowerBoundIsAllZeros) {
  EXPECT_EQ(encode(batch_def(), 8.0), "000000");
  EXPECT_EQ(encode(lr_def(), 0.0001), "00000");
}

TEST(Encode, LearningRateTopOfGrid) {
  EXPECT_EQ(encode(lr_def(), 0.0032), "11111");
  // Oracle: the whole grid maps to consecutive binary codes.
  const auto def = lr_def();
  for (int k = 0; k < def.grid_count(); ++k) {
    std::string expected(5, '0');
    for (int b = 0; b < 5; ++b)
      if (k & (1 << (4 - b))) expected[b] = '1';
    EXPECT_EQ(encode(def, def.value_at(k)), expected) << "k=" << k;
  }
}

TEST(Encode, OffGridValueThrows) {
  EXPECT_THROW(encode(batch_def(), 12.0), ValueOffGrid);
  EXPECT_THROW(encode(batch_def(), 4.0), ValueOffGrid);
  EXPECT_THROW(encode(batch_def(), 520.0), ValueOffGrid);
}

// ---- decoding ----

TEST(Decode, SevenBitBatchExample) {
  EXPECT_DOUBLE_EQ(decode(batch_def(7), "0000001"), 16.0);
}

TEST(Decode, AllZerosIsLower) {
  EXPECT_DOUBLE_EQ(decode(batch_def(), "000000"), 8.0);
  EXPECT_DOUBLE_EQ(decode(lr_def(), "00000"), 0.0001);
}

TEST(Decode, OutOfGridCodeThrows) {
  // 2^7 - 1 = 127 points past the 64-point grid.
  EXPECT_THROW(decode(batch_def(7), "1111111"), IndexOutOfGrid);
}

TEST(Codec, BijectiveOnDefaultSpace) {
  // Exhaustive roundtrip over all 64 + 32 + 64 + 32 grid values.
  int checked = 0;
  for (const auto& def : default_search_space().dims) {
    for (int k = 0; k < def.grid_count(); ++k) {
      const double value = def.value_at(k);
      EXPECT_DOUBLE_EQ(decode(def, encode(def, value)), value)
          << def.name << " k=" << k;
      ++checked;
    }
  }
  EXPECT_EQ(checked, 192);
}

// ---- genotypes ----

TEST(Genotype, BitsAlwaysMatchIndices) {
  const SearchSpace space = default_search_space();
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const Genotype g = random_genotype(space, rng);
    EXPECT_EQ(genotype_from_indices(space, g.indices).bits, g.bits);
    EXPECT_EQ(genotype_from_bits(space, g.bits).indices, g.indices);
  }
}

TEST(Genotype, FromBitsClampsOutOfGridFragments) {
  SearchSpace space;
  space.dims = {{"a", 0.0, 2.0, 1.0, 1.0, 0},   // 3 points, 2 bits
                {"b", 0.0, 1.0, 1.0, 1.0, 0}};  // 2 points, 1 bit
  const Genotype g = genotype_from_bits(space, "111");  // "11" = 3 >= 3
  EXPECT_EQ(g.indices, (std::vector<int>{2, 1}));
  EXPECT_EQ(g.bits, "101");  // re-canonicalised after the clamp
}

TEST(Genotype, DegenerateSinglePointGridHasOneGenotype) {
  SearchSpace space;
  space.dims = {{"fixed", 5.0, 5.0, 1.0, 5.0, 0}};
  Rng rng(3);
  const Genotype g = random_genotype(space, rng);
  EXPECT_EQ(g.indices, std::vector<int>{0});
  EXPECT_EQ(random_genotype(space, rng).bits, g.bits);
}

TEST(RandomGenotype, DeterministicUnderSeed) {
  const SearchSpace space = default_search_space();
  Rng rng_a(42);
  Rng rng_b(42);
  for (int i = 0; i < 20; ++i)
    EXPECT_EQ(random_genotype(space, rng_a).bits,
              random_genotype(space, rng_b).bits);
}

TEST(RandomGenotype, UniformOverTwoValueDimension) {
  SearchSpace space;
  space.dims = {{"flag", 0.0, 1.0, 1.0, 1.0, 0}};
  Rng rng(11);
  const int draws = 100000;
  int ones = 0;
  for (int i = 0; i < draws; ++i) ones += random_genotype(space, rng).indices[0];
  EXPECT_NEAR(static_cast<double>(ones) / draws, 0.5, 0.01);
}

// ---- subspace geometry ----

TEST(SubspaceRanges, BatchDimensionSplit) {
  SearchSpace space;
  space.dims = {batch_def()};
  const auto left = subspace_ranges(space, {0});
  EXPECT_DOUBLE_EQ(left[0].low, 8.0);
  EXPECT_DOUBLE_EQ(left[0].high, 248.0);  // largest grid point below 256
  const auto right = subspace_ranges(space, {1});
  EXPECT_DOUBLE_EQ(right[0].low, 256.0);
  EXPECT_DOUBLE_EQ(right[0].high, 512.0);
}

TEST(SubspaceRanges, SinglePointLeftRange) {
  SearchSpace space;
  space.dims = {{"a", 0.0, 3.0, 1.0, 1.0, 0}};  // threshold = lower + step
  const auto left = subspace_ranges(space, {0});
  EXPECT_DOUBLE_EQ(left[0].low, 0.0);
  EXPECT_DOUBLE_EQ(left[0].high, 0.0);
}

TEST(SubspacePartition, MiniSpaceTilesExactly) {
  // 2x2x2x2 space: the 16 subspaces must cover every grid point once.
  SearchSpace space;
  space.dims = {{"a", 0.0, 1.0, 1.0, 1.0, 0},
                {"b", 0.0, 1.0, 1.0, 1.0, 0},
                {"c", 0.0, 1.0, 1.0, 1.0, 0},
                {"d", 0.0, 1.0, 1.0, 1.0, 0}};
  space.validate();

  for (int point = 0; point < 16; ++point) {
    std::vector<int> indices = {(point >> 3) & 1, (point >> 2) & 1,
                                (point >> 1) & 1, point & 1};
    int containing = 0;
    for (int leaf = 0; leaf < 16; ++leaf) {
      std::vector<std::uint8_t> path = {
          static_cast<std::uint8_t>((leaf >> 3) & 1),
          static_cast<std::uint8_t>((leaf >> 2) & 1),
          static_cast<std::uint8_t>((leaf >> 1) & 1),
          static_cast<std::uint8_t>(leaf & 1)};
      const auto ranges = subspace_ranges(space, path);
      bool inside = true;
      for (int d = 0; d < 4; ++d) {
        const double value = space.dims[d].value_at(indices[d]);
        inside = inside && value >= ranges[d].low && value <= ranges[d].high;
      }
      if (inside) ++containing;
    }
    EXPECT_EQ(containing, 1) << "grid point " << point;
  }
}

}  // namespace
