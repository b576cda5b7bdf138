#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "fragq/errors.hpp"
#include "fragq/image_ops.hpp"
#include "fragq/sampling.hpp"
#include "gms_properties.hpp"
#include "test_util.hpp"

using namespace fragq;
using fragq::test::random_clip;

TEST(Sampling, PartitionIsFlooredAndTiles) {
  const auto r = partition_grids(10, 7, 3);
  ASSERT_EQ(r.size(), 9u);
  EXPECT_EQ(r[0], (Rect{0, 3, 0, 2}));
  EXPECT_EQ(r[8], (Rect{6, 10, 4, 7}));
  EXPECT_EQ(test::check_tiling(r, 10, 7), "");
  EXPECT_THROW(partition_grids(4, 4, 5), PartitionError);
  EXPECT_THROW(partition_grids(4, 4, 0), PartitionError);
}

TEST(Sampling, GmsPropertiesOnRandomConfigs) {
  Rng rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    const GridSpec spec{static_cast<int>(rng.uniform_int(1, 4)), static_cast<int>(rng.uniform_int(1, 12)),
                        static_cast<int>(rng.uniform_int(1, 4))};
    const int h = spec.side() + static_cast<int>(rng.uniform_int(0, 30));
    const int w = spec.side() + static_cast<int>(rng.uniform_int(0, 30));
    const VideoClip clip = random_clip(spec.frames, h, w, static_cast<int>(rng.uniform_int(1, 3)), rng.next());
    const auto b = sample_gms(clip, spec, rng.next());
    EXPECT_EQ(test::check_gms(clip, spec, b), "") << "G=" << spec.grids << " S=" << spec.patch << " " << h << "x" << w;
  }
}

TEST(Sampling, IdentityWhenFrameEqualsFragment) {
  const GridSpec spec{3, 8, 2};
  const VideoClip clip = random_clip(2, 24, 24, 3, 4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) EXPECT_EQ(sample_gms(clip, spec, seed).data, clip.pixels);
}

TEST(Sampling, SeedDeterminesPlan) {
  const GridSpec spec{2, 8, 1};
  const VideoClip clip = random_clip(1, 64, 64, 1, 1);
  EXPECT_EQ(sample_gms(clip, spec, 5), sample_gms(clip, spec, 5));
  std::set<std::vector<std::uint8_t>> distinct;
  for (std::uint64_t s = 0; s < 8; ++s) distinct.insert(sample_gms(clip, spec, s).data);
  EXPECT_GT(distinct.size(), 1u);
}

TEST(Sampling, InfeasibleUnlessUpscaled) {
  const GridSpec spec{2, 16, 1};
  const VideoClip clip = random_clip(1, 20, 40, 3, 2);
  EXPECT_THROW(sample_gms(clip, spec, 0), InfeasibleError);
  const auto b = sample_gms(clip, spec, 0, SamplerOptions{true});
  EXPECT_EQ(b.side, 32);
  EXPECT_EQ(b.plan.frame_height, 32);
  EXPECT_EQ(b.plan.frame_width, 64);
}

TEST(Sampling, FrameCountMustMatch) {
  EXPECT_THROW(sample_gms(random_clip(3, 32, 32, 1, 0), GridSpec{2, 8, 4}, 0), ContractError);
  EXPECT_THROW(GridSpec({0, 8, 4}).validate(), ConfigError);
}

TEST(Sampling, UnalignedVariesOverTime) {
  const GridSpec spec{2, 4, 6};
  const VideoClip clip = random_clip(6, 64, 64, 1, 8);
  const auto b = variant_unaligned(clip, spec, 3);
  EXPECT_FALSE(b.plan.temporally_aligned);
  bool differs = false;
  for (int t = 1; t < 6; ++t) differs |= b.plan.source_rect(t, 0) != b.plan.source_rect(0, 0);
  EXPECT_TRUE(differs);
  for (int t = 0; t < 6; ++t)
    for (int k = 0; k < 4; ++k) {
      const Rect s = b.plan.source_rect(t, k), g = b.plan.grid_bounds[static_cast<std::size_t>(k)];
      EXPECT_TRUE(s.row0 >= g.row0 && s.row1 <= g.row1 && s.col0 >= g.col0 && s.col1 <= g.col1);
    }
}

TEST(Sampling, ShuffledIsPermutationOfGms) {
  const GridSpec spec{3, 4, 2};
  const VideoClip clip = random_clip(2, 40, 40, 3, 6);
  const auto g = sample_gms(clip, spec, 7);
  const auto s = variant_shuffled(clip, spec, 7);
  EXPECT_EQ(s.variant, Variant::shuffled);
  std::multiset<std::uint8_t> a(g.data.begin(), g.data.end()), b(s.data.begin(), s.data.end());
  EXPECT_EQ(a, b);
  for (int p = 0; p < 9; ++p) {
    const Rect src = s.plan.spliced_source_rect(0, p);
    EXPECT_EQ(s.at(1, (p / 3) * 4, (p % 3) * 4, 2), clip.at(1, src.row0, src.col0, 2));
  }
  EXPECT_THROW(shuffle_fragments(g, {0, 0, 1, 2, 3, 4, 5, 6, 7}), ContractError);
}

TEST(Sampling, SeededPermutationIsPermutation) {
  for (int n : {0, 1, 5, 49}) {
    auto p = seeded_permutation(n, 17);
    std::sort(p.begin(), p.end());
    for (int i = 0; i < n; ++i) EXPECT_EQ(p[static_cast<std::size_t>(i)], i);
  }
}

TEST(Sampling, OtherVariantsShapes) {
  const GridSpec spec{2, 8, 2};
  const VideoClip clip = random_clip(2, 40, 50, 3, 12);
  for (Variant v : all_variants()) {
    const auto b = sample(clip, spec, v, 1);
    EXPECT_EQ(b.side, 16) << variant_name(v);
    EXPECT_EQ(b.frames, 2);
    EXPECT_EQ(b.variant, v);
    EXPECT_EQ(parse_variant(variant_name(v)), v);
  }
  EXPECT_THROW(parse_variant("nope"), ConfigError);
  EXPECT_TRUE(sample(clip, spec, Variant::resize, 0).plan.empty());
}

TEST(Sampling, RandomMinipatchesStayInFrame) {
  const GridSpec spec{3, 5, 1};
  const VideoClip clip = random_clip(1, 30, 31, 1, 2);
  const auto b = variant_random_minipatches(clip, spec, 4);
  for (int k = 0; k < 9; ++k) {
    const Rect s = b.plan.source_rect(0, k);
    EXPECT_TRUE(s.row0 >= 0 && s.row1 <= 30 && s.col0 >= 0 && s.col1 <= 31);
    EXPECT_EQ(b.at(0, (k / 3) * 5, (k % 3) * 5, 0), clip.at(0, s.row0, s.col0, 0));
  }
}

TEST(FragmentIo, RoundTripEveryVariant) {
  const GridSpec spec{2, 6, 3};
  const VideoClip clip = random_clip(3, 30, 30, 3, 1);
  for (Variant v : all_variants()) {
    const auto b = sample(clip, spec, v, 9);
    std::stringstream ss;
    write_fragments(ss, b);
    EXPECT_EQ(read_fragments(ss), b) << variant_name(v);
  }
}

TEST(FragmentIo, RejectsCorruptInput) {
  const auto b = sample_gms(random_clip(1, 16, 16, 1, 1), GridSpec{2, 4, 1}, 0);
  std::stringstream ss;
  write_fragments(ss, b);
  std::string bytes = ss.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(read_fragments(truncated), DecodeError);
  bytes[0] = 'X';
  std::stringstream bad(bytes);
  EXPECT_THROW(read_fragments(bad), DecodeError);
}

TEST(Resize, CopyUpscaleAndAntialiasedShrink) {
  const std::vector<std::uint8_t> src{0, 100, 200, 50};  // 2x2 grey
  EXPECT_EQ(resize_bilinear(src, 2, 2, 1, 2, 2), src);
  // 2 -> 4 along x: source coords -0.25, 0.25, 0.75, 1.25.
  const std::vector<std::uint8_t> row{0, 100};
  EXPECT_EQ(resize_bilinear(row, 1, 2, 1, 1, 4), (std::vector<std::uint8_t>{0, 25, 75, 100}));
  // A column-alternating 0/255 pattern shrunk 3x averages out instead of
  // aliasing to one of the two levels.
  std::vector<std::uint8_t> stripes(6 * 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) stripes[static_cast<std::size_t>(y * 6 + x)] = x % 2 ? 255 : 0;
  for (std::uint8_t v : resize_bilinear(stripes, 6, 6, 1, 2, 2)) {
    EXPECT_GT(v, 80);
    EXPECT_LT(v, 175);
  }
  const std::vector<std::uint8_t> flat(9 * 9 * 3, 77);
  for (std::uint8_t v : resize_bilinear(flat, 9, 9, 3, 4, 2)) EXPECT_EQ(v, 77);
  EXPECT_THROW(resize_bilinear(src, 2, 3, 1, 1, 1), ContractError);
}
