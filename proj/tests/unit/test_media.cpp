#include <gtest/gtest.h>

#include <fstream>

#include "fragq/errors.hpp"
#include "fragq/manifest.hpp"
#include "fragq/media.hpp"
#include "fragq/synth.hpp"
#include "test_util.hpp"

using namespace fragq;
using fragq::test::random_clip;
using fragq::test::TempDir;

TEST(Media, ClipRoundTrip) {
  TempDir dir("media_rt");
  VideoClip clip = random_clip(3, 5, 7, 3, 1, "abc");
  clip.fps = 24;
  save_clip(dir / "abc.fvc", clip);
  const VideoClip back = load_clip(dir / "abc.fvc");
  EXPECT_EQ(back.pixels, clip.pixels);
  EXPECT_EQ(back.frames, 3);
  EXPECT_EQ(back.height, 5);
  EXPECT_EQ(back.width, 7);
  EXPECT_DOUBLE_EQ(back.fps, 24);
}

TEST(Media, DecodeErrors) {
  TempDir dir("media_err");
  EXPECT_THROW(load_clip(dir / "missing.fvc"), DecodeError);
  std::ofstream(dir / "junk.fvc") << "not a clip";
  EXPECT_THROW(load_clip(dir / "junk.fvc"), DecodeError);
  save_clip(dir / "ok.fvc", random_clip(2, 4, 4, 1, 0));
  std::filesystem::resize_file(dir / "ok.fvc", std::filesystem::file_size(dir / "ok.fvc") - 3);
  EXPECT_THROW(load_clip(dir / "ok.fvc"), DecodeError);
  std::ofstream(dir / "empty.y4m") << "YUV4MPEG2 W4 H2 F25:1 Cmono\n";
  EXPECT_THROW(load_clip(dir / "empty.y4m"), EmptyClipError);
}

TEST(Media, Y4mGreyAnd444) {
  TempDir dir("media_y4m");
  {
    std::ofstream os(dir / "g.y4m", std::ios::binary);
    os << "YUV4MPEG2 W3 H2 F30000:1001 Cmono\nFRAME\n";
    const char y[6] = {0, 10, 20, 30, 40, 50};
    os.write(y, 6);
    os << "FRAME\n";
    os.write(y, 6);
  }
  const VideoClip g = load_clip(dir / "g.y4m");
  EXPECT_EQ(g.frames, 2);
  EXPECT_EQ(g.channels, 3);
  EXPECT_NEAR(g.fps, 29.97, 1e-2);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(g.at(1, 1, 2, c), 50);
  {
    std::ofstream os(dir / "c.y4m", std::ios::binary);
    os << "YUV4MPEG2 W1 H1 C444\nFRAME\n";
    const unsigned char yuv[3] = {100, 128, 200};
    os.write(reinterpret_cast<const char*>(yuv), 3);
  }
  const VideoClip c = load_clip(dir / "c.y4m");
  EXPECT_EQ(c.at(0, 0, 0, 0), 201);  // 100 + 1.402 * 72 = 200.9
  EXPECT_EQ(c.at(0, 0, 0, 2), 100);
}

TEST(Media, FrameIndicesSpanTheClip) {
  EXPECT_EQ(frame_indices(10, 1), (std::vector<int>{0}));
  EXPECT_EQ(frame_indices(9, 3), (std::vector<int>{0, 4, 8}));
  EXPECT_EQ(frame_indices(2, 4), (std::vector<int>{0, 0, 1, 1}));
  EXPECT_EQ(frame_indices(3, 5), (std::vector<int>{0, 1, 1, 2, 2}));  // 0.5 and 1.5 round up
  EXPECT_THROW(frame_indices(0, 2), EmptyClipError);
  const VideoClip clip = random_clip(9, 2, 2, 1, 3);
  const VideoClip s = select_frames(clip, 3);
  EXPECT_EQ(s.frames, 3);
  EXPECT_EQ(s.at(2, 1, 1, 0), clip.at(8, 1, 1, 0));
}

TEST(Manifest, RoundTripAndResolve) {
  TempDir dir("manifest");
  Manifest m;
  m.entries = {{"a.fvc", 3.25, "train"}, {"/abs/b.fvc", 0.1 + 0.2, "test"}};
  write_manifest(dir / "m.tsv", m);
  const Manifest back = read_manifest(dir / "m.tsv");
  EXPECT_EQ(back.entries, m.entries);
  EXPECT_EQ(back.resolve(back.entries[0]), dir / "a.fvc");
  EXPECT_EQ(back.resolve(back.entries[1]), "/abs/b.fvc");
  EXPECT_EQ(back.split("test").size(), 1u);
  std::ofstream(dir / "bad.tsv") << "# fragq-manifest v1\na.fvc\tfive\ttrain\n";
  EXPECT_THROW(read_manifest(dir / "bad.tsv"), DecodeError);
  std::ofstream(dir / "nohdr.tsv") << "a.fvc\t1\ttrain\n";
  EXPECT_THROW(read_manifest(dir / "nohdr.tsv"), DecodeError);
}

TEST(Manifest, SplitsAreStableAndProportional) {
  std::vector<std::string> ids;
  for (int i = 0; i < 100; ++i) ids.push_back("v" + std::to_string(i));
  const auto s = assign_splits(ids);
  EXPECT_EQ(std::count(s.begin(), s.end(), "train"), 60);
  EXPECT_EQ(std::count(s.begin(), s.end(), "val"), 20);
  EXPECT_EQ(std::count(s.begin(), s.end(), "test"), 20);
  // A video's split does not depend on input order.
  std::vector<std::string> rev(ids.rbegin(), ids.rend());
  const auto r = assign_splits(rev);
  for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(s[i], r[ids.size() - 1 - i]);
  EXPECT_THROW(assign_splits(ids, {0.9, 0.2}), ConfigError);
}

TEST(Synth, DeterministicAndLabelled) {
  DistortionProfile p;
  p.frames = 2;
  p.height = 32;
  p.width = 40;
  const auto a = synthesize_clip(4, 1, p), b = synthesize_clip(4, 1, p);
  EXPECT_EQ(a.clip.pixels, b.clip.pixels);
  EXPECT_EQ(a.label.degradation, b.label.degradation);
  EXPECT_NE(synthesize_clip(4, 2, p).clip.pixels, a.clip.pixels);
  EXPECT_EQ(a.clip.height, 32);
  EXPECT_EQ(a.clip.width, 40);
  EXPECT_DOUBLE_EQ(a.label.mos, synthetic_mos(a.label.degradation));
}

TEST(Synth, MosIsMonotoneInEachDistortion) {
  Degradation d{1.0, 5.0, 1.0, 0.8};
  const double base = synthetic_mos(d);
  EXPECT_DOUBLE_EQ(synthetic_mos(Degradation{}), 5.0);
  EXPECT_LT(synthetic_mos({2.0, 5.0, 1.0, 0.8}), base);
  EXPECT_LT(synthetic_mos({1.0, 10.0, 1.0, 0.8}), base);
  EXPECT_LT(synthetic_mos({1.0, 5.0, 2.0, 0.8}), base);
  EXPECT_GE(synthetic_mos({3, 30, 8, 1}), 1.0);
}

TEST(Synth, ProfileValidation) {
  DistortionProfile p;
  p.blur_max = 10;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.coverage_min = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_THROW(synthesize_corpus(0, 1, {}), ConfigError);
}

TEST(Synth, CleanClipHasNoNoise) {
  DistortionProfile p;
  p.frames = 1;
  p.height = p.width = 48;
  p.blur_max = p.noise_max = p.shake_max = 0;
  const auto a = synthesize_clip(0, 0, p);
  EXPECT_DOUBLE_EQ(a.label.mos, 5.0);
}
