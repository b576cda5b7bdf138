#pragma once

#include <cstdint>
#include <vector>

#include "fragq/media.hpp"

namespace fragq {

// Nominal maxima used to normalize degradation magnitudes to [0, 1].
inline constexpr double kNominalMaxBlurSigma = 3.0;   // pixels
inline constexpr double kNominalMaxNoise = 30.0;      // 8-bit levels (std. dev.)
inline constexpr double kNominalMaxShake = 8.0;       // pixels

// Ranges the generator draws each clip's degradation from (uniformly).
struct DistortionProfile {
  int frames = 8;
  int height = 192;
  int width = 192;
  double blur_min = 0.0, blur_max = 2.0;
  double noise_min = 0.0, noise_max = 20.0;
  double shake_min = 0.0, shake_max = 4.0;
  // Fraction of the frame area covered by the (temporally fixed) distorted
  // region. Must stay in (0, 1].
  double coverage_min = 0.6, coverage_max = 1.0;

  // Throws ConfigError on inverted, negative or out-of-nominal ranges.
  void validate() const;
};

struct Degradation {
  double blur_sigma = 0;
  double noise_level = 0;
  double shake_amplitude = 0;
  double coverage = 1;

  bool operator==(const Degradation&) const = default;
};

struct SyntheticLabel {
  double mos = 5.0;
  Degradation degradation;
};

// Pseudo-MOS on a 1..5 scale:
//   mos = 5 - (2.0 * b + 1.4 * n + 0.6 * s), clamped to [1, 5]
//   b = min(1, blur_sigma * coverage / 3), n = min(1, noise * coverage / 30),
//   s = min(1, shake / 8).
// Strictly decreasing in each magnitude while it stays below its nominal
// maximum and coverage > 0.
double synthetic_mos(const Degradation& d);

struct LabeledClip {
  VideoClip clip;
  SyntheticLabel label;
};

// Renders clip `index` of the corpus identified by `seed`. Content (textures,
// shapes, motion) is resolution-relative, so the same (seed, index) rendered
// under profiles that differ only in height/width shows the same scene.
LabeledClip synthesize_clip(std::uint64_t seed, int index, const DistortionProfile& profile);

// n clips, a pure function of (n, seed, profile). source_id = "syn<seed>_<index>".
std::vector<LabeledClip> synthesize_corpus(int n, std::uint64_t seed, const DistortionProfile& profile);

}  // namespace fragq
