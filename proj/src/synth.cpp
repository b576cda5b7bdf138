#include "fragq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fragq/errors.hpp"
#include "fragq/image_ops.hpp"
#include "fragq/rng.hpp"

namespace fragq {
namespace {

constexpr double kReferenceSide = 192.0;
constexpr double kContentSoftening = 2.0;  // Gaussian sigma, reference pixels

void check_range(const char* name, double lo, double hi, double nominal_max) {
  if (!(lo >= 0.0) || !(hi >= lo) || hi > nominal_max)
    throw ConfigError(std::string("profile range ") + name + " must satisfy 0 <= min <= max <= " +
                      std::to_string(nominal_max));
}

struct Grating {
  double kx, ky, phase, amplitude;
  double color[3];
};

struct Shape {
  bool ellipse;
  double cy, cx, ry, rx;  // normalized to [0, 1]
  double color[3];
};

bool inside(const Shape& s, double v, double u) {
  const double dy = (v - s.cy) / s.ry;
  const double dx = (u - s.cx) / s.rx;
  if (s.ellipse) return dx * dx + dy * dy <= 1.0;
  return std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
}

}  // namespace

void DistortionProfile::validate() const {
  if (frames < 1 || height < 8 || width < 8)
    throw ConfigError("profile needs frames >= 1 and height, width >= 8");
  check_range("blur", blur_min, blur_max, kNominalMaxBlurSigma);
  check_range("noise", noise_min, noise_max, kNominalMaxNoise);
  check_range("shake", shake_min, shake_max, kNominalMaxShake);
  if (!(coverage_min > 0.0) || !(coverage_max >= coverage_min) || coverage_max > 1.0)
    throw ConfigError("profile coverage must satisfy 0 < min <= max <= 1");
}

double synthetic_mos(const Degradation& d) {
  const double b = std::min(1.0, d.blur_sigma * d.coverage / kNominalMaxBlurSigma);
  const double n = std::min(1.0, d.noise_level * d.coverage / kNominalMaxNoise);
  const double s = std::min(1.0, d.shake_amplitude / kNominalMaxShake);
  return std::clamp(5.0 - (2.0 * b + 1.4 * n + 0.6 * s), 1.0, 5.0);
}

LabeledClip synthesize_clip(std::uint64_t seed, int index, const DistortionProfile& profile) {
  profile.validate();
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(index)));

  Degradation deg;
  deg.blur_sigma = rng.uniform(profile.blur_min, profile.blur_max);
  deg.noise_level = rng.uniform(profile.noise_min, profile.noise_max);
  deg.shake_amplitude = rng.uniform(profile.shake_min, profile.shake_max);
  deg.coverage = rng.uniform(profile.coverage_min, profile.coverage_max);

  // Scene description, independent of the output resolution. Smooth shading
  // and flat shapes carry the content; a band of fine grey gratings covers
  // the whole frame with steady high-frequency energy, so blur and noise are
  // visible in any mini-patch rather than only near edges.
  double background[3];
  for (double& b : background) b = rng.uniform(90.0, 166.0);
  std::vector<Grating> gratings(2);
  for (auto& g : gratings) {
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double freq = rng.uniform(0.005, 0.02);  // cycles per reference pixel
    g.kx = 2 * std::numbers::pi * freq * std::cos(angle);
    g.ky = 2 * std::numbers::pi * freq * std::sin(angle);
    g.phase = rng.uniform(0.0, 2 * std::numbers::pi);
    g.amplitude = rng.uniform(6.0, 12.0);
    for (double& c : g.color) c = rng.uniform(0.5, 1.0);
  }
  std::vector<Grating> texture(3);
  for (auto& g : texture) {
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double freq = rng.uniform(0.15, 0.3);
    g.kx = 2 * std::numbers::pi * freq * std::cos(angle);
    g.ky = 2 * std::numbers::pi * freq * std::sin(angle);
    g.phase = rng.uniform(0.0, 2 * std::numbers::pi);
    g.amplitude = rng.uniform(9.0, 11.0);
    for (double& c : g.color) c = 1.0;
  }
  std::vector<Shape> shapes(8);
  for (auto& s : shapes) {
    s.ellipse = rng.uniform() < 0.5;
    s.cy = rng.uniform(0.0, 1.0);
    s.cx = rng.uniform(0.0, 1.0);
    s.ry = rng.uniform(0.05, 0.22);
    s.rx = rng.uniform(0.05, 0.22);
    for (double& c : s.color) c = rng.uniform(70.0, 186.0);
  }
  const double vel_y = rng.uniform(-1.0, 1.0);  // reference pixels per frame
  const double vel_x = rng.uniform(-1.0, 1.0);

  const int T = profile.frames, H = profile.height, W = profile.width, C = 3;
  const double to_ref = kReferenceSide / std::min(H, W);

  std::vector<int> dy(static_cast<std::size_t>(T)), dx(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const double jy = std::round(deg.shake_amplitude * rng.uniform(-1.0, 1.0));
    const double jx = std::round(deg.shake_amplitude * rng.uniform(-1.0, 1.0));
    dy[static_cast<std::size_t>(t)] = static_cast<int>(std::lround(vel_y * t / to_ref + jy));
    dx[static_cast<std::size_t>(t)] = static_cast<int>(std::lround(vel_x * t / to_ref + jx));
  }
  const int margin = static_cast<int>(std::ceil((T - 1) / to_ref + kNominalMaxShake)) + 2;

  const double cov_side = std::sqrt(deg.coverage);
  const int rh = std::clamp(static_cast<int>(std::lround(H * cov_side)), 1, H);
  const int rw = std::clamp(static_cast<int>(std::lround(W * cov_side)), 1, W);
  const int ry0 = static_cast<int>(rng.uniform_int(0, H - rh));
  const int rx0 = static_cast<int>(rng.uniform_int(0, W - rw));

  // Canvas with a margin so motion and shake never sample outside it. Shapes
  // are drawn hard-edged and then softened, so edge energy does not compete
  // with the texture band.
  const int CH = H + 2 * margin, CW = W + 2 * margin;
  std::vector<float> canvas(static_cast<std::size_t>(CH) * CW * C);
  for (int y = 0; y < CH; ++y) {
    const double y_ref = (y - margin) * to_ref;
    const double v = (y - margin + 0.5) / H;
    for (int x = 0; x < CW; ++x) {
      const double x_ref = (x - margin) * to_ref;
      const double u = (x - margin + 0.5) / W;
      double px[3] = {background[0], background[1], background[2]};
      for (const auto& g : gratings) {
        const double s = g.amplitude * std::sin(g.kx * x_ref + g.ky * y_ref + g.phase);
        for (int c = 0; c < C; ++c) px[c] += g.color[c] * s;
      }
      for (const auto& sh : shapes)
        if (inside(sh, v, u))
          for (int c = 0; c < C; ++c) px[c] = sh.color[c];
      for (int c = 0; c < C; ++c) canvas[(static_cast<std::size_t>(y) * CW + x) * C + c] = static_cast<float>(px[c]);
    }
  }
  gaussian_blur(canvas, CH, CW, C, kContentSoftening / to_ref);
  for (int y = 0; y < CH; ++y) {
    const double y_ref = (y - margin) * to_ref;
    for (int x = 0; x < CW; ++x) {
      const double x_ref = (x - margin) * to_ref;
      double s = 0;
      for (const auto& g : texture) s += g.amplitude * std::sin(g.kx * x_ref + g.ky * y_ref + g.phase);
      for (int c = 0; c < C; ++c) {
        float& p = canvas[(static_cast<std::size_t>(y) * CW + x) * C + c];
        p = static_cast<float>(std::clamp(p + s, 0.0, 255.0));
      }
    }
  }

  LabeledClip out;
  out.clip = VideoClip(T, H, W, C, "syn" + std::to_string(seed) + "_" + std::to_string(index));
  out.label.degradation = deg;
  out.label.mos = synthetic_mos(deg);

  std::vector<float> frame(static_cast<std::size_t>(H) * W * C);
  for (int t = 0; t < T; ++t) {
    const int oy = margin + dy[static_cast<std::size_t>(t)];
    const int ox = margin + dx[static_cast<std::size_t>(t)];
    for (int y = 0; y < H; ++y)
      std::copy_n(&canvas[(static_cast<std::size_t>(y + oy) * CW + ox) * C],
                  static_cast<std::size_t>(W) * C, &frame[static_cast<std::size_t>(y) * W * C]);
    std::vector<float> blurred = frame;
    gaussian_blur(blurred, H, W, C, deg.blur_sigma);
    auto dst = out.clip.frame(t);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const bool in_region = y >= ry0 && y < ry0 + rh && x >= rx0 && x < rx0 + rw;
        for (int c = 0; c < C; ++c) {
          const std::size_t i = (static_cast<std::size_t>(y) * W + x) * C + c;
          double val = frame[i];
          if (in_region) val = blurred[i] + deg.noise_level * rng.normal();
          dst[i] = static_cast<std::uint8_t>(std::clamp(std::floor(val + 0.5), 0.0, 255.0));
        }
      }
  }
  return out;
}

std::vector<LabeledClip> synthesize_corpus(int n, std::uint64_t seed, const DistortionProfile& profile) {
  if (n < 1) throw ConfigError("corpus size must be >= 1");
  profile.validate();
  std::vector<LabeledClip> corpus;
  corpus.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) corpus.push_back(synthesize_clip(seed, i, profile));
  return corpus;
}

}  // namespace fragq
