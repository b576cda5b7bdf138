#include "fragq/image_ops.hpp"

#include <algorithm>
#include <cmath>

#include "fragq/errors.hpp"

namespace fragq {

std::vector<std::uint8_t> resize_bilinear(std::span<const std::uint8_t> src, int height, int width,
                                          int channels, int out_height, int out_width) {
  if (height < 1 || width < 1 || out_height < 1 || out_width < 1)
    throw ContractError("resize_bilinear: non-positive dimensions");
  if (src.size() != static_cast<std::size_t>(height) * width * channels)
    throw ContractError("resize_bilinear: buffer size does not match dimensions");

  std::vector<std::uint8_t> out(static_cast<std::size_t>(out_height) * out_width * channels);
  if (out_height == height && out_width == width) {
    std::copy(src.begin(), src.end(), out.begin());
    return out;
  }

  // Triangle filter centred on the half-pixel-aligned source coordinate. When
  // shrinking, its support widens by the scale factor so the output is
  // antialiased; when enlarging it reduces to two-tap bilinear interpolation.
  struct Taps {
    std::vector<int> index;
    std::vector<double> weight;
    std::vector<std::size_t> start;  // n + 1 offsets into index/weight
  };
  auto taps = [](int in, int n) {
    Taps t;
    const double scale = static_cast<double>(in) / n;
    const double support = std::max(1.0, scale);
    for (int i = 0; i < n; ++i) {
      t.start.push_back(t.index.size());
      const double centre = (i + 0.5) * scale - 0.5;
      const int lo = static_cast<int>(std::ceil(centre - support)), hi = static_cast<int>(std::floor(centre + support));
      double sum = 0;
      const std::size_t first = t.weight.size();
      for (int j = lo; j <= hi; ++j) {
        const double w = 1.0 - std::abs(j - centre) / support;
        if (w <= 0) continue;
        t.index.push_back(std::clamp(j, 0, in - 1));
        t.weight.push_back(w);
        sum += w;
      }
      for (std::size_t k = first; k < t.weight.size(); ++k) t.weight[k] /= sum;
    }
    t.start.push_back(t.index.size());
    return t;
  };
  const Taps ty = taps(height, out_height);
  const Taps tx = taps(width, out_width);

  // Horizontal pass into doubles, then vertical pass with rounding.
  std::vector<double> rows(static_cast<std::size_t>(height) * out_width * channels, 0.0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < out_width; ++x)
      for (std::size_t k = tx.start[static_cast<std::size_t>(x)]; k < tx.start[static_cast<std::size_t>(x) + 1]; ++k)
        for (int c = 0; c < channels; ++c)
          rows[(static_cast<std::size_t>(y) * out_width + x) * channels + c] +=
              tx.weight[k] * src[(static_cast<std::size_t>(y) * width + tx.index[k]) * channels + c];
  for (int y = 0; y < out_height; ++y)
    for (int x = 0; x < out_width; ++x)
      for (int c = 0; c < channels; ++c) {
        double v = 0;
        for (std::size_t k = ty.start[static_cast<std::size_t>(y)]; k < ty.start[static_cast<std::size_t>(y) + 1]; ++k)
          v += ty.weight[k] * rows[(static_cast<std::size_t>(ty.index[k]) * out_width + x) * channels + c];
        out[(static_cast<std::size_t>(y) * out_width + x) * channels + c] =
            static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
  return out;
}

void gaussian_blur(std::vector<float>& image, int height, int width, int channels, double sigma) {
  if (sigma <= 0) return;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double norm = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    norm += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (auto& k : kernel) k /= norm;

  std::vector<float> tmp(image.size());
  auto idx = [&](int y, int x, int c) {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  };
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) {
        double acc = 0;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[static_cast<std::size_t>(k + radius)] *
                 image[idx(y, std::clamp(x + k, 0, width - 1), c)];
        tmp[idx(y, x, c)] = static_cast<float>(acc);
      }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) {
        double acc = 0;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[static_cast<std::size_t>(k + radius)] *
                 tmp[idx(std::clamp(y + k, 0, height - 1), x, c)];
        image[idx(y, x, c)] = static_cast<float>(acc);
      }
}

}  // namespace fragq
