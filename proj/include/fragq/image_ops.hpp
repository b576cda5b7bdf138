#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fragq {

// Bilinear resize of one interleaved 8-bit frame, half-pixel-centre sampling
// (source coordinate = (dst + 0.5) * in/out - 0.5, edge pixels replicated),
// rounded half up. Shrinking is antialiased: the triangle kernel is widened
// by the scale factor, as in common image libraries. Same-size resizing is an
// exact copy.
std::vector<std::uint8_t> resize_bilinear(std::span<const std::uint8_t> src, int height, int width,
                                          int channels, int out_height, int out_width);

// Separable Gaussian blur of an interleaved float image, in place.
// Kernel radius ceil(3 sigma), replicate-edge boundary. No-op for sigma <= 0.
void gaussian_blur(std::vector<float>& image, int height, int width, int channels, double sigma);

}  // namespace fragq
