#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "catchrel/error.hpp"
#include "catchrel/image.hpp"

namespace catchrel {

inline constexpr double kDefaultBlurThreshold = 100.0;

inline std::vector<double> grayscale(const Image& img) {
  std::vector<double> g(img.pixel_count());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto* p = &img.pixels[i * 3];
    g[i] = (static_cast<double>(p[0]) + p[1] + p[2]) / 3.0;
  }
  return g;
}

/// Variance of the 4-neighbour 3x3 Laplacian over the (R+G+B)/3 image.
/// Borders reflect without repeating the edge (reflect-101). Higher = sharper.
inline double blur_score(const Image& img) {
  if (img.empty()) throw Error(ErrorCode::invalid_argument, "blur_score on a 0x0 image");
  const int w = img.width;
  const int h = img.height;
  const auto g = grayscale(img);
  auto reflect = [](int i, int n) {
    if (n == 1) return 0;
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
  };
  auto at = [&](int x, int y) { return g[static_cast<std::size_t>(reflect(y, h)) * w + reflect(x, w)]; };
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double lap = at(x - 1, y) + at(x + 1, y) + at(x, y - 1) + at(x, y + 1) - 4.0 * at(x, y);
      sum += lap;
      sum_sq += lap * lap;
    }
  }
  const double n = static_cast<double>(img.pixel_count());
  const double mean = sum / n;
  return std::max(0.0, sum_sq / n - mean * mean);
}

/// DCT perceptual hash: 32x32 area-averaged gray, 2-D DCT-II, the 8x8 block
/// of lowest non-DC frequencies thresholded at its median.
inline std::uint64_t perceptual_hash(const Image& img) {
  if (img.empty()) throw Error(ErrorCode::invalid_argument, "perceptual_hash on a 0x0 image");
  constexpr int N = 32;
  const auto g = grayscale(img);
  std::array<double, N * N> small{};
  for (int ty = 0; ty < N; ++ty) {
    const int y0 = ty * img.height / N;
    const int y1 = std::max(y0 + 1, (ty + 1) * img.height / N);
    for (int tx = 0; tx < N; ++tx) {
      const int x0 = tx * img.width / N;
      const int x1 = std::max(x0 + 1, (tx + 1) * img.width / N);
      double acc = 0.0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) acc += g[static_cast<std::size_t>(y) * img.width + x];
      }
      small[ty * N + tx] = acc / ((y1 - y0) * (x1 - x0));
    }
  }
  static const auto basis = [] {
    std::array<double, 9 * N> b{};
    for (int u = 0; u < 9; ++u) {
      for (int x = 0; x < N; ++x) b[u * N + x] = std::cos((2 * x + 1) * u * std::numbers::pi / (2 * N));
    }
    return b;
  }();
  // Rows first: only the first 9 frequencies are ever needed.
  std::array<double, N * 9> rows{};
  for (int y = 0; y < N; ++y) {
    for (int u = 0; u < 9; ++u) {
      double acc = 0.0;
      for (int x = 0; x < N; ++x) acc += small[y * N + x] * basis[u * N + x];
      rows[y * 9 + u] = acc;
    }
  }
  std::array<double, 64> coeffs{};
  for (int v = 1; v < 9; ++v) {
    for (int u = 1; u < 9; ++u) {
      double acc = 0.0;
      for (int y = 0; y < N; ++y) acc += rows[y * 9 + u] * basis[v * N + y];
      // Round away floating-point noise so flat images hash to zero.
      coeffs[(v - 1) * 8 + (u - 1)] = std::round(acc * 1e6) / 1e6;
    }
  }
  auto sorted = coeffs;
  std::nth_element(sorted.begin(), sorted.begin() + 32, sorted.end());
  const double median = sorted[32];
  std::uint64_t h = 0;
  for (int i = 0; i < 64; ++i) {
    if (coeffs[i] > median) h |= std::uint64_t{1} << i;
  }
  return h;
}

inline int hamming_distance(std::uint64_t a, std::uint64_t b) { return std::popcount(a ^ b); }

inline constexpr int kHistogramBins = 8;

/// Per-channel 8-bin histograms (R, G, B concatenated), each normalized to sum 1.
inline std::array<double, 3 * kHistogramBins> color_histogram(const Image& img) {
  std::array<double, 3 * kHistogramBins> hist{};
  if (img.empty()) return hist;
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) hist[c * kHistogramBins + img.pixels[i * 3 + c] / (256 / kHistogramBins)] += 1.0;
  }
  for (auto& v : hist) v /= static_cast<double>(img.pixel_count());
  return hist;
}

}  // namespace catchrel
