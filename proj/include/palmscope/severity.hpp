// Infestation-progression scoring: instance crop segmentation, HSV-driven
// three-color quantization, seeded Lloyd clustering, and the green/brown
// percentage report per leaflet.
#pragma once

#include "palmscope/image.hpp"

#include <array>
#include <limits>
#include <vector>

namespace palmscope {

/// Marker colors and HSV windows for the three-way green/brown/background
/// split. Markers are pairwise distinct by contract; the defaults put the
/// brown marker at saddle brown in red-green-blue channel order.
struct ColorScheme {
  Rgb green_marker{20, 255, 10};
  Rgb brown_marker{139, 69, 19};
  Rgb background_marker{255, 255, 255};
  HsvRange green_range{{60.0, 0.15, 0.15}, {170.0, 1.0, 1.0}, false};
  HsvRange brown_range{{5.0, 0.2, 0.1}, {45.0, 1.0, 0.85}, false};

  void validate() const {
    if (green_marker == brown_marker || green_marker == background_marker ||
        brown_marker == background_marker)
      throw Error("ColorScheme: markers must be pairwise distinct");
    green_range.validate();
    brown_range.validate();
  }
};

struct ProgressionReport {
  int green_perc = 0;   // integer percent, green_perc + brown_perc = 100
  int brown_perc = 0;
  long leaf_pixels = 0;
  int mask_index = 0;
};

struct NoLeafError : Error {
  using Error::Error;
};

struct ClusterResult {
  std::vector<std::array<double, 3>> centers;
  std::vector<int> labels;           // per-pixel cluster index in [0,k)
  std::vector<long> counts;          // per-cluster pixel counts
  double inertia = 0.0;              // sum of squared distances at convergence
  std::vector<double> inertia_history;  // one entry per assignment pass
};

/// One output per mask: channel value times mask value, so background
/// renders black.
inline std::vector<ImageBuffer> crop_segment(const ImageBuffer& img,
                                             const std::vector<BinaryMask>& masks) {
  std::vector<ImageBuffer> out;
  out.reserve(masks.size());
  for (const BinaryMask& mask : masks) {
    if (mask.width != img.width || mask.height != img.height)
      throw Error("crop_segment: mask dimensions must match image");
    ImageBuffer crop(img.width, img.height);
    const std::size_t n = mask.data.size();
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint8_t m = mask.data[i];
      crop.data[i * 3] = static_cast<std::uint8_t>(img.data[i * 3] * m);
      crop.data[i * 3 + 1] = static_cast<std::uint8_t>(img.data[i * 3 + 1] * m);
      crop.data[i * 3 + 2] = static_cast<std::uint8_t>(img.data[i * 3 + 2] * m);
    }
    out.push_back(std::move(crop));
  }
  return out;
}

/// Replace every pixel with one of the three marker colors: green range
/// wins over brown on overlap, everything else (and everything outside the
/// mask) becomes background.
inline ImageBuffer quantize_colors(const ImageBuffer& img, const ColorScheme& scheme,
                                   const BinaryMask& leaf_mask) {
  scheme.validate();
  if (leaf_mask.width != img.width || leaf_mask.height != img.height)
    throw Error("quantize_colors: mask dimensions must match image");

  ImageBuffer out(img.width, img.height);
  const std::size_t n = leaf_mask.data.size();
  for (std::size_t i = 0; i < n; ++i) {
    Rgb color = scheme.background_marker;
    if (leaf_mask.data[i]) {
      const HsvPixel hsv = rgb_to_hsv(img.data[i * 3], img.data[i * 3 + 1],
                                      img.data[i * 3 + 2]);
      if (hsv_in_range(hsv, scheme.green_range))
        color = scheme.green_marker;
      else if (hsv_in_range(hsv, scheme.brown_range))
        color = scheme.brown_marker;
    }
    out.data[i * 3] = color.r;
    out.data[i * 3 + 1] = color.g;
    out.data[i * 3 + 2] = color.b;
  }
  return out;
}

namespace detail {

inline double sq_dist3(const std::array<double, 3>& a,
                       const std::array<double, 3>& b) {
  const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
  return d0 * d0 + d1 * d1 + d2 * d2;
}

}  // namespace detail

/// Lloyd iterations from explicit seeds: assign to the nearest center
/// (ties to the lowest index), recompute centers as assignment means, stop
/// when assignments no longer change or after 100 passes. An empty cluster
/// retains its previous center.
inline ClusterResult kmeans_cluster(const std::vector<std::array<double, 3>>& pixels,
                                    int k,
                                    const std::vector<std::array<double, 3>>& seeds) {
  if (pixels.empty()) throw Error("kmeans_cluster: empty pixel list");
  if (k < 1) throw Error("kmeans_cluster: k must be >= 1");
  if (seeds.size() != static_cast<std::size_t>(k))
    throw Error("kmeans_cluster: need exactly k seeds");
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b)
      if (seeds[a] == seeds[b])
        throw Error("kmeans_cluster: seeds must be pairwise distinct");

  ClusterResult result;
  result.centers = seeds;
  result.labels.assign(pixels.size(), -1);
  std::vector<int> prev_labels;

  constexpr int kMaxIterations = 100;
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    double inertia = 0.0;
    for (std::size_t p = 0; p < pixels.size(); ++p) {
      int best = 0;
      double best_d = detail::sq_dist3(pixels[p], result.centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d = detail::sq_dist3(pixels[p], result.centers[c]);
        if (d < best_d) {  // strict: ties keep the lowest center index
          best_d = d;
          best = c;
        }
      }
      result.labels[p] = best;
      inertia += best_d;
    }
    result.inertia_history.push_back(inertia);
    result.inertia = inertia;
    if (result.labels == prev_labels) break;
    prev_labels = result.labels;

    std::vector<std::array<double, 3>> sums(k, {0, 0, 0});
    std::vector<long> counts(k, 0);
    for (std::size_t p = 0; p < pixels.size(); ++p) {
      const int c = result.labels[p];
      sums[c][0] += pixels[p][0];
      sums[c][1] += pixels[p][1];
      sums[c][2] += pixels[p][2];
      ++counts[c];
    }
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0)
        result.centers[c] = {sums[c][0] / counts[c], sums[c][1] / counts[c],
                             sums[c][2] / counts[c]};
  }

  result.counts.assign(k, 0);
  for (int label : result.labels) ++result.counts[label];
  return result;
}

namespace detail {

inline std::array<double, 3> rgb_point(Rgb c) {
  return {static_cast<double>(c.r), static_cast<double>(c.g),
          static_cast<double>(c.b)};
}

inline int nearest_center(const std::vector<std::array<double, 3>>& centers,
                          const std::array<double, 3>& target) {
  int best = 0;
  double best_d = sq_dist3(centers[0], target);
  for (std::size_t c = 1; c < centers.size(); ++c) {
    const double d = sq_dist3(centers[c], target);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace detail

/// Quantize, cluster with k = 3 seeded at the marker colors, match centers
/// back to the green/brown markers, and report integer percentages. The
/// brown share is the progression value; brown_perc is defined as
/// 100 - green_perc so the two always sum to 100.
inline ProgressionReport compute_progression(const ImageBuffer& img,
                                             const BinaryMask& mask,
                                             const ColorScheme& scheme) {
  const ImageBuffer quantized = quantize_colors(img, scheme, mask);

  std::vector<std::array<double, 3>> pixels;
  pixels.reserve(static_cast<std::size_t>(quantized.width) * quantized.height);
  for (std::size_t i = 0; i < quantized.data.size(); i += 3)
    pixels.push_back({static_cast<double>(quantized.data[i]),
                      static_cast<double>(quantized.data[i + 1]),
                      static_cast<double>(quantized.data[i + 2])});

  const std::vector<std::array<double, 3>> seeds{
      detail::rgb_point(scheme.green_marker),
      detail::rgb_point(scheme.brown_marker),
      detail::rgb_point(scheme.background_marker)};
  const ClusterResult clusters = kmeans_cluster(pixels, 3, seeds);

  const int green_idx =
      detail::nearest_center(clusters.centers, detail::rgb_point(scheme.green_marker));
  const int brown_idx =
      detail::nearest_center(clusters.centers, detail::rgb_point(scheme.brown_marker));

  const long g_count = clusters.counts[green_idx];
  const long b_count = brown_idx == green_idx ? 0 : clusters.counts[brown_idx];
  const long total = g_count + b_count;
  if (total == 0) throw NoLeafError("no leaf pixels in masked region");

  ProgressionReport report;
  report.green_perc = static_cast<int>(
      round_half_away(static_cast<double>(g_count) / total * 100.0));
  report.brown_perc = 100 - report.green_perc;
  report.leaf_pixels = total;
  return report;
}

}  // namespace palmscope
