// Classical caterpillar counting: grayscale, Gaussian blur, inverted
// thresholding, morphological erosion and connected-component labeling.
#pragma once

#include "palmscope/image.hpp"

#include <array>
#include <cmath>
#include <deque>
#include <optional>
#include <vector>

namespace palmscope {

enum class ErodeKernel { Cross3, Square3 };

/// Threshold selection for binarize: Otsu by default, fixed override.
struct ThresholdMode {
  bool use_otsu = true;
  int fixed = 128;

  static ThresholdMode otsu() { return {true, 0}; }
  static ThresholdMode fixed_at(int t) {
    if (t < 0 || t > 255) throw Error("ThresholdMode: fixed t must be in [0,255]");
    return {false, t};
  }
};

struct CountParams {
  int blur_kernel = 5;       // odd
  double blur_sigma = 1.0;
  ThresholdMode threshold{};
  ErodeKernel erode_kernel = ErodeKernel::Cross3;
  int erode_iterations = 1;
  int connectivity = 8;      // 4 or 8
  long min_area = 30;        // pixels; scale-dependent, tuned for ~300x300

  void validate() const {
    if (blur_kernel < 1 || blur_kernel % 2 == 0)
      throw Error("CountParams: blur_kernel must be odd and >= 1");
    if (blur_sigma <= 0.0) throw Error("CountParams: blur_sigma must be > 0");
    if (erode_iterations < 0)
      throw Error("CountParams: erode_iterations must be >= 0");
    if (connectivity != 4 && connectivity != 8)
      throw Error("CountParams: connectivity must be 4 or 8");
    if (min_area < 0) throw Error("CountParams: min_area must be >= 0");
  }
};

/// Separable Gaussian with weights normalized to sum 1 and nearest-edge
/// replication at the borders.
inline GrayImage gaussian_blur(const GrayImage& img, int kernel, double sigma) {
  if (kernel < 1 || kernel % 2 == 0)
    throw Error("gaussian_blur: kernel must be odd and >= 1");
  if (sigma <= 0.0) throw Error("gaussian_blur: sigma must be > 0");

  const int radius = kernel / 2;
  std::vector<double> weights(kernel);
  double sum = 0.0;
  for (int o = -radius; o <= radius; ++o) {
    weights[o + radius] = std::exp(-(o * o) / (2.0 * sigma * sigma));
    sum += weights[o + radius];
  }
  for (double& w : weights) w /= sum;

  const int w = img.width, h = img.height;
  std::vector<double> horizontal(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int o = -radius; o <= radius; ++o)
        acc += weights[o + radius] * img.at(std::clamp(x + o, 0, w - 1), y);
      horizontal[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int o = -radius; o <= radius; ++o)
        acc += weights[o + radius] *
               horizontal[static_cast<std::size_t>(std::clamp(y + o, 0, h - 1)) * w + x];
      out.set(x, y, clamp_u8(round_half_away(acc)));
    }
  }
  return out;
}

inline GrayImage invert(const GrayImage& img) {
  GrayImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    out.data[i] = static_cast<std::uint8_t>(255 - img.data[i]);
  return out;
}

/// Otsu's threshold: the t in [0,255] maximizing between-class variance of
/// the <=t / >t split; ties resolve to the lowest t.
inline int otsu_threshold(const GrayImage& img) {
  std::array<long, 256> hist{};
  for (std::uint8_t v : img.data) ++hist[v];
  const double total = static_cast<double>(img.data.size());

  double sum_all = 0.0;
  for (int v = 0; v < 256; ++v) sum_all += static_cast<double>(v) * hist[v];

  int best_t = 0;
  double best_var = -1.0;
  double w0 = 0.0, sum0 = 0.0;
  for (int t = 0; t < 256; ++t) {
    w0 += hist[t];
    sum0 += static_cast<double>(t) * hist[t];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best_var) {
      best_var = between;
      best_t = t;
    }
  }
  return best_t;
}

/// Invert the image (255 - v), then mark foreground where the inverted
/// value exceeds the threshold. Dark objects on light paper become 1s.
inline BinaryMask binarize(const GrayImage& img, const ThresholdMode& mode) {
  const GrayImage inverted = invert(img);
  const int t = mode.use_otsu ? otsu_threshold(inverted) : mode.fixed;
  if (t < 0 || t > 255) throw Error("binarize: threshold must be in [0,255]");
  BinaryMask out(img.width, img.height);
  for (std::size_t i = 0; i < inverted.data.size(); ++i)
    out.data[i] = inverted.data[i] > t ? 1 : 0;
  return out;
}

namespace detail {

inline const std::vector<std::array<int, 2>>& erode_offsets(ErodeKernel kernel) {
  static const std::vector<std::array<int, 2>> cross{
      {0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  static const std::vector<std::array<int, 2>> square{
      {0, 0}, {1, 0},  {-1, 0}, {0, 1},  {0, -1},
      {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  return kernel == ErodeKernel::Cross3 ? cross : square;
}

}  // namespace detail

/// A pixel survives iff every neighbor under the structuring element is
/// foreground; pixels beyond the canvas count as background.
inline BinaryMask erode(const BinaryMask& mask, ErodeKernel kernel, int iterations) {
  if (iterations < 0) throw Error("erode: iterations must be >= 0");
  const auto& offsets = detail::erode_offsets(kernel);
  BinaryMask current = mask;
  for (int it = 0; it < iterations; ++it) {
    BinaryMask next(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
      for (int x = 0; x < mask.width; ++x) {
        std::uint8_t keep = 1;
        for (const auto& o : offsets) {
          const int nx = x + o[0], ny = y + o[1];
          if (nx < 0 || ny < 0 || nx >= mask.width || ny >= mask.height ||
              current.at(nx, ny) == 0) {
            keep = 0;
            break;
          }
        }
        next.set(x, y, keep & current.at(x, y));
      }
    }
    current = std::move(next);
  }
  return current;
}

/// Labeled foreground regions. Label 0 is background; labels 1..n are
/// assigned in first-encounter row-major order.
struct ComponentLabels {
  int width = 0;
  int height = 0;
  std::vector<int> labels;
  int n_components = 0;
  std::vector<long> areas;  // areas[i] belongs to label i+1

  int at(int x, int y) const {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
};

inline ComponentLabels connected_components(const BinaryMask& mask,
                                            int connectivity) {
  if (connectivity != 4 && connectivity != 8)
    throw Error("connected_components: connectivity must be 4 or 8");

  static const std::array<std::array<int, 2>, 8> neighbors{
      {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};
  const int n_neighbors = connectivity == 4 ? 4 : 8;

  ComponentLabels out;
  out.width = mask.width;
  out.height = mask.height;
  out.labels.assign(mask.data.size(), 0);

  std::deque<std::array<int, 2>> frontier;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * mask.width + x;
      if (mask.data[idx] == 0 || out.labels[idx] != 0) continue;
      const int label = ++out.n_components;
      long area = 0;
      out.labels[idx] = label;
      frontier.push_back({x, y});
      while (!frontier.empty()) {
        const auto [px, py] = frontier.front();
        frontier.pop_front();
        ++area;
        for (int n = 0; n < n_neighbors; ++n) {
          const int nx = px + neighbors[n][0];
          const int ny = py + neighbors[n][1];
          if (nx < 0 || ny < 0 || nx >= mask.width || ny >= mask.height) continue;
          const std::size_t nidx = static_cast<std::size_t>(ny) * mask.width + nx;
          if (mask.data[nidx] == 0 || out.labels[nidx] != 0) continue;
          out.labels[nidx] = label;
          frontier.push_back({nx, ny});
        }
      }
      out.areas.push_back(area);
    }
  }
  return out;
}

struct ClassicalCountResult {
  int count = 0;             // components with area >= min_area
  BinaryMask mask;           // post-erosion foreground
  ComponentLabels components;
};

/// The full classical pipeline: grayscale, blur, inverted threshold,
/// erosion, connected components, then count regions of at least min_area.
inline ClassicalCountResult count_caterpillars_classical(const ImageBuffer& img,
                                                         const CountParams& params) {
  params.validate();
  const GrayImage gray = rgb_to_gray(img);
  const GrayImage blurred = gaussian_blur(gray, params.blur_kernel, params.blur_sigma);
  BinaryMask mask = binarize(blurred, params.threshold);
  mask = erode(mask, params.erode_kernel, params.erode_iterations);

  ClassicalCountResult result;
  result.components = connected_components(mask, params.connectivity);
  result.mask = std::move(mask);
  for (long area : result.components.areas)
    if (area >= params.min_area) ++result.count;
  return result;
}

}  // namespace palmscope
