// Small forward-pass reference kernels: windowed weighted sum (in its
// cross-correlation form, no kernel flip), rectifier, max pooling and the
// dense layer product. No training machinery lives here.
#pragma once

#include "palmscope/image.hpp"

#include <algorithm>
#include <vector>

namespace palmscope {

struct FeatureMap {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> data;  // row-major, channel-interleaved

  FeatureMap() = default;
  FeatureMap(int w, int h, int c = 1, double fill = 0.0)
      : width(w), height(h), channels(c) {
    if (w < 1 || h < 1 || c < 1)
      throw Error("FeatureMap: dimensions must be >= 1");
    data.assign(static_cast<std::size_t>(w) * h * c, fill);
  }

  double at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  void set(int x, int y, double v, int c = 0) {
    data[(static_cast<std::size_t>(y) * width + x) * channels + c] = v;
  }
};

/// Square kernel with odd side length 2k+1, indexed by offsets in [-k, k].
struct Kernel {
  int half_size = 0;
  std::vector<double> data;

  Kernel() = default;
  Kernel(int k, std::vector<double> values) : half_size(k), data(std::move(values)) {
    if (k < 0) throw Error("Kernel: half_size must be >= 0");
    const std::size_t side = 2 * static_cast<std::size_t>(k) + 1;
    if (data.size() != side * side)
      throw Error("Kernel: data must be (2k+1) x (2k+1)");
  }

  int side() const { return 2 * half_size + 1; }
  double at(int i, int j) const {
    return data[static_cast<std::size_t>(j + half_size) * side() +
                (i + half_size)];
  }
};

/// Windowed weighted sum out(x,y) = sum_{i,j in [-k,k]} in(x+i, y+j) * kern(i,j),
/// evaluated only where the window fits ("valid" output, no padding). The sum
/// indexes the input positively, so no kernel flip is applied.
inline FeatureMap conv2d(const FeatureMap& input, const Kernel& kern) {
  if (input.channels != 1) throw Error("conv2d: input must be single-channel");
  const int k = kern.half_size;
  const int out_w = input.width - 2 * k;
  const int out_h = input.height - 2 * k;
  if (out_w < 1 || out_h < 1)
    throw Error("conv2d: input smaller than kernel window");

  FeatureMap out(out_w, out_h);
  for (int v = 0; v < out_h; ++v) {
    for (int u = 0; u < out_w; ++u) {
      double acc = 0.0;
      for (int j = -k; j <= k; ++j)
        for (int i = -k; i <= k; ++i)
          acc += input.at(u + k + i, v + k + j) * kern.at(i, j);
      out.set(u, v, acc);
    }
  }
  return out;
}

inline double relu(double x) { return std::max(0.0, x); }

/// Max over each window; windows that would overhang the input are dropped.
inline FeatureMap max_pool(const FeatureMap& input, int window, int stride) {
  if (window < 1 || stride < 1)
    throw Error("max_pool: window and stride must be >= 1");
  if (window > input.width || window > input.height)
    throw Error("max_pool: window larger than input");
  const int out_w = (input.width - window) / stride + 1;
  const int out_h = (input.height - window) / stride + 1;

  FeatureMap out(out_w, out_h, input.channels);
  for (int c = 0; c < input.channels; ++c) {
    for (int v = 0; v < out_h; ++v) {
      for (int u = 0; u < out_w; ++u) {
        double best = input.at(u * stride, v * stride, c);
        for (int j = 0; j < window; ++j)
          for (int i = 0; i < window; ++i)
            best = std::max(best, input.at(u * stride + i, v * stride + j, c));
        out.set(u, v, best, c);
      }
    }
  }
  return out;
}

/// Row-major dense matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, std::vector<double> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (r < 1 || c < 1) throw Error("Matrix: dimensions must be >= 1");
    if (data.size() != static_cast<std::size_t>(r) * c)
      throw Error("Matrix: data size mismatch");
  }
  double at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
};

/// Dense layer product z = W^T x + b, with W sized n_in x n_out.
inline std::vector<double> dense_forward(const Matrix& weights,
                                         const std::vector<double>& x,
                                         const std::vector<double>& bias) {
  if (static_cast<std::size_t>(weights.rows) != x.size())
    throw Error("dense_forward: input length must equal weight rows");
  if (static_cast<std::size_t>(weights.cols) != bias.size())
    throw Error("dense_forward: bias length must equal weight cols");
  std::vector<double> z(bias);
  for (int i = 0; i < weights.rows; ++i)
    for (int j = 0; j < weights.cols; ++j) z[j] += weights.at(i, j) * x[i];
  return z;
}

}  // namespace palmscope
