#pragma once

// Input-space distance D1 = (1 - MS-SSIM) + mean |a - b| and latent-space
// distance D2 = RMS(za - zb). Each has a graph builder (differentiable) and an
// eager wrapper.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "disguise/errors.hpp"
#include "disguise/graph.hpp"
#include "disguise/tensor.hpp"

namespace disguise {

// Standard five-scale MS-SSIM weights truncated to `scales` entries and
// renormalized to sum to one.
inline std::vector<double> ms_ssim_weights(int scales) {
  static constexpr double kStandard[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  if (scales < 1 || scales > 5) throw ContractError("ms_ssim: scales must be in [1, 5]");
  std::vector<double> w(kStandard, kStandard + scales);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return w;
}

struct MsSsimParams {
  int scales = 3;
  std::vector<double> weights = ms_ssim_weights(3);
  int window = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;

  static MsSsimParams with_scales(int scales) {
    MsSsimParams p;
    p.scales = scales;
    p.weights = ms_ssim_weights(scales);
    return p;
  }

  /// Largest scale count (at most 3) the image extent supports with the
  /// 11-tap window: window * 2^(scales-1) <= min side.
  static MsSsimParams for_extent(int height, int width) {
    const int side = std::min(height, width);
    int scales = 0;
    while (scales < 3 && 11 * (1 << scales) <= side) ++scales;
    if (scales == 0)
      throw ContractError("ms_ssim: image side " + std::to_string(side) + " smaller than the 11x11 window");
    return with_scales(scales);
  }

  static MsSsimParams defaults() { return with_scales(3); }

  int min_side() const { return window * (1 << (scales - 1)); }

  void validate() const {
    if (scales < 1) throw ContractError("ms_ssim: scales must be >= 1");
    if (static_cast<int>(weights.size()) != scales)
      throw ContractError("ms_ssim: need one weight per scale");
    double total = 0.0;
    for (double w : weights) {
      if (!(w > 0.0)) throw ContractError("ms_ssim: weights must be positive");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ContractError("ms_ssim: weights must sum to 1");
    if (window < 1 || window % 2 == 0) throw ContractError("ms_ssim: window must be odd");
  }
};

inline std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const double mid = (size - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - mid;
    k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += k[static_cast<std::size_t>(i)];
  }
  for (double& v : k) v /= total;
  return k;
}

// Anti-aliasing blur applied before each 2x average-pool between scales.
inline const std::vector<double>& antialias_kernel() {
  static const std::vector<double> k = gaussian_kernel(5, 1.0);
  return k;
}

// Lower clamp for contrast-structure means raised to fractional exponents.
inline constexpr double kMsSsimFloor = 1e-6;

namespace graph_ops {

template <typename T>
NodeId ms_ssim(Graph<T>& g, NodeId x, NodeId y, const MsSsimParams& p) {
  p.validate();
  const Shape& sx = g.value(x).shape();
  const Shape& sy = g.value(y).shape();
  require_image(sx, "ms_ssim");
  if (!(sx == sy)) throw ShapeError("ms_ssim: dims differ: " + sx.str() + " vs " + sy.str());
  if (std::min(sx[0], sx[1]) < p.min_side())
    throw ContractError("ms_ssim: image " + sx.str() + " too small for " + std::to_string(p.scales) +
                        " scales (min side " + std::to_string(p.min_side()) + ")");
  if (p.scales > 1 && (sx[0] % (1 << (p.scales - 1)) || sx[1] % (1 << (p.scales - 1))))
    throw ContractError("ms_ssim: image " + sx.str() + " not divisible for " + std::to_string(p.scales) +
                        " scales");

  const auto window = gaussian_kernel(p.window, p.sigma);
  const auto blur = [&](NodeId n) { return g.gaussian_blur(n, window, BlurPadding::valid); };
  std::optional<NodeId> product;
  for (int s = 0; s < p.scales; ++s) {
    if (s > 0) {
      x = g.downsample_avg2(g.gaussian_blur(x, antialias_kernel(), BlurPadding::replicate));
      y = g.downsample_avg2(g.gaussian_blur(y, antialias_kernel(), BlurPadding::replicate));
    }
    const NodeId mx = blur(x), my = blur(y);
    const NodeId mx2 = g.square(mx), my2 = g.square(my), mxy = g.mul(mx, my);
    const NodeId vx = g.sub(blur(g.square(x)), mx2);
    const NodeId vy = g.sub(blur(g.square(y)), my2);
    const NodeId cov = g.sub(blur(g.mul(x, y)), mxy);
    const NodeId cs_map = g.div(g.add_scalar(g.scalar_mul(cov, 2.0), p.c2), g.add_scalar(g.add(vx, vy), p.c2));
    NodeId term;
    if (s == p.scales - 1) {
      const NodeId lum = g.div(g.add_scalar(g.scalar_mul(mxy, 2.0), p.c1), g.add_scalar(g.add(mx2, my2), p.c1));
      term = g.mean_hw(g.mul(lum, cs_map));
    } else {
      term = g.mean_hw(cs_map);
    }
    if (p.scales > 1) term = g.pow_floor(term, p.weights[static_cast<std::size_t>(s)], kMsSsimFloor);
    product = product ? g.mul(*product, term) : term;
  }
  return g.mean(*product);
}

template <typename T>
NodeId d1(Graph<T>& g, NodeId a, NodeId b, const MsSsimParams& p) {
  const NodeId ssim_loss = g.add_scalar(g.scalar_mul(ms_ssim(g, a, b, p), -1.0), 1.0);
  const NodeId l1 = g.mean(g.abs(g.sub(a, b)));
  return g.add(ssim_loss, l1);
}

template <typename T>
NodeId d1(Graph<T>& g, NodeId a, NodeId b) {
  const Shape& s = g.value(a).shape();
  require_image(s, "d1");
  return d1(g, a, b, MsSsimParams::for_extent(s[0], s[1]));
}

template <typename T>
NodeId d2(Graph<T>& g, NodeId za, NodeId zb) {
  const Shape& a = g.value(za).shape();
  const Shape& b = g.value(zb).shape();
  if (!(a == b)) throw ShapeError("d2: dims differ: " + a.str() + " vs " + b.str());
  return g.sqrt_eps(g.mean(g.square(g.sub(za, zb))));
}

}  // namespace graph_ops

template <typename T>
double ms_ssim(const Tensor<T>& x, const Tensor<T>& y, const MsSsimParams& p) {
  Graph<T> g;
  const NodeId a = g.constant(x), b = g.constant(y);
  return static_cast<double>(g.scalar(graph_ops::ms_ssim(g, a, b, p)));
}

template <typename T>
double ms_ssim(const Tensor<T>& x, const Tensor<T>& y) {
  require_image(x.shape(), "ms_ssim");
  return ms_ssim(x, y, MsSsimParams::for_extent(x.shape()[0], x.shape()[1]));
}

template <typename T>
double d1(const Tensor<T>& a, const Tensor<T>& b) {
  Graph<T> g;
  const NodeId na = g.constant(a), nb = g.constant(b);
  return static_cast<double>(g.scalar(graph_ops::d1(g, na, nb)));
}

template <typename T>
double d2(const Tensor<T>& za, const Tensor<T>& zb) {
  Graph<T> g;
  const NodeId na = g.constant(za), nb = g.constant(zb);
  return static_cast<double>(g.scalar(graph_ops::d2(g, na, nb)));
}

}  // namespace disguise
