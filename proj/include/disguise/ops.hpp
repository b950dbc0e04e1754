#pragma once

// Forward kernels and vector-Jacobian products for the closed primitive set
// used by every loss pipeline. Images are H x W x C, conv kernels are
// K x K x Cin x Cout, biases are Cout.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "disguise/errors.hpp"
#include "disguise/tensor.hpp"

namespace disguise {

enum class OpKind {
  leaf,
  conv2d,
  upsample2,
  add,
  sub,
  mul,
  div,
  scalar_mul,
  add_scalar,
  tanh,
  sigmoid,
  abs,
  square,
  sqrt_eps,
  pow_floor,
  mean_reduce,
  sum_reduce,
  mean_hw,
  gaussian_blur,
  downsample_avg2,
  hflip,
  clamp01,
};

inline constexpr std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::conv2d: return "conv2d";
    case OpKind::upsample2: return "nearest_upsample2";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::div: return "div";
    case OpKind::scalar_mul: return "scalar_mul";
    case OpKind::add_scalar: return "add_scalar";
    case OpKind::tanh: return "tanh";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::abs: return "abs";
    case OpKind::square: return "square";
    case OpKind::sqrt_eps: return "sqrt_eps";
    case OpKind::pow_floor: return "pow_floor";
    case OpKind::mean_reduce: return "mean_reduce";
    case OpKind::sum_reduce: return "sum_reduce";
    case OpKind::mean_hw: return "mean_hw";
    case OpKind::gaussian_blur: return "gaussian_blur";
    case OpKind::downsample_avg2: return "downsample_avg2";
    case OpKind::hflip: return "hflip";
    case OpKind::clamp01: return "clamp01";
  }
  return "unknown";
}

inline constexpr int op_arity(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return 0;
    case OpKind::conv2d: return 3;
    case OpKind::add:
    case OpKind::sub:
    case OpKind::mul:
    case OpKind::div: return 2;
    default: return 1;
  }
}

enum class BlurPadding { valid, replicate };

struct OpAttrs {
  int stride = 1;              // conv2d
  double scalar = 0.0;         // scalar_mul factor, add_scalar offset, pow_floor exponent
  double floor = 0.0;          // pow_floor lower clamp
  std::vector<double> kernel;  // gaussian_blur taps (odd length, symmetric)
  BlurPadding padding = BlurPadding::valid;
};

inline constexpr double kSqrtEps = 1e-12;

namespace detail {

[[noreturn]] inline void shape_fail(OpKind kind, const std::string& msg) {
  throw ShapeError(std::string(op_name(kind)) + ": " + msg);
}

inline void expect_rank(OpKind kind, const Shape& s, int rank) {
  if (s.rank() != rank)
    shape_fail(kind, "expected rank " + std::to_string(rank) + ", got " + s.str());
}

inline void expect_same(OpKind kind, const Shape& a, const Shape& b) {
  if (!(a == b)) shape_fail(kind, "operand dims differ: " + a.str() + " vs " + b.str());
}

inline int conv_out_extent(int in, int k, int stride) { return (in + 2 * (k / 2) - k) / stride + 1; }

template <typename T>
T blur_tap(const std::vector<double>& kernel, std::size_t i) {
  return static_cast<T>(kernel[i]);
}

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

// ---------------------------------------------------------------- conv2d

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride) {
  const OpKind kind = OpKind::conv2d;
  expect_rank(kind, x.shape(), 3);
  expect_rank(kind, w.shape(), 4);
  expect_rank(kind, b.shape(), 1);
  const int H = x.shape()[0], W = x.shape()[1], Ci = x.shape()[2];
  const int K = w.shape()[0], Co = w.shape()[3];
  if (w.shape()[1] != K || K % 2 == 0) shape_fail(kind, "kernel must be square and odd, got " + w.shape().str());
  if (w.shape()[2] != Ci)
    shape_fail(kind, "kernel input channels " + std::to_string(w.shape()[2]) + " vs input " + x.shape().str());
  if (b.shape()[0] != Co) shape_fail(kind, "bias " + b.shape().str() + " vs kernel " + w.shape().str());
  if (stride != 1 && stride != 2) shape_fail(kind, "stride must be 1 or 2, got " + std::to_string(stride));

  const int pad = K / 2;
  const int OH = conv_out_extent(H, K, stride), OW = conv_out_extent(W, K, stride);
  Tensor<T> out(Shape{OH, OW, Co});
  const T* in = x.data().data();
  const T* wt = w.data().data();
  const T* bias = b.data().data();
  T* o = out.data().data();
  for (int oy = 0; oy < OH; ++oy) {
    for (int ox = 0; ox < OW; ++ox) {
      T* op = o + (static_cast<std::size_t>(oy) * OW + ox) * Co;
      for (int co = 0; co < Co; ++co) op[co] = bias[co];
      for (int ky = 0; ky < K; ++ky) {
        const int iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= H) continue;
        for (int kx = 0; kx < K; ++kx) {
          const int ix = ox * stride + kx - pad;
          if (ix < 0 || ix >= W) continue;
          const T* ip = in + (static_cast<std::size_t>(iy) * W + ix) * Ci;
          const T* wk = wt + (static_cast<std::size_t>(ky) * K + kx) * Ci * Co;
          for (int ci = 0; ci < Ci; ++ci) {
            const T a = ip[ci];
            const T* wr = wk + static_cast<std::size_t>(ci) * Co;
            for (int co = 0; co < Co; ++co) op[co] += a * wr[co];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
void conv2d_backward_input(const Tensor<T>& gout, const Tensor<T>& w, int stride, Tensor<T>& gx) {
  const int H = gx.shape()[0], W = gx.shape()[1], Ci = gx.shape()[2];
  const int K = w.shape()[0], Co = w.shape()[3];
  const int OH = gout.shape()[0], OW = gout.shape()[1];
  const int pad = K / 2;
  // Transposed kernel (K x K x Co x Ci) so the innermost loop runs over Ci.
  std::vector<T> wt(w.size());
  for (int k = 0; k < K * K; ++k)
    for (int ci = 0; ci < Ci; ++ci)
      for (int co = 0; co < Co; ++co)
        wt[(static_cast<std::size_t>(k) * Co + co) * Ci + ci] =
            w[(static_cast<std::size_t>(k) * Ci + ci) * Co + co];
  const T* g = gout.data().data();
  T* gi = gx.data().data();
  for (int oy = 0; oy < OH; ++oy) {
    for (int ox = 0; ox < OW; ++ox) {
      const T* gp = g + (static_cast<std::size_t>(oy) * OW + ox) * Co;
      for (int ky = 0; ky < K; ++ky) {
        const int iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= H) continue;
        for (int kx = 0; kx < K; ++kx) {
          const int ix = ox * stride + kx - pad;
          if (ix < 0 || ix >= W) continue;
          T* ip = gi + (static_cast<std::size_t>(iy) * W + ix) * Ci;
          const T* wk = wt.data() + (static_cast<std::size_t>(ky) * K + kx) * Co * Ci;
          for (int co = 0; co < Co; ++co) {
            const T gv = gp[co];
            const T* wr = wk + static_cast<std::size_t>(co) * Ci;
            for (int ci = 0; ci < Ci; ++ci) ip[ci] += gv * wr[ci];
          }
        }
      }
    }
  }
}

// Kernel and bias gradients, accumulated in 64-bit over output positions.
template <typename T>
void conv2d_backward_params(const Tensor<T>& x, const Tensor<T>& gout, int stride, Tensor<T>* gw,
                            Tensor<T>* gb, int K) {
  const int H = x.shape()[0], W = x.shape()[1], Ci = x.shape()[2];
  const int OH = gout.shape()[0], OW = gout.shape()[1], Co = gout.shape()[2];
  const int pad = K / 2;
  const T* in = x.data().data();
  const T* g = gout.data().data();
  if (gw) {
    std::vector<double> acc(static_cast<std::size_t>(K) * K * Ci * Co, 0.0);
    for (int oy = 0; oy < OH; ++oy) {
      for (int ox = 0; ox < OW; ++ox) {
        const T* gp = g + (static_cast<std::size_t>(oy) * OW + ox) * Co;
        for (int ky = 0; ky < K; ++ky) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= H) continue;
          for (int kx = 0; kx < K; ++kx) {
            const int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= W) continue;
            const T* ip = in + (static_cast<std::size_t>(iy) * W + ix) * Ci;
            double* ak = acc.data() + (static_cast<std::size_t>(ky) * K + kx) * Ci * Co;
            for (int ci = 0; ci < Ci; ++ci) {
              const double a = static_cast<double>(ip[ci]);
              double* ar = ak + static_cast<std::size_t>(ci) * Co;
              for (int co = 0; co < Co; ++co) ar[co] += a * static_cast<double>(gp[co]);
            }
          }
        }
      }
    }
    for (std::size_t i = 0; i < acc.size(); ++i) (*gw)[i] += static_cast<T>(acc[i]);
  }
  if (gb) {
    std::vector<double> acc(static_cast<std::size_t>(Co), 0.0);
    for (std::size_t p = 0; p < static_cast<std::size_t>(OH) * OW; ++p)
      for (int co = 0; co < Co; ++co) acc[co] += static_cast<double>(g[p * Co + co]);
    for (int co = 0; co < Co; ++co) (*gb)[co] += static_cast<T>(acc[co]);
  }
}

// ---------------------------------------------------------------- resampling

template <typename T>
Tensor<T> upsample2_forward(const Tensor<T>& x) {
  expect_rank(OpKind::upsample2, x.shape(), 3);
  const int H = x.shape()[0], W = x.shape()[1], C = x.shape()[2];
  Tensor<T> out(Shape{2 * H, 2 * W, C});
  for (int y = 0; y < 2 * H; ++y)
    for (int xx = 0; xx < 2 * W; ++xx)
      for (int c = 0; c < C; ++c) out.at(y, xx, c) = x.at(y / 2, xx / 2, c);
  return out;
}

template <typename T>
void upsample2_backward(const Tensor<T>& gout, Tensor<T>& gx) {
  const int H = gx.shape()[0], W = gx.shape()[1], C = gx.shape()[2];
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c)
        gx.at(y, x, c) += (gout.at(2 * y, 2 * x, c) + gout.at(2 * y, 2 * x + 1, c)) +
                          (gout.at(2 * y + 1, 2 * x, c) + gout.at(2 * y + 1, 2 * x + 1, c));
}

template <typename T>
Tensor<T> downsample_avg2_forward(const Tensor<T>& x) {
  const OpKind kind = OpKind::downsample_avg2;
  expect_rank(kind, x.shape(), 3);
  const int H = x.shape()[0], W = x.shape()[1], C = x.shape()[2];
  if (H % 2 || W % 2) shape_fail(kind, "spatial dims must be even, got " + x.shape().str());
  Tensor<T> out(Shape{H / 2, W / 2, C});
  const T q = T{0.25};
  for (int y = 0; y < H / 2; ++y)
    for (int xx = 0; xx < W / 2; ++xx)
      for (int c = 0; c < C; ++c)
        out.at(y, xx, c) = q * ((x.at(2 * y, 2 * xx, c) + x.at(2 * y, 2 * xx + 1, c)) +
                                (x.at(2 * y + 1, 2 * xx, c) + x.at(2 * y + 1, 2 * xx + 1, c)));
  return out;
}

template <typename T>
void downsample_avg2_backward(const Tensor<T>& gout, Tensor<T>& gx) {
  const int H = gx.shape()[0], W = gx.shape()[1], C = gx.shape()[2];
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) gx.at(y, x, c) += T{0.25} * gout.at(y / 2, x / 2, c);
}

template <typename T>
Tensor<T> hflip_forward(const Tensor<T>& x) {
  expect_rank(OpKind::hflip, x.shape(), 3);
  const int H = x.shape()[0], W = x.shape()[1], C = x.shape()[2];
  Tensor<T> out(x.shape());
  for (int y = 0; y < H; ++y)
    for (int xx = 0; xx < W; ++xx)
      for (int c = 0; c < C; ++c) out.at(y, xx, c) = x.at(y, W - 1 - xx, c);
  return out;
}

template <typename T>
void hflip_backward(const Tensor<T>& gout, Tensor<T>& gx) {
  const int H = gx.shape()[0], W = gx.shape()[1], C = gx.shape()[2];
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) gx.at(y, x, c) += gout.at(y, W - 1 - x, c);
}

// ---------------------------------------------------------------- blur

// Separable blur: horizontal pass then vertical pass, each per channel.
template <typename T>
Tensor<T> blur_pass(const Tensor<T>& x, const std::vector<double>& kernel, BlurPadding padding,
                    bool vertical) {
  const int H = x.shape()[0], W = x.shape()[1], C = x.shape()[2];
  const int K = static_cast<int>(kernel.size());
  const int r = K / 2;
  const int n = vertical ? H : W;
  const int on = padding == BlurPadding::valid ? n - K + 1 : n;
  const int off = padding == BlurPadding::valid ? 0 : -r;
  Tensor<T> out(vertical ? Shape{on, W, C} : Shape{H, on, C});
  const int OH = out.shape()[0], OW = out.shape()[1];
  for (int y = 0; y < OH; ++y)
    for (int xx = 0; xx < OW; ++xx)
      for (int c = 0; c < C; ++c) {
        T acc{0};
        const int base = (vertical ? y : xx) + off;
        for (int k = 0; k < K; ++k) {
          const int i = clamp_index(base + k, n);
          acc += blur_tap<T>(kernel, static_cast<std::size_t>(k)) *
                 (vertical ? x.at(i, xx, c) : x.at(y, i, c));
        }
        out.at(y, xx, c) = acc;
      }
  return out;
}

template <typename T>
void blur_pass_backward(const Tensor<T>& gout, const std::vector<double>& kernel, BlurPadding padding,
                        bool vertical, Tensor<T>& gx) {
  const int H = gx.shape()[0], W = gx.shape()[1], C = gx.shape()[2];
  const int K = static_cast<int>(kernel.size());
  const int r = K / 2;
  const int n = vertical ? H : W;
  const int off = padding == BlurPadding::valid ? 0 : -r;
  const int OH = gout.shape()[0], OW = gout.shape()[1];
  for (int y = 0; y < OH; ++y)
    for (int xx = 0; xx < OW; ++xx)
      for (int c = 0; c < C; ++c) {
        const T g = gout.at(y, xx, c);
        const int base = (vertical ? y : xx) + off;
        for (int k = 0; k < K; ++k) {
          const int i = clamp_index(base + k, n);
          (vertical ? gx.at(i, xx, c) : gx.at(y, i, c)) +=
              blur_tap<T>(kernel, static_cast<std::size_t>(k)) * g;
        }
      }
}

template <typename T>
Tensor<T> gaussian_blur_forward(const Tensor<T>& x, const OpAttrs& a) {
  const OpKind kind = OpKind::gaussian_blur;
  expect_rank(kind, x.shape(), 3);
  const int K = static_cast<int>(a.kernel.size());
  if (K == 0 || K % 2 == 0) shape_fail(kind, "kernel length must be odd, got " + std::to_string(K));
  if (a.padding == BlurPadding::valid && (x.shape()[0] < K || x.shape()[1] < K))
    shape_fail(kind, "input " + x.shape().str() + " smaller than window " + std::to_string(K));
  return blur_pass(blur_pass(x, a.kernel, a.padding, false), a.kernel, a.padding, true);
}

template <typename T>
void gaussian_blur_backward(const Tensor<T>& x, const Tensor<T>& gout, const OpAttrs& a, Tensor<T>& gx) {
  const int K = static_cast<int>(a.kernel.size());
  const int hw = a.padding == BlurPadding::valid ? x.shape()[1] - K + 1 : x.shape()[1];
  Tensor<T> gmid(Shape{x.shape()[0], hw, x.shape()[2]});
  blur_pass_backward(gout, a.kernel, a.padding, true, gmid);
  blur_pass_backward(gmid, a.kernel, a.padding, false, gx);
}

// ---------------------------------------------------------------- reductions

template <typename T>
double sum64(std::span<const T> v) {
  double acc = 0.0;
  for (T x : v) acc += static_cast<double>(x);
  return acc;
}

template <typename T>
Tensor<T> mean_hw_forward(const Tensor<T>& x) {
  expect_rank(OpKind::mean_hw, x.shape(), 3);
  const int H = x.shape()[0], W = x.shape()[1], C = x.shape()[2];
  std::vector<double> acc(static_cast<std::size_t>(C), 0.0);
  for (int y = 0; y < H; ++y)
    for (int xx = 0; xx < W; ++xx)
      for (int c = 0; c < C; ++c) acc[c] += static_cast<double>(x.at(y, xx, c));
  Tensor<T> out(Shape{1, 1, C});
  for (int c = 0; c < C; ++c) out[c] = static_cast<T>(acc[c] / (static_cast<double>(H) * W));
  return out;
}

}  // namespace detail

// Evaluates one primitive. `in` holds the operands in the order documented on
// OpKind (conv2d: input, kernel, bias).
template <typename T>
Tensor<T> primitive_forward(OpKind kind, std::span<const Tensor<T>* const> in, const OpAttrs& attrs = {}) {
  using namespace detail;
  if (static_cast<int>(in.size()) != op_arity(kind))
    shape_fail(kind, "expected " + std::to_string(op_arity(kind)) + " operands, got " +
                         std::to_string(in.size()));
  auto unary = [&](auto f) {
    Tensor<T> out(in[0]->shape());
    const auto src = in[0]->data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
    return out;
  };
  auto binary = [&](auto f) {
    expect_same(kind, in[0]->shape(), in[1]->shape());
    Tensor<T> out(in[0]->shape());
    const auto a = in[0]->data();
    const auto b = in[1]->data();
    auto dst = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) dst[i] = f(a[i], b[i]);
    return out;
  };
  const T s = static_cast<T>(attrs.scalar);
  switch (kind) {
    case OpKind::leaf: shape_fail(kind, "leaf has no forward rule");
    case OpKind::conv2d: return conv2d_forward(*in[0], *in[1], *in[2], attrs.stride);
    case OpKind::upsample2: return upsample2_forward(*in[0]);
    case OpKind::add: return binary([](T a, T b) { return a + b; });
    case OpKind::sub: return binary([](T a, T b) { return a - b; });
    case OpKind::mul: return binary([](T a, T b) { return a * b; });
    case OpKind::div: return binary([](T a, T b) { return a / b; });
    case OpKind::scalar_mul: return unary([s](T a) { return s * a; });
    case OpKind::add_scalar: return unary([s](T a) { return a + s; });
    case OpKind::tanh: return unary([](T a) { return std::tanh(a); });
    case OpKind::sigmoid: return unary([](T a) { return T{1} / (T{1} + std::exp(-a)); });
    case OpKind::abs: return unary([](T a) { return std::abs(a); });
    case OpKind::square: return unary([](T a) { return a * a; });
    case OpKind::sqrt_eps:
      return unary([](T a) { return static_cast<T>(std::sqrt(static_cast<double>(a) + kSqrtEps)); });
    case OpKind::pow_floor: {
      const T fl = static_cast<T>(attrs.floor);
      return unary([s, fl](T a) { return std::pow(std::max(a, fl), s); });
    }
    case OpKind::mean_reduce: {
      const double n = static_cast<double>(in[0]->size());
      return Tensor<T>(Shape::scalar(), std::vector<T>{static_cast<T>(sum64(in[0]->data()) / n)});
    }
    case OpKind::sum_reduce:
      return Tensor<T>(Shape::scalar(), std::vector<T>{static_cast<T>(sum64(in[0]->data()))});
    case OpKind::mean_hw: return mean_hw_forward(*in[0]);
    case OpKind::gaussian_blur: return gaussian_blur_forward(*in[0], attrs);
    case OpKind::downsample_avg2: return downsample_avg2_forward(*in[0]);
    case OpKind::hflip: return hflip_forward(*in[0]);
    case OpKind::clamp01: return unary([](T a) { return std::clamp(a, T{0}, T{1}); });
  }
  shape_fail(kind, "unhandled primitive");
}

// Accumulates the vector-Jacobian product of one primitive into the operand
// gradients. Null entries in `grads` are skipped.
template <typename T>
void primitive_vjp(OpKind kind, std::span<const Tensor<T>* const> in, const Tensor<T>& out,
                   const Tensor<T>& gout, const OpAttrs& attrs, std::span<Tensor<T>* const> grads) {
  using namespace detail;
  const T s = static_cast<T>(attrs.scalar);
  auto elementwise = [&](std::size_t operand, auto f) {
    if (!grads[operand]) return;
    auto g = grads[operand]->data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += f(i);
  };
  auto x = [&](std::size_t i) { return (*in[0])[i]; };
  auto y = [&](std::size_t i) { return out[i]; };
  switch (kind) {
    case OpKind::leaf: return;
    case OpKind::conv2d:
      if (grads[0]) conv2d_backward_input(gout, *in[1], attrs.stride, *grads[0]);
      if (grads[1] || grads[2])
        conv2d_backward_params(*in[0], gout, attrs.stride, grads[1], grads[2], in[1]->shape()[0]);
      return;
    case OpKind::upsample2:
      if (grads[0]) upsample2_backward(gout, *grads[0]);
      return;
    case OpKind::add:
      elementwise(0, [&](std::size_t i) { return gout[i]; });
      elementwise(1, [&](std::size_t i) { return gout[i]; });
      return;
    case OpKind::sub:
      elementwise(0, [&](std::size_t i) { return gout[i]; });
      elementwise(1, [&](std::size_t i) { return -gout[i]; });
      return;
    case OpKind::mul:
      elementwise(0, [&](std::size_t i) {
        const T g = gout[i]; return g * (*in[1])[i]; });
      elementwise(1, [&](std::size_t i) {
        const T g = gout[i]; return g * (*in[0])[i]; });
      return;
    case OpKind::div:
      elementwise(0, [&](std::size_t i) {
        const T g = gout[i]; return g / (*in[1])[i]; });
      elementwise(1, [&](std::size_t i) {
        const T g = gout[i]; return -g * y(i) / (*in[1])[i]; });
      return;
    case OpKind::scalar_mul: elementwise(0, [&](std::size_t i) { return s * gout[i]; }); return;
    case OpKind::add_scalar: elementwise(0, [&](std::size_t i) { return gout[i]; }); return;
    case OpKind::tanh: elementwise(0, [&](std::size_t i) {
        const T g = gout[i]; return g * (T{1} - y(i) * y(i)); }); return;
    case OpKind::sigmoid: elementwise(0, [&](std::size_t i) {
        const T g = gout[i]; return g * y(i) * (T{1} - y(i)); }); return;
    case OpKind::abs:
      elementwise(0, [&](std::size_t i) {
        const T g = gout[i];
        const T v = x(i);
        return v > T{0} ? g : (v < T{0} ? -g : T{0});
      });
      return;
    case OpKind::square: elementwise(0, [&](std::size_t i) {
        const T g = gout[i]; return T{2} * x(i) * g; }); return;
    case OpKind::sqrt_eps: elementwise(0, [&](std::size_t i) {
        const T g = gout[i]; return g / (T{2} * y(i)); }); return;
    case OpKind::pow_floor: {
      const T fl = static_cast<T>(attrs.floor);
      elementwise(0, [&](std::size_t i) {
        const T g = gout[i];
        const T v = x(i);
        return v > fl ? g * s * std::pow(v, s - T{1}) : T{0};
      });
      return;
    }
    case OpKind::mean_reduce: {
      const T scale = static_cast<T>(1.0 / static_cast<double>(in[0]->size()));
      elementwise(0, [&](std::size_t i) { return gout[0] * scale; });
      return;
    }
    case OpKind::sum_reduce: elementwise(0, [&](std::size_t i) { return gout[0]; }); return;
    case OpKind::mean_hw: {
      if (!grads[0]) return;
      const int C = in[0]->shape()[2];
      const T scale = static_cast<T>(1.0 / (static_cast<double>(in[0]->shape()[0]) * in[0]->shape()[1]));
      elementwise(0, [&](std::size_t i) { return gout[i % static_cast<std::size_t>(C)] * scale; });
      return;
    }
    case OpKind::gaussian_blur:
      if (grads[0]) gaussian_blur_backward(*in[0], gout, attrs, *grads[0]);
      return;
    case OpKind::downsample_avg2:
      if (grads[0]) downsample_avg2_backward(gout, *grads[0]);
      return;
    case OpKind::hflip:
      if (grads[0]) hflip_backward(gout, *grads[0]);
      return;
    case OpKind::clamp01:
      elementwise(0, [&](std::size_t i) {
        const T g = gout[i];
        const T v = x(i);
        return (v > T{0} && v < T{1}) ? g : T{0};
      });
      return;
  }
}

}  // namespace disguise
