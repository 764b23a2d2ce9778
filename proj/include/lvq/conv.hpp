#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "lvq/parallel.hpp"
#include "lvq/tensor.hpp"

namespace lvq {

/// Geometry of a 2D or 3D convolution. kernel/stride/padding all have one
/// entry per spatio(-temporal) axis: {kh,kw} or {kt,kh,kw}.
struct ConvSpec {
  std::int64_t in_channels = 0;
  std::int64_t out_channels = 0;
  extents kernel;
  extents stride;
  std::vector<std::pair<std::int64_t, std::int64_t>> padding;

  std::size_t spatial_rank() const { return kernel.size(); }

  void validate() const {
    if (in_channels < 1 || out_channels < 1) {
      throw shape_error("conv spec requires positive channel counts");
    }
    if (stride.size() != kernel.size() || padding.size() != kernel.size()) {
      throw shape_error("conv spec kernel/stride/padding ranks disagree");
    }
    for (std::size_t a = 0; a < kernel.size(); ++a) {
      if (kernel[a] < 1) throw shape_error("conv kernel extent must be >= 1");
      if (stride[a] < 1) throw shape_error("conv stride must be >= 1");
      if (padding[a].first < 0 || padding[a].second < 0) {
        throw shape_error("conv padding must be >= 0");
      }
    }
  }

  /// floor((in + before + after - kernel)/stride) + 1, required to be >= 1.
  std::int64_t output_extent(std::size_t axis, std::int64_t in_extent) const {
    const auto padded = in_extent + padding[axis].first + padding[axis].second;
    const auto out = (padded - kernel[axis]) / stride[axis] + 1;
    if (padded < kernel[axis] || out < 1) {
      throw shape_error("conv output extent on axis " + std::to_string(axis) +
                        " is non-positive (input " + std::to_string(in_extent) + ")");
    }
    return out;
  }
};

template <typename T>
struct LayerGrads {
  Tensor<T> d_input;
  Tensor<T> d_weights;
  Tensor<T> d_bias;
};

namespace detail {

// Axis geometry normalized to three spatial axes; 2D uses a dummy leading
// axis of extent 1 so a single kernel serves conv2d and conv3d.
struct ConvGeom {
  std::int64_t channels = 0, out_channels = 0;
  std::int64_t in[3] = {1, 1, 1}, out[3] = {1, 1, 1};
  std::int64_t k[3] = {1, 1, 1}, s[3] = {1, 1, 1}, p[3] = {0, 0, 0};
  std::int64_t patch() const { return channels * k[0] * k[1] * k[2]; }
  std::int64_t positions() const { return out[0] * out[1] * out[2]; }
  std::int64_t in_size() const { return channels * in[0] * in[1] * in[2]; }
  std::int64_t out_size() const { return out_channels * positions(); }
};

inline ConvGeom make_geom(const ConvSpec& spec, const extents& input_shape) {
  spec.validate();
  const std::size_t rank = spec.spatial_rank();
  if (rank != 2 && rank != 3) {
    throw shape_error("conv supports 2 or 3 spatial axes, got " + std::to_string(rank));
  }
  if (input_shape.size() != rank + 2) {
    throw shape_error("conv input rank " + std::to_string(input_shape.size()) +
                      " does not match spec rank " + std::to_string(rank + 2));
  }
  if (input_shape[1] != spec.in_channels) {
    throw shape_error("conv input channels " + std::to_string(input_shape[1]) +
                      " != spec in_channels " + std::to_string(spec.in_channels));
  }
  ConvGeom g;
  g.channels = spec.in_channels;
  g.out_channels = spec.out_channels;
  const std::size_t off = 3 - rank;  // left-pad 2D with a unit axis
  for (std::size_t a = 0; a < rank; ++a) {
    g.in[off + a] = input_shape[2 + a];
    g.k[off + a] = spec.kernel[a];
    g.s[off + a] = spec.stride[a];
    g.p[off + a] = spec.padding[a].first;
    g.out[off + a] = spec.output_extent(a, input_shape[2 + a]);
  }
  return g;
}

// col[k_row][p] layout with k_row = ((c*k0+d0)*k1+d1)*k2+d2 and
// p = (t*out1+y)*out2+x. Out-of-range input positions contribute zero.
template <typename T>
void im2col(const T* in, const ConvGeom& g, T* col) {
  const std::int64_t P = g.positions();
  const std::int64_t in_plane12 = g.in[1] * g.in[2];
  for (std::int64_t c = 0; c < g.channels; ++c) {
    for (std::int64_t d0 = 0; d0 < g.k[0]; ++d0) {
      for (std::int64_t d1 = 0; d1 < g.k[1]; ++d1) {
        for (std::int64_t d2 = 0; d2 < g.k[2]; ++d2) {
          T* row = col + (((c * g.k[0] + d0) * g.k[1] + d1) * g.k[2] + d2) * P;
          for (std::int64_t t = 0; t < g.out[0]; ++t) {
            const std::int64_t i0 = t * g.s[0] + d0 - g.p[0];
            for (std::int64_t y = 0; y < g.out[1]; ++y) {
              const std::int64_t i1 = y * g.s[1] + d1 - g.p[1];
              T* seg = row + (t * g.out[1] + y) * g.out[2];
              if (i0 < 0 || i0 >= g.in[0] || i1 < 0 || i1 >= g.in[1]) {
                std::memset(seg, 0, sizeof(T) * static_cast<std::size_t>(g.out[2]));
                continue;
              }
              const T* src = in + (c * g.in[0] + i0) * in_plane12 + i1 * g.in[2];
              if (g.s[2] == 1) {
                // contiguous segment with clipped flanks
                const std::int64_t x_lo = std::max<std::int64_t>(0, g.p[2] - d2);
                const std::int64_t x_hi =
                    std::min<std::int64_t>(g.out[2], g.in[2] + g.p[2] - d2);
                for (std::int64_t x = 0; x < std::min(x_lo, g.out[2]); ++x) seg[x] = T{0};
                if (x_hi > x_lo) {
                  std::memcpy(seg + x_lo, src + x_lo + d2 - g.p[2],
                              sizeof(T) * static_cast<std::size_t>(x_hi - x_lo));
                }
                for (std::int64_t x = std::max(x_hi, std::int64_t{0}); x < g.out[2]; ++x)
                  seg[x] = T{0};
              } else {
                for (std::int64_t x = 0; x < g.out[2]; ++x) {
                  const std::int64_t i2 = x * g.s[2] + d2 - g.p[2];
                  seg[x] = (i2 >= 0 && i2 < g.in[2]) ? src[i2] : T{0};
                }
              }
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates col rows back into the input gradient.
template <typename T>
void col2im_add(const T* col, const ConvGeom& g, T* d_in) {
  const std::int64_t P = g.positions();
  const std::int64_t in_plane12 = g.in[1] * g.in[2];
  for (std::int64_t c = 0; c < g.channels; ++c) {
    for (std::int64_t d0 = 0; d0 < g.k[0]; ++d0) {
      for (std::int64_t d1 = 0; d1 < g.k[1]; ++d1) {
        for (std::int64_t d2 = 0; d2 < g.k[2]; ++d2) {
          const T* row = col + (((c * g.k[0] + d0) * g.k[1] + d1) * g.k[2] + d2) * P;
          for (std::int64_t t = 0; t < g.out[0]; ++t) {
            const std::int64_t i0 = t * g.s[0] + d0 - g.p[0];
            if (i0 < 0 || i0 >= g.in[0]) continue;
            for (std::int64_t y = 0; y < g.out[1]; ++y) {
              const std::int64_t i1 = y * g.s[1] + d1 - g.p[1];
              if (i1 < 0 || i1 >= g.in[1]) continue;
              const T* seg = row + (t * g.out[1] + y) * g.out[2];
              T* dst = d_in + (c * g.in[0] + i0) * in_plane12 + i1 * g.in[2];
              if (g.s[2] == 1) {
                const std::int64_t x_lo = std::max<std::int64_t>(0, g.p[2] - d2);
                const std::int64_t x_hi =
                    std::min<std::int64_t>(g.out[2], g.in[2] + g.p[2] - d2);
                const std::int64_t base = d2 - g.p[2];
                for (std::int64_t x = x_lo; x < x_hi; ++x) dst[x + base] += seg[x];
              } else {
                for (std::int64_t x = 0; x < g.out[2]; ++x) {
                  const std::int64_t i2 = x * g.s[2] + d2 - g.p[2];
                  if (i2 >= 0 && i2 < g.in[2]) dst[i2] += seg[x];
                }
              }
            }
          }
        }
      }
    }
  }
}

// out[o][p] = bias[o] + sum_k W[o][k] * col[k][p]
template <typename T>
void gemm_weights_col(const T* weights, const T* bias, const T* col,
                      std::int64_t O, std::int64_t K, std::int64_t P, T* out) {
  for (std::int64_t o = 0; o < O; ++o) {
    T* orow = out + o * P;
    const T b = bias ? bias[o] : T{0};
    for (std::int64_t p = 0; p < P; ++p) orow[p] = b;
    const T* wrow = weights + o * K;
    for (std::int64_t k = 0; k < K; ++k) {
      const T w = wrow[k];
      const T* crow = col + k * P;
      for (std::int64_t p = 0; p < P; ++p) orow[p] += w * crow[p];
    }
  }
}

// d_col[k][p] = sum_o W[o][k] * d_out[o][p]
template <typename T>
void gemm_weightsT_dout(const T* weights, const T* d_out,
                        std::int64_t O, std::int64_t K, std::int64_t P, T* d_col) {
  std::memset(d_col, 0, sizeof(T) * static_cast<std::size_t>(K * P));
  for (std::int64_t o = 0; o < O; ++o) {
    const T* wrow = weights + o * K;
    const T* drow = d_out + o * P;
    for (std::int64_t k = 0; k < K; ++k) {
      const T w = wrow[k];
      if (w == T{0}) continue;
      T* crow = d_col + k * P;
      for (std::int64_t p = 0; p < P; ++p) crow[p] += w * drow[p];
    }
  }
}

template <typename T>
Tensor<T> conv_forward_impl(const Tensor<T>& input, const Tensor<T>& weights,
                            const Tensor<T>& bias, const ConvSpec& spec) {
  const ConvGeom g = make_geom(spec, input.shape());
  extents wshape = {spec.out_channels, spec.in_channels};
  for (auto k : spec.kernel) wshape.push_back(k);
  if (weights.shape() != wshape) {
    throw shape_error("conv weights shape " + shape_to_string(weights.shape()) +
                      " != expected " + shape_to_string(wshape));
  }
  if (bias.shape() != extents{spec.out_channels}) {
    throw shape_error("conv bias shape " + shape_to_string(bias.shape()) +
                      " != expected [" + std::to_string(spec.out_channels) + "]");
  }
  const std::int64_t B = input.shape()[0];
  extents out_shape = {B, spec.out_channels};
  const std::size_t off = 3 - spec.spatial_rank();
  for (std::size_t a = off; a < 3; ++a) out_shape.push_back(g.out[a]);
  Tensor<T> out(out_shape, T{0});

  const std::int64_t K = g.patch(), P = g.positions();
  parallel_for(B, [&](std::int64_t b) {
    std::vector<T> col(static_cast<std::size_t>(K * P));
    im2col(input.data() + b * g.in_size(), g, col.data());
    gemm_weights_col(weights.data(), bias.data(), col.data(), g.out_channels, K, P,
                     out.data() + b * g.out_size());
  });
  return out;
}

template <typename T>
LayerGrads<T> conv_backward_impl(const Tensor<T>& input, const Tensor<T>& weights,
                                 const ConvSpec& spec, const Tensor<T>& d_output) {
  const ConvGeom g = make_geom(spec, input.shape());
  const std::int64_t B = input.shape()[0];
  {
    extents expect = {B, spec.out_channels};
    const std::size_t off = 3 - spec.spatial_rank();
    for (std::size_t a = off; a < 3; ++a) expect.push_back(g.out[a]);
    if (d_output.shape() != expect) {
      throw shape_error("conv d_output shape " + shape_to_string(d_output.shape()) +
                        " != forward output shape " + shape_to_string(expect));
    }
  }
  const std::int64_t K = g.patch(), P = g.positions();
  LayerGrads<T> grads;
  grads.d_input = Tensor<T>(input.shape(), T{0});
  grads.d_weights = Tensor<T>(weights.shape(), T{0});
  grads.d_bias = Tensor<T>(extents{g.out_channels}, T{0});

  // d_bias: fixed (b, o, p) order
  for (std::int64_t b = 0; b < B; ++b) {
    const T* dout = d_output.data() + b * g.out_size();
    for (std::int64_t o = 0; o < g.out_channels; ++o) {
      T acc = grads.d_bias[o];
      const T* drow = dout + o * P;
      for (std::int64_t p = 0; p < P; ++p) acc += drow[p];
      grads.d_bias[o] = acc;
    }
  }

  // d_input per item
  parallel_for(B, [&](std::int64_t b) {
    std::vector<T> d_col(static_cast<std::size_t>(K * P));
    gemm_weightsT_dout(weights.data(), d_output.data() + b * g.out_size(),
                       g.out_channels, K, P, d_col.data());
    col2im_add(d_col.data(), g, grads.d_input.data() + b * g.in_size());
  });

  // d_weights: cols for the whole batch, then per out-channel rows summing
  // items in fixed order so results do not depend on the thread count.
  std::vector<T> cols(static_cast<std::size_t>(B * K * P));
  parallel_for(B, [&](std::int64_t b) {
    im2col(input.data() + b * g.in_size(), g, cols.data() + b * K * P);
  });
  parallel_for(g.out_channels, [&](std::int64_t o) {
    T* wrow = grads.d_weights.data() + o * K;
    for (std::int64_t b = 0; b < B; ++b) {
      const T* drow = d_output.data() + b * g.out_size() + o * P;
      const T* col = cols.data() + b * K * P;
      for (std::int64_t k = 0; k < K; ++k) {
        const T* crow = col + k * P;
        T acc = T{0};
        for (std::int64_t p = 0; p < P; ++p) acc += drow[p] * crow[p];
        wrow[k] += acc;
      }
    }
  });
  return grads;
}

}  // namespace detail

/// out[b,o,y,x] = bias[o] + sum_{c,i,j} input[b,c,y*s+i-p, x*s+j-p] * w[o,c,i,j]
/// with zero padding outside the input.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights,
                         const Tensor<T>& bias, const ConvSpec& spec) {
  if (spec.spatial_rank() != 2) throw shape_error("conv2d spec must have 2 spatial axes");
  return detail::conv_forward_impl(input, weights, bias, spec);
}

template <typename T>
LayerGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights,
                              const ConvSpec& spec, const Tensor<T>& d_output) {
  if (spec.spatial_rank() != 2) throw shape_error("conv2d spec must have 2 spatial axes");
  return detail::conv_backward_impl(input, weights, spec, d_output);
}

/// 3D convolution over [B,C,T,H,W]; same contract as conv2d with a leading
/// temporal axis.
template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& input, const Tensor<T>& weights,
                         const Tensor<T>& bias, const ConvSpec& spec) {
  if (spec.spatial_rank() != 3) throw shape_error("conv3d spec must have 3 spatial axes");
  return detail::conv_forward_impl(input, weights, bias, spec);
}

template <typename T>
LayerGrads<T> conv3d_backward(const Tensor<T>& input, const Tensor<T>& weights,
                              const ConvSpec& spec, const Tensor<T>& d_output) {
  if (spec.spatial_rank() != 3) throw shape_error("conv3d spec must have 3 spatial axes");
  return detail::conv_backward_impl(input, weights, spec, d_output);
}

}  // namespace lvq
