#pragma once

#include <limits>
#include <string>
#include <vector>

#include "lvq/parallel.hpp"
#include "lvq/tensor.hpp"

namespace lvq {

struct PoolSpec {
  std::int64_t kh = 1, kw = 1;
  std::int64_t sh = 1, sw = 1;
  std::pair<std::int64_t, std::int64_t> pad_h{0, 0};
  std::pair<std::int64_t, std::int64_t> pad_w{0, 0};

  void validate() const {
    if (kh < 1 || kw < 1 || sh < 1 || sw < 1) {
      throw shape_error("pool kernel and stride must be >= 1");
    }
    if (pad_h.first < 0 || pad_h.second < 0 || pad_w.first < 0 || pad_w.second < 0) {
      throw shape_error("pool padding must be >= 0");
    }
    // any window lying entirely inside padding would have no real input
    if (pad_h.first >= kh || pad_h.second >= kh || pad_w.first >= kw ||
        pad_w.second >= kw) {
      throw shape_error("pool padding must be smaller than the kernel");
    }
  }

  std::int64_t out_extent(std::int64_t in, std::int64_t k, std::int64_t s,
                          const std::pair<std::int64_t, std::int64_t>& p) const {
    const auto padded = in + p.first + p.second;
    const auto out = (padded - k) / s + 1;
    if (padded < k || out < 1) throw shape_error("pool output extent non-positive");
    return out;
  }
};

template <typename T>
struct Pool2dResult {
  Tensor<T> output;
  /// Flat offset into the forward input of each window winner, row-major over
  /// (b, c, y', x'). Ties resolve to the first occurrence in scan order.
  std::vector<std::int64_t> argmax;
};

/// Max pooling over [B,C,H,W]; padding participates as -inf and is never
/// selected.
template <typename T>
Pool2dResult<T> maxpool2d_forward(const Tensor<T>& input, const PoolSpec& spec) {
  spec.validate();
  if (input.rank() != 4) throw shape_error("maxpool2d expects [B,C,H,W]");
  const std::int64_t B = input.shape()[0], C = input.shape()[1];
  const std::int64_t H = input.shape()[2], W = input.shape()[3];
  const std::int64_t Ho = spec.out_extent(H, spec.kh, spec.sh, spec.pad_h);
  const std::int64_t Wo = spec.out_extent(W, spec.kw, spec.sw, spec.pad_w);

  Pool2dResult<T> res{Tensor<T>(extents{B, C, Ho, Wo}, T{0}),
                      std::vector<std::int64_t>(static_cast<std::size_t>(B * C * Ho * Wo))};
  parallel_for(B * C, [&](std::int64_t bc) {
    const T* plane = input.data() + bc * H * W;
    T* orow = res.output.data() + bc * Ho * Wo;
    std::int64_t* arow = res.argmax.data() + bc * Ho * Wo;
    for (std::int64_t yo = 0; yo < Ho; ++yo) {
      for (std::int64_t xo = 0; xo < Wo; ++xo) {
        T best = -std::numeric_limits<T>::infinity();
        std::int64_t best_idx = -1;
        for (std::int64_t i = 0; i < spec.kh; ++i) {
          const std::int64_t y = yo * spec.sh + i - spec.pad_h.first;
          if (y < 0 || y >= H) continue;
          for (std::int64_t j = 0; j < spec.kw; ++j) {
            const std::int64_t x = xo * spec.sw + j - spec.pad_w.first;
            if (x < 0 || x >= W) continue;
            const T v = plane[y * W + x];
            if (v > best) {
              best = v;
              best_idx = bc * H * W + y * W + x;
            }
          }
        }
        orow[yo * Wo + xo] = best;
        arow[yo * Wo + xo] = best_idx;
      }
    }
  });
  return res;
}

/// Routes each upstream gradient to its recorded argmax position,
/// accumulating when windows overlap.
template <typename T>
Tensor<T> maxpool2d_backward(const std::vector<std::int64_t>& argmax,
                             const Tensor<T>& d_output, const extents& input_shape) {
  if (static_cast<std::int64_t>(argmax.size()) != d_output.size()) {
    throw shape_error("argmax length does not match d_output size");
  }
  Tensor<T> d_input(input_shape, T{0});
  const std::int64_t n = d_output.size();
  for (std::int64_t i = 0; i < n; ++i) {
    const auto idx = argmax[static_cast<std::size_t>(i)];
    if (idx < 0 || idx >= d_input.size()) {
      throw state_error("pool argmax index " + std::to_string(idx) + " out of range");
    }
    d_input[idx] += d_output[i];
  }
  return d_input;
}

}  // namespace lvq
