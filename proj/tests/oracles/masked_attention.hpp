#pragma once

#include <cmath>
#include <cstdlib>
#include <limits>
#include <vector>

#include "pancraft/tensor.hpp"

namespace oracle {

// Global attention over all H*W keys with an additive mask of -inf outside
// the window x window neighbourhood of each query. Dense, O((HW)^2).
template <typename T>
pancraft::Tensor<T> masked_global_attention(const pancraft::Tensor<T>& q, const pancraft::Tensor<T>& k,
                                            const pancraft::Tensor<T>& v, int window, int heads) {
  const int64_t B = q.dim(0), C = q.dim(1), H = q.dim(2), W = q.dim(3);
  const int64_t d = C / heads, n = H * W, r = window / 2;
  const T scale = T(1) / std::sqrt(static_cast<T>(d));
  const T neg_inf = -std::numeric_limits<T>::infinity();
  pancraft::Tensor<T> out(q.shape());
  std::vector<T> logits(static_cast<size_t>(n));
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t h = 0; h < heads; ++h) {
      for (int64_t i = 0; i < n; ++i) {
        const int64_t yi = i / W, xi = i % W;
        T mx = neg_inf;
        for (int64_t j = 0; j < n; ++j) {
          const int64_t yj = j / W, xj = j % W;
          T s = 0;
          for (int64_t c = h * d; c < (h + 1) * d; ++c) s += q.at(b, c, yi, xi) * k.at(b, c, yj, xj);
          const bool inside = std::abs(yj - yi) <= r && std::abs(xj - xi) <= r;
          logits[static_cast<size_t>(j)] = inside ? s * scale : neg_inf;
          if (logits[static_cast<size_t>(j)] > mx) mx = logits[static_cast<size_t>(j)];
        }
        T z = 0;
        for (int64_t j = 0; j < n; ++j) {
          logits[static_cast<size_t>(j)] = std::exp(logits[static_cast<size_t>(j)] - mx);
          z += logits[static_cast<size_t>(j)];
        }
        for (int64_t c = h * d; c < (h + 1) * d; ++c) {
          T acc = 0;
          for (int64_t j = 0; j < n; ++j) acc += logits[static_cast<size_t>(j)] * v.at(b, c, j / W, j % W);
          out.at(b, c, yi, xi) = acc / z;
        }
      }
    }
  }
  return out;
}

}  // namespace oracle
