#pragma once

#include "pancraft/autograd.hpp"

namespace pancraft {

/// Sliding-window attention. For every query pixel, scores against the keys
/// in the window x window neighbourhood centred on it are scaled by
/// 1/sqrt(C/heads), softmax-normalized over that neighbourhood and used to
/// average the values. Neighbours outside the image are excluded (their
/// weight is exactly zero), so border pixels renormalize over fewer keys.
/// Channels are split into `heads` contiguous groups.
///
/// q, k, v: [B, C, H, W]; window odd; C divisible by heads.
template <typename T>
Var<T> local_attn(const Var<T>& q, const Var<T>& k, const Var<T>& v, int window, int heads);

/// Tape-free evaluation. When `weights` is non-null it receives the attention
/// weights as [B*heads, H*W, window, window], zero outside the image.
template <typename T>
Tensor<T> local_attn_forward(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, int window, int heads,
                             Tensor<T>* weights = nullptr);

}  // namespace pancraft
