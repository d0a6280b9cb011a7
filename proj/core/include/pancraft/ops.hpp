#pragma once

#include <span>
#include <vector>

#include "pancraft/autograd.hpp"

namespace pancraft {

// Differentiable operations. Every op records itself on the tape of its
// first input; all inputs must share that tape.

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);
template <typename T> Var<T> silu(const Var<T>& x);

/// (1 + gamma_c) * x + beta_c over the channel axis of [B,C,H,W].
template <typename T> Var<T> modulate(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta);
/// alpha_c * x over the channel axis of [B,C,H,W].
template <typename T> Var<T> channel_scale(const Var<T>& x, const Var<T>& alpha);

/// x: [B,Cin,H,W], w: [Cout,Cin,kh,kw], b: [Cout]. Zero padding.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad);

/// Normalizes the channel vector at every pixel, then applies gamma/beta.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps);

/// Softmax over the trailing two axes (each k x k block sums to one).
template <typename T> Var<T> softmax_lastdims(const Var<T>& x);

template <typename T> Var<T> concat_channels(std::span<const Var<T>> parts);
template <typename T> Var<T> slice_channels(const Var<T>& x, int64_t begin, int64_t count);

template <typename T> Var<T> upsample_nearest2(const Var<T>& x);
template <typename T> Var<T> avg_pool2d(const Var<T>& x, int factor);

template <typename T> Var<T> sum(const Var<T>& x);
template <typename T> Var<T> mean(const Var<T>& x);
/// sum(x * weights) for a constant weight tensor; a random projection used by
/// gradient checks.
template <typename T> Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& weights);
/// mean |pred - target| with a constant target.
template <typename T> Var<T> l1_loss(const Var<T>& pred, const Tensor<T>& target);

}  // namespace pancraft
