#include "pancraft/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "pancraft/error.hpp"

namespace pancraft {
namespace {

struct AttnGeometry {
  int64_t batch, channels, height, width;
  int heads, window;
  int64_t head_dim() const { return channels / heads; }
  int64_t pixels() const { return height * width; }
  int64_t taps() const { return static_cast<int64_t>(window) * window; }
};

AttnGeometry check(const Shape& q, const Shape& k, const Shape& v, int window, int heads) {
  if (q.rank() != 4) throw ShapeError("local_attn: expected [B,C,H,W], got " + q.str());
  require_same_shape(q, k, "local_attn");
  require_same_shape(q, v, "local_attn");
  if (window < 1 || window % 2 == 0) throw ShapeError("local_attn: window must be odd, got " + std::to_string(window));
  if (heads < 1 || q[1] % heads != 0) throw ShapeError("local_attn: channels not divisible by heads");
  return {q[0], q[1], q[2], q[3], heads, window};
}

// Copies one head of [B,C,H,W] into pixel-major [H*W, d].
template <typename T>
void gather(const T* src, const AttnGeometry& g, int64_t b, int64_t h, T* dst) {
  const int64_t d = g.head_dim(), P = g.pixels();
  const T* base = src + (b * g.channels + h * d) * P;
  for (int64_t t = 0; t < d; ++t) {
    for (int64_t p = 0; p < P; ++p) dst[p * d + t] = base[t * P + p];
  }
}

template <typename T>
void scatter_add(const T* src, const AttnGeometry& g, int64_t b, int64_t h, T* dst) {
  const int64_t d = g.head_dim(), P = g.pixels();
  T* base = dst + (b * g.channels + h * d) * P;
  for (int64_t t = 0; t < d; ++t) {
    for (int64_t p = 0; p < P; ++p) base[t * P + p] += src[p * d + t];
  }
}

// Forward for one (batch, head) slice, read and written in place in the
// channel-major layout. Rows are processed one at a time with a [taps, W]
// score buffer so the working set stays a few rows of q, k and v. Attention
// weights are stored as [P, taps] when `attn` is non-null.
template <typename T>
void forward_slice(const AttnGeometry& g, const T* q, const T* k, const T* v, T* attn, T* out) {
  const int64_t d = g.head_dim(), r = g.window / 2, taps = g.taps(), H = g.height, W = g.width, P = g.pixels();
  const T scale = T(1) / std::sqrt(static_cast<T>(d));
  const T neg_inf = -std::numeric_limits<T>::infinity();
  std::vector<T> S(static_cast<size_t>(taps * W)), m(static_cast<size_t>(W)), total(static_cast<size_t>(W));
  for (int64_t i = 0; i < H; ++i) {
    std::fill(S.begin(), S.end(), neg_inf);
    for (int64_t dm = -r; dm <= r; ++dm) {
      const int64_t ii = i + dm;
      if (ii < 0 || ii >= H) continue;
      for (int64_t dn = -r; dn <= r; ++dn) {
        T* st = S.data() + ((dm + r) * g.window + (dn + r)) * W;
        const int64_t lo = std::max<int64_t>(0, -dn), hi = std::min<int64_t>(W, W - dn);
        if (lo >= hi) continue;
        std::fill(st + lo, st + hi, T(0));
        for (int64_t c = 0; c < d; ++c) {
          const T* qr = q + c * P + i * W;
          const T* kr = k + c * P + ii * W + dn;
          for (int64_t j = lo; j < hi; ++j) st[j] += qr[j] * kr[j];
        }
        for (int64_t j = lo; j < hi; ++j) st[j] *= scale;
      }
    }
    std::fill(m.begin(), m.end(), neg_inf);
    std::fill(total.begin(), total.end(), T(0));
    for (int64_t t = 0; t < taps; ++t)
      for (int64_t j = 0; j < W; ++j) m[j] = std::max(m[j], S[t * W + j]);
    for (int64_t t = 0; t < taps; ++t) {
      T* st = S.data() + t * W;
      for (int64_t j = 0; j < W; ++j) {
        st[j] = st[j] == neg_inf ? T(0) : std::exp(st[j] - m[j]);
        total[j] += st[j];
      }
    }
    for (int64_t t = 0; t < taps; ++t) {
      T* st = S.data() + t * W;
      for (int64_t j = 0; j < W; ++j) st[j] /= total[j];
    }
    if (attn) {
      for (int64_t j = 0; j < W; ++j) {
        T* ap = attn + (i * W + j) * taps;
        for (int64_t t = 0; t < taps; ++t) ap[t] = S[t * W + j];
      }
    }
    for (int64_t c = 0; c < d; ++c) {
      T* orow = out + c * P + i * W;
      std::fill(orow, orow + W, T(0));
      for (int64_t dm = -r; dm <= r; ++dm) {
        const int64_t ii = i + dm;
        if (ii < 0 || ii >= H) continue;
        for (int64_t dn = -r; dn <= r; ++dn) {
          const T* st = S.data() + ((dm + r) * g.window + (dn + r)) * W;
          const T* vr = v + c * P + ii * W + dn;
          const int64_t lo = std::max<int64_t>(0, -dn), hi = std::min<int64_t>(W, W - dn);
          for (int64_t j = lo; j < hi; ++j) orow[j] += st[j] * vr[j];
        }
      }
    }
  }
}

// `attn`, when non-null, receives the weights of every slice as [slices, P, taps].
template <typename T>
Tensor<T> run_forward(const AttnGeometry& g, const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                      std::vector<T>* attn) {
  const int64_t d = g.head_dim(), P = g.pixels(), slices = g.batch * g.heads;
  if (attn) attn->resize(static_cast<size_t>(slices * P * g.taps()));
  Tensor<T> out(q.shape());
#pragma omp parallel for schedule(static) if (slices > 1)
  for (int64_t s = 0; s < slices; ++s) {
    const int64_t offset = s * d * P;
    forward_slice(g, q.data() + offset, k.data() + offset, v.data() + offset,
                  attn ? attn->data() + s * P * g.taps() : nullptr, out.data() + offset);
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> local_attn_forward(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, int window, int heads,
                             Tensor<T>* weights) {
  const AttnGeometry g = check(q.shape(), k.shape(), v.shape(), window, heads);
  std::vector<T> attn;
  Tensor<T> out = run_forward(g, q, k, v, weights ? &attn : nullptr);
  if (weights) *weights = Tensor<T>(Shape{g.batch * g.heads, g.pixels(), window, window}, std::move(attn));
  return out;
}

template <typename T>
Var<T> local_attn(const Var<T>& q, const Var<T>& k, const Var<T>& v, int window, int heads) {
  const AttnGeometry g = check(q.shape(), k.shape(), v.shape(), window, heads);
  auto attn = std::make_shared<std::vector<T>>();
  Tensor<T> out = run_forward(g, q.value(), k.value(), v.value(), attn.get());
  if (!q.tape()) throw Error("local_attn: inputs are not attached to a tape");
  return q.tape()->record(std::move(out), {q, k, v}, [g, attn](Node<T>& n) {
    auto* gq = n.input_grad(0);
    auto* gk = n.input_grad(1);
    auto* gv = n.input_grad(2);
    const int64_t d = g.head_dim(), P = g.pixels(), taps = g.taps(), r = g.window / 2;
    const T scale = T(1) / std::sqrt(static_cast<T>(d));
    const int64_t slices = g.batch * g.heads;
#pragma omp parallel for schedule(static) if (slices > 1)
    for (int64_t s = 0; s < slices; ++s) {
      const int64_t b = s / g.heads, h = s % g.heads;
      const size_t sz = static_cast<size_t>(P * d);
      std::vector<T> qs(sz), ks(sz), vs(sz), go(sz), dq(sz, T(0)), dk(sz, T(0)), dv(sz, T(0));
      std::vector<T> da(static_cast<size_t>(taps));
      gather(n.input_value(0).data(), g, b, h, qs.data());
      gather(n.input_value(1).data(), g, b, h, ks.data());
      gather(n.input_value(2).data(), g, b, h, vs.data());
      gather(n.grad.data(), g, b, h, go.data());
      const T* A = attn->data() + s * P * taps;
      for (int64_t i = 0; i < g.height; ++i) {
        for (int64_t j = 0; j < g.width; ++j) {
          const int64_t p = i * g.width + j;
          const T* ap = A + p * taps;
          const T* gop = go.data() + p * d;
          T weighted = 0;
          for (int64_t dm = -r; dm <= r; ++dm) {
            for (int64_t dn = -r; dn <= r; ++dn) {
              const int64_t t = (dm + r) * g.window + (dn + r);
              da[t] = 0;
              if (ap[t] == T(0)) continue;
              const int64_t pp = (i + dm) * g.width + (j + dn);
              const T* vp = vs.data() + pp * d;
              T* dvp = dv.data() + pp * d;
              T acc = 0;
              for (int64_t c = 0; c < d; ++c) {
                acc += gop[c] * vp[c];
                dvp[c] += ap[t] * gop[c];
              }
              da[t] = acc;
              weighted += ap[t] * acc;
            }
          }
          T* dqp = dq.data() + p * d;
          const T* qp = qs.data() + p * d;
          for (int64_t dm = -r; dm <= r; ++dm) {
            for (int64_t dn = -r; dn <= r; ++dn) {
              const int64_t t = (dm + r) * g.window + (dn + r);
              if (ap[t] == T(0)) continue;
              const T ds = ap[t] * (da[t] - weighted) * scale;
              const int64_t pp = (i + dm) * g.width + (j + dn);
              const T* kp = ks.data() + pp * d;
              T* dkp = dk.data() + pp * d;
              for (int64_t c = 0; c < d; ++c) {
                dqp[c] += ds * kp[c];
                dkp[c] += ds * qp[c];
              }
            }
          }
        }
      }
      if (gq) scatter_add(dq.data(), g, b, h, gq->data());
      if (gk) scatter_add(dk.data(), g, b, h, gk->data());
      if (gv) scatter_add(dv.data(), g, b, h, gv->data());
    }
  });
}

template Var<float> local_attn(const Var<float>&, const Var<float>&, const Var<float>&, int, int);
template Var<double> local_attn(const Var<double>&, const Var<double>&, const Var<double>&, int, int);
template Tensor<float> local_attn_forward(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, int, int,
                                          Tensor<float>*);
template Tensor<double> local_attn_forward(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, int,
                                           int, Tensor<double>*);

}  // namespace pancraft
