#include "pancraft/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pancraft/error.hpp"
#include "pancraft/kernels.hpp"

namespace pancraft {
namespace {

template <typename T>
Tape<T>& tape_of(const Var<T>& v) {
  if (!v.valid() || v.tape() == nullptr) throw Error("operation on a value that is not attached to a tape");
  return *v.tape();
}

struct Nchw {
  int64_t b, c, h, w;
  int64_t plane() const { return h * w; }
};

Nchw nchw(const Shape& s, const char* op) {
  if (s.rank() != 4) throw ShapeError(std::string(op) + ": expected [B,C,H,W], got " + s.str());
  return {s[0], s[1], s[2], s[3]};
}

template <typename T>
void check_channel_vector(const Var<T>& p, int64_t c, const char* op) {
  if (p.shape().rank() != 1 || p.dim(0) != c) {
    throw ShapeError(std::string(op) + ": expected channel vector of length " + std::to_string(c) + ", got " +
                     p.shape().str());
  }
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out = a.value();
  out += b.value();
  return tape_of(a).record(std::move(out), {a, b}, [](Node<T>& n) {
    for (size_t i = 0; i < 2; ++i) {
      if (auto* g = n.input_grad(i)) *g += n.grad;
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out = a.value();
  const T* bv = b.value().data();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  return tape_of(a).record(std::move(out), {a, b}, [](Node<T>& n) {
    if (auto* g = n.input_grad(0)) *g += n.grad;
    if (auto* g = n.input_grad(1)) {
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] -= n.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out = a.value();
  const T* bv = b.value().data();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  return tape_of(a).record(std::move(out), {a, b}, [](Node<T>& n) {
    const Tensor<T>& av = n.input_value(0);
    const Tensor<T>& bv = n.input_value(1);
    if (auto* g = n.input_grad(0)) {
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += n.grad[i] * bv[i];
    }
    if (auto* g = n.input_grad(1)) {
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += n.grad[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out = a.value();
  for (auto& v : out.storage()) v *= s;
  return tape_of(a).record(std::move(out), {a}, [s](Node<T>& n) {
    if (auto* g = n.input_grad(0)) {
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += s * n.grad[i];
    }
  });
}

template <typename T>
Var<T> silu(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.storage()) v = v / (T(1) + std::exp(-v));
  return tape_of(x).record(std::move(out), {x}, [](Node<T>& n) {
    auto* g = n.input_grad(0);
    if (!g) return;
    const Tensor<T>& xv = n.input_value(0);
    for (int64_t i = 0; i < g->numel(); ++i) {
      const T s = T(1) / (T(1) + std::exp(-xv[i]));
      (*g)[i] += n.grad[i] * s * (T(1) + xv[i] * (T(1) - s));
    }
  });
}

template <typename T>
Var<T> modulate(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta) {
  const Nchw d = nchw(x.shape(), "modulate");
  check_channel_vector(gamma, d.c, "modulate");
  check_channel_vector(beta, d.c, "modulate");
  Tensor<T> out(x.shape());
  const T* xv = x.value().data();
  for (int64_t b = 0; b < d.b; ++b) {
    for (int64_t c = 0; c < d.c; ++c) {
      const T s = T(1) + gamma.value()[c];
      const T t = beta.value()[c];
      const int64_t off = (b * d.c + c) * d.plane();
      for (int64_t p = 0; p < d.plane(); ++p) out[off + p] = s * xv[off + p] + t;
    }
  }
  return tape_of(x).record(std::move(out), {x, gamma, beta}, [d](Node<T>& n) {
    const Tensor<T>& xv = n.input_value(0);
    const Tensor<T>& gv = n.input_value(1);
    auto* gx = n.input_grad(0);
    auto* gg = n.input_grad(1);
    auto* gb = n.input_grad(2);
    for (int64_t b = 0; b < d.b; ++b) {
      for (int64_t c = 0; c < d.c; ++c) {
        const int64_t off = (b * d.c + c) * d.plane();
        const T s = T(1) + gv[c];
        T dg = 0, db = 0;
        for (int64_t p = 0; p < d.plane(); ++p) {
          const T go = n.grad[off + p];
          if (gx) (*gx)[off + p] += s * go;
          dg += go * xv[off + p];
          db += go;
        }
        if (gg) (*gg)[c] += dg;
        if (gb) (*gb)[c] += db;
      }
    }
  });
}

template <typename T>
Var<T> channel_scale(const Var<T>& x, const Var<T>& alpha) {
  const Nchw d = nchw(x.shape(), "channel_scale");
  check_channel_vector(alpha, d.c, "channel_scale");
  Tensor<T> out(x.shape());
  const T* xv = x.value().data();
  for (int64_t b = 0; b < d.b; ++b) {
    for (int64_t c = 0; c < d.c; ++c) {
      const T a = alpha.value()[c];
      const int64_t off = (b * d.c + c) * d.plane();
      for (int64_t p = 0; p < d.plane(); ++p) out[off + p] = a * xv[off + p];
    }
  }
  return tape_of(x).record(std::move(out), {x, alpha}, [d](Node<T>& n) {
    const Tensor<T>& xv = n.input_value(0);
    const Tensor<T>& av = n.input_value(1);
    auto* gx = n.input_grad(0);
    auto* ga = n.input_grad(1);
    for (int64_t b = 0; b < d.b; ++b) {
      for (int64_t c = 0; c < d.c; ++c) {
        const int64_t off = (b * d.c + c) * d.plane();
        T da = 0;
        for (int64_t p = 0; p < d.plane(); ++p) {
          const T go = n.grad[off + p];
          if (gx) (*gx)[off + p] += av[c] * go;
          da += go * xv[off + p];
        }
        if (ga) (*ga)[c] += da;
      }
    }
  });
}

// Per-thread column buffer, grown on demand and never zero-filled again.
template <typename T>
T* conv_scratch(size_t n) {
  thread_local std::vector<T> buf;
  if (buf.size() < n) buf.resize(n);
  return buf.data();
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
  const Nchw d = nchw(x.shape(), "conv2d");
  if (w.shape().rank() != 4) throw ShapeError("conv2d: weight must be [Cout,Cin,kh,kw], got " + w.shape().str());
  const int64_t cout = w.dim(0);
  if (w.dim(1) != d.c) {
    throw ShapeError("conv2d: input has " + std::to_string(d.c) + " channels but weight expects " +
                     std::to_string(w.dim(1)));
  }
  check_channel_vector(b, cout, "conv2d bias");
  const ConvGeometry g{d.c, d.h, d.w, w.dim(2), w.dim(3), stride, pad};
  g.validate();
  const int64_t ho = g.out_height(), wo = g.out_width();
  const int64_t npix = ho * wo, kdim = g.patch_size();
  // 1x1 stride-1 convolutions read the input directly as the column matrix.
  const bool pointwise = g.kernel_h == 1 && g.kernel_w == 1 && stride == 1 && pad == 0;

  Tensor<T> out(Shape{d.b, cout, ho, wo});
  const T* wv = w.value().data();
  const T* bv = b.value().data();
#pragma omp parallel for schedule(static) if (d.b > 1)
  for (int64_t bi = 0; bi < d.b; ++bi) {
    const T* colp = x.value().data() + bi * d.c * d.plane();
    if (!pointwise) {
      T* cols = conv_scratch<T>(static_cast<size_t>(kdim * npix));
      im2col(g, colp, cols);
      colp = cols;
    }
    T* ob = out.data() + bi * cout * npix;
    gemm<T>(false, false, cout, npix, kdim, T(1), wv, colp, T(0), ob);
    for (int64_t co = 0; co < cout; ++co) {
      for (int64_t p = 0; p < npix; ++p) ob[co * npix + p] += bv[co];
    }
  }

  return tape_of(x).record(std::move(out), {x, w, b}, [g, d, cout, npix, kdim, pointwise](Node<T>& n) {
    const Tensor<T>& xv = n.input_value(0);
    const Tensor<T>& wv = n.input_value(1);
    auto* gx = n.input_grad(0);
    auto* gw = n.input_grad(1);
    auto* gb = n.input_grad(2);
    if (gb) {
      for (int64_t bi = 0; bi < d.b; ++bi) {
        for (int64_t co = 0; co < cout; ++co) {
          const T* go = n.grad.data() + (bi * cout + co) * npix;
          T s = 0;
          for (int64_t p = 0; p < npix; ++p) s += go[p];
          (*gb)[co] += s;
        }
      }
    }
    if (gw) {
      T* cols = pointwise ? nullptr : conv_scratch<T>(static_cast<size_t>(kdim * npix));
      for (int64_t bi = 0; bi < d.b; ++bi) {
        const T* colp = xv.data() + bi * d.c * d.plane();
        if (!pointwise) {
          im2col(g, colp, cols);
          colp = cols;
        }
        gemm<T>(false, true, cout, kdim, npix, T(1), n.grad.data() + bi * cout * npix, colp, T(1), gw->data());
      }
    }
    if (gx) {
#pragma omp parallel for schedule(static) if (d.b > 1)
      for (int64_t bi = 0; bi < d.b; ++bi) {
        const T* go = n.grad.data() + bi * cout * npix;
        T* gxb = gx->data() + bi * d.c * d.plane();
        if (pointwise) {
          gemm<T>(true, false, kdim, npix, cout, T(1), wv.data(), go, T(1), gxb);
        } else {
          T* dcols = conv_scratch<T>(static_cast<size_t>(kdim * npix));
          gemm<T>(true, false, kdim, npix, cout, T(1), wv.data(), go, T(0), dcols);
          col2im(g, dcols, gxb);
        }
      }
    }
  });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  const Nchw d = nchw(x.shape(), "layer_norm");
  check_channel_vector(gamma, d.c, "layer_norm");
  check_channel_vector(beta, d.c, "layer_norm");
  if (!(eps > T(0))) throw Error("layer_norm: eps must be positive");
  const int64_t P = d.plane();
  // Saved for backward: normalized input and 1/sigma per pixel.
  auto xhat = std::make_shared<Tensor<T>>(x.shape());
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<size_t>(d.b * P));
  Tensor<T> out(x.shape());
  const T* xv = x.value().data();
  std::vector<T> mu(static_cast<size_t>(P)), var(static_cast<size_t>(P));
  for (int64_t b = 0; b < d.b; ++b) {
    std::fill(mu.begin(), mu.end(), T(0));
    std::fill(var.begin(), var.end(), T(0));
    const T* xb = xv + b * d.c * P;
    for (int64_t c = 0; c < d.c; ++c) {
      for (int64_t p = 0; p < P; ++p) mu[p] += xb[c * P + p];
    }
    for (int64_t p = 0; p < P; ++p) mu[p] /= T(d.c);
    for (int64_t c = 0; c < d.c; ++c) {
      for (int64_t p = 0; p < P; ++p) {
        const T t = xb[c * P + p] - mu[p];
        var[p] += t * t;
      }
    }
    T* is = inv_std->data() + b * P;
    for (int64_t p = 0; p < P; ++p) is[p] = T(1) / std::sqrt(var[p] / T(d.c) + eps);
    for (int64_t c = 0; c < d.c; ++c) {
      const T gc = gamma.value()[c], bc = beta.value()[c];
      T* xh = xhat->data() + (b * d.c + c) * P;
      T* ob = out.data() + (b * d.c + c) * P;
      for (int64_t p = 0; p < P; ++p) {
        xh[p] = (xb[c * P + p] - mu[p]) * is[p];
        ob[p] = gc * xh[p] + bc;
      }
    }
  }
  return tape_of(x).record(std::move(out), {x, gamma, beta}, [d, xhat, inv_std](Node<T>& n) {
    const int64_t P = d.plane();
    const Tensor<T>& gv = n.input_value(1);
    auto* gx = n.input_grad(0);
    auto* gg = n.input_grad(1);
    auto* gb = n.input_grad(2);
    std::vector<T> m1(static_cast<size_t>(P)), m2(static_cast<size_t>(P));
    for (int64_t b = 0; b < d.b; ++b) {
      std::fill(m1.begin(), m1.end(), T(0));
      std::fill(m2.begin(), m2.end(), T(0));
      for (int64_t c = 0; c < d.c; ++c) {
        const T* go = n.grad.data() + (b * d.c + c) * P;
        const T* xh = xhat->data() + (b * d.c + c) * P;
        T dg = 0, db = 0;
        for (int64_t p = 0; p < P; ++p) {
          const T dxh = go[p] * gv[c];
          m1[p] += dxh;
          m2[p] += dxh * xh[p];
          dg += go[p] * xh[p];
          db += go[p];
        }
        if (gg) (*gg)[c] += dg;
        if (gb) (*gb)[c] += db;
      }
      if (!gx) continue;
      const T* is = inv_std->data() + b * P;
      for (int64_t c = 0; c < d.c; ++c) {
        const T* go = n.grad.data() + (b * d.c + c) * P;
        const T* xh = xhat->data() + (b * d.c + c) * P;
        T* gxb = gx->data() + (b * d.c + c) * P;
        for (int64_t p = 0; p < P; ++p) {
          const T dxh = go[p] * gv[c];
          gxb[p] += is[p] * (dxh - m1[p] / T(d.c) - xh[p] * m2[p] / T(d.c));
        }
      }
    }
  });
}

template <typename T>
Var<T> softmax_lastdims(const Var<T>& x) {
  const Shape& s = x.shape();
  if (s.rank() < 2) throw ShapeError("softmax_lastdims: rank must be >= 2");
  const int64_t block = s.dim(-1) * s.dim(-2);
  const int64_t nblocks = s.numel() / block;
  Tensor<T> out(s);
  const T* xv = x.value().data();
  for (int64_t k = 0; k < nblocks; ++k) {
    const T* in = xv + k * block;
    T* o = out.data() + k * block;
    const T m = *std::max_element(in, in + block);
    T total = 0;
    for (int64_t i = 0; i < block; ++i) {
      o[i] = std::exp(in[i] - m);
      total += o[i];
    }
    for (int64_t i = 0; i < block; ++i) o[i] /= total;
  }
  return tape_of(x).record(std::move(out), {x}, [block, nblocks](Node<T>& n) {
    auto* g = n.input_grad(0);
    if (!g) return;
    // Reads the saved output through the node that owns the closure.
    const T* y = n.value.data();
    for (int64_t k = 0; k < nblocks; ++k) {
      const T* yk = y + k * block;
      const T* gk = n.grad.data() + k * block;
      T dot = 0;
      for (int64_t i = 0; i < block; ++i) dot += yk[i] * gk[i];
      for (int64_t i = 0; i < block; ++i) (*g)[k * block + i] += yk[i] * (gk[i] - dot);
    }
  });
}

template <typename T>
Var<T> concat_channels(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: nothing to concatenate");
  const Nchw d0 = nchw(parts[0].shape(), "concat_channels");
  int64_t ctot = 0;
  std::vector<int64_t> offsets;
  for (const auto& p : parts) {
    const Nchw d = nchw(p.shape(), "concat_channels");
    if (d.b != d0.b || d.h != d0.h || d.w != d0.w) {
      throw ShapeError("concat_channels: resolution mismatch " + p.shape().str() + " vs " + parts[0].shape().str());
    }
    offsets.push_back(ctot);
    ctot += d.c;
  }
  const int64_t P = d0.plane();
  Tensor<T> out(Shape{d0.b, ctot, d0.h, d0.w});
  for (size_t i = 0; i < parts.size(); ++i) {
    const int64_t c = parts[i].dim(1);
    for (int64_t b = 0; b < d0.b; ++b) {
      std::copy_n(parts[i].value().data() + b * c * P, c * P, out.data() + (b * ctot + offsets[i]) * P);
    }
  }
  std::vector<Var<T>> inputs(parts.begin(), parts.end());
  return tape_of(parts[0]).record(std::move(out), std::move(inputs), [offsets, ctot, d0](Node<T>& n) {
    const int64_t P = d0.plane();
    for (size_t i = 0; i < n.inputs.size(); ++i) {
      auto* g = n.input_grad(i);
      if (!g) continue;
      const int64_t c = g->dim(1);
      for (int64_t b = 0; b < d0.b; ++b) {
        const T* src = n.grad.data() + (b * ctot + offsets[i]) * P;
        T* dst = g->data() + b * c * P;
        for (int64_t k = 0; k < c * P; ++k) dst[k] += src[k];
      }
    }
  });
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, int64_t begin, int64_t count) {
  const Nchw d = nchw(x.shape(), "slice_channels");
  if (begin < 0 || count < 1 || begin + count > d.c) throw ShapeError("slice_channels: range out of bounds");
  const int64_t P = d.plane();
  Tensor<T> out(Shape{d.b, count, d.h, d.w});
  for (int64_t b = 0; b < d.b; ++b) {
    std::copy_n(x.value().data() + (b * d.c + begin) * P, count * P, out.data() + b * count * P);
  }
  return tape_of(x).record(std::move(out), {x}, [d, begin, count](Node<T>& n) {
    auto* g = n.input_grad(0);
    if (!g) return;
    const int64_t P = d.plane();
    for (int64_t b = 0; b < d.b; ++b) {
      const T* src = n.grad.data() + b * count * P;
      T* dst = g->data() + (b * d.c + begin) * P;
      for (int64_t k = 0; k < count * P; ++k) dst[k] += src[k];
    }
  });
}

template <typename T>
Var<T> upsample_nearest2(const Var<T>& x) {
  const Nchw d = nchw(x.shape(), "upsample_nearest2");
  const int64_t oh = 2 * d.h, ow = 2 * d.w;
  Tensor<T> out(Shape{d.b, d.c, oh, ow});
  const T* xv = x.value().data();
  for (int64_t pl = 0; pl < d.b * d.c; ++pl) {
    for (int64_t y = 0; y < oh; ++y) {
      for (int64_t xx = 0; xx < ow; ++xx) out[(pl * oh + y) * ow + xx] = xv[(pl * d.h + y / 2) * d.w + xx / 2];
    }
  }
  return tape_of(x).record(std::move(out), {x}, [d, oh, ow](Node<T>& n) {
    auto* g = n.input_grad(0);
    if (!g) return;
    for (int64_t pl = 0; pl < d.b * d.c; ++pl) {
      for (int64_t y = 0; y < oh; ++y) {
        for (int64_t xx = 0; xx < ow; ++xx) (*g)[(pl * d.h + y / 2) * d.w + xx / 2] += n.grad[(pl * oh + y) * ow + xx];
      }
    }
  });
}

template <typename T>
Var<T> avg_pool2d(const Var<T>& x, int factor) {
  const Nchw d = nchw(x.shape(), "avg_pool2d");
  if (factor < 1 || d.h % factor || d.w % factor) throw ShapeError("avg_pool2d: extents not divisible by factor");
  const int64_t oh = d.h / factor, ow = d.w / factor;
  const T inv = T(1) / T(factor * factor);
  Tensor<T> out(Shape{d.b, d.c, oh, ow});
  const T* xv = x.value().data();
  for (int64_t pl = 0; pl < d.b * d.c; ++pl) {
    for (int64_t y = 0; y < d.h; ++y) {
      for (int64_t xx = 0; xx < d.w; ++xx) out[(pl * oh + y / factor) * ow + xx / factor] += xv[(pl * d.h + y) * d.w + xx];
    }
  }
  for (auto& v : out.storage()) v *= inv;
  return tape_of(x).record(std::move(out), {x}, [d, oh, ow, factor, inv](Node<T>& n) {
    auto* g = n.input_grad(0);
    if (!g) return;
    for (int64_t pl = 0; pl < d.b * d.c; ++pl) {
      for (int64_t y = 0; y < d.h; ++y) {
        for (int64_t xx = 0; xx < d.w; ++xx) {
          (*g)[(pl * d.h + y) * d.w + xx] += inv * n.grad[(pl * oh + y / factor) * ow + xx / factor];
        }
      }
    }
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T s = 0;
  for (T v : x.value().storage()) s += v;
  return tape_of(x).record(Tensor<T>(Shape{1}, s), {x}, [](Node<T>& n) {
    auto* g = n.input_grad(0);
    if (!g) return;
    const T go = n.grad[0];
    for (auto& v : g->storage()) v += go;
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  return scale(sum(x), T(1) / T(x.value().numel()));
}

template <typename T>
Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& weights) {
  require_same_shape(x.shape(), weights.shape(), "weighted_sum");
  T s = 0;
  for (int64_t i = 0; i < weights.numel(); ++i) s += x.value()[i] * weights[i];
  return tape_of(x).record(Tensor<T>(Shape{1}, s), {x}, [weights](Node<T>& n) {
    auto* g = n.input_grad(0);
    if (!g) return;
    const T go = n.grad[0];
    for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += go * weights[i];
  });
}

template <typename T>
Var<T> l1_loss(const Var<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred.shape(), target.shape(), "l1_loss");
  const int64_t n = target.numel();
  double s = 0;
  for (int64_t i = 0; i < n; ++i) s += std::abs(static_cast<double>(pred.value()[i]) - target[i]);
  const T value = static_cast<T>(s / static_cast<double>(n));
  return tape_of(pred).record(Tensor<T>(Shape{1}, value), {pred}, [target, n](Node<T>& node) {
    auto* g = node.input_grad(0);
    if (!g) return;
    const T k = node.grad[0] / T(n);
    const Tensor<T>& pv = node.input_value(0);
    for (int64_t i = 0; i < n; ++i) {
      const T diff = pv[i] - target[i];
      (*g)[i] += diff > 0 ? k : (diff < 0 ? -k : T(0));
    }
  });
}

#define PANCRAFT_INSTANTIATE(T)                                                               \
  template Var<T> add(const Var<T>&, const Var<T>&);                                         \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                         \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                         \
  template Var<T> scale(const Var<T>&, T);                                                   \
  template Var<T> silu(const Var<T>&);                                                       \
  template Var<T> modulate(const Var<T>&, const Var<T>&, const Var<T>&);                     \
  template Var<T> channel_scale(const Var<T>&, const Var<T>&);                               \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);             \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);                \
  template Var<T> softmax_lastdims(const Var<T>&);                                           \
  template Var<T> concat_channels(std::span<const Var<T>>);                                  \
  template Var<T> slice_channels(const Var<T>&, int64_t, int64_t);                           \
  template Var<T> upsample_nearest2(const Var<T>&);                                          \
  template Var<T> avg_pool2d(const Var<T>&, int);                                            \
  template Var<T> sum(const Var<T>&);                                                        \
  template Var<T> mean(const Var<T>&);                                                       \
  template Var<T> weighted_sum(const Var<T>&, const Tensor<T>&);                             \
  template Var<T> l1_loss(const Var<T>&, const Tensor<T>&);

PANCRAFT_INSTANTIATE(float)
PANCRAFT_INSTANTIATE(double)
#undef PANCRAFT_INSTANTIATE

}  // namespace pancraft
