#include "pancraft/metrics.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "pancraft/error.hpp"

namespace pancraft {

using nlohmann::json;
namespace mc = metric_constants;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Image {
  int64_t c, h, w;
  std::vector<double> v;
  const double* band(int64_t b) const { return v.data() + b * h * w; }
  double at(int64_t b, int64_t y, int64_t x) const { return v[static_cast<size_t>((b * h + y) * w + x)]; }
};

template <typename T>
Image to_image(const Tensor<T>& t, const char* op) {
  if (t.rank() != 3) throw ShapeError(std::string(op) + ": expected [C,H,W], got " + t.shape().str());
  return Image{t.dim(0), t.dim(1), t.dim(2), std::vector<double>(t.storage().begin(), t.storage().end())};
}

template <typename T>
std::pair<Image, Image> pair_of(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require_same_shape(a.shape(), b.shape(), op);
  return {to_image(a, op), to_image(b, op)};
}

// Tile origins along one axis: stride `block`, or a single tile spanning the
// axis when it is shorter than one block.
std::vector<std::pair<int64_t, int64_t>> tiles(int64_t extent, int64_t block) {
  if (extent <= block) return {{0, extent}};
  std::vector<std::pair<int64_t, int64_t>> out;
  for (int64_t o = 0; o + block <= extent; o += block) out.emplace_back(o, block);
  return out;
}

// Cayley-Dickson product of two hypercomplex numbers with n = 2^k parts.
std::vector<double> conj(std::vector<double> v) {
  for (size_t i = 1; i < v.size(); ++i) v[i] = -v[i];
  return v;
}

std::vector<double> onion_mult(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  if (n == 1) return {x[0] * y[0]};
  const size_t half = n / 2;
  const std::vector<double> a(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(half));
  const std::vector<double> b = conj(std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(half), x.end()));
  const std::vector<double> c(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(half));
  const std::vector<double> d = conj(std::vector<double>(y.begin() + static_cast<std::ptrdiff_t>(half), y.end()));
  if (n == 2) return {a[0] * c[0] - d[0] * b[0], a[0] * d[0] + c[0] * b[0]};
  const auto r1 = onion_mult(a, c);
  const auto r2 = onion_mult(d, conj(b));
  const auto r3 = onion_mult(conj(a), d);
  const auto r4 = onion_mult(c, b);
  std::vector<double> out(n);
  for (size_t i = 0; i < half; ++i) {
    out[i] = r1[i] - r2[i];
    out[half + i] = r3[i] + r4[i];
  }
  return out;
}

// Hypercomplex quality of one tile. gt and fused hold n bands of p pixels.
double onion_quality(std::vector<std::vector<double>> gt, std::vector<std::vector<double>> fused) {
  const size_t n = gt.size(), p = gt[0].size();
  const double pd = static_cast<double>(p);
  const double k = pd / (pd - 1.0);
  // Normalize both images by the ground-truth tile statistics, then conjugate
  // the fused one.
  for (size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (double v : gt[i]) s += v;
    s /= pd;
    double var = 0.0;
    for (double v : gt[i]) var += (v - s) * (v - s);
    double t = std::sqrt(var / (pd - 1.0));
    if (t == 0.0) t = DBL_EPSILON;
    for (auto& v : gt[i]) v = (v - s) / t + 1.0;
    for (auto& v : fused[i]) {
      v = (v - s) / t + 1.0;
      if (i > 0) v = -v;
    }
  }
  std::vector<double> m1(n, 0.0), m2(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < p; ++j) {
      m1[i] += gt[i][j];
      m2[i] += fused[i][j];
    }
    m1[i] /= pd;
    m2[i] /= pd;
  }
  double q1m2 = 0.0, q2m2 = 0.0;
  for (size_t i = 0; i < n; ++i) {
    q1m2 += m1[i] * m1[i];
    q2m2 += m2[i] * m2[i];
  }
  double e1 = 0.0, e2 = 0.0;
  for (size_t j = 0; j < p; ++j) {
    for (size_t i = 0; i < n; ++i) {
      e1 += gt[i][j] * gt[i][j];
      e2 += fused[i][j] * fused[i][j];
    }
  }
  e1 /= pd;
  e2 /= pd;
  const double spread = k * e1 + k * e2 - k * (q1m2 + q2m2);
  const double mean_bias = 2.0 * std::sqrt(q1m2) * std::sqrt(q2m2) / (q1m2 + q2m2);
  std::vector<double> q(n, 0.0);
  if (spread == 0.0) {
    q[n - 1] = mean_bias;
  } else {
    std::vector<double> qv(n, 0.0), x(n), y(n);
    for (size_t j = 0; j < p; ++j) {
      for (size_t i = 0; i < n; ++i) {
        x[i] = gt[i][j];
        y[i] = fused[i][j];
      }
      const auto prod = onion_mult(x, y);
      for (size_t i = 0; i < n; ++i) qv[i] += prod[i];
    }
    const auto qm = onion_mult(m1, m2);
    for (size_t i = 0; i < n; ++i) q[i] = (k * qv[i] / pd - k * qm[i]) * mean_bias * (2.0 / spread);
  }
  double norm = 0.0;
  for (double v : q) norm += v * v;
  return std::sqrt(norm);
}

size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p *= 2;
  return p;
}

double q2n_image(const Image& f, const Image& g, int64_t block) {
  if (f.h * f.w < 2) throw ShapeError("q2n: image needs at least two pixels");
  const size_t n = next_pow2(static_cast<size_t>(g.c));
  double total = 0.0;
  int count = 0;
  for (auto [y0, bh] : tiles(g.h, block)) {
    for (auto [x0, bw] : tiles(g.w, block)) {
      const size_t p = static_cast<size_t>(bh * bw);
      std::vector<std::vector<double>> gt(n, std::vector<double>(p, 0.0)), fu(n, std::vector<double>(p, 0.0));
      for (int64_t b = 0; b < g.c; ++b) {
        size_t j = 0;
        for (int64_t y = y0; y < y0 + bh; ++y) {
          for (int64_t x = x0; x < x0 + bw; ++x, ++j) {
            gt[static_cast<size_t>(b)][j] = g.at(b, y, x);
            fu[static_cast<size_t>(b)][j] = f.at(b, y, x);
          }
        }
      }
      total += onion_quality(std::move(gt), std::move(fu));
      ++count;
    }
  }
  return total / count;
}

// Universal image quality index of two single-band tiles.
double uiqi_tile(const double* a, const double* b, int64_t stride, int64_t y0, int64_t x0, int64_t bh, int64_t bw) {
  const double n = static_cast<double>(bh * bw);
  double ma = 0.0, mb = 0.0;
  for (int64_t y = y0; y < y0 + bh; ++y) {
    for (int64_t x = x0; x < x0 + bw; ++x) {
      ma += a[y * stride + x];
      mb += b[y * stride + x];
    }
  }
  ma /= n;
  mb /= n;
  double va = 0.0, vb = 0.0, cab = 0.0;
  for (int64_t y = y0; y < y0 + bh; ++y) {
    for (int64_t x = x0; x < x0 + bw; ++x) {
      const double da = a[y * stride + x] - ma, db = b[y * stride + x] - mb;
      va += da * da;
      vb += db * db;
      cab += da * db;
    }
  }
  va /= n - 1.0;
  vb /= n - 1.0;
  cab /= n - 1.0;
  const double vs = va + vb, ms = ma * ma + mb * mb;
  if (vs == 0.0) return ms == 0.0 ? 1.0 : 2.0 * ma * mb / ms;
  if (ms == 0.0) return 2.0 * cab / vs;
  return 4.0 * cab * ma * mb / (vs * ms);
}

double uiqi_plane(const double* a, const double* b, int64_t h, int64_t w, int64_t block) {
  if (h * w < 2) throw ShapeError("uiqi: image needs at least two pixels");
  double total = 0.0;
  int count = 0;
  for (auto [y0, bh] : tiles(h, block)) {
    for (auto [x0, bw] : tiles(w, block)) {
      total += uiqi_tile(a, b, w, y0, x0, bh, bw);
      ++count;
    }
  }
  return total / count;
}

std::vector<double> gaussian_window() {
  const int n = mc::kSsimWindow, r = n / 2;
  std::vector<double> win(static_cast<size_t>(n * n));
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double d2 = static_cast<double>((i - r) * (i - r) + (j - r) * (j - r));
      win[static_cast<size_t>(i * n + j)] = std::exp(-d2 / (2.0 * mc::kSsimSigma * mc::kSsimSigma));
      sum += win[static_cast<size_t>(i * n + j)];
    }
  }
  for (auto& v : win) v /= sum;
  return win;
}

}  // namespace

bool MetricReport::defined(const std::string& name) const {
  auto it = values.find(name);
  return it != values.end() && std::isfinite(it->second);
}

double MetricReport::at(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) throw Error("metric report has no entry '" + name + "'");
  return it->second;
}

void MetricReport::merge(const MetricReport& other) {
  for (const auto& [k, v] : other.values) values[k] = v;
  notes.insert(notes.end(), other.notes.begin(), other.notes.end());
}

std::string MetricReport::to_json() const {
  json j = json::object();
  json vals = json::object();
  for (const auto& [k, v] : values) vals[k] = std::isfinite(v) ? json(v) : json(nullptr);
  j["metrics"] = vals;
  j["notes"] = notes;
  j["constants_version"] = mc::kVersion;
  return j.dump(2);
}

MetricSummary MetricSummary::of(const std::vector<MetricReport>& reports) {
  std::map<std::string, std::vector<double>> columns;
  for (const auto& r : reports) {
    for (const auto& [k, v] : r.values) {
      auto& col = columns[k];
      if (std::isfinite(v)) col.push_back(v);
    }
  }
  MetricSummary s;
  for (const auto& [k, col] : columns) {
    Stat st;
    st.count = static_cast<int>(col.size());
    if (col.empty()) {
      st.mean = st.std = kNaN;
    } else {
      for (double v : col) st.mean += v;
      st.mean /= static_cast<double>(col.size());
      if (col.size() > 1) {
        double ss = 0.0;
        for (double v : col) ss += (v - st.mean) * (v - st.mean);
        st.std = std::sqrt(ss / static_cast<double>(col.size() - 1));
      }
    }
    s.stats[k] = st;
  }
  return s;
}

std::string MetricSummary::to_json() const {
  json j = json::object();
  for (const auto& [k, st] : stats) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    j[k] = {{"mean", num(st.mean)}, {"std", num(st.std)}, {"count", st.count}};
  }
  json out = {{"aggregate", j}, {"constants_version", mc::kVersion}};
  return out.dump(2);
}

template <typename T>
double ergas(const Tensor<T>& fused, const Tensor<T>& gt, int ratio) {
  if (ratio < 1) throw ConfigError("ergas: ratio must be >= 1");
  const auto [f, g] = pair_of(fused, gt, "ergas");
  const int64_t plane = g.h * g.w;
  double acc = 0.0;
  for (int64_t b = 0; b < g.c; ++b) {
    double se = 0.0, mean = 0.0;
    for (int64_t i = 0; i < plane; ++i) {
      const double d = f.band(b)[i] - g.band(b)[i];
      se += d * d;
      mean += g.band(b)[i];
    }
    mean /= static_cast<double>(plane);
    if (mean == 0.0) return kNaN;
    acc += (se / static_cast<double>(plane)) / (mean * mean);
  }
  return 100.0 / ratio * std::sqrt(acc / static_cast<double>(g.c));
}

template <typename T>
double sam(const Tensor<T>& fused, const Tensor<T>& gt) {
  const auto [f, g] = pair_of(fused, gt, "sam");
  const int64_t plane = g.h * g.w;
  double acc = 0.0;
  int64_t count = 0;
  for (int64_t i = 0; i < plane; ++i) {
    double dot = 0.0, nf = 0.0, ng = 0.0;
    for (int64_t b = 0; b < g.c; ++b) {
      const double a = f.band(b)[i], c = g.band(b)[i];
      dot += a * c;
      nf += a * a;
      ng += c * c;
    }
    if (nf == 0.0 || ng == 0.0) continue;
    const double cosv = std::clamp(dot / std::sqrt(nf * ng), -1.0, 1.0);
    acc += std::acos(cosv);
    ++count;
  }
  if (count == 0) return kNaN;
  return acc / static_cast<double>(count) * 180.0 / std::numbers::pi;
}

template <typename T>
double scc(const Tensor<T>& fused, const Tensor<T>& gt) {
  const auto [f, g] = pair_of(fused, gt, "scc");
  if (g.h < 3 || g.w < 3) throw ShapeError("scc: image must be at least 3x3");
  auto lap = [](const Image& im, int64_t b, int64_t y, int64_t x) {
    return 4.0 * im.at(b, y, x) - im.at(b, y - 1, x) - im.at(b, y + 1, x) - im.at(b, y, x - 1) - im.at(b, y, x + 1);
  };
  const double n = static_cast<double>((g.h - 2) * (g.w - 2));
  double acc = 0.0;
  int used = 0;
  for (int64_t b = 0; b < g.c; ++b) {
    double mf = 0.0, mg = 0.0;
    for (int64_t y = 1; y < g.h - 1; ++y) {
      for (int64_t x = 1; x < g.w - 1; ++x) {
        mf += lap(f, b, y, x);
        mg += lap(g, b, y, x);
      }
    }
    mf /= n;
    mg /= n;
    double cov = 0.0, vf = 0.0, vg = 0.0;
    for (int64_t y = 1; y < g.h - 1; ++y) {
      for (int64_t x = 1; x < g.w - 1; ++x) {
        const double a = lap(f, b, y, x) - mf, c = lap(g, b, y, x) - mg;
        cov += a * c;
        vf += a * a;
        vg += c * c;
      }
    }
    if (vf == 0.0 || vg == 0.0) continue;
    acc += cov / std::sqrt(vf * vg);
    ++used;
  }
  return used == 0 ? kNaN : acc / used;
}

template <typename T>
double psnr(const Tensor<T>& fused, const Tensor<T>& gt) {
  const auto [f, g] = pair_of(fused, gt, "psnr");
  const int64_t plane = g.h * g.w;
  double acc = 0.0;
  for (int64_t b = 0; b < g.c; ++b) {
    double se = 0.0;
    for (int64_t i = 0; i < plane; ++i) {
      const double d = f.band(b)[i] - g.band(b)[i];
      se += d * d;
    }
    const double mse = se / static_cast<double>(plane);
    const double v = 10.0 * std::log10(mc::kPsnrPeak * mc::kPsnrPeak / std::max(mse, mc::kDivEps));
    acc += std::min(v, mc::kPsnrCap);
  }
  return acc / static_cast<double>(g.c);
}

template <typename T>
double ssim(const Tensor<T>& fused, const Tensor<T>& gt) {
  const auto [f, g] = pair_of(fused, gt, "ssim");
  const int64_t n = mc::kSsimWindow;
  if (g.h < n || g.w < n) throw ShapeError("ssim: image smaller than the 11x11 window");
  const std::vector<double> win = gaussian_window();
  const double c1 = (mc::kSsimK1 * mc::kDynamicRange) * (mc::kSsimK1 * mc::kDynamicRange);
  const double c2 = (mc::kSsimK2 * mc::kDynamicRange) * (mc::kSsimK2 * mc::kDynamicRange);
  double acc = 0.0;
  for (int64_t b = 0; b < g.c; ++b) {
    double band_acc = 0.0;
    for (int64_t y = 0; y + n <= g.h; ++y) {
      for (int64_t x = 0; x + n <= g.w; ++x) {
        double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
        for (int64_t i = 0; i < n; ++i) {
          for (int64_t j = 0; j < n; ++j) {
            const double wv = win[static_cast<size_t>(i * n + j)];
            const double a = f.at(b, y + i, x + j), c = g.at(b, y + i, x + j);
            mx += wv * a;
            my += wv * c;
            sxx += wv * a * a;
            syy += wv * c * c;
            sxy += wv * a * c;
          }
        }
        const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
        band_acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
    }
    acc += band_acc / static_cast<double>((g.h - n + 1) * (g.w - n + 1));
  }
  return acc / static_cast<double>(g.c);
}

template <typename T>
double q2n(const Tensor<T>& fused, const Tensor<T>& gt, int block) {
  if (block < 2) throw ConfigError("q2n: block must be >= 2");
  const auto [f, g] = pair_of(fused, gt, "q2n");
  // The index is a normalized correlation; rounding can push it past 1.
  return std::min(q2n_image(f, g, block), 1.0);
}

template <typename T>
double uiqi(const Tensor<T>& a, const Tensor<T>& b, int block) {
  if (block < 2) throw ConfigError("uiqi: block must be >= 2");
  const auto [x, y] = pair_of(a, b, "uiqi");
  if (x.c != 1) throw ShapeError("uiqi: expected a single band");
  return uiqi_plane(x.band(0), y.band(0), x.h, x.w, block);
}

template <typename T>
MetricReport reduced_metrics(const Tensor<T>& fused, const Tensor<T>& gt, int ratio) {
  MetricReport r;
  r.values["ERGAS"] = ergas(fused, gt, ratio);
  r.values["SAM"] = sam(fused, gt);
  r.values["SCC"] = scc(fused, gt);
  r.values["Q2n"] = q2n(fused, gt);
  r.values["PSNR"] = psnr(fused, gt);
  r.values["SSIM"] = ssim(fused, gt);
  if (!r.defined("ERGAS")) r.notes.push_back("ERGAS undefined: ground-truth band with zero mean");
  if (!r.defined("SAM")) r.notes.push_back("SAM undefined: no pixel with nonzero spectra in both images");
  if (!r.defined("SCC")) r.notes.push_back("SCC undefined: constant high-pass response in every band");
  const size_t bands = static_cast<size_t>(gt.dim(0));
  if (next_pow2(bands) != bands) {
    r.notes.push_back("Q2n: " + std::to_string(bands) + " bands zero-padded to " + std::to_string(next_pow2(bands)));
  }
  return r;
}

template <typename T>
double d_lambda(const Tensor<T>& fused, const Tensor<T>& ms_lr, int ratio, double mtf_sigma) {
  const Tensor<T> low = mtf_degrade(fused, ratio, mtf_sigma);
  require_same_shape(low.shape(), ms_lr.shape(), "d_lambda");
  return 1.0 - q2n(low, ms_lr);
}

template <typename T>
double d_s(const Tensor<T>& fused, const Tensor<T>& ms_lr, const Tensor<T>& pan, int ratio, double mtf_sigma) {
  if (fused.rank() != 3 || pan.rank() != 3 || pan.dim(0) != 1) throw ShapeError("d_s: expected [C,H,W] and [1,H,W]");
  if (fused.dim(1) != pan.dim(1) || fused.dim(2) != pan.dim(2)) throw ShapeError("d_s: fused and pan extents differ");
  const Tensor<T> pan_lr = mtf_degrade(pan, ratio, mtf_sigma);
  if (ms_lr.rank() != 3 || ms_lr.dim(0) != fused.dim(0) || ms_lr.dim(1) != pan_lr.dim(1) ||
      ms_lr.dim(2) != pan_lr.dim(2)) {
    throw ShapeError("d_s: ms_lr " + ms_lr.shape().str() + " does not match degraded pan " + pan_lr.shape().str());
  }
  const Image f = to_image(fused, "d_s"), m = to_image(ms_lr, "d_s"), p = to_image(pan, "d_s"),
              pl = to_image(pan_lr, "d_s");
  const int64_t block_lr = std::max<int64_t>(2, mc::kQBlock / ratio);
  double acc = 0.0;
  for (int64_t b = 0; b < f.c; ++b) {
    const double q_hr = uiqi_plane(f.band(b), p.band(0), f.h, f.w, mc::kQBlock);
    const double q_lr = uiqi_plane(m.band(b), pl.band(0), m.h, m.w, block_lr);
    acc += std::abs(q_hr - q_lr);
  }
  return acc / static_cast<double>(f.c);
}

template <typename T>
MetricReport full_res_metrics(const Tensor<T>& fused, const Tensor<T>& ms_lr, const Tensor<T>& pan, int ratio,
                              double mtf_sigma) {
  MetricReport r;
  const double dl = d_lambda(fused, ms_lr, ratio, mtf_sigma);
  const double ds = d_s(fused, ms_lr, pan, ratio, mtf_sigma);
  r.values["D_lambda"] = dl;
  r.values["D_s"] = ds;
  r.values["HQNR"] = hqnr(dl, ds);
  return r;
}

#define PANCRAFT_INSTANTIATE(T)                                                                          \
  template double ergas(const Tensor<T>&, const Tensor<T>&, int);                                        \
  template double sam(const Tensor<T>&, const Tensor<T>&);                                               \
  template double scc(const Tensor<T>&, const Tensor<T>&);                                               \
  template double psnr(const Tensor<T>&, const Tensor<T>&);                                              \
  template double ssim(const Tensor<T>&, const Tensor<T>&);                                              \
  template double q2n(const Tensor<T>&, const Tensor<T>&, int);                                          \
  template double uiqi(const Tensor<T>&, const Tensor<T>&, int);                                         \
  template MetricReport reduced_metrics(const Tensor<T>&, const Tensor<T>&, int);                        \
  template double d_lambda(const Tensor<T>&, const Tensor<T>&, int, double);                             \
  template double d_s(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, double);                \
  template MetricReport full_res_metrics(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, double);

PANCRAFT_INSTANTIATE(float)
PANCRAFT_INSTANTIATE(double)
#undef PANCRAFT_INSTANTIATE

}  // namespace pancraft
