/* Copyright 2026 The EgoNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "egonet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "egonet/error.hpp"

namespace egonet::kernels {

namespace {

using Index = std::ptrdiff_t;

void require_rank4(const Tensor& t, const char* what) {
  if (t.rank() != 4) {
    throw ShapeError(std::string(what) + " must be rank 4 (NCHW), got " + shape_string(t.shape()));
  }
}

// Output columns [lo, hi) whose input column ow*stride + off lies in [0, width).
void valid_range(Index off, Index stride, Index width, Index out, Index* lo, Index* hi) {
  *lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  const Index last = width - 1 - off;
  *hi = last < 0 ? 0 : std::min<Index>(out, last / stride + 1);
  if (*lo > *hi) *lo = *hi;
}

}  // namespace

Shape conv2d_output_shape(const Shape& x, const Shape& w, Conv2dParams p) {
  if (x.size() != 4 || w.size() != 4) {
    throw ShapeError("conv2d expects rank-4 input and weight, got x " + shape_string(x) +
                     " and w " + shape_string(w));
  }
  if (x[1] != w[1]) {
    throw ShapeError("conv2d channel mismatch: x " + shape_string(x) + " vs w " +
                     shape_string(w));
  }
  if (p.stride < 1 || p.dilation < 1 || p.pad < 0) {
    throw ShapeError("conv2d requires stride >= 1, dilation >= 1, pad >= 0");
  }
  const Index h = static_cast<Index>(x[2]) + 2 * p.pad - p.dilation * (static_cast<Index>(w[2]) - 1) - 1;
  const Index wd = static_cast<Index>(x[3]) + 2 * p.pad - p.dilation * (static_cast<Index>(w[3]) - 1) - 1;
  if (h < 0 || wd < 0) {
    throw ShapeError("conv2d kernel " + shape_string(w) + " larger than padded input " +
                     shape_string(x));
  }
  return {x[0], w[0], static_cast<std::size_t>(h / p.stride + 1),
          static_cast<std::size_t>(wd / p.stride + 1)};
}

namespace {

struct ConvGeometry {
  Index inc, ih_n, iw_n, kh, kw, oh_n, ow_n, s, pad, d;
  Index k() const { return inc * kh * kw; }
  Index p() const { return oh_n * ow_n; }
};

ConvGeometry geometry(const Tensor& x, const Tensor& w, const Shape& ys, Conv2dParams p) {
  return {static_cast<Index>(x.dim(1)), static_cast<Index>(x.dim(2)), static_cast<Index>(x.dim(3)),
          static_cast<Index>(w.dim(2)), static_cast<Index>(w.dim(3)), static_cast<Index>(ys[2]),
          static_cast<Index>(ys[3]),   p.stride,                      p.pad,
          p.dilation};
}

// Column matrix of one image, K x P with K ordered (c, ki, kj); padded taps are 0.
void im2col(const double* x, const ConvGeometry& g, double* col) {
  const Index P = g.p();
  for (Index c = 0; c < g.inc; ++c) {
    const double* xp = x + c * g.ih_n * g.iw_n;
    for (Index ki = 0; ki < g.kh; ++ki) {
      for (Index kj = 0; kj < g.kw; ++kj) {
        double* dst = col + ((c * g.kh + ki) * g.kw + kj) * P;
        const Index off = kj * g.d - g.pad;
        Index lo, hi;
        valid_range(off, g.s, g.iw_n, g.ow_n, &lo, &hi);
        for (Index oh = 0; oh < g.oh_n; ++oh) {
          double* drow = dst + oh * g.ow_n;
          const Index ih = oh * g.s - g.pad + ki * g.d;
          if (ih < 0 || ih >= g.ih_n) {
            std::fill(drow, drow + g.ow_n, 0.0);
            continue;
          }
          const double* row = xp + ih * g.iw_n + off;
          std::fill(drow, drow + lo, 0.0);
          for (Index ow = lo; ow < hi; ++ow) drow[ow] = row[ow * g.s];
          std::fill(drow + hi, drow + g.ow_n, 0.0);
        }
      }
    }
  }
}

// Transposed column matrix, P x K.
void im2row(const double* x, const ConvGeometry& g, double* rows) {
  const Index K = g.k();
  for (Index oh = 0; oh < g.oh_n; ++oh) {
    for (Index ow = 0; ow < g.ow_n; ++ow) {
      double* dst = rows + (oh * g.ow_n + ow) * K;
      for (Index c = 0; c < g.inc; ++c) {
        const double* xp = x + c * g.ih_n * g.iw_n;
        for (Index ki = 0; ki < g.kh; ++ki) {
          const Index ih = oh * g.s - g.pad + ki * g.d;
          for (Index kj = 0; kj < g.kw; ++kj) {
            const Index iw = ow * g.s - g.pad + kj * g.d;
            *dst++ = (ih < 0 || ih >= g.ih_n || iw < 0 || iw >= g.iw_n) ? 0.0 : xp[ih * g.iw_n + iw];
          }
        }
      }
    }
  }
}

// Scatter-adds a K x P column gradient back into one image.
void col2im(const double* col, const ConvGeometry& g, double* dx) {
  const Index P = g.p();
  for (Index c = 0; c < g.inc; ++c) {
    double* xp = dx + c * g.ih_n * g.iw_n;
    for (Index ki = 0; ki < g.kh; ++ki) {
      for (Index kj = 0; kj < g.kw; ++kj) {
        const double* src = col + ((c * g.kh + ki) * g.kw + kj) * P;
        const Index off = kj * g.d - g.pad;
        Index lo, hi;
        valid_range(off, g.s, g.iw_n, g.ow_n, &lo, &hi);
        for (Index oh = 0; oh < g.oh_n; ++oh) {
          const Index ih = oh * g.s - g.pad + ki * g.d;
          if (ih < 0 || ih >= g.ih_n) continue;
          double* row = xp + ih * g.iw_n + off;
          const double* srow = src + oh * g.ow_n;
          for (Index ow = lo; ow < hi; ++ow) row[ow * g.s] += srow[ow];
        }
      }
    }
  }
}

using V8 = double __attribute__((vector_size(64)));

inline V8 load8(const double* p) {
  V8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store8(double* p, V8 v) { std::memcpy(p, &v, sizeof v); }

constexpr Index kMr = 8;
constexpr Index kNr = 8;

// C[i][j] += sum_t A[i][t] * B[t][j], each element accumulated in ascending t
// starting from its current value. Row-major with leading dimensions.
__attribute__((target_clones("avx512f", "avx2", "default")))
void gemm_acc(Index m, Index n, Index k, const double* __restrict a, Index lda, const double* __restrict b,
              Index ldb, double* __restrict c, Index ldc) {
  Index i = 0;
  for (; i + kMr <= m; i += kMr) {
    Index j = 0;
    for (; j + kNr <= n; j += kNr) {
      V8 acc[kMr];
      for (Index r = 0; r < kMr; ++r) acc[r] = load8(c + (i + r) * ldc + j);
      for (Index t = 0; t < k; ++t) {
        const V8 bv = load8(b + t * ldb + j);
        for (Index r = 0; r < kMr; ++r) acc[r] += a[(i + r) * lda + t] * bv;
      }
      for (Index r = 0; r < kMr; ++r) store8(c + (i + r) * ldc + j, acc[r]);
    }
    for (Index r = i; r < i + kMr; ++r) {
      for (Index q = j; q < n; ++q) {
        double acc = c[r * ldc + q];
        for (Index t = 0; t < k; ++t) acc += a[r * lda + t] * b[t * ldb + q];
        c[r * ldc + q] = acc;
      }
    }
  }
  for (; i < m; ++i) {
    double* crow = c + i * ldc;
    for (Index t = 0; t < k; ++t) {
      const double av = a[i * lda + t];
      const double* brow = b + t * ldb;
      for (Index q = 0; q < n; ++q) crow[q] += av * brow[q];
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, Conv2dParams p) {
  const Shape ys = conv2d_output_shape(x.shape(), w.shape(), p);
  if (b.rank() != 1 || b.dim(0) != w.dim(0)) {
    throw ShapeError("conv2d bias " + shape_string(b.shape()) + " does not match weight " +
                     shape_string(w.shape()));
  }
  const ConvGeometry g = geometry(x, w, ys, p);
  const Index batch = ys[0], outc = ys[1], K = g.k(), P = g.p();
  Tensor y(ys);
  std::vector<double> col(static_cast<std::size_t>(K * P));
  for (Index n = 0; n < batch; ++n) {
    im2col(x.data().data() + n * g.inc * g.ih_n * g.iw_n, g, col.data());
    double* yp = y.data().data() + n * outc * P;
    gemm_acc(outc, P, K, w.data().data(), K, col.data(), P, yp, P);
    for (Index o = 0; o < outc; ++o) {
      const double bias = b[static_cast<std::size_t>(o)];
      for (Index i = 0; i < P; ++i) yp[o * P + i] += bias;
    }
  }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Conv2dParams p,
                     Tensor* dx, Tensor* dw, Tensor* db) {
  const Shape ys = conv2d_output_shape(x.shape(), w.shape(), p);
  if (dy.shape() != ys) {
    throw ShapeError("conv2d gradient shape " + shape_string(dy.shape()) + " != output " +
                     shape_string(ys));
  }
  const ConvGeometry g = geometry(x, w, ys, p);
  const Index batch = ys[0], outc = ys[1], K = g.k(), P = g.p();
  const Index in_plane = g.inc * g.ih_n * g.iw_n;
  const double* gd = dy.data().data();

  if (db) {
    *db = Tensor(Shape{static_cast<std::size_t>(outc)});
    for (Index n = 0; n < batch; ++n) {
      for (Index o = 0; o < outc; ++o) {
        const double* gp = gd + (n * outc + o) * P;
        double sum = 0.0;
        for (Index i = 0; i < P; ++i) sum += gp[i];
        (*db)[static_cast<std::size_t>(o)] += sum;
      }
    }
  }

  std::vector<double> buf(static_cast<std::size_t>(K * P));
  if (dw) {
    *dw = Tensor(w.shape());
    for (Index n = 0; n < batch; ++n) {
      im2row(x.data().data() + n * in_plane, g, buf.data());
      gemm_acc(outc, K, P, gd + n * outc * P, P, buf.data(), K, dw->data().data(), K);
    }
  }

  if (dx) {
    *dx = Tensor(x.shape());
    // W^T, K x outc.
    std::vector<double> wt(static_cast<std::size_t>(K * outc));
    for (Index o = 0; o < outc; ++o) {
      for (Index t = 0; t < K; ++t) wt[static_cast<std::size_t>(t * outc + o)] = w[static_cast<std::size_t>(o * K + t)];
    }
    for (Index n = 0; n < batch; ++n) {
      std::fill(buf.begin(), buf.end(), 0.0);
      gemm_acc(K, P, outc, wt.data(), outc, gd + n * outc * P, P, buf.data(), P);
      col2im(buf.data(), g, dx->data().data() + n * in_plane);
    }
  }
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  Tensor dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
  return dx;
}

Shape maxpool2d_output_shape(const Shape& x, int k, int stride, int pad) {
  if (x.size() != 4) throw ShapeError("maxpool2d expects rank 4, got " + shape_string(x));
  if (k < 1 || stride < 1 || pad < 0 || 2 * pad > k) {
    throw ShapeError("maxpool2d requires k >= 1, stride >= 1, 0 <= pad <= k/2");
  }
  const Index h = static_cast<Index>(x[2]) + 2 * pad - k;
  const Index w = static_cast<Index>(x[3]) + 2 * pad - k;
  if (h < 0 || w < 0) throw ShapeError("maxpool2d window larger than input " + shape_string(x));
  return {x[0], x[1], static_cast<std::size_t>(h / stride + 1),
          static_cast<std::size_t>(w / stride + 1)};
}

PoolResult maxpool2d(const Tensor& x, int k, int stride, int pad) {
  const Shape ys = maxpool2d_output_shape(x.shape(), k, stride, pad);
  PoolResult r{Tensor(ys), std::vector<std::uint32_t>(shape_numel(ys))};
  const Index planes = ys[0] * ys[1], oh_n = ys[2], ow_n = ys[3];
  const Index ih_n = x.dim(2), iw_n = x.dim(3);
  std::size_t out = 0;
  for (Index pl = 0; pl < planes; ++pl) {
    const Index base = pl * ih_n * iw_n;
    for (Index oh = 0; oh < oh_n; ++oh) {
      for (Index ow = 0; ow < ow_n; ++ow, ++out) {
        double best = -std::numeric_limits<double>::infinity();
        Index arg = -1;
        for (Index ki = 0; ki < k; ++ki) {
          const Index ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= ih_n) continue;
          for (Index kj = 0; kj < k; ++kj) {
            const Index iw = ow * stride - pad + kj;
            if (iw < 0 || iw >= iw_n) continue;
            const double v = x[static_cast<std::size_t>(base + ih * iw_n + iw)];
            if (arg < 0 || v > best) {
              best = v;
              arg = base + ih * iw_n + iw;
            }
          }
        }
        r.y[out] = best;
        r.argmax[out] = static_cast<std::uint32_t>(arg);
      }
    }
  }
  return r;
}

Tensor maxpool2d_backward(const Shape& x_shape, const std::vector<std::uint32_t>& argmax,
                          const Tensor& dy) {
  Tensor dx(x_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += dy[i];
  return dx;
}

Tensor concat_channels(std::span<const Tensor* const> xs) {
  if (xs.empty()) throw ShapeError("concat_channels requires at least one input");
  const Shape& first = xs[0]->shape();
  if (first.size() != 4) throw ShapeError("concat_channels expects rank 4, got " + shape_string(first));
  std::size_t channels = 0;
  for (const Tensor* t : xs) {
    const Shape& s = t->shape();
    if (s.size() != 4 || s[0] != first[0] || s[2] != first[2] || s[3] != first[3]) {
      throw ShapeError("concat_channels shape mismatch: " + shape_string(first) + " vs " +
                       shape_string(s));
    }
    channels += s[1];
  }
  Tensor y(Shape{first[0], channels, first[2], first[3]});
  const std::size_t plane = first[2] * first[3];
  double* out = y.data().data();
  for (std::size_t n = 0; n < first[0]; ++n) {
    for (const Tensor* t : xs) {
      const std::size_t chunk = t->dim(1) * plane;
      const double* src = t->data().data() + n * chunk;
      out = std::copy(src, src + chunk, out);
    }
  }
  return y;
}

Tensor slice_channels(const Tensor& dy, std::size_t c0, std::size_t channels) {
  const std::size_t batch = dy.dim(0), total = dy.dim(1);
  const std::size_t plane = dy.dim(2) * dy.dim(3);
  if (c0 + channels > total) throw ShapeError("slice_channels out of range");
  Tensor y(Shape{batch, channels, dy.dim(2), dy.dim(3)});
  for (std::size_t n = 0; n < batch; ++n) {
    const double* src = dy.data().data() + (n * total + c0) * plane;
    std::copy(src, src + channels * plane, y.data().data() + n * channels * plane);
  }
  return y;
}

namespace {

struct Tap {
  std::size_t i0, i1;
  double t;
};

std::vector<Tap> align_corner_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  for (std::size_t i = 0; i < out; ++i) {
    if (in == 1 || out == 1) {
      taps[i] = {0, 0, 0.0};
      continue;
    }
    const double src = static_cast<double>(i) * static_cast<double>(in - 1) /
                       static_cast<double>(out - 1);
    std::size_t i0 = static_cast<std::size_t>(std::floor(src));
    if (i0 > in - 2) i0 = in - 2;
    taps[i] = {i0, i0 + 1, src - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace

Tensor bilinear_upsample(const Tensor& x, int factor) {
  require_rank4(x, "bilinear_upsample input");
  if (factor < 1) throw ShapeError("bilinear_upsample factor must be >= 1");
  if (factor == 1) return x;
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = h * factor, ow = w * factor;
  const auto ty = align_corner_taps(h, oh);
  const auto tx = align_corner_taps(w, ow);
  Tensor y(Shape{x.dim(0), x.dim(1), oh, ow});
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const double* src = x.data().data() + pl * h * w;
    double* dst = y.data().data() + pl * oh * ow;
    for (std::size_t i = 0; i < oh; ++i) {
      const Tap& a = ty[i];
      const double* r0 = src + a.i0 * w;
      const double* r1 = src + a.i1 * w;
      for (std::size_t j = 0; j < ow; ++j) {
        const Tap& b = tx[j];
        const double top = (1.0 - b.t) * r0[b.i0] + b.t * r0[b.i1];
        const double bot = (1.0 - b.t) * r1[b.i0] + b.t * r1[b.i1];
        dst[i * ow + j] = (1.0 - a.t) * top + a.t * bot;
      }
    }
  }
  return y;
}

Tensor bilinear_upsample_backward(const Shape& x_shape, const Tensor& dy, int factor) {
  if (factor == 1) return dy;
  const std::size_t planes = x_shape[0] * x_shape[1], h = x_shape[2], w = x_shape[3];
  const std::size_t oh = h * factor, ow = w * factor;
  const auto ty = align_corner_taps(h, oh);
  const auto tx = align_corner_taps(w, ow);
  Tensor dx(x_shape);
  for (std::size_t pl = 0; pl < planes; ++pl) {
    double* dst = dx.data().data() + pl * h * w;
    const double* g = dy.data().data() + pl * oh * ow;
    for (std::size_t i = 0; i < oh; ++i) {
      const Tap& a = ty[i];
      double* r0 = dst + a.i0 * w;
      double* r1 = dst + a.i1 * w;
      for (std::size_t j = 0; j < ow; ++j) {
        const Tap& b = tx[j];
        const double gv = g[i * ow + j];
        const double gt = (1.0 - a.t) * gv, gb = a.t * gv;
        r0[b.i0] += (1.0 - b.t) * gt;
        r0[b.i1] += b.t * gt;
        r1[b.i0] += (1.0 - b.t) * gb;
        r1[b.i1] += b.t * gb;
      }
    }
  }
  return dx;
}

namespace {

void check_softmax_inputs(const Tensor& logits, const Tensor& labels) {
  require_rank4(logits, "softmax_loss logits");
  if (logits.dim(1) != 2) {
    throw ShapeError("softmax_loss expects 2 channels, got " + shape_string(logits.shape()));
  }
  const Shape expect{logits.dim(0), logits.dim(2), logits.dim(3)};
  if (labels.shape() != expect) {
    throw ShapeError("softmax_loss labels " + shape_string(labels.shape()) +
                     " do not match logits " + shape_string(logits.shape()));
  }
}

}  // namespace

SoftmaxLoss softmax_loss(const Tensor& logits, const Tensor& labels) {
  check_softmax_inputs(logits, labels);
  const std::size_t batch = logits.dim(0), plane = logits.dim(2) * logits.dim(3);
  SoftmaxLoss r{0.0, Tensor(logits.shape())};
  double total = 0.0;
  for (std::size_t n = 0; n < batch; ++n) {
    const double* l0 = logits.data().data() + n * 2 * plane;
    const double* l1 = l0 + plane;
    double* p0 = r.probs.data().data() + n * 2 * plane;
    double* p1 = p0 + plane;
    for (std::size_t i = 0; i < plane; ++i) {
      const double label = labels[n * plane + i];
      if (label != 0.0 && label != 1.0) {
        throw ShapeError("softmax_loss label out of range at pixel " + std::to_string(n * plane + i) +
                         ": " + std::to_string(label));
      }
      const double m = std::max(l0[i], l1[i]);
      const double e0 = std::exp(l0[i] - m), e1 = std::exp(l1[i] - m);
      const double s = e0 + e1;
      p0[i] = e0 / s;
      p1[i] = e1 / s;
      const double picked = label == 1.0 ? l1[i] : l0[i];
      total += std::log(s) - (picked - m);
    }
  }
  r.loss = total / static_cast<double>(batch * plane);
  return r;
}

Tensor softmax_loss_backward(const Tensor& probs, const Tensor& labels, double g) {
  const std::size_t batch = probs.dim(0), plane = probs.dim(2) * probs.dim(3);
  const double scale = g / static_cast<double>(batch * plane);
  Tensor d(probs.shape());
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      const double label = labels[n * plane + i];
      const std::size_t k0 = n * 2 * plane + i, k1 = k0 + plane;
      d[k0] = (probs[k0] - (label == 0.0 ? 1.0 : 0.0)) * scale;
      d[k1] = (probs[k1] - (label == 1.0 ? 1.0 : 0.0)) * scale;
    }
  }
  return d;
}

}  // namespace egonet::kernels
