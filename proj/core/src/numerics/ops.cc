// Copyright 2026 The labtx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "labtx/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "op_util.hpp"

namespace labtx::ops {
namespace {

using detail::grad_sink;
using detail::ImplPtr;

// C[m,n] += A[m,k] * B[k,n]. Every output row is computed by the same
// instruction sequence, so results never depend on a row's position.
void gemm_acc(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c) {
  for (std::size_t i = 0; i < m; ++i) {
    Real* crow = c + i * n;
    const Real* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = arow[p];
      const Real* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[k,n] += A[m,k]^T * B[m,n].
void gemm_tn_acc(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const Real* arow = a + i * k;
    const Real* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = arow[p];
      Real* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,k] += A[m,n] * B[k,n]^T, via an explicit transpose of B.
void gemm_nt_acc(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c) {
  std::vector<Real> bt(n * k);
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  }
  gemm_acc(m, n, k, a, bt.data(), c);
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  Tensor out(x.shape());
  auto xd = x.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < xd.size(); ++i) od[i] = fwd(xd[i]);
  if (detail::should_record({&x})) {
    ImplPtr xi = x.handle();
    detail::TensorImpl* oi = out.impl();
    detail::record(out, [xi, oi, deriv] {
      Real* gx = grad_sink(xi);
      if (!gx) return;
      const Real* g = oi->grad.data();
      for (std::size_t i = 0; i < oi->data.size(); ++i) gx[i] += g[i] * deriv(xi->data[i], oi->data[i]);
    });
  }
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out(Shape{m, n});
  gemm_acc(m, k, n, a.data().data(), b.data().data(), out.mutable_data().data());
  if (detail::should_record({&a, &b})) {
    ImplPtr ai = a.handle(), bi = b.handle();
    detail::TensorImpl* oi = out.impl();
    detail::record(out, [ai, bi, oi, m, k, n] {
      const Real* g = oi->grad.data();
      if (Real* ga = grad_sink(ai)) gemm_nt_acc(m, n, k, g, bi->data.data(), ga);
      if (Real* gb = grad_sink(bi)) gemm_tn_acc(m, k, n, ai->data.data(), g, gb);
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2 || x.rank() < 1 || x.shape().back() != weight.dim(0)) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " incompatible with weight " +
                         shape_string(weight.shape()));
  }
  const std::size_t in = weight.dim(0), outw = weight.dim(1);
  if (bias.defined() && bias.numel() != outw) {
    throw DimensionError("linear: bias " + shape_string(bias.shape()) + " does not match weight " +
                         shape_string(weight.shape()));
  }
  const std::size_t rows = x.numel() / in;
  Shape oshape = x.shape();
  oshape.back() = outw;
  Tensor out(oshape);
  Real* od = out.mutable_data().data();
  if (bias.defined()) {
    const Real* bd = bias.data().data();
    for (std::size_t r = 0; r < rows; ++r) std::copy(bd, bd + outw, od + r * outw);
  }
  gemm_acc(rows, in, outw, x.data().data(), weight.data().data(), od);
  if (detail::should_record({&x, &weight, &bias})) {
    ImplPtr xi = x.handle(), wi = weight.handle(), bi = bias.handle();
    detail::TensorImpl* oi = out.impl();
    detail::record(out, [xi, wi, bi, oi, rows, in, outw] {
      const Real* g = oi->grad.data();
      if (Real* gx = grad_sink(xi)) gemm_nt_acc(rows, outw, in, g, wi->data.data(), gx);
      if (Real* gw = grad_sink(wi)) gemm_tn_acc(rows, in, outw, xi->data.data(), g, gw);
      if (Real* gb = grad_sink(bi)) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < outw; ++j) gb[j] += g[r * outw + j];
        }
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  Tensor out(a.shape());
  auto ad = a.data(), bd = b.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] + bd[i];
  if (detail::should_record({&a, &b})) {
    ImplPtr ai = a.handle(), bi = b.handle();
    detail::TensorImpl* oi = out.impl();
    detail::record(out, [ai, bi, oi] {
      const Real* g = oi->grad.data();
      const std::size_t n = oi->data.size();
      if (Real* ga = grad_sink(ai)) for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
      if (Real* gb = grad_sink(bi)) for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  auto ad = a.data(), bd = b.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] - bd[i];
  if (detail::should_record({&a, &b})) {
    ImplPtr ai = a.handle(), bi = b.handle();
    detail::TensorImpl* oi = out.impl();
    detail::record(out, [ai, bi, oi] {
      const Real* g = oi->grad.data();
      const std::size_t n = oi->data.size();
      if (Real* ga = grad_sink(ai)) for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
      if (Real* gb = grad_sink(bi)) for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  auto ad = a.data(), bd = b.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * bd[i];
  if (detail::should_record({&a, &b})) {
    ImplPtr ai = a.handle(), bi = b.handle();
    detail::TensorImpl* oi = out.impl();
    detail::record(out, [ai, bi, oi] {
      const Real* g = oi->grad.data();
      const std::size_t n = oi->data.size();
      if (Real* ga = grad_sink(ai)) for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bi->data[i];
      if (Real* gb = grad_sink(bi)) for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * ai->data[i];
    });
  }
  return out;
}

Tensor scale(const Tensor& x, Real factor) {
  return unary(
      x, [factor](Real v) { return v * factor; }, [factor](Real, Real) { return factor; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](Real v) { return v > Real{0} ? v : Real{0}; },
      [](Real v, Real) { return v > Real{0} ? Real{1} : Real{0}; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](Real v) {
        if (v >= Real{0}) return Real{1} / (Real{1} + std::exp(-v));
        const Real e = std::exp(v);
        return e / (Real{1} + e);
      },
      [](Real, Real y) { return y * (Real{1} - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](Real v) { return std::tanh(v); }, [](Real, Real y) { return Real{1} - y * y; });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_string(x.shape()));
  }
  const std::size_t n = x.dim(axis);
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t outer = x.numel() / (n * inner);
  Tensor out(x.shape());
  const Real* xd = x.data().data();
  Real* od = out.mutable_data().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      Real mx = xd[base];
      for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xd[base + j * inner]);
      if (!std::isfinite(static_cast<double>(mx))) throw NumericError("softmax: non-finite input");
      Real total = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const Real e = std::exp(xd[base + j * inner] - mx);
        od[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < n; ++j) od[base + j * inner] /= total;
    }
  }
  if (detail::should_record({&x})) {
    ImplPtr xi = x.handle();
    detail::TensorImpl* oi = out.impl();
    detail::record(out, [xi, oi, n, inner, outer] {
      Real* gx = grad_sink(xi);
      if (!gx) return;
      const Real* g = oi->grad.data();
      const Real* y = oi->data.data();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * n * inner + in;
          Real dot = 0;
          for (std::size_t j = 0; j < n; ++j) dot += y[base + j * inner] * g[base + j * inner];
          for (std::size_t j = 0; j < n; ++j) {
            const std::size_t idx = base + j * inner;
            gx[idx] += y[idx] * (g[idx] - dot);
          }
        }
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Real eps) {
  const std::size_t d = x.shape().back();
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layer_norm: gain " + shape_string(gain.shape()) + " / bias " +
                         shape_string(bias.shape()) + " do not match input " + shape_string(x.shape()));
  }
  if (!(eps > Real{0})) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t rows = x.numel() / d;
  Tensor out(x.shape());
  std::vector<Real> xhat(x.numel());
  std::vector<Real> inv_std(rows);
  const Real* xd = x.data().data();
  const Real* gd = gain.data().data();
  const Real* bd = bias.data().data();
  Real* od = out.mutable_data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* row = xd + r * d;
    Real mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<Real>(d);
    Real var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<Real>(d);
    const Real inv = Real{1} / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const Real h = (row[j] - mu) * inv;
      xhat[r * d + j] = h;
      od[r * d + j] = gd[j] * h + bd[j];
    }
  }
  if (detail::should_record({&x, &gain, &bias})) {
    ImplPtr xi = x.handle(), gi = gain.handle(), bi = bias.handle();
    detail::TensorImpl* oi = out.impl();
    detail::record(out, [xi, gi, bi, oi, rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
      const Real* g = oi->grad.data();
      Real* gx = grad_sink(xi);
      Real* gg = grad_sink(gi);
      Real* gb = grad_sink(bi);
      std::vector<Real> dxhat(d);
      for (std::size_t r = 0; r < rows; ++r) {
        const Real* grow = g + r * d;
        const Real* hrow = xhat.data() + r * d;
        if (gg) for (std::size_t j = 0; j < d; ++j) gg[j] += grow[j] * hrow[j];
        if (gb) for (std::size_t j = 0; j < d; ++j) gb[j] += grow[j];
        if (!gx) continue;
        Real sum_dh = 0, sum_dh_h = 0;
        for (std::size_t j = 0; j < d; ++j) {
          dxhat[j] = grow[j] * gi->data[j];
          sum_dh += dxhat[j];
          sum_dh_h += dxhat[j] * hrow[j];
        }
        const Real scale_r = inv_std[r] / static_cast<Real>(d);
        for (std::size_t j = 0; j < d; ++j) {
          gx[r * d + j] += scale_r * (static_cast<Real>(d) * dxhat[j] - sum_dh - hrow[j] * sum_dh_h);
        }
      }
    });
  }
  return out;
}

Tensor dropout(const Tensor& x, Real rate, Rng& rng, bool training) {
  if (!(rate >= Real{0}) || !(rate < Real{1})) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == Real{0}) return x;
  const Real keep_scale = Real{1} / (Real{1} - rate);
  std::vector<Real> mask(x.numel());
  for (Real& m : mask) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    m = u < static_cast<double>(rate) ? Real{0} : keep_scale;
  }
  Tensor out(x.shape());
  auto xd = x.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = xd[i] * mask[i];
  if (detail::should_record({&x})) {
    ImplPtr xi = x.handle();
    detail::TensorImpl* oi = out.impl();
    detail::record(out, [xi, oi, mask = std::move(mask)] {
      Real* gx = grad_sink(xi);
      if (!gx) return;
      const Real* g = oi->grad.data();
      for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += g[i] * mask[i];
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  Real total = 0;
  for (Real v : x.data()) total += v;
  Tensor out = Tensor::scalar(total);
  if (detail::should_record({&x})) {
    ImplPtr xi = x.handle();
    detail::TensorImpl* oi = out.impl();
    detail::record(out, [xi, oi] {
      Real* gx = grad_sink(xi);
      if (!gx) return;
      const Real g = oi->grad[0];
      for (std::size_t i = 0; i < xi->data.size(); ++i) gx[i] += g;
    });
  }
  return out;
}

Tensor mean(const Tensor& x) { return scale(sum(x), Real{1} / static_cast<Real>(x.numel())); }

Tensor concat_last(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || a.rank() == 0 ||
      !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin())) {
    throw DimensionError("concat_last: incompatible shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  const std::size_t wa = a.shape().back(), wb = b.shape().back(), w = wa + wb;
  const std::size_t rows = a.numel() / wa;
  Shape oshape = a.shape();
  oshape.back() = w;
  Tensor out(oshape);
  const Real* ad = a.data().data();
  const Real* bd = b.data().data();
  Real* od = out.mutable_data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(ad + r * wa, ad + (r + 1) * wa, od + r * w);
    std::copy(bd + r * wb, bd + (r + 1) * wb, od + r * w + wa);
  }
  if (detail::should_record({&a, &b})) {
    ImplPtr ai = a.handle(), bi = b.handle();
    detail::TensorImpl* oi = out.impl();
    detail::record(out, [ai, bi, oi, rows, wa, wb, w] {
      const Real* g = oi->grad.data();
      Real* ga = grad_sink(ai);
      Real* gb = grad_sink(bi);
      for (std::size_t r = 0; r < rows; ++r) {
        if (ga) for (std::size_t j = 0; j < wa; ++j) ga[r * wa + j] += g[r * w + j];
        if (gb) for (std::size_t j = 0; j < wb; ++j) gb[r * wb + j] += g[r * w + wa + j];
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  Tensor out(std::move(shape), std::vector<Real>(x.data().begin(), x.data().end()));
  if (detail::should_record({&x})) {
    ImplPtr xi = x.handle();
    detail::TensorImpl* oi = out.impl();
    detail::record(out, [xi, oi] {
      Real* gx = grad_sink(xi);
      if (!gx) return;
      for (std::size_t i = 0; i < oi->grad.size(); ++i) gx[i] += oi->grad[i];
    });
  }
  return out;
}

Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids, const Shape& ids_shape,
                 std::int32_t pad_id) {
  if (table.rank() != 2) throw DimensionError("embedding: table must be 2-D, got " + shape_string(table.shape()));
  if (shape_numel(ids_shape) != ids.size()) {
    throw DimensionError("embedding: " + std::to_string(ids.size()) + " ids for shape " + shape_string(ids_shape));
  }
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  for (std::int32_t id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw VocabError("embedding: token " + std::to_string(id) + " outside table of " + std::to_string(vocab) +
                       " rows");
    }
  }
  Shape oshape = ids_shape;
  oshape.push_back(d);
  Tensor out(oshape);
  const Real* td = table.data().data();
  Real* od = out.mutable_data().data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == pad_id) continue;
    const Real* row = td + static_cast<std::size_t>(ids[i]) * d;
    std::copy(row, row + d, od + i * d);
  }
  if (detail::should_record({&table})) {
    ImplPtr ti = table.handle();
    detail::TensorImpl* oi = out.impl();
    std::vector<std::int32_t> saved(ids.begin(), ids.end());
    detail::record(out, [ti, oi, d, pad_id, saved = std::move(saved)] {
      Real* gt = grad_sink(ti);
      if (!gt) return;
      const Real* g = oi->grad.data();
      for (std::size_t i = 0; i < saved.size(); ++i) {
        if (saved[i] == pad_id) continue;
        Real* row = gt + static_cast<std::size_t>(saved[i]) * d;
        for (std::size_t j = 0; j < d; ++j) row[j] += g[i * d + j];
      }
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  const std::size_t w = x.shape().back();
  const std::size_t nrows = x.numel() / w;
  for (std::size_t r : rows) {
    if (r >= nrows) {
      throw DimensionError("gather_rows: row " + std::to_string(r) + " outside " + shape_string(x.shape()));
    }
  }
  if (rows.empty()) throw ContractError("gather_rows: no rows requested");
  Tensor out(Shape{rows.size(), w});
  const Real* xd = x.data().data();
  Real* od = out.mutable_data().data();
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(xd + rows[i] * w, xd + (rows[i] + 1) * w, od + i * w);
  if (detail::should_record({&x})) {
    ImplPtr xi = x.handle();
    detail::TensorImpl* oi = out.impl();
    std::vector<std::size_t> saved(rows.begin(), rows.end());
    detail::record(out, [xi, oi, w, saved = std::move(saved)] {
      Real* gx = grad_sink(xi);
      if (!gx) return;
      const Real* g = oi->grad.data();
      for (std::size_t i = 0; i < saved.size(); ++i) {
        for (std::size_t j = 0; j < w; ++j) gx[saved[i] * w + j] += g[i * w + j];
      }
    });
  }
  return out;
}

Tensor masked_mean_pool(const Tensor& x, std::span<const std::uint8_t> pad_mask) {
  if (x.rank() != 3) throw DimensionError("masked_mean_pool: expected [b,L,d], got " + shape_string(x.shape()));
  const std::size_t b = x.dim(0), len = x.dim(1), d = x.dim(2);
  if (pad_mask.size() != b * len) throw DimensionError("masked_mean_pool: pad mask size mismatch");
  Tensor out(Shape{b, d});
  std::vector<Real> inv_count(b, Real{0});
  const Real* xd = x.data().data();
  Real* od = out.mutable_data().data();
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t count = 0;
    for (std::size_t l = 0; l < len; ++l) {
      if (pad_mask[i * len + l]) continue;
      ++count;
      for (std::size_t j = 0; j < d; ++j) od[i * d + j] += xd[(i * len + l) * d + j];
    }
    if (count == 0) continue;
    inv_count[i] = Real{1} / static_cast<Real>(count);
    for (std::size_t j = 0; j < d; ++j) od[i * d + j] *= inv_count[i];
  }
  if (detail::should_record({&x})) {
    ImplPtr xi = x.handle();
    detail::TensorImpl* oi = out.impl();
    std::vector<std::uint8_t> mask(pad_mask.begin(), pad_mask.end());
    detail::record(out, [xi, oi, b, len, d, mask = std::move(mask), inv_count = std::move(inv_count)] {
      Real* gx = grad_sink(xi);
      if (!gx) return;
      const Real* g = oi->grad.data();
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t l = 0; l < len; ++l) {
          if (mask[i * len + l]) continue;
          for (std::size_t j = 0; j < d; ++j) gx[(i * len + l) * d + j] += g[i * d + j] * inv_count[i];
        }
      }
    });
  }
  return out;
}

Tensor apply_pad_mask(const Tensor& x, std::span<const std::uint8_t> pad_mask) {
  if (x.rank() < 2 || pad_mask.size() != x.dim(0) * x.dim(1)) {
    throw DimensionError("apply_pad_mask: mask of " + std::to_string(pad_mask.size()) + " entries for " +
                         shape_string(x.shape()));
  }
  const std::size_t w = x.numel() / pad_mask.size();
  Tensor out(x.shape(), std::vector<Real>(x.data().begin(), x.data().end()));
  Real* od = out.mutable_data().data();
  for (std::size_t i = 0; i < pad_mask.size(); ++i) {
    if (pad_mask[i]) std::fill(od + i * w, od + (i + 1) * w, Real{0});
  }
  if (detail::should_record({&x})) {
    ImplPtr xi = x.handle();
    detail::TensorImpl* oi = out.impl();
    std::vector<std::uint8_t> mask(pad_mask.begin(), pad_mask.end());
    detail::record(out, [xi, oi, w, mask = std::move(mask)] {
      Real* gx = grad_sink(xi);
      if (!gx) return;
      const Real* g = oi->grad.data();
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) continue;
        for (std::size_t j = 0; j < w; ++j) gx[i * w + j] += g[i * w + j];
      }
    });
  }
  return out;
}

Tensor nll_from_probs(const Tensor& probs, std::span<const std::size_t> targets) {
  if (probs.rank() != 2 || probs.dim(0) != targets.size()) {
    throw DimensionError("nll_from_probs: probs " + shape_string(probs.shape()) + " vs " +
                         std::to_string(targets.size()) + " targets");
  }
  const std::size_t n = probs.dim(0), v = probs.dim(1);
  const Real* pd = probs.data().data();
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] >= v) throw VocabError("nll_from_probs: target " + std::to_string(targets[i]) + " >= " + std::to_string(v));
    total -= std::log(pd[i * v + targets[i]]);
  }
  Tensor out = Tensor::scalar(total / static_cast<Real>(n));
  if (detail::should_record({&probs})) {
    ImplPtr pi = probs.handle();
    detail::TensorImpl* oi = out.impl();
    std::vector<std::size_t> saved(targets.begin(), targets.end());
    detail::record(out, [pi, oi, n, v, saved = std::move(saved)] {
      Real* gp = grad_sink(pi);
      if (!gp) return;
      const Real g = oi->grad[0] / static_cast<Real>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = i * v + saved[i];
        gp[idx] -= g / pi->data[idx];
      }
    });
  }
  return out;
}

Tensor mse(const Tensor& pred, std::span<const Real> target) {
  if (pred.numel() != target.size()) {
    throw DimensionError("mse: prediction " + shape_string(pred.shape()) + " vs " + std::to_string(target.size()) +
                         " targets");
  }
  const std::size_t n = target.size();
  const Real* pd = pred.data().data();
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) total += (pd[i] - target[i]) * (pd[i] - target[i]);
  Tensor out = Tensor::scalar(total / static_cast<Real>(n));
  if (detail::should_record({&pred})) {
    ImplPtr pi = pred.handle();
    detail::TensorImpl* oi = out.impl();
    std::vector<Real> saved(target.begin(), target.end());
    detail::record(out, [pi, oi, n, saved = std::move(saved)] {
      Real* gp = grad_sink(pi);
      if (!gp) return;
      const Real g = oi->grad[0] * Real{2} / static_cast<Real>(n);
      for (std::size_t i = 0; i < n; ++i) gp[i] += g * (pi->data[i] - saved[i]);
    });
  }
  return out;
}

Tensor binary_cross_entropy(const Tensor& p, std::span<const Real> labels) {
  if (p.numel() != labels.size()) {
    throw DimensionError("binary_cross_entropy: " + shape_string(p.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  static constexpr Real kClamp = Real{1e-12};
  const std::size_t n = labels.size();
  const Real* pd = p.data().data();
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Real q = std::clamp(pd[i], kClamp, Real{1} - kClamp);
    total -= labels[i] * std::log(q) + (Real{1} - labels[i]) * std::log(Real{1} - q);
  }
  Tensor out = Tensor::scalar(total / static_cast<Real>(n));
  if (detail::should_record({&p})) {
    ImplPtr pi = p.handle();
    detail::TensorImpl* oi = out.impl();
    std::vector<Real> saved(labels.begin(), labels.end());
    detail::record(out, [pi, oi, n, saved = std::move(saved)] {
      Real* gp = grad_sink(pi);
      if (!gp) return;
      const Real g = oi->grad[0] / static_cast<Real>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const Real q = std::clamp(pi->data[i], kClamp, Real{1} - kClamp);
        gp[i] -= g * (saved[i] / q - (Real{1} - saved[i]) / (Real{1} - q));
      }
    });
  }
  return out;
}

}  // namespace labtx::ops
