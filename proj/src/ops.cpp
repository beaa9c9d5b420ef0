// Copyright 2026 The AdaST-cpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "adast/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace adast {

namespace {
thread_local AttentionCounters g_attention_counters;

using std::size_t;

template <typename T>
using NodeT = detail::Node<T>;

// Product of all extents except the last `trailing` ones.
size_t leading_count(const Shape& shape, size_t trailing) {
  size_t n = 1;
  for (size_t i = 0; i + trailing < shape.size(); ++i) n *= shape[i];
  return n;
}

bool same_leading(const Shape& a, const Shape& b, size_t trailing) {
  if (a.size() != b.size() || a.size() < trailing) return false;
  return std::equal(a.begin(), a.end() - static_cast<std::ptrdiff_t>(trailing), b.begin());
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_to_string(a) + " and " +
                       shape_to_string(b));
}

template <typename T>
void require_rank(const char* op, const Tensor<T>& x, size_t min_rank) {
  if (!x.defined()) throw ContractError(std::string(op) + ": undefined tensor");
  if (x.rank() < min_rank) {
    throw DimensionError(std::string(op) + ": expected rank >= " + std::to_string(min_rank) +
                         ", got shape " + shape_to_string(x.shape()));
  }
}

// C[m,n] = A[m,k] B[k,n]. Each output element accumulates over k in order,
// independent of m, so a row's value never depends on its neighbours.
template <typename T>
void gemm(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    std::fill(crow, crow + n, T(0));
    const T* arow = a + i * k;
    for (size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// dA[m,k] += dC[m,n] B[k,n]^T, via a transposed copy of B so the inner loop is contiguous.
template <typename T>
void gemm_grad_a(const T* dc, const T* b, T* da, size_t m, size_t k, size_t n) {
  std::vector<T> bt(n * k);
  for (size_t p = 0; p < k; ++p) {
    for (size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  }
  std::vector<T> acc(k);
  for (size_t i = 0; i < m; ++i) {
    const T* g = dc + i * n;
    std::fill(acc.begin(), acc.end(), T(0));
    for (size_t j = 0; j < n; ++j) {
      const T gj = g[j];
      const T* brow = bt.data() + j * k;
      for (size_t p = 0; p < k; ++p) acc[p] += gj * brow[p];
    }
    T* drow = da + i * k;
    for (size_t p = 0; p < k; ++p) drow[p] += acc[p];
  }
}

// dB[k,n] += A[m,k]^T dC[m,n]
template <typename T>
void gemm_grad_b(const T* a, const T* dc, T* db, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const T* g = dc + i * n;
    for (size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      T* drow = db + p * n;
      for (size_t j = 0; j < n; ++j) drow[j] += av * g[j];
    }
  }
}

template <typename T>
T dot(const T* a, const T* b, size_t n) {
  T acc = 0;
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

AttentionCounters& attention_counters() { return g_attention_counters; }

template <typename T>
void attend_row(const T* query, std::span<const KeySegment<T>> segments, size_t offset,
                size_t head_dim, T scale, T* probs, T* out) {
  const T* q = query + offset;
  size_t idx = 0;
  for (const auto& seg : segments) {
    for (size_t j = 0; j < seg.count; ++j) {
      T s = dot(q, seg.keys + j * seg.stride + offset, head_dim) * scale;
      if (seg.mask) s += static_cast<T>(seg.mask[j]);
      probs[idx++] = s;
    }
  }
  const size_t total = idx;
  g_attention_counters.key_reads += total;
  T max_score = -std::numeric_limits<T>::infinity();
  for (size_t j = 0; j < total; ++j) max_score = std::max(max_score, probs[j]);
  T denom = 0;
  for (size_t j = 0; j < total; ++j) {
    probs[j] = std::exp(probs[j] - max_score);
    denom += probs[j];
  }
  for (size_t j = 0; j < total; ++j) probs[j] /= denom;

  std::fill(out, out + head_dim, T(0));
  idx = 0;
  for (const auto& seg : segments) {
    for (size_t j = 0; j < seg.count; ++j) {
      const T p = probs[idx++];
      const T* vrow = seg.values + j * seg.stride + offset;
      for (size_t c = 0; c < head_dim; ++c) out[c] += p * vrow[c];
    }
  }
}

namespace ops {

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank("add", a, 0);
  require_rank("add", b, 0);
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (bs.size() > as.size() || !std::equal(bs.rbegin(), bs.rend(), as.rbegin())) {
    shape_error("add", as, bs);
  }
  const size_t n = a.numel();
  const size_t nb = b.numel();
  std::vector<T> out(n);
  auto ad = a.data();
  auto bd = b.data();
  for (size_t i = 0; i < n; ++i) out[i] = ad[i] + bd[i % nb];
  auto* an = a.node().get();
  auto* bn = b.node().get();
  return make_result<T>(as, std::move(out), {&a, &b}, [an, bn, n, nb](NodeT<T>& self) {
    const T* g = self.grad.data();
    if (an->requires_grad) {
      T* da = an->grad_buffer();
      for (size_t i = 0; i < n; ++i) da[i] += g[i];
    }
    if (bn->requires_grad) {
      T* db = bn->grad_buffer();
      for (size_t i = 0; i < n; ++i) db[i % nb] += g[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_error("sub", a.shape(), b.shape());
  const size_t n = a.numel();
  std::vector<T> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = a.data()[i] - b.data()[i];
  auto* an = a.node().get();
  auto* bn = b.node().get();
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [an, bn, n](NodeT<T>& self) {
    const T* g = self.grad.data();
    if (an->requires_grad) {
      T* da = an->grad_buffer();
      for (size_t i = 0; i < n; ++i) da[i] += g[i];
    }
    if (bn->requires_grad) {
      T* db = bn->grad_buffer();
      for (size_t i = 0; i < n; ++i) db[i] -= g[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
  const size_t n = a.numel();
  std::vector<T> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = a.data()[i] * b.data()[i];
  auto* an = a.node().get();
  auto* bn = b.node().get();
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [an, bn, n](NodeT<T>& self) {
    const T* g = self.grad.data();
    if (an->requires_grad) {
      T* da = an->grad_buffer();
      for (size_t i = 0; i < n; ++i) da[i] += g[i] * bn->data[i];
    }
    if (bn->requires_grad) {
      T* db = bn->grad_buffer();
      for (size_t i = 0; i < n; ++i) db[i] += g[i] * an->data[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  require_rank("scale", a, 0);
  const size_t n = a.numel();
  std::vector<T> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = a.data()[i] * factor;
  auto* an = a.node().get();
  return make_result<T>(a.shape(), std::move(out), {&a}, [an, n, factor](NodeT<T>& self) {
    T* da = an->grad_buffer();
    for (size_t i = 0; i < n; ++i) da[i] += self.grad[i] * factor;
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  require_rank("relu", a, 0);
  const size_t n = a.numel();
  std::vector<T> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = a.data()[i] > T(0) ? a.data()[i] : T(0);
  auto* an = a.node().get();
  return make_result<T>(a.shape(), std::move(out), {&a}, [an, n](NodeT<T>& self) {
    T* da = an->grad_buffer();
    for (size_t i = 0; i < n; ++i) {
      if (an->data[i] > T(0)) da[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const size_t m = a.dim(-2), k = a.dim(-1);
  const bool shared = b.rank() == 2;
  if (b.dim(-2) != k || (!shared && !same_leading(a.shape(), b.shape(), 2))) {
    shape_error("matmul", a.shape(), b.shape());
  }
  const size_t n = b.dim(-1);
  const size_t batch = leading_count(a.shape(), 2);
  Shape out_shape = a.shape();
  out_shape.back() = n;
  std::vector<T> out(batch * m * n);
  const size_t b_stride = shared ? 0 : k * n;
  for (size_t bi = 0; bi < batch; ++bi) {
    gemm(a.data().data() + bi * m * k, b.data().data() + bi * b_stride, out.data() + bi * m * n, m, k, n);
  }
  auto* an = a.node().get();
  auto* bn = b.node().get();
  return make_result<T>(std::move(out_shape), std::move(out), {&a, &b},
                        [an, bn, batch, m, k, n, b_stride](NodeT<T>& self) {
    for (size_t bi = 0; bi < batch; ++bi) {
      const T* g = self.grad.data() + bi * m * n;
      if (an->requires_grad) {
        gemm_grad_a(g, bn->data.data() + bi * b_stride, an->grad_buffer() + bi * m * k, m, k, n);
      }
      if (bn->requires_grad) {
        gemm_grad_b(an->data.data() + bi * m * k, g, bn->grad_buffer() + bi * b_stride, m, k, n);
      }
    }
  });
}

template <typename T>
Tensor<T> matmul_transposed(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank("matmul_transposed", a, 2);
  if (!b.defined() || b.rank() != 2 || b.dim(1) != a.dim(-1)) {
    shape_error("matmul_transposed", a.shape(), b.defined() ? b.shape() : Shape{});
  }
  const size_t rows = a.numel() / a.dim(-1), k = a.dim(-1), n = b.dim(0);
  Shape out_shape = a.shape();
  out_shape.back() = n;
  std::vector<T> out(rows * n);
  const T* ad = a.data().data();
  const T* bd = b.data().data();
  for (size_t i = 0; i < rows; ++i) {
    for (size_t j = 0; j < n; ++j) out[i * n + j] = dot(ad + i * k, bd + j * k, k);
  }
  auto* an = a.node().get();
  auto* bn = b.node().get();
  return make_result<T>(std::move(out_shape), std::move(out), {&a, &b}, [an, bn, rows, k, n](NodeT<T>& self) {
    const T* g = self.grad.data();
    if (an->requires_grad) {
      T* da = an->grad_buffer();
      for (size_t i = 0; i < rows; ++i) {
        for (size_t j = 0; j < n; ++j) {
          const T gv = g[i * n + j];
          const T* brow = bn->data.data() + j * k;
          for (size_t p = 0; p < k; ++p) da[i * k + p] += gv * brow[p];
        }
      }
    }
    if (bn->requires_grad) {
      T* db = bn->grad_buffer();
      for (size_t i = 0; i < rows; ++i) {
        const T* arow = an->data.data() + i * k;
        for (size_t j = 0; j < n; ++j) {
          const T gv = g[i * n + j];
          for (size_t p = 0; p < k; ++p) db[j * k + p] += gv * arow[p];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank("linear", x, 1);
  if (!weight.defined() || weight.rank() != 2 || weight.dim(0) != x.dim(-1)) {
    shape_error("linear", x.shape(), weight.defined() ? weight.shape() : Shape{});
  }
  const size_t in = weight.dim(0), out_dim = weight.dim(1);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_dim)) {
    shape_error("linear bias", weight.shape(), bias.shape());
  }
  const size_t rows = x.numel() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out_dim;
  std::vector<T> out(rows * out_dim);
  gemm(x.data().data(), weight.data().data(), out.data(), rows, in, out_dim);
  if (bias.defined()) {
    const T* bd = bias.data().data();
    for (size_t i = 0; i < rows; ++i) {
      T* row = out.data() + i * out_dim;
      for (size_t j = 0; j < out_dim; ++j) row[j] += bd[j];
    }
  }
  auto* xn = x.node().get();
  auto* wn = weight.node().get();
  auto* bn = bias.defined() ? bias.node().get() : nullptr;
  return make_result<T>(std::move(out_shape), std::move(out), {&x, &weight, &bias},
                        [xn, wn, bn, rows, in, out_dim](NodeT<T>& self) {
    const T* g = self.grad.data();
    if (xn->requires_grad) gemm_grad_a(g, wn->data.data(), xn->grad_buffer(), rows, in, out_dim);
    if (wn->requires_grad) gemm_grad_b(xn->data.data(), g, wn->grad_buffer(), rows, in, out_dim);
    if (bn && bn->requires_grad) {
      T* db = bn->grad_buffer();
      for (size_t i = 0; i < rows; ++i) {
        for (size_t j = 0; j < out_dim; ++j) db[j] += g[i * out_dim + j];
      }
    }
  });
}

template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x) {
  require_rank("softmax_lastdim", x, 1);
  const size_t n = x.dim(-1);
  if (n == 0) throw DimensionError("softmax_lastdim: empty last dimension");
  const size_t rows = x.numel() / n;
  std::vector<T> out(x.numel());
  for (size_t r = 0; r < rows; ++r) {
    const T* in = x.data().data() + r * n;
    T* o = out.data() + r * n;
    const T m = *std::max_element(in, in + n);
    T s = 0;
    for (size_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - m);
      s += o[j];
    }
    for (size_t j = 0; j < n; ++j) o[j] /= s;
  }
  auto* xn = x.node().get();
  return make_result<T>(x.shape(), std::move(out), {&x}, [xn, rows, n](NodeT<T>& self) {
    T* dx = xn->grad_buffer();
    for (size_t r = 0; r < rows; ++r) {
      const T* y = self.data.data() + r * n;
      const T* g = self.grad.data() + r * n;
      const T t = dot(g, y, n);
      for (size_t j = 0; j < n; ++j) dx[r * n + j] += y[j] * (g[j] - t);
    }
  });
}

template <typename T>
Tensor<T> log_softmax_lastdim(const Tensor<T>& x) {
  require_rank("log_softmax_lastdim", x, 1);
  const size_t n = x.dim(-1);
  if (n == 0) throw DimensionError("log_softmax_lastdim: empty last dimension");
  const size_t rows = x.numel() / n;
  std::vector<T> out(x.numel());
  for (size_t r = 0; r < rows; ++r) {
    const T* in = x.data().data() + r * n;
    T* o = out.data() + r * n;
    const T m = *std::max_element(in, in + n);
    T s = 0;
    for (size_t j = 0; j < n; ++j) s += std::exp(in[j] - m);
    const T lse = m + std::log(s);
    for (size_t j = 0; j < n; ++j) o[j] = in[j] - lse;
  }
  auto* xn = x.node().get();
  return make_result<T>(x.shape(), std::move(out), {&x}, [xn, rows, n](NodeT<T>& self) {
    T* dx = xn->grad_buffer();
    for (size_t r = 0; r < rows; ++r) {
      const T* y = self.data.data() + r * n;
      const T* g = self.grad.data() + r * n;
      T gs = 0;
      for (size_t j = 0; j < n; ++j) gs += g[j];
      for (size_t j = 0; j < n; ++j) dx[r * n + j] += g[j] - std::exp(y[j]) * gs;
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, double eps) {
  require_rank("layer_norm", x, 1);
  if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be positive, got " + std::to_string(eps));
  const size_t n = x.dim(-1);
  if (gain.rank() != 1 || gain.dim(0) != n) shape_error("layer_norm gain", x.shape(), gain.shape());
  if (bias.rank() != 1 || bias.dim(0) != n) shape_error("layer_norm bias", x.shape(), bias.shape());
  const size_t rows = x.numel() / n;
  std::vector<T> out(x.numel());
  auto normalized = std::make_shared<std::vector<T>>(x.numel());
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  const T* g = gain.data().data();
  const T* b = bias.data().data();
  for (size_t r = 0; r < rows; ++r) {
    const T* in = x.data().data() + r * n;
    T mean = 0;
    for (size_t j = 0; j < n; ++j) mean += in[j];
    mean /= static_cast<T>(n);
    T var = 0;
    for (size_t j = 0; j < n; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<T>(n);
    const T inv = T(1) / std::sqrt(var + static_cast<T>(eps));
    (*inv_std)[r] = inv;
    for (size_t j = 0; j < n; ++j) {
      const T xh = (in[j] - mean) * inv;
      (*normalized)[r * n + j] = xh;
      out[r * n + j] = xh * g[j] + b[j];
    }
  }
  auto* xn = x.node().get();
  auto* gn = gain.node().get();
  auto* bn = bias.node().get();
  return make_result<T>(x.shape(), std::move(out), {&x, &gain, &bias},
                        [xn, gn, bn, rows, n, normalized, inv_std](NodeT<T>& self) {
    std::vector<T> dxhat(n);
    for (size_t r = 0; r < rows; ++r) {
      const T* dy = self.grad.data() + r * n;
      const T* xh = normalized->data() + r * n;
      if (gn->requires_grad) {
        T* dg = gn->grad_buffer();
        for (size_t j = 0; j < n; ++j) dg[j] += dy[j] * xh[j];
      }
      if (bn->requires_grad) {
        T* db = bn->grad_buffer();
        for (size_t j = 0; j < n; ++j) db[j] += dy[j];
      }
      if (xn->requires_grad) {
        T sum_d = 0, sum_dx = 0;
        for (size_t j = 0; j < n; ++j) {
          dxhat[j] = dy[j] * gn->data[j];
          sum_d += dxhat[j];
          sum_dx += dxhat[j] * xh[j];
        }
        const T inv = (*inv_std)[r];
        const T nn = static_cast<T>(n);
        T* dx = xn->grad_buffer() + r * n;
        for (size_t j = 0; j < n; ++j) dx[j] += inv / nn * (nn * dxhat[j] - sum_d - xh[j] * sum_dx);
      }
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  require_rank("sum", x, 0);
  T s = 0;
  for (T v : x.data()) s += v;
  auto* xn = x.node().get();
  const size_t n = x.numel();
  return make_result<T>({}, {s}, {&x}, [xn, n](NodeT<T>& self) {
    T* dx = xn->grad_buffer();
    for (size_t i = 0; i < n; ++i) dx[i] += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, std::span<const T> weights) {
  require_rank("weighted_sum", x, 0);
  if (weights.size() != x.numel()) {
    throw DimensionError("weighted_sum: " + std::to_string(weights.size()) + " weights for tensor " +
                         shape_to_string(x.shape()));
  }
  T s = 0;
  for (size_t i = 0; i < weights.size(); ++i) s += x.data()[i] * weights[i];
  auto* xn = x.node().get();
  auto w = std::make_shared<std::vector<T>>(weights.begin(), weights.end());
  return make_result<T>({}, {s}, {&x}, [xn, w](NodeT<T>& self) {
    T* dx = xn->grad_buffer();
    for (size_t i = 0; i < w->size(); ++i) dx[i] += self.grad[0] * (*w)[i];
  });
}

template <typename T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               const AttentionMask& mask, size_t n_heads, T scale) {
  require_rank("attention", q, 2);
  require_rank("attention", k, 2);
  require_rank("attention", v, 2);
  const size_t lq = q.dim(-2), lk = k.dim(-2), d = q.dim(-1);
  if (k.dim(-1) != d || v.shape() != k.shape() || !same_leading(q.shape(), k.shape(), 2)) {
    shape_error("attention", q.shape(), k.shape());
  }
  if (lk == 0) throw DimensionError("attention: no keys");
  if (n_heads == 0 || d % n_heads != 0) {
    throw DimensionError("attention: width " + std::to_string(d) + " not divisible by " +
                         std::to_string(n_heads) + " heads");
  }
  const size_t batch = leading_count(q.shape(), 2);
  if (!mask.empty()) {
    if (mask.rows != lq || mask.cols != lk || (mask.batch != 1 && mask.batch != batch) ||
        mask.values.size() != mask.batch * lq * lk) {
      throw DimensionError("attention: mask [" + std::to_string(mask.batch) + ", " + std::to_string(mask.rows) +
                           ", " + std::to_string(mask.cols) + "] does not match scores [" +
                           std::to_string(batch) + ", " + std::to_string(lq) + ", " + std::to_string(lk) + "]");
    }
  }
  const size_t dk = d / n_heads;
  std::vector<T> out(batch * lq * d);
  auto probs = std::make_shared<std::vector<T>>(batch * n_heads * lq * lk);
  for (size_t b = 0; b < batch; ++b) {
    const T* kb = k.data().data() + b * lk * d;
    const T* vb = v.data().data() + b * lk * d;
    for (size_t i = 0; i < lq; ++i) {
      KeySegment<T> seg{kb, vb, lk, d, mask.empty() ? nullptr : mask.row(b, i)};
      const T* qrow = q.data().data() + (b * lq + i) * d;
      T* orow = out.data() + (b * lq + i) * d;
      for (size_t h = 0; h < n_heads; ++h) {
        T* p = probs->data() + ((b * n_heads + h) * lq + i) * lk;
        attend_row<T>(qrow, std::span<const KeySegment<T>>(&seg, 1), h * dk, dk, scale, p, orow + h * dk);
      }
    }
  }
  auto* qn = q.node().get();
  auto* kn = k.node().get();
  auto* vn = v.node().get();
  return make_result<T>(q.shape(), std::move(out), {&q, &k, &v},
                        [qn, kn, vn, probs, batch, n_heads, lq, lk, d, dk, scale](NodeT<T>& self) {
    std::vector<T> dp(lk);
    T* dq = qn->requires_grad ? qn->grad_buffer() : nullptr;
    T* dkey = kn->requires_grad ? kn->grad_buffer() : nullptr;
    T* dv = vn->requires_grad ? vn->grad_buffer() : nullptr;
    for (size_t b = 0; b < batch; ++b) {
      for (size_t h = 0; h < n_heads; ++h) {
        const size_t off = h * dk;
        for (size_t i = 0; i < lq; ++i) {
          const T* p = probs->data() + ((b * n_heads + h) * lq + i) * lk;
          const T* go = self.grad.data() + (b * lq + i) * d + off;
          const T* qrow = qn->data.data() + (b * lq + i) * d + off;
          T t = 0;
          for (size_t j = 0; j < lk; ++j) {
            dp[j] = dot(go, vn->data.data() + (b * lk + j) * d + off, dk);
            t += p[j] * dp[j];
          }
          for (size_t j = 0; j < lk; ++j) {
            const T ds = p[j] * (dp[j] - t) * scale;
            const size_t kv = (b * lk + j) * d + off;
            if (dq) {
              const T* krow = kn->data.data() + kv;
              T* dqrow = dq + (b * lq + i) * d + off;
              for (size_t c = 0; c < dk; ++c) dqrow[c] += ds * krow[c];
            }
            if (dkey) {
              for (size_t c = 0; c < dk; ++c) dkey[kv + c] += ds * qrow[c];
            }
            if (dv) {
              for (size_t c = 0; c < dk; ++c) dv[kv + c] += p[j] * go[c];
            }
          }
        }
      }
    }
  });
}

template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const int> ids, const Shape& lead) {
  if (!table.defined() || table.rank() != 2) throw DimensionError("embedding: table must be rank 2");
  if (shape_numel(lead) != ids.size()) {
    throw DimensionError("embedding: " + std::to_string(ids.size()) + " ids for leading shape " +
                         shape_to_string(lead));
  }
  const size_t vocab = table.dim(0), d = table.dim(1);
  for (int id : ids) {
    if (id < 0 || static_cast<size_t>(id) >= vocab) {
      throw ValidationError("embedding: token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(vocab));
    }
  }
  Shape out_shape = lead;
  out_shape.push_back(d);
  std::vector<T> out(ids.size() * d);
  for (size_t r = 0; r < ids.size(); ++r) {
    std::copy_n(table.data().data() + static_cast<size_t>(ids[r]) * d, d, out.data() + r * d);
  }
  auto* tn = table.node().get();
  auto idv = std::make_shared<std::vector<int>>(ids.begin(), ids.end());
  return make_result<T>(std::move(out_shape), std::move(out), {&table}, [tn, idv, d](NodeT<T>& self) {
    T* dt = tn->grad_buffer();
    for (size_t r = 0; r < idv->size(); ++r) {
      T* row = dt + static_cast<size_t>((*idv)[r]) * d;
      for (size_t c = 0; c < d; ++c) row[c] += self.grad[r * d + c];
    }
  });
}

template <typename T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank("concat_rows", a, 2);
  require_rank("concat_rows", b, 2);
  const size_t d = a.dim(-1);
  if (b.dim(-1) != d || !same_leading(a.shape(), b.shape(), 2)) shape_error("concat_rows", a.shape(), b.shape());
  const size_t la = a.dim(-2), lb = b.dim(-2), batch = leading_count(a.shape(), 2);
  Shape out_shape = a.shape();
  out_shape[out_shape.size() - 2] = la + lb;
  std::vector<T> out(batch * (la + lb) * d);
  for (size_t bi = 0; bi < batch; ++bi) {
    std::copy_n(a.data().data() + bi * la * d, la * d, out.data() + bi * (la + lb) * d);
    std::copy_n(b.data().data() + bi * lb * d, lb * d, out.data() + bi * (la + lb) * d + la * d);
  }
  auto* an = a.node().get();
  auto* bn = b.node().get();
  return make_result<T>(std::move(out_shape), std::move(out), {&a, &b}, [an, bn, batch, la, lb, d](NodeT<T>& self) {
    for (size_t bi = 0; bi < batch; ++bi) {
      const T* g = self.grad.data() + bi * (la + lb) * d;
      if (an->requires_grad) {
        T* da = an->grad_buffer() + bi * la * d;
        for (size_t i = 0; i < la * d; ++i) da[i] += g[i];
      }
      if (bn->requires_grad) {
        T* db = bn->grad_buffer() + bi * lb * d;
        for (size_t i = 0; i < lb * d; ++i) db[i] += g[la * d + i];
      }
    }
  });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, size_t start, size_t count) {
  require_rank("slice_rows", x, 2);
  const size_t l = x.dim(-2), d = x.dim(-1), batch = leading_count(x.shape(), 2);
  if (start + count > l) {
    throw DimensionError("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of range for shape " + shape_to_string(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[out_shape.size() - 2] = count;
  std::vector<T> out(batch * count * d);
  for (size_t bi = 0; bi < batch; ++bi) {
    std::copy_n(x.data().data() + (bi * l + start) * d, count * d, out.data() + bi * count * d);
  }
  auto* xn = x.node().get();
  return make_result<T>(std::move(out_shape), std::move(out), {&x}, [xn, batch, l, d, start, count](NodeT<T>& self) {
    T* dx = xn->grad_buffer();
    for (size_t bi = 0; bi < batch; ++bi) {
      const T* g = self.grad.data() + bi * count * d;
      T* dst = dx + (bi * l + start) * d;
      for (size_t i = 0; i < count * d; ++i) dst[i] += g[i];
    }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) shape_error("reshape", x.shape(), shape);
  std::vector<T> out(x.data().begin(), x.data().end());
  auto* xn = x.node().get();
  return make_result<T>(std::move(shape), std::move(out), {&x}, [xn](NodeT<T>& self) {
    T* dx = xn->grad_buffer();
    for (size_t i = 0; i < self.grad.size(); ++i) dx[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, size_t stride) {
  if (!x.defined() || x.rank() != 4) throw DimensionError("conv2d: input must be [B, H, W, C]");
  if (!weight.defined() || weight.rank() != 4 || weight.dim(2) != x.dim(3)) {
    shape_error("conv2d", x.shape(), weight.defined() ? weight.shape() : Shape{});
  }
  if (stride == 0) throw ConfigError("conv2d: stride must be positive");
  const size_t nb = x.dim(0), h = x.dim(1), w = x.dim(2), cin = x.dim(3);
  const size_t kh = weight.dim(0), kw = weight.dim(1), cout = weight.dim(3);
  if (bias.rank() != 1 || bias.dim(0) != cout) shape_error("conv2d bias", weight.shape(), bias.shape());
  if (h < kh || w < kw) {
    throw DimensionError("conv2d: input " + shape_to_string(x.shape()) + " smaller than kernel " +
                         std::to_string(kh) + "x" + std::to_string(kw));
  }
  const size_t oh = (h - kh) / stride + 1, ow = (w - kw) / stride + 1;
  std::vector<T> out(nb * oh * ow * cout);
  const T* xd = x.data().data();
  const T* wd = weight.data().data();
  const T* bd = bias.data().data();
  for (size_t b = 0; b < nb; ++b) {
    for (size_t oy = 0; oy < oh; ++oy) {
      for (size_t ox = 0; ox < ow; ++ox) {
        T* o = out.data() + ((b * oh + oy) * ow + ox) * cout;
        std::fill(o, o + cout, T(0));
        for (size_t dy = 0; dy < kh; ++dy) {
          for (size_t dx = 0; dx < kw; ++dx) {
            const T* xin = xd + ((b * h + oy * stride + dy) * w + ox * stride + dx) * cin;
            for (size_t ic = 0; ic < cin; ++ic) {
              const T xv = xin[ic];
              const T* wrow = wd + ((dy * kw + dx) * cin + ic) * cout;
              for (size_t oc = 0; oc < cout; ++oc) o[oc] += xv * wrow[oc];
            }
          }
        }
        for (size_t oc = 0; oc < cout; ++oc) o[oc] += bd[oc];
      }
    }
  }
  auto* xn = x.node().get();
  auto* wn = weight.node().get();
  auto* bn = bias.node().get();
  return make_result<T>({nb, oh, ow, cout}, std::move(out), {&x, &weight, &bias},
                        [=](NodeT<T>& self) {
    T* gx = xn->requires_grad ? xn->grad_buffer() : nullptr;
    T* gw = wn->requires_grad ? wn->grad_buffer() : nullptr;
    T* gb = bn->requires_grad ? bn->grad_buffer() : nullptr;
    for (size_t b = 0; b < nb; ++b) {
      for (size_t oy = 0; oy < oh; ++oy) {
        for (size_t ox = 0; ox < ow; ++ox) {
          const T* g = self.grad.data() + ((b * oh + oy) * ow + ox) * cout;
          if (gb) {
            for (size_t oc = 0; oc < cout; ++oc) gb[oc] += g[oc];
          }
          for (size_t dy = 0; dy < kh; ++dy) {
            for (size_t dx = 0; dx < kw; ++dx) {
              const size_t xoff = ((b * h + oy * stride + dy) * w + ox * stride + dx) * cin;
              for (size_t ic = 0; ic < cin; ++ic) {
                const size_t woff = ((dy * kw + dx) * cin + ic) * cout;
                if (gx) gx[xoff + ic] += dot(g, wn->data.data() + woff, cout);
                if (gw) {
                  const T xv = xn->data[xoff + ic];
                  for (size_t oc = 0; oc < cout; ++oc) gw[woff + oc] += xv * g[oc];
                }
              }
            }
          }
        }
      }
    }
  });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(p));
  if (p == 0.0) return x;
  const size_t n = x.numel();
  auto keep = std::make_shared<std::vector<T>>(n);
  const T s = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> out(n);
  for (size_t i = 0; i < n; ++i) {
    (*keep)[i] = rng.uniform() >= p ? s : T(0);
    out[i] = x.data()[i] * (*keep)[i];
  }
  auto* xn = x.node().get();
  return make_result<T>(x.shape(), std::move(out), {&x}, [xn, keep](NodeT<T>& self) {
    T* dx = xn->grad_buffer();
    for (size_t i = 0; i < keep->size(); ++i) dx[i] += self.grad[i] * (*keep)[i];
  });
}

namespace {
template <typename T>
void check_pool_args(const Tensor<T>& x, const std::vector<std::vector<bool>>& pad) {
  if (!x.defined() || x.rank() != 3) throw DimensionError("pooling expects [B, L, d]");
  if (pad.size() != x.dim(0)) throw DimensionError("pooling: pad list count does not match batch");
  for (const auto& p : pad) {
    if (p.size() != x.dim(1)) throw DimensionError("pooling: pad list length does not match sequence length");
    if (std::all_of(p.begin(), p.end(), [](bool v) { return v; })) {
      throw ValidationError("pooling: sequence has no non-padded rows");
    }
  }
}
}  // namespace

template <typename T>
Tensor<T> masked_mean_rows(const Tensor<T>& x, const std::vector<std::vector<bool>>& pad) {
  check_pool_args(x, pad);
  const size_t nb = x.dim(0), l = x.dim(1), d = x.dim(2);
  std::vector<T> out(nb * d, T(0));
  auto counts = std::make_shared<std::vector<T>>(nb, T(0));
  for (size_t b = 0; b < nb; ++b) {
    for (size_t i = 0; i < l; ++i) {
      if (pad[b][i]) continue;
      (*counts)[b] += T(1);
      const T* row = x.data().data() + (b * l + i) * d;
      for (size_t c = 0; c < d; ++c) out[b * d + c] += row[c];
    }
    for (size_t c = 0; c < d; ++c) out[b * d + c] /= (*counts)[b];
  }
  auto* xn = x.node().get();
  auto padc = std::make_shared<std::vector<std::vector<bool>>>(pad);
  return make_result<T>({nb, d}, std::move(out), {&x}, [xn, padc, counts, nb, l, d](NodeT<T>& self) {
    T* dx = xn->grad_buffer();
    for (size_t b = 0; b < nb; ++b) {
      for (size_t i = 0; i < l; ++i) {
        if ((*padc)[b][i]) continue;
        for (size_t c = 0; c < d; ++c) dx[(b * l + i) * d + c] += self.grad[b * d + c] / (*counts)[b];
      }
    }
  });
}

template <typename T>
Tensor<T> masked_max_rows(const Tensor<T>& x, const std::vector<std::vector<bool>>& pad) {
  check_pool_args(x, pad);
  const size_t nb = x.dim(0), l = x.dim(1), d = x.dim(2);
  std::vector<T> out(nb * d, -std::numeric_limits<T>::infinity());
  auto arg = std::make_shared<std::vector<size_t>>(nb * d, 0);
  for (size_t b = 0; b < nb; ++b) {
    for (size_t i = 0; i < l; ++i) {
      if (pad[b][i]) continue;
      const T* row = x.data().data() + (b * l + i) * d;
      for (size_t c = 0; c < d; ++c) {
        if (row[c] > out[b * d + c]) {
          out[b * d + c] = row[c];
          (*arg)[b * d + c] = i;
        }
      }
    }
  }
  auto* xn = x.node().get();
  return make_result<T>({nb, d}, std::move(out), {&x}, [xn, arg, nb, l, d](NodeT<T>& self) {
    T* dx = xn->grad_buffer();
    for (size_t b = 0; b < nb; ++b) {
      for (size_t c = 0; c < d; ++c) dx[(b * l + (*arg)[b * d + c]) * d + c] += self.grad[b * d + c];
    }
  });
}

#define ADAST_INSTANTIATE_OPS(T)                                                                         \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> scale(const Tensor<T>&, T);                                                         \
  template Tensor<T> relu(const Tensor<T>&);                                                             \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> matmul_transposed(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> softmax_lastdim(const Tensor<T>&);                                                  \
  template Tensor<T> log_softmax_lastdim(const Tensor<T>&);                                              \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);           \
  template Tensor<T> sum(const Tensor<T>&);                                                              \
  template Tensor<T> mean(const Tensor<T>&);                                                             \
  template Tensor<T> weighted_sum(const Tensor<T>&, std::span<const T>);                                 \
  template Tensor<T> scaled_dot_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                          const AttentionMask&, size_t, T);                              \
  template Tensor<T> embedding(const Tensor<T>&, std::span<const int>, const Shape&);                    \
  template Tensor<T> concat_rows(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> slice_rows(const Tensor<T>&, size_t, size_t);                                       \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                   \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, size_t);               \
  template Tensor<T> dropout(const Tensor<T>&, double, Rng&);                                            \
  template Tensor<T> masked_mean_rows(const Tensor<T>&, const std::vector<std::vector<bool>>&);          \
  template Tensor<T> masked_max_rows(const Tensor<T>&, const std::vector<std::vector<bool>>&);

ADAST_INSTANTIATE_OPS(float)
ADAST_INSTANTIATE_OPS(double)

}  // namespace ops

template void attend_row<float>(const float*, std::span<const KeySegment<float>>, size_t, size_t, float, float*,
                                float*);
template void attend_row<double>(const double*, std::span<const KeySegment<double>>, size_t, size_t, double,
                                 double*, double*);

}  // namespace adast
