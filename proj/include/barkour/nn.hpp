#pragma once

#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "barkour/common.hpp"

namespace barkour::nn {

/// Dense tensor with an optional gradient slot. The scalar type is a
/// template parameter; production code uses the 32-bit alias below, the
/// finite-difference oracle instantiates double.
template <typename T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> val;
  std::vector<T> grad;  // same length as val once touched
  bool requires_grad = false;

  int64_t size() const { return static_cast<int64_t>(val.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int last_dim() const { return shape.back(); }
  int64_t rows() const { return size() / last_dim(); }  // collapse leading dims

  void ensure_grad() {
    if (grad.size() != val.size()) grad.assign(val.size(), T(0));
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
  }
};

template <typename T>
using TensorRefT = std::shared_ptr<TensorT<T>>;

template <typename T>
TensorRefT<T> make_tensor(std::vector<int> shape, bool requires_grad = false) {
  auto t = std::make_shared<TensorT<T>>();
  int64_t n = 1;
  for (int d : shape) n *= d;
  t->shape = std::move(shape);
  t->val.assign(static_cast<size_t>(n), T(0));
  t->requires_grad = requires_grad;
  return t;
}

template <typename T>
TensorRefT<T> full(std::vector<int> shape, T value, bool requires_grad = false) {
  auto t = make_tensor<T>(std::move(shape), requires_grad);
  std::fill(t->val.begin(), t->val.end(), value);
  return t;
}

/// Records forward ops; backward() replays them in reverse. Ops are recorded
/// in execution order, which is a valid topological order, so every node's
/// backward runs exactly once.
template <typename T>
class TapeT {
 public:
  using Ref = TensorRefT<T>;
  using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MapM = Eigen::Map<MatT>;
  using CMapM = Eigen::Map<const MatT>;

  Ref matmul(Ref a, Ref b) {  // [.., k] x [k, n]
    const int k = a->last_dim();
    if (b->shape.size() != 2 || b->dim(0) != k)
      throw std::invalid_argument("matmul shape mismatch");
    const int64_t m = a->rows();
    const int n = b->dim(1);
    std::vector<int> out_shape(a->shape.begin(), a->shape.end() - 1);
    out_shape.push_back(n);
    auto out = make_tensor<T>(out_shape, a->requires_grad || b->requires_grad);
    {
      CMapM ma(a->val.data(), m, k), mb(b->val.data(), k, n);
      MapM mo(out->val.data(), m, n);
      mo.noalias() = ma * mb;
    }
    return record(out, [a, b, out, m, k, n] {
      out->ensure_grad();
      CMapM go(out->grad.data(), m, n);
      if (a->requires_grad) {
        a->ensure_grad();
        CMapM mb(b->val.data(), k, n);
        MapM ga(a->grad.data(), m, k);
        ga.noalias() += go * mb.transpose();
      }
      if (b->requires_grad) {
        b->ensure_grad();
        CMapM ma(a->val.data(), m, k);
        MapM gb(b->grad.data(), k, n);
        gb.noalias() += ma.transpose() * go;
      }
    });
  }

  Ref linear(Ref x, Ref w, Ref b) { return add_row(matmul(x, w), b); }

  Ref add(Ref a, Ref b) {
    if (a->size() != b->size()) throw std::invalid_argument("add shape mismatch");
    auto out = make_tensor<T>(a->shape, a->requires_grad || b->requires_grad);
    for (int64_t i = 0; i < a->size(); ++i) out->val[i] = a->val[i] + b->val[i];
    return record(out, [a, b, out] {
      out->ensure_grad();
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t i = 0; i < b->grad.size(); ++i) b->grad[i] += out->grad[i];
      }
    });
  }

  Ref sub(Ref a, Ref b) {
    if (a->size() != b->size()) throw std::invalid_argument("sub shape mismatch");
    auto out = make_tensor<T>(a->shape, a->requires_grad || b->requires_grad);
    for (int64_t i = 0; i < a->size(); ++i) out->val[i] = a->val[i] - b->val[i];
    return record(out, [a, b, out] {
      out->ensure_grad();
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t i = 0; i < b->grad.size(); ++i) b->grad[i] -= out->grad[i];
      }
    });
  }

  Ref mul(Ref a, Ref b) {
    if (a->size() != b->size()) throw std::invalid_argument("mul shape mismatch");
    auto out = make_tensor<T>(a->shape, a->requires_grad || b->requires_grad);
    for (int64_t i = 0; i < a->size(); ++i) out->val[i] = a->val[i] * b->val[i];
    return record(out, [a, b, out] {
      out->ensure_grad();
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += out->grad[i] * b->val[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t i = 0; i < b->grad.size(); ++i) b->grad[i] += out->grad[i] * a->val[i];
      }
    });
  }

  Ref scale(Ref a, T c) {
    auto out = make_tensor<T>(a->shape, a->requires_grad);
    for (int64_t i = 0; i < a->size(); ++i) out->val[i] = a->val[i] * c;
    return record(out, [a, out, c] {
      if (!a->requires_grad) return;
      out->ensure_grad();
      a->ensure_grad();
      for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += out->grad[i] * c;
    });
  }

  Ref add_row(Ref x, Ref row) {
    const int d = x->last_dim();
    if (row->size() != d) throw std::invalid_argument("add_row width mismatch");
    const int64_t n = x->rows();
    auto out = make_tensor<T>(x->shape, x->requires_grad || row->requires_grad);
    for (int64_t r = 0; r < n; ++r)
      for (int c = 0; c < d; ++c) out->val[r * d + c] = x->val[r * d + c] + row->val[c];
    return record(out, [x, row, out, n, d] {
      out->ensure_grad();
      if (x->requires_grad) {
        x->ensure_grad();
        for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += out->grad[i];
      }
      if (row->requires_grad) {
        row->ensure_grad();
        for (int64_t r = 0; r < n; ++r)
          for (int c = 0; c < d; ++c) row->grad[c] += out->grad[r * d + c];
      }
    });
  }

  Ref mul_row(Ref x, Ref row) {
    const int d = x->last_dim();
    if (row->size() != d) throw std::invalid_argument("mul_row width mismatch");
    const int64_t n = x->rows();
    auto out = make_tensor<T>(x->shape, x->requires_grad || row->requires_grad);
    for (int64_t r = 0; r < n; ++r)
      for (int c = 0; c < d; ++c) out->val[r * d + c] = x->val[r * d + c] * row->val[c];
    return record(out, [x, row, out, n, d] {
      out->ensure_grad();
      if (x->requires_grad) {
        x->ensure_grad();
        for (int64_t r = 0; r < n; ++r)
          for (int c = 0; c < d; ++c)
            x->grad[r * d + c] += out->grad[r * d + c] * row->val[c];
      }
      if (row->requires_grad) {
        row->ensure_grad();
        for (int64_t r = 0; r < n; ++r)
          for (int c = 0; c < d; ++c)
            row->grad[c] += out->grad[r * d + c] * x->val[r * d + c];
      }
    });
  }

  Ref concat_cols(const std::vector<Ref>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat of nothing");
    const int64_t n = parts[0]->rows();
    int total = 0;
    bool grad = false;
    for (const auto& p : parts) {
      if (p->rows() != n) throw std::invalid_argument("concat row mismatch");
      total += p->last_dim();
      grad |= p->requires_grad;
    }
    auto out = make_tensor<T>({static_cast<int>(n), total}, grad);
    int off = 0;
    for (const auto& p : parts) {
      const int d = p->last_dim();
      for (int64_t r = 0; r < n; ++r)
        std::memcpy(&out->val[r * total + off], &p->val[r * d], d * sizeof(T));
      off += d;
    }
    return record(out, [parts, out, n, total] {
      out->ensure_grad();
      int off2 = 0;
      for (const auto& p : parts) {
        const int d = p->last_dim();
        if (p->requires_grad) {
          p->ensure_grad();
          for (int64_t r = 0; r < n; ++r)
            for (int c = 0; c < d; ++c)
              p->grad[r * d + c] += out->grad[r * total + off2 + c];
        }
        off2 += d;
      }
    });
  }

  Ref concat_rows(const std::vector<Ref>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat of nothing");
    const int d = parts[0]->last_dim();
    int64_t n = 0;
    bool grad = false;
    for (const auto& p : parts) {
      if (p->last_dim() != d) throw std::invalid_argument("concat_rows width mismatch");
      n += p->rows();
      grad |= p->requires_grad;
    }
    auto out = make_tensor<T>({static_cast<int>(n), d}, grad);
    int64_t off = 0;
    for (const auto& p : parts) {
      std::memcpy(&out->val[off * d], p->val.data(), p->val.size() * sizeof(T));
      off += p->rows();
    }
    return record(out, [parts, out, d] {
      out->ensure_grad();
      int64_t off2 = 0;
      for (const auto& p : parts) {
        if (p->requires_grad) {
          p->ensure_grad();
          for (int64_t i = 0; i < p->size(); ++i) p->grad[i] += out->grad[off2 * d + i];
        }
        off2 += p->rows();
      }
    });
  }

  Ref slice_cols(Ref x, int start, int len) {
    const int d = x->last_dim();
    if (start < 0 || start + len > d) throw std::invalid_argument("slice out of range");
    const int64_t n = x->rows();
    std::vector<int> shape(x->shape.begin(), x->shape.end() - 1);
    shape.push_back(len);
    auto out = make_tensor<T>(shape, x->requires_grad);
    for (int64_t r = 0; r < n; ++r)
      std::memcpy(&out->val[r * len], &x->val[r * d + start], len * sizeof(T));
    return record(out, [x, out, start, len, n, d] {
      if (!x->requires_grad) return;
      out->ensure_grad();
      x->ensure_grad();
      for (int64_t r = 0; r < n; ++r)
        for (int c = 0; c < len; ++c) x->grad[r * d + start + c] += out->grad[r * len + c];
    });
  }

  Ref reshape(Ref x, std::vector<int> shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    if (n != x->size()) throw std::invalid_argument("reshape element count mismatch");
    auto out = make_tensor<T>(std::move(shape), x->requires_grad);
    out->val = x->val;
    return record(out, [x, out] {
      if (!x->requires_grad) return;
      out->ensure_grad();
      x->ensure_grad();
      for (int64_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[i];
    });
  }

  Ref gather_rows(Ref x, std::vector<int> indices) {
    const int d = x->last_dim();
    const int64_t n = x->rows();
    auto out = make_tensor<T>({static_cast<int>(indices.size()), d}, x->requires_grad);
    for (size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] < 0 || indices[i] >= n)
        throw std::invalid_argument("gather index out of range");
      std::memcpy(&out->val[i * d], &x->val[static_cast<size_t>(indices[i]) * d],
                  d * sizeof(T));
    }
    return record(out, [x, out, indices, d] {
      if (!x->requires_grad) return;
      out->ensure_grad();
      x->ensure_grad();
      for (size_t i = 0; i < indices.size(); ++i)
        for (int c = 0; c < d; ++c)
          x->grad[static_cast<size_t>(indices[i]) * d + c] += out->grad[i * d + c];
    });
  }

  Ref relu(Ref x) {
    auto out = make_tensor<T>(x->shape, x->requires_grad);
    for (int64_t i = 0; i < x->size(); ++i) out->val[i] = x->val[i] > 0 ? x->val[i] : T(0);
    return record(out, [x, out] {
      if (!x->requires_grad) return;
      out->ensure_grad();
      x->ensure_grad();
      for (size_t i = 0; i < x->grad.size(); ++i)
        if (x->val[i] > 0) x->grad[i] += out->grad[i];
    });
  }

  Ref elu(Ref x) {
    auto out = make_tensor<T>(x->shape, x->requires_grad);
    for (int64_t i = 0; i < x->size(); ++i)
      out->val[i] = x->val[i] > 0 ? x->val[i] : T(std::expm1(x->val[i]));
    return record(out, [x, out] {
      if (!x->requires_grad) return;
      out->ensure_grad();
      x->ensure_grad();
      for (size_t i = 0; i < x->grad.size(); ++i)
        x->grad[i] += out->grad[i] * (x->val[i] > 0 ? T(1) : out->val[i] + T(1));
    });
  }

  Ref tanh(Ref x) {
    auto out = make_tensor<T>(x->shape, x->requires_grad);
    for (int64_t i = 0; i < x->size(); ++i) out->val[i] = std::tanh(x->val[i]);
    return record(out, [x, out] {
      if (!x->requires_grad) return;
      out->ensure_grad();
      x->ensure_grad();
      for (size_t i = 0; i < x->grad.size(); ++i)
        x->grad[i] += out->grad[i] * (T(1) - out->val[i] * out->val[i]);
    });
  }

  Ref exp(Ref x) {
    auto out = make_tensor<T>(x->shape, x->requires_grad);
    for (int64_t i = 0; i < x->size(); ++i) out->val[i] = std::exp(x->val[i]);
    return record(out, [x, out] {
      if (!x->requires_grad) return;
      out->ensure_grad();
      x->ensure_grad();
      for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += out->grad[i] * out->val[i];
    });
  }

  Ref clamp(Ref x, T lo, T hi) {
    auto out = make_tensor<T>(x->shape, x->requires_grad);
    for (int64_t i = 0; i < x->size(); ++i)
      out->val[i] = x->val[i] < lo ? lo : (x->val[i] > hi ? hi : x->val[i]);
    return record(out, [x, out, lo, hi] {
      if (!x->requires_grad) return;
      out->ensure_grad();
      x->ensure_grad();
      for (size_t i = 0; i < x->grad.size(); ++i)
        if (x->val[i] > lo && x->val[i] < hi) x->grad[i] += out->grad[i];
    });
  }

  Ref min_elem(Ref a, Ref b) {
    if (a->size() != b->size()) throw std::invalid_argument("min shape mismatch");
    auto out = make_tensor<T>(a->shape, a->requires_grad || b->requires_grad);
    for (int64_t i = 0; i < a->size(); ++i) out->val[i] = std::min(a->val[i], b->val[i]);
    return record(out, [a, b, out] {
      out->ensure_grad();
      for (int64_t i = 0; i < out->size(); ++i) {
        const bool pick_a = a->val[i] <= b->val[i];
        if (pick_a && a->requires_grad) {
          a->ensure_grad();
          a->grad[i] += out->grad[i];
        } else if (!pick_a && b->requires_grad) {
          b->ensure_grad();
          b->grad[i] += out->grad[i];
        }
      }
    });
  }

  // x [B,C,H,W], w [O,C,3,3], b [O]; stride 1, zero padding 1.
  Ref conv2d(Ref x, Ref w, Ref b) {
    if (x->shape.size() != 4 || w->shape.size() != 4 || w->dim(2) != 3 || w->dim(3) != 3)
      throw std::invalid_argument("conv2d expects x[B,C,H,W], w[O,C,3,3]");
    const int B = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    const int O = w->dim(0);
    if (w->dim(1) != C || b->size() != O)
      throw std::invalid_argument("conv2d channel mismatch");
    auto out =
        make_tensor<T>({B, O, H, W}, x->requires_grad || w->requires_grad || b->requires_grad);

    auto xat = [&](int bi, int c, int i, int j) -> T {
      if (i < 0 || i >= H || j < 0 || j >= W) return T(0);
      return x->val[((static_cast<int64_t>(bi) * C + c) * H + i) * W + j];
    };
    for (int bi = 0; bi < B; ++bi)
      for (int o = 0; o < O; ++o)
        for (int i = 0; i < H; ++i)
          for (int j = 0; j < W; ++j) {
            T acc = b->val[o];
            for (int c = 0; c < C; ++c)
              for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj)
                  acc += w->val[((static_cast<int64_t>(o) * C + c) * 3 + di + 1) * 3 +
                                dj + 1] *
                         xat(bi, c, i + di, j + dj);
            out->val[((static_cast<int64_t>(bi) * O + o) * H + i) * W + j] = acc;
          }

    return record(out, [x, w, b, out, B, C, H, W, O] {
      out->ensure_grad();
      if (x->requires_grad) x->ensure_grad();
      if (w->requires_grad) w->ensure_grad();
      if (b->requires_grad) b->ensure_grad();
      auto xidx = [&](int bi, int c, int i, int j) {
        return ((static_cast<int64_t>(bi) * C + c) * H + i) * W + j;
      };
      for (int bi = 0; bi < B; ++bi)
        for (int o = 0; o < O; ++o)
          for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j) {
              const T g = out->grad[((static_cast<int64_t>(bi) * O + o) * H + i) * W + j];
              if (g == T(0)) continue;
              if (b->requires_grad) b->grad[o] += g;
              for (int c = 0; c < C; ++c)
                for (int di = -1; di <= 1; ++di)
                  for (int dj = -1; dj <= 1; ++dj) {
                    const int ii = i + di, jj = j + dj;
                    if (ii < 0 || ii >= H || jj < 0 || jj >= W) continue;
                    const int64_t widx =
                        ((static_cast<int64_t>(o) * C + c) * 3 + di + 1) * 3 + dj + 1;
                    if (w->requires_grad) w->grad[widx] += g * x->val[xidx(bi, c, ii, jj)];
                    if (x->requires_grad) x->grad[xidx(bi, c, ii, jj)] += g * w->val[widx];
                  }
            }
    });
  }

  Ref layernorm(Ref x, Ref gain, Ref bias) {
    const int d = x->last_dim();
    if (gain->size() != d || bias->size() != d)
      throw std::invalid_argument("layernorm parameter width mismatch");
    const int64_t n = x->rows();
    const T eps = T(1e-5);
    auto out = make_tensor<T>(x->shape, true);
    auto xhat = std::make_shared<std::vector<T>>(x->val.size());
    auto inv_std = std::make_shared<std::vector<T>>(n);
    for (int64_t r = 0; r < n; ++r) {
      T mean = 0;
      for (int c = 0; c < d; ++c) mean += x->val[r * d + c];
      mean /= d;
      T var = 0;
      for (int c = 0; c < d; ++c) {
        const T dv = x->val[r * d + c] - mean;
        var += dv * dv;
      }
      var /= d;
      const T is = T(1) / std::sqrt(var + eps);
      (*inv_std)[r] = is;
      for (int c = 0; c < d; ++c) {
        const T h = (x->val[r * d + c] - mean) * is;
        (*xhat)[r * d + c] = h;
        out->val[r * d + c] = h * gain->val[c] + bias->val[c];
      }
    }
    return record(out, [x, gain, bias, out, xhat, inv_std, n, d] {
      out->ensure_grad();
      if (gain->requires_grad) gain->ensure_grad();
      if (bias->requires_grad) bias->ensure_grad();
      if (x->requires_grad) x->ensure_grad();
      for (int64_t r = 0; r < n; ++r) {
        T sum_g = 0, sum_gh = 0;
        for (int c = 0; c < d; ++c) {
          const T go = out->grad[r * d + c];
          const T h = (*xhat)[r * d + c];
          if (gain->requires_grad) gain->grad[c] += go * h;
          if (bias->requires_grad) bias->grad[c] += go;
          const T gh = go * gain->val[c];
          sum_g += gh;
          sum_gh += gh * h;
        }
        if (x->requires_grad) {
          const T is = (*inv_std)[r];
          for (int c = 0; c < d; ++c) {
            const T gh = out->grad[r * d + c] * gain->val[c];
            const T h = (*xhat)[r * d + c];
            x->grad[r * d + c] += is * (gh - sum_g / d - h * sum_gh / d);
          }
        }
      }
    });
  }

  Ref softmax_rows(Ref x) {
    const int d = x->last_dim();
    const int64_t n = x->rows();
    auto out = make_tensor<T>(x->shape, x->requires_grad);
    for (int64_t r = 0; r < n; ++r) {
      T mx = std::numeric_limits<T>::lowest();
      for (int c = 0; c < d; ++c) mx = std::max(mx, x->val[r * d + c]);
      T sum = 0;
      for (int c = 0; c < d; ++c) {
        const T e = std::exp(x->val[r * d + c] - mx);
        out->val[r * d + c] = e;
        sum += e;
      }
      for (int c = 0; c < d; ++c) out->val[r * d + c] /= sum;
    }
    return record(out, [x, out, n, d] {
      if (!x->requires_grad) return;
      out->ensure_grad();
      x->ensure_grad();
      for (int64_t r = 0; r < n; ++r) {
        T dot = 0;
        for (int c = 0; c < d; ++c) dot += out->grad[r * d + c] * out->val[r * d + c];
        for (int c = 0; c < d; ++c)
          x->grad[r * d + c] += out->val[r * d + c] * (out->grad[r * d + c] - dot);
      }
    });
  }

  /// Multi-head scaled dot-product attention over pre-projected q, k, v of
  /// shape [B, T, D]; each position attends to itself and the past only.
  Ref causal_attention(Ref q, Ref k, Ref v, int heads) {
    if (q->shape.size() != 3) throw std::invalid_argument("attention expects [B,T,D]");
    const int B = q->dim(0), Tn = q->dim(1), D = q->dim(2);
    if (D % heads != 0) throw std::invalid_argument("d_model must divide by heads");
    const int dh = D / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    auto out = make_tensor<T>(q->shape, true);
    auto probs = std::make_shared<std::vector<MatT>>();
    probs->reserve(static_cast<size_t>(B) * heads);

    auto head_block = [dh, Tn, D](std::vector<T>& buf, int b, int h) {
      return Eigen::Map<MatT, 0, Eigen::OuterStride<>>(
          buf.data() + static_cast<int64_t>(b) * Tn * D + h * dh, Tn, dh,
          Eigen::OuterStride<>(D));
    };

    for (int b = 0; b < B; ++b)
      for (int h = 0; h < heads; ++h) {
        auto qb = head_block(q->val, b, h);
        auto kb = head_block(k->val, b, h);
        auto vb = head_block(v->val, b, h);
        MatT s = qb * kb.transpose() * scale;
        for (int i = 0; i < Tn; ++i) {
          T mx = std::numeric_limits<T>::lowest();
          for (int j = 0; j <= i; ++j) mx = std::max(mx, s(i, j));
          T sum = 0;
          for (int j = 0; j <= i; ++j) {
            s(i, j) = std::exp(s(i, j) - mx);
            sum += s(i, j);
          }
          for (int j = 0; j <= i; ++j) s(i, j) /= sum;
          for (int j = i + 1; j < Tn; ++j) s(i, j) = T(0);  // strictly-future mask
        }
        auto ob = head_block(out->val, b, h);
        ob = s * vb;
        probs->push_back(std::move(s));
      }

    return record(out, [q, k, v, out, probs, B, Tn, heads, scale, head_block] {
      out->ensure_grad();
      q->ensure_grad();
      k->ensure_grad();
      v->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int h = 0; h < heads; ++h) {
          const MatT& p = (*probs)[static_cast<size_t>(b) * heads + h];
          auto qb = head_block(q->val, b, h);
          auto kb = head_block(k->val, b, h);
          auto vb = head_block(v->val, b, h);
          auto gq = head_block(q->grad, b, h);
          auto gk = head_block(k->grad, b, h);
          auto gv = head_block(v->grad, b, h);
          auto go = head_block(out->grad, b, h);
          gv += p.transpose() * go;
          MatT dp = go * vb.transpose();
          MatT ds(Tn, Tn);
          for (int i = 0; i < Tn; ++i) {
            T dot = 0;
            for (int j = 0; j <= i; ++j) dot += dp(i, j) * p(i, j);
            for (int j = 0; j <= i; ++j) ds(i, j) = p(i, j) * (dp(i, j) - dot);
            for (int j = i + 1; j < Tn; ++j) ds(i, j) = T(0);
          }
          gq += ds * kb * scale;
          gk += ds.transpose() * qb * scale;
        }
    });
  }

  Ref sum(Ref x) {
    auto out = make_tensor<T>({1}, x->requires_grad);
    double acc = 0;
    for (T v : x->val) acc += v;
    out->val[0] = static_cast<T>(acc);
    return record(out, [x, out] {
      if (!x->requires_grad) return;
      out->ensure_grad();
      x->ensure_grad();
      for (auto& g : x->grad) g += out->grad[0];
    });
  }

  Ref mean(Ref x) {
    const T inv = T(1) / static_cast<T>(x->size());
    auto out = make_tensor<T>({1}, x->requires_grad);
    double acc = 0;
    for (T v : x->val) acc += v;
    out->val[0] = static_cast<T>(acc * inv);
    return record(out, [x, out, inv] {
      if (!x->requires_grad) return;
      out->ensure_grad();
      x->ensure_grad();
      for (auto& g : x->grad) g += out->grad[0] * inv;
    });
  }

  Ref sum_rows(Ref x) {
    const int d = x->last_dim();
    const int64_t n = x->rows();
    auto out = make_tensor<T>({static_cast<int>(n)}, x->requires_grad);
    for (int64_t r = 0; r < n; ++r) {
      double acc = 0;
      for (int c = 0; c < d; ++c) acc += x->val[r * d + c];
      out->val[r] = static_cast<T>(acc);
    }
    return record(out, [x, out, n, d] {
      if (!x->requires_grad) return;
      out->ensure_grad();
      x->ensure_grad();
      for (int64_t r = 0; r < n; ++r)
        for (int c = 0; c < d; ++c) x->grad[r * d + c] += out->grad[r];
    });
  }

  Ref add_scalar(Ref x, Ref s, T coeff) {  // x + coeff * broadcast(s)
    if (s->size() != 1) throw std::invalid_argument("add_scalar expects a scalar");
    auto out = make_tensor<T>(x->shape, x->requires_grad || s->requires_grad);
    for (int64_t i = 0; i < x->size(); ++i) out->val[i] = x->val[i] + coeff * s->val[0];
    return record(out, [x, s, out, coeff] {
      out->ensure_grad();
      if (x->requires_grad) {
        x->ensure_grad();
        for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += out->grad[i];
      }
      if (s->requires_grad) {
        s->ensure_grad();
        for (size_t i = 0; i < out->grad.size(); ++i) s->grad[0] += coeff * out->grad[i];
      }
    });
  }

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded backward step once.
  /// Gradients accumulate into .grad (parameters keep theirs until an
  /// optimizer consumes them). Throws if loss is not a scalar on this tape.
  void backward(Ref loss) {
    if (loss->size() != 1) throw std::invalid_argument("backward needs a scalar loss");
    bool on_tape = false;
    for (const auto& o : outputs_)
      if (o == loss) on_tape = true;
    if (!on_tape) throw std::invalid_argument("loss was not produced by this tape");
    loss->ensure_grad();
    loss->grad[0] = T(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

  size_t num_ops() const { return ops_.size(); }

 private:
  Ref record(Ref out, std::function<void()> back) {
    outputs_.push_back(out);
    ops_.push_back(std::move(back));
    return out;
  }
  std::vector<std::function<void()>> ops_;
  std::vector<Ref> outputs_;
};

template <typename T>
struct AdamT {
  double lr = 3e-4, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t t = 0;
  std::map<TensorT<T>*, std::pair<std::vector<T>, std::vector<T>>> moments;

  /// Applies one update from the accumulated gradients, then zeroes them.
  /// Throws SimulationFault on non-finite gradients.
  void step(const std::vector<TensorRefT<T>>& params) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (const auto& p : params) {
      if (p->grad.empty()) continue;  // no gradient reached this parameter
      auto& [m, v] = moments[p.get()];
      if (m.size() != p->val.size()) {
        m.assign(p->val.size(), T(0));
        v.assign(p->val.size(), T(0));
      }
      for (size_t i = 0; i < p->val.size(); ++i) {
        const double g = p->grad[i];
        if (!std::isfinite(g)) throw SimulationFault("non-finite gradient in Adam step");
        m[i] = static_cast<T>(beta1 * m[i] + (1 - beta1) * g);
        v[i] = static_cast<T>(beta2 * v[i] + (1 - beta2) * g * g);
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p->val[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps));
      }
      p->zero_grad();
    }
  }
};

// Production aliases: 32-bit reals throughout.
using Tensor = TensorT<float>;
using TensorRef = TensorRefT<float>;
using Tape = TapeT<float>;
using Adam = AdamT<float>;

/// Named parameter collection with checkpoint IO: little-endian float32
/// blobs plus a JSON manifest (names, shapes, dtype, training step, extra
/// architecture metadata).
struct ParamMap {
  std::vector<std::pair<std::string, TensorRef>> entries;

  void add(const std::string& name, TensorRef t) { entries.emplace_back(name, t); }
  TensorRef at(const std::string& name) const;
  std::vector<TensorRef> tensors() const;
  int64_t total_params() const;
};

void save_checkpoint(const std::string& dir, const ParamMap& params, int64_t step,
                     const std::string& arch_json);
/// Loads values into matching tensors; throws SchemaError on mismatch.
void load_checkpoint(const std::string& dir, ParamMap& params);
std::string checkpoint_arch(const std::string& dir);
int64_t checkpoint_step(const std::string& dir);

template <typename T>
void init_uniform(TensorT<T>& t, T lo, T hi, Rng& rng) {
  for (auto& v : t.val) v = static_cast<T>(rng.uniform(lo, hi));
}

template <typename T>
void init_normal(TensorT<T>& t, T stddev, Rng& rng) {
  for (auto& v : t.val) v = static_cast<T>(stddev * rng.normal());
}

template <typename T>
void init_kaiming(TensorT<T>& t, int fan_in, Rng& rng) {
  const T bound = std::sqrt(T(6) / static_cast<T>(fan_in));
  init_uniform(t, -bound, bound, rng);
}

}  // namespace barkour::nn
