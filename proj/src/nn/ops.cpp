// SPDX-License-Identifier: Apache-2.0
#include "cure/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cure/common/errors.hpp"

namespace cure::nn {

namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

template <typename T>
void require_2d(const char* op, const Tensor<T>& a) {
  if (a.dim() != 2) {
    throw DimensionError(std::string(op) + ": expected a 2-D tensor, got " + shape_str(a.shape()));
  }
}

template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const char* op, const Tensor<T>& a, Fwd fwd, Deriv deriv) {
  const auto& x = a.node()->value;
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  return make_result<T>(op, a.shape(), std::move(out), {a.node()}, [deriv](Node<T>& self) {
    Node<T>& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * deriv(in.value[i], self.value[i]);
    }
  });
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.dim() != 2 || b.dim() != 2 || a.size(1) != b.size(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.size(0), k = a.size(1), n = b.size(1);
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  std::vector<T> out(m * n, T(0));
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = av[i * k + p];
      const T* brow = &bv[p * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  return make_result<T>("matmul", {m, n}, std::move(out), {a.node(), b.node()},
                        [m, k, n](Node<T>& self) {
                          Node<T>& A = *self.inputs[0];
                          Node<T>& B = *self.inputs[1];
                          const auto& g = self.grad;
                          if (A.requires_grad) {
                            auto& ga = A.ensure_grad();
                            for (std::size_t i = 0; i < m; ++i) {
                              for (std::size_t p = 0; p < k; ++p) {
                                T acc = 0;
                                const T* grow = &g[i * n];
                                const T* brow = &B.value[p * n];
                                for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                                ga[i * k + p] += acc;
                              }
                            }
                          }
                          if (B.requires_grad) {
                            auto& gb = B.ensure_grad();
                            for (std::size_t i = 0; i < m; ++i) {
                              const T* grow = &g[i * n];
                              for (std::size_t p = 0; p < k; ++p) {
                                const T aip = A.value[i * k + p];
                                T* gbrow = &gb[p * n];
                                for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_2d("transpose", a);
  const std::size_t m = a.size(0), n = a.size(1);
  const auto& av = a.node()->value;
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return make_result<T>("transpose", {n, m}, std::move(out), {a.node()}, [m, n](Node<T>& self) {
    Node<T>& A = *self.inputs[0];
    if (!A.requires_grad) return;
    auto& ga = A.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += self.grad[j * m + i];
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result<T>("add", a.shape(), std::move(out), {a.node(), b.node()},
                        [](Node<T>& self) {
                          accumulate<T>(*self.inputs[0], self.grad);
                          accumulate<T>(*self.inputs[1], self.grad);
                        });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result<T>("sub", a.shape(), std::move(out), {a.node(), b.node()},
                        [](Node<T>& self) {
                          accumulate<T>(*self.inputs[0], self.grad);
                          Node<T>& B = *self.inputs[1];
                          if (!B.requires_grad) return;
                          auto& gb = B.ensure_grad();
                          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= self.grad[i];
                        });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result<T>("mul", a.shape(), std::move(out), {a.node(), b.node()},
                        [](Node<T>& self) {
                          Node<T>& A = *self.inputs[0];
                          Node<T>& B = *self.inputs[1];
                          if (A.requires_grad) {
                            auto& ga = A.ensure_grad();
                            for (std::size_t i = 0; i < ga.size(); ++i)
                              ga[i] += self.grad[i] * B.value[i];
                          }
                          if (B.requires_grad) {
                            auto& gb = B.ensure_grad();
                            for (std::size_t i = 0; i < gb.size(); ++i)
                              gb[i] += self.grad[i] * A.value[i];
                          }
                        });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  const std::size_t d = x.cols();
  if (bias.numel() != d) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " vs input " +
                         shape_str(x.shape()));
  }
  const auto& xv = x.node()->value;
  const auto& bv = bias.node()->value;
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + bv[i % d];
  return make_result<T>("add_bias", x.shape(), std::move(out), {x.node(), bias.node()},
                        [d](Node<T>& self) {
                          accumulate<T>(*self.inputs[0], self.grad);
                          Node<T>& B = *self.inputs[1];
                          if (!B.requires_grad) return;
                          auto& gb = B.ensure_grad();
                          for (std::size_t i = 0; i < self.grad.size(); ++i)
                            gb[i % d] += self.grad[i];
                        });
}

template <typename T>
Tensor<T> mul_row(const Tensor<T>& x, const Tensor<T>& gain) {
  const std::size_t d = x.cols();
  if (gain.numel() != d) {
    throw DimensionError("mul_row: gain " + shape_str(gain.shape()) + " vs input " +
                         shape_str(x.shape()));
  }
  const auto& xv = x.node()->value;
  const auto& gv = gain.node()->value;
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * gv[i % d];
  return make_result<T>("mul_row", x.shape(), std::move(out), {x.node(), gain.node()},
                        [d](Node<T>& self) {
                          Node<T>& X = *self.inputs[0];
                          Node<T>& G = *self.inputs[1];
                          if (X.requires_grad) {
                            auto& gx = X.ensure_grad();
                            for (std::size_t i = 0; i < gx.size(); ++i)
                              gx[i] += self.grad[i] * G.value[i % d];
                          }
                          if (G.requires_grad) {
                            auto& gg = G.ensure_grad();
                            for (std::size_t i = 0; i < self.grad.size(); ++i)
                              gg[i % d] += self.grad[i] * X.value[i];
                          }
                        });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  return unary<T>(
      "scale", a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  return unary<T>(
      "add_scalar", a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return unary<T>(
      "relu", a, [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> silu(const Tensor<T>& a) {
  return unary<T>(
      "silu", a, [](T x) { return x * sigmoid(x); },
      [](T x, T) {
        const T s = sigmoid(x);
        return s * (T(1) + x * (T(1) - s));
      });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  constexpr T kC = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kA = T(0.044715);
  return unary<T>(
      "gelu", a,
      [](T x) { return T(0.5) * x * (T(1) + std::tanh(kC * (x + kA * x * x * x))); },
      [](T x, T) {
        const T t = std::tanh(kC * (x + kA * x * x * x));
        return T(0.5) * (T(1) + t) +
               T(0.5) * x * (T(1) - t * t) * kC * (T(1) + T(3) * kA * x * x);
      });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  return unary<T>(
      "exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = 0;
  for (T v : a.values()) total += v;
  return make_result<T>("sum", {1}, {total}, {a.node()}, [](Node<T>& self) {
    Node<T>& A = *self.inputs[0];
    if (!A.requires_grad) return;
    auto& ga = A.ensure_grad();
    for (auto& g : ga) g += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  const T n = static_cast<T>(a.numel());
  T total = 0;
  for (T v : a.values()) total += v;
  return make_result<T>("mean", {1}, {total / n}, {a.node()}, [n](Node<T>& self) {
    Node<T>& A = *self.inputs[0];
    if (!A.requires_grad) return;
    auto& ga = A.ensure_grad();
    const T g = self.grad[0] / n;
    for (auto& v : ga) v += g;
  });
}

template <typename T>
Tensor<T> row_sum(const Tensor<T>& a) {
  const std::size_t d = a.cols();
  const std::size_t n = a.numel() / d;
  const auto& av = a.node()->value;
  std::vector<T> out(n, T(0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i] += av[i * d + j];
  return make_result<T>("row_sum", {n}, std::move(out), {a.node()}, [d](Node<T>& self) {
    Node<T>& A = *self.inputs[0];
    if (!A.requires_grad) return;
    auto& ga = A.ensure_grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i / d];
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  if (x.dim() == 0 || x.cols() == 0) {
    throw DimensionError("layer_norm: zero-width input " + shape_str(x.shape()));
  }
  const std::size_t d = x.cols();
  if (gamma.numel() != d || beta.numel() != d) {
    throw DimensionError("layer_norm: affine params " + shape_str(gamma.shape()) + "/" +
                         shape_str(beta.shape()) + " vs input " + shape_str(x.shape()));
  }
  const std::size_t n = x.numel() / d;
  const auto& xv = x.node()->value;
  const auto& gv = gamma.node()->value;
  const auto& bv = beta.node()->value;
  std::vector<T> xhat(xv.size());
  std::vector<T> inv_std(n);
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = &xv[i * d];
    T mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(d);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (row[j] - mu) * is;
      xhat[i * d + j] = h;
      out[i * d + j] = gv[j] * h + bv[j];
    }
  }
  return make_result<T>(
      "layer_norm", x.shape(), std::move(out), {x.node(), gamma.node(), beta.node()},
      [n, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
        Node<T>& X = *self.inputs[0];
        Node<T>& G = *self.inputs[1];
        Node<T>& B = *self.inputs[2];
        const auto& g = self.grad;
        if (G.requires_grad) {
          auto& gg = G.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) gg[i % d] += g[i] * xhat[i];
        }
        if (B.requires_grad) {
          auto& gb = B.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % d] += g[i];
        }
        if (X.requires_grad) {
          auto& gx = X.ensure_grad();
          std::vector<T> dxhat(d);
          for (std::size_t i = 0; i < n; ++i) {
            T mean_d = 0, mean_dx = 0;
            for (std::size_t j = 0; j < d; ++j) {
              dxhat[j] = g[i * d + j] * G.value[j];
              mean_d += dxhat[j];
              mean_dx += dxhat[j] * xhat[i * d + j];
            }
            mean_d /= static_cast<T>(d);
            mean_dx /= static_cast<T>(d);
            for (std::size_t j = 0; j < d; ++j) {
              gx[i * d + j] += inv_std[i] * (dxhat[j] - mean_d - xhat[i * d + j] * mean_dx);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& logits) {
  const std::size_t k = logits.cols();
  const std::size_t n = logits.numel() / k;
  const auto& z = logits.node()->value;
  std::vector<T> out(z.size());
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = &z[i * k];
    const T mx = *std::max_element(row, row + k);
    T s = 0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(row[j] - mx);
    const T lse = mx + std::log(s);
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = row[j] - lse;
  }
  return make_result<T>("log_softmax", logits.shape(), std::move(out), {logits.node()},
                        [n, k](Node<T>& self) {
                          Node<T>& Z = *self.inputs[0];
                          if (!Z.requires_grad) return;
                          auto& gz = Z.ensure_grad();
                          for (std::size_t i = 0; i < n; ++i) {
                            T gsum = 0;
                            for (std::size_t j = 0; j < k; ++j) gsum += self.grad[i * k + j];
                            for (std::size_t j = 0; j < k; ++j) {
                              const T p = std::exp(self.value[i * k + j]);
                              gz[i * k + j] += self.grad[i * k + j] - p * gsum;
                            }
                          }
                        });
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> targets) {
  require_2d("softmax_cross_entropy", logits);
  const std::size_t n = logits.size(0), k = logits.size(1);
  if (targets.size() != n) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + shape_str(logits.shape()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= k) {
      throw IndexError("softmax_cross_entropy: target " + std::to_string(targets[i]) +
                       " outside [0, " + std::to_string(k) + ")");
    }
  }
  const auto& z = logits.node()->value;
  std::vector<T> probs(z.size());
  T loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = &z[i * k];
    const T mx = *std::max_element(row, row + k);
    T s = 0;
    for (std::size_t j = 0; j < k; ++j) {
      probs[i * k + j] = std::exp(row[j] - mx);
      s += probs[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] /= s;
    loss += (mx + std::log(s)) - row[targets[i]];
  }
  loss /= static_cast<T>(n);
  std::vector<int> tgt(targets.begin(), targets.end());
  return make_result<T>(
      "softmax_cross_entropy", {1}, {loss}, {logits.node()},
      [n, k, probs = std::move(probs), tgt = std::move(tgt)](Node<T>& self) {
        Node<T>& Z = *self.inputs[0];
        if (!Z.requires_grad) return;
        auto& gz = Z.ensure_grad();
        const T g = self.grad[0] / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            const T onehot = static_cast<int>(j) == tgt[i] ? T(1) : T(0);
            gz[i * k + j] += g * (probs[i * k + j] - onehot);
          }
        }
      });
}

namespace {

// Shared kernel for the cosine ops: rows of length d.
template <typename T>
Tensor<T> cosine_impl(const char* op, const Tensor<T>& a, const Tensor<T>& b, std::size_t n,
                      std::size_t d, Shape out_shape, CosineDiagnostics* diag) {
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  std::vector<T> out(n), raw(n), na(n), nb(n);
  std::vector<char> clamped(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    T dot = 0, sa = 0, sb = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const T x = av[i * d + j], y = bv[i * d + j];
      dot += x * y;
      sa += x * x;
      sb += y * y;
    }
    na[i] = std::sqrt(sa);
    nb[i] = std::sqrt(sb);
    T denom = na[i] * nb[i];
    if (denom < T(kCosineEps)) {
      denom = T(kCosineEps);
      clamped[i] = 1;
      if (diag) ++diag->degenerate;
    }
    raw[i] = dot / denom;
    out[i] = std::clamp(raw[i], T(-1), T(1));
  }
  return make_result<T>(
      op, std::move(out_shape), std::move(out), {a.node(), b.node()},
      [n, d, raw = std::move(raw), na = std::move(na), nb = std::move(nb),
       clamped = std::move(clamped)](Node<T>& self) {
        Node<T>& A = *self.inputs[0];
        Node<T>& B = *self.inputs[1];
        for (std::size_t i = 0; i < n; ++i) {
          const T g = self.grad[i];
          if (g == T(0)) continue;
          if (clamped[i]) {
            const T inv = T(1) / T(kCosineEps);
            if (A.requires_grad) {
              auto& ga = A.ensure_grad();
              for (std::size_t j = 0; j < d; ++j) ga[i * d + j] += g * B.value[i * d + j] * inv;
            }
            if (B.requires_grad) {
              auto& gb = B.ensure_grad();
              for (std::size_t j = 0; j < d; ++j) gb[i * d + j] += g * A.value[i * d + j] * inv;
            }
            continue;
          }
          const T inv = T(1) / (na[i] * nb[i]);
          if (A.requires_grad) {
            auto& ga = A.ensure_grad();
            const T c = raw[i] / (na[i] * na[i]);
            for (std::size_t j = 0; j < d; ++j)
              ga[i * d + j] += g * (B.value[i * d + j] * inv - c * A.value[i * d + j]);
          }
          if (B.requires_grad) {
            auto& gb = B.ensure_grad();
            const T c = raw[i] / (nb[i] * nb[i]);
            for (std::size_t j = 0; j < d; ++j)
              gb[i * d + j] += g * (A.value[i * d + j] * inv - c * B.value[i * d + j]);
          }
        }
      });
}

}  // namespace

template <typename T>
Tensor<T> cosine_similarity(const Tensor<T>& a, const Tensor<T>& b, CosineDiagnostics* diag) {
  require_same_shape("cosine_similarity", a, b);
  return cosine_impl<T>("cosine_similarity", a, b, 1, a.numel(), {1}, diag);
}

template <typename T>
Tensor<T> cosine_rows(const Tensor<T>& a, const Tensor<T>& b, CosineDiagnostics* diag) {
  require_same_shape("cosine_rows", a, b);
  const std::size_t d = a.cols();
  const std::size_t n = a.numel() / d;
  return cosine_impl<T>("cosine_rows", a, b, n, d, {n}, diag);
}

template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mse", a, b);
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  const T n = static_cast<T>(av.size());
  T total = 0;
  for (std::size_t i = 0; i < av.size(); ++i) total += (av[i] - bv[i]) * (av[i] - bv[i]);
  return make_result<T>("mse", {1}, {total / n}, {a.node(), b.node()}, [n](Node<T>& self) {
    Node<T>& A = *self.inputs[0];
    Node<T>& B = *self.inputs[1];
    const T g = T(2) * self.grad[0] / n;
    if (A.requires_grad) {
      auto& ga = A.ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * (A.value[i] - B.value[i]);
    }
    if (B.requires_grad) {
      auto& gb = B.ensure_grad();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g * (A.value[i] - B.value[i]);
    }
  });
}

template <typename T>
Tensor<T> block_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                          std::size_t seq_len) {
  require_2d("block_attention", q);
  require_2d("block_attention", k);
  require_2d("block_attention", v);
  require_same_shape("block_attention", q, k);
  const std::size_t n = q.size(0), h = q.size(1), e = v.size(1);
  if (v.size(0) != n || seq_len == 0 || n % seq_len != 0) {
    throw DimensionError("block_attention: " + std::to_string(n) + " query rows, values " +
                         shape_str(v.shape()) + ", seq_len " + std::to_string(seq_len));
  }
  const std::size_t T_ = seq_len;
  const T sc = T(1) / std::sqrt(static_cast<T>(h));
  const auto& qv = q.node()->value;
  const auto& kv = k.node()->value;
  const auto& vv = v.node()->value;
  std::vector<T> probs(n * T_);
  std::vector<T> out(n * e, T(0));
  for (std::size_t blk = 0; blk < n; blk += T_) {
    for (std::size_t i = 0; i < T_; ++i) {
      T* p = &probs[(blk + i) * T_];
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < T_; ++j) {
        T s = 0;
        for (std::size_t c = 0; c < h; ++c) s += qv[(blk + i) * h + c] * kv[(blk + j) * h + c];
        p[j] = s * sc;
        mx = std::max(mx, p[j]);
      }
      T z = 0;
      for (std::size_t j = 0; j < T_; ++j) {
        p[j] = std::exp(p[j] - mx);
        z += p[j];
      }
      for (std::size_t j = 0; j < T_; ++j) {
        p[j] /= z;
        for (std::size_t c = 0; c < e; ++c) out[(blk + i) * e + c] += p[j] * vv[(blk + j) * e + c];
      }
    }
  }
  return make_result<T>(
      "block_attention", {n, e}, std::move(out), {q.node(), k.node(), v.node()},
      [n, h, e, T_, sc, probs = std::move(probs)](Node<T>& self) {
        Node<T>& Q = *self.inputs[0];
        Node<T>& K = *self.inputs[1];
        Node<T>& V = *self.inputs[2];
        const auto& g = self.grad;
        std::vector<T> dp(T_), ds(T_);
        for (std::size_t blk = 0; blk < n; blk += T_) {
          for (std::size_t i = 0; i < T_; ++i) {
            const T* p = &probs[(blk + i) * T_];
            const T* gi = &g[(blk + i) * e];
            if (V.requires_grad) {
              auto& gv = V.ensure_grad();
              for (std::size_t j = 0; j < T_; ++j)
                for (std::size_t c = 0; c < e; ++c) gv[(blk + j) * e + c] += p[j] * gi[c];
            }
            if (!Q.requires_grad && !K.requires_grad) continue;
            T dot = 0;
            for (std::size_t j = 0; j < T_; ++j) {
              T s = 0;
              for (std::size_t c = 0; c < e; ++c) s += gi[c] * V.value[(blk + j) * e + c];
              dp[j] = s;
              dot += p[j] * s;
            }
            for (std::size_t j = 0; j < T_; ++j) ds[j] = p[j] * (dp[j] - dot) * sc;
            if (Q.requires_grad) {
              auto& gq = Q.ensure_grad();
              for (std::size_t j = 0; j < T_; ++j)
                for (std::size_t c = 0; c < h; ++c)
                  gq[(blk + i) * h + c] += ds[j] * K.value[(blk + j) * h + c];
            }
            if (K.requires_grad) {
              auto& gk = K.ensure_grad();
              for (std::size_t j = 0; j < T_; ++j)
                for (std::size_t c = 0; c < h; ++c)
                  gk[(blk + j) * h + c] += ds[j] * Q.value[(blk + i) * h + c];
            }
          }
        }
      });
}

#define CURE_INSTANTIATE_OPS(T)                                                                \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> transpose(const Tensor<T>&);                                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> mul_row(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> scale(const Tensor<T>&, T);                                               \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                          \
  template Tensor<T> relu(const Tensor<T>&);                                                   \
  template Tensor<T> silu(const Tensor<T>&);                                                   \
  template Tensor<T> gelu(const Tensor<T>&);                                                   \
  template Tensor<T> exp(const Tensor<T>&);                                                    \
  template Tensor<T> sum(const Tensor<T>&);                                                    \
  template Tensor<T> mean(const Tensor<T>&);                                                   \
  template Tensor<T> row_sum(const Tensor<T>&);                                                \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);      \
  template Tensor<T> log_softmax(const Tensor<T>&);                                            \
  template Tensor<T> softmax_cross_entropy(const Tensor<T>&, std::span<const int>);            \
  template Tensor<T> cosine_similarity(const Tensor<T>&, const Tensor<T>&,                     \
                                       CosineDiagnostics*);                                    \
  template Tensor<T> cosine_rows(const Tensor<T>&, const Tensor<T>&, CosineDiagnostics*);      \
  template Tensor<T> mse(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> block_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                     std::size_t);

CURE_INSTANTIATE_OPS(float)
CURE_INSTANTIATE_OPS(double)

}  // namespace cure::nn
