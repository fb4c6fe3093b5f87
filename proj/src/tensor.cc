// src/tensor.cc
#include "tensor.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <unordered_map>
#include <unordered_set>

namespace l2w {

namespace {

constexpr Real kLayerNormEps = 1e-5;
constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();

std::string shape_str(const std::vector<int>& s) {
  std::string out = "{";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "}";
}

void check_finite(const char* op, const Var& x) {
  for (Real v : x->value)
    if (!std::isfinite(v))
      L2W_RAISE(op << ": non-finite input value in tensor "
                   << (x->name.empty() ? shape_str(x->shape) : x->name));
}

void check_matrix(const char* op, const Var& x) {
  L2W_CHECK(x->shape.size() == 2,
            op << ": expected a 2-D tensor, got shape " << shape_str(x->shape));
}

Var make_node(std::vector<int> shape, std::vector<Var> parents) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value.assign(n->size(), 0.0);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  return n;
}

inline Real sigmoid(Real x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  Real e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var constant(std::vector<int> shape, std::vector<Real> values) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  L2W_CHECK(static_cast<int64_t>(values.size()) == n->size(),
            "constant: value count " << values.size()
                                     << " does not match shape "
                                     << shape_str(n->shape));
  n->value = std::move(values);
  return n;
}

Var scalar_const(Real v) { return constant({1}, {v}); }

Var leaf(std::string name, std::vector<int> shape, std::vector<Real> values) {
  Var n = constant(std::move(shape), std::move(values));
  n->name = std::move(name);
  n->requires_grad = true;
  n->ensure_grad();
  return n;
}

Var make_op(std::vector<int> shape, std::vector<Real> value,
            std::vector<Var> parents, std::function<void(Node&)> backprop) {
  Var n = make_node(std::move(shape), std::move(parents));
  L2W_CHECK(static_cast<int64_t>(value.size()) == n->size(),
            "make_op: value count does not match shape");
  n->value = std::move(value);
  n->backprop = std::move(backprop);
  return n;
}

Var conv1d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  check_matrix("conv1d", x);
  L2W_CHECK(w->shape.size() == 3, "conv1d: weight must be {K,Cin,Cout}, got "
                                      << shape_str(w->shape));
  L2W_CHECK(stride >= 1 && pad >= 0,
            "conv1d: stride " << stride << " / pad " << pad << " invalid");
  const int T = x->rows(), cin = x->cols();
  const int K = w->shape[0], wcin = w->shape[1], cout = w->shape[2];
  L2W_CHECK(cin == wcin, "conv1d: input channels " << cin
                                                   << " != weight channels "
                                                   << wcin);
  L2W_CHECK(b->shape == std::vector<int>{cout},
            "conv1d: bias shape " << shape_str(b->shape) << " != {" << cout
                                  << "}");
  L2W_CHECK(T + 2 * pad >= K, "conv1d: kernel " << K
                                                << " wider than padded input "
                                                << T << "+2*" << pad);
  check_finite("conv1d", x);
  check_finite("conv1d", w);
  check_finite("conv1d", b);

  const int tout = (T + 2 * pad - K) / stride + 1;
  Var out = make_node({tout, cout}, {x, w, b});
  const Real* xv = x->value.data();
  const Real* wv = w->value.data();
  Real* ov = out->value.data();
  for (int t = 0; t < tout; ++t) {
    Real* orow = ov + static_cast<int64_t>(t) * cout;
    for (int co = 0; co < cout; ++co) orow[co] = b->value[co];
    for (int k = 0; k < K; ++k) {
      int ti = t * stride - pad + k;
      if (ti < 0 || ti >= T) continue;
      const Real* xrow = xv + static_cast<int64_t>(ti) * cin;
      const Real* wk = wv + static_cast<int64_t>(k) * cin * cout;
      for (int ci = 0; ci < cin; ++ci) {
        Real xi = xrow[ci];
        if (xi == 0.0) continue;
        const Real* wrow = wk + static_cast<int64_t>(ci) * cout;
        for (int co = 0; co < cout; ++co) orow[co] += xi * wrow[co];
      }
    }
  }
  out->backprop = [T, cin, K, cout, stride, pad, tout](Node& self) {
    Node& nx = *self.parents[0];
    Node& nw = *self.parents[1];
    Node& nb = *self.parents[2];
    const Real* g = self.grad.data();
    if (nx.requires_grad) {
      nx.ensure_grad();
      for (int t = 0; t < tout; ++t) {
        const Real* grow = g + static_cast<int64_t>(t) * cout;
        for (int k = 0; k < K; ++k) {
          int ti = t * stride - pad + k;
          if (ti < 0 || ti >= T) continue;
          Real* xg = nx.grad.data() + static_cast<int64_t>(ti) * cin;
          const Real* wk =
              nw.value.data() + static_cast<int64_t>(k) * cin * cout;
          for (int ci = 0; ci < cin; ++ci) {
            const Real* wrow = wk + static_cast<int64_t>(ci) * cout;
            Real acc = 0.0;
            for (int co = 0; co < cout; ++co) acc += grow[co] * wrow[co];
            xg[ci] += acc;
          }
        }
      }
    }
    if (nw.requires_grad) {
      nw.ensure_grad();
      for (int t = 0; t < tout; ++t) {
        const Real* grow = g + static_cast<int64_t>(t) * cout;
        for (int k = 0; k < K; ++k) {
          int ti = t * stride - pad + k;
          if (ti < 0 || ti >= T) continue;
          const Real* xrow = nx.value.data() + static_cast<int64_t>(ti) * cin;
          Real* wg = nw.grad.data() + static_cast<int64_t>(k) * cin * cout;
          for (int ci = 0; ci < cin; ++ci) {
            Real xi = xrow[ci];
            if (xi == 0.0) continue;
            Real* wrow = wg + static_cast<int64_t>(ci) * cout;
            for (int co = 0; co < cout; ++co) wrow[co] += xi * grow[co];
          }
        }
      }
    }
    if (nb.requires_grad) {
      nb.ensure_grad();
      for (int t = 0; t < tout; ++t) {
        const Real* grow = g + static_cast<int64_t>(t) * cout;
        for (int co = 0; co < cout; ++co) nb.grad[co] += grow[co];
      }
    }
  };
  return out;
}

Var linear(const Var& x, const Var& w, const Var& b) {
  check_matrix("linear", x);
  check_matrix("linear", w);
  const int N = x->rows(), in = x->cols();
  const int win = w->rows(), out_dim = w->cols();
  L2W_CHECK(in == win, "linear: input dim " << in << " != weight rows " << win);
  L2W_CHECK(b->shape == std::vector<int>{out_dim},
            "linear: bias shape " << shape_str(b->shape) << " != {" << out_dim
                                  << "}");
  check_finite("linear", x);
  check_finite("linear", w);
  check_finite("linear", b);

  Var out = make_node({N, out_dim}, {x, w, b});
  for (int i = 0; i < N; ++i) {
    Real* orow = out->value.data() + static_cast<int64_t>(i) * out_dim;
    for (int o = 0; o < out_dim; ++o) orow[o] = b->value[o];
    const Real* xrow = x->value.data() + static_cast<int64_t>(i) * in;
    for (int k = 0; k < in; ++k) {
      Real xv = xrow[k];
      if (xv == 0.0) continue;
      const Real* wrow = w->value.data() + static_cast<int64_t>(k) * out_dim;
      for (int o = 0; o < out_dim; ++o) orow[o] += xv * wrow[o];
    }
  }
  out->backprop = [N, in, out_dim](Node& self) {
    Node& nx = *self.parents[0];
    Node& nw = *self.parents[1];
    Node& nb = *self.parents[2];
    const Real* g = self.grad.data();
    if (nx.requires_grad) {
      nx.ensure_grad();
      for (int i = 0; i < N; ++i) {
        const Real* grow = g + static_cast<int64_t>(i) * out_dim;
        Real* xg = nx.grad.data() + static_cast<int64_t>(i) * in;
        for (int k = 0; k < in; ++k) {
          const Real* wrow =
              nw.value.data() + static_cast<int64_t>(k) * out_dim;
          Real acc = 0.0;
          for (int o = 0; o < out_dim; ++o) acc += grow[o] * wrow[o];
          xg[k] += acc;
        }
      }
    }
    if (nw.requires_grad) {
      nw.ensure_grad();
      for (int i = 0; i < N; ++i) {
        const Real* grow = g + static_cast<int64_t>(i) * out_dim;
        const Real* xrow = nx.value.data() + static_cast<int64_t>(i) * in;
        for (int k = 0; k < in; ++k) {
          Real xv = xrow[k];
          if (xv == 0.0) continue;
          Real* wg = nw.grad.data() + static_cast<int64_t>(k) * out_dim;
          for (int o = 0; o < out_dim; ++o) wg[o] += xv * grow[o];
        }
      }
    }
    if (nb.requires_grad) {
      nb.ensure_grad();
      for (int i = 0; i < N; ++i) {
        const Real* grow = g + static_cast<int64_t>(i) * out_dim;
        for (int o = 0; o < out_dim; ++o) nb.grad[o] += grow[o];
      }
    }
  };
  return out;
}

Var relu(const Var& x) {
  check_finite("relu", x);
  Var out = make_node(x->shape, {x});
  for (int64_t i = 0; i < x->size(); ++i)
    out->value[i] = x->value[i] > 0 ? x->value[i] : 0.0;
  out->backprop = [](Node& self) {
    Node& nx = *self.parents[0];
    if (!nx.requires_grad) return;
    nx.ensure_grad();
    for (size_t i = 0; i < self.value.size(); ++i)
      if (nx.value[i] > 0) nx.grad[i] += self.grad[i];
  };
  return out;
}

Var glu(const Var& x) {
  check_matrix("glu", x);
  check_finite("glu", x);
  const int T = x->rows(), c2 = x->cols();
  L2W_CHECK(c2 % 2 == 0, "glu: channel count " << c2 << " must be even");
  const int C = c2 / 2;
  Var out = make_node({T, C}, {x});
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < C; ++c)
      out->at(t, c) = x->at(t, c) * sigmoid(x->at(t, C + c));
  out->backprop = [T, C](Node& self) {
    Node& nx = *self.parents[0];
    if (!nx.requires_grad) return;
    nx.ensure_grad();
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c) {
        Real a = nx.value[static_cast<int64_t>(t) * 2 * C + c];
        Real s = sigmoid(nx.value[static_cast<int64_t>(t) * 2 * C + C + c]);
        Real g = self.grad[static_cast<int64_t>(t) * C + c];
        nx.grad[static_cast<int64_t>(t) * 2 * C + c] += g * s;
        nx.grad[static_cast<int64_t>(t) * 2 * C + C + c] +=
            g * a * s * (1.0 - s);
      }
  };
  return out;
}

Var maxpool1d_masked(const Var& x, const std::vector<uint8_t>& valid) {
  check_matrix("maxpool1d_masked", x);
  check_finite("maxpool1d_masked", x);
  const int T = x->rows(), C = x->cols();
  L2W_CHECK(static_cast<int>(valid.size()) == T,
            "maxpool1d_masked: mask length " << valid.size() << " != rows "
                                             << T);
  int nvalid = 0;
  for (uint8_t v : valid) nvalid += v ? 1 : 0;
  L2W_CHECK(nvalid > 0, "maxpool1d_masked: no valid rows to pool");

  Var out = make_node({C}, {x});
  std::vector<int> argmax(C, -1);
  for (int c = 0; c < C; ++c) {
    Real best = kNegInf;
    int bi = -1;
    for (int t = 0; t < T; ++t) {
      if (!valid[t]) continue;
      Real v = x->at(t, c);
      if (v > best) {
        best = v;
        bi = t;
      }
    }
    out->value[c] = best;
    argmax[c] = bi;
  }
  out->backprop = [argmax, C](Node& self) {
    Node& nx = *self.parents[0];
    if (!nx.requires_grad) return;
    nx.ensure_grad();
    const int cols = nx.shape[1];
    for (int c = 0; c < C; ++c)
      nx.grad[static_cast<int64_t>(argmax[c]) * cols + c] += self.grad[c];
  };
  return out;
}

Var layernorm(const Var& x, const Var& gain, const Var& bias) {
  check_matrix("layernorm", x);
  check_finite("layernorm", x);
  const int N = x->rows(), C = x->cols();
  L2W_CHECK(gain->shape == std::vector<int>{C} &&
                bias->shape == std::vector<int>{C},
            "layernorm: gain/bias must be {" << C << "}");
  Var out = make_node({N, C}, {x, gain, bias});
  std::vector<Real> inv_std(N), mean(N);
  for (int i = 0; i < N; ++i) {
    Real m = 0;
    for (int c = 0; c < C; ++c) m += x->at(i, c);
    m /= C;
    Real var = 0;
    for (int c = 0; c < C; ++c) {
      Real d = x->at(i, c) - m;
      var += d * d;
    }
    var /= C;
    Real is = 1.0 / std::sqrt(var + kLayerNormEps);
    mean[i] = m;
    inv_std[i] = is;
    for (int c = 0; c < C; ++c)
      out->at(i, c) = (x->at(i, c) - m) * is * gain->value[c] + bias->value[c];
  }
  out->backprop = [N, C, mean, inv_std](Node& self) {
    Node& nx = *self.parents[0];
    Node& ng = *self.parents[1];
    Node& nb = *self.parents[2];
    for (int i = 0; i < N; ++i) {
      const Real* grow = self.grad.data() + static_cast<int64_t>(i) * C;
      const Real* xrow = nx.value.data() + static_cast<int64_t>(i) * C;
      // xhat-space gradient
      Real sum_gd = 0, sum_gdx = 0;
      for (int c = 0; c < C; ++c) {
        Real xhat = (xrow[c] - mean[i]) * inv_std[i];
        Real gd = grow[c] * ng.value[c];
        sum_gd += gd;
        sum_gdx += gd * xhat;
      }
      if (nx.requires_grad) {
        nx.ensure_grad();
        Real* xg = nx.grad.data() + static_cast<int64_t>(i) * C;
        for (int c = 0; c < C; ++c) {
          Real xhat = (xrow[c] - mean[i]) * inv_std[i];
          Real gd = grow[c] * ng.value[c];
          xg[c] += inv_std[i] * (gd - sum_gd / C - xhat * sum_gdx / C);
        }
      }
      if (ng.requires_grad) {
        ng.ensure_grad();
        for (int c = 0; c < C; ++c) {
          Real xhat = (xrow[c] - mean[i]) * inv_std[i];
          ng.grad[c] += grow[c] * xhat;
        }
      }
      if (nb.requires_grad) {
        nb.ensure_grad();
        for (int c = 0; c < C; ++c) nb.grad[c] += grow[c];
      }
    }
  };
  return out;
}

namespace {

// Shared softmax forward over one row segment [lo, hi).
void softmax_segment(const Real* in, Real* out, int lo, int hi) {
  Real m = kNegInf;
  for (int j = lo; j < hi; ++j) m = std::max(m, in[j]);
  Real z = 0;
  for (int j = lo; j < hi; ++j) z += std::exp(in[j] - m);
  for (int j = lo; j < hi; ++j) out[j] = std::exp(in[j] - m) / z;
}

}  // namespace

Var softmax_rows(const Var& x) {
  check_matrix("softmax", x);
  check_finite("softmax", x);
  const int N = x->rows(), C = x->cols();
  Var out = make_node({N, C}, {x});
  for (int i = 0; i < N; ++i)
    softmax_segment(x->value.data() + static_cast<int64_t>(i) * C,
                    out->value.data() + static_cast<int64_t>(i) * C, 0, C);
  out->backprop = [N, C](Node& self) {
    Node& nx = *self.parents[0];
    if (!nx.requires_grad) return;
    nx.ensure_grad();
    for (int i = 0; i < N; ++i) {
      const Real* p = self.value.data() + static_cast<int64_t>(i) * C;
      const Real* g = self.grad.data() + static_cast<int64_t>(i) * C;
      Real dotpg = 0;
      for (int c = 0; c < C; ++c) dotpg += p[c] * g[c];
      Real* xg = nx.grad.data() + static_cast<int64_t>(i) * C;
      for (int c = 0; c < C; ++c) xg[c] += p[c] * (g[c] - dotpg);
    }
  };
  return out;
}

Var softmax_rows_causal(const Var& x) {
  check_matrix("softmax_causal", x);
  check_finite("softmax_causal", x);
  const int N = x->rows(), C = x->cols();
  L2W_CHECK(N == C, "softmax_causal: expected square attention matrix, got "
                        << shape_str(x->shape));
  Var out = make_node({N, C}, {x});
  for (int i = 0; i < N; ++i)
    softmax_segment(x->value.data() + static_cast<int64_t>(i) * C,
                    out->value.data() + static_cast<int64_t>(i) * C, 0, i + 1);
  out->backprop = [N, C](Node& self) {
    Node& nx = *self.parents[0];
    if (!nx.requires_grad) return;
    nx.ensure_grad();
    for (int i = 0; i < N; ++i) {
      const Real* p = self.value.data() + static_cast<int64_t>(i) * C;
      const Real* g = self.grad.data() + static_cast<int64_t>(i) * C;
      Real dotpg = 0;
      for (int c = 0; c <= i; ++c) dotpg += p[c] * g[c];
      Real* xg = nx.grad.data() + static_cast<int64_t>(i) * C;
      for (int c = 0; c <= i; ++c) xg[c] += p[c] * (g[c] - dotpg);
    }
  };
  return out;
}

Var log_softmax_rows(const Var& x) {
  check_matrix("log_softmax", x);
  check_finite("log_softmax", x);
  const int N = x->rows(), C = x->cols();
  Var out = make_node({N, C}, {x});
  for (int i = 0; i < N; ++i) {
    const Real* in = x->value.data() + static_cast<int64_t>(i) * C;
    Real* o = out->value.data() + static_cast<int64_t>(i) * C;
    Real m = kNegInf;
    for (int c = 0; c < C; ++c) m = std::max(m, in[c]);
    Real z = 0;
    for (int c = 0; c < C; ++c) z += std::exp(in[c] - m);
    Real lz = m + std::log(z);
    for (int c = 0; c < C; ++c) o[c] = in[c] - lz;
  }
  out->backprop = [N, C](Node& self) {
    Node& nx = *self.parents[0];
    if (!nx.requires_grad) return;
    nx.ensure_grad();
    for (int i = 0; i < N; ++i) {
      const Real* lp = self.value.data() + static_cast<int64_t>(i) * C;
      const Real* g = self.grad.data() + static_cast<int64_t>(i) * C;
      Real gsum = 0;
      for (int c = 0; c < C; ++c) gsum += g[c];
      Real* xg = nx.grad.data() + static_cast<int64_t>(i) * C;
      for (int c = 0; c < C; ++c) xg[c] += g[c] - std::exp(lp[c]) * gsum;
    }
  };
  return out;
}

Var matmul(const Var& a, const Var& b, bool transpose_b) {
  check_matrix("matmul", a);
  check_matrix("matmul", b);
  check_finite("matmul", a);
  check_finite("matmul", b);
  const int N = a->rows(), K = a->cols();
  const int M = transpose_b ? b->rows() : b->cols();
  const int bk = transpose_b ? b->cols() : b->rows();
  L2W_CHECK(K == bk, "matmul: inner dims " << K << " vs " << bk
                                           << " (transpose_b=" << transpose_b
                                           << ")");
  Var out = make_node({N, M}, {a, b});
  if (!transpose_b) {
    for (int i = 0; i < N; ++i) {
      Real* orow = out->value.data() + static_cast<int64_t>(i) * M;
      const Real* arow = a->value.data() + static_cast<int64_t>(i) * K;
      for (int k = 0; k < K; ++k) {
        Real av = arow[k];
        if (av == 0.0) continue;
        const Real* brow = b->value.data() + static_cast<int64_t>(k) * M;
        for (int m = 0; m < M; ++m) orow[m] += av * brow[m];
      }
    }
  } else {
    for (int i = 0; i < N; ++i) {
      Real* orow = out->value.data() + static_cast<int64_t>(i) * M;
      const Real* arow = a->value.data() + static_cast<int64_t>(i) * K;
      for (int m = 0; m < M; ++m) {
        const Real* brow = b->value.data() + static_cast<int64_t>(m) * K;
        Real acc = 0;
        for (int k = 0; k < K; ++k) acc += arow[k] * brow[k];
        orow[m] = acc;
      }
    }
  }
  out->backprop = [N, K, M, transpose_b](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    const Real* g = self.grad.data();
    if (na.requires_grad) {
      na.ensure_grad();
      // dA = dOut * B^T (or dOut * B when transpose_b)
      for (int i = 0; i < N; ++i) {
        const Real* grow = g + static_cast<int64_t>(i) * M;
        Real* ag = na.grad.data() + static_cast<int64_t>(i) * K;
        if (!transpose_b) {
          for (int k = 0; k < K; ++k) {
            const Real* brow = nb.value.data() + static_cast<int64_t>(k) * M;
            Real acc = 0;
            for (int m = 0; m < M; ++m) acc += grow[m] * brow[m];
            ag[k] += acc;
          }
        } else {
          for (int m = 0; m < M; ++m) {
            Real gv = grow[m];
            if (gv == 0.0) continue;
            const Real* brow = nb.value.data() + static_cast<int64_t>(m) * K;
            for (int k = 0; k < K; ++k) ag[k] += gv * brow[k];
          }
        }
      }
    }
    if (nb.requires_grad) {
      nb.ensure_grad();
      for (int i = 0; i < N; ++i) {
        const Real* grow = g + static_cast<int64_t>(i) * M;
        const Real* arow = na.value.data() + static_cast<int64_t>(i) * K;
        if (!transpose_b) {
          // dB[k][m] += A[i][k] * g[i][m]
          for (int k = 0; k < K; ++k) {
            Real av = arow[k];
            if (av == 0.0) continue;
            Real* bg = nb.grad.data() + static_cast<int64_t>(k) * M;
            for (int m = 0; m < M; ++m) bg[m] += av * grow[m];
          }
        } else {
          // dB[m][k] += g[i][m] * A[i][k]
          for (int m = 0; m < M; ++m) {
            Real gv = grow[m];
            if (gv == 0.0) continue;
            Real* bg = nb.grad.data() + static_cast<int64_t>(m) * K;
            for (int k = 0; k < K; ++k) bg[k] += gv * arow[k];
          }
        }
      }
    }
  };
  return out;
}

Var dot(const Var& a, const Var& b) {
  L2W_CHECK(a->shape == b->shape, "dot: shape mismatch "
                                      << shape_str(a->shape) << " vs "
                                      << shape_str(b->shape));
  check_finite("dot", a);
  check_finite("dot", b);
  Var out = make_node({1}, {a, b});
  Real acc = 0;
  for (size_t i = 0; i < a->value.size(); ++i) acc += a->value[i] * b->value[i];
  out->value[0] = acc;
  out->backprop = [](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    Real g = self.grad[0];
    if (na.requires_grad) {
      na.ensure_grad();
      for (size_t i = 0; i < na.value.size(); ++i)
        na.grad[i] += g * nb.value[i];
    }
    if (nb.requires_grad) {
      nb.ensure_grad();
      for (size_t i = 0; i < nb.value.size(); ++i)
        nb.grad[i] += g * na.value[i];
    }
  };
  return out;
}

Var add(const Var& a, const Var& b) {
  L2W_CHECK(a->shape == b->shape, "add: shape mismatch "
                                      << shape_str(a->shape) << " vs "
                                      << shape_str(b->shape));
  check_finite("add", a);
  check_finite("add", b);
  Var out = make_node(a->shape, {a, b});
  for (size_t i = 0; i < a->value.size(); ++i)
    out->value[i] = a->value[i] + b->value[i];
  out->backprop = [](Node& self) {
    for (int pi = 0; pi < 2; ++pi) {
      Node& p = *self.parents[pi];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      for (size_t i = 0; i < p.value.size(); ++i) p.grad[i] += self.grad[i];
    }
  };
  return out;
}

Var scale(const Var& x, Real c) {
  check_finite("scale", x);
  L2W_CHECK(std::isfinite(c), "scale: non-finite factor");
  Var out = make_node(x->shape, {x});
  for (size_t i = 0; i < x->value.size(); ++i) out->value[i] = c * x->value[i];
  out->backprop = [c](Node& self) {
    Node& nx = *self.parents[0];
    if (!nx.requires_grad) return;
    nx.ensure_grad();
    for (size_t i = 0; i < nx.value.size(); ++i)
      nx.grad[i] += c * self.grad[i];
  };
  return out;
}

Var logsumexp(const Var& x) {
  check_finite("logsumexp", x);
  Var out = make_node({1}, {x});
  Real m = kNegInf;
  for (Real v : x->value) m = std::max(m, v);
  Real z = 0;
  for (Real v : x->value) z += std::exp(v - m);
  out->value[0] = m + std::log(z);
  out->backprop = [](Node& self) {
    Node& nx = *self.parents[0];
    if (!nx.requires_grad) return;
    nx.ensure_grad();
    Real g = self.grad[0], lse = self.value[0];
    for (size_t i = 0; i < nx.value.size(); ++i)
      nx.grad[i] += g * std::exp(nx.value[i] - lse);
  };
  return out;
}

Var embedding_lookup(const Var& table, const std::vector<int>& ids,
                     int valid_len) {
  check_matrix("embedding_lookup", table);
  check_finite("embedding_lookup", table);
  const int V = table->rows(), E = table->cols();
  const int L = static_cast<int>(ids.size());
  const int nvalid = valid_len < 0 ? L : valid_len;
  L2W_CHECK(nvalid <= L, "embedding_lookup: valid_len " << nvalid
                                                        << " > id count " << L);
  for (int i = 0; i < nvalid; ++i)
    L2W_CHECK(ids[i] >= 0 && ids[i] < V,
              "embedding_lookup: id " << ids[i] << " out of range [0," << V
                                      << ")");
  Var out = make_node({L, E}, {table});
  for (int i = 0; i < nvalid; ++i)
    std::memcpy(out->value.data() + static_cast<int64_t>(i) * E,
                table->value.data() + static_cast<int64_t>(ids[i]) * E,
                sizeof(Real) * E);
  out->backprop = [ids, nvalid, E](Node& self) {
    Node& nt = *self.parents[0];
    if (!nt.requires_grad) return;
    nt.ensure_grad();
    for (int i = 0; i < nvalid; ++i) {
      Real* tg = nt.grad.data() + static_cast<int64_t>(ids[i]) * E;
      const Real* g = self.grad.data() + static_cast<int64_t>(i) * E;
      for (int e = 0; e < E; ++e) tg[e] += g[e];
    }
  };
  return out;
}

Var stack_rows(const std::vector<Var>& rows) {
  L2W_CHECK(!rows.empty(), "stack_rows: empty input");
  const int d = static_cast<int>(rows[0]->size());
  for (const auto& r : rows) {
    L2W_CHECK(r->shape.size() == 1 && r->shape[0] == d,
              "stack_rows: all rows must be vectors of length " << d);
    check_finite("stack_rows", r);
  }
  Var out = make_node({static_cast<int>(rows.size()), d}, rows);
  for (size_t i = 0; i < rows.size(); ++i)
    std::memcpy(out->value.data() + i * d, rows[i]->value.data(),
                sizeof(Real) * d);
  out->backprop = [d](Node& self) {
    for (size_t i = 0; i < self.parents.size(); ++i) {
      Node& p = *self.parents[i];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      const Real* g = self.grad.data() + i * d;
      for (int e = 0; e < d; ++e) p.grad[e] += g[e];
    }
  };
  return out;
}

Var concat_cols(const std::vector<Var>& mats) {
  L2W_CHECK(!mats.empty(), "concat_cols: empty input");
  const int T = mats[0]->rows();
  int total = 0;
  for (const auto& m : mats) {
    check_matrix("concat_cols", m);
    check_finite("concat_cols", m);
    L2W_CHECK(m->rows() == T, "concat_cols: row mismatch " << m->rows()
                                                           << " vs " << T);
    total += m->cols();
  }
  Var out = make_node({T, total}, mats);
  int off = 0;
  for (const auto& m : mats) {
    const int c = m->cols();
    for (int t = 0; t < T; ++t)
      std::memcpy(out->value.data() + static_cast<int64_t>(t) * total + off,
                  m->value.data() + static_cast<int64_t>(t) * c,
                  sizeof(Real) * c);
    off += c;
  }
  out->backprop = [T, total](Node& self) {
    int off = 0;
    for (auto& pv : self.parents) {
      Node& p = *pv;
      const int c = p.shape[1];
      if (p.requires_grad) {
        p.ensure_grad();
        for (int t = 0; t < T; ++t) {
          const Real* g =
              self.grad.data() + static_cast<int64_t>(t) * total + off;
          Real* pg = p.grad.data() + static_cast<int64_t>(t) * c;
          for (int i = 0; i < c; ++i) pg[i] += g[i];
        }
      }
      off += c;
    }
  };
  return out;
}

Var row(const Var& x, int r) {
  check_matrix("row", x);
  L2W_CHECK(r >= 0 && r < x->rows(),
            "row: index " << r << " out of range [0," << x->rows() << ")");
  const int C = x->cols();
  Var out = make_node({C}, {x});
  std::memcpy(out->value.data(), x->value.data() + static_cast<int64_t>(r) * C,
              sizeof(Real) * C);
  out->backprop = [r, C](Node& self) {
    Node& nx = *self.parents[0];
    if (!nx.requires_grad) return;
    nx.ensure_grad();
    Real* g = nx.grad.data() + static_cast<int64_t>(r) * C;
    for (int c = 0; c < C; ++c) g[c] += self.grad[c];
  };
  return out;
}

Var project_l2ball_rows(const Var& x, Real rho) {
  L2W_CHECK(rho > 0, "project_l2ball: rho must be positive, got " << rho);
  check_finite("project_l2ball", x);
  const bool is_vec = x->shape.size() == 1;
  const int N = is_vec ? 1 : x->rows();
  const int C = is_vec ? x->shape[0] : x->cols();
  Var out = make_node(x->shape, {x});
  std::vector<Real> norms(N);
  // Tiny slack keeps project(project(v)) == project(v) bitwise.
  const Real limit = rho * (1.0 + 1e-12);
  for (int i = 0; i < N; ++i) {
    const Real* xr = x->value.data() + static_cast<int64_t>(i) * C;
    Real* orow = out->value.data() + static_cast<int64_t>(i) * C;
    Real sq = 0;
    for (int c = 0; c < C; ++c) sq += xr[c] * xr[c];
    Real nrm = std::sqrt(sq);
    norms[i] = nrm;
    if (nrm > limit) {
      Real s = rho / nrm;
      for (int c = 0; c < C; ++c) orow[c] = s * xr[c];
    } else {
      std::memcpy(orow, xr, sizeof(Real) * C);
    }
  }
  out->backprop = [N, C, rho, norms, limit](Node& self) {
    Node& nx = *self.parents[0];
    if (!nx.requires_grad) return;
    nx.ensure_grad();
    for (int i = 0; i < N; ++i) {
      const Real* g = self.grad.data() + static_cast<int64_t>(i) * C;
      Real* xg = nx.grad.data() + static_cast<int64_t>(i) * C;
      if (norms[i] > limit) {
        const Real* xr = nx.value.data() + static_cast<int64_t>(i) * C;
        Real s = rho / norms[i];
        Real vdotg = 0;
        for (int c = 0; c < C; ++c) vdotg += xr[c] * g[c];
        Real k = vdotg / (norms[i] * norms[i]);
        for (int c = 0; c < C; ++c) xg[c] += s * (g[c] - xr[c] * k);
      } else {
        for (int c = 0; c < C; ++c) xg[c] += g[c];
      }
    }
  };
  return out;
}

void backward(const Var& loss) {
  L2W_CHECK(loss != nullptr, "backward: null loss");
  L2W_CHECK(loss->size() == 1,
            "backward: loss must be scalar, got shape "
                << shape_str(loss->shape));
  L2W_CHECK(std::isfinite(loss->value[0]),
            "backward: loss is non-finite (" << loss->value[0] << ")");
  if (!loss->requires_grad) return;  // no parameters anywhere upstream

  // Reverse topological order via iterative DFS over grad-requiring nodes.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  struct Frame {
    Node* n;
    size_t next_child;
  };
  std::vector<Frame> stack;
  if (loss->requires_grad) {
    stack.push_back({loss.get(), 0});
    seen.insert(loss.get());
  }
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_child < f.n->parents.size()) {
      Node* c = f.n->parents[f.next_child++].get();
      if (c->requires_grad && !seen.count(c)) {
        seen.insert(c);
        stack.push_back({c, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }
  for (Node* n : order) n->ensure_grad();
  loss->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop(**it);
}

void sgd_step(const std::vector<Var>& params, Real lr) {
  L2W_CHECK(lr > 0, "sgd_step: lr must be positive, got " << lr);
  for (const auto& p : params) {
    if (p->grad.empty()) continue;
    for (size_t i = 0; i < p->value.size(); ++i)
      p->value[i] -= lr * p->grad[i];
  }
}

Var ParamStore::create(const std::string& name, std::vector<int> shape,
                       Real init_scale, Rng& rng) {
  L2W_CHECK(!has(name), "ParamStore: duplicate parameter name " << name);
  int64_t n = 1;
  for (int d : shape) n *= d;
  std::vector<Real> vals(n);
  for (auto& v : vals) v = rng.uniform(-init_scale, init_scale);
  Var p = leaf(name, std::move(shape), std::move(vals));
  order_.push_back(p);
  return p;
}

Var ParamStore::create_const(const std::string& name, std::vector<int> shape,
                             Real fill) {
  L2W_CHECK(!has(name), "ParamStore: duplicate parameter name " << name);
  int64_t n = 1;
  for (int d : shape) n *= d;
  Var p = leaf(name, std::move(shape), std::vector<Real>(n, fill));
  order_.push_back(p);
  return p;
}

const Var& ParamStore::get(const std::string& name) const {
  for (const auto& p : order_)
    if (p->name == name) return p;
  L2W_RAISE("ParamStore: no parameter named " << name);
}

bool ParamStore::has(const std::string& name) const {
  for (const auto& p : order_)
    if (p->name == name) return true;
  return false;
}

void ParamStore::zero_grads() {
  for (auto& p : order_) p->grad.assign(p->value.size(), 0.0);
}

void ParamStore::sgd_step(Real lr) { l2w::sgd_step(order_, lr); }

int64_t ParamStore::total_size() const {
  int64_t n = 0;
  for (const auto& p : order_) n += p->size();
  return n;
}

double finite_difference_check(const std::function<Var()>& fn,
                               const std::vector<Var>& params, double epsilon,
                               int max_coords, uint64_t seed) {
  L2W_CHECK(epsilon > 0, "finite_difference_check: epsilon must be positive");
  Var l1 = fn();
  L2W_CHECK(l1->size() == 1, "finite_difference_check: fn must be scalar");
  Var l2 = fn();
  L2W_CHECK(l1->value[0] == l2->value[0],
            "finite_difference_check: fn is non-deterministic ("
                << l1->value[0] << " vs " << l2->value[0] << ")");

  for (const auto& p : params) p->grad.assign(p->value.size(), 0.0);
  backward(l1);

  Rng rng(seed);
  double max_rel = 0.0;
  for (const auto& p : params) {
    const int64_t n = p->size();
    std::vector<int64_t> coords;
    if (n <= max_coords) {
      coords.resize(n);
      for (int64_t i = 0; i < n; ++i) coords[i] = i;
    } else {
      for (int i = 0; i < max_coords; ++i)
        coords.push_back(rng.uniform_int(static_cast<int>(n)));
    }
    for (int64_t ci : coords) {
      Real saved = p->value[ci];
      p->value[ci] = saved + epsilon;
      Real fp = fn()->value[0];
      p->value[ci] = saved - epsilon;
      Real fm = fn()->value[0];
      p->value[ci] = saved;
      Real cd = (fp - fm) / (2 * epsilon);
      Real an = p->grad[ci];
      Real rel = std::abs(an - cd) /
                 std::max({std::abs(an), std::abs(cd), 1e-12});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace l2w
