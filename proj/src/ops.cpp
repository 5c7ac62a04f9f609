#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "ardhoi/kernels.hpp"
#include "ardhoi/tensor.hpp"

namespace ardhoi {

namespace {

float* parent_grad(Node& self, std::size_t i) {
  auto& p = self.parents[i];
  return p->requires_grad ? p->grad_buffer() : nullptr;
}

const std::vector<float>& parent_data(const Node& self, std::size_t i) { return self.parents[i]->data; }

int norm_axis(int axis, int rank, const Shape& shape) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  return axis;
}

// ---- broadcasting -----------------------------------------------------------

enum class BKind { Same, RightScalar, LeftScalar, RightSuffix, LeftSuffix, General };

struct Broadcast {
  Shape out;
  BKind kind = BKind::Same;
  std::size_t na = 0, nb = 0;
  std::vector<std::uint32_t> ia, ib;
};

Shape strip_leading_ones(const Shape& s) {
  std::size_t i = 0;
  while (i < s.size() && s[i] == 1) ++i;
  return Shape(s.begin() + static_cast<long>(i), s.end());
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

Broadcast plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast bc;
  bc.na = numel(a);
  bc.nb = numel(b);
  if (a == b) {
    bc.out = a;
    bc.kind = BKind::Same;
    return bc;
  }
  if (bc.nb == 1) {
    bc.out = a.size() >= b.size() ? a : b;
    if (a.size() >= b.size()) {
      bc.kind = BKind::RightScalar;
      return bc;
    }
  }
  if (bc.na == 1 && b.size() >= a.size()) {
    bc.out = b;
    bc.kind = BKind::LeftScalar;
    return bc;
  }
  const Shape sa = strip_leading_ones(a), sb = strip_leading_ones(b);
  if (a.size() >= b.size() && is_suffix(sb, a) && !sb.empty()) {
    bc.out = a;
    bc.kind = BKind::RightSuffix;
    return bc;
  }
  if (b.size() >= a.size() && is_suffix(sa, b) && !sa.empty()) {
    bc.out = b;
    bc.kind = BKind::LeftSuffix;
    return bc;
  }
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  std::vector<std::size_t> sta(r, 0), stb(r, 0);
  std::size_t acc_a = 1, acc_b = 1;
  for (std::size_t k = 0; k < r; ++k) {
    const std::size_t i = r - 1 - k;
    const int da = k < a.size() ? a[a.size() - 1 - k] : 1;
    const int db = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (da != db && da != 1 && db != 1)
      throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    out[i] = std::max(da, db);
    sta[i] = da == 1 ? 0 : acc_a;
    stb[i] = db == 1 ? 0 : acc_b;
    acc_a *= static_cast<std::size_t>(da);
    acc_b *= static_cast<std::size_t>(db);
  }
  bc.out = out;
  bc.kind = BKind::General;
  const std::size_t n = numel(out);
  bc.ia.resize(n);
  bc.ib.resize(n);
  std::vector<int> idx(r, 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t oa = 0, ob = 0;
    for (std::size_t d = 0; d < r; ++d) {
      oa += sta[d] * static_cast<std::size_t>(idx[d]);
      ob += stb[d] * static_cast<std::size_t>(idx[d]);
    }
    bc.ia[flat] = static_cast<std::uint32_t>(oa);
    bc.ib[flat] = static_cast<std::uint32_t>(ob);
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < out[d]) break;
      idx[d] = 0;
    }
  }
  return bc;
}

struct BIndex {
  const Broadcast* bc;
  std::size_t a(std::size_t i) const {
    switch (bc->kind) {
      case BKind::Same:
      case BKind::RightScalar:
      case BKind::RightSuffix:
        return i;
      case BKind::LeftScalar:
        return 0;
      case BKind::LeftSuffix:
        return i % bc->na;
      case BKind::General:
        return bc->ia[i];
    }
    return 0;
  }
  std::size_t b(std::size_t i) const {
    switch (bc->kind) {
      case BKind::Same:
      case BKind::LeftScalar:
      case BKind::LeftSuffix:
        return i;
      case BKind::RightScalar:
        return 0;
      case BKind::RightSuffix:
        return i % bc->nb;
      case BKind::General:
        return bc->ib[i];
    }
    return 0;
  }
};

// f(x, y) -> value; dfa(x, y, out) and dfb(x, y, out) -> partials.
template <typename F, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, F f, DA dfa, DB dfb) {
  auto bc = std::make_shared<Broadcast>(plan_broadcast(a.shape(), b.shape(), name));
  const std::size_t n = numel(bc->out);
  std::vector<float> out(n);
  const auto& ad = a.data();
  const auto& bd = b.data();
  BIndex ix{bc.get()};
  if (bc->kind == BKind::Same) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(ad[i], bd[i]);
  } else if (bc->kind == BKind::RightScalar) {
    const float y = bd[0];
    for (std::size_t i = 0; i < n; ++i) out[i] = f(ad[i], y);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(ad[ix.a(i)], bd[ix.b(i)]);
  }
  Shape shape = bc->out;
  return Tensor::make(std::move(shape), std::move(out), {a, b}, name, [bc, dfa, dfb](Node& self) {
    BIndex ix{bc.get()};
    const auto& ad = parent_data(self, 0);
    const auto& bd = parent_data(self, 1);
    float* ga = parent_grad(self, 0);
    float* gb = parent_grad(self, 1);
    const std::size_t n = self.data.size();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t i_a = ix.a(i), i_b = ix.b(i);
      const float g = self.grad[i];
      if (ga) ga[i_a] += g * dfa(ad[i_a], bd[i_b], self.data[i]);
      if (gb) gb[i_b] += g * dfb(ad[i_a], bd[i_b], self.data[i]);
    }
  });
}

// f(x) -> value; df(x, y) -> derivative.
template <typename F, typename DF>
Tensor unary(const Tensor& x, const char* name, F f, DF df) {
  const auto& xd = x.data();
  std::vector<float> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = f(xd[i]);
  return Tensor::make(x.shape(), std::move(out), {x}, name, [df](Node& self) {
    const auto& xd = parent_data(self, 0);
    float* gx = parent_grad(self, 0);
    for (std::size_t i = 0; i < xd.size(); ++i) gx[i] += self.grad[i] * df(xd[i], self.data[i]);
  });
}

float stable_sigmoid(float x) {
  if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
  const float e = std::exp(x);
  return e / (1.0f + e);
}

struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, int axis) {
  AxisSplit sp;
  for (int i = 0; i < axis; ++i) sp.outer *= static_cast<std::size_t>(s[static_cast<std::size_t>(i)]);
  sp.n = static_cast<std::size_t>(s[static_cast<std::size_t>(axis)]);
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) sp.inner *= static_cast<std::size_t>(s[i]);
  return sp;
}

}  // namespace

// ---- linear algebra -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 1 || b.rank() != 2 || a.shape().back() != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const int k = b.dim(0), n = b.dim(1);
  const int m = static_cast<int>(a.size() / static_cast<std::size_t>(std::max(k, 1)));
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(n);
  std::vector<float> out(static_cast<std::size_t>(m) * n);
  kernels::gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data(), false);
  return Tensor::make(std::move(out_shape), std::move(out), {a, b}, "matmul", [m, n, k](Node& self) {
    const float* g = self.grad.data();
    if (float* ga = parent_grad(self, 0)) kernels::gemm_nt(m, k, n, g, parent_data(self, 1).data(), ga, true);
    if (float* gb = parent_grad(self, 1)) kernels::gemm_tn(k, n, m, parent_data(self, 0).data(), g, gb, true);
  });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1))
    throw ShapeError("bmm: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const int batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  const std::size_t sa = static_cast<std::size_t>(m) * k, sb = static_cast<std::size_t>(k) * n,
                    sc = static_cast<std::size_t>(m) * n;
  std::vector<float> out(static_cast<std::size_t>(batch) * sc, 0.0f);
  const float* ad = a.data().data();
  const float* bd = b.data().data();
  const bool small = static_cast<long>(m) * n * k < 4096;
  for (int i = 0; i < batch; ++i) {
    const float* ai = ad + i * sa;
    const float* bi = bd + i * sb;
    float* ci = out.data() + i * sc;
    if (small) {
      for (int r = 0; r < m; ++r)
        for (int p = 0; p < k; ++p) {
          const float v = ai[r * k + p];
          for (int c = 0; c < n; ++c) ci[r * n + c] += v * bi[p * n + c];
        }
    } else {
      kernels::gemm_nn(m, n, k, ai, bi, ci, false);
    }
  }
  return Tensor::make({batch, m, n}, std::move(out), {a, b}, "bmm", [=](Node& self) {
    const float* ad = parent_data(self, 0).data();
    const float* bd = parent_data(self, 1).data();
    float* ga = parent_grad(self, 0);
    float* gb = parent_grad(self, 1);
    for (int i = 0; i < batch; ++i) {
      const float* gi = self.grad.data() + i * sc;
      const float* ai = ad + i * sa;
      const float* bi = bd + i * sb;
      if (small) {
        for (int r = 0; r < m; ++r)
          for (int c = 0; c < n; ++c) {
            const float g = gi[r * n + c];
            if (g == 0.0f) continue;
            for (int p = 0; p < k; ++p) {
              if (ga) ga[i * sa + r * k + p] += g * bi[p * n + c];
              if (gb) gb[i * sb + p * n + c] += g * ai[r * k + p];
            }
          }
      } else {
        if (ga) kernels::gemm_nt(m, k, n, gi, bi, ga + i * sa, true);
        if (gb) kernels::gemm_tn(k, n, m, ai, gi, gb + i * sb, true);
      }
    }
  });
}

// ---- elementwise --------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](float x, float y) { return x + y; }, [](float, float, float) { return 1.0f; },
      [](float, float, float) { return 1.0f; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](float x, float y) { return x - y; }, [](float, float, float) { return 1.0f; },
      [](float, float, float) { return -1.0f; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](float x, float y) { return x * y; }, [](float, float y, float) { return y; },
      [](float x, float, float) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "div", [](float x, float y) { return x / y; }, [](float, float y, float) { return 1.0f / y; },
      [](float, float y, float out) { return -out / y; });
}

Tensor scale(const Tensor& x, float s) {
  return unary(x, "scale", [s](float v) { return v * s; }, [s](float, float) { return s; });
}

Tensor add_scalar(const Tensor& x, float s) {
  return unary(x, "add_scalar", [s](float v) { return v + s; }, [](float, float) { return 1.0f; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0f); }

Tensor exp(const Tensor& x) {
  return unary(x, "exp", [](float v) { return std::exp(v); }, [](float, float y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(x, "log", [](float v) { return std::log(v); }, [](float v, float) { return 1.0f / v; });
}

Tensor sqrt(const Tensor& x) {
  return unary(x, "sqrt", [](float v) { return std::sqrt(v); }, [](float, float y) { return 0.5f / y; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, "abs", [](float v) { return std::fabs(v); },
      [](float v, float) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); });
}

Tensor square(const Tensor& x) {
  return unary(x, "square", [](float v) { return v * v; }, [](float v, float) { return 2.0f * v; });
}

Tensor softplus(const Tensor& x) {
  return unary(
      x, "softplus", [](float v) { return v > 20.0f ? v : std::log1p(std::exp(v)); },
      [](float v, float) { return stable_sigmoid(v); });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, "sigmoid", stable_sigmoid, [](float, float y) { return y * (1.0f - y); });
}

Tensor silu(const Tensor& x) {
  return unary(
      x, "silu", [](float v) { return v * stable_sigmoid(v); },
      [](float v, float) {
        const float s = stable_sigmoid(v);
        return s + v * s * (1.0f - s);
      });
}

Tensor tanh(const Tensor& x) {
  return unary(x, "tanh", [](float v) { return std::tanh(v); }, [](float, float y) { return 1.0f - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](float v) { return v > 0.0f ? v : 0.0f; }, [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

// ---- normalisation ------------------------------------------------------------

Tensor layernorm(const Tensor& x, float eps) {
  if (x.rank() < 1) throw ShapeError("layernorm on a scalar");
  const int cols = x.shape().back();
  const int rows = static_cast<int>(x.size() / static_cast<std::size_t>(cols));
  std::vector<float> out(x.size());
  auto rstd = std::make_shared<std::vector<float>>(static_cast<std::size_t>(rows));
  kernels::layernorm_rows(rows, cols, x.data().data(), eps, out.data(), rstd->data());
  return Tensor::make(x.shape(), std::move(out), {x}, "layernorm", [rows, cols, rstd](Node& self) {
    float* gx = parent_grad(self, 0);
    for (int r = 0; r < rows; ++r) {
      const float* g = self.grad.data() + static_cast<std::size_t>(r) * cols;
      const float* y = self.data.data() + static_cast<std::size_t>(r) * cols;
      double mg = 0.0, mgy = 0.0;
      for (int c = 0; c < cols; ++c) {
        mg += g[c];
        mgy += static_cast<double>(g[c]) * y[c];
      }
      mg /= cols;
      mgy /= cols;
      const float inv = (*rstd)[static_cast<std::size_t>(r)];
      float* gr = gx + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c)
        gr[c] += inv * static_cast<float>(g[c] - mg - y[c] * mgy);
    }
  });
}

Tensor softmax(const Tensor& x) {
  if (x.rank() < 1) throw ShapeError("softmax on a scalar");
  const int cols = x.shape().back();
  const int rows = static_cast<int>(x.size() / static_cast<std::size_t>(cols));
  std::vector<float> out(x.size());
  const auto& xd = x.data();
  for (int r = 0; r < rows; ++r) {
    const float* xr = xd.data() + static_cast<std::size_t>(r) * cols;
    float* yr = out.data() + static_cast<std::size_t>(r) * cols;
    const float mx = *std::max_element(xr, xr + cols);
    double s = 0.0;
    for (int c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      s += yr[c];
    }
    for (int c = 0; c < cols; ++c) yr[c] = static_cast<float>(yr[c] / s);
  }
  return Tensor::make(x.shape(), std::move(out), {x}, "softmax", [rows, cols](Node& self) {
    float* gx = parent_grad(self, 0);
    for (int r = 0; r < rows; ++r) {
      const float* g = self.grad.data() + static_cast<std::size_t>(r) * cols;
      const float* y = self.data.data() + static_cast<std::size_t>(r) * cols;
      double dot = 0.0;
      for (int c = 0; c < cols; ++c) dot += static_cast<double>(g[c]) * y[c];
      for (int c = 0; c < cols; ++c) gx[static_cast<std::size_t>(r) * cols + c] += y[c] * (g[c] - static_cast<float>(dot));
    }
  });
}

// ---- reductions -------------------------------------------------------------

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (float v : x.data()) s += v;
  return Tensor::make({}, {static_cast<float>(s)}, {x}, "sum", [](Node& self) {
    float* gx = parent_grad(self, 0);
    const float g = self.grad[0];
    for (std::size_t i = 0; i < self.parents[0]->data.size(); ++i) gx[i] += g;
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(x), 1.0f / static_cast<float>(x.size()));
}

Tensor sum_axis(const Tensor& x, int axis) {
  axis = norm_axis(axis, x.rank(), x.shape());
  const AxisSplit sp = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + axis);
  std::vector<float> out(sp.outer * sp.inner, 0.0f);
  const auto& xd = x.data();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t j = 0; j < sp.n; ++j) {
      const float* src = xd.data() + (o * sp.n + j) * sp.inner;
      float* dst = out.data() + o * sp.inner;
      for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
    }
  return Tensor::make(std::move(out_shape), std::move(out), {x}, "sum_axis", [sp](Node& self) {
    float* gx = parent_grad(self, 0);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t j = 0; j < sp.n; ++j) {
        float* dst = gx + (o * sp.n + j) * sp.inner;
        const float* g = self.grad.data() + o * sp.inner;
        for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += g[i];
      }
  });
}

Tensor mean_axis(const Tensor& x, int axis) {
  const int n = x.dim(axis);
  return scale(sum_axis(x, axis), 1.0f / static_cast<float>(n));
}

Tensor l2norm(const Tensor& x, float eps) {
  if (x.rank() < 1) throw ShapeError("l2norm on a scalar");
  const int cols = x.shape().back();
  const std::size_t rows = x.size() / static_cast<std::size_t>(std::max(cols, 1));
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  std::vector<float> out(rows);
  const auto& xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = eps;
    for (int c = 0; c < cols; ++c) s += static_cast<double>(xd[r * cols + c]) * xd[r * cols + c];
    out[r] = static_cast<float>(std::sqrt(s));
  }
  return Tensor::make(std::move(out_shape), std::move(out), {x}, "l2norm", [rows, cols](Node& self) {
    float* gx = parent_grad(self, 0);
    const auto& xd = parent_data(self, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const float k = self.grad[r] / self.data[r];
      for (int c = 0; c < cols; ++c) gx[r * cols + c] += k * xd[r * cols + c];
    }
  });
}

Tensor max_rows(const Tensor& x) {
  if ((x.rank() != 2 && x.rank() != 3) || x.dim(-2) == 0)
    throw ShapeError("max_rows expects a non-empty [P,C] or [B,P,C] tensor, got " + shape_str(x.shape()));
  const int batch = x.rank() == 3 ? x.dim(0) : 1;
  const int rows = x.dim(-2), cols = x.dim(-1);
  const std::size_t nout = static_cast<std::size_t>(batch) * cols;
  std::vector<float> out(nout, -std::numeric_limits<float>::infinity());
  auto arg = std::make_shared<std::vector<std::size_t>>(nout, 0);
  const auto& xd = x.data();
  for (int b = 0; b < batch; ++b)
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const std::size_t src = (static_cast<std::size_t>(b) * rows + r) * cols + c;
        const std::size_t dst = static_cast<std::size_t>(b) * cols + c;
        if (xd[src] > out[dst]) {
          out[dst] = xd[src];
          (*arg)[dst] = src;
        }
      }
  Shape shape = x.rank() == 3 ? Shape{batch, cols} : Shape{cols};
  return Tensor::make(std::move(shape), std::move(out), {x}, "max_rows", [arg, nout](Node& self) {
    float* gx = parent_grad(self, 0);
    for (std::size_t i = 0; i < nout; ++i) gx[(*arg)[i]] += self.grad[i];
  });
}

// ---- shape ------------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& ref = parts[0].shape();
  axis = norm_axis(axis, static_cast<int>(ref.size()), ref);
  Shape out_shape = ref;
  out_shape[static_cast<std::size_t>(axis)] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d)
      if (static_cast<int>(d) != axis && s[d] != ref[d]) ok = false;
    if (!ok) throw ShapeError("concat: shape " + shape_str(s) + " incompatible with " + shape_str(ref) + " on axis " + std::to_string(axis));
    out_shape[static_cast<std::size_t>(axis)] += s[static_cast<std::size_t>(axis)];
  }
  const AxisSplit sp = split_at(out_shape, axis);
  std::vector<float> out(numel(out_shape));
  auto widths = std::make_shared<std::vector<std::size_t>>();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = static_cast<std::size_t>(p.shape()[static_cast<std::size_t>(axis)]) * sp.inner;
    widths->push_back(w);
    const auto& pd = p.data();
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::memcpy(out.data() + o * sp.n * sp.inner + offset, pd.data() + o * w, w * sizeof(float));
    offset += w;
  }
  return Tensor::make(std::move(out_shape), std::move(out), parts, "concat", [sp, widths](Node& self) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      const std::size_t w = (*widths)[i];
      if (float* gp = parent_grad(self, i)) {
        for (std::size_t o = 0; o < sp.outer; ++o) {
          const float* src = self.grad.data() + o * sp.n * sp.inner + offset;
          float* dst = gp + o * w;
          for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
        }
      }
      offset += w;
    }
  });
}

Tensor slice(const Tensor& x, int axis, int begin, int end) {
  axis = norm_axis(axis, x.rank(), x.shape());
  const int n = x.dim(axis);
  if (begin < 0 || end > n || begin > end)
    throw ShapeError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range for " + shape_str(x.shape()));
  const AxisSplit sp = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(axis)] = end - begin;
  const std::size_t w = static_cast<std::size_t>(end - begin) * sp.inner;
  const std::size_t off = static_cast<std::size_t>(begin) * sp.inner;
  std::vector<float> out(sp.outer * w);
  const auto& xd = x.data();
  for (std::size_t o = 0; o < sp.outer; ++o)
    std::memcpy(out.data() + o * w, xd.data() + o * sp.n * sp.inner + off, w * sizeof(float));
  return Tensor::make(std::move(out_shape), std::move(out), {x}, "slice", [sp, w, off](Node& self) {
    float* gx = parent_grad(self, 0);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      float* dst = gx + o * sp.n * sp.inner + off;
      const float* src = self.grad.data() + o * w;
      for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size())
    throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) + " changes element count");
  return Tensor::make(std::move(shape), x.to_vector(), {x}, "reshape", [](Node& self) {
    float* gx = parent_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
  });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("transpose needs rank >= 2, got " + shape_str(x.shape()));
  const int m = x.dim(-2), n = x.dim(-1);
  const std::size_t batch = x.size() / (static_cast<std::size_t>(m) * n);
  Shape out_shape = x.shape();
  std::swap(out_shape[out_shape.size() - 1], out_shape[out_shape.size() - 2]);
  std::vector<float> out(x.size());
  const auto& xd = x.data();
  const std::size_t mn = static_cast<std::size_t>(m) * n;
  for (std::size_t b = 0; b < batch; ++b)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out[b * mn + static_cast<std::size_t>(j) * m + i] = xd[b * mn + static_cast<std::size_t>(i) * n + j];
  return Tensor::make(std::move(out_shape), std::move(out), {x}, "transpose", [batch, m, n, mn](Node& self) {
    float* gx = parent_grad(self, 0);
    for (std::size_t b = 0; b < batch; ++b)
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          gx[b * mn + static_cast<std::size_t>(i) * n + j] += self.grad[b * mn + static_cast<std::size_t>(j) * m + i];
  });
}

Tensor gather_rows(const Tensor& x, std::span<const int> rows) {
  if (x.rank() < 1) throw ShapeError("gather_rows on a scalar");
  const int dim0 = x.dim(0);
  const std::size_t inner = x.size() / static_cast<std::size_t>(std::max(dim0, 1));
  auto idx = std::make_shared<std::vector<int>>(rows.begin(), rows.end());
  for (int r : *idx)
    if (r < 0 || r >= dim0) throw ShapeError("gather_rows index " + std::to_string(r) + " out of range for " + shape_str(x.shape()));
  Shape out_shape = x.shape();
  out_shape[0] = static_cast<int>(idx->size());
  std::vector<float> out(idx->size() * inner);
  const auto& xd = x.data();
  for (std::size_t i = 0; i < idx->size(); ++i)
    std::memcpy(out.data() + i * inner, xd.data() + static_cast<std::size_t>((*idx)[i]) * inner, inner * sizeof(float));
  return Tensor::make(std::move(out_shape), std::move(out), {x}, "gather_rows", [idx, inner](Node& self) {
    float* gx = parent_grad(self, 0);
    for (std::size_t i = 0; i < idx->size(); ++i) {
      float* dst = gx + static_cast<std::size_t>((*idx)[i]) * inner;
      const float* src = self.grad.data() + i * inner;
      for (std::size_t j = 0; j < inner; ++j) dst[j] += src[j];
    }
  });
}

// ---- scans ------------------------------------------------------------------

Tensor linear_scan(const Tensor& a, const Tensor& b, std::span<const int> resets, ScanMode mode) {
  if (a.rank() != 2 || a.shape() != b.shape())
    throw ShapeError("linear_scan expects equal rank-2 shapes, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const int len = a.dim(0), ch = a.dim(1);
  auto cuts = std::make_shared<std::vector<int>>(resets.begin(), resets.end());
  std::vector<float> h(a.size());
  const bool seq = mode == ScanMode::sequential;
  (seq ? kernels::reference::linear_scan : kernels::linear_scan)(len, ch, a.data().data(), b.data().data(), h.data(), *cuts);
  return Tensor::make(a.shape(), std::move(h), {a, b}, "linear_scan", [len, ch, cuts, seq](Node& self) {
    std::vector<float> lambda(self.data.size());
    const auto& ad = parent_data(self, 0);
    (seq ? kernels::reference::linear_scan_adjoint : kernels::linear_scan_adjoint)(len, ch, ad.data(), self.grad.data(),
                                                                                   lambda.data(), *cuts);
    if (float* gb = parent_grad(self, 1))
      for (std::size_t i = 0; i < lambda.size(); ++i) gb[i] += lambda[i];
    if (float* ga = parent_grad(self, 0)) {
      std::vector<char> start(static_cast<std::size_t>(len), 0);
      if (len > 0) start[0] = 1;
      for (int r : *cuts)
        if (r >= 0 && r < len) start[static_cast<std::size_t>(r)] = 1;
      for (int t = 1; t < len; ++t) {
        if (start[static_cast<std::size_t>(t)]) continue;
        const std::size_t row = static_cast<std::size_t>(t) * ch, prev = row - ch;
        for (int c = 0; c < ch; ++c) ga[row + c] += lambda[row + c] * self.data[prev + c];
      }
    }
  });
}

Tensor cumsum(const Tensor& x) {
  if (x.rank() < 1) throw ShapeError("cumsum on a scalar");
  const int len = x.dim(0);
  const std::size_t inner = x.size() / static_cast<std::size_t>(std::max(len, 1));
  std::vector<float> out(x.size());
  const auto& xd = x.data();
  for (std::size_t i = 0; i < inner && len > 0; ++i) out[i] = xd[i];
  for (int t = 1; t < len; ++t)
    for (std::size_t i = 0; i < inner; ++i) out[t * inner + i] = out[(t - 1) * inner + i] + xd[t * inner + i];
  return Tensor::make(x.shape(), std::move(out), {x}, "cumsum", [len, inner](Node& self) {
    float* gx = parent_grad(self, 0);
    std::vector<float> carry(inner, 0.0f);
    for (int t = len - 1; t >= 0; --t)
      for (std::size_t i = 0; i < inner; ++i) {
        carry[i] += self.grad[t * inner + i];
        gx[t * inner + i] += carry[i];
      }
  });
}

}  // namespace ardhoi
