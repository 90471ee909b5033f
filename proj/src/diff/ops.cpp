#include "dancenet/diff/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "dancenet/error.hpp"
#include "dancenet/rng.hpp"

namespace dancenet::diff {

namespace testing {
namespace {
std::atomic<bool> g_corrupt_matmul{false};
}
void set_corrupt_matmul_backward(bool enabled) { g_corrupt_matmul.store(enabled); }
bool corrupt_matmul_backward() { return g_corrupt_matmul.load(); }
}  // namespace testing

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    fail(ErrorCode::kShape, std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
  }
}

Tensor like(const Tensor& a) { return Tensor::matrix(a.rows(), a.cols()); }

// Elementwise unary op: forward value f(x), derivative df(x, y).
template <typename F, typename DF>
Var unary(Tape& t, Var a, F f, DF df) {
  const Tensor& x = t.value(a);
  Tensor y = like(x);
  for (std::size_t k = 0; k < x.size(); ++k) y[k] = f(x[k]);
  return t.record(std::move(y), {a}, [a, df](Tape& tp, std::size_t self) {
    const Tensor& gy = tp.grad(self);
    const Tensor& xv = tp.value(a);
    const Tensor& yv = tp.value(Var{self});
    Tensor& gx = tp.grad(a);
    for (std::size_t k = 0; k < gy.size(); ++k) gx[k] += gy[k] * df(xv[k], yv[k]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  const std::size_t r = A.rows(), k = A.cols(), c = B.cols();
  if (B.rows() != k) {
    fail(ErrorCode::kShape, "matmul: inner dimensions " + std::to_string(k) + " and " +
                                std::to_string(B.rows()) + " differ");
  }
  Tensor C = Tensor::matrix(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double* crow = C.data() + i * c;
    const double* arow = A.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = B.data() + p * c;
      for (std::size_t j = 0; j < c; ++j) crow[j] += av * brow[j];
    }
  }
  return t.record(std::move(C), {a, b}, [a, b, r, k, c](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    const Tensor& Av = tp.value(a);
    const Tensor& Bv = tp.value(b);
    if (tp.needs_grad(a)) {
      Tensor& GA = tp.grad(a);
      for (std::size_t i = 0; i < r; ++i) {
        const double* grow = G.data() + i * c;
        double* garow = GA.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = Bv.data() + p * c;
          double acc = 0.0;
          for (std::size_t j = 0; j < c; ++j) acc += grow[j] * brow[j];
          garow[p] += acc;
        }
      }
    }
    if (tp.needs_grad(b)) {
      Tensor& GB = tp.grad(b);
      const double factor = testing::corrupt_matmul_backward() ? 1.01 : 1.0;
      for (std::size_t i = 0; i < r; ++i) {
        const double* grow = G.data() + i * c;
        const double* arow = Av.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = arow[p] * factor;
          if (av == 0.0) continue;
          double* gbrow = GB.data() + p * c;
          for (std::size_t j = 0; j < c; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
}

Var add(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  require_same_shape(A, B, "add");
  Tensor C = like(A);
  for (std::size_t k = 0; k < A.size(); ++k) C[k] = A[k] + B[k];
  return t.record(std::move(C), {a, b}, [a, b](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    for (Var in : {a, b}) {
      if (!tp.needs_grad(in)) continue;
      Tensor& g = tp.grad(in);
      for (std::size_t k = 0; k < G.size(); ++k) g[k] += G[k];
    }
  });
}

Var sub(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  require_same_shape(A, B, "sub");
  Tensor C = like(A);
  for (std::size_t k = 0; k < A.size(); ++k) C[k] = A[k] - B[k];
  return t.record(std::move(C), {a, b}, [a, b](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    if (tp.needs_grad(a)) {
      Tensor& g = tp.grad(a);
      for (std::size_t k = 0; k < G.size(); ++k) g[k] += G[k];
    }
    if (tp.needs_grad(b)) {
      Tensor& g = tp.grad(b);
      for (std::size_t k = 0; k < G.size(); ++k) g[k] -= G[k];
    }
  });
}

Var mul(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  require_same_shape(A, B, "mul");
  Tensor C = like(A);
  for (std::size_t k = 0; k < A.size(); ++k) C[k] = A[k] * B[k];
  return t.record(std::move(C), {a, b}, [a, b](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    const Tensor& Av = tp.value(a);
    const Tensor& Bv = tp.value(b);
    if (tp.needs_grad(a)) {
      Tensor& g = tp.grad(a);
      for (std::size_t k = 0; k < G.size(); ++k) g[k] += G[k] * Bv[k];
    }
    if (tp.needs_grad(b)) {
      Tensor& g = tp.grad(b);
      for (std::size_t k = 0; k < G.size(); ++k) g[k] += G[k] * Av[k];
    }
  });
}

Var add_row(Tape& t, Var a, Var row) {
  const Tensor& A = t.value(a);
  const Tensor& R = t.value(row);
  const std::size_t r = A.rows(), c = A.cols();
  if (R.size() != c) fail(ErrorCode::kShape, "add_row: row width does not match columns");
  Tensor C = like(A);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) C[i * c + j] = A[i * c + j] + R[j];
  }
  return t.record(std::move(C), {a, row}, [a, row, r, c](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    if (tp.needs_grad(a)) {
      Tensor& g = tp.grad(a);
      for (std::size_t k = 0; k < G.size(); ++k) g[k] += G[k];
    }
    if (tp.needs_grad(row)) {
      Tensor& g = tp.grad(row);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) g[j] += G[i * c + j];
      }
    }
  });
}

Var mul_col(Tape& t, Var a, Var col) {
  const Tensor& A = t.value(a);
  const Tensor& S = t.value(col);
  const std::size_t r = A.rows(), c = A.cols();
  if (S.size() != r) fail(ErrorCode::kShape, "mul_col: column length does not match rows");
  Tensor C = like(A);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) C[i * c + j] = A[i * c + j] * S[i];
  }
  return t.record(std::move(C), {a, col}, [a, col, r, c](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    if (tp.needs_grad(a)) {
      const Tensor& Sv = tp.value(col);
      Tensor& g = tp.grad(a);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += G[i * c + j] * Sv[i];
      }
    }
    if (tp.needs_grad(col)) {
      const Tensor& Av = tp.value(a);
      Tensor& g = tp.grad(col);
      for (std::size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += G[i * c + j] * Av[i * c + j];
        g[i] += acc;
      }
    }
  });
}

Var scale(Tape& t, Var a, double s) {
  return unary(t, a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Tape& t, Var a, double s) {
  return unary(t, a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var relu(Tape& t, Var a) {
  return unary(
      t, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Tape& t, Var a) {
  return unary(t, a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Tape& t, Var a) {
  return unary(
      t, a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return stable_sigmoid(x); });
}

Var log(Tape& t, Var a) {
  for (double v : t.value(a).values()) {
    if (std::isnan(v)) fail(ErrorCode::kNumeric, "log: NaN input");
  }
  return unary(
      t, a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var reciprocal(Tape& t, Var a) {
  return unary(
      t, a, [](double x) { return 1.0 / x; }, [](double, double y) { return -y * y; });
}

Var clamp(Tape& t, Var a, double lo, double hi) {
  return unary(
      t, a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var concat_cols(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  const std::size_t r = A.rows();
  if (B.rows() != r) fail(ErrorCode::kShape, "concat_cols: row counts differ");
  const std::size_t ca = A.cols(), cb = B.cols(), c = ca + cb;
  Tensor C = Tensor::matrix(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(A.data() + i * ca, ca, C.data() + i * c);
    std::copy_n(B.data() + i * cb, cb, C.data() + i * c + ca);
  }
  return t.record(std::move(C), {a, b}, [a, b, r, ca, cb, c](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    if (tp.needs_grad(a)) {
      Tensor& g = tp.grad(a);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < ca; ++j) g[i * ca + j] += G[i * c + j];
      }
    }
    if (tp.needs_grad(b)) {
      Tensor& g = tp.grad(b);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < cb; ++j) g[i * cb + j] += G[i * c + ca + j];
      }
    }
  });
}

Var gather_rows(Tape& t, Var a, std::span<const std::size_t> rows) {
  const Tensor& A = t.value(a);
  const std::size_t c = A.cols();
  Tensor C = Tensor::matrix(rows.size(), c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= A.rows()) fail(ErrorCode::kIndex, "gather_rows: row index out of range");
    std::copy_n(A.data() + rows[i] * c, c, C.data() + i * c);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return t.record(std::move(C), {a}, [a, c, idx = std::move(idx)](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    Tensor& g = tp.grad(a);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = g.data() + idx[i] * c;
      const double* src = G.data() + i * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Var segment_sum(Tape& t, Var a, std::span<const std::size_t> row_begin) {
  const Tensor& A = t.value(a);
  if (row_begin.empty() || row_begin.back() != A.rows()) {
    fail(ErrorCode::kShape, "segment_sum: segment bounds do not cover the input rows");
  }
  const std::size_t segs = row_begin.size() - 1, c = A.cols();
  Tensor C = Tensor::matrix(segs, c);
  for (std::size_t s = 0; s < segs; ++s) {
    double* dst = C.data() + s * c;
    for (std::size_t i = row_begin[s]; i < row_begin[s + 1]; ++i) {
      const double* src = A.data() + i * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  }
  std::vector<std::size_t> bounds(row_begin.begin(), row_begin.end());
  return t.record(std::move(C), {a},
                  [a, c, bounds = std::move(bounds)](Tape& tp, std::size_t self) {
                    const Tensor& G = tp.grad(self);
                    Tensor& g = tp.grad(a);
                    for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
                      const double* src = G.data() + s * c;
                      for (std::size_t i = bounds[s]; i < bounds[s + 1]; ++i) {
                        double* dst = g.data() + i * c;
                        for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
                      }
                    }
                  });
}

Var max_rows(Tape& t, Var a) {
  const Tensor& A = t.value(a);
  const std::size_t r = A.rows(), c = A.cols();
  if (r == 0) fail(ErrorCode::kEmptyInput, "max_rows: empty set");
  Tensor C = Tensor::matrix(1, c);
  std::vector<std::size_t> arg(c, 0);
  for (std::size_t j = 0; j < c; ++j) C[j] = A[j];
  for (std::size_t i = 1; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double v = A[i * c + j];
      if (v > C[j]) {
        C[j] = v;
        arg[j] = i;
      }
    }
  }
  return t.record(std::move(C), {a}, [a, c, arg = std::move(arg)](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    Tensor& g = tp.grad(a);
    for (std::size_t j = 0; j < c; ++j) g[arg[j] * c + j] += G[j];
  });
}

Var sum(Tape& t, Var a) {
  const Tensor& A = t.value(a);
  double acc = 0.0;
  for (double v : A.values()) acc += v;
  return t.record(Tensor::matrix(1, 1, acc), {a}, [a](Tape& tp, std::size_t self) {
    const double g0 = tp.grad(self)[0];
    Tensor& g = tp.grad(a);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += g0;
  });
}

Var mean(Tape& t, Var a) {
  const std::size_t n = t.value(a).size();
  if (n == 0) fail(ErrorCode::kEmptyInput, "mean: empty tensor");
  return scale(t, sum(t, a), 1.0 / static_cast<double>(n));
}

Var activate(Tape& t, Var a, Activation act) {
  switch (act) {
    case Activation::kNone: return a;
    case Activation::kRelu: return relu(t, a);
    case Activation::kSigmoid: return sigmoid(t, a);
    case Activation::kSoftplus: return softplus(t, a);
  }
  return a;
}

void mlp_init(ParamStore& store, const std::string& prefix, std::span<const std::size_t> widths,
              Rng& rng) {
  if (widths.size() < 2) fail(ErrorCode::kConfig, "mlp_init: need at least two widths");
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l], out = widths[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    Tensor w = Tensor::matrix(in, out);
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = rng.uniform(-bound, bound);
    store.add(prefix + ".w" + std::to_string(l), std::move(w));
    store.add(prefix + ".b" + std::to_string(l), Tensor({out}, 0.0));
  }
}

Var mlp_forward(Tape& t, ParamStore& store, const std::string& prefix, Var input,
                std::span<const std::size_t> widths, Activation last) {
  if (widths.size() < 2) fail(ErrorCode::kConfig, "mlp_forward: need at least two widths");
  if (t.value(input).cols() != widths[0]) {
    fail(ErrorCode::kShape, "mlp_forward(" + prefix + "): input width " +
                                std::to_string(t.value(input).cols()) + " != " +
                                std::to_string(widths[0]));
  }
  Var h = input;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Var w = t.parameter(store, prefix + ".w" + std::to_string(l));
    Var b = t.parameter(store, prefix + ".b" + std::to_string(l));
    if (t.value(w).rows() != widths[l] || t.value(w).cols() != widths[l + 1]) {
      fail(ErrorCode::kShape, "mlp_forward(" + prefix + "): layer " + std::to_string(l) +
                                  " weight shape does not match widths");
    }
    h = add_row(t, matmul(t, h, w), b);
    h = activate(t, h, l + 2 == widths.size() ? last : Activation::kRelu);
  }
  return h;
}

}  // namespace dancenet::diff
