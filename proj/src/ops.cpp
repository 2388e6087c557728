// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdiff/ops.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include "stdiff/errors.hpp"

namespace stdiff::ops {

namespace {

std::atomic<bool> g_fault{false};

Shape with_last_dim(const Shape& s, std::size_t last) {
  Shape out = s;
  if (out.empty()) out.push_back(last);
  else out.back() = last;
  return out;
}

void require_same_shape(const DenseTensor& a, const DenseTensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

}  // namespace

namespace testing {
void inject_backward_fault(bool on) { g_fault = on; }
}  // namespace testing

Var linear(Tape& tape, Var x, Var w) {
  const DenseTensor& xv = tape.value(x);
  const DenseTensor& wv = tape.value(w);
  if (wv.rank() != 2 || xv.cols() != wv.dim(0)) {
    throw ShapeError("linear: input " + shape_to_string(xv.shape()) + " times weight " +
                     shape_to_string(wv.shape()));
  }
  const std::size_t rows = xv.rows();
  const std::size_t din = wv.dim(0);
  const std::size_t dout = wv.dim(1);
  DenseTensor y(with_last_dim(xv.shape(), dout));
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * din;
    double* yr = y.data() + r * dout;
    for (std::size_t k = 0; k < din; ++k) {
      const double a = xr[k];
      const double* wk = wv.data() + k * dout;
      for (std::size_t j = 0; j < dout; ++j) yr[j] += a * wk[j];
    }
  }
  const Var inputs[] = {x, w};
  return tape.record("linear", std::move(y), inputs, [=](Tape& t, Var out) {
    const DenseTensor& dy = t.grad(out);
    const DenseTensor& xv = t.value(x);
    const DenseTensor& wv = t.value(w);
    if (t.requires_grad(x)) {
      DenseTensor& dx = t.grad(x);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* dyr = dy.data() + r * dout;
        double* dxr = dx.data() + r * din;
        for (std::size_t k = 0; k < din; ++k) {
          const double* wk = wv.data() + k * dout;
          double s = 0.0;
          for (std::size_t j = 0; j < dout; ++j) s += dyr[j] * wk[j];
          dxr[k] += s;
        }
      }
    }
    if (t.requires_grad(w)) {
      DenseTensor& dw = t.grad(w);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xv.data() + r * din;
        const double* dyr = dy.data() + r * dout;
        for (std::size_t k = 0; k < din; ++k) {
          const double a = xr[k];
          double* dwk = dw.data() + k * dout;
          for (std::size_t j = 0; j < dout; ++j) dwk[j] += a * dyr[j];
        }
      }
    }
  });
}

Var add(Tape& tape, Var a, Var b) {
  const DenseTensor& av = tape.value(a);
  const DenseTensor& bv = tape.value(b);
  require_same_shape(av, bv, "add");
  DenseTensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  const Var inputs[] = {a, b};
  return tape.record("add", std::move(y), inputs, [=](Tape& t, Var out) {
    const DenseTensor& dy = t.grad(out);
    for (Var v : {a, b}) {
      if (!t.requires_grad(v)) continue;
      DenseTensor& dv = t.grad(v);
      for (std::size_t i = 0; i < dy.size(); ++i) dv[i] += dy[i];
    }
  });
}

Var add_bias(Tape& tape, Var x, Var b) {
  const DenseTensor& xv = tape.value(x);
  const DenseTensor& bv = tape.value(b);
  if (bv.size() != xv.cols()) {
    throw ShapeError("add_bias: bias of " + std::to_string(bv.size()) + " for rows of " +
                     std::to_string(xv.cols()));
  }
  const std::size_t rows = xv.rows();
  const std::size_t cols = xv.cols();
  DenseTensor y = xv;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] += bv[c];
  }
  const Var inputs[] = {x, b};
  return tape.record("add_bias", std::move(y), inputs, [=](Tape& t, Var out) {
    const DenseTensor& dy = t.grad(out);
    if (t.requires_grad(x)) {
      DenseTensor& dx = t.grad(x);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
    }
    if (t.requires_grad(b)) {
      DenseTensor& db = t.grad(b);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) db[c] += dy[r * cols + c];
      }
    }
  });
}

Var relu(Tape& tape, Var x) {
  DenseTensor y = tape.value(x);
  for (double& v : y.values()) v = v < 0.0 ? 0.0 : v;  // NaN passes through
  const Var inputs[] = {x};
  return tape.record("relu", std::move(y), inputs, [=](Tape& t, Var out) {
    if (!t.requires_grad(x)) return;
    const DenseTensor& dy = t.grad(out);
    const DenseTensor& xv = t.value(x);
    DenseTensor& dx = t.grad(x);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (!(xv[i] <= 0.0)) dx[i] += dy[i];
    }
  });
}

Var spmm(Tape& tape, const SparseMatrix& p, Var x) {
  const DenseTensor& xv = tape.value(x);
  const std::size_t feat = xv.cols();
  if (p.cols() == 0 || xv.rows() % p.cols() != 0) {
    throw ShapeError("spmm: operand with " + std::to_string(xv.rows()) +
                     " rows for matrix with " + std::to_string(p.cols()) + " columns");
  }
  const std::size_t blocks = xv.rows() / p.cols();
  Shape out_shape = xv.shape();
  if (p.rows() != p.cols()) out_shape = {blocks * p.rows(), feat};
  DenseTensor y(out_shape);
  spmm_blocks(p, xv.values(), feat, y.values(), false);
  const SparseMatrix* pp = &p;
  const Var inputs[] = {x};
  return tape.record("spmm", std::move(y), inputs, [=](Tape& t, Var out) {
    // dX = P^T dY, accumulated by scattering each stored entry.
    if (!t.requires_grad(x)) return;
    const DenseTensor& dy = t.grad(out);
    DenseTensor& dx = t.grad(x);
    const auto offsets = pp->row_offsets();
    const auto cols = pp->col_indices();
    const auto vals = pp->values();
    const std::size_t in_rows = pp->cols();
    const std::size_t out_rows = pp->rows();
    for (std::size_t b = 0; b < blocks; ++b) {
      const double* dyb = dy.data() + b * out_rows * feat;
      double* dxb = dx.data() + b * in_rows * feat;
      for (std::size_t r = 0; r < out_rows; ++r) {
        const double* dyr = dyb + r * feat;
        for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) {
          const double w = vals[k];
          double* dxr = dxb + cols[k] * feat;
          for (std::size_t f = 0; f < feat; ++f) dxr[f] += w * dyr[f];
        }
      }
    }
  });
}

Var layer_norm(Tape& tape, Var x, Var scale, Var shift, double eps) {
  const DenseTensor& xv = tape.value(x);
  const DenseTensor& gv = tape.value(scale);
  const DenseTensor& bv = tape.value(shift);
  const std::size_t rows = xv.rows();
  const std::size_t d = xv.cols();
  if (d < 1 || gv.size() != d || bv.size() != d) {
    throw ShapeError("layer_norm: feature width " + std::to_string(d) + " with scale " +
                     shape_to_string(gv.shape()) + " and shift " + shape_to_string(bv.shape()));
  }
  DenseTensor y(xv.shape());
  std::vector<double> xhat(xv.size());
  std::vector<double> rstd(rows);
  const double inv_d = 1.0 / static_cast<double>(d);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * d;
    double mean = 0.0;
    for (std::size_t f = 0; f < d; ++f) mean += xr[f];
    mean *= inv_d;
    double var = 0.0;
    for (std::size_t f = 0; f < d; ++f) var += (xr[f] - mean) * (xr[f] - mean);
    var *= inv_d;
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t f = 0; f < d; ++f) {
      const double h = (xr[f] - mean) * rstd[r];
      xhat[r * d + f] = h;
      y[r * d + f] = h * gv[f] + bv[f];
    }
  }
  const Var inputs[] = {x, scale, shift};
  return tape.record(
      "layer_norm", std::move(y), inputs,
      [=, xhat = std::move(xhat), rstd = std::move(rstd)](Tape& t, Var out) {
        const DenseTensor& dy = t.grad(out);
        const DenseTensor& gv = t.value(scale);
        if (t.requires_grad(scale)) {
          DenseTensor& dg = t.grad(scale);
          const double fault = g_fault ? 1.5 : 1.0;
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t f = 0; f < d; ++f) dg[f] += fault * dy[r * d + f] * xhat[r * d + f];
          }
        }
        if (t.requires_grad(shift)) {
          DenseTensor& db = t.grad(shift);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t f = 0; f < d; ++f) db[f] += dy[r * d + f];
          }
        }
        if (t.requires_grad(x)) {
          DenseTensor& dx = t.grad(x);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_g = 0.0;
            double mean_gh = 0.0;
            for (std::size_t f = 0; f < d; ++f) {
              const double g = dy[r * d + f] * gv[f];
              mean_g += g;
              mean_gh += g * xhat[r * d + f];
            }
            mean_g *= inv_d;
            mean_gh *= inv_d;
            for (std::size_t f = 0; f < d; ++f) {
              const double g = dy[r * d + f] * gv[f];
              dx[r * d + f] += rstd[r] * (g - mean_g - xhat[r * d + f] * mean_gh);
            }
          }
        }
      });
}

Var temporal_compress(Tape& tape, Var x, Var kernel, std::size_t n) {
  const DenseTensor& xv = tape.value(x);
  const DenseTensor& kv = tape.value(kernel);
  if (kv.rank() != 2) throw ShapeError("temporal_compress: kernel must be [m, d]");
  const std::size_t m = kv.dim(0);
  const std::size_t d = kv.dim(1);
  if (xv.cols() != d || n == 0 || xv.size() % (m * n * d) != 0) {
    throw ShapeError("temporal_compress: input " + shape_to_string(xv.shape()) +
                     " incompatible with kernel " + shape_to_string(kv.shape()) + " and n=" +
                     std::to_string(n));
  }
  Shape out_shape;
  if (xv.rank() >= 3) {
    if (xv.dim(xv.rank() - 3) != m || xv.dim(xv.rank() - 2) != n) {
      throw ShapeError("temporal_compress: temporal extent " +
                       std::to_string(xv.dim(xv.rank() - 3)) + " differs from kernel extent " +
                       std::to_string(m));
    }
    out_shape = xv.shape();
    out_shape.erase(out_shape.end() - 3);
  } else {
    out_shape = {xv.size() / (m * d), d};
  }
  const std::size_t batch = xv.size() / (m * n * d);
  DenseTensor y(out_shape);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t s = 0; s < m; ++s) {
      const double* xs = xv.data() + (b * m + s) * n * d;
      const double* ks = kv.data() + s * d;
      double* yb = y.data() + b * n * d;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < d; ++f) yb[i * d + f] += xs[i * d + f] * ks[f];
      }
    }
  }
  const Var inputs[] = {x, kernel};
  return tape.record("temporal_compress", std::move(y), inputs, [=](Tape& t, Var out) {
    const DenseTensor& dy = t.grad(out);
    const DenseTensor& xv = t.value(x);
    const DenseTensor& kv = t.value(kernel);
    double* dx = t.requires_grad(x) ? t.grad(x).data() : nullptr;
    double* dk = t.requires_grad(kernel) ? t.grad(kernel).data() : nullptr;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t s = 0; s < m; ++s) {
        const std::size_t base = (b * m + s) * n * d;
        const double* dyb = dy.data() + b * n * d;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t f = 0; f < d; ++f) {
            const double g = dyb[i * d + f];
            if (dx) dx[base + i * d + f] += g * kv[s * d + f];
            if (dk) dk[s * d + f] += g * xv[base + i * d + f];
          }
        }
      }
    }
  });
}

Var concat_features(Tape& tape, std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_features: no parts");
  const DenseTensor& first = tape.value(parts.front());
  for (Var p : parts) require_same_shape(tape.value(p), first, "concat_features");
  const std::size_t rows = first.rows();
  const std::size_t d = first.cols();
  const std::size_t s = parts.size();
  DenseTensor y(with_last_dim(first.shape(), s * d));
  for (std::size_t c = 0; c < s; ++c) {
    const DenseTensor& pv = tape.value(parts[c]);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv.data() + r * d, d, y.data() + r * s * d + c * d);
    }
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return tape.record("concat_features", std::move(y), ins, [=](Tape& t, Var out) {
    const DenseTensor& dy = t.grad(out);
    for (std::size_t c = 0; c < s; ++c) {
      if (!t.requires_grad(ins[c])) continue;
      DenseTensor& dp = t.grad(ins[c]);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t f = 0; f < d; ++f) dp[r * d + f] += dy[r * s * d + c * d + f];
      }
    }
  });
}

Var concat_rows(Tape& tape, std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  const std::size_t d = tape.value(parts.front()).cols();
  std::size_t rows = 0;
  std::vector<std::size_t> offsets;
  for (Var p : parts) {
    if (tape.value(p).cols() != d) throw ShapeError("concat_rows: column counts differ");
    offsets.push_back(rows * d);
    rows += tape.value(p).rows();
  }
  DenseTensor y({rows, d});
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto vals = tape.value(parts[i]).values();
    std::copy(vals.begin(), vals.end(), y.data() + offsets[i]);
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return tape.record("concat_rows", std::move(y), ins, [=](Tape& t, Var out) {
    const DenseTensor& dy = t.grad(out);
    for (std::size_t i = 0; i < ins.size(); ++i) {
      if (!t.requires_grad(ins[i])) continue;
      DenseTensor& dp = t.grad(ins[i]);
      for (std::size_t e = 0; e < dp.size(); ++e) dp[e] += dy[offsets[i] + e];
    }
  });
}

Var gather_rows(Tape& tape, Var x, std::vector<std::size_t> index, Shape out_shape) {
  const DenseTensor& xv = tape.value(x);
  const std::size_t d = xv.cols();
  const std::size_t in_rows = xv.rows();
  if (shape_size(out_shape) != index.size() * d || out_shape.empty() || out_shape.back() != d) {
    throw ShapeError("gather_rows: output shape " + shape_to_string(out_shape) +
                     " does not hold " + std::to_string(index.size()) + " rows of " +
                     std::to_string(d));
  }
  DenseTensor y(std::move(out_shape));
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= in_rows) throw ShapeError("gather_rows: row index out of range");
    std::copy_n(xv.data() + index[r] * d, d, y.data() + r * d);
  }
  const Var inputs[] = {x};
  return tape.record("gather_rows", std::move(y), inputs,
                     [=, index = std::move(index)](Tape& t, Var out) {
                       if (!t.requires_grad(x)) return;
                       const DenseTensor& dy = t.grad(out);
                       DenseTensor& dx = t.grad(x);
                       for (std::size_t r = 0; r < index.size(); ++r) {
                         for (std::size_t f = 0; f < d; ++f) dx[index[r] * d + f] += dy[r * d + f];
                       }
                     });
}

Var slice_rows(Tape& tape, Var x, std::size_t begin, std::size_t count) {
  const DenseTensor& xv = tape.value(x);
  if (xv.rank() != 2 || begin + count > xv.dim(0)) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") of " + shape_to_string(xv.shape()));
  }
  std::vector<std::size_t> index(count);
  for (std::size_t i = 0; i < count; ++i) index[i] = begin + i;
  return gather_rows(tape, x, std::move(index), {count, xv.dim(1)});
}

Var gather_elements(Tape& tape, Var x, std::vector<std::size_t> index, Shape out_shape) {
  const DenseTensor& xv = tape.value(x);
  if (shape_size(out_shape) != index.size()) throw ShapeError("gather_elements: size mismatch");
  DenseTensor y(std::move(out_shape));
  for (std::size_t e = 0; e < index.size(); ++e) {
    if (index[e] >= xv.size()) throw ShapeError("gather_elements: index out of range");
    y[e] = xv[index[e]];
  }
  const Var inputs[] = {x};
  return tape.record("gather_elements", std::move(y), inputs,
                     [=, index = std::move(index)](Tape& t, Var out) {
                       if (!t.requires_grad(x)) return;
                       const DenseTensor& dy = t.grad(out);
                       DenseTensor& dx = t.grad(x);
                       for (std::size_t e = 0; e < index.size(); ++e) dx[index[e]] += dy[e];
                     });
}

Var mlp_decode(Tape& tape, Var x, const MlpDecoderVars& w, std::size_t horizons,
               std::size_t d_out) {
  const Shape in_shape = tape.value(x).shape();
  if (in_shape.size() < 2) throw ShapeError("mlp_decode: input must be [.., n, d]");
  if (tape.value(w.w2).rank() != 2 || tape.value(w.w2).dim(1) != horizons * d_out) {
    throw ShapeError("mlp_decode: output layer must emit horizons * d_out = " +
                     std::to_string(horizons * d_out) + " columns");
  }
  const Var hidden = relu(tape, add_bias(tape, linear(tape, x, w.w1), w.b1));
  const Var flat = add_bias(tape, linear(tape, hidden, w.w2), w.b2);

  // [.., n, H * d_out] -> [.., H, n, d_out]
  const std::size_t n = in_shape[in_shape.size() - 2];
  const std::size_t batch = tape.value(flat).rows() / n;
  Shape out_shape(in_shape.begin(), in_shape.end() - 2);
  out_shape.insert(out_shape.end(), {horizons, n, d_out});
  std::vector<std::size_t> index;
  index.reserve(batch * horizons * n * d_out);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < horizons; ++h) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < d_out; ++o) {
          index.push_back((b * n + i) * horizons * d_out + h * d_out + o);
        }
      }
    }
  }
  return gather_elements(tape, flat, std::move(index), std::move(out_shape));
}

Var mae_l2_loss(Tape& tape, Var pred, const DenseTensor& target, std::span<const Var> params,
                double lambda, bool squared) {
  const DenseTensor& pv = tape.value(pred);
  require_same_shape(pv, target, "mae_l2_loss");
  if (pv.size() == 0) throw ShapeError("mae_l2_loss: empty prediction");
  const double inv_count = 1.0 / static_cast<double>(pv.size());
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) abs_sum += std::abs(pv[i] - target[i]);
  double sq = 0.0;
  for (Var p : params) {
    for (double v : tape.value(p).values()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  const double reg = squared ? sq : norm;
  DenseTensor y({1}, abs_sum * inv_count + lambda * reg);

  std::vector<Var> ins{pred};
  ins.insert(ins.end(), params.begin(), params.end());
  return tape.record("mae_l2_loss", std::move(y), ins, [=, target = target](Tape& t, Var out) {
    const double g = t.grad(out)[0];
    if (t.requires_grad(pred)) {
      const DenseTensor& pv = t.value(pred);
      DenseTensor& dp = t.grad(pred);
      for (std::size_t i = 0; i < pv.size(); ++i) {
        const double diff = pv[i] - target[i];
        const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        dp[i] += g * sign * inv_count;
      }
    }
    if (lambda == 0.0) return;
    if (!squared && norm == 0.0) return;
    const double coef = squared ? 2.0 * g * lambda : g * lambda / norm;
    for (std::size_t k = 1; k < ins.size(); ++k) {
      if (!t.requires_grad(ins[k])) continue;
      const DenseTensor& v = t.value(ins[k]);
      DenseTensor& dv = t.grad(ins[k]);
      for (std::size_t i = 0; i < v.size(); ++i) dv[i] += coef * v[i];
    }
  });
}

}  // namespace stdiff::ops
