#include "uvqa/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "uvqa/errors.hpp"

namespace uvqa {

namespace {

void require_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

Tensor shaped_like(const Tensor& t) { return Tensor(t.shape()); }

Tensor matrix(std::size_t r, std::size_t c) { return Tensor({r, c}); }

}  // namespace

Var Graph::push(std::string_view op, Tensor value, std::initializer_list<Var> inputs, Backward bw) {
  return push(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(bw));
}

Var Graph::push(std::string_view op, Tensor value, std::span<const Var> inputs, Backward bw) {
  if (!value.all_finite()) throw NumericError(std::string(op) + " produced a non-finite value");
  Node n;
  n.value = std::move(value);
  if (mode_ == Mode::training) {
    n.needs_grad = std::any_of(inputs.begin(), inputs.end(), [&](Var v) { return needs(v); });
    if (n.needs_grad) n.backward = std::move(bw);
  }
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::constant(Tensor t) {
  if (!t.all_finite()) throw NumericError("constant contains a non-finite value");
  Node n;
  n.value = std::move(t);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{it->second};
  if (!p.value.all_finite()) throw NumericError("parameter " + p.name + " is not finite");
  Node n;
  n.external = &p.value;
  n.parameter = &p;
  n.needs_grad = mode_ == Mode::training;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var{nodes_.size() - 1};
}

const Tensor& Graph::value(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.external ? *n.external : n.value;
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.size() == 0) return shaped_like(value(v));
  return n.grad;
}

Tensor& Graph::accum(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.size() == 0) n.grad = shaped_like(value(v));
  return n.grad;
}

void Graph::backward(Var loss) {
  if (value(loss).size() != 1) {
    throw DimensionError("backward: loss must be a single element, got " + shape_string(value(loss).shape()));
  }
  if (!needs(loss)) return;
  for (auto& n : nodes_) n.grad = Tensor();
  accum(loss)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    if (n.parameter) {
      auto dst = n.parameter->grad.values();
      auto src = n.grad.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    } else if (n.backward) {
      n.backward(*this, id);
    }
  }
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.cols() != B.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(A.shape()) + " x " +
                         shape_string(B.shape()));
  }
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor out = matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double* o = &out(i, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A(i, p);
      if (aip == 0.0) continue;
      const double* brow = &B(p, 0);
      for (std::size_t j = 0; j < n; ++j) o[j] += aip * brow[j];
    }
  }
  return push("matmul", std::move(out), {a, b}, [a, b, m, k, n](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    const Tensor& A = g.value(a);
    const Tensor& B = g.value(b);
    if (g.needs(a)) {
      Tensor& dA = g.accum(a);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += G(i, j) * B(p, j);
          dA[i * k + p] += s;
        }
      }
    }
    if (g.needs(b)) {
      Tensor& dB = g.accum(b);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A(i, p);
          if (aip == 0.0) continue;
          double* d = &dB[p * n];
          for (std::size_t j = 0; j < n; ++j) d[j] += aip * G(i, j);
        }
      }
    }
  });
}

Var Graph::matmul_nt(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.cols() != B.cols()) {
    throw DimensionError("matmul_nt: inner dimensions differ, " + shape_string(A.shape()) + " x " +
                         shape_string(B.shape()) + "^T");
  }
  const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
  Tensor out = matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += A(i, p) * B(j, p);
      out(i, j) = s;
    }
  }
  return push("matmul_nt", std::move(out), {a, b}, [a, b, m, k, n](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    const Tensor& A = g.value(a);
    const Tensor& B = g.value(b);
    if (g.needs(a)) {
      Tensor& dA = g.accum(a);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = G(i, j);
          if (gij == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) dA[i * k + p] += gij * B(j, p);
        }
    }
    if (g.needs(b)) {
      Tensor& dB = g.accum(b);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = G(i, j);
          if (gij == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) dB[j * k + p] += gij * A(i, p);
        }
    }
  });
}

Var Graph::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_same_shape("add", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  return push("add", std::move(out), {a, b}, [a, b](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    for (Var v : {a, b}) {
      if (!g.needs(v)) continue;
      Tensor& d = g.accum(v);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += G[i];
    }
  });
}

Var Graph::add_row(Var a, Var row) {
  const Tensor& A = value(a);
  const Tensor& R = value(row);
  if (R.size() != A.cols()) {
    throw DimensionError("add_row: row " + shape_string(R.shape()) + " does not match " + shape_string(A.shape()));
  }
  Tensor out = A;
  const std::size_t r = A.rows(), c = A.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) += R[j];
  return push("add_row", std::move(out), {a, row}, [a, row, r, c](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    if (g.needs(a)) {
      Tensor& d = g.accum(a);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += G[i];
    }
    if (g.needs(row)) {
      Tensor& d = g.accum(row);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) d[j] += G(i, j);
    }
  });
}

Var Graph::mul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_same_shape("mul", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  return push("mul", std::move(out), {a, b}, [a, b](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    if (g.needs(a)) {
      Tensor& d = g.accum(a);
      const Tensor& B = g.value(b);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += G[i] * B[i];
    }
    if (g.needs(b)) {
      Tensor& d = g.accum(b);
      const Tensor& A = g.value(a);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += G[i] * A[i];
    }
  });
}

Var Graph::scale(Var a, double s) {
  Tensor out = value(a);
  for (auto& x : out.values()) x *= s;
  return push("scale", std::move(out), {a}, [a, s](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    Tensor& d = g.accum(a);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * G[i];
  });
}

Var Graph::gelu(Var a) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  const Tensor& X = value(a);
  Tensor out = shaped_like(X);
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double x = X[i];
    out[i] = 0.5 * x * (1.0 + std::tanh(kC * (x + kA * x * x * x)));
  }
  return push("gelu", std::move(out), {a}, [a](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    const Tensor& X = g.value(a);
    Tensor& d = g.accum(a);
    for (std::size_t i = 0; i < X.size(); ++i) {
      const double x = X[i];
      const double t = std::tanh(kC * (x + kA * x * x * x));
      const double dt = (1.0 - t * t) * kC * (1.0 + 3.0 * kA * x * x);
      d[i] += G[i] * (0.5 * (1.0 + t) + 0.5 * x * dt);
    }
  });
}

Var Graph::softmax_rows(Var a) { return softmax_rows(a, nullptr); }

Var Graph::softmax_rows(Var a, std::shared_ptr<const Mask> mask) {
  const Tensor& X = value(a);
  const std::size_t r = X.rows(), c = X.cols();
  if (mask && mask->size() != r * c) {
    throw DimensionError("softmax_rows: mask size " + std::to_string(mask->size()) + " does not match " +
                         shape_string(X.shape()));
  }
  Tensor out = shaped_like(X);
  for (std::size_t i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j)
      if (!mask || (*mask)[i * c + j]) mx = std::max(mx, X(i, j));
    if (!std::isfinite(mx)) throw NumericError("softmax_rows: row " + std::to_string(i) + " is fully masked");
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (mask && !(*mask)[i * c + j]) continue;
      out(i, j) = std::exp(X(i, j) - mx);
      total += out(i, j);
    }
    for (std::size_t j = 0; j < c; ++j) out(i, j) /= total;
  }
  return push("softmax_rows", std::move(out), {a}, [a, r, c](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    const Tensor& Y = g.nodes_[self].value;
    Tensor& d = g.accum(a);
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += Y(i, j) * G(i, j);
      for (std::size_t j = 0; j < c; ++j) d(i, j) += Y(i, j) * (G(i, j) - dot);
    }
  });
}

Var Graph::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& X = value(x);
  const Tensor& Gn = value(gain);
  const Tensor& B = value(bias);
  const std::size_t r = X.rows(), c = X.cols();
  if (c < 2) throw DimensionError("layer_norm: need at least 2 columns, got " + shape_string(X.shape()));
  if (Gn.size() != c || B.size() != c) {
    throw DimensionError("layer_norm: gain " + shape_string(Gn.shape()) + " / bias " + shape_string(B.shape()) +
                         " do not match " + shape_string(X.shape()));
  }
  Tensor out = shaped_like(X);
  auto xhat = std::make_shared<Tensor>(X.shape());
  auto inv_std = std::make_shared<std::vector<double>>(r);
  for (std::size_t i = 0; i < r; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += X(i, j);
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (X(i, j) - mean) * (X(i, j) - mean);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      (*xhat)(i, j) = (X(i, j) - mean) * is;
      out(i, j) = (*xhat)(i, j) * Gn[j] + B[j];
    }
  }
  return push("layer_norm", std::move(out), {x, gain, bias},
              [x, gain, bias, r, c, xhat, inv_std](Graph& g, std::size_t self) {
                const Tensor& G = g.out_grad(self);
                const Tensor& Gn = g.value(gain);
                if (g.needs(gain)) {
                  Tensor& d = g.accum(gain);
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) d[j] += G(i, j) * (*xhat)(i, j);
                }
                if (g.needs(bias)) {
                  Tensor& d = g.accum(bias);
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) d[j] += G(i, j);
                }
                if (g.needs(x)) {
                  Tensor& d = g.accum(x);
                  const double inv_c = 1.0 / static_cast<double>(c);
                  for (std::size_t i = 0; i < r; ++i) {
                    double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                    for (std::size_t j = 0; j < c; ++j) {
                      const double dxh = G(i, j) * Gn[j];
                      mean_dxh += dxh;
                      mean_dxh_xh += dxh * (*xhat)(i, j);
                    }
                    mean_dxh *= inv_c;
                    mean_dxh_xh *= inv_c;
                    for (std::size_t j = 0; j < c; ++j) {
                      const double dxh = G(i, j) * Gn[j];
                      d(i, j) += (*inv_std)[i] * (dxh - mean_dxh - (*xhat)(i, j) * mean_dxh_xh);
                    }
                  }
                }
              });
}

Var Graph::slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Tensor& A = value(a);
  if (count == 0 || begin + count > A.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", +" + std::to_string(count) + ") outside " +
                         shape_string(A.shape()));
  }
  const std::size_t c = A.cols();
  Tensor out = matrix(count, c);
  std::copy_n(A.values().begin() + static_cast<std::ptrdiff_t>(begin * c), count * c, out.values().begin());
  return push("slice_rows", std::move(out), {a}, [a, begin, count, c](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    Tensor& d = g.accum(a);
    for (std::size_t i = 0; i < count * c; ++i) d[begin * c + i] += G[i];
  });
}

Var Graph::slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor& A = value(a);
  if (count == 0 || begin + count > A.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", +" + std::to_string(count) + ") outside " +
                         shape_string(A.shape()));
  }
  const std::size_t r = A.rows();
  Tensor out = matrix(r, count);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = A(i, begin + j);
  return push("slice_cols", std::move(out), {a}, [a, begin, count, r](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    Tensor& d = g.accum(a);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < count; ++j) d(i, begin + j) += G(i, j);
  });
}

Var Graph::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t c = value(parts[0]).cols();
  std::size_t r = 0;
  for (Var p : parts) {
    if (value(p).cols() != c) {
      throw DimensionError("concat_rows: column mismatch " + shape_string(value(parts[0]).shape()) + " vs " +
                           shape_string(value(p).shape()));
    }
    r += value(p).rows();
  }
  Tensor out = matrix(r, c);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& P = value(p);
    std::copy(P.values().begin(), P.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += P.size();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push("concat_rows", std::move(out), parts, [inputs](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    std::size_t offset = 0;
    for (Var p : inputs) {
      const std::size_t n = g.value(p).size();
      if (g.needs(p)) {
        Tensor& d = g.accum(p);
        for (std::size_t i = 0; i < n; ++i) d[i] += G[offset + i];
      }
      offset += n;
    }
  });
}

Var Graph::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t r = value(parts[0]).rows();
  std::size_t c = 0;
  for (Var p : parts) {
    if (value(p).rows() != r) {
      throw DimensionError("concat_cols: row mismatch " + shape_string(value(parts[0]).shape()) + " vs " +
                           shape_string(value(p).shape()));
    }
    c += value(p).cols();
  }
  Tensor out = matrix(r, c);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& P = value(p);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < P.cols(); ++j) out(i, offset + j) = P(i, j);
    offset += P.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push("concat_cols", std::move(out), parts, [inputs, r](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    std::size_t offset = 0;
    for (Var p : inputs) {
      const std::size_t pc = g.value(p).cols();
      if (g.needs(p)) {
        Tensor& d = g.accum(p);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < pc; ++j) d[i * pc + j] += G(i, offset + j);
      }
      offset += pc;
    }
  });
}

Var Graph::gather_rows(Var table, std::vector<std::size_t> rows) {
  const Tensor& T = value(table);
  if (rows.empty()) throw DimensionError("gather_rows: no rows requested");
  const std::size_t c = T.cols();
  Tensor out = matrix(rows.size(), c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= T.rows()) {
      throw DimensionError("gather_rows: row " + std::to_string(rows[i]) + " outside " + shape_string(T.shape()));
    }
    std::copy_n(&T(rows[i], 0), c, &out(i, 0));
  }
  return push("gather_rows", std::move(out), {table}, [table, rows = std::move(rows), c](Graph& g, std::size_t self) {
    const Tensor& G = g.out_grad(self);
    Tensor& d = g.accum(table);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) d[rows[i] * c + j] += G(i, j);
  });
}

Var Graph::sum(Var a) {
  double s = 0.0;
  for (double x : value(a).values()) s += x;
  return push("sum", Tensor::vector({s}), {a}, [a](Graph& g, std::size_t self) {
    const double G = g.out_grad(self)[0];
    Tensor& d = g.accum(a);
    for (auto& x : d.values()) x += G;
  });
}

Var Graph::sum_squares(Var a) {
  double s = 0.0;
  for (double x : value(a).values()) s += x * x;
  return push("sum_squares", Tensor::vector({s}), {a}, [a](Graph& g, std::size_t self) {
    const double G = g.out_grad(self)[0];
    const Tensor& A = g.value(a);
    Tensor& d = g.accum(a);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += 2.0 * A[i] * G;
  });
}

Var Graph::bce_with_logits(Var logits, Tensor targets) {
  const Tensor& Z = value(logits);
  if (Z.size() != targets.size()) {
    throw DimensionError("bce_with_logits: logits " + shape_string(Z.shape()) + " vs targets " +
                         shape_string(targets.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < Z.size(); ++i) {
    const double z = Z[i];
    s += std::max(z, 0.0) - z * targets[i] + std::log1p(std::exp(-std::abs(z)));
  }
  return push("bce_with_logits", Tensor::vector({s}), {logits},
              [logits, targets = std::move(targets)](Graph& g, std::size_t self) {
                const double G = g.out_grad(self)[0];
                const Tensor& Z = g.value(logits);
                Tensor& d = g.accum(logits);
                for (std::size_t i = 0; i < Z.size(); ++i) {
                  const double z = Z[i];
                  const double sig = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
                  d[i] += G * (sig - targets[i]);
                }
              });
}

Var Graph::softmax_cross_entropy(Var logits, std::size_t target) {
  const Tensor& Z = value(logits);
  if (Z.rows() != 1 || target >= Z.cols()) {
    throw DimensionError("softmax_cross_entropy: target " + std::to_string(target) + " for logits " +
                         shape_string(Z.shape()));
  }
  double mx = Z[0];
  for (double z : Z.values()) mx = std::max(mx, z);
  double total = 0.0;
  for (double z : Z.values()) total += std::exp(z - mx);
  const double lse = mx + std::log(total);
  return push("softmax_cross_entropy", Tensor::vector({lse - Z[target]}), {logits},
              [logits, target, lse](Graph& g, std::size_t self) {
                const double G = g.out_grad(self)[0];
                const Tensor& Z = g.value(logits);
                Tensor& d = g.accum(logits);
                for (std::size_t i = 0; i < Z.size(); ++i) {
                  d[i] += G * (std::exp(Z[i] - lse) - (i == target ? 1.0 : 0.0));
                }
              });
}

}  // namespace uvqa
