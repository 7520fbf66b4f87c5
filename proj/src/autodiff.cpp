#include "lerp/autodiff.hpp"

#include <cmath>
#include <string>

#include "lerp/errors.hpp"

namespace lerp {

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) throw ContractViolation("tensor data length does not match shape");
}

Tensor Tensor::row_vector(std::vector<double> values) {
  auto n = values.size();
  return Tensor(1, n, std::move(values));
}

Tensor Tensor::column_vector(std::vector<double> values) {
  auto n = values.size();
  return Tensor(n, 1, std::move(values));
}

Tensor Tensor::transposed() const {
  Tensor out(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
  return out;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Tensor value) { return constant(std::make_shared<const Tensor>(std::move(value))); }

Var Tape::constant(std::shared_ptr<const Tensor> value) {
  nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::input(std::shared_ptr<const Tensor> value) {
  nodes_.push_back(Node{std::move(value), {}, true, nullptr, {}});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::input(Tensor value) { return input(std::make_shared<const Tensor>(std::move(value))); }

Var Tape::parameter(Parameter& param) {
  // Non-owning alias: the parameter outlives the tape.
  std::shared_ptr<const Tensor> view(std::shared_ptr<const Tensor>{}, &param.value);
  nodes_.push_back(Node{std::move(view), {}, true, &param, {}});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, bool requires_grad, BackwardFn backward) {
  Node node;
  node.value = std::make_shared<const Tensor>(std::move(value));
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad_buffer(Var v) {
  auto& node = nodes_[v.index];
  if (node.grad.empty() && !node.value->empty()) node.grad = Tensor(node.value->rows(), node.value->cols());
  return node.grad;
}

const Tensor& Tape::grad(Var v) { return grad_buffer(v); }

void Tape::add_grad(Var v, const Tensor& g) {
  auto& buf = grad_buffer(v);
  if (!buf.same_shape(g)) throw ContractViolation("add_grad: shape mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

void Tape::backward(Var loss, double seed) {
  const auto& value = this->value(loss);
  if (value.size() != 1) throw ContractViolation("backward: loss must be a scalar");
  grad_buffer(loss)[0] += seed;
  propagate();
}

void Tape::propagate() {
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    auto& node = nodes_[i];
    if (node.grad.empty() || !node.requires_grad) continue;
    if (node.backward) node.backward(*this, node.grad);
    if (node.param) {
      auto& dst = node.param->grad;
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += node.grad[k];
    }
  }
}

// ---------------------------------------------------------------------------
// Ops

namespace ad {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ContractViolation(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()) + ")");
  }
}

// y += a * x over n contiguous doubles
inline void axpy(double* __restrict y, double a, const double* __restrict x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// y += w ⊙ x
inline void fma_rows(double* __restrict y, const double* __restrict w, const double* __restrict x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += w[i] * x[i];
}

inline double dot(const double* __restrict a, const double* __restrict b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

Var softmax_rows(Tape& t, Var x) {
  const Tensor& in = t.value(x);
  if (in.cols() == 0) throw ContractViolation("softmax: empty row");
  Tensor out(in.rows(), in.cols());
  for (std::size_t r = 0; r < in.rows(); ++r) {
    auto src = in.row(r);
    auto dst = out.row(r);
    double mx = *std::max_element(src.begin(), src.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < src.size(); ++c) sum += dst[c] = std::exp(src[c] - mx);
    for (auto& d : dst) d /= sum;
  }
  const Var self{static_cast<std::uint32_t>(t.size())};
  return t.record(std::move(out), t.requires_grad(x), [x, self](Tape& tape, const Tensor& g) {
    const Tensor& y = tape.value(self);
    Tensor& dx = tape.grad_buffer(x);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto yr = y.row(r);
      auto gr = g.row(r);
      double s = dot(yr.data(), gr.data(), yr.size());
      auto dr = dx.row(r);
      for (std::size_t c = 0; c < yr.size(); ++c) dr[c] += yr[c] * (gr[c] - s);
    }
  });
}

Var transpose(Tape& t, Var x) {
  return t.record(t.value(x).transposed(), t.requires_grad(x), [x](Tape& tape, const Tensor& g) {
    Tensor& dx = tape.grad_buffer(x);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) dx(c, r) += g(r, c);
  });
}

Var clamp_soft(Tape& t, Var x) {
  const Tensor& in = t.value(x);
  Tensor out(in.rows(), in.cols());
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (!(in[i] >= 0.0)) throw ContractViolation("clamp_soft: negative or NaN input");
    out[i] = -std::expm1(-in[i]);
  }
  return t.record(std::move(out), t.requires_grad(x), [x](Tape& tape, const Tensor& g) {
    const Tensor& in = tape.value(x);
    Tensor& dx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * std::exp(-in[i]);
  });
}

namespace {

// Edges to skip, grouped so the hot loop only checks rows that have any.
struct MaskIndex {
  explicit MaskIndex(std::span<const MaskedEdge> masked, std::size_t n) : edges(masked) {
    if (!masked.empty()) {
      row_flag.assign(n, 0);
      for (const auto& e : masked) row_flag[e.from] = 1;
    }
  }
  bool row_has_mask(std::uint32_t a) const { return !row_flag.empty() && row_flag[a]; }
  bool masked(RelationId r, std::uint32_t a, std::uint32_t b) const {
    for (const auto& e : edges)
      if (e.relation == r && e.from == a && e.to == b) return true;
    return false;
  }
  std::span<const MaskedEdge> edges;
  std::vector<char> row_flag;
};

std::vector<char> nonzero_rows(const Tensor& v) {
  std::vector<char> nz(v.rows(), 0);
  for (std::size_t a = 0; a < v.rows(); ++a) {
    auto row = v.row(a);
    nz[a] = std::any_of(row.begin(), row.end(), [](double x) { return x != 0.0; });
  }
  return nz;
}

}  // namespace

Var weighted_spmv(Tape& t, Var v, Var weights, const KnowledgeGraph& graph, std::span<const MaskedEdge> masked) {
  const Tensor& V = t.value(v);
  const Tensor& W = t.value(weights);
  const std::size_t n = graph.num_entities();
  const std::size_t c = V.cols();
  if (V.rows() != n) throw ContractViolation("weighted_spmv: state rows must equal entity count");
  if (W.rows() != graph.num_relations() || W.cols() != c)
    throw ContractViolation("weighted_spmv: weights must be |relations| x columns");

  MaskIndex mask(masked, n);
  auto nz = nonzero_rows(V);
  Tensor out(n, c);
  for (RelationId r = 0; r < graph.num_relations(); ++r) {
    const auto& A = graph.adjacency(r);
    const double* w = W.row(r).data();
    for (std::uint32_t a = 0; a < n; ++a) {
      if (!nz[a]) continue;
      const double* va = V.row(a).data();
      const bool check = mask.row_has_mask(a);
      for (auto b : A.row(a)) {
        if (check && mask.masked(r, a, b)) continue;
        fma_rows(out.row(b).data(), w, va, c);
      }
    }
  }

  const bool need = t.requires_grad(v) || t.requires_grad(weights);
  std::vector<MaskedEdge> masked_copy(masked.begin(), masked.end());
  return t.record(std::move(out), need,
                  [v, weights, &graph, masked_copy = std::move(masked_copy), nz = std::move(nz)](
                      Tape& tape, const Tensor& g) {
                    const Tensor& V = tape.value(v);
                    const Tensor& W = tape.value(weights);
                    const bool need_v = tape.requires_grad(v);
                    const bool need_w = tape.requires_grad(weights);
                    Tensor* dV = need_v ? &tape.grad_buffer(v) : nullptr;
                    Tensor* dW = need_w ? &tape.grad_buffer(weights) : nullptr;
                    const std::size_t n = V.rows();
                    const std::size_t c = V.cols();
                    MaskIndex mask(masked_copy, n);
                    for (RelationId r = 0; r < graph.num_relations(); ++r) {
                      const auto& A = graph.adjacency(r);
                      const double* w = W.row(r).data();
                      double* dw = need_w ? dW->row(r).data() : nullptr;
                      for (std::uint32_t a = 0; a < n; ++a) {
                        const bool src_nz = nz[a];
                        if (!need_v && !src_nz) continue;
                        const double* va = V.row(a).data();
                        double* dva = need_v ? dV->row(a).data() : nullptr;
                        const bool check = mask.row_has_mask(a);
                        for (auto b : A.row(a)) {
                          if (check && mask.masked(r, a, b)) continue;
                          const double* gb = g.row(b).data();
                          if (dva) fma_rows(dva, w, gb, c);
                          if (dw && src_nz) fma_rows(dw, va, gb, c);
                        }
                      }
                    }
                  });
}

Var hadamard(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  require_same_shape(A, B, "hadamard");
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  return t.record(std::move(out), t.requires_grad(a) || t.requires_grad(b), [a, b](Tape& tape, const Tensor& g) {
    const Tensor& A = tape.value(a);
    const Tensor& B = tape.value(b);
    if (tape.requires_grad(a)) {
      Tensor& da = tape.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * B[i];
    }
    if (tape.requires_grad(b)) {
      Tensor& db = tape.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * A[i];
    }
  });
}

Var add(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  require_same_shape(A, B, "add");
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
  return t.record(std::move(out), t.requires_grad(a) || t.requires_grad(b), [a, b](Tape& tape, const Tensor& g) {
    if (tape.requires_grad(a)) tape.add_grad(a, g);
    if (tape.requires_grad(b)) tape.add_grad(b, g);
  });
}

Var sub_from_one(Tape& t, Var a) {
  const Tensor& A = t.value(a);
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - A[i];
  return t.record(std::move(out), t.requires_grad(a), [a](Tape& tape, const Tensor& g) {
    Tensor& da = tape.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) da[i] -= g[i];
  });
}

Var snap_unit(Tape& t, Var a) {
  const Tensor& A = t.value(a);
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(A[i], 0.0, 1.0);
  return t.record(std::move(out), t.requires_grad(a), [a](Tape& tape, const Tensor& g) {
    Tensor& da = tape.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
  });
}

Var scale(Tape& t, Var a, double s) {
  const Tensor& A = t.value(a);
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * A[i];
  return t.record(std::move(out), t.requires_grad(a), [a, s](Tape& tape, const Tensor& g) {
    Tensor& da = tape.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += s * g[i];
  });
}

Var mix(Tape& t, Var coeffs, std::span<const Var> parts) {
  const Tensor& P = t.value(coeffs);
  if (P.cols() != parts.size()) throw ContractViolation("mix: coefficient columns must match part count");
  if (parts.empty()) throw ContractViolation("mix: no parts");
  const Tensor& first = t.value(parts[0]);
  if (first.cols() != P.rows()) throw ContractViolation("mix: part columns must match coefficient rows");
  Tensor out(first.rows(), first.cols());
  bool need = t.requires_grad(coeffs);
  for (std::size_t o = 0; o < parts.size(); ++o) {
    const Tensor& X = t.value(parts[o]);
    require_same_shape(first, X, "mix");
    need = need || t.requires_grad(parts[o]);
    for (std::size_t e = 0; e < X.rows(); ++e) {
      auto xr = X.row(e);
      auto orow = out.row(e);
      for (std::size_t i = 0; i < xr.size(); ++i) orow[i] += P(i, o) * xr[i];
    }
  }
  std::vector<Var> part_vec(parts.begin(), parts.end());
  return t.record(std::move(out), need, [coeffs, part_vec = std::move(part_vec)](Tape& tape, const Tensor& g) {
    const Tensor& P = tape.value(coeffs);
    Tensor* dP = tape.requires_grad(coeffs) ? &tape.grad_buffer(coeffs) : nullptr;
    for (std::size_t o = 0; o < part_vec.size(); ++o) {
      const Tensor& X = tape.value(part_vec[o]);
      Tensor* dX = tape.requires_grad(part_vec[o]) ? &tape.grad_buffer(part_vec[o]) : nullptr;
      for (std::size_t e = 0; e < X.rows(); ++e) {
        auto gr = g.row(e);
        auto xr = X.row(e);
        for (std::size_t i = 0; i < gr.size(); ++i) {
          if (dX) (*dX)(e, i) += P(i, o) * gr[i];
          if (dP) (*dP)(i, o) += xr[i] * gr[i];
        }
      }
    }
  });
}

Var matmul(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (A.cols() != B.rows()) throw ContractViolation("matmul: inner dimensions differ");
  const std::size_t p = A.rows(), q = A.cols(), r = B.cols();
  Tensor out(p, r);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = A(i, k);
      if (aik != 0.0) axpy(out.row(i).data(), aik, B.row(k).data(), r);
    }
  return t.record(std::move(out), t.requires_grad(a) || t.requires_grad(b), [a, b](Tape& tape, const Tensor& g) {
    const Tensor& A = tape.value(a);
    const Tensor& B = tape.value(b);
    const std::size_t p = A.rows(), q = A.cols(), r = B.cols();
    if (tape.requires_grad(a)) {
      Tensor& dA = tape.grad_buffer(a);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t k = 0; k < q; ++k) dA(i, k) += dot(g.row(i).data(), B.row(k).data(), r);
    }
    if (tape.requires_grad(b)) {
      Tensor& dB = tape.grad_buffer(b);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t k = 0; k < q; ++k) axpy(dB.row(k).data(), A(i, k), g.row(i).data(), r);
    }
  });
}

Var matmul_nt(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (A.cols() != B.cols()) throw ContractViolation("matmul_nt: inner dimensions differ");
  const std::size_t p = A.rows(), q = A.cols(), r = B.rows();
  Tensor out(p, r);
  for (std::size_t i = 0; i < p; ++i) {
    const double* ai = A.row(i).data();
    double* oi = out.row(i).data();
    for (std::size_t j = 0; j < r; ++j) oi[j] = dot(ai, B.row(j).data(), q);
  }
  return t.record(std::move(out), t.requires_grad(a) || t.requires_grad(b), [a, b](Tape& tape, const Tensor& g) {
    const Tensor& A = tape.value(a);
    const Tensor& B = tape.value(b);
    const std::size_t p = A.rows(), q = A.cols(), r = B.rows();
    Tensor* dA = tape.requires_grad(a) ? &tape.grad_buffer(a) : nullptr;
    Tensor* dB = tape.requires_grad(b) ? &tape.grad_buffer(b) : nullptr;
    for (std::size_t i = 0; i < p; ++i) {
      const double* gi = g.row(i).data();
      for (std::size_t j = 0; j < r; ++j) {
        const double gij = gi[j];
        if (gij == 0.0) continue;
        if (dA) axpy(dA->row(i).data(), gij, B.row(j).data(), q);
        if (dB) axpy(dB->row(j).data(), gij, A.row(i).data(), q);
      }
    }
  });
}

Var append_ones_column(Tape& t, Var x) {
  const Tensor& X = t.value(x);
  Tensor out(X.rows(), X.cols() + 1, 1.0);
  for (std::size_t e = 0; e < X.rows(); ++e) std::copy(X.row(e).begin(), X.row(e).end(), out.row(e).begin());
  return t.record(std::move(out), t.requires_grad(x), [x](Tape& tape, const Tensor& g) {
    Tensor& dx = tape.grad_buffer(x);
    for (std::size_t e = 0; e < dx.rows(); ++e)
      for (std::size_t i = 0; i < dx.cols(); ++i) dx(e, i) += g(e, i);
  });
}

Var sum_columns(Tape& t, Var x) {
  const Tensor& X = t.value(x);
  Tensor out(X.rows(), 1);
  for (std::size_t e = 0; e < X.rows(); ++e) {
    double s = 0.0;
    for (double v : X.row(e)) s += v;
    out(e, 0) = s;
  }
  return t.record(std::move(out), t.requires_grad(x), [x](Tape& tape, const Tensor& g) {
    Tensor& dx = tape.grad_buffer(x);
    for (std::size_t e = 0; e < dx.rows(); ++e)
      for (auto& d : dx.row(e)) d += g(e, 0);
  });
}

Var l1_normalize(Tape& t, Var x) {
  const Tensor& X = t.value(x);
  double s = 0.0;
  for (double v : X.values()) {
    if (v < 0.0) throw ContractViolation("l1_normalize: negative entry");
    s += v;
  }
  const double denom = s + kEpsilon;
  Tensor out(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.size(); ++i) out[i] = X[i] / denom;
  return t.record(std::move(out), t.requires_grad(x), [x, denom](Tape& tape, const Tensor& g) {
    const Tensor& X = tape.value(x);
    Tensor& dx = tape.grad_buffer(x);
    double gx = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) gx += g[i] * X[i];
    const double corr = gx / (denom * denom);
    for (std::size_t i = 0; i < X.size(); ++i) dx[i] += g[i] / denom - corr;
  });
}

Var cross_entropy(Tape& t, Var pred, std::size_t target) {
  const Tensor& P = t.value(pred);
  if (target >= P.size()) throw ContractViolation("cross_entropy: target out of range");
  const double p = P[target];
  if (p < 0.0) throw ContractViolation("cross_entropy: negative prediction");
  Tensor out = Tensor::scalar(-std::log(p + kEpsilon));
  return t.record(std::move(out), t.requires_grad(pred), [pred, target, p](Tape& tape, const Tensor& g) {
    tape.grad_buffer(pred)[target] += -g[0] / (p + kEpsilon);
  });
}

Var weighted_sum(Tape& t, Var x, const Tensor& w) {
  const Tensor& X = t.value(x);
  require_same_shape(X, w, "weighted_sum");
  double s = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) s += X[i] * w[i];
  return t.record(Tensor::scalar(s), t.requires_grad(x), [x, w](Tape& tape, const Tensor& g) {
    Tensor& dx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[0] * w[i];
  });
}

Var scatter_row(Tape& t, Var x, std::size_t n, std::size_t row) {
  const Tensor& X = t.value(x);
  if (X.rows() != 1) throw ContractViolation("scatter_row: input must be a single row");
  if (row >= n) throw ContractViolation("scatter_row: row out of range");
  Tensor out(n, X.cols());
  std::copy(X.row(0).begin(), X.row(0).end(), out.row(row).begin());
  return t.record(std::move(out), t.requires_grad(x), [x, row](Tape& tape, const Tensor& g) {
    Tensor& dx = tape.grad_buffer(x);
    for (std::size_t c = 0; c < dx.cols(); ++c) dx(0, c) += g(row, c);
  });
}

Var select_row(Tape& t, Var x, std::size_t row) {
  const Tensor& X = t.value(x);
  if (row >= X.rows()) throw ContractViolation("select_row: row out of range");
  Tensor out(1, X.cols());
  std::copy(X.row(row).begin(), X.row(row).end(), out.row(0).begin());
  return t.record(std::move(out), t.requires_grad(x), [x, row](Tape& tape, const Tensor& g) {
    Tensor& dx = tape.grad_buffer(x);
    for (std::size_t c = 0; c < dx.cols(); ++c) dx(row, c) += g(0, c);
  });
}

}  // namespace ad

// ---------------------------------------------------------------------------
// Adam

void Adam::step() {
  const auto& o = options_;
  for (Parameter* p : params_) {
    p->step += 1;
    const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(p->step));
    const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(p->step));
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      p->m[i] = o.beta1 * p->m[i] + (1.0 - o.beta1) * g;
      p->v[i] = o.beta2 * p->v[i] + (1.0 - o.beta2) * g * g;
      const double mhat = p->m[i] / bc1;
      const double vhat = p->v[i] / bc2;
      p->value[i] -= o.lr * mhat / (std::sqrt(vhat) + o.eps);
    }
    p->zero_grad();
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

}  // namespace lerp
