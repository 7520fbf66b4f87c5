#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lerp/kg.hpp"
#include "lerp/tensor.hpp"

namespace lerp {

// Learnable logits plus their gradient and Adam moments.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, std::size_t rows, std::size_t cols)
      : name(std::move(name)), value(rows, cols), grad(rows, cols), m(rows, cols), v(rows, cols) {}

  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;
  Tensor v;
  std::uint64_t step = 0;

  void zero_grad() { grad.fill(0.0); }
};

struct Var {
  std::uint32_t index = 0;
};

// Reverse-mode record. Every op appends one node whose inputs precede it, so a
// single reverse sweep over the node list visits nodes in a valid order.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Var constant(Tensor value);
  Var constant(std::shared_ptr<const Tensor> value);
  // Leaf whose gradient is kept on the tape (read it back with grad()).
  Var input(std::shared_ptr<const Tensor> value);
  Var input(Tensor value);
  // Leaf bound to a Parameter; propagate() adds the node gradient into param.grad.
  Var parameter(Parameter& param);

  Var record(Tensor value, bool requires_grad, BackwardFn backward);

  const Tensor& value(Var v) const { return *nodes_[v.index].value; }
  std::shared_ptr<const Tensor> value_ptr(Var v) const { return nodes_[v.index].value; }
  bool requires_grad(Var v) const { return nodes_[v.index].requires_grad; }
  // Zero tensor if nothing reached the node.
  const Tensor& grad(Var v);
  Tensor& grad_buffer(Var v);
  void add_grad(Var v, const Tensor& g);

  // Seeds d(loss)/d(loss) = seed and sweeps backward.
  void backward(Var loss, double seed = 1.0);
  // Sweeps backward from whatever gradients have been seeded with add_grad().
  void propagate();

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::shared_ptr<const Tensor> value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// An edge (relation, from, to) hidden from weighted_spmv.
struct MaskedEdge {
  RelationId relation;
  EntityId from;
  EntityId to;
};

namespace ad {

// Row-wise softmax with max subtraction.
Var softmax_rows(Tape& t, Var x);
Var transpose(Tape& t, Var x);
// 1 - exp(-x); requires x >= 0.
Var clamp_soft(Tape& t, Var x);
// States are entity-major: v is n×c (one column per independent chain) and
// weights is |relations|×c. Returns out[b, q] = Σ_r weights[r, q] Σ_a v[a, q] A_r[a, b],
// relation by relation, skipping the masked edges.
Var weighted_spmv(Tape& t, Var v, Var weights, const KnowledgeGraph& graph,
                  std::span<const MaskedEdge> masked = {});
Var hadamard(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var sub_from_one(Tape& t, Var a);
Var scale(Tape& t, Var a, double s);
// Clips to [0,1] with an identity gradient. Only meant to absorb rounding in
// convex combinations of unit-interval values.
Var snap_unit(Tape& t, Var a);
// coeffs is c×k, each part n×c: out[e, i] = Σ_o coeffs[i, o] parts[o][e, i].
Var mix(Tape& t, Var coeffs, std::span<const Var> parts);
Var matmul(Tape& t, Var a, Var b);
// a · bᵀ
Var matmul_nt(Tape& t, Var a, Var b);
Var append_ones_column(Tape& t, Var x);
// n×c -> n×1
Var sum_columns(Tape& t, Var x);
// x / (Σx + ε) over all entries.
Var l1_normalize(Tape& t, Var x);
// -log(pred[target] + ε) for a normalized column or row vector.
Var cross_entropy(Tape& t, Var pred, std::size_t target);
// Σ x ⊙ w with a constant weight tensor (scalar readout, used by tests and checks).
Var weighted_sum(Tape& t, Var x, const Tensor& w);
// 1×c -> n×c with the given row filled and zeros elsewhere.
Var scatter_row(Tape& t, Var x, std::size_t n, std::size_t row);
Var select_row(Tape& t, Var x, std::size_t row);

inline constexpr double kEpsilon = 1e-12;

}  // namespace ad

struct AdamOptions {
  double lr = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. step() updates every parameter, bumps its step counter
// and zeroes its gradient.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions options) : params_(std::move(params)), options_(options) {}
  void step();
  void zero_grad();
  const AdamOptions& options() const { return options_; }

 private:
  std::vector<Parameter*> params_;
  AdamOptions options_;
};

}  // namespace lerp
