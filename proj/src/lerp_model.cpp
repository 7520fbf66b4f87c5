#include "lerp/lerp_model.hpp"

#include <random>
#include <string>

#include "lerp/errors.hpp"

namespace lerp {

const char* to_string(CellOp op) {
  switch (op) {
    case CellOp::True: return "true";
    case CellOp::Chaining: return "chaining";
    case CellOp::Negation: return "negation";
    case CellOp::Copy: return "copy";
    case CellOp::And: return "and";
    case CellOp::Or: return "or";
  }
  return "?";
}

LerpParams::LerpParams(std::size_t depth_, std::size_t width_, std::size_t num_relations_)
    : depth(depth_), width(width_), num_relations(num_relations_) {
  if (width == 0) throw ContractViolation("LERP width must be at least 1");
  columns.resize(depth);
  for (std::size_t j = 1; j <= depth; ++j) {
    auto& col = columns[j - 1];
    const auto tag = "lerp." + std::to_string(j) + ".";
    col.chain = Parameter(tag + "chain", width, num_relations);
    if (j >= 2) {
      col.op = Parameter(tag + "op", width, kNumCellOps);
      col.merge_and = Parameter(tag + "and", width, width);
      col.merge_or = Parameter(tag + "or", width, width);
    }
  }
}

void LerpParams::initialize(std::uint64_t seed, double sigma) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (Parameter* p : parameters()) {
    for (auto& x : p->value.values()) x = noise(rng);
  }
}

std::vector<Parameter*> LerpParams::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t j = 1; j <= depth; ++j) {
    auto& col = columns[j - 1];
    out.push_back(&col.chain);
    if (j >= 2) {
      out.push_back(&col.op);
      out.push_back(&col.merge_and);
      out.push_back(&col.merge_or);
    }
  }
  return out;
}

std::size_t count_learnable_scalars(const LerpParams& params) {
  std::size_t total = 0;
  for (const auto& col : params.columns)
    total += col.chain.value.size() + col.op.value.size() + col.merge_and.value.size() + col.merge_or.value.size();
  return total;
}

LerpMatrix forward_lerp(LerpParams& params, const KnowledgeGraph& graph, Tape& tape, LerpOptions options) {
  const std::size_t n = graph.num_entities();
  const std::size_t m = params.width;
  if (params.num_relations != graph.num_relations())
    throw ContractViolation("forward_lerp: parameters were built for a different relation count");

  const Var ones = tape.constant(Tensor(n, m, 1.0));
  Var prev = ones;  // column 0: every cell is the true function

  for (std::size_t j = 1; j <= params.depth; ++j) {
    auto& col = params.columns[j - 1];
    // out[e, i] = Σ_r α[i, r] Σ_w prev[w, i] A_r[w, e]
    const Var alpha = ad::transpose(tape, ad::softmax_rows(tape, tape.parameter(col.chain)));
    Var chained = ad::weighted_spmv(tape, prev, alpha, graph);
    if (options.clamp_chaining) chained = ad::clamp_soft(tape, chained);
    if (j == 1) {
      prev = chained;
      continue;
    }

    const Var negated = ad::sub_from_one(tape, prev);
    const Var beta_and = ad::softmax_rows(tape, tape.parameter(col.merge_and));
    const Var beta_or = ad::softmax_rows(tape, tape.parameter(col.merge_or));
    // partner[e, i] = Σ_i' β[i, i'] prev[e, i']
    const Var and_partner = ad::matmul_nt(tape, prev, beta_and);
    const Var merged_and = ad::hadamard(tape, prev, and_partner);
    const Var or_partner = ad::matmul_nt(tape, prev, beta_or);
    const Var merged_or =
        ad::sub_from_one(tape, ad::hadamard(tape, negated, ad::sub_from_one(tape, or_partner)));

    const Var op_probs = ad::softmax_rows(tape, tape.parameter(col.op));
    const std::array<Var, kNumCellOps> parts{ones, chained, negated, prev, merged_and, merged_or};
    prev = ad::mix(tape, op_probs, parts);
    // A convex mix of [0,1] values can land one ulp above 1.
    if (options.clamp_chaining) prev = ad::snap_unit(tape, prev);
  }

  return LerpMatrix{ad::append_ones_column(tape, prev), m};
}

}  // namespace lerp
