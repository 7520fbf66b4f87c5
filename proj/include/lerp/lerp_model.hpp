#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lerp/autodiff.hpp"
#include "lerp/kg.hpp"

namespace lerp {

// The six ways a cell builds its function from the previous column, in mixture order.
enum class CellOp : std::uint8_t { True = 0, Chaining = 1, Negation = 2, Copy = 3, And = 4, Or = 5 };
inline constexpr std::size_t kNumCellOps = 6;

const char* to_string(CellOp op);

// Logits for one column j >= 1 of the intermediate-function grid.
// Column 1 only chains, so it carries no operator or merge logits.
struct LerpColumn {
  Parameter chain;      // m × |relations|
  Parameter op;         // m × 6          (empty for column 1)
  Parameter merge_and;  // m × m          (empty for column 1)
  Parameter merge_or;   // m × m          (empty for column 1)
};

struct LerpParams {
  LerpParams() = default;
  LerpParams(std::size_t depth, std::size_t width, std::size_t num_relations);

  std::size_t depth = 0;  // T
  std::size_t width = 0;  // m
  std::size_t num_relations = 0;
  std::vector<LerpColumn> columns;  // columns[j - 1] for j = 1..T

  // Zero logits plus N(0, sigma) noise.
  void initialize(std::uint64_t seed, double sigma = 0.01);
  std::vector<Parameter*> parameters();
};

// Entity-major soft truth table: value is n × (m + 1), column i holds L_i over
// all entities and the last column is the constant-true function.
struct LerpMatrix {
  Var values;
  std::size_t width = 0;  // m (the true column is extra)
};

struct LerpOptions {
  // Apply 1 - exp(-x) to the chaining output. Off gives the unclamped variant.
  bool clamp_chaining = true;
};

LerpMatrix forward_lerp(LerpParams& params, const KnowledgeGraph& graph, Tape& tape, LerpOptions options = {});

std::size_t count_learnable_scalars(const LerpParams& params);

}  // namespace lerp
