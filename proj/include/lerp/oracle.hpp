#pragma once

#include <cstdint>
#include <vector>

#include "lerp/formula.hpp"
#include "lerp/kg.hpp"

namespace lerp {

// Truth of f at every entity, memoized per (node, entity).
std::vector<bool> eval_tree_function_all(const Formula& f, const KnowledgeGraph& graph);
bool eval_tree_function(const Formula& f, const KnowledgeGraph& graph, EntityId e);
// Unmemoized reference that re-enumerates witnesses at every node.
bool eval_tree_function_naive(const Formula& f, const KnowledgeGraph& graph, EntityId e);

// Number of relation paths x -> ... -> y following `chain`, for every y (DFS).
std::vector<std::uint64_t> count_paths(const KnowledgeGraph& graph, const std::vector<RelationId>& chain, EntityId x);

// y is true iff some assignment z₁..z_{K-1} satisfies every hop edge and every
// position constraint (constraints[k] on z_{k+1}, the last on y) plus the
// optional head constraint on x. Enumerates all n^(K-1) assignments per y.
std::vector<bool> eval_extended_rule(const std::vector<RelationId>& chain, const std::vector<FormulaPtr>& constraints,
                                     const KnowledgeGraph& graph, EntityId x, const FormulaPtr& head_constraint = nullptr);

struct RuleSpec {
  std::vector<RelationId> chain;
  std::vector<FormulaPtr> constraints;  // one per hop; null or True means unconstrained
  std::size_t D = 0;                    // declared per-function operation budget
};

struct OpCounter {
  std::uint64_t count = 0;  // scalar multiply-accumulates
  std::size_t n = 0;
  std::size_t K = 0;
  std::size_t D = 0;
  std::uint64_t bound() const { return static_cast<std::uint64_t>(K) * (1 + D) * n * n; }
  bool within_bound() const { return count <= bound(); }
};

// Left-to-right soft evaluation of the rule from one-hot(x), counting scalar
// operations: a chaining step costs one MAC per edge leaving a nonzero entry,
// every other vector op costs n. Unconstrained positions cost nothing.
// Throws ContractViolation if a constraint has more than D nodes.
OpCounter measure_ops(const KnowledgeGraph& graph, const RuleSpec& spec, EntityId x);

}  // namespace lerp
