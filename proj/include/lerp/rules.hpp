#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lerp/autodiff.hpp"
#include "lerp/kg.hpp"
#include "lerp/lerp_model.hpp"

namespace lerp {

// All rules attached to one target relation, stored as stacked logits so the
// whole bank is evaluated as one n×R state (column q is rule q).
struct RuleBank {
  RuleBank() = default;
  RuleBank(RelationId target, std::size_t num_rules, std::size_t hops, std::size_t num_relations,
           std::size_t lerp_rows, bool constrain_head);

  RelationId target = 0;
  std::vector<Parameter> hop_logits;         // K × (R × |relations|)
  std::vector<Parameter> constraint_logits;  // K × (R × (m+1)), position k constrains z_k (z_K = y)
  std::optional<Parameter> head_logits;      // R × (m+1), constraint on x

  std::size_t num_rules() const { return hop_logits.empty() ? 0 : hop_logits.front().value.rows(); }
  std::size_t hops() const { return hop_logits.size(); }
  std::vector<Parameter*> parameters();
};

// One bank per query relation: raw relations first, then their reverses.
struct RuleSet {
  std::vector<RuleBank> banks;

  static RuleSet create(const KnowledgeGraph& graph, std::size_t rules_per_relation, std::size_t hops,
                        std::size_t lerp_width, bool constrain_head);
  void initialize(std::uint64_t seed, double sigma = 0.01);
  bool has_target(RelationId r) const { return r < banks.size(); }
  RuleBank& bank(RelationId target);
  const RuleBank& bank(RelationId target) const;
  std::vector<Parameter*> parameters();
  std::size_t num_scalars() const;
};

// Softmaxed selections for a bank: hop weights laid out |relations|×R and
// constraint vectors Lᵀρ laid out n×R.
struct CompiledBank {
  std::vector<Var> hops;
  std::vector<Var> constraints;
  std::optional<Var> head;
};

CompiledBank compile_bank(RuleBank& bank, const LerpMatrix& lerp, Tape& tape);

// Re-binds the compiled values of `src` (living on `from`) as leaves of `to`
// without copying. With requires_grad the leaves collect gradients that the
// caller can fold back into `from` with fold_gradients().
CompiledBank bind_bank(const CompiledBank& src, const Tape& from, Tape& to, bool requires_grad);
void fold_gradients(const CompiledBank& bound, Tape& to, const CompiledBank& src, Tape& from);

// Per-rule scores, n×R: column q is t̂ for rule q starting from one-hot(head).
Var evaluate_rules(const CompiledBank& bank, const KnowledgeGraph& graph, EntityId head, Tape& tape,
                   std::span<const MaskedEdge> masked = {});

// t̂ for a single rule, n×1.
Var evaluate_rule(RuleBank& bank, std::size_t rule, const LerpMatrix& lerp, const KnowledgeGraph& graph,
                  EntityId head, Tape& tape);

// Σ over the rules of the target relation, n×1. Throws QueryError for an
// unknown entity or relation.
Var predict(RuleSet& rules, const LerpMatrix& lerp, const KnowledgeGraph& graph, EntityId head,
            RelationId target, Tape& tape);

}  // namespace lerp
