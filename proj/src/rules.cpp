#include "lerp/rules.hpp"

#include <random>
#include <string>

#include "lerp/errors.hpp"

namespace lerp {

RuleBank::RuleBank(RelationId target_, std::size_t num_rules, std::size_t hops, std::size_t num_relations,
                   std::size_t lerp_rows, bool constrain_head)
    : target(target_) {
  if (num_rules == 0 || hops == 0) throw ContractViolation("a rule bank needs at least one rule and one hop");
  const auto tag = "rules." + std::to_string(target) + ".";
  for (std::size_t k = 1; k <= hops; ++k) {
    hop_logits.emplace_back(tag + "hop" + std::to_string(k), num_rules, num_relations);
    constraint_logits.emplace_back(tag + "rho" + std::to_string(k), num_rules, lerp_rows);
  }
  if (constrain_head) head_logits.emplace(tag + "rho0", num_rules, lerp_rows);
}

std::vector<Parameter*> RuleBank::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t k = 0; k < hop_logits.size(); ++k) {
    out.push_back(&hop_logits[k]);
    out.push_back(&constraint_logits[k]);
  }
  if (head_logits) out.push_back(&*head_logits);
  return out;
}

RuleSet RuleSet::create(const KnowledgeGraph& graph, std::size_t rules_per_relation, std::size_t hops,
                        std::size_t lerp_width, bool constrain_head) {
  RuleSet set;
  const std::size_t targets = 2 * graph.num_raw_relations();
  set.banks.reserve(targets);
  for (RelationId r = 0; r < targets; ++r)
    set.banks.emplace_back(r, rules_per_relation, hops, graph.num_relations(), lerp_width + 1, constrain_head);
  return set;
}

void RuleSet::initialize(std::uint64_t seed, double sigma) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (Parameter* p : parameters())
    for (auto& x : p->value.values()) x = noise(rng);
}

RuleBank& RuleSet::bank(RelationId target) {
  if (!has_target(target)) throw QueryError("no rules for relation id " + std::to_string(target));
  return banks[target];
}

const RuleBank& RuleSet::bank(RelationId target) const {
  if (!has_target(target)) throw QueryError("no rules for relation id " + std::to_string(target));
  return banks[target];
}

std::vector<Parameter*> RuleSet::parameters() {
  std::vector<Parameter*> out;
  for (auto& b : banks)
    for (Parameter* p : b.parameters()) out.push_back(p);
  return out;
}

std::size_t RuleSet::num_scalars() const {
  std::size_t total = 0;
  for (const auto& b : banks) {
    for (const auto& p : b.hop_logits) total += p.value.size();
    for (const auto& p : b.constraint_logits) total += p.value.size();
    if (b.head_logits) total += b.head_logits->value.size();
  }
  return total;
}

CompiledBank compile_bank(RuleBank& bank, const LerpMatrix& lerp, Tape& tape) {
  if (tape.value(lerp.values).cols() != bank.constraint_logits.front().value.cols())
    throw ContractViolation("compile_bank: constraint logits do not match LERP width");
  CompiledBank out;
  for (std::size_t k = 0; k < bank.hops(); ++k) {
    out.hops.push_back(ad::transpose(tape, ad::softmax_rows(tape, tape.parameter(bank.hop_logits[k]))));
    const Var rho = ad::softmax_rows(tape, tape.parameter(bank.constraint_logits[k]));
    out.constraints.push_back(ad::matmul_nt(tape, lerp.values, rho));
  }
  if (bank.head_logits) {
    const Var rho = ad::softmax_rows(tape, tape.parameter(*bank.head_logits));
    out.head = ad::matmul_nt(tape, lerp.values, rho);
  }
  return out;
}

CompiledBank bind_bank(const CompiledBank& src, const Tape& from, Tape& to, bool requires_grad) {
  auto bind = [&](Var v) { return requires_grad ? to.input(from.value_ptr(v)) : to.constant(from.value_ptr(v)); };
  CompiledBank out;
  for (Var v : src.hops) out.hops.push_back(bind(v));
  for (Var v : src.constraints) out.constraints.push_back(bind(v));
  if (src.head) out.head = bind(*src.head);
  return out;
}

void fold_gradients(const CompiledBank& bound, Tape& to, const CompiledBank& src, Tape& from) {
  for (std::size_t k = 0; k < src.hops.size(); ++k) {
    from.add_grad(src.hops[k], to.grad(bound.hops[k]));
    from.add_grad(src.constraints[k], to.grad(bound.constraints[k]));
  }
  if (src.head) from.add_grad(*src.head, to.grad(*bound.head));
}

Var evaluate_rules(const CompiledBank& bank, const KnowledgeGraph& graph, EntityId head, Tape& tape,
                   std::span<const MaskedEdge> masked) {
  const std::size_t n = graph.num_entities();
  if (head >= n) throw QueryError("entity id out of range: " + std::to_string(head));
  const std::size_t rules = tape.value(bank.hops.front()).cols();

  Var state;
  if (bank.head) {
    state = ad::scatter_row(tape, ad::select_row(tape, *bank.head, head), n, head);
  } else {
    Tensor start(n, rules);
    for (auto& x : start.row(head)) x = 1.0;
    state = tape.constant(std::move(start));
  }
  for (std::size_t k = 0; k < bank.hops.size(); ++k) {
    state = ad::weighted_spmv(tape, state, bank.hops[k], graph, masked);
    state = ad::hadamard(tape, state, bank.constraints[k]);
  }
  return state;
}

Var evaluate_rule(RuleBank& bank, std::size_t rule, const LerpMatrix& lerp, const KnowledgeGraph& graph,
                  EntityId head, Tape& tape) {
  if (rule >= bank.num_rules()) throw ContractViolation("evaluate_rule: rule index out of range");
  CompiledBank single;
  auto pick = [&](Parameter& p) { return ad::softmax_rows(tape, ad::select_row(tape, tape.parameter(p), rule)); };
  for (std::size_t k = 0; k < bank.hops(); ++k) {
    single.hops.push_back(ad::transpose(tape, pick(bank.hop_logits[k])));
    single.constraints.push_back(ad::matmul_nt(tape, lerp.values, pick(bank.constraint_logits[k])));
  }
  if (bank.head_logits) single.head = ad::matmul_nt(tape, lerp.values, pick(*bank.head_logits));
  return evaluate_rules(single, graph, head, tape);
}

Var predict(RuleSet& rules, const LerpMatrix& lerp, const KnowledgeGraph& graph, EntityId head, RelationId target,
            Tape& tape) {
  if (head >= graph.num_entities()) throw QueryError("unknown entity id " + std::to_string(head));
  if (!rules.has_target(target)) throw QueryError("unknown target relation id " + std::to_string(target));
  const CompiledBank compiled = compile_bank(rules.bank(target), lerp, tape);
  return ad::sum_columns(tape, evaluate_rules(compiled, graph, head, tape));
}

}  // namespace lerp
