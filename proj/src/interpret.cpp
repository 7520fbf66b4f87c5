#include "lerp/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "lerp/checkpoint.hpp"
#include "lerp/errors.hpp"

namespace lerp {

namespace {

struct Argmax {
  std::size_t index = 0;
  double prob = 1.0;
};

// Argmax of a softmaxed logit row and its probability.
Argmax argmax_softmax(const Tensor& logits, std::size_t row) {
  const auto x = logits.row(row);
  Argmax best;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i] > x[best.index]) best.index = i;
  double z = 0.0;
  for (double v : x) z += std::exp(v - x[best.index]);
  best.prob = 1.0 / z;
  return best;
}

}  // namespace

DecodedFunction decode_cell(const LerpParams& params, std::size_t column, std::size_t cell) {
  if (column > params.depth || cell >= params.width) throw ContractViolation("decode_cell: cell out of range");
  DecodedFunction out;
  out.column = column;
  out.cell = cell;
  if (column == 0) {
    out.formula = fml::truth();
    return out;
  }
  const auto& col = params.columns[column - 1];
  auto chained = [&](double w) {
    const Argmax a = argmax_softmax(col.chain.value, cell);
    const DecodedFunction child = decode_cell(params, column - 1, cell);
    out.weight = w * a.prob * child.weight;
    out.formula = fml::chain(static_cast<RelationId>(a.index), child.formula);
  };
  if (column == 1) {
    chained(1.0);
    return out;
  }
  const Argmax op = argmax_softmax(col.op.value, cell);
  switch (static_cast<CellOp>(op.index)) {
    case CellOp::True:
      out.weight = op.prob;
      out.formula = fml::truth();
      break;
    case CellOp::Chaining:
      chained(op.prob);
      break;
    case CellOp::Negation:
    case CellOp::Copy: {
      const DecodedFunction child = decode_cell(params, column - 1, cell);
      out.weight = op.prob * child.weight;
      out.formula = static_cast<CellOp>(op.index) == CellOp::Copy ? child.formula : fml::negate(child.formula);
      break;
    }
    case CellOp::And:
    case CellOp::Or: {
      const bool is_and = static_cast<CellOp>(op.index) == CellOp::And;
      const Argmax partner = argmax_softmax(is_and ? col.merge_and.value : col.merge_or.value, cell);
      const DecodedFunction a = decode_cell(params, column - 1, cell);
      const DecodedFunction b = decode_cell(params, column - 1, partner.index);
      out.weight = op.prob * partner.prob * a.weight * b.weight;
      out.formula = is_and ? fml::conj(a.formula, b.formula) : fml::disj(a.formula, b.formula);
      break;
    }
  }
  return out;
}

DecodedFunction decode_lerp_row(const LerpParams& params, std::size_t row) {
  if (row > params.width) throw ContractViolation("decode_lerp_row: row out of range");
  if (row == params.width) {
    DecodedFunction t;
    t.formula = fml::truth();
    t.cell = row;
    return t;
  }
  return decode_cell(params, params.depth, row);
}

std::vector<DecodedFunction> decode_lerp(const LerpParams& params) {
  const auto identity = static_cast<RelationId>(params.num_relations - 1);
  std::vector<DecodedFunction> all;
  for (std::size_t i = 0; i < params.width; ++i) {
    auto f = decode_cell(params, params.depth, i);
    f.formula = canonicalize(strip_identity(f.formula, identity));
    all.push_back(std::move(f));
  }
  // Stable: equal weights keep cell order.
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.weight > b.weight; });
  std::vector<DecodedFunction> out;
  for (auto& f : all) {
    const bool seen = std::any_of(out.begin(), out.end(), [&](const auto& g) { return *g.formula == *f.formula; });
    if (!seen) out.push_back(std::move(f));
  }
  return out;
}

DecodedRule decode_rule(const Model& model, RelationId target, std::size_t rule) {
  const RuleBank& bank = model.rules.bank(target);
  if (rule >= bank.num_rules()) throw ContractViolation("decode_rule: rule index out of range");
  const auto identity = static_cast<RelationId>(model.lerp.num_relations - 1);
  DecodedRule out;
  out.target = target;
  out.rule = rule;
  auto constraint = [&](const Parameter& logits) {
    const Argmax row = argmax_softmax(logits.value, rule);
    const DecodedFunction f = decode_lerp_row(model.lerp, row.index);
    out.weight *= row.prob * f.weight;
    return canonicalize(strip_identity(f.formula, identity));
  };
  for (std::size_t k = 0; k < bank.hops(); ++k) {
    const Argmax hop = argmax_softmax(bank.hop_logits[k].value, rule);
    out.weight *= hop.prob;
    out.hops.push_back(static_cast<RelationId>(hop.index));
    out.constraints.push_back(constraint(bank.constraint_logits[k]));
  }
  out.head_constraint = bank.head_logits ? constraint(*bank.head_logits) : fml::truth();
  return out;
}

std::string render_rule(const DecodedRule& rule, const RelationNames& names) {
  // Identity hops merge z_{k-1} and z_k, so only real hops introduce variables.
  std::size_t real_hops = 0;
  for (RelationId r : rule.hops) real_hops += names.is_identity(r) ? 0 : 1;
  std::vector<std::string> vars{"x"};
  std::size_t introduced = 0;
  for (RelationId r : rule.hops) {
    if (names.is_identity(r)) {
      vars.push_back(vars.back());
      continue;
    }
    ++introduced;
    vars.push_back(introduced == real_hops ? "y" : bound_variable(introduced));
  }
  const std::string y = vars.back();
  std::size_t next_var = real_hops;  // z₁..z_{real_hops-1} are taken by the chain

  std::vector<std::string> conjuncts;
  auto add_constraint = [&](const FormulaPtr& f, const std::string& var) {
    if (f->kind == FormulaKind::True) return;
    conjuncts.push_back("(" + render(*f, names, var, next_var) + ")");
  };
  add_constraint(rule.head_constraint, vars[0]);
  for (std::size_t k = 0; k < rule.hops.size(); ++k) add_constraint(rule.constraints[k], vars[k + 1]);
  for (std::size_t k = 0; k < rule.hops.size(); ++k)
    if (!names.is_identity(rule.hops[k])) conjuncts.push_back(names.atom(rule.hops[k], vars[k], vars[k + 1]));

  std::string body;
  for (const auto& c : conjuncts) body += (body.empty() ? "" : " ∧ ") + c;
  if (body.empty()) body = "true";
  return body + " ⇒ " + names.atom(rule.target, "x", y);
}

std::map<RelationId, std::vector<DecodedRule>> decode_rules(const Model& model) {
  const RelationNames names(model.relation_names);
  std::map<RelationId, std::vector<DecodedRule>> out;
  for (const auto& bank : model.rules.banks) {
    std::vector<std::pair<DecodedRule, std::string>> decoded;
    for (std::size_t q = 0; q < bank.num_rules(); ++q) {
      auto r = decode_rule(model, bank.target, q);
      auto text = render_rule(r, names);
      decoded.emplace_back(std::move(r), std::move(text));
    }
    std::stable_sort(decoded.begin(), decoded.end(),
                     [](const auto& a, const auto& b) { return a.first.weight > b.first.weight; });
    auto& list = out[bank.target];
    std::vector<std::string> seen;
    for (auto& [r, text] : decoded) {
      if (std::find(seen.begin(), seen.end(), text) != seen.end()) continue;
      seen.push_back(text);
      list.push_back(std::move(r));
    }
  }
  return out;
}

namespace {

std::string weight_text(double w) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", w);
  return buf;
}

}  // namespace

void write_rules(const Model& model, const std::filesystem::path& path, std::size_t top_per_target) {
  const RelationNames names(model.relation_names);
  std::string text;
  text += "# weight = product of the argmax probabilities of every hop, constraint row and LERP choice used\n";
  text += "# format: weight<TAB>rule, grouped by target relation, heaviest first\n";
  for (const auto& [target, rules] : decode_rules(model)) {
    text += "# target " + names.name(target) + "\n";
    std::size_t shown = 0;
    for (const auto& r : rules) {
      if (top_per_target && shown++ >= top_per_target) break;
      text += weight_text(r.weight) + "\t" + render_rule(r, names) + "\n";
    }
  }
  write_file_atomic(path, text);
}

void write_functions(const Model& model, const std::filesystem::path& path) {
  const RelationNames names(model.relation_names);
  std::string text;
  text += "# weight = product of the argmax probabilities along the decoded cell\n";
  text += "# format: weight<TAB>function of e, duplicates removed, heaviest first\n";
  for (const auto& f : decode_lerp(model.lerp))
    text += weight_text(f.weight) + "\t" + render(*f.formula, names, "e") + "\n";
  write_file_atomic(path, text);
}

void dump_lerp_vectors(Model& model, const KnowledgeGraph& graph, const std::filesystem::path& path) {
  if (model.graph_fingerprint != graph.fingerprint())
    throw ContractViolation("model fingerprint does not match the dataset");
  Tape tape;
  const LerpMatrix lerp = forward_lerp(model.lerp, graph, tape, model.lerp_options());
  const Tensor& values = tape.value(lerp.values);
  std::string text;
  char buf[32];
  for (EntityId e = 0; e < graph.num_entities(); ++e) {
    text += graph.entity_name(e);
    for (double v : values.row(e)) {
      std::snprintf(buf, sizeof buf, "\t%.9g", v);
      text += buf;
    }
    text += "\n";
  }
  write_file_atomic(path, text);
}

}  // namespace lerp
