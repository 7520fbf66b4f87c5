#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lerp/formula.hpp"
#include "lerp/lerp_model.hpp"
#include "lerp/trainer.hpp"

namespace lerp {

struct DecodedFunction {
  double weight = 1.0;  // product of the argmax probabilities used
  FormulaPtr formula;
  std::size_t column = 0;
  std::size_t cell = 0;
};

// Hard decoding of cell i in column j (column 0 is the true function). Copy
// steps are skipped; identity chains are kept so the AST mirrors the grid.
DecodedFunction decode_cell(const LerpParams& params, std::size_t column, std::size_t cell);

// Decodes every cell of column T, drops identity chains, merges duplicates
// (up to ∧/∨ commutativity) keeping the larger weight, sorts by weight.
std::vector<DecodedFunction> decode_lerp(const LerpParams& params);

struct DecodedRule {
  RelationId target = 0;
  std::size_t rule = 0;
  std::vector<RelationId> hops;            // K entries, identity hops included
  std::vector<FormulaPtr> constraints;     // K entries, constraint on z_k (z_K = y)
  FormulaPtr head_constraint;              // constraint on x (true without constrain_head)
  double weight = 1.0;
};

// Row `row` of the extended LERP matrix as a formula: rows < m are column-T
// cells, row m is the constant true function.
DecodedFunction decode_lerp_row(const LerpParams& params, std::size_t row);

DecodedRule decode_rule(const Model& model, RelationId target, std::size_t rule);
// All rules of all targets, each target's list sorted by weight (duplicates
// with identical rendering merged, keeping the larger weight).
std::map<RelationId, std::vector<DecodedRule>> decode_rules(const Model& model);

// e.g. "(∄z₂: sister(z₂,x)) ∧ mother(z₁,x) ∧ son(y,z₁) ⇒ brother(y,x)"
std::string render_rule(const DecodedRule& rule, const RelationNames& names);

// `weight<TAB>rule` lines grouped by target; `#` lines are comments.
void write_rules(const Model& model, const std::filesystem::path& path, std::size_t top_per_target = 0);
void write_functions(const Model& model, const std::filesystem::path& path);

// One line per entity: name then the m+1 soft truth values, tab-separated.
void dump_lerp_vectors(Model& model, const KnowledgeGraph& graph, const std::filesystem::path& path);

}  // namespace lerp
