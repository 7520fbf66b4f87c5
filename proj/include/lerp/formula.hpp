#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lerp/kg.hpp"

namespace lerp {

// Tree-like logical function with one free variable.
enum class FormulaKind : std::uint8_t { True = 0, Chain = 1, Not = 2, And = 3, Or = 4 };

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  FormulaKind kind = FormulaKind::True;
  RelationId relation = 0;  // Chain only
  FormulaPtr left;          // Chain/Not child, And/Or left operand
  FormulaPtr right;         // And/Or right operand
};

namespace fml {
FormulaPtr truth();
// Chain(r, f)(e) holds iff some w has f(w) and an r-edge w -> e.
FormulaPtr chain(RelationId r, FormulaPtr child);
FormulaPtr negate(FormulaPtr child);
FormulaPtr conj(FormulaPtr a, FormulaPtr b);
FormulaPtr disj(FormulaPtr a, FormulaPtr b);
}  // namespace fml

// Number of AST nodes.
std::size_t node_count(const Formula& f);
std::size_t depth(const Formula& f);
bool has_negation(const Formula& f);

// Total order on structure; 0 means equal.
int compare(const Formula& a, const Formula& b);
inline bool operator==(const Formula& a, const Formula& b) { return compare(a, b) == 0; }

// Sorts And/Or operands so that commuted formulas compare equal.
FormulaPtr canonicalize(const FormulaPtr& f);
// Drops Chain(identity, f) wrappers, which do not change the function.
FormulaPtr strip_identity(const FormulaPtr& f, RelationId identity);

// Relation names in graph layout: raw [0, R), reverses [R, 2R), identity 2R.
class RelationNames {
 public:
  explicit RelationNames(std::vector<std::string> names);
  std::size_t num_raw() const { return num_raw_; }
  std::size_t size() const { return names_.size(); }
  bool is_reverse(RelationId r) const { return r >= num_raw_ && r < 2 * num_raw_; }
  bool is_identity(RelationId r) const { return r == 2 * num_raw_; }
  RelationId base_of(RelationId r) const { return is_reverse(r) ? r - static_cast<RelationId>(num_raw_) : r; }
  RelationId reverse_of(RelationId r) const;
  const std::string& name(RelationId r) const { return names_.at(r); }
  // Atom r(a, b) written with raw relation names only.
  std::string atom(RelationId r, std::string_view a, std::string_view b) const;

 private:
  std::vector<std::string> names_;
  std::size_t num_raw_ = 0;
};

// "z" with a subscript index, e.g. z₃.
std::string bound_variable(std::size_t index);

// Renders f at free variable `var`. Bound variables are z_{next_var}, z_{next_var+1}, ...;
// next_var is advanced past the ones used.
std::string render(const Formula& f, const RelationNames& names, std::string_view var, std::size_t& next_var);
std::string render(const Formula& f, const RelationNames& names, std::string_view var = "e");

}  // namespace lerp
