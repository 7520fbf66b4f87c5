#include "lerp/formula.hpp"

#include <algorithm>

#include "lerp/errors.hpp"

namespace lerp {

namespace fml {

FormulaPtr truth() {
  static const FormulaPtr t = std::make_shared<const Formula>();
  return t;
}

FormulaPtr chain(RelationId r, FormulaPtr child) {
  if (!child) throw ContractViolation("chain: null child");
  return std::make_shared<const Formula>(Formula{FormulaKind::Chain, r, std::move(child), nullptr});
}

FormulaPtr negate(FormulaPtr child) {
  if (!child) throw ContractViolation("negate: null child");
  return std::make_shared<const Formula>(Formula{FormulaKind::Not, 0, std::move(child), nullptr});
}

FormulaPtr conj(FormulaPtr a, FormulaPtr b) {
  if (!a || !b) throw ContractViolation("conj: null operand");
  return std::make_shared<const Formula>(Formula{FormulaKind::And, 0, std::move(a), std::move(b)});
}

FormulaPtr disj(FormulaPtr a, FormulaPtr b) {
  if (!a || !b) throw ContractViolation("disj: null operand");
  return std::make_shared<const Formula>(Formula{FormulaKind::Or, 0, std::move(a), std::move(b)});
}

}  // namespace fml

std::size_t node_count(const Formula& f) {
  std::size_t n = 1;
  if (f.left) n += node_count(*f.left);
  if (f.right) n += node_count(*f.right);
  return n;
}

std::size_t depth(const Formula& f) {
  std::size_t d = 0;
  if (f.left) d = std::max(d, depth(*f.left));
  if (f.right) d = std::max(d, depth(*f.right));
  return d + 1;
}

bool has_negation(const Formula& f) {
  if (f.kind == FormulaKind::Not) return true;
  return (f.left && has_negation(*f.left)) || (f.right && has_negation(*f.right));
}

int compare(const Formula& a, const Formula& b) {
  if (&a == &b) return 0;
  if (a.kind != b.kind) return a.kind < b.kind ? -1 : 1;
  if (a.kind == FormulaKind::Chain && a.relation != b.relation) return a.relation < b.relation ? -1 : 1;
  if (a.left && b.left)
    if (int c = compare(*a.left, *b.left)) return c;
  if (a.right && b.right) return compare(*a.right, *b.right);
  return 0;
}

FormulaPtr canonicalize(const FormulaPtr& f) {
  switch (f->kind) {
    case FormulaKind::True: return f;
    case FormulaKind::Chain: return fml::chain(f->relation, canonicalize(f->left));
    case FormulaKind::Not: return fml::negate(canonicalize(f->left));
    case FormulaKind::And:
    case FormulaKind::Or: {
      auto a = canonicalize(f->left);
      auto b = canonicalize(f->right);
      if (compare(*b, *a) < 0) std::swap(a, b);
      return f->kind == FormulaKind::And ? fml::conj(a, b) : fml::disj(a, b);
    }
  }
  return f;
}

FormulaPtr strip_identity(const FormulaPtr& f, RelationId identity) {
  switch (f->kind) {
    case FormulaKind::True: return f;
    case FormulaKind::Chain:
      if (f->relation == identity) return strip_identity(f->left, identity);
      return fml::chain(f->relation, strip_identity(f->left, identity));
    case FormulaKind::Not: return fml::negate(strip_identity(f->left, identity));
    case FormulaKind::And: return fml::conj(strip_identity(f->left, identity), strip_identity(f->right, identity));
    case FormulaKind::Or: return fml::disj(strip_identity(f->left, identity), strip_identity(f->right, identity));
  }
  return f;
}

RelationNames::RelationNames(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() % 2 != 1) throw ContractViolation("relation names must be raw, reverse, identity");
  num_raw_ = (names_.size() - 1) / 2;
}

RelationId RelationNames::reverse_of(RelationId r) const {
  if (is_identity(r)) return r;
  return is_reverse(r) ? r - static_cast<RelationId>(num_raw_) : r + static_cast<RelationId>(num_raw_);
}

std::string RelationNames::atom(RelationId r, std::string_view a, std::string_view b) const {
  if (r >= names_.size()) throw ContractViolation("unknown relation id " + std::to_string(r));
  if (is_identity(r)) return std::string(a) + " = " + std::string(b);
  const auto& base = names_[base_of(r)];
  if (is_reverse(r)) std::swap(a, b);
  return base + "(" + std::string(a) + "," + std::string(b) + ")";
}

std::string bound_variable(std::size_t index) {
  static const char* digits[] = {"₀", "₁", "₂", "₃", "₄", "₅", "₆", "₇", "₈", "₉"};
  std::string sub;
  do {
    sub.insert(0, digits[index % 10]);
    index /= 10;
  } while (index);
  return "z" + sub;
}

namespace {

bool needs_parens(const Formula& f) { return f.kind != FormulaKind::True; }

std::string wrap(const std::string& s, const Formula& f) { return needs_parens(f) ? "(" + s + ")" : s; }

// Body of ∃/∄ for Chain(r, child) at `var`, binding a fresh variable.
std::string chain_body(const Formula& f, const RelationNames& names, std::string_view var, std::size_t& next_var) {
  const std::string z = bound_variable(next_var++);
  std::string text = z + ": ";
  if (f.left->kind != FormulaKind::True) text += wrap(render(*f.left, names, z, next_var), *f.left) + " ∧ ";
  text += names.atom(f.relation, z, var);
  return text;
}

}  // namespace

std::string render(const Formula& f, const RelationNames& names, std::string_view var, std::size_t& next_var) {
  switch (f.kind) {
    case FormulaKind::True: return "true";
    case FormulaKind::Chain:
      if (names.is_identity(f.relation)) return render(*f.left, names, var, next_var);
      return "∃" + chain_body(f, names, var, next_var);
    case FormulaKind::Not:
      if (f.left->kind == FormulaKind::Chain && !names.is_identity(f.left->relation))
        return "∄" + chain_body(*f.left, names, var, next_var);
      if (f.left->kind == FormulaKind::True) return "¬true";
      return "¬(" + render(*f.left, names, var, next_var) + ")";
    case FormulaKind::And:
    case FormulaKind::Or: {
      const std::string a = render(*f.left, names, var, next_var);
      const std::string b = render(*f.right, names, var, next_var);
      const char* op = f.kind == FormulaKind::And ? " ∧ " : " ∨ ";
      return wrap(a, *f.left) + op + wrap(b, *f.right);
    }
  }
  return "?";
}

std::string render(const Formula& f, const RelationNames& names, std::string_view var) {
  std::size_t next = 1;
  return render(f, names, var, next);
}

}  // namespace lerp
