#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lerp/formula.hpp"
#include "lerp/kg.hpp"
#include "lerp/lerp_model.hpp"
#include "lerp/rules.hpp"

namespace lerp {

// Randomized self-checks shared by `lerp oracle-check` and the test suites.

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t passed = 0;
  std::vector<std::string> failures;  // first few only
  std::string detail;                 // summary numbers
  double seconds = 0.0;
  bool ok() const { return cases > 0 && passed == cases; }
};

// Entities e0.., raw relations r0..; each ordered pair gets an edge per
// relation with probability `density`.
KnowledgeGraph random_graph(std::mt19937_64& rng, std::size_t n, std::size_t relations, double density);

// Random formula over the graph's relations with at most `max_nodes` nodes.
FormulaPtr random_formula(std::mt19937_64& rng, std::size_t num_relations, std::size_t max_nodes,
                          bool allow_negation, bool allow_or = true);

// Logit row that softmaxes to an exact one-hot vector.
void set_one_hot(Parameter& p, std::size_t row, std::size_t index);

// One-hot LERP and rule parameters vs the discrete oracle: exact path counts
// with true constraints, exact support for negation-free extended rules, and
// per-cell agreement between decoded formulas and soft values.
SuiteResult check_oracle_equivalence(std::size_t graphs, std::uint64_t seed);

// Every learnable logit of the end-to-end training loss vs central differences.
SuiteResult check_gradients(std::size_t instances, std::uint64_t seed, double rel_tol = 1e-3, double abs_floor = 1e-8);

// Instrumented multiply count ≤ K(1+D)n² for n in `sizes`.
SuiteResult check_op_bound(const std::vector<std::size_t>& sizes, std::size_t cases_per_size, std::uint64_t seed);

// LERP values in [0,1] and softmax rows summing to 1 within 1e-12.
SuiteResult check_ranges(std::size_t instances, std::uint64_t seed);

}  // namespace lerp
