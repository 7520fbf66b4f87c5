#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"
#include "lerp/checks.hpp"
#include "lerp/errors.hpp"
#include "lerp/oracle.hpp"
#include "lerp/rules.hpp"

using namespace lerp;
using lerp::test::column;
using lerp::test::make_graph;

namespace {

struct Fixture {
  KnowledgeGraph graph;
  LerpParams lerp;
  Tape tape;
  LerpMatrix L;
};

}  // namespace

TEST(EvaluateRule, SingleHopWithoutConstraint) {
  const auto g = make_graph({"a", "b", "c"}, {"r"}, {{"a", "r", "b"}});
  LerpParams lerp(0, 2, g.num_relations());
  Tape t;
  const auto L = forward_lerp(lerp, g, t);
  RuleBank bank(0, 1, 1, g.num_relations(), 3, false);
  set_one_hot(bank.hop_logits[0], 0, 0);
  set_one_hot(bank.constraint_logits[0], 0, 2);
  EXPECT_EQ(column(t.value(evaluate_rule(bank, 0, L, g, 0, t)), 0), (std::vector<double>{0, 1, 0}));
}

TEST(EvaluateRule, ZeroConstraintAnnihilates) {
  const auto g = make_graph({"a", "b", "c"}, {"r", "s"}, {{"a", "r", "b"}, {"b", "r", "c"}, {"c", "s", "a"}});
  LerpParams lerp(1, 1, g.num_relations());
  set_one_hot(lerp.columns[0].chain, 0, 1);  // true exactly where an incoming s edge exists: only a
  Tape t;
  const auto L = forward_lerp(lerp, g, t);
  ASSERT_EQ(t.value(L.values)(1, 0), 0.0);
  RuleBank bank(0, 1, 2, g.num_relations(), 2, false);
  set_one_hot(bank.hop_logits[0], 0, 0);
  set_one_hot(bank.hop_logits[1], 0, 0);
  set_one_hot(bank.constraint_logits[0], 0, 0);
  set_one_hot(bank.constraint_logits[1], 0, 1);
  for (double v : t.value(evaluate_rule(bank, 0, L, g, 0, t)).values()) EXPECT_EQ(v, 0.0);
}

TEST(EvaluateRule, BrotherRuleRanksBrotherAboveSister) {
  // m is the mother of a, b and c; b is a son.
  const auto g = make_graph({"m", "a", "b", "c", "f"}, {"mother", "is_son_of"},
                            {{"m", "mother", "a"}, {"m", "mother", "b"}, {"m", "mother", "c"},
                             {"b", "is_son_of", "m"}, {"b", "is_son_of", "f"}});
  const RelationId mother = 0, son = 1;
  LerpParams lerp(1, 1, g.num_relations());
  // Cell 0 = ∃z: is_son_of(e, z), i.e. Chain(is_son_of′, True).
  set_one_hot(lerp.columns[0].chain, 0, g.reverse_of(son));
  Tape t;
  const auto L = forward_lerp(lerp, g, t);
  RuleBank bank(0, 1, 2, g.num_relations(), 2, false);
  set_one_hot(bank.hop_logits[0], 0, g.reverse_of(mother));
  set_one_hot(bank.hop_logits[1], 0, mother);
  set_one_hot(bank.constraint_logits[0], 0, 1);
  set_one_hot(bank.constraint_logits[1], 0, 0);
  const auto s = column(t.value(evaluate_rule(bank, 0, L, g, 1, t)), 0);
  EXPECT_GT(s[2], s[3]);
  EXPECT_EQ(s[3], 0.0);

  const auto truth = eval_extended_rule({g.reverse_of(mother), mother},
                                        {fml::truth(), fml::chain(g.reverse_of(son), fml::truth())}, g, 1);
  for (EntityId y = 0; y < 5; ++y) EXPECT_EQ(s[y] > 0.0, truth[y]) << y;
}

TEST(Predict, SumsRulesAndIsPermutationInvariant) {
  std::mt19937_64 rng(2);
  const auto g = random_graph(rng, 9, 2, 0.3);
  auto rules = RuleSet::create(g, 3, 2, 4, false);
  rules.initialize(5, 1.0);
  LerpParams lerp(2, 4, g.num_relations());
  lerp.initialize(6, 1.0);
  Tape t;
  const auto L = forward_lerp(lerp, g, t);
  const Tensor total = t.value(predict(rules, L, g, 3, 1, t));
  std::vector<double> sum(9, 0.0);
  for (std::size_t q = 0; q < 3; ++q) {
    const auto s = column(t.value(evaluate_rule(rules.bank(1), q, L, g, 3, t)), 0);
    for (std::size_t e = 0; e < 9; ++e) sum[e] += s[e];
  }
  for (std::size_t e = 0; e < 9; ++e) EXPECT_NEAR(total[e], sum[e], 1e-14);

  // Swap rule 0 and rule 2 everywhere.
  auto swapped = rules;
  for (Parameter* p : swapped.bank(1).parameters()) {
    auto r0 = p->value.row(0), r2 = p->value.row(2);
    std::swap_ranges(r0.begin(), r0.end(), r2.begin());
  }
  const Tensor again = t.value(predict(swapped, L, g, 3, 1, t));
  for (std::size_t e = 0; e < 9; ++e) EXPECT_NEAR(again[e], total[e], 1e-14);
}

TEST(Predict, SingleRuleAndDuplicatedRule) {
  std::mt19937_64 rng(12);
  const auto g = random_graph(rng, 7, 2, 0.35);
  LerpParams lerp(1, 2, g.num_relations());
  lerp.initialize(1, 1.0);
  auto one = RuleSet::create(g, 1, 2, 2, false);
  one.initialize(2, 1.0);
  auto two = RuleSet::create(g, 2, 2, 2, false);
  for (std::size_t b = 0; b < two.banks.size(); ++b) {
    auto src = one.banks[b].parameters();
    auto dst = two.banks[b].parameters();
    for (std::size_t i = 0; i < src.size(); ++i)
      for (std::size_t q = 0; q < 2; ++q) {
        auto row = dst[i]->value.row(q);
        auto from = src[i]->value.row(0);
        std::copy(from.begin(), from.end(), row.begin());
      }
  }
  Tape t;
  const auto L = forward_lerp(lerp, g, t);
  const Tensor single = t.value(predict(one, L, g, 0, 0, t));
  const Tensor rule = t.value(evaluate_rule(one.bank(0), 0, L, g, 0, t));
  EXPECT_EQ(single, rule);
  const Tensor doubled = t.value(predict(two, L, g, 0, 0, t));
  for (std::size_t e = 0; e < 7; ++e) EXPECT_EQ(doubled[e], 2.0 * single[e]);
}

TEST(Predict, UnknownIdsAreQueryErrors) {
  const auto g = make_graph({"a", "b"}, {"r"}, {{"a", "r", "b"}});
  auto rules = RuleSet::create(g, 1, 1, 1, false);
  LerpParams lerp(0, 1, g.num_relations());
  Tape t;
  const auto L = forward_lerp(lerp, g, t);
  EXPECT_THROW(predict(rules, L, g, 5, 0, t), QueryError);
  EXPECT_THROW(predict(rules, L, g, 0, 2, t), QueryError);  // identity is not a target
  EXPECT_NO_THROW(predict(rules, L, g, 0, 1, t));           // reverse targets exist
}

TEST(EvaluateRules, ChainCountsMatchOracleUpToFifty) {
  std::mt19937_64 rng(31);
  for (std::size_t n : {10u, 25u, 50u}) {
    const auto g = random_graph(rng, n, 3, 4.0 / static_cast<double>(n));
    LerpParams lerp(1, 2, g.num_relations());
    lerp.initialize(1, 1.0);
    Tape t;
    const auto L = forward_lerp(lerp, g, t);
    RuleBank bank(0, 4, 3, g.num_relations(), 3, false);
    std::vector<std::vector<RelationId>> chains(4);
    for (std::size_t q = 0; q < 4; ++q)
      for (std::size_t k = 0; k < 3; ++k) {
        const auto r = static_cast<RelationId>(rng() % g.num_relations());
        chains[q].push_back(r);
        set_one_hot(bank.hop_logits[k], q, r);
        set_one_hot(bank.constraint_logits[k], q, 2);
      }
    const auto compiled = compile_bank(bank, L, t);
    for (EntityId x = 0; x < n; x += 3) {
      const Tensor& s = t.value(evaluate_rules(compiled, g, x, t));
      for (std::size_t q = 0; q < 4; ++q) {
        const auto counts = count_paths(g, chains[q], x);
        for (EntityId y = 0; y < n; ++y) EXPECT_EQ(s(y, q), static_cast<double>(counts[y]));
      }
    }
  }
}

TEST(EvaluateRules, HeadConstraintGatesTheStart) {
  const auto g = make_graph({"a", "b", "c"}, {"r", "s"}, {{"a", "r", "b"}, {"c", "s", "a"}});
  LerpParams lerp(1, 1, g.num_relations());
  set_one_hot(lerp.columns[0].chain, 0, 1);  // incoming s: only a
  Tape t;
  const auto L = forward_lerp(lerp, g, t);
  RuleBank bank(0, 1, 1, g.num_relations(), 2, true);
  set_one_hot(bank.hop_logits[0], 0, 0);
  set_one_hot(bank.constraint_logits[0], 0, 1);
  set_one_hot(*bank.head_logits, 0, 0);
  const auto s = column(t.value(evaluate_rule(bank, 0, L, g, 0, t)), 0);
  EXPECT_NEAR(s[1], 1.0 - std::exp(-1.0), 1e-15);
  set_one_hot(*bank.head_logits, 0, 1);
  EXPECT_EQ(column(t.value(evaluate_rule(bank, 0, L, g, 0, t)), 0)[1], 1.0);
}
