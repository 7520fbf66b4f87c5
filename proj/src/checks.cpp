#include "lerp/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "lerp/errors.hpp"
#include "lerp/interpret.hpp"
#include "lerp/oracle.hpp"
#include "lerp/trainer.hpp"

namespace lerp {

namespace {

std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void record_failure(SuiteResult& r, std::string what) {
  if (r.failures.size() < 10) r.failures.push_back(std::move(what));
}

}  // namespace

KnowledgeGraph random_graph(std::mt19937_64& rng, std::size_t n, std::size_t relations, double density) {
  Vocabulary vocab;
  for (std::size_t e = 0; e < n; ++e) vocab.entities.intern("e" + std::to_string(e));
  for (std::size_t r = 0; r < relations; ++r) vocab.relations.intern("r" + std::to_string(r));
  std::bernoulli_distribution edge(density);
  std::vector<Triplet> train;
  for (RelationId r = 0; r < relations; ++r)
    for (EntityId a = 0; a < n; ++a)
      for (EntityId b = 0; b < n; ++b)
        if (edge(rng)) train.push_back({a, r, b});
  return build_graph(vocab, std::move(train), {}, {});
}

FormulaPtr random_formula(std::mt19937_64& rng, std::size_t num_relations, std::size_t max_nodes,
                          bool allow_negation, bool allow_or) {
  if (max_nodes <= 1) return fml::truth();
  std::vector<FormulaKind> kinds{FormulaKind::True, FormulaKind::Chain, FormulaKind::Chain};
  if (allow_negation) kinds.push_back(FormulaKind::Not);
  if (max_nodes >= 3) {
    kinds.push_back(FormulaKind::And);
    if (allow_or) kinds.push_back(FormulaKind::Or);
  }
  const FormulaKind kind = kinds[uniform(rng, 0, kinds.size() - 1)];
  switch (kind) {
    case FormulaKind::True: return fml::truth();
    case FormulaKind::Chain:
      return fml::chain(static_cast<RelationId>(uniform(rng, 0, num_relations - 1)),
                        random_formula(rng, num_relations, max_nodes - 1, allow_negation, allow_or));
    case FormulaKind::Not: return fml::negate(random_formula(rng, num_relations, max_nodes - 1, allow_negation, allow_or));
    default: {
      const std::size_t left_budget = uniform(rng, 1, max_nodes - 2);
      auto a = random_formula(rng, num_relations, left_budget, allow_negation, allow_or);
      auto b = random_formula(rng, num_relations, max_nodes - 1 - left_budget, allow_negation, allow_or);
      return kind == FormulaKind::And ? fml::conj(a, b) : fml::disj(a, b);
    }
  }
}

void set_one_hot(Parameter& p, std::size_t row, std::size_t index) {
  auto r = p.value.row(row);
  std::fill(r.begin(), r.end(), 0.0);
  r[index] = 1000.0;  // exp(-1000) underflows to exactly 0
}

SuiteResult check_oracle_equivalence(std::size_t graphs, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  SuiteResult result;
  result.name = "oracle-equivalence";
  std::mt19937_64 rng(seed);
  std::size_t cells = 0, rule_checks = 0;
  static constexpr std::array<CellOp, 5> kMonotoneOps{CellOp::True, CellOp::Chaining, CellOp::Copy, CellOp::And,
                                                      CellOp::Or};

  for (std::size_t gi = 0; gi < graphs; ++gi) {
    ++result.cases;
    const std::size_t n = uniform(rng, 2, 12);
    const std::size_t raw = uniform(rng, 1, 4);
    const double density = std::uniform_real_distribution<double>(0.05, 0.4)(rng);
    const KnowledgeGraph graph = random_graph(rng, n, raw, density);
    const std::size_t rel = graph.num_relations();
    const std::size_t m = uniform(rng, 1, 5);
    const std::size_t T = uniform(rng, 0, 2);
    const std::size_t K = uniform(rng, 1, 3);
    const std::size_t R = 3;
    const bool constrain_head = uniform(rng, 0, 1) == 1;
    const std::string tag = "graph " + std::to_string(gi) + " (n=" + std::to_string(n) + ", T=" + std::to_string(T) +
                            ", K=" + std::to_string(K) + ")";
    bool ok = true;

    LerpParams lerp(T, m, rel);
    for (std::size_t j = 1; j <= T; ++j) {
      auto& col = lerp.columns[j - 1];
      for (std::size_t i = 0; i < m; ++i) {
        set_one_hot(col.chain, i, uniform(rng, 0, rel - 1));
        if (j >= 2) {
          set_one_hot(col.op, i, static_cast<std::size_t>(kMonotoneOps[uniform(rng, 0, kMonotoneOps.size() - 1)]));
          set_one_hot(col.merge_and, i, uniform(rng, 0, m - 1));
          set_one_hot(col.merge_or, i, uniform(rng, 0, m - 1));
        }
      }
    }
    Tape tape;
    const LerpMatrix L = forward_lerp(lerp, graph, tape);
    const Tensor& values = tape.value(L.values);

    // Each cell: soft support equals the decoded formula's truth set.
    std::vector<FormulaPtr> row_formula;
    for (std::size_t i = 0; i <= m; ++i) {
      const FormulaPtr f = decode_lerp_row(lerp, i).formula;
      row_formula.push_back(f);
      const auto truth = eval_tree_function_all(*f, graph);
      ++cells;
      for (EntityId e = 0; e < n; ++e) {
        if ((values(e, i) > 0.0) != truth[e]) {
          ok = false;
          record_failure(result, tag + ": cell " + std::to_string(i) + " disagrees at entity " + std::to_string(e));
          break;
        }
        if (eval_tree_function_naive(*f, graph, e) != truth[e]) {
          ok = false;
          record_failure(result, tag + ": memoized and naive oracle disagree");
          break;
        }
      }
    }

    // Path counts with every constraint on the true row.
    RuleBank counting(0, R, K, rel, m + 1, false);
    RuleBank extended(0, R, K, rel, m + 1, constrain_head);
    std::vector<std::vector<RelationId>> count_chain(R), ext_chain(R);
    std::vector<std::vector<FormulaPtr>> ext_constraints(R);
    std::vector<FormulaPtr> ext_head(R, fml::truth());
    for (std::size_t q = 0; q < R; ++q) {
      for (std::size_t k = 0; k < K; ++k) {
        const auto r1 = uniform(rng, 0, rel - 1);
        set_one_hot(counting.hop_logits[k], q, r1);
        set_one_hot(counting.constraint_logits[k], q, m);
        count_chain[q].push_back(static_cast<RelationId>(r1));
        const auto r2 = uniform(rng, 0, rel - 1);
        const auto row = uniform(rng, 0, m);
        set_one_hot(extended.hop_logits[k], q, r2);
        set_one_hot(extended.constraint_logits[k], q, row);
        ext_chain[q].push_back(static_cast<RelationId>(r2));
        ext_constraints[q].push_back(row_formula[row]);
      }
      if (constrain_head) {
        const auto row = uniform(rng, 0, m);
        set_one_hot(*extended.head_logits, q, row);
        ext_head[q] = row_formula[row];
      }
    }
    const CompiledBank count_bank = compile_bank(counting, L, tape);
    const CompiledBank ext_bank = compile_bank(extended, L, tape);
    for (EntityId x = 0; x < n && ok; ++x) {
      const Tensor& counts = tape.value(evaluate_rules(count_bank, graph, x, tape));
      const Tensor& support = tape.value(evaluate_rules(ext_bank, graph, x, tape));
      for (std::size_t q = 0; q < R && ok; ++q) {
        ++rule_checks;
        const auto expected = count_paths(graph, count_chain[q], x);
        const auto truth = eval_extended_rule(ext_chain[q], ext_constraints[q], graph, x, ext_head[q]);
        for (EntityId y = 0; y < n; ++y) {
          if (counts(y, q) != static_cast<double>(expected[y])) {
            ok = false;
            record_failure(result, tag + ": path count at (" + std::to_string(x) + "," + std::to_string(y) +
                                       ") soft " + std::to_string(counts(y, q)) + " vs oracle " +
                                       std::to_string(expected[y]));
            break;
          }
          if ((support(y, q) > 0.0) != truth[y]) {
            ok = false;
            record_failure(result, tag + ": extended rule support differs at (" + std::to_string(x) + "," +
                                       std::to_string(y) + ")");
            break;
          }
        }
      }
    }
    if (ok) ++result.passed;
  }
  result.detail = std::to_string(cells) + " cells and " + std::to_string(rule_checks) + " rule/head pairs compared";
  result.seconds = seconds_since(start);
  return result;
}

SuiteResult check_gradients(std::size_t instances, std::uint64_t seed, double rel_tol, double abs_floor) {
  const auto start = std::chrono::steady_clock::now();
  SuiteResult result;
  result.name = "gradient";
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t scalars = 0;
  double worst = 0.0;
  constexpr double h = 1e-5;

  for (std::size_t inst = 0; inst < instances; ++inst) {
    ++result.cases;
    const std::size_t n = uniform(rng, 3, 8);
    const std::size_t raw = uniform(rng, 1, 3);
    KnowledgeGraph graph = random_graph(rng, n, raw, std::uniform_real_distribution<double>(0.15, 0.5)(rng));
    if (graph.train().empty()) {
      Vocabulary vocab;
      for (std::size_t e = 0; e < n; ++e) vocab.entities.intern("e" + std::to_string(e));
      for (std::size_t r = 0; r < raw; ++r) vocab.relations.intern("r" + std::to_string(r));
      graph = build_graph(vocab, {{0, 0, 1}}, {}, {});
    }
    TrainConfig config;
    config.m = uniform(rng, 1, 4);
    config.T = uniform(rng, 0, 2);
    config.K = uniform(rng, 1, 2);
    config.rules_per_relation = uniform(rng, 1, 3);
    config.constrain_head = uniform(rng, 0, 1) == 1;
    config.clamp_chaining = config.T == 2 || uniform(rng, 0, 1) == 1;
    config.seed = inst + 1;
    Model model = Model::create(config, graph);
    const auto params = model.parameters();
    for (Parameter* p : params)
      for (auto& x : p->value.values()) x = normal(rng);

    const auto queries = make_queries(graph);
    const auto groups = group_queries(queries, graph);
    for (Parameter* p : params) p->zero_grad();
    batch_step(model, graph, groups, true);

    bool ok = true;
    for (Parameter* p : params) {
      for (std::size_t i = 0; i < p->value.size() && ok; ++i) {
        ++scalars;
        const double saved = p->value[i];
        p->value[i] = saved + h;
        const double up = batch_step(model, graph, groups, false).loss;
        p->value[i] = saved - h;
        const double down = batch_step(model, graph, groups, false).loss;
        p->value[i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double analytic = p->grad[i];
        const double err = std::abs(numeric - analytic);
        const double allowed = std::max(rel_tol * std::max(std::abs(numeric), std::abs(analytic)), abs_floor);
        worst = std::max(worst, err / allowed);
        if (!(err <= allowed)) {
          ok = false;
          char buf[200];
          std::snprintf(buf, sizeof buf, "instance %zu: %s[%zu] analytic %.10g vs numeric %.10g", inst,
                        p->name.c_str(), i, analytic, numeric);
          record_failure(result, buf);
        }
      }
    }
    if (ok) ++result.passed;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu logits checked, worst error/allowed = %.3g", scalars, worst);
  result.detail = buf;
  result.seconds = seconds_since(start);
  return result;
}

SuiteResult check_op_bound(const std::vector<std::size_t>& sizes, std::size_t cases_per_size, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  SuiteResult result;
  result.name = "op-bound";
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  static constexpr std::array<double, 4> kDensities{0.05, 0.2, 0.6, 1.0};
  for (std::size_t n : sizes) {
    for (std::size_t c = 0; c < cases_per_size; ++c) {
      ++result.cases;
      const double density = kDensities[c % kDensities.size()];
      const KnowledgeGraph graph = random_graph(rng, n, uniform(rng, 1, 3), density);
      RuleSpec spec;
      const std::size_t K = uniform(rng, 1, 3);
      spec.D = uniform(rng, 1, 6);
      for (std::size_t k = 0; k < K; ++k) {
        spec.chain.push_back(static_cast<RelationId>(uniform(rng, 0, graph.num_relations() - 1)));
        spec.constraints.push_back(uniform(rng, 0, 3) == 0
                                       ? fml::truth()
                                       : random_formula(rng, graph.num_relations(), spec.D, true));
      }
      const auto x = static_cast<EntityId>(uniform(rng, 0, n - 1));
      const OpCounter counter = measure_ops(graph, spec, x);
      worst = std::max(worst, static_cast<double>(counter.count) / static_cast<double>(counter.bound()));
      if (counter.within_bound()) {
        ++result.passed;
      } else {
        record_failure(result, "n=" + std::to_string(n) + " K=" + std::to_string(K) + " D=" +
                                   std::to_string(spec.D) + ": count " + std::to_string(counter.count) +
                                   " > bound " + std::to_string(counter.bound()));
      }
    }
  }
  char buf[120];
  std::snprintf(buf, sizeof buf, "max count / K(1+D)n^2 = %.4f", worst);
  result.detail = buf;
  result.seconds = seconds_since(start);
  return result;
}

SuiteResult check_ranges(std::size_t instances, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  SuiteResult result;
  result.name = "range";
  std::mt19937_64 rng(seed);
  static constexpr std::array<double, 4> kScales{0.01, 1.0, 5.0, 50.0};
  double worst_sum = 0.0;
  for (std::size_t inst = 0; inst < instances; ++inst) {
    ++result.cases;
    const std::size_t n = uniform(rng, 2, 30);
    const KnowledgeGraph graph = random_graph(rng, n, uniform(rng, 1, 4), std::uniform_real_distribution<double>(0.02, 0.6)(rng));
    const std::size_t m = uniform(rng, 1, 8);
    LerpParams lerp(uniform(rng, 0, 3), m, graph.num_relations());
    RuleBank bank(0, uniform(rng, 1, 4), uniform(rng, 1, 3), graph.num_relations(), m + 1, true);
    std::normal_distribution<double> noise(0.0, kScales[inst % kScales.size()]);
    std::vector<Parameter*> params = lerp.parameters();
    for (Parameter* p : bank.parameters()) params.push_back(p);
    for (Parameter* p : params)
      for (auto& x : p->value.values()) x = noise(rng);

    bool ok = true;
    Tape tape;
    const LerpMatrix L = forward_lerp(lerp, graph, tape);
    for (double v : tape.value(L.values).values()) ok = ok && v >= 0.0 && v <= 1.0;
    const CompiledBank compiled = compile_bank(bank, L, tape);
    for (Var c : compiled.constraints)
      for (double v : tape.value(c).values()) ok = ok && v >= 0.0 && v <= 1.0 + 1e-12;  // convex mix rounding
    if (!ok) {
      double lo = 0.0, hi = 1.0;
      for (double v : tape.value(L.values).values()) lo = std::min(lo, v), hi = std::max(hi, v);
      for (Var c : compiled.constraints)
        for (double v : tape.value(c).values()) lo = std::min(lo, v), hi = std::max(hi, v);
      char buf[120];
      std::snprintf(buf, sizeof buf, "instance %zu: values span [%.17g, %.17g]", inst, lo, hi);
      record_failure(result, buf);
    }
    for (Parameter* p : params) {
      const Tensor& s = tape.value(ad::softmax_rows(tape, tape.parameter(*p)));
      for (std::size_t r = 0; r < s.rows(); ++r) {
        double sum = 0.0;
        for (double v : s.row(r)) sum += v;
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
        if (std::abs(sum - 1.0) > 1e-12) {
          ok = false;
          record_failure(result, "instance " + std::to_string(inst) + ": softmax row of " + p->name + " sums to " +
                                     std::to_string(sum));
        }
      }
    }
    if (ok) ++result.passed;
  }
  char buf[120];
  std::snprintf(buf, sizeof buf, "max |softmax row sum - 1| = %.3g", worst_sum);
  result.detail = buf;
  result.seconds = seconds_since(start);
  return result;
}

}  // namespace lerp
