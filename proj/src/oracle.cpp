#include "lerp/oracle.hpp"

#include <functional>
#include <unordered_map>

#include "lerp/errors.hpp"

namespace lerp {

namespace {

using Memo = std::unordered_map<const Formula*, std::vector<bool>>;

const std::vector<bool>& eval_memo(const Formula& f, const KnowledgeGraph& graph, Memo& memo) {
  if (auto it = memo.find(&f); it != memo.end()) return it->second;
  const std::size_t n = graph.num_entities();
  std::vector<bool> out(n, false);
  switch (f.kind) {
    case FormulaKind::True:
      out.assign(n, true);
      break;
    case FormulaKind::Chain: {
      const auto& child = eval_memo(*f.left, graph, memo);
      const auto& adj = graph.adjacency(f.relation);
      for (EntityId w = 0; w < n; ++w)
        if (child[w])
          for (auto e : adj.row(w)) out[e] = true;
      break;
    }
    case FormulaKind::Not: {
      const auto& child = eval_memo(*f.left, graph, memo);
      for (std::size_t e = 0; e < n; ++e) out[e] = !child[e];
      break;
    }
    case FormulaKind::And:
    case FormulaKind::Or: {
      const auto a = eval_memo(*f.left, graph, memo);
      const auto& b = eval_memo(*f.right, graph, memo);
      for (std::size_t e = 0; e < n; ++e) out[e] = f.kind == FormulaKind::And ? (a[e] && b[e]) : (a[e] || b[e]);
      break;
    }
  }
  return memo.emplace(&f, std::move(out)).first->second;
}

}  // namespace

std::vector<bool> eval_tree_function_all(const Formula& f, const KnowledgeGraph& graph) {
  Memo memo;
  return eval_memo(f, graph, memo);
}

bool eval_tree_function(const Formula& f, const KnowledgeGraph& graph, EntityId e) {
  if (e >= graph.num_entities()) throw QueryError("entity id out of range: " + std::to_string(e));
  return eval_tree_function_all(f, graph)[e];
}

bool eval_tree_function_naive(const Formula& f, const KnowledgeGraph& graph, EntityId e) {
  switch (f.kind) {
    case FormulaKind::True: return true;
    case FormulaKind::Chain:
      for (EntityId w = 0; w < graph.num_entities(); ++w)
        if (graph.has_edge(f.relation, w, e) && eval_tree_function_naive(*f.left, graph, w)) return true;
      return false;
    case FormulaKind::Not: return !eval_tree_function_naive(*f.left, graph, e);
    case FormulaKind::And:
      return eval_tree_function_naive(*f.left, graph, e) && eval_tree_function_naive(*f.right, graph, e);
    case FormulaKind::Or:
      return eval_tree_function_naive(*f.left, graph, e) || eval_tree_function_naive(*f.right, graph, e);
  }
  return false;
}

std::vector<std::uint64_t> count_paths(const KnowledgeGraph& graph, const std::vector<RelationId>& chain, EntityId x) {
  if (chain.empty()) throw ContractViolation("count_paths: empty chain");
  if (x >= graph.num_entities()) throw QueryError("entity id out of range: " + std::to_string(x));
  std::vector<std::uint64_t> counts(graph.num_entities(), 0);
  std::function<void(std::size_t, EntityId)> walk = [&](std::size_t k, EntityId at) {
    if (k == chain.size()) {
      ++counts[at];
      return;
    }
    for (auto next : graph.adjacency(chain[k]).row(at)) walk(k + 1, next);
  };
  walk(0, x);
  return counts;
}

std::vector<bool> eval_extended_rule(const std::vector<RelationId>& chain, const std::vector<FormulaPtr>& constraints,
                                     const KnowledgeGraph& graph, EntityId x, const FormulaPtr& head_constraint) {
  if (chain.empty()) throw ContractViolation("eval_extended_rule: empty chain");
  if (constraints.size() != chain.size())
    throw ContractViolation("eval_extended_rule: need one constraint per hop");
  const std::size_t n = graph.num_entities();
  if (x >= n) throw QueryError("entity id out of range: " + std::to_string(x));
  double assignments = 1.0;
  for (std::size_t k = 0; k < chain.size(); ++k) assignments *= static_cast<double>(n);
  if (assignments > 5e7) throw ContractViolation("eval_extended_rule: brute force too large");

  auto truth_of = [&](const FormulaPtr& f) {
    return f ? eval_tree_function_all(*f, graph) : std::vector<bool>(n, true);
  };
  std::vector<std::vector<bool>> allowed;
  for (const auto& f : constraints) allowed.push_back(truth_of(f));
  std::vector<bool> out(n, false);
  if (!truth_of(head_constraint)[x]) return out;

  const std::size_t K = chain.size();
  std::vector<EntityId> z(K + 1, 0);  // z[0] = x, z[K] = y
  z[0] = x;
  for (EntityId y = 0; y < n; ++y) {
    z[K] = y;
    // Odometer over z[1..K-1].
    std::fill(z.begin() + 1, z.begin() + K, 0);
    while (true) {
      bool ok = true;
      for (std::size_t k = 0; k < K && ok; ++k) ok = graph.has_edge(chain[k], z[k], z[k + 1]) && allowed[k][z[k + 1]];
      if (ok) {
        out[y] = true;
        break;
      }
      std::size_t pos = 1;
      while (pos < K && ++z[pos] == n) z[pos++] = 0;
      if (pos >= K) break;
    }
  }
  return out;
}

namespace {

std::vector<double> soft_eval_counted(const Formula& f, const KnowledgeGraph& graph, std::uint64_t& count) {
  const std::size_t n = graph.num_entities();
  switch (f.kind) {
    case FormulaKind::True:
      count += n;
      return std::vector<double>(n, 1.0);
    case FormulaKind::Chain: {
      const auto child = soft_eval_counted(*f.left, graph, count);
      return spmv_left(child, graph.adjacency(f.relation), &count);
    }
    case FormulaKind::Not: {
      auto v = soft_eval_counted(*f.left, graph, count);
      for (auto& x : v) x = 1.0 - x;
      count += n;
      return v;
    }
    case FormulaKind::And:
    case FormulaKind::Or: {
      auto a = soft_eval_counted(*f.left, graph, count);
      const auto b = soft_eval_counted(*f.right, graph, count);
      for (std::size_t e = 0; e < n; ++e)
        a[e] = f.kind == FormulaKind::And ? a[e] * b[e] : 1.0 - (1.0 - a[e]) * (1.0 - b[e]);
      count += n;
      return a;
    }
  }
  return {};
}

}  // namespace

OpCounter measure_ops(const KnowledgeGraph& graph, const RuleSpec& spec, EntityId x) {
  if (spec.chain.empty()) throw ContractViolation("measure_ops: empty chain");
  if (spec.constraints.size() != spec.chain.size())
    throw ContractViolation("measure_ops: need one constraint per hop");
  OpCounter counter;
  counter.n = graph.num_entities();
  counter.K = spec.chain.size();
  counter.D = spec.D;
  std::vector<double> v(counter.n, 0.0);
  v.at(x) = 1.0;
  for (std::size_t k = 0; k < spec.chain.size(); ++k) {
    v = spmv_left(v, graph.adjacency(spec.chain[k]), &counter.count);
    const auto& f = spec.constraints[k];
    if (!f || f->kind == FormulaKind::True) continue;
    if (node_count(*f) > spec.D)
      throw ContractViolation("measure_ops: constraint has " + std::to_string(node_count(*f)) +
                              " operations, budget D = " + std::to_string(spec.D));
    const auto c = soft_eval_counted(*f, graph, counter.count);
    for (std::size_t e = 0; e < counter.n; ++e) v[e] *= c[e];
    counter.count += counter.n;
  }
  return counter;
}

}  // namespace lerp
