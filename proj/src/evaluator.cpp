#include "lerp/evaluator.hpp"

#include <algorithm>
#include <cstdio>

#include "json.hpp"
#include "lerp/errors.hpp"

namespace lerp {

double filtered_rank(std::span<const double> scores, EntityId gold, std::span<const EntityId> filter) {
  if (gold >= scores.size()) throw ContractViolation("filtered_rank: gold entity out of range");
  std::vector<char> skip(scores.size(), 0);
  for (EntityId e : filter) {
    if (e == gold) throw ContractViolation("filtered_rank: gold answer is in the filter set");
    if (e < skip.size()) skip[e] = 1;
  }
  const double g = scores[gold];
  std::size_t greater = 0, ties = 0;
  for (std::size_t e = 0; e < scores.size(); ++e) {
    if (skip[e] || e == gold) continue;
    if (scores[e] > g) ++greater;
    else if (scores[e] == g) ++ties;
  }
  return 1.0 + static_cast<double>(greater) + static_cast<double>(ties) / 2.0;
}

RankMetrics summarize_ranks(std::span<const double> ranks) {
  RankMetrics m;
  m.queries = ranks.size();
  for (int k : kHitsAt) m.hits[k] = 0.0;
  if (ranks.empty()) return m;
  for (double r : ranks) {
    m.mrr += 1.0 / r;
    for (int k : kHitsAt)
      if (r <= k) m.hits[k] += 1.0;
  }
  const double q = static_cast<double>(ranks.size());
  m.mrr /= q;
  for (auto& [k, h] : m.hits) h /= q;
  return m;
}

Scorer::Scorer(Model& model, const KnowledgeGraph& graph) : graph_(graph) {
  if (model.graph_fingerprint != graph.fingerprint())
    throw ContractViolation("model fingerprint does not match the dataset; refusing to score");
  const LerpMatrix lerp = forward_lerp(model.lerp, graph, tape_, model.lerp_options());
  for (auto& bank : model.rules.banks) banks_.push_back(compile_bank(bank, lerp, tape_));
}

std::vector<double> Scorer::scores(EntityId head, RelationId relation) const {
  if (relation >= banks_.size()) throw QueryError("no rules for relation id " + std::to_string(relation));
  if (head >= graph_.num_entities()) throw QueryError("entity id out of range: " + std::to_string(head));
  Tape local;
  const CompiledBank bound = bind_bank(banks_[relation], tape_, local, false);
  const Var s = ad::sum_columns(local, evaluate_rules(bound, graph_, head, local));
  const auto v = local.value(s).values();
  return {v.begin(), v.end()};
}

EvalReport evaluate(Model& model, const KnowledgeGraph& graph, std::span<const Triplet> split,
                    const std::string& split_name, std::size_t workers) {
  const Scorer scorer(model, graph);

  struct Group {
    EntityId head;
    RelationId relation;
    std::vector<std::pair<std::size_t, EntityId>> golds;  // (query slot, gold)
  };
  std::vector<Group> groups;
  std::map<std::pair<EntityId, RelationId>, std::size_t> index;
  std::vector<RelationId> query_relation;
  auto add = [&](EntityId h, RelationId r, EntityId t) {
    auto [it, inserted] = index.try_emplace({h, r}, groups.size());
    if (inserted) groups.push_back({h, r, {}});
    groups[it->second].golds.emplace_back(query_relation.size(), t);
    query_relation.push_back(r);
  };
  for (const auto& t : split) {
    add(t.head, t.relation, t.tail);
    add(t.tail, graph.reverse_of(t.relation), t.head);
  }

  std::vector<double> ranks(query_relation.size(), 0.0);
  parallel_for(groups.size(), workers, [&](std::size_t i) {
    const Group& g = groups[i];
    const auto s = scorer.scores(g.head, g.relation);
    const auto known = graph.known_answers(g.head, g.relation);
    std::vector<EntityId> filter;
    for (const auto& [slot, gold] : g.golds) {
      filter.clear();
      for (EntityId e : known)
        if (e != gold) filter.push_back(e);
      ranks[slot] = filtered_rank(s, gold, filter);
    }
  });

  EvalReport report;
  report.split = split_name;
  report.overall = summarize_ranks(ranks);
  std::map<RelationId, std::vector<double>> by_relation;
  for (std::size_t q = 0; q < ranks.size(); ++q) by_relation[query_relation[q]].push_back(ranks[q]);
  for (const auto& [r, rs] : by_relation) report.per_relation[graph.relation_name(r)] = summarize_ranks(rs);
  return report;
}

namespace {

nlohmann::ordered_json metrics_json(const RankMetrics& m) {
  nlohmann::ordered_json j;
  j["mrr"] = m.mrr;
  for (int k : kHitsAt) j["hits@" + std::to_string(k)] = m.hits.at(k);
  j["queries"] = m.queries;
  return j;
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["split"] = report.split;
  j["filtered"] = true;
  j["tie_policy"] = report.tie_policy;
  j["overall"] = metrics_json(report.overall);
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& [name, m] : report.per_relation) per[name] = metrics_json(m);
  j["per_relation"] = per;
  return j.dump(2) + "\n";
}

std::string report_to_table(const EvalReport& report) {
  std::size_t width = 8;
  for (const auto& [name, m] : report.per_relation) width = std::max(width, name.size());
  std::string out;
  char buf[256];
  auto row = [&](const std::string& name, const RankMetrics& m) {
    std::snprintf(buf, sizeof buf, "%-*s %8zu %7.4f %7.4f %7.4f %7.4f\n", static_cast<int>(width), name.c_str(),
                  m.queries, m.mrr, m.hits.at(1), m.hits.at(3), m.hits.at(10));
    out += buf;
  };
  std::snprintf(buf, sizeof buf, "%-*s %8s %7s %7s %7s %7s\n", static_cast<int>(width), "relation", "queries", "MRR",
                "H@1", "H@3", "H@10");
  out += buf;
  for (const auto& [name, m] : report.per_relation) row(name, m);
  row("ALL (" + report.split + ")", report.overall);
  return out;
}

}  // namespace lerp
