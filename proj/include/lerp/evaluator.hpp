#pragma once

#include <filesystem>
#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lerp/kg.hpp"
#include "lerp/trainer.hpp"

namespace lerp {

inline constexpr std::array<int, 3> kHitsAt{1, 3, 10};

// Filtered rank of `gold`: entities in `filter` are dropped, ties count half.
// Throws ContractViolation if gold is out of range or listed in the filter.
double filtered_rank(std::span<const double> scores, EntityId gold, std::span<const EntityId> filter);

struct RankMetrics {
  double mrr = 0.0;
  std::map<int, double> hits;  // k -> fraction with rank <= k
  std::size_t queries = 0;
};

RankMetrics summarize_ranks(std::span<const double> ranks);

struct EvalReport {
  RankMetrics overall;
  std::map<std::string, RankMetrics> per_relation;  // keyed by query relation name (reverses included)
  std::string split;
  std::string tie_policy = "mean";
};

// Scores every entity for (head, relation, ?) with a frozen model. The LERP
// matrix and all rule banks are computed once at construction; scores() is
// safe to call from several threads.
class Scorer {
 public:
  Scorer(Model& model, const KnowledgeGraph& graph);
  std::vector<double> scores(EntityId head, RelationId relation) const;

 private:
  const KnowledgeGraph& graph_;
  Tape tape_;
  std::vector<CompiledBank> banks_;
};

// Two queries per triplet: (h, r, ?) -> t and (t, r', ?) -> h. Refuses models
// trained on a graph with a different fingerprint.
EvalReport evaluate(Model& model, const KnowledgeGraph& graph, std::span<const Triplet> split,
                    const std::string& split_name = "test", std::size_t workers = 1);

std::string report_to_json(const EvalReport& report);
std::string report_to_table(const EvalReport& report);

}  // namespace lerp
