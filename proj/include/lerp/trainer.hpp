#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lerp/autodiff.hpp"
#include "lerp/kg.hpp"
#include "lerp/lerp_model.hpp"
#include "lerp/rules.hpp"

namespace lerp {

struct TrainConfig {
  std::size_t m = 80;
  std::size_t T = 2;
  std::size_t K = 3;
  std::size_t rules_per_relation = 4;
  std::size_t epochs = 10;
  double lr = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t batch_size = 128;
  std::uint64_t seed = 1;
  bool constrain_head = false;
  bool clamp_chaining = true;  // JSON key "clamp_variant": "clamped" | "unclamped"

  void validate() const;  // throws ConfigError naming the offending key
};

// Strict JSON reader: every key must be a TrainConfig field; missing keys keep defaults.
TrainConfig parse_config(const std::string& json_text);
TrainConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const TrainConfig& config);

struct Model {
  TrainConfig config;
  LerpParams lerp;
  RuleSet rules;
  std::uint64_t graph_fingerprint = 0;
  std::vector<std::string> relation_names;

  static Model create(const TrainConfig& config, const KnowledgeGraph& graph);
  std::vector<Parameter*> parameters();
  std::size_t num_scalars() const;
  LerpOptions lerp_options() const { return LerpOptions{config.clamp_chaining}; }
};

struct Query {
  EntityId head;
  RelationId relation;
  EntityId tail;
};

// One query per train triplet and direction: (h, r, t) and (t, r', h).
std::vector<Query> make_queries(const KnowledgeGraph& graph);

// Queries sharing (head, relation). While scoring the group every train edge
// that answers it (and its reverse) is hidden from the graph.
struct QueryGroup {
  EntityId head;
  RelationId relation;
  std::vector<EntityId> tails;
  std::vector<MaskedEdge> masked;
};

// With mask_answers off nothing is hidden (toy memorization setups).
std::vector<QueryGroup> group_queries(std::span<const Query> queries, const KnowledgeGraph& graph,
                                      bool mask_answers = true);

// Shuffles the groups with a seeded RNG and cuts them into batches of at least
// `batch_size` queries (the last batch may be smaller).
std::vector<std::vector<QueryGroup>> make_batches(std::vector<QueryGroup> groups, std::size_t batch_size,
                                                  std::uint64_t seed);

struct BatchResult {
  double loss = 0.0;              // mean cross-entropy over the batch's queries
  std::size_t queries = 0;
  std::size_t zero_score_queries = 0;  // gold score exactly 0 (loss = -log ε)
};

// Forward pass for a batch; with `backward` the parameter gradients are
// accumulated (not applied). Throws std::runtime_error on a non-finite loss.
BatchResult batch_step(Model& model, const KnowledgeGraph& graph, std::span<const QueryGroup> batch, bool backward,
                       std::size_t workers = 1);

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::size_t queries = 0;
  std::size_t zero_score_queries = 0;
  double seconds = 0.0;
};

struct StepLog {
  std::size_t epoch;
  std::size_t step;
  double loss;
  double seconds;
};

struct FitOptions {
  std::size_t workers = 1;
  bool mask_answers = true;
  std::function<void(const StepLog&)> on_step;
  std::function<void(const EpochStats&, const Model&)> on_epoch;
};

EpochStats train_epoch(Model& model, const KnowledgeGraph& graph, std::span<const Query> queries, Adam& optimizer,
                       std::size_t epoch, const FitOptions& options = {});

Model fit(const TrainConfig& config, const KnowledgeGraph& graph, const FitOptions& options = {});

// Split `count` independent jobs over up to `workers` threads; job i runs fn(i).
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace lerp
