#include "lerp/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "lerp/errors.hpp"

namespace lerp {

using json = nlohmann::json;

void TrainConfig::validate() const {
  if (m < 1) throw ConfigError("m: must be at least 1");
  if (K < 1) throw ConfigError("K: must be at least 1");
  if (rules_per_relation < 1) throw ConfigError("rules_per_relation: must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size: must be at least 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr: must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1: must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2: must lie in [0, 1)");
}

namespace {

std::size_t read_count(const json& value, const std::string& key) {
  if (!value.is_number_integer() || value.get<long long>() < 0)
    throw ConfigError(key + ": expected a non-negative integer");
  return value.get<std::size_t>();
}

double read_real(const json& value, const std::string& key) {
  if (!value.is_number()) throw ConfigError(key + ": expected a number");
  return value.get<double>();
}

bool read_bool(const json& value, const std::string& key) {
  if (!value.is_boolean()) throw ConfigError(key + ": expected true or false");
  return value.get<bool>();
}

}  // namespace

TrainConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  TrainConfig c;
  for (const auto& [key, value] : doc.items()) {
    if (key == "m") c.m = read_count(value, key);
    else if (key == "T") c.T = read_count(value, key);
    else if (key == "K") c.K = read_count(value, key);
    else if (key == "rules_per_relation") c.rules_per_relation = read_count(value, key);
    else if (key == "epochs") c.epochs = read_count(value, key);
    else if (key == "lr") c.lr = read_real(value, key);
    else if (key == "beta1") c.beta1 = read_real(value, key);
    else if (key == "beta2") c.beta2 = read_real(value, key);
    else if (key == "batch_size") c.batch_size = read_count(value, key);
    else if (key == "seed") c.seed = read_count(value, key);
    else if (key == "constrain_head") c.constrain_head = read_bool(value, key);
    else if (key == "clamp_variant") {
      if (value == "clamped") c.clamp_chaining = true;
      else if (value == "unclamped") c.clamp_chaining = false;
      else throw ConfigError("clamp_variant: expected \"clamped\" or \"unclamped\"");
    } else {
      throw ConfigError(key + ": unknown config key");
    }
  }
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const TrainConfig& c) {
  json doc = {{"m", c.m},
              {"T", c.T},
              {"K", c.K},
              {"rules_per_relation", c.rules_per_relation},
              {"epochs", c.epochs},
              {"lr", c.lr},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"constrain_head", c.constrain_head},
              {"clamp_variant", c.clamp_chaining ? "clamped" : "unclamped"}};
  return doc.dump();
}

Model Model::create(const TrainConfig& config, const KnowledgeGraph& graph) {
  config.validate();
  Model model;
  model.config = config;
  model.lerp = LerpParams(config.T, config.m, graph.num_relations());
  model.rules = RuleSet::create(graph, config.rules_per_relation, config.K, config.m, config.constrain_head);
  model.lerp.initialize(config.seed * 2 + 1);
  model.rules.initialize(config.seed * 2 + 2);
  model.graph_fingerprint = graph.fingerprint();
  model.relation_names = graph.relation_names();
  return model;
}

std::vector<Parameter*> Model::parameters() {
  auto out = lerp.parameters();
  for (Parameter* p : rules.parameters()) out.push_back(p);
  return out;
}

std::size_t Model::num_scalars() const { return count_learnable_scalars(lerp) + rules.num_scalars(); }

std::vector<Query> make_queries(const KnowledgeGraph& graph) {
  std::vector<Query> out;
  out.reserve(2 * graph.train().size());
  for (const auto& t : graph.train()) {
    out.push_back({t.head, t.relation, t.tail});
    out.push_back({t.tail, graph.reverse_of(t.relation), t.head});
  }
  return out;
}

std::vector<QueryGroup> group_queries(std::span<const Query> queries, const KnowledgeGraph& graph,
                                      bool mask_answers) {
  std::vector<QueryGroup> groups;
  std::map<std::pair<EntityId, RelationId>, std::size_t> index;
  for (const auto& q : queries) {
    auto [it, inserted] = index.try_emplace({q.head, q.relation}, groups.size());
    if (inserted) {
      QueryGroup g{q.head, q.relation, {}, {}};
      const RelationId rev = graph.reverse_of(q.relation);
      for (auto y : mask_answers ? graph.adjacency(q.relation).row(q.head) : std::span<const std::uint32_t>{}) {
        g.masked.push_back({q.relation, q.head, y});
        g.masked.push_back({rev, y, q.head});
      }
      groups.push_back(std::move(g));
    }
    groups[it->second].tails.push_back(q.tail);
  }
  return groups;
}

std::vector<std::vector<QueryGroup>> make_batches(std::vector<QueryGroup> groups, std::size_t batch_size,
                                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(groups.begin(), groups.end(), rng);
  std::vector<std::vector<QueryGroup>> batches;
  std::vector<QueryGroup> current;
  std::size_t count = 0;
  for (auto& g : groups) {
    count += g.tails.size();
    current.push_back(std::move(g));
    if (count >= batch_size) {
      batches.push_back(std::move(current));
      current.clear();
      count = 0;
    }
  }
  if (!current.empty()) batches.push_back(std::move(current));
  return batches;
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

struct TargetWork {
  RelationId target;
  std::vector<const QueryGroup*> groups;
  CompiledBank compiled;
  Tape tape;
  CompiledBank bound;
  double loss = 0.0;
  std::size_t zero_scores = 0;
};

}  // namespace

BatchResult batch_step(Model& model, const KnowledgeGraph& graph, std::span<const QueryGroup> batch, bool backward,
                       std::size_t workers) {
  if (model.graph_fingerprint != graph.fingerprint()) throw ContractViolation("model was built for another graph");
  Tape main;
  const LerpMatrix lerp = forward_lerp(model.lerp, graph, main, model.lerp_options());

  std::map<RelationId, std::size_t> slot;
  std::vector<TargetWork> work;
  std::size_t total_queries = 0;
  for (const auto& g : batch) {
    auto [it, inserted] = slot.try_emplace(g.relation, work.size());
    if (inserted) {
      work.emplace_back();
      work.back().target = g.relation;
    }
    work[it->second].groups.push_back(&g);
    total_queries += g.tails.size();
  }
  // Compile on the shared tape in ascending target order so node order is fixed.
  std::sort(work.begin(), work.end(), [](const TargetWork& a, const TargetWork& b) { return a.target < b.target; });
  for (auto& w : work) w.compiled = compile_bank(model.rules.bank(w.target), lerp, main);

  const double scale = total_queries ? 1.0 / static_cast<double>(total_queries) : 0.0;
  parallel_for(work.size(), workers, [&](std::size_t i) {
    auto& w = work[i];
    w.bound = bind_bank(w.compiled, main, w.tape, backward);
    std::optional<Var> total;
    for (const QueryGroup* g : w.groups) {
      const Var scores = ad::sum_columns(w.tape, evaluate_rules(w.bound, graph, g->head, w.tape, g->masked));
      const Var normalized = ad::l1_normalize(w.tape, scores);
      for (EntityId tail : g->tails) {
        const Var ce = ad::cross_entropy(w.tape, normalized, tail);
        const double value = w.tape.value(ce)[0];
        if (!std::isfinite(value)) {
          throw std::runtime_error("non-finite loss for query (" + graph.entity_name(g->head) + ", " +
                                   graph.relation_name(g->relation) + ", " + graph.entity_name(tail) + ")");
        }
        if (w.tape.value(scores)[tail] == 0.0) ++w.zero_scores;
        w.loss += value;
        total = total ? ad::add(w.tape, *total, ce) : ce;
      }
    }
    if (backward && total) w.tape.backward(*total, scale);
  });

  BatchResult result;
  result.queries = total_queries;
  for (auto& w : work) {
    result.loss += w.loss;
    result.zero_score_queries += w.zero_scores;
    if (backward) fold_gradients(w.bound, w.tape, w.compiled, main);
  }
  result.loss *= scale;
  if (backward) main.propagate();
  return result;
}

EpochStats train_epoch(Model& model, const KnowledgeGraph& graph, std::span<const Query> queries, Adam& optimizer,
                       std::size_t epoch, const FitOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  auto batches = make_batches(group_queries(queries, graph, options.mask_answers), model.config.batch_size,
                              model.config.seed * 1000003ULL + epoch);
  EpochStats stats;
  stats.epoch = epoch;
  double weighted = 0.0;
  std::size_t step = 0;
  for (const auto& batch : batches) {
    optimizer.zero_grad();
    const BatchResult r = batch_step(model, graph, batch, true, options.workers);
    optimizer.step();
    weighted += r.loss * static_cast<double>(r.queries);
    stats.queries += r.queries;
    stats.zero_score_queries += r.zero_score_queries;
    ++step;
    if (options.on_step) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      options.on_step(StepLog{epoch, step, r.loss, secs});
    }
  }
  stats.loss = stats.queries ? weighted / static_cast<double>(stats.queries) : 0.0;
  stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return stats;
}

Model fit(const TrainConfig& config, const KnowledgeGraph& graph, const FitOptions& options) {
  Model model = Model::create(config, graph);
  if (config.epochs == 0) return model;
  const auto queries = make_queries(graph);
  Adam optimizer(model.parameters(), AdamOptions{config.lr, config.beta1, config.beta2, 1e-8});
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const EpochStats stats = train_epoch(model, graph, queries, optimizer, epoch, options);
    if (options.on_epoch) options.on_epoch(stats, model);
  }
  return model;
}

}  // namespace lerp
