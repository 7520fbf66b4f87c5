#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "helpers.hpp"
#include "lerp/checkpoint.hpp"
#include "lerp/checks.hpp"
#include "lerp/errors.hpp"
#include "lerp/evaluator.hpp"
#include "lerp/trainer.hpp"

using namespace lerp;
using lerp::test::make_graph;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.m = 3;
  c.T = 1;
  c.K = 2;
  c.rules_per_relation = 2;
  c.batch_size = 4;
  return c;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("lerp_trainer_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Config, ParsesAllKeys) {
  const auto c = parse_config(R"({"m": 8, "T": 1, "K": 2, "rules_per_relation": 5, "epochs": 3, "lr": 0.05,
    "beta1": 0.8, "beta2": 0.99, "batch_size": 16, "seed": 9, "constrain_head": true, "clamp_variant": "unclamped"})");
  EXPECT_EQ(c.m, 8u);
  EXPECT_EQ(c.T, 1u);
  EXPECT_EQ(c.rules_per_relation, 5u);
  EXPECT_DOUBLE_EQ(c.lr, 0.05);
  EXPECT_TRUE(c.constrain_head);
  EXPECT_FALSE(c.clamp_chaining);
  EXPECT_EQ(parse_config(config_to_json(c)).seed, 9u);
}

TEST(Config, UnknownKeyIsNamed) {
  try {
    parse_config(R"({"m": 8, "learning_rate": 0.1})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos);
  }
}

TEST(Config, InvalidValuesRejected) {
  EXPECT_THROW(parse_config(R"({"m": 0})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"K": 0})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"lr": 0})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"lr": -1})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"clamp_variant": "maybe"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"m": "eighty"})"), ConfigError);
  EXPECT_THROW(parse_config("not json"), ConfigError);
  EXPECT_NO_THROW(parse_config(R"({"T": 0})"));
}

TEST(Queries, OnePerDirection) {
  const auto g = make_graph({"a", "b"}, {"r"}, {{"a", "r", "b"}});
  const auto q = make_queries(g);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q[0].head, 0u);
  EXPECT_EQ(q[0].tail, 1u);
  EXPECT_EQ(q[1].relation, g.reverse_of(0));
  EXPECT_EQ(q[1].tail, 0u);
}

TEST(Queries, GroupsMaskAnswerEdgesBothWays) {
  const auto g = make_graph({"a", "b", "c"}, {"r"}, {{"a", "r", "b"}, {"a", "r", "c"}});
  const auto groups = group_queries(make_queries(g), g);
  ASSERT_EQ(groups.size(), 3u);
  EXPECT_EQ(groups[0].tails, (std::vector<EntityId>{1, 2}));
  EXPECT_EQ(groups[0].masked.size(), 4u);
  EXPECT_TRUE(group_queries(make_queries(g), g, false)[0].masked.empty());
}

TEST(Queries, BatchesAreSeededAndLargeEnough) {
  std::mt19937_64 rng(1);
  const auto g = random_graph(rng, 12, 2, 0.3);
  const auto groups = group_queries(make_queries(g), g);
  const auto a = make_batches(groups, 10, 5), b = make_batches(groups, 10, 5), c = make_batches(groups, 10, 6);
  ASSERT_EQ(a.size(), b.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::size_t count = 0;
    for (const auto& grp : a[i]) count += grp.tails.size();
    if (i + 1 < a.size()) EXPECT_GE(count, 10u);
    total += count;
    EXPECT_EQ(a[i].front().head, b[i].front().head);
  }
  EXPECT_EQ(total, 2 * g.train().size());
  bool differs = false;
  for (std::size_t i = 0; i < std::min(a.size(), c.size()); ++i) differs |= a[i].front().head != c[i].front().head;
  EXPECT_TRUE(differs);
}

TEST(TrainEpoch, TwoEntityGraphLearnsTheEdge) {
  const auto g = make_graph({"a", "b"}, {"r"}, {{"a", "r", "b"}});
  TrainConfig c = small_config();
  Model model = Model::create(c, g);
  Adam adam(model.parameters(), AdamOptions{0.1, 0.9, 0.999, 1e-8});
  const auto queries = make_queries(g);
  FitOptions options;
  options.mask_answers = false;
  double prev = 1e9;
  for (std::size_t epoch = 1; epoch <= 20; ++epoch) {
    const double loss = train_epoch(model, g, queries, adam, epoch, options).loss;
    EXPECT_LT(loss, prev) << "epoch " << epoch;
    prev = loss;
  }
  Tape t;
  const auto L = forward_lerp(model.lerp, g, t, model.lerp_options());
  const Tensor& s = t.value(predict(model.rules, L, g, 0, 0, t));
  EXPECT_GT(s[1], s[0]);
}

TEST(TrainEpoch, MemorizableToyGraphReachesLowLoss) {
  std::vector<std::string> names;
  std::vector<test::Edge> edges;
  for (int i = 0; i < 8; ++i) names.push_back("e" + std::to_string(i));
  for (int i = 0; i + 1 < 8; ++i) edges.push_back({names[i], "next", names[i + 1]});
  const auto g = make_graph(names, {"next"}, edges);
  TrainConfig c = small_config();
  c.batch_size = 64;
  Model model = Model::create(c, g);
  Adam adam(model.parameters(), AdamOptions{0.1, 0.9, 0.999, 1e-8});
  FitOptions options;
  options.mask_answers = false;
  const auto queries = make_queries(g);
  double loss = 0.0;
  for (std::size_t step = 1; step <= 200; ++step) loss = train_epoch(model, g, queries, adam, step, options).loss;
  EXPECT_LT(loss, 0.1);
}

TEST(TrainEpoch, ZeroEdgeGraphGivesEpsilonLossAndFiniteGradients) {
  const auto g = make_graph({"a", "b", "c"}, {"r"}, {});
  Model model = Model::create(small_config(), g);
  const std::vector<Query> queries{{0, 0, 1}, {1, 1, 2}};
  const auto groups = group_queries(queries, g);
  const auto r = batch_step(model, g, groups, true);
  EXPECT_NEAR(r.loss, -std::log(ad::kEpsilon), 1e-9);
  EXPECT_EQ(r.zero_score_queries, 2u);
  for (Parameter* p : model.parameters()) EXPECT_TRUE(p->grad.all_finite());
}

TEST(TrainEpoch, GradientsReachEveryFamily) {
  std::mt19937_64 rng(14);
  const auto g = random_graph(rng, 10, 2, 0.3);
  TrainConfig c = small_config();
  c.T = 2;
  Model model = Model::create(c, g);
  batch_step(model, g, group_queries(make_queries(g), g), true);
  std::map<std::string, double> best;
  for (Parameter* p : model.parameters()) {
    const std::string family = p->name.substr(p->name.rfind('.') + 1).substr(0, 3);
    for (double x : p->grad.values()) best[family] = std::max(best[family], std::abs(x));
  }
  for (const char* f : {"op", "cha", "and", "or", "hop", "rho"}) EXPECT_GT(best[f], 0.0) << f;
}

TEST(TrainEpoch, SeededRunsAreIdentical) {
  std::mt19937_64 rng(15);
  const auto g = random_graph(rng, 10, 2, 0.3);
  TrainConfig c = small_config();
  c.epochs = 3;
  std::vector<double> losses[2];
  for (int run = 0; run < 2; ++run) {
    FitOptions options;
    options.on_epoch = [&](const EpochStats& s, const Model&) { losses[run].push_back(s.loss); };
    fit(c, g, options);
  }
  EXPECT_EQ(losses[0], losses[1]);
}

TEST(TrainEpoch, WorkerCountDoesNotChangeResults) {
  std::mt19937_64 rng(16);
  const auto g = random_graph(rng, 10, 3, 0.3);
  TrainConfig c = small_config();
  const auto groups = group_queries(make_queries(g), g);
  Model one = Model::create(c, g), four = Model::create(c, g);
  const double a = batch_step(one, g, groups, true, 1).loss;
  const double b = batch_step(four, g, groups, true, 4).loss;
  EXPECT_EQ(a, b);
  const auto pa = one.parameters(), pb = four.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->grad, pb[i]->grad) << pa[i]->name;
}

TEST(TrainEpoch, NonFiniteLossNamesTheQuery) {
  const auto g = make_graph({"alpha", "beta"}, {"likes"}, {{"alpha", "likes", "beta"}});
  Model model = Model::create(small_config(), g);
  model.rules.bank(0).hop_logits[0].value[0] = std::nan("");
  try {
    batch_step(model, g, group_queries(make_queries(g), g), false);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("alpha"), std::string::npos) << e.what();
  }
}

TEST(Fit, ZeroEpochsReturnsInitializedModel) {
  const auto g = make_graph({"a", "b"}, {"r"}, {{"a", "r", "b"}});
  TrainConfig c = small_config();
  c.epochs = 0;
  Model fitted = fit(c, g);
  Model fresh = Model::create(c, g);
  const auto a = fitted.parameters(), b = fresh.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i]->value, b[i]->value);
}

TEST(Fit, FamilySizedModelHasAboutFortySixThousandParameters) {
  std::vector<std::string> relations;
  for (int r = 0; r < 12; ++r) relations.push_back("rel" + std::to_string(r));
  const auto g = make_graph({"a", "b"}, relations, {});
  TrainConfig c;  // m=80, T=2, K=3, 4 rules per relation
  const Model model = Model::create(c, g);
  EXPECT_EQ(count_learnable_scalars(model.lerp), 17280u);
  EXPECT_EQ(model.rules.num_scalars(), 24u * 4 * 3 * (25 + 81));
  EXPECT_GT(model.num_scalars(), 30000u);
  EXPECT_LT(model.num_scalars(), 70000u);
}

TEST(Checkpoint, RoundTripReproducesScores) {
  std::mt19937_64 rng(19);
  const auto g = random_graph(rng, 9, 2, 0.3);
  TrainConfig c = small_config();
  c.epochs = 2;
  c.constrain_head = true;
  Model model = fit(c, g);
  const auto dir = temp_dir("ckpt");
  save_checkpoint(model, dir / "a");
  Model loaded = load_checkpoint(dir / "a");
  save_checkpoint(loaded, dir / "b");
  EXPECT_EQ(loaded.graph_fingerprint, g.fingerprint());
  const Scorer s1(model, g), s2(loaded, g);
  for (EntityId h = 0; h < 9; ++h)
    for (RelationId r = 0; r < 4; ++r) EXPECT_EQ(s1.scores(h, r), s2.scores(h, r));
  std::ifstream fa(dir / "a"), fb(dir / "b");
  const std::string ta((std::istreambuf_iterator<char>(fa)), {}), tb((std::istreambuf_iterator<char>(fb)), {});
  EXPECT_EQ(ta, tb);
  EXPECT_FALSE(std::filesystem::exists(dir / "a.tmp"));
}

TEST(Checkpoint, CorruptFilesAreParseErrors) {
  const auto dir = temp_dir("corrupt");
  const auto g = make_graph({"a", "b"}, {"r"}, {{"a", "r", "b"}});
  save_checkpoint(Model::create(small_config(), g), dir / "good");
  std::ifstream in(dir / "good");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  write_file_atomic(dir / "truncated", text.substr(0, text.size() / 2));
  EXPECT_THROW(load_checkpoint(dir / "truncated"), ParseError);
  write_file_atomic(dir / "version", "lerp-checkpoint 99\n");
  EXPECT_THROW(load_checkpoint(dir / "version"), ParseError);
  EXPECT_THROW(load_checkpoint(dir / "missing"), IoError);
}
