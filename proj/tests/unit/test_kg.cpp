#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "helpers.hpp"
#include "lerp/checks.hpp"
#include "lerp/errors.hpp"
#include "lerp/oracle.hpp"

using namespace lerp;
using lerp::test::make_graph;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
  auto dir = std::filesystem::temp_directory_path() / "lerp_kg_test";
  std::filesystem::create_directories(dir);
  auto path = dir / name;
  std::ofstream(path) << contents;
  return path;
}

std::vector<double> one_hot(std::size_t n, std::size_t i) {
  std::vector<double> v(n, 0.0);
  v[i] = 1.0;
  return v;
}

}  // namespace

TEST(LoadTriplets, ParsesTabSeparatedLines) {
  Vocabulary vocab;
  const auto triplets = load_triplets(temp_file("two.txt", "a\tr\tb\nb\tr\tc\n"), vocab);
  EXPECT_EQ(triplets.size(), 2u);
  EXPECT_EQ(vocab.entities.size(), 3u);
  EXPECT_EQ(vocab.relations.size(), 1u);
  EXPECT_EQ(triplets[1], (Triplet{1, 0, 2}));
}

TEST(LoadTriplets, SkipsBlankLinesAndDuplicates) {
  Vocabulary vocab;
  const auto triplets = load_triplets(temp_file("dup.txt", "a\tr\tb\n\na\tr\tb\n"), vocab);
  EXPECT_EQ(triplets.size(), 1u);
}

TEST(LoadTriplets, MalformedLineReportsLineNumber) {
  Vocabulary vocab;
  try {
    load_triplets(temp_file("bad.txt", "a\tr\tb\nb\tr\n"), vocab);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(LoadTriplets, MissingFileIsIoError) {
  Vocabulary vocab;
  EXPECT_THROW(load_triplets("/nonexistent/train.txt", vocab), IoError);
}

TEST(BuildGraph, SingleTripletAndReverse) {
  const auto g = make_graph({"a", "b"}, {"r"}, {{"a", "r", "b"}});
  EXPECT_EQ(g.num_relations(), 3u);
  EXPECT_EQ(g.adjacency(0).nnz(), 1u);
  EXPECT_TRUE(g.has_edge(0, 0, 1));
  EXPECT_TRUE(g.has_edge(g.reverse_of(0), 1, 0));
  EXPECT_EQ(g.adjacency(g.reverse_of(0)).nnz(), 1u);
  EXPECT_EQ(g.adjacency(g.identity_relation()), SparseMatrix::identity(2));
  EXPECT_EQ(g.relation_name(1), "inv_r");
}

TEST(BuildGraph, EmptyTrainLeavesOnlyIdentity) {
  const auto g = make_graph({"a", "b", "c"}, {"r", "s"}, {});
  for (RelationId r = 0; r < 4; ++r) EXPECT_EQ(g.adjacency(r).nnz(), 0u);
  EXPECT_EQ(g.adjacency(4).nnz(), 3u);
}

TEST(BuildGraph, TransposeRoundTripOnRandomGraphs) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    const auto g = random_graph(rng, 15, 3, 0.2);
    for (RelationId r = 0; r < 3; ++r)
      for (EntityId a = 0; a < 15; ++a)
        for (EntityId b = 0; b < 15; ++b) EXPECT_EQ(g.has_edge(r, a, b), g.has_edge(g.reverse_of(r), b, a));
  }
}

TEST(BuildGraph, KnownAnswersCoverAllSplitsAndReverses) {
  const auto g = make_graph({"a", "b", "c"}, {"r"}, {{"a", "r", "b"}}, {{"a", "r", "c"}});
  const auto fwd = g.known_answers(0, 0);
  EXPECT_EQ(std::vector<EntityId>(fwd.begin(), fwd.end()), (std::vector<EntityId>{1, 2}));
  const auto rev = g.known_answers(2, g.reverse_of(0));
  EXPECT_EQ(std::vector<EntityId>(rev.begin(), rev.end()), (std::vector<EntityId>{0}));
  // Test edges never enter the adjacency.
  EXPECT_FALSE(g.has_edge(0, 0, 2));
}

TEST(BuildGraph, OutOfRangeIdsRejected) {
  Vocabulary vocab;
  vocab.entities.intern("a");
  vocab.relations.intern("r");
  EXPECT_THROW(build_graph(vocab, {{0, 0, 5}}, {}, {}), ContractViolation);
}

TEST(Dataset, KinshipShape) {
  const auto dir = std::filesystem::path(LERP_DATA_DIR) / "kinship";
  if (!std::filesystem::exists(dir)) GTEST_SKIP() << "kinship data not present";
  const auto g = load_dataset(dir);
  EXPECT_EQ(g.num_entities(), 104u);
  EXPECT_EQ(g.num_raw_relations(), 25u);
  EXPECT_EQ(g.num_relations(), 51u);
}

TEST(Dataset, UmlsShape) {
  const auto dir = std::filesystem::path(LERP_DATA_DIR) / "umls";
  if (!std::filesystem::exists(dir)) GTEST_SKIP() << "umls data not present";
  const auto g = load_dataset(dir);
  EXPECT_EQ(g.num_entities(), 135u);
  EXPECT_EQ(g.num_raw_relations(), 46u);
  // This distribution has 6,529 triplets; other published UMLS splits have 5,960.
  EXPECT_EQ(g.train().size() + g.valid().size() + g.test().size(), 6529u);
}

TEST(Dataset, LoadingIsDeterministic) {
  const auto dir = std::filesystem::path(LERP_DATA_DIR) / "umls";
  if (!std::filesystem::exists(dir)) GTEST_SKIP() << "umls data not present";
  const auto a = load_dataset(dir);
  const auto b = load_dataset(dir);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_EQ(a.entity_names(), b.entity_names());
  for (RelationId r = 0; r < a.num_relations(); ++r) EXPECT_EQ(a.adjacency(r), b.adjacency(r));
}

TEST(SpmvLeft, SingleEdge) {
  const auto g = make_graph({"a", "b"}, {"r"}, {{"a", "r", "b"}});
  EXPECT_EQ(spmv_left(one_hot(2, 0), g.adjacency(0)), one_hot(2, 1));
}

TEST(SpmvLeft, DiamondCountsTwoPaths) {
  const auto g = make_graph({"a", "b", "c", "d"}, {"r1", "r2"},
                            {{"a", "r1", "b"}, {"a", "r1", "d"}, {"b", "r2", "c"}, {"d", "r2", "c"}});
  const auto v = spmv_left(spmv_left(one_hot(4, 0), g.adjacency(0)), g.adjacency(1));
  EXPECT_EQ(v, (std::vector<double>{0, 0, 2, 0}));
}

TEST(SpmvLeft, IdentityAndDimensionCheck) {
  const std::vector<double> v{0.5, 0.0, 2.0};
  EXPECT_EQ(spmv_left(v, SparseMatrix::identity(3)), v);
  EXPECT_THROW(spmv_left(std::vector<double>{1.0}, SparseMatrix::identity(3)), ContractViolation);
}

TEST(SpmvLeft, ChainedProductEqualsOraclePathCounts) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 5 + trial;  // up to 44
    const auto g = random_graph(rng, n, 3, 3.0 / static_cast<double>(n));
    std::vector<RelationId> chain;
    for (int k = 0; k < 3; ++k) chain.push_back(static_cast<RelationId>(rng() % g.num_relations()));
    const auto x = static_cast<EntityId>(rng() % n);
    auto v = one_hot(n, x);
    for (RelationId r : chain) v = spmv_left(v, g.adjacency(r));
    const auto counts = count_paths(g, chain, x);
    for (std::size_t y = 0; y < n; ++y) EXPECT_EQ(v[y], static_cast<double>(counts[y]));
  }
}

TEST(SparseMatrix, FromPairsSortsAndDedups) {
  const auto m = SparseMatrix::from_pairs(3, 3, {{2, 1}, {0, 2}, {0, 1}, {0, 2}});
  EXPECT_EQ(m.nnz(), 3u);
  EXPECT_EQ(m.row_offsets(), (std::vector<std::size_t>{0, 2, 2, 3}));
  EXPECT_EQ(m.col_indices(), (std::vector<std::uint32_t>{1, 2, 1}));
  EXPECT_EQ(m.transpose().transpose(), m);
}
