#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lerp {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triplet {
  EntityId head;
  RelationId relation;
  EntityId tail;

  friend bool operator==(const Triplet&, const Triplet&) = default;
  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

// Name <-> id table; ids are handed out in first-seen order.
class Dictionary {
 public:
  std::uint32_t intern(std::string_view name);
  std::uint32_t id(std::string_view name) const;  // throws std::out_of_range
  bool contains(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

struct Vocabulary {
  Dictionary entities;
  Dictionary relations;  // raw relations only
};

// Compressed-row sparse matrix. Adjacency matrices store 1.0 for every edge.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_offsets_(rows + 1, 0) {}

  // Builds from (row, col) pairs; duplicates are merged into a single 1.0 entry.
  static SparseMatrix from_pairs(std::size_t rows, std::size_t cols,
                                 std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs);
  static SparseMatrix identity(std::size_t n);

  SparseMatrix transpose() const;

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return col_indices_.size(); }
  bool contains(std::uint32_t row, std::uint32_t col) const;

  std::span<const std::uint32_t> row(std::uint32_t r) const {
    return {col_indices_.data() + row_offsets_[r], col_indices_.data() + row_offsets_[r + 1]};
  }
  std::span<const double> row_values(std::uint32_t r) const {
    return {values_.data() + row_offsets_[r], values_.data() + row_offsets_[r + 1]};
  }
  const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }
  const std::vector<std::uint32_t>& col_indices() const { return col_indices_; }
  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::uint32_t> col_indices_;
  std::vector<double> values_;
};

// vᵀM for a dense row v. If mac_count is given it is increased by the number
// of multiply-accumulates performed (one per stored entry whose source is nonzero).
std::vector<double> spmv_left(std::span<const double> v, const SparseMatrix& m,
                              std::uint64_t* mac_count = nullptr);

// Relation layout: raw relations [0, R), their reverses [R, 2R), identity at 2R.
class KnowledgeGraph {
 public:
  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_raw_relations() const { return num_raw_; }
  std::size_t num_relations() const { return 2 * num_raw_ + 1; }

  RelationId reverse_of(RelationId r) const;
  RelationId identity_relation() const { return static_cast<RelationId>(2 * num_raw_); }
  bool is_reverse(RelationId r) const { return r >= num_raw_ && r < 2 * num_raw_; }
  bool is_identity(RelationId r) const { return r == identity_relation(); }
  // Raw relation a (possibly reversed) relation refers to.
  RelationId base_of(RelationId r) const { return is_reverse(r) ? r - static_cast<RelationId>(num_raw_) : r; }

  const std::string& relation_name(RelationId r) const { return relation_names_.at(r); }
  const std::vector<std::string>& relation_names() const { return relation_names_; }
  const std::string& entity_name(EntityId e) const { return entity_names_.at(e); }
  const std::vector<std::string>& entity_names() const { return entity_names_; }
  RelationId relation_id(std::string_view name) const;  // any relation incl. reverse/identity
  EntityId entity_id(std::string_view name) const;

  const SparseMatrix& adjacency(RelationId r) const { return adjacency_.at(r); }
  std::size_t total_nnz() const;
  bool has_edge(RelationId r, EntityId from, EntityId to) const { return adjacency_.at(r).contains(from, to); }

  const std::vector<Triplet>& train() const { return train_; }
  const std::vector<Triplet>& valid() const { return valid_; }
  const std::vector<Triplet>& test() const { return test_; }

  bool is_known(const Triplet& t) const;
  // Sorted tails y with (head, r, y) known in any split; r may be a reverse relation.
  std::span<const EntityId> known_answers(EntityId head, RelationId r) const;

  // Stable 64-bit hash over vocabularies and adjacency.
  std::uint64_t fingerprint() const;

  friend KnowledgeGraph build_graph(const Vocabulary& vocab, std::vector<Triplet> train,
                                    std::vector<Triplet> valid, std::vector<Triplet> test);

 private:
  std::size_t num_entities_ = 0;
  std::size_t num_raw_ = 0;
  std::vector<std::string> entity_names_;
  std::vector<std::string> relation_names_;
  std::unordered_map<std::string, RelationId> relation_ids_;
  std::unordered_map<std::string, EntityId> entity_ids_;
  std::vector<SparseMatrix> adjacency_;
  std::vector<Triplet> train_, valid_, test_;
  // key = head * num_relations + relation
  std::unordered_map<std::uint64_t, std::vector<EntityId>> known_;
};

inline constexpr std::string_view kReversePrefix = "inv_";
inline constexpr std::string_view kIdentityName = "__identity__";

// Parses `head<TAB>relation<TAB>tail` lines. Blank lines are skipped,
// duplicate lines are dropped.
std::vector<Triplet> load_triplets(const std::filesystem::path& path, Vocabulary& vocab);

KnowledgeGraph build_graph(const Vocabulary& vocab, std::vector<Triplet> train,
                           std::vector<Triplet> valid, std::vector<Triplet> test);

// Loads train.txt, valid.txt and test.txt (valid/test optional) from a dataset directory.
KnowledgeGraph load_dataset(const std::filesystem::path& dir);

}  // namespace lerp
