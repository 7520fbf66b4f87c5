#include "lerp/kg.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "lerp/errors.hpp"

namespace lerp {

std::uint32_t Dictionary::intern(std::string_view name) {
  auto it = ids_.find(std::string(name));
  if (it != ids_.end()) return it->second;
  auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  ids_.emplace(names_.back(), id);
  return id;
}

std::uint32_t Dictionary::id(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) throw std::out_of_range("unknown name: " + std::string(name));
  return it->second;
}

bool Dictionary::contains(std::string_view name) const { return ids_.count(std::string(name)) > 0; }

SparseMatrix SparseMatrix::from_pairs(std::size_t rows, std::size_t cols,
                                      std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs) {
  for (const auto& [r, c] : pairs) {
    if (r >= rows || c >= cols) throw ContractViolation("sparse entry out of range");
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  SparseMatrix m(rows, cols);
  m.col_indices_.reserve(pairs.size());
  m.values_.assign(pairs.size(), 1.0);
  for (const auto& [r, c] : pairs) {
    ++m.row_offsets_[r + 1];
    m.col_indices_.push_back(c);
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_offsets_[r + 1] += m.row_offsets_[r];
  return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  pairs.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) pairs.emplace_back(i, i);
  return from_pairs(n, n, std::move(pairs));
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  pairs.reserve(nnz());
  for (std::uint32_t r = 0; r < rows_; ++r) {
    for (auto c : row(r)) pairs.emplace_back(c, r);
  }
  return from_pairs(cols_, rows_, std::move(pairs));
}

bool SparseMatrix::contains(std::uint32_t r, std::uint32_t c) const {
  if (r >= rows_) return false;
  auto cols = row(r);
  return std::binary_search(cols.begin(), cols.end(), c);
}

std::vector<double> spmv_left(std::span<const double> v, const SparseMatrix& m, std::uint64_t* mac_count) {
  if (v.size() != m.rows()) throw ContractViolation("spmv_left: vector length does not match matrix rows");
  std::vector<double> out(m.cols(), 0.0);
  std::uint64_t macs = 0;
  for (std::uint32_t a = 0; a < m.rows(); ++a) {
    const double va = v[a];
    if (va == 0.0) continue;
    auto cols = m.row(a);
    auto vals = m.row_values(a);
    for (std::size_t k = 0; k < cols.size(); ++k) out[cols[k]] += va * vals[k];
    macs += cols.size();
  }
  if (mac_count) *mac_count += macs;
  return out;
}

RelationId KnowledgeGraph::reverse_of(RelationId r) const {
  if (r < num_raw_) return r + static_cast<RelationId>(num_raw_);
  if (is_reverse(r)) return r - static_cast<RelationId>(num_raw_);
  return r;
}

RelationId KnowledgeGraph::relation_id(std::string_view name) const {
  auto it = relation_ids_.find(std::string(name));
  if (it == relation_ids_.end()) throw QueryError("unknown relation: " + std::string(name));
  return it->second;
}

EntityId KnowledgeGraph::entity_id(std::string_view name) const {
  auto it = entity_ids_.find(std::string(name));
  if (it == entity_ids_.end()) throw QueryError("unknown entity: " + std::string(name));
  return it->second;
}

std::size_t KnowledgeGraph::total_nnz() const {
  std::size_t total = 0;
  for (const auto& a : adjacency_) total += a.nnz();
  return total;
}

bool KnowledgeGraph::is_known(const Triplet& t) const {
  auto answers = known_answers(t.head, t.relation);
  return std::binary_search(answers.begin(), answers.end(), t.tail);
}

std::span<const EntityId> KnowledgeGraph::known_answers(EntityId head, RelationId r) const {
  auto it = known_.find(static_cast<std::uint64_t>(head) * num_relations() + r);
  if (it == known_.end()) return {};
  return it->second;
}

namespace {

void fnv_mix(std::uint64_t& h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

void fnv_mix_u64(std::uint64_t& h, std::uint64_t v) { fnv_mix(h, &v, sizeof v); }

}  // namespace

std::uint64_t KnowledgeGraph::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  fnv_mix_u64(h, num_entities_);
  for (const auto& name : entity_names_) {
    fnv_mix(h, name.data(), name.size());
    fnv_mix_u64(h, 0xff);
  }
  fnv_mix_u64(h, relation_names_.size());
  for (const auto& name : relation_names_) {
    fnv_mix(h, name.data(), name.size());
    fnv_mix_u64(h, 0xff);
  }
  for (const auto& a : adjacency_) {
    fnv_mix_u64(h, a.nnz());
    for (auto off : a.row_offsets()) fnv_mix_u64(h, off);
    for (auto c : a.col_indices()) fnv_mix_u64(h, c);
  }
  return h;
}

std::vector<Triplet> load_triplets(const std::filesystem::path& path, Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());

  std::vector<Triplet> out;
  std::set<Triplet> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    std::string_view rest(line);
    std::vector<std::string_view> fields;
    while (true) {
      auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() != 3) {
      throw ParseError(path.string(), lineno,
                       "expected 3 tab-separated fields, found " + std::to_string(fields.size()));
    }
    for (auto f : fields) {
      if (f.empty()) throw ParseError(path.string(), lineno, "empty field");
    }
    Triplet t{vocab.entities.intern(fields[0]), vocab.relations.intern(fields[1]),
              vocab.entities.intern(fields[2])};
    if (seen.insert(t).second) out.push_back(t);
  }
  if (in.bad()) throw IoError("error while reading " + path.string());
  return out;
}

KnowledgeGraph build_graph(const Vocabulary& vocab, std::vector<Triplet> train, std::vector<Triplet> valid,
                           std::vector<Triplet> test) {
  KnowledgeGraph g;
  g.num_entities_ = vocab.entities.size();
  g.num_raw_ = vocab.relations.size();
  const std::size_t n = g.num_entities_;
  const std::size_t raw = g.num_raw_;

  auto check = [&](const std::vector<Triplet>& split) {
    for (const auto& t : split) {
      if (t.head >= n || t.tail >= n || t.relation >= raw) throw ContractViolation("triplet id out of range");
    }
  };
  check(train);
  check(valid);
  check(test);

  g.entity_names_ = vocab.entities.names();
  for (EntityId e = 0; e < n; ++e) g.entity_ids_.emplace(g.entity_names_[e], e);
  g.relation_names_ = vocab.relations.names();
  for (std::size_t r = 0; r < raw; ++r) g.relation_names_.push_back(std::string(kReversePrefix) + vocab.relations.name(r));
  g.relation_names_.emplace_back(kIdentityName);
  for (RelationId r = 0; r < g.relation_names_.size(); ++r) g.relation_ids_.emplace(g.relation_names_[r], r);

  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> pairs(raw);
  for (const auto& t : train) pairs[t.relation].emplace_back(t.head, t.tail);
  g.adjacency_.reserve(2 * raw + 1);
  for (std::size_t r = 0; r < raw; ++r) g.adjacency_.push_back(SparseMatrix::from_pairs(n, n, std::move(pairs[r])));
  for (std::size_t r = 0; r < raw; ++r) g.adjacency_.push_back(g.adjacency_[r].transpose());
  g.adjacency_.push_back(SparseMatrix::identity(n));

  const std::uint64_t nrel = g.num_relations();
  for (const auto* split : {&train, &valid, &test}) {
    for (const auto& t : *split) {
      g.known_[static_cast<std::uint64_t>(t.head) * nrel + t.relation].push_back(t.tail);
      g.known_[static_cast<std::uint64_t>(t.tail) * nrel + t.relation + raw].push_back(t.head);
    }
  }
  for (auto& [key, tails] : g.known_) {
    std::sort(tails.begin(), tails.end());
    tails.erase(std::unique(tails.begin(), tails.end()), tails.end());
  }

  g.train_ = std::move(train);
  g.valid_ = std::move(valid);
  g.test_ = std::move(test);
  return g;
}

KnowledgeGraph load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  Vocabulary vocab;
  auto train = load_triplets(dir / "train.txt", vocab);
  std::vector<Triplet> valid, test;
  if (std::filesystem::exists(dir / "valid.txt")) valid = load_triplets(dir / "valid.txt", vocab);
  if (std::filesystem::exists(dir / "test.txt")) test = load_triplets(dir / "test.txt", vocab);
  return build_graph(vocab, std::move(train), std::move(valid), std::move(test));
}

}  // namespace lerp
