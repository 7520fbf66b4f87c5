#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "lerp/kg.hpp"
#include "lerp/tensor.hpp"

namespace lerp::test {

using Edge = std::tuple<std::string, std::string, std::string>;

// Graph over the given entity and relation names (ids in listed order) with
// `edges` as the train split.
inline KnowledgeGraph make_graph(const std::vector<std::string>& entities, const std::vector<std::string>& relations,
                                 const std::vector<Edge>& edges, const std::vector<Edge>& test = {}) {
  Vocabulary vocab;
  for (const auto& e : entities) vocab.entities.intern(e);
  for (const auto& r : relations) vocab.relations.intern(r);
  auto convert = [&](const std::vector<Edge>& list) {
    std::vector<Triplet> out;
    for (const auto& [h, r, t] : list) out.push_back({vocab.entities.id(h), vocab.relations.id(r), vocab.entities.id(t)});
    return out;
  };
  return build_graph(vocab, convert(edges), {}, convert(test));
}

inline std::vector<double> column(const Tensor& t, std::size_t c) {
  std::vector<double> out;
  for (std::size_t r = 0; r < t.rows(); ++r) out.push_back(t(r, c));
  return out;
}

}  // namespace lerp::test
