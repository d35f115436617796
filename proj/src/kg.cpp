#include "kgalign/kg.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

namespace kgalign {

Adjacency::Adjacency(std::size_t num_nodes, std::span<const std::pair<EntityId, Hop>> edges) {
  offsets_.assign(num_nodes + 1, 0);
  for (const auto& [src, hop] : edges) ++offsets_[src + 1];
  for (std::size_t i = 0; i < num_nodes; ++i) offsets_[i + 1] += offsets_[i];
  hops_.resize(edges.size());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const auto& [src, hop] : edges) hops_[cursor[src]++] = hop;
  for (std::size_t i = 0; i < num_nodes; ++i) {
    std::sort(hops_.begin() + offsets_[i], hops_.begin() + offsets_[i + 1]);
  }
}

namespace {

// Hops from `e` that follow hop relation `r` (inverse when r >= |R|).
std::span<const Hop> hops_of_type(const KnowledgeGraph& kg, EntityId e, RelationId r) {
  const auto nrel = static_cast<RelationId>(kg.num_relations());
  auto edges = r < nrel ? kg.out_edges(e) : kg.in_edges(e);
  const std::int32_t type = r < nrel ? r : r - nrel;
  auto lo = std::lower_bound(edges.begin(), edges.end(), Hop{type, 0});
  auto hi = std::lower_bound(lo, edges.end(), Hop{type + 1, 0});
  return {lo, hi};
}

void check_vocab(const KnowledgeGraph& kg, std::span<const RelationPath> vocab) {
  const auto limit = static_cast<RelationId>(2 * kg.num_relations());
  for (const auto& p : vocab) {
    for (RelationId r : {p.first, p.second}) {
      if (r < 0 || r >= limit) {
        throw DataError("path vocabulary references unknown relation id " + std::to_string(r));
      }
    }
  }
}

Adjacency index_paths(std::size_t n, std::span<const PathTriple> triples) {
  std::vector<std::pair<EntityId, Hop>> edges;
  edges.reserve(triples.size());
  for (const auto& t : triples) edges.push_back({t.head, Hop{t.path, t.tail}});
  return Adjacency(n, edges);
}

}  // namespace

KnowledgeGraph::KnowledgeGraph(std::vector<std::string> entity_uris,
                               std::vector<std::string> relation_uris,
                               std::vector<RelationTriple> triples)
    : entity_uris_(std::move(entity_uris)), relation_uris_(std::move(relation_uris)) {
  for (std::size_t i = 0; i < entity_uris_.size(); ++i) {
    if (!entity_index_.emplace(entity_uris_[i], static_cast<EntityId>(i)).second) {
      throw DataError("duplicate entity uri: " + entity_uris_[i]);
    }
  }
  for (std::size_t i = 0; i < relation_uris_.size(); ++i) {
    if (!relation_index_.emplace(relation_uris_[i], static_cast<RelationId>(i)).second) {
      throw DataError("duplicate relation uri: " + relation_uris_[i]);
    }
  }
  const auto ne = static_cast<EntityId>(entity_uris_.size());
  const auto nr = static_cast<RelationId>(relation_uris_.size());
  for (const auto& t : triples) {
    if (t.head < 0 || t.head >= ne || t.tail < 0 || t.tail >= ne || t.relation < 0 ||
        t.relation >= nr) {
      throw DataError("relation triple out of range");
    }
  }
  const std::size_t before = triples.size();
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  duplicates_dropped_ = before - triples.size();
  rel_triples_ = std::move(triples);

  std::vector<std::pair<EntityId, Hop>> out, in;
  out.reserve(rel_triples_.size());
  in.reserve(rel_triples_.size());
  for (const auto& t : rel_triples_) {
    out.push_back({t.head, Hop{t.relation, t.tail}});
    in.push_back({t.tail, Hop{t.relation, t.head}});
  }
  out_edges_ = Adjacency(entity_uris_.size(), out);
  in_edges_ = Adjacency(entity_uris_.size(), in);
  out_paths_ = Adjacency(entity_uris_.size(), {});
}

std::optional<EntityId> KnowledgeGraph::find_entity(std::string_view uri) const {
  auto it = entity_index_.find(std::string(uri));
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> KnowledgeGraph::find_relation(std::string_view uri) const {
  auto it = relation_index_.find(std::string(uri));
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

std::string KnowledgeGraph::hop_label(RelationId r) const {
  const auto nrel = static_cast<RelationId>(num_relations());
  if (r < nrel) return relation_uris_.at(r);
  return "^" + relation_uris_.at(r - nrel);
}

std::optional<RelationId> KnowledgeGraph::find_hop(std::string_view label) const {
  if (auto r = find_relation(label)) return r;
  if (!label.empty() && label.front() == '^') {
    if (auto r = find_relation(label.substr(1))) {
      return *r + static_cast<RelationId>(num_relations());
    }
  }
  return std::nullopt;
}

KnowledgeGraph KnowledgeGraph::with_paths(std::vector<RelationPath> vocab) const {
  auto triples = build_path_triples(*this, vocab);
  KnowledgeGraph out = *this;
  out.has_paths_ = true;
  out.path_vocab_ = std::move(vocab);
  out.path_triples_ = std::move(triples);
  out.out_paths_ = index_paths(num_entities(), out.path_triples_);
  return out;
}

KnowledgeGraph KnowledgeGraph::with_path_triples(std::vector<RelationPath> vocab,
                                                 std::vector<PathTriple> triples) const {
  check_vocab(*this, vocab);
  if (std::set<RelationPath>(vocab.begin(), vocab.end()).size() != vocab.size()) {
    throw DataError("path vocabulary contains duplicate pairs");
  }
  const auto ne = static_cast<EntityId>(num_entities());
  for (const auto& t : triples) {
    if (t.head < 0 || t.head >= ne || t.tail < 0 || t.tail >= ne || t.path < 0 ||
        t.path >= static_cast<PathId>(vocab.size())) {
      throw DataError("path triple out of range");
    }
    if (!has_path_witness(*this, vocab, t)) {
      throw DataError("path triple (" + entity_uris_[t.head] + ", " +
                      hop_label(vocab[t.path].first) + "," + hop_label(vocab[t.path].second) +
                      ", " + entity_uris_[t.tail] + ") has no two-hop witness");
    }
  }
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  KnowledgeGraph out = *this;
  out.has_paths_ = true;
  out.path_vocab_ = std::move(vocab);
  out.path_triples_ = std::move(triples);
  out.out_paths_ = index_paths(num_entities(), out.path_triples_);
  return out;
}

std::vector<PathTriple> build_path_triples(const KnowledgeGraph& kg,
                                           std::span<const RelationPath> vocab) {
  check_vocab(kg, vocab);
  if (std::set<RelationPath>(vocab.begin(), vocab.end()).size() != vocab.size()) {
    throw DataError("path vocabulary contains duplicate pairs");
  }
  std::vector<PathTriple> out;
  const auto ne = static_cast<EntityId>(kg.num_entities());
  for (EntityId h = 0; h < ne; ++h) {
    for (PathId p = 0; p < static_cast<PathId>(vocab.size()); ++p) {
      for (const Hop& first : hops_of_type(kg, h, vocab[p].first)) {
        for (const Hop& second : hops_of_type(kg, first.target, vocab[p].second)) {
          out.push_back({h, p, second.target});
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool has_path_witness(const KnowledgeGraph& kg, std::span<const RelationPath> vocab,
                      const PathTriple& triple) {
  const auto& p = vocab[triple.path];
  for (const Hop& first : hops_of_type(kg, triple.head, p.first)) {
    for (const Hop& second : hops_of_type(kg, first.target, p.second)) {
      if (second.target == triple.tail) return true;
    }
  }
  return false;
}

std::string_view to_string(SeedRole role) {
  switch (role) {
    case SeedRole::train: return "train";
    case SeedRole::valid: return "valid";
    case SeedRole::test: return "test";
  }
  return "unknown";
}

SeedSplit split_seeds(std::vector<AlignedPair> links, SplitRatio ratio, std::uint64_t seed) {
  if (ratio.train < 0 || ratio.valid < 0 || ratio.test < 0 ||
      ratio.train + ratio.valid + ratio.test != 100) {
    std::ostringstream msg;
    msg << "split percentages must be non-negative and sum to 100, got " << ratio.train << "/"
        << ratio.valid << "/" << ratio.test;
    throw UsageError(msg.str());
  }
  std::set<EntityId> left, right;
  for (const auto& [a, b] : links) {
    if (!left.insert(a).second || !right.insert(b).second) {
      throw DataError("alignment links are not one-to-one");
    }
  }
  std::mt19937_64 rng(seed);
  std::shuffle(links.begin(), links.end(), rng);

  const std::size_t n = links.size();
  const std::size_t n_train = n * static_cast<std::size_t>(ratio.train) / 100;
  const std::size_t n_valid = n * static_cast<std::size_t>(ratio.valid) / 100;
  SeedSplit split;
  split.train.pairs.assign(links.begin(), links.begin() + n_train);
  split.valid.pairs.assign(links.begin() + n_train, links.begin() + n_train + n_valid);
  split.test.pairs.assign(links.begin() + n_train + n_valid, links.end());
  return split;
}

}  // namespace kgalign
