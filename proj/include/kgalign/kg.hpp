#pragma once

#include "kgalign/common.hpp"

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgalign {

struct RelationTriple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  auto operator<=>(const RelationTriple&) const = default;
};

struct PathTriple {
  EntityId head = 0;
  PathId path = 0;
  EntityId tail = 0;

  auto operator<=>(const PathTriple&) const = default;
};

// Ordered relation pair (r_f, r_g) describing a two-hop walk.
//
// A hop relation id r >= |R| denotes walking relation r - |R| against its
// direction. Those only appear when inverse hops are enabled during mining.
struct RelationPath {
  RelationId first = 0;
  RelationId second = 0;

  auto operator<=>(const RelationPath&) const = default;
};

// Adjacency entry: edge type (relation or path id) and the entity on the
// other end.
struct Hop {
  std::int32_t type = 0;
  EntityId target = 0;

  auto operator<=>(const Hop&) const = default;
};

// Compressed adjacency keyed by source entity.
class Adjacency {
 public:
  Adjacency() = default;
  Adjacency(std::size_t num_nodes, std::span<const std::pair<EntityId, Hop>> edges);

  std::span<const Hop> operator[](EntityId e) const {
    return {hops_.data() + offsets_[e], hops_.data() + offsets_[e + 1]};
  }
  std::size_t num_edges() const { return hops_.size(); }

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<Hop> hops_;
};

// One knowledge graph: entities, relations, relation triples and, once
// reliable paths are known, the path vocabulary and path triples.
//
// Immutable after construction. Triples are stored sorted and deduplicated.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  KnowledgeGraph(std::vector<std::string> entity_uris, std::vector<std::string> relation_uris,
                 std::vector<RelationTriple> triples);

  std::size_t num_entities() const { return entity_uris_.size(); }
  std::size_t num_relations() const { return relation_uris_.size(); }

  const std::vector<std::string>& entity_uris() const { return entity_uris_; }
  const std::vector<std::string>& relation_uris() const { return relation_uris_; }
  const std::string& entity_uri(EntityId e) const { return entity_uris_.at(e); }

  std::optional<EntityId> find_entity(std::string_view uri) const;
  std::optional<RelationId> find_relation(std::string_view uri) const;

  std::span<const RelationTriple> rel_triples() const { return rel_triples_; }
  std::span<const Hop> out_edges(EntityId e) const { return out_edges_[e]; }
  std::span<const Hop> in_edges(EntityId e) const { return in_edges_[e]; }

  std::span<const RelationPath> path_vocab() const { return path_vocab_; }
  std::span<const PathTriple> path_triples() const { return path_triples_; }
  std::span<const Hop> out_paths(EntityId e) const { return out_paths_[e]; }
  bool has_paths() const { return has_paths_; }

  // Copy of this graph whose path structure is built from `vocab`.
  KnowledgeGraph with_paths(std::vector<RelationPath> vocab) const;

  // Copy of this graph with an explicit path structure (e.g. read from disk).
  // Every triple must satisfy the two-hop witness condition.
  KnowledgeGraph with_path_triples(std::vector<RelationPath> vocab,
                                   std::vector<PathTriple> triples) const;

  // Hop label; inverse hops carry a leading '^'.
  std::string hop_label(RelationId r) const;
  std::optional<RelationId> find_hop(std::string_view label) const;

  std::size_t duplicates_dropped() const { return duplicates_dropped_; }

 private:
  std::vector<std::string> entity_uris_;
  std::vector<std::string> relation_uris_;
  std::unordered_map<std::string, EntityId> entity_index_;
  std::unordered_map<std::string, RelationId> relation_index_;

  std::vector<RelationTriple> rel_triples_;
  Adjacency out_edges_;
  Adjacency in_edges_;

  bool has_paths_ = false;
  std::vector<RelationPath> path_vocab_;
  std::vector<PathTriple> path_triples_;
  Adjacency out_paths_;

  std::size_t duplicates_dropped_ = 0;
};

// T_path = {(h, p, t) : p = (r_f, r_g) in vocab, (h, r_f, a), (a, r_g, t) in T_rel}.
// Walks through different midpoints collapse into one triple; self-loops are kept.
std::vector<PathTriple> build_path_triples(const KnowledgeGraph& kg,
                                           std::span<const RelationPath> vocab);

// Whether some midpoint witnesses `triple` in `kg` for the given vocabulary.
bool has_path_witness(const KnowledgeGraph& kg, std::span<const RelationPath> vocab,
                      const PathTriple& triple);

enum class SeedRole { train, valid, test };

std::string_view to_string(SeedRole role);

struct AlignmentSeeds {
  SeedRole role = SeedRole::train;
  std::vector<AlignedPair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

struct SeedSplit {
  AlignmentSeeds train{SeedRole::train, {}};
  AlignmentSeeds valid{SeedRole::valid, {}};
  AlignmentSeeds test{SeedRole::test, {}};
};

struct SplitRatio {
  int train = 20;
  int valid = 10;
  int test = 70;
};

// Deterministic shuffle of `links` under `seed`, cut into train/valid/test.
// Train and valid sizes are floor(n * pct / 100); the remainder goes to test.
SeedSplit split_seeds(std::vector<AlignedPair> links, SplitRatio ratio, std::uint64_t seed);

}  // namespace kgalign
