#pragma once

#include "kgalign/common.hpp"
#include "kgalign/kg.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

// Reliable path mining: match the two-hop neighborhoods of every training
// seed pair by name similarity, derive co-occurring relation paths from the
// matched neighbors and keep the paths that co-occur often enough.
namespace kgalign::rpr {

struct PathNeighbor {
  EntityId neighbor = 0;
  RelationPath path;

  auto operator<=>(const PathNeighbor&) const = default;
};

// Every (neighbor, path) reachable from `owner` by a directed two-hop walk,
// sorted and deduplicated.
struct PathNeighborhood {
  EntityId owner = 0;
  std::vector<PathNeighbor> entries;
  // Set when the neighborhood exceeded the fan-out bound; entries is empty.
  bool skipped = false;

  // Distinct neighbors in ascending id order; these index the rows/columns
  // of the similarity matrix.
  std::vector<EntityId> distinct_neighbors() const;
};

PathNeighborhood path_neighborhood(const KnowledgeGraph& kg, EntityId e, std::size_t max_fanout,
                                   bool inverse_hops = false);

// Cosine similarity between name embeddings of the distinct neighbors of
// `pn1` (rows) and `pn2` (columns). Zero-norm rows give similarity 0.
Matrix similarity_matrix(const PathNeighborhood& pn1, const PathNeighborhood& pn2,
                         const EmbeddingMatrix& names1, const EmbeddingMatrix& names2);

struct CellMatch {
  std::size_t row = 0;
  std::size_t col = 0;
  double similarity = 0.0;
};

// Greedy one-to-one matching. Each row proposes its maximum cell (lowest
// column on ties) if it exceeds tau_sim; proposals are accepted in order of
// descending similarity, ties by (row, col), unless the column is taken.
std::vector<CellMatch> match_neighbors(const Matrix& similarity, double tau_sim);

struct NeighborMatch {
  EntityId left = 0;
  EntityId right = 0;
  double similarity = 0.0;
};

struct NeighborMatchResult {
  std::vector<NeighborMatch> pairs;
};

NeighborMatchResult match_neighborhoods(const PathNeighborhood& pn1, const PathNeighborhood& pn2,
                                        const EmbeddingMatrix& names1,
                                        const EmbeddingMatrix& names2, double tau_sim);

using PathPair = std::pair<RelationPath, RelationPath>;

// For each matched neighbor pair, the cross product of the paths reaching
// the left neighbor in pn1 with those reaching the right neighbor in pn2.
std::vector<PathPair> deduce_path_pairs(const NeighborMatchResult& match,
                                        const PathNeighborhood& pn1, const PathNeighborhood& pn2);

// Co-occurrence counts of path pairs and the subset above threshold.
struct ReliablePathSet {
  std::map<PathPair, std::uint64_t> counts;
  // nullopt means an infinite threshold.
  std::optional<std::uint64_t> tau_path;
  std::map<PathPair, std::uint64_t> kept;

  void finalize();
  std::vector<RelationPath> left_paths() const;
  std::vector<RelationPath> right_paths() const;
};

struct MineOptions {
  double tau_sim = 0.5;
  std::optional<std::uint64_t> tau_path = 20;
  std::size_t max_fanout = 10'000;
  bool inverse_hops = false;
  unsigned threads = 1;
};

struct MineStats {
  std::size_t seed_pairs = 0;
  std::size_t skipped_hubs = 0;
  std::size_t matched_neighbors = 0;
  std::size_t candidate_pairs = 0;
};

struct MineResult {
  ReliablePathSet reliable;
  KnowledgeGraph kg1;  // input graphs with path vocabulary and path triples
  KnowledgeGraph kg2;
  MineStats stats;
};

// Runs the full mining procedure over the training seeds only.
MineResult mine(const KnowledgeGraph& kg1, const KnowledgeGraph& kg2, const AlignmentSeeds& train,
                const EmbeddingMatrix& names1, const EmbeddingMatrix& names2,
                const MineOptions& options);

// path_vocab.tsv: rf1,rg1<TAB>rf2,rg2<TAB>count for every kept pair.
void write_path_vocab(const std::filesystem::path& file, const KnowledgeGraph& kg1,
                      const KnowledgeGraph& kg2, const ReliablePathSet& reliable);
std::map<PathPair, std::uint64_t> read_path_vocab(const std::filesystem::path& file,
                                                  const KnowledgeGraph& kg1,
                                                  const KnowledgeGraph& kg2);

}  // namespace kgalign::rpr
