#pragma once

#include "kgalign/common.hpp"
#include "kgalign/kg.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace kgalign {

// Two graphs, their gold links and entity name embeddings.
struct Dataset {
  KnowledgeGraph kg1;
  KnowledgeGraph kg2;
  std::vector<AlignedPair> links;
  EmbeddingMatrix names1;
  EmbeddingMatrix names2;
};

// Directory layout:
//   rel_triples_1, rel_triples_2   head<TAB>relation<TAB>tail
//   ent_links                      uri1<TAB>uri2
//   ent_name_emb_1.tsv, ent_name_emb_2.tsv
//   ent_ids_1, ent_ids_2, rel_ids_1, rel_ids_2   optional, fix the id order
Dataset load_dataset(const std::filesystem::path& dir);
void write_dataset(const Dataset& data, const std::filesystem::path& dir);

struct SyntheticOptions {
  std::size_t entities = 200;
  std::size_t relations = 8;
  std::size_t triples = 800;
  int dim = 32;
  std::uint64_t seed = 7;

  // Entities fall into groups that share a name center. 0 gives every
  // entity its own random name.
  std::size_t name_clusters = 0;
  double name_spread = 0.0;  // per-entity offset from its center
  double name_noise = 0.0;   // independent per-graph noise
  // Fraction of KG2 triples whose tail is rewired at random.
  double rewire = 0.0;
  // Extra two-hop chains built from the two most frequent relations.
  std::size_t chains = 0;
};

// KG2 is KG1 under a random id permutation with renamed entities and
// relations, optionally rewired. Relation frequencies fall off as 1/(r+1)
// and every entity has at least one triple.
Dataset make_twin_dataset(const SyntheticOptions& options);

}  // namespace kgalign
