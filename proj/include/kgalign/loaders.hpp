#pragma once

#include "kgalign/common.hpp"
#include "kgalign/kg.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kgalign {

namespace fs = std::filesystem;

// Loads head<TAB>relation<TAB>tail triples. Without id files, ids follow
// first appearance in the triple file. Id files hold either "id<TAB>uri" or
// one bare uri per line. Duplicate triple lines are dropped.
KnowledgeGraph load_kg(const fs::path& rel_triple_file,
                       const std::optional<fs::path>& entity_file = std::nullopt,
                       const std::optional<fs::path>& relation_file = std::nullopt);

// Writes triples plus "id<TAB>uri" id files so that reloading reproduces ids.
void save_kg(const KnowledgeGraph& kg, const fs::path& rel_triple_file,
             const fs::path& entity_file, const fs::path& relation_file);

// uri1<TAB>uri2 lines resolved against the two graphs.
std::vector<AlignedPair> load_links(const fs::path& link_file, const KnowledgeGraph& kg1,
                                    const KnowledgeGraph& kg2);
void write_links(const fs::path& link_file, const KnowledgeGraph& kg1, const KnowledgeGraph& kg2,
                 std::span<const AlignedPair> links);

SeedSplit load_seeds(const fs::path& link_file, const KnowledgeGraph& kg1,
                     const KnowledgeGraph& kg2, SplitRatio ratio, std::uint64_t seed);

// uri<TAB>v1 v2 ... vd per line, any order. Rows of the result follow EntityId.
// URIs that are not entities of `kg` are ignored.
EmbeddingMatrix load_embeddings(const fs::path& embedding_file, const KnowledgeGraph& kg);
void write_embeddings(const fs::path& embedding_file, const KnowledgeGraph& kg,
                      const EmbeddingMatrix& embeddings);

// head<TAB>rf,rg<TAB>tail per line.
void write_path_triples(const fs::path& file, const KnowledgeGraph& kg);
KnowledgeGraph read_path_triples(const fs::path& file, const KnowledgeGraph& kg);

// Splits "rf,rg" into two hop labels known to `kg`; tries every comma so
// that labels containing commas still resolve.
RelationPath parse_path_label(const KnowledgeGraph& kg, std::string_view label);
std::string path_label(const KnowledgeGraph& kg, const RelationPath& path);

// Lines of a UTF-8 text file with trailing CR stripped.
std::vector<std::string> read_lines(const fs::path& file);
std::vector<std::string_view> split(std::string_view line, char sep);

}  // namespace kgalign
