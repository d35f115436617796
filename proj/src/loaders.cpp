#include "kgalign/loaders.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_map>

namespace kgalign {

namespace {

std::string where(const fs::path& file, std::size_t line_no) {
  return file.string() + ":" + std::to_string(line_no);
}

std::ofstream open_out(const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write " + file.string());
  out << std::setprecision(17);
  return out;
}

// Assigns contiguous ids from an id file ("id<TAB>uri" or bare "uri").
std::vector<std::string> read_id_file(const fs::path& file) {
  const auto lines = read_lines(file);
  std::vector<std::string> uris(lines.size());
  std::vector<bool> seen(lines.size(), false);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto fields = split(lines[i], '\t');
    if (fields.size() == 1) {
      uris[i] = std::string(fields[0]);
      seen[i] = true;
      continue;
    }
    if (fields.size() != 2) {
      throw DataError(where(file, i + 1) + ": expected 'id<TAB>uri' or 'uri'");
    }
    std::size_t id = 0;
    auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), id);
    if (ec != std::errc() || ptr != fields[0].data() + fields[0].size()) {
      throw DataError(where(file, i + 1) + ": bad id '" + std::string(fields[0]) + "'");
    }
    if (id >= lines.size() || seen[id]) {
      throw DataError(where(file, i + 1) + ": ids must be contiguous from 0 and unique");
    }
    uris[id] = std::string(fields[1]);
    seen[id] = true;
  }
  return uris;
}

}  // namespace

std::vector<std::string> read_lines(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

KnowledgeGraph load_kg(const fs::path& rel_triple_file, const std::optional<fs::path>& entity_file,
                       const std::optional<fs::path>& relation_file) {
  const auto lines = read_lines(rel_triple_file);
  if (lines.empty()) throw DataError(rel_triple_file.string() + ": no triples");

  std::vector<std::string> entities, relations;
  std::unordered_map<std::string, EntityId> eidx;
  std::unordered_map<std::string, RelationId> ridx;
  const bool fixed_entities = entity_file.has_value();
  const bool fixed_relations = relation_file.has_value();
  if (fixed_entities) {
    entities = read_id_file(*entity_file);
    for (std::size_t i = 0; i < entities.size(); ++i) eidx.emplace(entities[i], i);
  }
  if (fixed_relations) {
    relations = read_id_file(*relation_file);
    for (std::size_t i = 0; i < relations.size(); ++i) ridx.emplace(relations[i], i);
  }

  auto entity_id = [&](std::string_view uri, std::size_t line_no) -> EntityId {
    std::string key(uri);
    if (auto it = eidx.find(key); it != eidx.end()) return it->second;
    if (fixed_entities) {
      throw DataError(where(rel_triple_file, line_no) + ": entity not in id file: " + key);
    }
    const auto id = static_cast<EntityId>(entities.size());
    entities.push_back(key);
    eidx.emplace(std::move(key), id);
    return id;
  };
  auto relation_id = [&](std::string_view uri, std::size_t line_no) -> RelationId {
    std::string key(uri);
    if (auto it = ridx.find(key); it != ridx.end()) return it->second;
    if (fixed_relations) {
      throw DataError(where(rel_triple_file, line_no) + ": relation not in id file: " + key);
    }
    const auto id = static_cast<RelationId>(relations.size());
    relations.push_back(key);
    ridx.emplace(std::move(key), id);
    return id;
  };

  std::vector<RelationTriple> triples;
  triples.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto f = split(lines[i], '\t');
    if (f.size() != 3) {
      throw DataError(where(rel_triple_file, i + 1) + ": expected 3 tab-separated fields, got " +
                      std::to_string(f.size()));
    }
    RelationTriple t;
    t.head = entity_id(f[0], i + 1);
    t.relation = relation_id(f[1], i + 1);
    t.tail = entity_id(f[2], i + 1);
    triples.push_back(t);
  }
  return KnowledgeGraph(std::move(entities), std::move(relations), std::move(triples));
}

void save_kg(const KnowledgeGraph& kg, const fs::path& rel_triple_file,
             const fs::path& entity_file, const fs::path& relation_file) {
  auto out = open_out(rel_triple_file);
  for (const auto& t : kg.rel_triples()) {
    out << kg.entity_uri(t.head) << '\t' << kg.relation_uris()[t.relation] << '\t'
        << kg.entity_uri(t.tail) << '\n';
  }
  auto ents = open_out(entity_file);
  for (std::size_t i = 0; i < kg.num_entities(); ++i) ents << i << '\t' << kg.entity_uris()[i] << '\n';
  auto rels = open_out(relation_file);
  for (std::size_t i = 0; i < kg.num_relations(); ++i) rels << i << '\t' << kg.relation_uris()[i] << '\n';
}

std::vector<AlignedPair> load_links(const fs::path& link_file, const KnowledgeGraph& kg1,
                                    const KnowledgeGraph& kg2) {
  const auto lines = read_lines(link_file);
  std::vector<AlignedPair> links;
  links.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto f = split(lines[i], '\t');
    if (f.size() != 2) {
      throw DataError(where(link_file, i + 1) + ": expected 'uri1<TAB>uri2'");
    }
    auto a = kg1.find_entity(f[0]);
    if (!a) throw DataError(where(link_file, i + 1) + ": unknown KG1 entity " + std::string(f[0]));
    auto b = kg2.find_entity(f[1]);
    if (!b) throw DataError(where(link_file, i + 1) + ": unknown KG2 entity " + std::string(f[1]));
    links.emplace_back(*a, *b);
  }
  return links;
}

void write_links(const fs::path& link_file, const KnowledgeGraph& kg1, const KnowledgeGraph& kg2,
                 std::span<const AlignedPair> links) {
  auto out = open_out(link_file);
  for (const auto& [a, b] : links) out << kg1.entity_uri(a) << '\t' << kg2.entity_uri(b) << '\n';
}

SeedSplit load_seeds(const fs::path& link_file, const KnowledgeGraph& kg1,
                     const KnowledgeGraph& kg2, SplitRatio ratio, std::uint64_t seed) {
  return split_seeds(load_links(link_file, kg1, kg2), ratio, seed);
}

EmbeddingMatrix load_embeddings(const fs::path& embedding_file, const KnowledgeGraph& kg) {
  const auto lines = read_lines(embedding_file);
  std::vector<std::vector<double>> rows(kg.num_entities());
  std::optional<std::size_t> dim;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto tab = lines[i].find('\t');
    if (tab == std::string::npos) {
      throw DataError(where(embedding_file, i + 1) + ": expected 'uri<TAB>values'");
    }
    std::string_view uri(lines[i].data(), tab);
    std::vector<double> values;
    std::istringstream in(lines[i].substr(tab + 1));
    in.imbue(std::locale::classic());
    double v = 0;
    while (in >> v) values.push_back(v);
    if (!in.eof()) throw DataError(where(embedding_file, i + 1) + ": bad number");
    if (!dim) dim = values.size();
    if (values.size() != *dim || values.empty()) {
      throw DataError(where(embedding_file, i + 1) + ": ragged dimension, expected " +
                      std::to_string(*dim) + " values, got " + std::to_string(values.size()));
    }
    for (double x : values) {
      if (!std::isfinite(x)) throw DataError(where(embedding_file, i + 1) + ": non-finite value");
    }
    auto id = kg.find_entity(uri);
    if (!id) continue;
    if (!rows[*id].empty()) {
      throw DataError(where(embedding_file, i + 1) + ": duplicate entity " + std::string(uri));
    }
    rows[*id] = std::move(values);
  }
  std::vector<std::string> missing;
  std::size_t n_missing = 0;
  for (std::size_t e = 0; e < rows.size(); ++e) {
    if (rows[e].empty()) {
      if (missing.size() < 10) missing.push_back(kg.entity_uris()[e]);
      ++n_missing;
    }
  }
  if (n_missing > 0) {
    std::string msg = embedding_file.string() + ": " + std::to_string(n_missing) +
                      " entities have no embedding:";
    for (const auto& m : missing) msg += " " + m;
    if (n_missing > missing.size()) msg += " ...";
    throw DataError(msg);
  }
  EmbeddingMatrix out(rows.size(), dim.value_or(0));
  for (std::size_t e = 0; e < rows.size(); ++e) {
    for (std::size_t k = 0; k < *dim; ++k) out(e, k) = rows[e][k];
  }
  return out;
}

void write_embeddings(const fs::path& embedding_file, const KnowledgeGraph& kg,
                      const EmbeddingMatrix& embeddings) {
  if (static_cast<std::size_t>(embeddings.rows()) != kg.num_entities()) {
    throw DataError("embedding rows do not match entity count");
  }
  auto out = open_out(embedding_file);
  for (Eigen::Index e = 0; e < embeddings.rows(); ++e) {
    out << kg.entity_uris()[e] << '\t';
    for (Eigen::Index k = 0; k < embeddings.cols(); ++k) {
      if (k) out << ' ';
      out << embeddings(e, k);
    }
    out << '\n';
  }
}

std::string path_label(const KnowledgeGraph& kg, const RelationPath& path) {
  return kg.hop_label(path.first) + "," + kg.hop_label(path.second);
}

RelationPath parse_path_label(const KnowledgeGraph& kg, std::string_view label) {
  for (auto pos = label.find(','); pos != std::string_view::npos; pos = label.find(',', pos + 1)) {
    auto first = kg.find_hop(label.substr(0, pos));
    auto second = kg.find_hop(label.substr(pos + 1));
    if (first && second) return {*first, *second};
  }
  throw DataError("cannot resolve path '" + std::string(label) + "'");
}

void write_path_triples(const fs::path& file, const KnowledgeGraph& kg) {
  auto out = open_out(file);
  for (const auto& t : kg.path_triples()) {
    out << kg.entity_uri(t.head) << '\t' << path_label(kg, kg.path_vocab()[t.path]) << '\t'
        << kg.entity_uri(t.tail) << '\n';
  }
}

KnowledgeGraph read_path_triples(const fs::path& file, const KnowledgeGraph& kg) {
  std::ifstream probe(file);
  if (!probe) throw DataError("cannot open " + file.string());
  const auto lines = read_lines(file);
  std::map<RelationPath, PathId> vocab_index;
  struct Raw {
    EntityId head;
    RelationPath path;
    EntityId tail;
  };
  std::vector<Raw> raw;
  raw.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto f = split(lines[i], '\t');
    if (f.size() != 3) {
      throw DataError(where(file, i + 1) + ": expected 3 tab-separated fields, got " +
                      std::to_string(f.size()));
    }
    auto h = kg.find_entity(f[0]);
    auto t = kg.find_entity(f[2]);
    if (!h || !t) throw DataError(where(file, i + 1) + ": unknown entity");
    RelationPath p;
    try {
      p = parse_path_label(kg, f[1]);
    } catch (const DataError& e) {
      throw DataError(where(file, i + 1) + ": " + e.what());
    }
    vocab_index.emplace(p, 0);
    raw.push_back({*h, p, *t});
  }
  std::vector<RelationPath> vocab;
  for (auto& [p, id] : vocab_index) {
    id = static_cast<PathId>(vocab.size());
    vocab.push_back(p);
  }
  std::vector<PathTriple> triples;
  triples.reserve(raw.size());
  for (const auto& r : raw) triples.push_back({r.head, vocab_index.at(r.path), r.tail});
  return kg.with_path_triples(std::move(vocab), std::move(triples));
}

}  // namespace kgalign
