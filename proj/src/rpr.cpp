#include "kgalign/rpr.hpp"

#include "kgalign/loaders.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <thread>

namespace kgalign::rpr {

std::vector<EntityId> PathNeighborhood::distinct_neighbors() const {
  std::vector<EntityId> out;
  for (const auto& e : entries) {
    if (out.empty() || out.back() != e.neighbor) out.push_back(e.neighbor);
  }
  return out;
}

namespace {

// All directed hops out of `e`; inverse hops use relation ids offset by |R|.
template <typename Fn>
void for_each_hop(const KnowledgeGraph& kg, EntityId e, bool inverse_hops, Fn&& fn) {
  for (const Hop& h : kg.out_edges(e)) fn(h.type, h.target);
  if (inverse_hops) {
    const auto nrel = static_cast<RelationId>(kg.num_relations());
    for (const Hop& h : kg.in_edges(e)) fn(h.type + nrel, h.target);
  }
}

Eigen::VectorXd row_norms(const EmbeddingMatrix& m) { return m.rowwise().norm(); }

Matrix cosine_block(std::span<const EntityId> rows, std::span<const EntityId> cols,
                    const EmbeddingMatrix& names1, const Eigen::VectorXd& norms1,
                    const EmbeddingMatrix& names2, const Eigen::VectorXd& norms2) {
  Matrix s(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double denom = norms1[rows[i]] * norms2[cols[j]];
      s(i, j) = denom > 0.0 ? names1.row(rows[i]).dot(names2.row(cols[j])) / denom : 0.0;
    }
  }
  return s;
}

// Paths from the owner to `neighbor`, in sorted order.
std::vector<RelationPath> paths_to(const PathNeighborhood& pn, EntityId neighbor) {
  auto lo = std::lower_bound(pn.entries.begin(), pn.entries.end(),
                             PathNeighbor{neighbor, RelationPath{std::numeric_limits<RelationId>::min(),
                                                                 std::numeric_limits<RelationId>::min()}});
  std::vector<RelationPath> out;
  for (auto it = lo; it != pn.entries.end() && it->neighbor == neighbor; ++it) out.push_back(it->path);
  return out;
}

NeighborMatchResult to_entities(const std::vector<CellMatch>& cells, std::span<const EntityId> left,
                                std::span<const EntityId> right) {
  NeighborMatchResult out;
  out.pairs.reserve(cells.size());
  for (const auto& c : cells) out.pairs.push_back({left[c.row], right[c.col], c.similarity});
  return out;
}

}  // namespace

PathNeighborhood path_neighborhood(const KnowledgeGraph& kg, EntityId e, std::size_t max_fanout,
                                   bool inverse_hops) {
  PathNeighborhood pn;
  pn.owner = e;
  for_each_hop(kg, e, inverse_hops, [&](RelationId rf, EntityId mid) {
    for_each_hop(kg, mid, inverse_hops, [&](RelationId rg, EntityId tail) {
      pn.entries.push_back({tail, RelationPath{rf, rg}});
    });
  });
  std::sort(pn.entries.begin(), pn.entries.end());
  pn.entries.erase(std::unique(pn.entries.begin(), pn.entries.end()), pn.entries.end());
  if (pn.entries.size() > max_fanout) {
    pn.entries.clear();
    pn.entries.shrink_to_fit();
    pn.skipped = true;
  }
  return pn;
}

Matrix similarity_matrix(const PathNeighborhood& pn1, const PathNeighborhood& pn2,
                         const EmbeddingMatrix& names1, const EmbeddingMatrix& names2) {
  if (names1.cols() != names2.cols()) throw DataError("name embedding dimensions differ");
  const auto rows = pn1.distinct_neighbors();
  const auto cols = pn2.distinct_neighbors();
  return cosine_block(rows, cols, names1, row_norms(names1), names2, row_norms(names2));
}

std::vector<CellMatch> match_neighbors(const Matrix& similarity, double tau_sim) {
  std::vector<CellMatch> proposals;
  for (Eigen::Index i = 0; i < similarity.rows(); ++i) {
    if (similarity.cols() == 0) break;
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < similarity.cols(); ++j) {
      if (similarity(i, j) > similarity(i, best)) best = j;
    }
    if (similarity(i, best) > tau_sim) {
      proposals.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(best),
                           similarity(i, best)});
    }
  }
  std::sort(proposals.begin(), proposals.end(), [](const CellMatch& a, const CellMatch& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  std::vector<bool> col_taken(similarity.cols(), false);
  std::vector<CellMatch> accepted;
  for (const auto& p : proposals) {
    // Rows propose once, so only columns can collide.
    if (col_taken[p.col]) continue;
    col_taken[p.col] = true;
    accepted.push_back(p);
  }
  return accepted;
}

NeighborMatchResult match_neighborhoods(const PathNeighborhood& pn1, const PathNeighborhood& pn2,
                                        const EmbeddingMatrix& names1,
                                        const EmbeddingMatrix& names2, double tau_sim) {
  const auto rows = pn1.distinct_neighbors();
  const auto cols = pn2.distinct_neighbors();
  const Matrix s = cosine_block(rows, cols, names1, row_norms(names1), names2, row_norms(names2));
  return to_entities(match_neighbors(s, tau_sim), rows, cols);
}

std::vector<PathPair> deduce_path_pairs(const NeighborMatchResult& match,
                                        const PathNeighborhood& pn1, const PathNeighborhood& pn2) {
  std::vector<PathPair> out;
  for (const auto& m : match.pairs) {
    const auto left = paths_to(pn1, m.left);
    const auto right = paths_to(pn2, m.right);
    for (const auto& p1 : left) {
      for (const auto& p2 : right) out.emplace_back(p1, p2);
    }
  }
  return out;
}

void ReliablePathSet::finalize() {
  kept.clear();
  if (!tau_path) return;
  for (const auto& [pair, count] : counts) {
    if (count > *tau_path) kept.emplace(pair, count);
  }
}

std::vector<RelationPath> ReliablePathSet::left_paths() const {
  std::set<RelationPath> s;
  for (const auto& [pair, count] : kept) s.insert(pair.first);
  return {s.begin(), s.end()};
}

std::vector<RelationPath> ReliablePathSet::right_paths() const {
  std::set<RelationPath> s;
  for (const auto& [pair, count] : kept) s.insert(pair.second);
  return {s.begin(), s.end()};
}

MineResult mine(const KnowledgeGraph& kg1, const KnowledgeGraph& kg2, const AlignmentSeeds& train,
                const EmbeddingMatrix& names1, const EmbeddingMatrix& names2,
                const MineOptions& options) {
  if (train.role != SeedRole::train) {
    throw UsageError("path mining accepts training seeds only, got " +
                     std::string(to_string(train.role)));
  }
  if (train.empty()) throw DataError("path mining needs at least one training seed");
  if (static_cast<std::size_t>(names1.rows()) != kg1.num_entities() ||
      static_cast<std::size_t>(names2.rows()) != kg2.num_entities()) {
    throw DataError("name embeddings do not cover the graphs");
  }
  if (names1.cols() != names2.cols()) throw DataError("name embedding dimensions differ");

  const Eigen::VectorXd norms1 = row_norms(names1);
  const Eigen::VectorXd norms2 = row_norms(names2);

  struct Partial {
    std::map<PathPair, std::uint64_t> counts;
    MineStats stats;
  };
  auto work = [&](std::size_t begin, std::size_t end, Partial& out) {
    for (std::size_t s = begin; s < end; ++s) {
      const auto [a1, a2] = train.pairs[s];
      const auto pn1 = path_neighborhood(kg1, a1, options.max_fanout, options.inverse_hops);
      const auto pn2 = path_neighborhood(kg2, a2, options.max_fanout, options.inverse_hops);
      out.stats.skipped_hubs += pn1.skipped + pn2.skipped;
      if (pn1.entries.empty() || pn2.entries.empty()) continue;
      const auto rows = pn1.distinct_neighbors();
      const auto cols = pn2.distinct_neighbors();
      const Matrix sim = cosine_block(rows, cols, names1, norms1, names2, norms2);
      const auto match = to_entities(match_neighbors(sim, options.tau_sim), rows, cols);
      out.stats.matched_neighbors += match.pairs.size();
      for (const auto& pair : deduce_path_pairs(match, pn1, pn2)) {
        ++out.counts[pair];
        ++out.stats.candidate_pairs;
      }
    }
  };

  const std::size_t n = train.size();
  const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, n);
  std::vector<Partial> partials(threads);
  if (threads == 1) {
    work(0, n, partials[0]);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] { work(n * t / threads, n * (t + 1) / threads, partials[t]); });
    }
  }

  MineResult result;
  result.reliable.tau_path = options.tau_path;
  result.stats.seed_pairs = n;
  for (const auto& p : partials) {
    for (const auto& [pair, count] : p.counts) result.reliable.counts[pair] += count;
    result.stats.skipped_hubs += p.stats.skipped_hubs;
    result.stats.matched_neighbors += p.stats.matched_neighbors;
    result.stats.candidate_pairs += p.stats.candidate_pairs;
  }
  result.reliable.finalize();
  result.kg1 = kg1.with_paths(result.reliable.left_paths());
  result.kg2 = kg2.with_paths(result.reliable.right_paths());
  return result;
}

void write_path_vocab(const std::filesystem::path& file, const KnowledgeGraph& kg1,
                      const KnowledgeGraph& kg2, const ReliablePathSet& reliable) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write " + file.string());
  for (const auto& [pair, count] : reliable.kept) {
    out << path_label(kg1, pair.first) << '\t' << path_label(kg2, pair.second) << '\t' << count
        << '\n';
  }
}

std::map<PathPair, std::uint64_t> read_path_vocab(const std::filesystem::path& file,
                                                  const KnowledgeGraph& kg1,
                                                  const KnowledgeGraph& kg2) {
  std::map<PathPair, std::uint64_t> out;
  const auto lines = read_lines(file);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto f = split(lines[i], '\t');
    const auto where = file.string() + ":" + std::to_string(i + 1);
    if (f.size() != 3) throw DataError(where + ": expected 3 tab-separated fields");
    std::uint64_t count = 0;
    try {
      count = std::stoull(std::string(f[2]));
    } catch (const std::exception&) {
      throw DataError(where + ": bad count");
    }
    try {
      out[{parse_path_label(kg1, f[0]), parse_path_label(kg2, f[1])}] = count;
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

}  // namespace kgalign::rpr
