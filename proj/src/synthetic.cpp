#include "kgalign/synthetic.hpp"

#include "kgalign/loaders.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace kgalign {

namespace {

std::optional<fs::path> if_exists(const fs::path& p) {
  return fs::exists(p) ? std::optional<fs::path>(p) : std::nullopt;
}

void require(const fs::path& p) {
  if (!fs::exists(p)) throw DataError("missing dataset file " + p.string());
}

KnowledgeGraph load_side(const fs::path& dir, int k) {
  const auto suffix = std::to_string(k);
  const auto triples = dir / ("rel_triples_" + suffix);
  require(triples);
  return load_kg(triples, if_exists(dir / ("ent_ids_" + suffix)), if_exists(dir / ("rel_ids_" + suffix)));
}

Eigen::RowVectorXd gaussian_row(int dim, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::RowVectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = n(rng);
  return v;
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory " + dir.string() + " does not exist");
  Dataset d;
  d.kg1 = load_side(dir, 1);
  d.kg2 = load_side(dir, 2);
  require(dir / "ent_links");
  d.links = load_links(dir / "ent_links", d.kg1, d.kg2);
  require(dir / "ent_name_emb_1.tsv");
  require(dir / "ent_name_emb_2.tsv");
  d.names1 = load_embeddings(dir / "ent_name_emb_1.tsv", d.kg1);
  d.names2 = load_embeddings(dir / "ent_name_emb_2.tsv", d.kg2);
  if (d.names1.cols() != d.names2.cols()) throw DataError("name embedding dimensions differ between graphs");
  return d;
}

void write_dataset(const Dataset& data, const fs::path& dir) {
  fs::create_directories(dir);
  save_kg(data.kg1, dir / "rel_triples_1", dir / "ent_ids_1", dir / "rel_ids_1");
  save_kg(data.kg2, dir / "rel_triples_2", dir / "ent_ids_2", dir / "rel_ids_2");
  write_links(dir / "ent_links", data.kg1, data.kg2, data.links);
  write_embeddings(dir / "ent_name_emb_1.tsv", data.kg1, data.names1);
  write_embeddings(dir / "ent_name_emb_2.tsv", data.kg2, data.names2);
}

Dataset make_twin_dataset(const SyntheticOptions& o) {
  if (o.entities < 2 || o.relations < 1) throw UsageError("synthetic graph needs >= 2 entities and >= 1 relation");
  if (o.dim < 1) throw UsageError("synthetic name dimension must be positive");
  const auto n = o.entities;
  std::mt19937_64 rng(o.seed);

  std::vector<double> weights(o.relations);
  for (std::size_t r = 0; r < o.relations; ++r) weights[r] = 1.0 / static_cast<double>(r + 1);
  std::discrete_distribution<RelationId> pick_rel(weights.begin(), weights.end());
  std::uniform_int_distribution<EntityId> pick_ent(0, static_cast<EntityId>(n - 1));

  std::set<RelationTriple> triples;
  // Random tree first so no entity is isolated.
  for (EntityId e = 1; e < static_cast<EntityId>(n); ++e) {
    std::uniform_int_distribution<EntityId> earlier(0, e - 1);
    const EntityId other = earlier(rng);
    const RelationId r = pick_rel(rng);
    if (rng() & 1) {
      triples.insert({e, r, other});
    } else {
      triples.insert({other, r, e});
    }
  }
  const std::size_t max_triples = n * (n - 1) * o.relations;
  const std::size_t target = std::min(std::max(o.triples, triples.size()), max_triples);
  while (triples.size() < target) {
    const EntityId h = pick_ent(rng);
    const EntityId t = pick_ent(rng);
    if (h != t) triples.insert({h, pick_rel(rng), t});
  }
  if (o.relations >= 2) {
    const RelationId ra = 0;
    const RelationId rb = 1;
    for (std::size_t c = 0; c < o.chains; ++c) {
      const EntityId h = pick_ent(rng), m = pick_ent(rng), t = pick_ent(rng);
      if (h == m || m == t) continue;
      triples.insert({h, ra, m});
      triples.insert({m, rb, t});
    }
  }

  std::vector<EntityId> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<std::string> ents1(n), ents2(n), rels1(o.relations), rels2(o.relations);
  for (std::size_t e = 0; e < n; ++e) {
    ents1[e] = "http://kg1.example/entity/" + std::to_string(e);
    ents2[perm[e]] = "http://kg2.example/resource/E" + std::to_string(e);
  }
  for (std::size_t r = 0; r < o.relations; ++r) {
    rels1[r] = "http://kg1.example/rel/" + std::to_string(r);
    rels2[r] = "http://kg2.example/property/p" + std::to_string(r);
  }

  std::bernoulli_distribution rewire(o.rewire);
  std::vector<RelationTriple> t1(triples.begin(), triples.end()), t2;
  for (const auto& t : t1) {
    EntityId tail = t.tail;
    if (o.rewire > 0.0 && rewire(rng)) {
      do {
        tail = pick_ent(rng);
      } while (tail == t.head);
    }
    t2.push_back({perm[t.head], t.relation, perm[tail]});
  }

  Dataset d;
  d.kg1 = KnowledgeGraph(ents1, rels1, t1);
  d.kg2 = KnowledgeGraph(ents2, rels2, t2);
  for (std::size_t e = 0; e < n; ++e) d.links.emplace_back(static_cast<EntityId>(e), perm[e]);

  const double unit = 1.0 / std::sqrt(static_cast<double>(o.dim));
  EmbeddingMatrix base(static_cast<Eigen::Index>(n), o.dim);
  if (o.name_clusters == 0) {
    for (std::size_t e = 0; e < n; ++e) base.row(e) = gaussian_row(o.dim, unit, rng);
  } else {
    std::vector<Eigen::RowVectorXd> centers;
    for (std::size_t c = 0; c < o.name_clusters; ++c) centers.push_back(gaussian_row(o.dim, unit, rng));
    std::uniform_int_distribution<std::size_t> pick_cluster(0, o.name_clusters - 1);
    for (std::size_t e = 0; e < n; ++e) {
      base.row(e) = centers[pick_cluster(rng)] + gaussian_row(o.dim, unit * o.name_spread, rng);
    }
  }
  d.names1 = base;
  d.names2 = EmbeddingMatrix(static_cast<Eigen::Index>(n), o.dim);
  for (std::size_t e = 0; e < n; ++e) {
    d.names2.row(perm[e]) = base.row(e);
    if (o.name_noise > 0.0) {
      d.names1.row(e) += gaussian_row(o.dim, unit * o.name_noise, rng);
      d.names2.row(perm[e]) += gaussian_row(o.dim, unit * o.name_noise, rng);
    }
  }
  return d;
}

}  // namespace kgalign
