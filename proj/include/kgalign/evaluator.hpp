#pragma once

#include "kgalign/common.hpp"
#include "kgalign/kg.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kgalign::eval {

// Final relation-based (and optionally path-based) embeddings of both graphs.
struct AlignmentEmbeddings {
  EmbeddingMatrix rel1;
  EmbeddingMatrix rel2;
  std::optional<EmbeddingMatrix> path1;
  std::optional<EmbeddingMatrix> path2;

  bool has_paths() const { return path1.has_value() && path2.has_value(); }
};

// D(i, j) = d_rel(i, j) + theta * d_path(i, j); theta is ignored without
// path embeddings.
double fused_distance(const AlignmentEmbeddings& emb, double theta_inf, EntityId i, EntityId j);

// Distances from KG1 entity i to every KG2 entity.
Eigen::VectorXd fused_distances(const AlignmentEmbeddings& emb, double theta_inf, EntityId i);

enum class CandidateSet { all, test };

struct RankingResult {
  std::vector<std::size_t> ranks;  // 1-based, in test-pair order
  std::map<int, double> hits;      // k -> fraction with rank <= k
  double mrr = 0.0;

  std::size_t size() const { return ranks.size(); }
  double hits_at(int k) const;
};

// Ranks every KG2 candidate by fused distance to the left entity of each test
// pair (ties by ascending id) and reports the position of the true match.
RankingResult evaluate(const AlignmentSeeds& test, const AlignmentEmbeddings& emb, double theta_inf,
                       std::span<const int> ks, CandidateSet candidates = CandidateSet::all,
                       unsigned threads = 1);
RankingResult evaluate(const AlignmentSeeds& test, const AlignmentEmbeddings& emb, double theta_inf,
                       CandidateSet candidates = CandidateSet::all, unsigned threads = 1);

// Alignment from name embeddings alone, without any training.
RankingResult name_only_baseline(const AlignmentSeeds& test, const EmbeddingMatrix& names1,
                                 const EmbeddingMatrix& names2, std::span<const int> ks,
                                 CandidateSet candidates = CandidateSet::all);

// Keeps the ceil(fraction * n) links whose names are least similar (cosine),
// in their original order.
std::vector<AlignedPair> make_harder_split(std::span<const AlignedPair> links,
                                           const EmbeddingMatrix& names1,
                                           const EmbeddingMatrix& names2, double fraction);

struct Prediction {
  EntityId source = 0;
  EntityId target = 0;
  double distance = 0.0;
  std::size_t rank = 0;
};

// The top_k KG2 candidates for each source entity, ranked like evaluate().
std::vector<Prediction> predict(std::span<const EntityId> sources, const AlignmentEmbeddings& emb,
                                double theta_inf, std::size_t top_k, unsigned threads = 1);

// {"hits1":..,"hits5":..,"hits10":..,"mrr":..,"n":..}
std::string to_json(const RankingResult& result);
std::string to_table(const RankingResult& result);

}  // namespace kgalign::eval
