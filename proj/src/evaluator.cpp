#include "kgalign/evaluator.hpp"

#include "kgalign/distance.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

namespace kgalign::eval {

namespace {

constexpr int kDefaultKs[] = {1, 5, 10};

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  const std::size_t t = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (t == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = n * w / t; i < n * (w + 1) / t; ++i) fn(i);
    });
  }
}

void check_embeddings(const AlignmentEmbeddings& emb) {
  if (emb.rel1.cols() != emb.rel2.cols()) throw DataError("relation embedding dimensions differ");
  if (emb.path1.has_value() != emb.path2.has_value()) {
    throw DataError("path embeddings must be given for both graphs");
  }
  if (emb.has_paths()) {
    if (emb.path1->cols() != emb.path2->cols() || emb.path1->rows() != emb.rel1.rows() ||
        emb.path2->rows() != emb.rel2.rows()) {
      throw DataError("path embeddings do not match relation embeddings");
    }
  }
}

double cosine(const EmbeddingMatrix& a, EntityId i, const EmbeddingMatrix& b, EntityId j) {
  const double denom = a.row(i).norm() * b.row(j).norm();
  return denom > 0.0 ? a.row(i).dot(b.row(j)) / denom : 0.0;
}

}  // namespace

double fused_distance(const AlignmentEmbeddings& emb, double theta_inf, EntityId i, EntityId j) {
  double d = l1_distance(emb.rel1, i, emb.rel2, j);
  if (emb.has_paths() && theta_inf != 0.0) d += theta_inf * l1_distance(*emb.path1, i, *emb.path2, j);
  return d;
}

Eigen::VectorXd fused_distances(const AlignmentEmbeddings& emb, double theta_inf, EntityId i) {
  Eigen::VectorXd d = (emb.rel2.rowwise() - emb.rel1.row(i)).cwiseAbs().rowwise().sum();
  if (emb.has_paths() && theta_inf != 0.0) {
    d += theta_inf * (emb.path2->rowwise() - emb.path1->row(i)).cwiseAbs().rowwise().sum();
  }
  return d;
}

double RankingResult::hits_at(int k) const {
  auto it = hits.find(k);
  if (it != hits.end()) return it->second;
  if (ranks.empty()) return 0.0;
  const auto n = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= static_cast<std::size_t>(k); });
  return static_cast<double>(n) / static_cast<double>(ranks.size());
}

RankingResult evaluate(const AlignmentSeeds& test, const AlignmentEmbeddings& emb, double theta_inf,
                       std::span<const int> ks, CandidateSet candidates, unsigned threads) {
  check_embeddings(emb);
  std::vector<EntityId> pool;
  if (candidates == CandidateSet::test) {
    for (const auto& [a, b] : test.pairs) pool.push_back(b);
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  }

  RankingResult result;
  result.ranks.assign(test.size(), 0);
  parallel_for(test.size(), threads, [&](std::size_t p) {
    const auto [i, j] = test.pairs[p];
    const Eigen::VectorXd d = fused_distances(emb, theta_inf, i);
    const double target = d[j];
    std::size_t better = 0;
    auto count = [&](EntityId c) {
      if (d[c] < target || (d[c] == target && c < j)) ++better;
    };
    if (candidates == CandidateSet::all) {
      for (EntityId c = 0; c < static_cast<EntityId>(d.size()); ++c) count(c);
    } else {
      for (EntityId c : pool) count(c);
    }
    result.ranks[p] = better + 1;
  });

  for (int k : ks) result.hits[k] = result.hits_at(k);
  if (!result.ranks.empty()) {
    double rr = 0.0;
    for (auto r : result.ranks) rr += 1.0 / static_cast<double>(r);
    result.mrr = rr / static_cast<double>(result.ranks.size());
  }
  return result;
}

RankingResult evaluate(const AlignmentSeeds& test, const AlignmentEmbeddings& emb, double theta_inf,
                       CandidateSet candidates, unsigned threads) {
  return evaluate(test, emb, theta_inf, kDefaultKs, candidates, threads);
}

RankingResult name_only_baseline(const AlignmentSeeds& test, const EmbeddingMatrix& names1,
                                 const EmbeddingMatrix& names2, std::span<const int> ks,
                                 CandidateSet candidates) {
  AlignmentEmbeddings emb{names1, names2, std::nullopt, std::nullopt};
  return evaluate(test, emb, 0.0, ks, candidates);
}

std::vector<AlignedPair> make_harder_split(std::span<const AlignedPair> links,
                                           const EmbeddingMatrix& names1,
                                           const EmbeddingMatrix& names2, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw UsageError("harder-split fraction must be in (0, 1]");
  }
  std::vector<double> sim(links.size());
  for (std::size_t p = 0; p < links.size(); ++p) {
    sim[p] = cosine(names1, links[p].first, names2, links[p].second);
  }
  std::vector<std::size_t> order(links.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sim[a] < sim[b]; });
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(links.size()) - 1e-9));
  std::vector<bool> kept(links.size(), false);
  for (std::size_t r = 0; r < std::min(keep, order.size()); ++r) kept[order[r]] = true;
  std::vector<AlignedPair> out;
  for (std::size_t p = 0; p < links.size(); ++p) {
    if (kept[p]) out.push_back(links[p]);
  }
  return out;
}

std::vector<Prediction> predict(std::span<const EntityId> sources, const AlignmentEmbeddings& emb,
                                double theta_inf, std::size_t top_k, unsigned threads) {
  check_embeddings(emb);
  const auto n2 = static_cast<std::size_t>(emb.rel2.rows());
  const std::size_t k = std::min(top_k, n2);
  std::vector<std::vector<Prediction>> per_source(sources.size());
  parallel_for(sources.size(), threads, [&](std::size_t s) {
    const Eigen::VectorXd d = fused_distances(emb, theta_inf, sources[s]);
    std::vector<EntityId> idx(n2);
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](EntityId a, EntityId b) { return d[a] < d[b] || (d[a] == d[b] && a < b); });
    for (std::size_t r = 0; r < k; ++r) {
      per_source[s].push_back({sources[s], idx[r], d[idx[r]], r + 1});
    }
  });
  std::vector<Prediction> out;
  out.reserve(sources.size() * k);
  for (auto& v : per_source) out.insert(out.end(), v.begin(), v.end());
  return out;
}

std::string to_json(const RankingResult& result) {
  nlohmann::ordered_json j;
  j["hits1"] = result.hits_at(1);
  j["hits5"] = result.hits_at(5);
  j["hits10"] = result.hits_at(10);
  j["mrr"] = result.mrr;
  j["n"] = result.size();
  return j.dump();
}

std::string to_table(const RankingResult& result) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "  n        " << result.size() << "\n";
  out << "  Hits@1   " << 100.0 * result.hits_at(1) << "\n";
  out << "  Hits@5   " << 100.0 * result.hits_at(5) << "\n";
  out << "  Hits@10  " << 100.0 * result.hits_at(10) << "\n";
  out << std::setprecision(4);
  out << "  MRR      " << result.mrr << "\n";
  return out.str();
}

}  // namespace kgalign::eval
