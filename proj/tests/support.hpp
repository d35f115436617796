#pragma once

// Shared oracles and fixtures for the unit and acceptance tests.

#include "kgalign/kg.hpp"
#include "kgalign/rhgt.hpp"
#include "kgalign/rpr.hpp"
#include "kgalign/synthetic.hpp"
#include "kgalign/tensor.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace kgtest {

using namespace kgalign;

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

struct GradCheck {
  double worst_excess = 0.0;  // max of |a - n| - tolerance; <= 0 passes
  double worst_rel = 0.0;
  std::size_t checked = 0;
  bool ok() const { return worst_excess <= 0.0; }
};

// Central finite differences of `f` with respect to every entry of every
// parameter, compared with the gradients reverse mode leaves on them.
// Tolerance: |a - n| <= rtol * max(|a|, |n|) + atol. The small absolute
// floor absorbs roundoff on gradients that are numerically zero.
inline GradCheck check_gradients(std::vector<ad::Tensor> params, const std::function<ad::Tensor()>& f,
                                 double eps = 1e-5, double rtol = 1e-4, double atol = 1e-7) {
  for (auto& p : params) p.zero_grad();
  f().backward();
  std::vector<Matrix> analytic;
  for (auto& p : params) analytic.push_back(p.grad());
  GradCheck out;
  out.worst_excess = -1.0;
  ad::NoGradGuard guard;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& value = params[k].mutable_value();
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double orig = value.data()[i];
      value.data()[i] = orig + eps;
      const double up = f().item();
      value.data()[i] = orig - eps;
      const double down = f().item();
      value.data()[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k].data()[i];
      const double scale = std::max(std::abs(a), std::abs(numeric));
      out.worst_excess = std::max(out.worst_excess, std::abs(a - numeric) - (rtol * scale + atol));
      if (scale > 0.0) out.worst_rel = std::max(out.worst_rel, std::abs(a - numeric) / scale);
      ++out.checked;
    }
  }
  return out;
}

// Small random KG pair with seeds. Structure and names are partly shared so
// that matching produces nontrivial path pairs.
struct RandomPair {
  Dataset data;
  AlignmentSeeds train;
};

inline RandomPair random_kg_pair(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SyntheticOptions o;
  o.entities = std::uniform_int_distribution<std::size_t>(6, 50)(rng);
  o.relations = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
  o.triples = std::uniform_int_distribution<std::size_t>(o.entities, std::min<std::size_t>(200, 4 * o.entities))(rng);
  o.dim = 8;
  o.seed = rng();
  o.name_clusters = std::uniform_int_distribution<std::size_t>(0, 6)(rng);
  o.name_spread = 0.3;
  o.name_noise = std::uniform_real_distribution<double>(0.0, 0.8)(rng);
  o.rewire = std::uniform_real_distribution<double>(0.0, 0.4)(rng);
  RandomPair p;
  p.data = make_twin_dataset(o);
  auto links = p.data.links;
  std::shuffle(links.begin(), links.end(), rng);
  links.resize(std::max<std::size_t>(1, links.size() / 3));
  p.train = AlignmentSeeds{SeedRole::train, links};
  return p;
}

// Label-keyed reliable pairs so that two implementations can be compared
// without sharing path ids.
using LabelPair = std::pair<std::pair<int, int>, std::pair<int, int>>;

struct NaiveMineResult {
  std::map<LabelPair, std::uint64_t> counts;
  std::map<LabelPair, std::uint64_t> kept;
  std::set<std::tuple<int, int, int, int>> path_triples1;  // head, rf, rg, tail
  std::set<std::tuple<int, int, int, int>> path_triples2;
};

// Brute-force miner: two-hop walks by a double loop over all triples,
// neighbor matching by explicit scans, counts in a plain map.
inline NaiveMineResult naive_mine(const KnowledgeGraph& kg1, const KnowledgeGraph& kg2,
                                  const std::vector<AlignedPair>& seeds, const EmbeddingMatrix& n1,
                                  const EmbeddingMatrix& n2, double tau_sim,
                                  std::optional<std::uint64_t> tau_path) {
  auto walks = [](const KnowledgeGraph& kg, EntityId e) {
    std::set<std::tuple<int, int, int>> out;  // neighbor, rf, rg
    for (const auto& t1 : kg.rel_triples()) {
      if (t1.head != e) continue;
      for (const auto& t2 : kg.rel_triples()) {
        if (t2.head == t1.tail) out.insert({t2.tail, t1.relation, t2.relation});
      }
    }
    return out;
  };
  auto cosine = [](const EmbeddingMatrix& a, int i, const EmbeddingMatrix& b, int j) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      dot += a(i, k) * b(j, k);
      na += a(i, k) * a(i, k);
      nb += b(j, k) * b(j, k);
    }
    const double d = std::sqrt(na) * std::sqrt(nb);
    return d > 0.0 ? dot / d : 0.0;
  };

  NaiveMineResult r;
  for (const auto& [p, q] : seeds) {
    const auto w1 = walks(kg1, p);
    const auto w2 = walks(kg2, q);
    if (w1.empty() || w2.empty()) continue;
    std::vector<int> rows, cols;
    for (const auto& [n, a, b] : w1) {
      if (rows.empty() || rows.back() != n) rows.push_back(n);
    }
    for (const auto& [n, a, b] : w2) {
      if (cols.empty() || cols.back() != n) cols.push_back(n);
    }
    struct Proposal {
      double sim;
      std::size_t row, col;
    };
    std::vector<Proposal> props;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::size_t best = 0;
      double best_sim = cosine(n1, rows[i], n2, cols[0]);
      for (std::size_t j = 1; j < cols.size(); ++j) {
        const double s = cosine(n1, rows[i], n2, cols[j]);
        if (s > best_sim) {
          best_sim = s;
          best = j;
        }
      }
      if (best_sim > tau_sim) props.push_back({best_sim, i, best});
    }
    // Selection order: highest similarity first, then (row, col).
    std::vector<bool> used(props.size(), false), col_taken(cols.size(), false);
    for (std::size_t round = 0; round < props.size(); ++round) {
      std::size_t pick = props.size();
      for (std::size_t k = 0; k < props.size(); ++k) {
        if (used[k]) continue;
        if (pick == props.size() || props[k].sim > props[pick].sim ||
            (props[k].sim == props[pick].sim &&
             std::tie(props[k].row, props[k].col) < std::tie(props[pick].row, props[pick].col))) {
          pick = k;
        }
      }
      used[pick] = true;
      if (col_taken[props[pick].col]) continue;
      col_taken[props[pick].col] = true;
      const int left = rows[props[pick].row], right = cols[props[pick].col];
      for (const auto& [n, a, b] : w1) {
        if (n != left) continue;
        for (const auto& [m, c, d] : w2) {
          if (m == right) ++r.counts[{{a, b}, {c, d}}];
        }
      }
    }
  }
  std::set<std::pair<int, int>> left, right;
  if (tau_path) {
    for (const auto& [k, v] : r.counts) {
      if (v > *tau_path) {
        r.kept[k] = v;
        left.insert(k.first);
        right.insert(k.second);
      }
    }
  }
  auto join = [](const KnowledgeGraph& kg, const std::set<std::pair<int, int>>& vocab) {
    std::set<std::tuple<int, int, int, int>> out;
    for (const auto& t1 : kg.rel_triples()) {
      for (const auto& t2 : kg.rel_triples()) {
        if (t1.tail == t2.head && vocab.contains({t1.relation, t2.relation})) {
          out.insert({t1.head, t1.relation, t2.relation, t2.tail});
        }
      }
    }
    return out;
  };
  r.path_triples1 = join(kg1, left);
  r.path_triples2 = join(kg2, right);
  return r;
}

inline std::map<LabelPair, std::uint64_t> relabel(const std::map<rpr::PathPair, std::uint64_t>& m) {
  std::map<LabelPair, std::uint64_t> out;
  for (const auto& [k, v] : m) {
    out[{{k.first.first, k.first.second}, {k.second.first, k.second.second}}] = v;
  }
  return out;
}

inline std::set<std::tuple<int, int, int, int>> path_triple_set(const KnowledgeGraph& kg) {
  std::set<std::tuple<int, int, int, int>> out;
  for (const auto& t : kg.path_triples()) {
    const auto& p = kg.path_vocab()[t.path];
    out.insert({t.head, p.first, p.second, t.tail});
  }
  return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("kgalign_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace kgtest
