#include "kgalign/trainer.hpp"

#include "kgalign/optim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace kgalign::train {

namespace {

enum Stream : std::uint64_t {
  kRelInit = 1,
  kPathInit = 2,
  kNegatives = 3,
  kRelNegatives = 4,
  kPathNegatives = 5,
};

void check_negative_pool(Eigen::Index n, int k, const char* which) {
  if (n < k + 1) {
    throw DataError(std::string(which) + " has " + std::to_string(n) + " entities; " +
                    std::to_string(k) + " negatives per side need at least " +
                    std::to_string(k + 1));
  }
}

// Up to k ids from `dist`, ascending by (distance, id), skipping `skip`.
template <typename Skip>
std::vector<EntityId> nearest_ids(const Eigen::VectorXd& dist, int k, Skip skip) {
  std::vector<EntityId> ids;
  ids.reserve(dist.size());
  for (EntityId c = 0; c < static_cast<EntityId>(dist.size()); ++c) {
    if (!skip(c)) ids.push_back(c);
  }
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take), ids.end(),
                    [&](EntityId a, EntityId b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
  ids.resize(take);
  return ids;
}

// k distinct uniform draws from [0, n) that `skip` does not reject.
template <typename Skip>
std::vector<EntityId> random_ids(Eigen::Index n, int k, std::mt19937_64& rng, Skip skip) {
  std::vector<EntityId> pool;
  for (EntityId c = 0; c < static_cast<EntityId>(n); ++c) {
    if (!skip(c)) pool.push_back(c);
  }
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), pool.size());
  // Partial Fisher-Yates; the draw order is the output order.
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(take);
  return pool;
}

ad::Tensor pair_distances(const ChannelTensors& emb, std::span<const std::int64_t> left,
                          std::span<const std::int64_t> right) {
  return ad::row_sum(ad::abs(ad::sub(ad::gather_rows(emb.kg1, left), ad::gather_rows(emb.kg2, right))));
}

bool nonzero(const ad::Tensor& t) { return t.has_grad() && t.grad().cwiseAbs().maxCoeff() > 0.0; }

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  // splitmix64 finalizer over a mix of the three inputs.
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1) + 0xbf58476d1ce4e5b9ULL * index;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string_view to_string(NegativeStrategy s) {
  return s == NegativeStrategy::random ? "random" : "nearest";
}

NegativeStrategy parse_strategy(std::string_view s) {
  if (s == "random") return NegativeStrategy::random;
  if (s == "nearest") return NegativeStrategy::nearest;
  throw UsageError("unknown negative sampling strategy '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (!(margin_rel > 0.0) || !(margin_path > 0.0)) throw UsageError("margins must be positive");
  if (!(theta >= 0.0) || !std::isfinite(theta)) throw UsageError("theta must be finite and >= 0");
  if (negatives < 1) throw UsageError("negatives per pair must be >= 1");
  if (resample_every < 1) throw UsageError("resample_every must be >= 1");
  if (epochs < 0) throw UsageError("epochs must be >= 0");
  if (!(lr > 0.0)) throw UsageError("learning rate must be positive");
  if (eval_every < 1) throw UsageError("eval_every must be >= 1");
  if (patience < 1) throw UsageError("patience must be >= 1");
  encoder.validate();
}

std::vector<std::vector<AlignedPair>> sample_channel_negatives(const AlignmentSeeds& seeds,
                                                               const EmbeddingMatrix& emb1,
                                                               const EmbeddingMatrix& emb2, int k,
                                                               NegativeStrategy strategy,
                                                               std::uint64_t epoch_seed) {
  if (k < 1) throw UsageError("negatives per pair must be >= 1");
  if (emb1.cols() != emb2.cols()) throw ShapeError("embedding dimensions differ between graphs");
  check_negative_pool(emb1.rows(), k, "KG1");
  check_negative_pool(emb2.rows(), k, "KG2");

  const std::set<AlignedPair> positives(seeds.pairs.begin(), seeds.pairs.end());
  std::mt19937_64 rng(epoch_seed);
  std::vector<std::vector<AlignedPair>> out(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto [p, q] = seeds.pairs[i];
    auto skip_left = [&](EntityId c) { return c == p || positives.contains({c, q}); };
    auto skip_right = [&](EntityId c) { return c == q || positives.contains({p, c}); };
    std::vector<EntityId> left, right;
    if (strategy == NegativeStrategy::nearest) {
      const Eigen::VectorXd to_q = (emb1.rowwise() - emb2.row(q)).cwiseAbs().rowwise().sum();
      const Eigen::VectorXd to_p = (emb2.rowwise() - emb1.row(p)).cwiseAbs().rowwise().sum();
      left = nearest_ids(to_q, k, skip_left);
      right = nearest_ids(to_p, k, skip_right);
    } else {
      left = random_ids(emb1.rows(), k, rng, skip_left);
      right = random_ids(emb2.rows(), k, rng, skip_right);
    }
    auto& negs = out[i];
    negs.reserve(left.size() + right.size());
    for (EntityId c : left) negs.emplace_back(c, q);
    for (EntityId c : right) negs.emplace_back(p, c);
  }
  return out;
}

NegativeSet sample_negatives(const AlignmentSeeds& seeds, const EmbeddingMatrix& rel1,
                             const EmbeddingMatrix& rel2, const EmbeddingMatrix* path1,
                             const EmbeddingMatrix* path2, int k, NegativeStrategy strategy,
                             std::uint64_t epoch_seed) {
  NegativeSet out;
  out.rel = sample_channel_negatives(seeds, rel1, rel2, k, strategy,
                                     derive_seed(epoch_seed, kRelNegatives));
  if (path1 != nullptr && path2 != nullptr) {
    out.path = sample_channel_negatives(seeds, *path1, *path2, k, strategy,
                                        derive_seed(epoch_seed, kPathNegatives));
  }
  return out;
}

ad::Tensor channel_loss(const ChannelTensors& emb, const AlignmentSeeds& seeds,
                        const std::vector<std::vector<AlignedPair>>& negatives, double margin) {
  if (seeds.empty()) throw DataError("no training seeds");
  if (negatives.size() != seeds.size()) {
    throw ShapeError("negative set covers " + std::to_string(negatives.size()) + " of " +
                     std::to_string(seeds.size()) + " seed pairs");
  }
  std::vector<std::int64_t> pl, pr, nl, nr;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    for (const auto& [a, b] : negatives[i]) {
      pl.push_back(seeds.pairs[i].first);
      pr.push_back(seeds.pairs[i].second);
      nl.push_back(a);
      nr.push_back(b);
    }
  }
  if (pl.empty()) return ad::Tensor::scalar(0.0);
  const auto d_pos = pair_distances(emb, pl, pr);
  const auto d_neg = pair_distances(emb, nl, nr);
  return ad::sum(ad::relu(ad::add_scalar(ad::sub(d_pos, d_neg), margin)));
}

ad::Tensor loss(const ChannelTensors& rel, const ChannelTensors* path, const AlignmentSeeds& seeds,
                const NegativeSet& negatives, const TrainConfig& config) {
  auto total = channel_loss(rel, seeds, negatives.rel, config.margin_rel);
  if (config.use_paths) {
    if (path == nullptr) throw UsageError("path channel enabled but no path embeddings given");
    total = ad::add(total, ad::mul_scalar(channel_loss(*path, seeds, negatives.path, config.margin_path),
                                          config.theta));
  }
  return total;
}

GraphInputs GraphInputs::build(const KnowledgeGraph& kg1, const KnowledgeGraph& kg2,
                               EmbeddingMatrix names1, EmbeddingMatrix names2, bool with_paths,
                               bool symmetrize) {
  if (static_cast<std::size_t>(names1.rows()) != kg1.num_entities() ||
      static_cast<std::size_t>(names2.rows()) != kg2.num_entities()) {
    throw DataError("name embeddings do not cover the entity sets");
  }
  if (names1.cols() != names2.cols()) throw DataError("name embedding dimensions differ between graphs");
  GraphInputs in;
  in.rel1 = rhgt::compact_edge_list(kg1.num_entities(), rhgt::relation_edges(kg1, symmetrize));
  in.rel2 = rhgt::compact_edge_list(kg2.num_entities(), rhgt::relation_edges(kg2, symmetrize));
  if (with_paths) {
    if (!kg1.has_paths() || !kg2.has_paths()) {
      throw DataError("path channel enabled but the graphs carry no mined paths");
    }
    in.path1 = rhgt::compact_edge_list(kg1.num_entities(), rhgt::path_edges(kg1));
    in.path2 = rhgt::compact_edge_list(kg2.num_entities(), rhgt::path_edges(kg2));
  }
  in.names1 = std::move(names1);
  in.names2 = std::move(names2);
  return in;
}

Model Model::init(const TrainConfig& config) {
  Model m;
  m.rel = rhgt::RhgtParams::init(config.encoder, derive_seed(config.seed, kRelInit));
  if (config.use_paths) m.path = rhgt::RhgtParams::init(config.encoder, derive_seed(config.seed, kPathInit));
  m.theta = config.use_paths ? config.theta : 0.0;
  return m;
}

Model Model::clone() const {
  Model m;
  m.rel = rel.clone();
  if (path) m.path = path->clone();
  m.theta = theta;
  return m;
}

std::vector<std::pair<std::string, ad::Tensor>> Model::named_tensors() const {
  auto out = rel.named_tensors("rel");
  if (path) {
    auto p = path->named_tensors("path");
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<NamedMatrix> Model::to_named_matrices() const {
  std::vector<NamedMatrix> out;
  for (const auto& [name, t] : named_tensors()) out.emplace_back(name, t.value());
  return out;
}

void Model::assign(const std::vector<NamedMatrix>& tensors) {
  std::map<std::string, const Matrix*> by_name;
  for (const auto& [name, m] : tensors) by_name[name] = &m;
  auto named = named_tensors();
  if (by_name.size() != named.size()) {
    throw DataError("checkpoint holds " + std::to_string(by_name.size()) + " tensors, model needs " +
                    std::to_string(named.size()));
  }
  for (auto& [name, t] : named) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint is missing tensor '" + name + "'");
    if (it->second->rows() != t.rows() || it->second->cols() != t.cols()) {
      throw DataError("checkpoint tensor '" + name + "' has shape (" + std::to_string(it->second->rows()) +
                      "x" + std::to_string(it->second->cols()) + "), model expects " + t.shape_str());
    }
    t.mutable_value() = *it->second;
  }
}

eval::AlignmentEmbeddings embed(const Model& model, const GraphInputs& inputs) {
  eval::AlignmentEmbeddings out;
  out.rel1 = rhgt::encode(inputs.names1, inputs.rel1, model.rel);
  out.rel2 = rhgt::encode(inputs.names2, inputs.rel2, model.rel);
  if (model.path) {
    if (!inputs.has_paths()) throw DataError("model has a path encoder but the inputs carry no paths");
    out.path1 = rhgt::encode(inputs.names1, *inputs.path1, *model.path);
    out.path2 = rhgt::encode(inputs.names2, *inputs.path2, *model.path);
  }
  return out;
}

TrainResult train(const GraphInputs& inputs, const AlignmentSeeds& train_seeds,
                  const AlignmentSeeds& valid_seeds, const TrainConfig& config) {
  config.validate();
  if (train_seeds.empty()) throw DataError("no training seeds");
  if (config.use_paths && !inputs.has_paths()) {
    throw DataError("path channel enabled but no path structure was provided");
  }

  TrainResult result;
  Model model = Model::init(config);
  for (const auto& [name, t] : model.named_tensors()) result.received_gradient[name] = false;

  std::vector<ad::Tensor> params;
  for (const auto& [name, t] : model.named_tensors()) params.push_back(t);
  ad::Adam adam(params, ad::AdamConfig{config.lr});

  const auto names1 = ad::Tensor::constant(inputs.names1);
  const auto names2 = ad::Tensor::constant(inputs.names2);

  result.model = model.clone();
  int bad_evals = 0;
  NegativeSet negatives;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const ChannelTensors rel{rhgt::encode(names1, inputs.rel1, model.rel),
                             rhgt::encode(names2, inputs.rel2, model.rel)};
    result.rel_encoder_calls += 2;
    std::optional<ChannelTensors> path;
    if (config.use_paths) {
      path = ChannelTensors{rhgt::encode(names1, *inputs.path1, *model.path),
                            rhgt::encode(names2, *inputs.path2, *model.path)};
      result.path_encoder_calls += 2;
    }

    if ((epoch - 1) % config.resample_every == 0) {
      negatives = sample_negatives(train_seeds, rel.kg1.value(), rel.kg2.value(),
                                   path ? &path->kg1.value() : nullptr,
                                   path ? &path->kg2.value() : nullptr, config.negatives,
                                   config.strategy, derive_seed(config.seed, kNegatives, epoch));
    }

    const auto total = loss(rel, path ? &*path : nullptr, train_seeds, negatives, config);
    const double value = total.item();
    if (!std::isfinite(value)) {
      throw NumericalError("loss became non-finite at epoch " + std::to_string(epoch));
    }
    total.backward();
    for (const auto& [name, t] : model.named_tensors()) {
      if (nonzero(t)) result.received_gradient[name] = true;
    }
    adam.step();

    HistoryRow row{epoch, value, std::nullopt};
    if (epoch % config.eval_every == 0 || epoch == config.epochs) {
      const auto emb = embed(model, inputs);
      result.rel_encoder_calls += 2;
      if (model.path) result.path_encoder_calls += 2;
      const double hits1 = valid_seeds.empty()
                               ? 0.0
                               : eval::evaluate(valid_seeds, emb, model.theta, std::array{1}).hits_at(1);
      row.val_hits1 = hits1;
      if (hits1 > result.best_val_hits1 || valid_seeds.empty()) {
        result.best_val_hits1 = hits1;
        result.best_epoch = epoch;
        result.model = model.clone();
        bad_evals = 0;
      } else if (++bad_evals >= config.patience) {
        result.history.push_back(row);
        result.stopped_early = true;
        break;
      }
    }
    result.history.push_back(row);
  }

  result.embeddings = embed(result.model, inputs);
  result.rel_encoder_calls += 2;
  if (result.model.path) result.path_encoder_calls += 2;
  return result;
}

std::string history_csv(const std::vector<HistoryRow>& history) {
  std::ostringstream out;
  out << "epoch,loss,val_hits1\n" << std::setprecision(17);
  for (const auto& row : history) {
    out << row.epoch << ',' << row.loss << ',';
    if (row.val_hits1) out << *row.val_hits1;
    out << '\n';
  }
  return out.str();
}

}  // namespace kgalign::train
