#pragma once

#include "kgalign/common.hpp"
#include "kgalign/checkpoint.hpp"
#include "kgalign/evaluator.hpp"
#include "kgalign/kg.hpp"
#include "kgalign/rhgt.hpp"
#include "kgalign/tensor.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kgalign::train {

enum class NegativeStrategy { random, nearest };

std::string_view to_string(NegativeStrategy s);
NegativeStrategy parse_strategy(std::string_view s);

struct TrainConfig {
  double margin_rel = 10.0;
  double margin_path = 10.0;
  double theta = 0.3;        // path-loss weight, also the inference fusion weight
  int negatives = 5;         // corruptions per side per positive
  NegativeStrategy strategy = NegativeStrategy::nearest;
  int resample_every = 10;
  int epochs = 200;
  double lr = 0.005;
  int eval_every = 10;
  int patience = 5;
  bool use_paths = true;
  // Adds reversed relation edges so every entity aggregates over in- and
  // out-neighbors.
  bool symmetrize = false;
  std::uint64_t seed = 42;
  rhgt::EncoderConfig encoder;

  void validate() const;
};

// Corrupted pairs per positive, in positive order. Each list holds the k
// left corruptions (p', q) followed by the k right corruptions (p, q').
struct NegativeSet {
  std::vector<std::vector<AlignedPair>> rel;
  std::vector<std::vector<AlignedPair>> path;  // empty without the path channel
};

// One channel's negatives. `nearest` picks, for (p, q), the k KG1 entities
// closest to q (excluding p) and the k KG2 entities closest to p (excluding
// q), ties by id; `random` draws k distinct corruptions per side.
std::vector<std::vector<AlignedPair>> sample_channel_negatives(const AlignmentSeeds& seeds,
                                                               const EmbeddingMatrix& emb1,
                                                               const EmbeddingMatrix& emb2, int k,
                                                               NegativeStrategy strategy,
                                                               std::uint64_t epoch_seed);

// Rel and path channels draw from independent streams derived from
// epoch_seed. Path negatives are produced only when both path matrices are
// given.
NegativeSet sample_negatives(const AlignmentSeeds& seeds, const EmbeddingMatrix& rel1,
                             const EmbeddingMatrix& rel2, const EmbeddingMatrix* path1,
                             const EmbeddingMatrix* path2, int k, NegativeStrategy strategy,
                             std::uint64_t epoch_seed);

struct ChannelTensors {
  ad::Tensor kg1;
  ad::Tensor kg2;
};

// sum over positives and their negatives of [d(p,q) - d(p',q') + margin]_+.
ad::Tensor channel_loss(const ChannelTensors& emb, const AlignmentSeeds& seeds,
                        const std::vector<std::vector<AlignedPair>>& negatives, double margin);

// Rel hinge plus theta times the path hinge; `path` is ignored when
// config.use_paths is false.
ad::Tensor loss(const ChannelTensors& rel, const ChannelTensors* path, const AlignmentSeeds& seeds,
                const NegativeSet& negatives, const TrainConfig& config);

// Encoder inputs for both graphs.
struct GraphInputs {
  EmbeddingMatrix names1;
  EmbeddingMatrix names2;
  rhgt::EdgeList rel1;
  rhgt::EdgeList rel2;
  std::optional<rhgt::EdgeList> path1;
  std::optional<rhgt::EdgeList> path2;

  // Path edge lists are built only when with_paths is set; both graphs must
  // then carry path structure.
  static GraphInputs build(const KnowledgeGraph& kg1, const KnowledgeGraph& kg2,
                           EmbeddingMatrix names1, EmbeddingMatrix names2, bool with_paths,
                           bool symmetrize);
  bool has_paths() const { return path1.has_value() && path2.has_value(); }
};

// One rel stack shared by both graphs, and one path stack when enabled.
struct Model {
  rhgt::RhgtParams rel;
  std::optional<rhgt::RhgtParams> path;
  double theta = 0.3;

  static Model init(const TrainConfig& config);
  Model clone() const;
  std::vector<std::pair<std::string, ad::Tensor>> named_tensors() const;
  std::vector<NamedMatrix> to_named_matrices() const;
  // Overwrites every parameter from `tensors`; names and shapes must match.
  void assign(const std::vector<NamedMatrix>& tensors);
};

// Inference-time embeddings of both graphs.
eval::AlignmentEmbeddings embed(const Model& model, const GraphInputs& inputs);

struct HistoryRow {
  int epoch = 0;
  double loss = 0.0;
  std::optional<double> val_hits1;
};

struct TrainResult {
  Model model;  // best validation checkpoint
  eval::AlignmentEmbeddings embeddings;
  std::vector<HistoryRow> history;
  int best_epoch = 0;
  double best_val_hits1 = -1.0;
  bool stopped_early = false;
  std::size_t rel_encoder_calls = 0;
  std::size_t path_encoder_calls = 0;
  // Whether each parameter saw a nonzero gradient on at least one step.
  std::map<std::string, bool> received_gradient;
};

TrainResult train(const GraphInputs& inputs, const AlignmentSeeds& train_seeds,
                  const AlignmentSeeds& valid_seeds, const TrainConfig& config);

std::string history_csv(const std::vector<HistoryRow>& history);

// Stream-splitting helper shared by the trainer and tests.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0);

}  // namespace kgalign::train
