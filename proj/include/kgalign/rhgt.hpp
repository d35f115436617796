#pragma once

#include "kgalign/common.hpp"
#include "kgalign/kg.hpp"
#include "kgalign/tensor.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

// Relation-aware heterogeneous graph transformer.
//
// Each layer builds an embedding per edge type from the mean projected
// embeddings of its head and tail entities, scores every (head, type, tail)
// edge with multi-head attention modulated by that type embedding,
// aggregates per-head messages [V(tail) || type slice] with the attention
// weights, and blends the result with a projected residual through a
// learned sigmoid gate.
//
// Head i owns the relation-embedding columns i, i + h, i + 2h, ..., which
// spreads each head's share evenly over the head half and the tail half.
namespace kgalign::rhgt {

struct EncoderConfig {
  int layers = 2;
  int heads = 4;
  int dim = 300;

  void validate() const;
  int head_dim() const { return dim / heads; }
};

struct Edge {
  std::int64_t head = 0;
  std::int64_t type = 0;
  std::int64_t tail = 0;

  auto operator<=>(const Edge&) const = default;
};

// Parallel edge arrays plus the segment indexes the layer needs. Edges are
// sorted by (head, type, tail).
struct EdgeList {
  std::size_t num_entities = 0;
  std::size_t num_types = 0;
  std::vector<std::int64_t> heads;
  std::vector<std::int64_t> types;
  std::vector<std::int64_t> tails;
  ad::SegmentIndex by_head;

  // Distinct head (tail) entities of each type, for the type means.
  std::vector<std::int64_t> type_head_entities;
  ad::SegmentIndex type_head_seg;
  ad::Tensor type_head_weights;
  std::vector<std::int64_t> type_tail_entities;
  ad::SegmentIndex type_tail_seg;
  ad::Tensor type_tail_weights;
  // Types without any edge; relation_embedding rejects these.
  std::vector<std::int64_t> empty_types;

  static EdgeList build(std::size_t num_entities, std::size_t num_types, std::vector<Edge> edges);
  std::size_t size() const { return heads.size(); }
};

// Relation structure of a graph. With `symmetrize`, every triple also
// contributes a reversed edge whose type is offset by |R|.
std::vector<Edge> relation_edges(const KnowledgeGraph& kg, bool symmetrize = false);
std::vector<Edge> path_edges(const KnowledgeGraph& kg);

// Edge list with type ids renumbered densely over the types that have
// edges. The model has no per-type parameters, so type ids only group edges.
EdgeList compact_edge_list(std::size_t num_entities, std::vector<Edge> edges);

struct Linear {
  ad::Tensor weight;  // in x out
  ad::Tensor bias;    // 1 x out

  ad::Tensor operator()(const ad::Tensor& x) const;
};

struct RhgtLayerParams {
  Linear head_proj;  // d -> d/2
  Linear tail_proj;  // d -> d/2
  Linear key;        // d -> d, head i reads columns [i*d/h, (i+1)*d/h)
  Linear query;      // d -> d
  Linear value;      // d -> d
  ad::Tensor attention;  // (2d/h) x 1, shared by all heads
  Linear aggregate;  // 2d -> d
  Linear residual;   // d -> d
  ad::Tensor gate;   // 1 x 1 logit
};

struct RhgtParams {
  EncoderConfig config;
  std::vector<RhgtLayerParams> layers;

  // Glorot-uniform weights, zero biases, gate logit 0.
  static RhgtParams init(const EncoderConfig& config, std::uint64_t seed);

  std::vector<std::pair<std::string, ad::Tensor>> named_tensors(const std::string& prefix) const;
  std::vector<ad::Tensor> tensors() const;
  RhgtParams clone() const;
};

ad::Tensor relation_embedding(const ad::Tensor& prev, const EdgeList& edges,
                              const RhgtLayerParams& layer);

// Per-edge, per-head attention weights (edges x heads), normalized over
// each head entity's neighborhood.
ad::Tensor heterogeneous_attention(const ad::Tensor& prev, const ad::Tensor& relation_emb,
                                   const EdgeList& edges, const RhgtLayerParams& layer, int heads);

// Per-edge messages (edges x 2d): per head [V_i(tail) || relation slice i].
ad::Tensor heterogeneous_message(const ad::Tensor& prev, const ad::Tensor& relation_emb,
                                 const EdgeList& edges, const RhgtLayerParams& layer, int heads);

ad::Tensor aggregate_and_residual(const ad::Tensor& prev, const ad::Tensor& attention,
                                  const ad::Tensor& messages, const EdgeList& edges,
                                  const RhgtLayerParams& layer);

ad::Tensor encode_layer(const ad::Tensor& prev, const EdgeList& edges,
                        const RhgtLayerParams& layer, int heads);

ad::Tensor encode(const ad::Tensor& names, const EdgeList& edges, const RhgtParams& params);

// Forward pass without recording gradients.
EmbeddingMatrix encode(const EmbeddingMatrix& names, const EdgeList& edges,
                       const RhgtParams& params);

// Column order that lays head i's relation columns out contiguously.
std::vector<std::int64_t> head_column_order(int dim, int heads);

}  // namespace kgalign::rhgt
