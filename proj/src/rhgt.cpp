#include "kgalign/rhgt.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

namespace kgalign::rhgt {

void EncoderConfig::validate() const {
  if (layers < 1) throw UsageError("encoder needs at least one layer");
  if (heads < 1) throw UsageError("encoder needs at least one attention head");
  if (dim < 2 || dim % 2 != 0) throw UsageError("embedding dimension must be even");
  if (dim % heads != 0) {
    throw UsageError("embedding dimension " + std::to_string(dim) +
                     " is not divisible by the number of heads " + std::to_string(heads));
  }
}

namespace {

// Distinct entities per type as (entities, segment ids, 1/count weights).
void type_means(const std::vector<std::pair<std::int64_t, std::int64_t>>& type_entity,
                std::size_t num_types, std::vector<std::int64_t>& entities, ad::SegmentIndex& seg,
                ad::Tensor& weights) {
  std::vector<std::int64_t> ids;
  std::vector<std::size_t> counts(num_types, 0);
  entities.clear();
  for (const auto& [type, entity] : type_entity) {
    ids.push_back(type);
    entities.push_back(entity);
    ++counts[type];
  }
  Matrix w(static_cast<Eigen::Index>(ids.size()), 1);
  for (std::size_t i = 0; i < ids.size(); ++i) w(i, 0) = 1.0 / static_cast<double>(counts[ids[i]]);
  seg = ad::SegmentIndex(std::move(ids), num_types);
  weights = ad::Tensor::constant(std::move(w));
}

Matrix glorot(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(in, out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Linear make_linear(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng) {
  return {ad::Tensor::parameter(glorot(in, out, rng)), ad::Tensor::parameter(Matrix::Zero(1, out))};
}

Linear clone_linear(const Linear& l) {
  return {ad::Tensor::parameter(l.weight.value()), ad::Tensor::parameter(l.bias.value())};
}

void check_prev(const ad::Tensor& prev, const EdgeList& edges) {
  if (static_cast<std::size_t>(prev.rows()) != edges.num_entities) {
    throw ShapeError("embedding rows " + prev.shape_str() + " do not match " +
                     std::to_string(edges.num_entities) + " entities of the edge list");
  }
}

// Relation embeddings re-ordered by head ownership, then gathered per edge.
ad::Tensor edge_relation_blocks(const ad::Tensor& relation_emb, const EdgeList& edges, int heads) {
  if (static_cast<std::size_t>(relation_emb.rows()) != edges.num_types) {
    throw ShapeError("relation embedding " + relation_emb.shape_str() + " does not match " +
                     std::to_string(edges.num_types) + " edge types");
  }
  const auto order = head_column_order(static_cast<int>(relation_emb.cols()), heads);
  return ad::gather_rows(ad::gather_cols(relation_emb, order), edges.types);
}

ad::Tensor attention_from_blocks(const ad::Tensor& prev, const ad::Tensor& rel_blocks,
                                 const EdgeList& edges, const RhgtLayerParams& layer, int heads) {
  const Eigen::Index hd = prev.cols() / heads;
  if (layer.attention.rows() != 2 * hd || layer.attention.cols() != 1) {
    throw ShapeError("attention vector " + layer.attention.shape_str() + " expected (" +
                     std::to_string(2 * hd) + "x1)");
  }
  const auto keys = ad::gather_rows(layer.key(prev), edges.heads);
  const auto queries = ad::gather_rows(layer.query(prev), edges.tails);
  const auto keyed = ad::mul(keys, rel_blocks);
  const auto queried = ad::mul(queries, rel_blocks);
  std::vector<ad::Tensor> scores;
  scores.reserve(heads);
  for (int i = 0; i < heads; ++i) {
    const auto joint = ad::concat_cols({ad::slice_cols(keyed, i * hd, hd), ad::slice_cols(queried, i * hd, hd)});
    scores.push_back(ad::matmul(joint, layer.attention));
  }
  const auto scaled = ad::mul_scalar(ad::concat_cols(scores), 1.0 / std::sqrt(static_cast<double>(hd)));
  return ad::segment_softmax(scaled, edges.by_head);
}

ad::Tensor message_from_blocks(const ad::Tensor& prev, const ad::Tensor& rel_blocks,
                               const EdgeList& edges, const RhgtLayerParams& layer, int heads) {
  const Eigen::Index hd = prev.cols() / heads;
  const auto values = ad::gather_rows(layer.value(prev), edges.tails);
  std::vector<ad::Tensor> parts;
  parts.reserve(2 * heads);
  for (int i = 0; i < heads; ++i) {
    parts.push_back(ad::slice_cols(values, i * hd, hd));
    parts.push_back(ad::slice_cols(rel_blocks, i * hd, hd));
  }
  return ad::concat_cols(parts);
}

}  // namespace

std::vector<std::int64_t> head_column_order(int dim, int heads) {
  std::vector<std::int64_t> order;
  order.reserve(dim);
  for (int i = 0; i < heads; ++i) {
    for (int c = i; c < dim; c += heads) order.push_back(c);
  }
  return order;
}

EdgeList EdgeList::build(std::size_t num_entities, std::size_t num_types, std::vector<Edge> edges) {
  for (const auto& e : edges) {
    if (e.head < 0 || static_cast<std::size_t>(e.head) >= num_entities || e.tail < 0 ||
        static_cast<std::size_t>(e.tail) >= num_entities || e.type < 0 ||
        static_cast<std::size_t>(e.type) >= num_types) {
      throw DataError("edge out of range");
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  EdgeList out;
  out.num_entities = num_entities;
  out.num_types = num_types;
  out.heads.reserve(edges.size());
  out.types.reserve(edges.size());
  out.tails.reserve(edges.size());
  std::set<std::pair<std::int64_t, std::int64_t>> type_heads, type_tails;
  for (const auto& e : edges) {
    out.heads.push_back(e.head);
    out.types.push_back(e.type);
    out.tails.push_back(e.tail);
    type_heads.emplace(e.type, e.head);
    type_tails.emplace(e.type, e.tail);
  }
  out.by_head = ad::SegmentIndex(out.heads, num_entities);
  std::vector<std::pair<std::int64_t, std::int64_t>> th(type_heads.begin(), type_heads.end());
  std::vector<std::pair<std::int64_t, std::int64_t>> tt(type_tails.begin(), type_tails.end());
  type_means(th, num_types, out.type_head_entities, out.type_head_seg, out.type_head_weights);
  type_means(tt, num_types, out.type_tail_entities, out.type_tail_seg, out.type_tail_weights);
  std::vector<bool> used(num_types, false);
  for (auto t : out.types) used[t] = true;
  for (std::size_t t = 0; t < num_types; ++t) {
    if (!used[t]) out.empty_types.push_back(static_cast<std::int64_t>(t));
  }
  return out;
}

std::vector<Edge> relation_edges(const KnowledgeGraph& kg, bool symmetrize) {
  std::vector<Edge> out;
  const auto nrel = static_cast<std::int64_t>(kg.num_relations());
  for (const auto& t : kg.rel_triples()) {
    out.push_back({t.head, t.relation, t.tail});
    if (symmetrize) out.push_back({t.tail, t.relation + nrel, t.head});
  }
  return out;
}

std::vector<Edge> path_edges(const KnowledgeGraph& kg) {
  std::vector<Edge> out;
  out.reserve(kg.path_triples().size());
  for (const auto& t : kg.path_triples()) out.push_back({t.head, t.path, t.tail});
  return out;
}

EdgeList compact_edge_list(std::size_t num_entities, std::vector<Edge> edges) {
  std::map<std::int64_t, std::int64_t> dense;
  for (const auto& e : edges) dense.emplace(e.type, 0);
  std::int64_t next = 0;
  for (auto& [type, id] : dense) id = next++;
  for (auto& e : edges) e.type = dense.at(e.type);
  return EdgeList::build(num_entities, dense.size(), std::move(edges));
}

ad::Tensor Linear::operator()(const ad::Tensor& x) const {
  return ad::add_row(ad::matmul(x, weight), bias);
}

RhgtParams RhgtParams::init(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const Eigen::Index d = config.dim;
  const Eigen::Index hd = config.head_dim();
  RhgtParams p;
  p.config = config;
  for (int l = 0; l < config.layers; ++l) {
    RhgtLayerParams layer;
    layer.head_proj = make_linear(d, d / 2, rng);
    layer.tail_proj = make_linear(d, d / 2, rng);
    layer.key = make_linear(d, d, rng);
    layer.query = make_linear(d, d, rng);
    layer.value = make_linear(d, d, rng);
    layer.attention = ad::Tensor::parameter(glorot(2 * hd, 1, rng));
    layer.aggregate = make_linear(2 * d, d, rng);
    layer.residual = make_linear(d, d, rng);
    layer.gate = ad::Tensor::scalar(0.0, true);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

std::vector<std::pair<std::string, ad::Tensor>> RhgtParams::named_tensors(
    const std::string& prefix) const {
  std::vector<std::pair<std::string, ad::Tensor>> out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    const std::string base = prefix + ".layer" + std::to_string(l) + ".";
    auto lin = [&](const std::string& name, const Linear& lin) {
      out.emplace_back(base + name + ".weight", lin.weight);
      out.emplace_back(base + name + ".bias", lin.bias);
    };
    lin("head_proj", L.head_proj);
    lin("tail_proj", L.tail_proj);
    lin("key", L.key);
    lin("query", L.query);
    lin("value", L.value);
    out.emplace_back(base + "attention", L.attention);
    lin("aggregate", L.aggregate);
    lin("residual", L.residual);
    out.emplace_back(base + "gate", L.gate);
  }
  return out;
}

std::vector<ad::Tensor> RhgtParams::tensors() const {
  std::vector<ad::Tensor> out;
  for (auto& [name, t] : named_tensors("")) out.push_back(t);
  return out;
}

RhgtParams RhgtParams::clone() const {
  RhgtParams p;
  p.config = config;
  for (const auto& L : layers) {
    RhgtLayerParams c;
    c.head_proj = clone_linear(L.head_proj);
    c.tail_proj = clone_linear(L.tail_proj);
    c.key = clone_linear(L.key);
    c.query = clone_linear(L.query);
    c.value = clone_linear(L.value);
    c.attention = ad::Tensor::parameter(L.attention.value());
    c.aggregate = clone_linear(L.aggregate);
    c.residual = clone_linear(L.residual);
    c.gate = ad::Tensor::parameter(L.gate.value());
    p.layers.push_back(std::move(c));
  }
  return p;
}

ad::Tensor relation_embedding(const ad::Tensor& prev, const EdgeList& edges,
                              const RhgtLayerParams& layer) {
  check_prev(prev, edges);
  if (!edges.empty_types.empty()) {
    throw DataError("edge type " + std::to_string(edges.empty_types.front()) +
                    " has no triples; its embedding is undefined");
  }
  const auto head_mean = ad::segment_sum(ad::gather_rows(prev, edges.type_head_entities),
                                         edges.type_head_weights, edges.type_head_seg);
  const auto tail_mean = ad::segment_sum(ad::gather_rows(prev, edges.type_tail_entities),
                                         edges.type_tail_weights, edges.type_tail_seg);
  return ad::relu(ad::concat_cols({layer.head_proj(head_mean), layer.tail_proj(tail_mean)}));
}

ad::Tensor heterogeneous_attention(const ad::Tensor& prev, const ad::Tensor& relation_emb,
                                   const EdgeList& edges, const RhgtLayerParams& layer, int heads) {
  check_prev(prev, edges);
  return attention_from_blocks(prev, edge_relation_blocks(relation_emb, edges, heads), edges, layer,
                               heads);
}

ad::Tensor heterogeneous_message(const ad::Tensor& prev, const ad::Tensor& relation_emb,
                                 const EdgeList& edges, const RhgtLayerParams& layer, int heads) {
  check_prev(prev, edges);
  return message_from_blocks(prev, edge_relation_blocks(relation_emb, edges, heads), edges, layer,
                             heads);
}

ad::Tensor aggregate_and_residual(const ad::Tensor& prev, const ad::Tensor& attention,
                                  const ad::Tensor& messages, const EdgeList& edges,
                                  const RhgtLayerParams& layer) {
  check_prev(prev, edges);
  const auto update = ad::segment_sum(messages, attention, edges.by_head);
  const auto g = ad::sigmoid(layer.gate);
  const auto keep = ad::add_scalar(ad::mul_scalar(g, -1.0), 1.0);
  return ad::add(ad::scale(layer.aggregate(update), g), ad::scale(layer.residual(prev), keep));
}

ad::Tensor encode_layer(const ad::Tensor& prev, const EdgeList& edges,
                        const RhgtLayerParams& layer, int heads) {
  check_prev(prev, edges);
  const auto rel = relation_embedding(prev, edges, layer);
  const auto blocks = edge_relation_blocks(rel, edges, heads);
  const auto attention = attention_from_blocks(prev, blocks, edges, layer, heads);
  const auto messages = message_from_blocks(prev, blocks, edges, layer, heads);
  return aggregate_and_residual(prev, attention, messages, edges, layer);
}

ad::Tensor encode(const ad::Tensor& names, const EdgeList& edges, const RhgtParams& params) {
  if (names.cols() != params.config.dim) {
    throw DataError("name embedding dimension " + std::to_string(names.cols()) +
                    " does not match encoder dimension " + std::to_string(params.config.dim));
  }
  ad::Tensor x = names;
  for (const auto& layer : params.layers) x = encode_layer(x, edges, layer, params.config.heads);
  return x;
}

EmbeddingMatrix encode(const EmbeddingMatrix& names, const EdgeList& edges,
                       const RhgtParams& params) {
  ad::NoGradGuard guard;
  return encode(ad::Tensor::constant(names), edges, params).value();
}

}  // namespace kgalign::rhgt
