#pragma once

#include "kgalign/common.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

// Minimal reverse-mode automatic differentiation over dense 2-D float64
// tensors.
namespace kgalign::ad {

struct Node {
  Matrix value;
  Matrix grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Propagates this node's grad into its parents.
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
  template <typename Expr>
  void accumulate_expr(const Expr& g) {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
    grad += g;
  }
};

// Handle to a node in the computation graph. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix value);
  static Tensor parameter(Matrix value);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  std::string shape_str() const;

  const Matrix& value() const { return node_->value; }
  // Direct write access for optimizers and checkpoint loading.
  Matrix& mutable_value() { return node_->value; }
  bool requires_grad() const { return node_->requires_grad; }

  // Accumulated gradient; zeros when nothing has flowed in yet.
  Matrix grad() const;
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }

  double item() const;

  // Reverse pass from this 1x1 tensor with seed gradient 1.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

  // Builds an op result. `backward` is stored only when some parent needs
  // gradients.
  static Tensor make(Matrix value, std::vector<Tensor> parents, std::function<void(Node&)> backward);

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

// While alive, ops on this thread build no backward graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Target segment per edge row, e.g. the head entity owning a neighborhood
// row.
struct SegmentIndex {
  std::vector<std::int64_t> ids;
  std::size_t num_segments = 0;

  SegmentIndex() = default;
  SegmentIndex(std::vector<std::int64_t> ids, std::size_t num_segments);
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// a + bias, bias is 1 x cols broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& bias);
// a * s for a 1x1 tensor s.
Tensor scale(const Tensor& a, const Tensor& s);
Tensor mul_scalar(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor row_sum(const Tensor& a);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_cols(std::initializer_list<Tensor> parts);
Tensor slice_cols(const Tensor& a, Eigen::Index begin, Eigen::Index count);
// out[i] = a[index[i]]; backward scatter-adds.
Tensor gather_rows(const Tensor& a, std::span<const std::int64_t> index);
// out[:, j] = a[:, index[j]].
Tensor gather_cols(const Tensor& a, std::span<const std::int64_t> index);

// Column-wise softmax within each segment. Scores are edges x heads.
Tensor segment_softmax(const Tensor& scores, const SegmentIndex& seg);

// out[s] = sum over edges e in s of weights[e] * rows[e]. With c weight
// columns the rows are split into c equal column blocks and block j is
// weighted by column j. Empty segments produce zero rows.
Tensor segment_sum(const Tensor& rows, const Tensor& weights, const SegmentIndex& seg);

}  // namespace kgalign::ad
