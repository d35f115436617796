#include "kgalign/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kgalign::ad {

namespace {

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                   b.shape_str());
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail(op, a, b);
}

Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_fail("matmul", a, b);
  Matrix out = a.value() * b.value();
  return Tensor::make(std::move(out), {a, b}, [](Node& n) {
    Node& pa = parent(n, 0);
    Node& pb = parent(n, 1);
    if (pa.requires_grad) pa.accumulate_expr(n.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate_expr(pa.value.transpose() * n.grad);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  return Tensor::make(a.value() + b.value(), {a, b}, [](Node& n) {
    for (auto& p : n.parents) {
      if (p->requires_grad) p->accumulate(n.grad);
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  return Tensor::make(a.value() - b.value(), {a, b}, [](Node& n) {
    if (parent(n, 0).requires_grad) parent(n, 0).accumulate(n.grad);
    if (parent(n, 1).requires_grad) parent(n, 1).accumulate_expr(-n.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  return Tensor::make(a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
    Node& pa = parent(n, 0);
    Node& pb = parent(n, 1);
    if (pa.requires_grad) pa.accumulate_expr(n.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) pb.accumulate_expr(n.grad.cwiseProduct(pa.value));
  });
}

Tensor add_row(const Tensor& a, const Tensor& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) shape_fail("add_row", a, bias);
  Matrix out = a.value().rowwise() + bias.value().row(0);
  return Tensor::make(std::move(out), {a, bias}, [](Node& n) {
    if (parent(n, 0).requires_grad) parent(n, 0).accumulate(n.grad);
    if (parent(n, 1).requires_grad) parent(n, 1).accumulate_expr(n.grad.colwise().sum());
  });
}

Tensor scale(const Tensor& a, const Tensor& s) {
  if (s.rows() != 1 || s.cols() != 1) shape_fail("scale", a, s);
  return Tensor::make(a.value() * s.value()(0, 0), {a, s}, [](Node& n) {
    Node& pa = parent(n, 0);
    Node& ps = parent(n, 1);
    if (pa.requires_grad) pa.accumulate_expr(n.grad * ps.value(0, 0));
    if (ps.requires_grad) {
      Matrix g(1, 1);
      g(0, 0) = n.grad.cwiseProduct(pa.value).sum();
      ps.accumulate(g);
    }
  });
}

Tensor mul_scalar(const Tensor& a, double c) {
  return Tensor::make(a.value() * c, {a}, [c](Node& n) { parent(n, 0).accumulate_expr(n.grad * c); });
}

Tensor add_scalar(const Tensor& a, double c) {
  return Tensor::make(a.value().array() + c, {a}, [](Node& n) { parent(n, 0).accumulate(n.grad); });
}

Tensor relu(const Tensor& a) {
  return Tensor::make(a.value().cwiseMax(0.0), {a}, [](Node& n) {
    Node& pa = parent(n, 0);
    pa.accumulate_expr((pa.value.array() > 0.0).select(n.grad, 0.0).matrix());
  });
}

Tensor sigmoid(const Tensor& a) {
  Matrix out = a.value().unaryExpr([](double x) {
    // Split by sign so exp never overflows.
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return Tensor::make(std::move(out), {a}, [](Node& n) {
    const auto& y = n.value.array();
    parent(n, 0).accumulate_expr((n.grad.array() * y * (1.0 - y)).matrix());
  });
}

Tensor abs(const Tensor& a) {
  return Tensor::make(a.value().cwiseAbs(), {a}, [](Node& n) {
    Node& pa = parent(n, 0);
    pa.accumulate_expr(n.grad.cwiseProduct(pa.value.unaryExpr([](double x) {
      return static_cast<double>((x > 0.0) - (x < 0.0));
    })));
  });
}

Tensor sum(const Tensor& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return Tensor::make(std::move(out), {a}, [](Node& n) {
    Node& pa = parent(n, 0);
    pa.accumulate_expr(Matrix::Constant(pa.value.rows(), pa.value.cols(), n.grad(0, 0)));
  });
}

Tensor row_sum(const Tensor& a) {
  Matrix out = a.value().rowwise().sum();
  return Tensor::make(std::move(out), {a}, [](Node& n) {
    Node& pa = parent(n, 0);
    pa.accumulate_expr(n.grad.replicate(1, pa.value.cols()));
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != parts[0].rows()) shape_fail("concat_cols", parts[0], p);
    cols += p.cols();
  }
  Matrix out(parts[0].rows(), cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    offsets.push_back(off);
    off += p.cols();
  }
  return Tensor::make(std::move(out), {parts.begin(), parts.end()}, [offsets](Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      Node& p = *n.parents[i];
      if (p.requires_grad) p.accumulate_expr(n.grad.middleCols(offsets[i], p.value.cols()));
    }
  });
}

Tensor concat_cols(std::initializer_list<Tensor> parts) {
  return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor slice_cols(const Tensor& a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > a.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " + a.shape_str());
  }
  Matrix out = a.value().middleCols(begin, count);
  return Tensor::make(std::move(out), {a}, [begin, count](Node& n) {
    Node& pa = parent(n, 0);
    if (pa.grad.size() == 0) pa.grad = Matrix::Zero(pa.value.rows(), pa.value.cols());
    pa.grad.middleCols(begin, count) += n.grad;
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::int64_t> index) {
  Matrix out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(index[i]) + " out of range for " +
                       a.shape_str());
    }
    out.row(i) = a.value().row(index[i]);
  }
  std::vector<std::int64_t> idx(index.begin(), index.end());
  return Tensor::make(std::move(out), {a}, [idx = std::move(idx)](Node& n) {
    Node& pa = parent(n, 0);
    if (pa.grad.size() == 0) pa.grad = Matrix::Zero(pa.value.rows(), pa.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) pa.grad.row(idx[i]) += n.grad.row(i);
  });
}

Tensor gather_cols(const Tensor& a, std::span<const std::int64_t> index) {
  Matrix out(a.rows(), static_cast<Eigen::Index>(index.size()));
  for (std::size_t j = 0; j < index.size(); ++j) {
    if (index[j] < 0 || index[j] >= a.cols()) {
      throw ShapeError("gather_cols: column " + std::to_string(index[j]) + " out of range for " +
                       a.shape_str());
    }
    out.col(j) = a.value().col(index[j]);
  }
  std::vector<std::int64_t> idx(index.begin(), index.end());
  return Tensor::make(std::move(out), {a}, [idx = std::move(idx)](Node& n) {
    Node& pa = parent(n, 0);
    if (pa.grad.size() == 0) pa.grad = Matrix::Zero(pa.value.rows(), pa.value.cols());
    for (std::size_t j = 0; j < idx.size(); ++j) pa.grad.col(idx[j]) += n.grad.col(j);
  });
}

Tensor segment_softmax(const Tensor& scores, const SegmentIndex& seg) {
  if (static_cast<std::size_t>(scores.rows()) != seg.ids.size()) {
    throw ShapeError("segment_softmax: " + std::to_string(seg.ids.size()) +
                     " segment ids for scores " + scores.shape_str());
  }
  const auto& x = scores.value();
  const Eigen::Index heads = x.cols();
  Matrix seg_max = Matrix::Constant(seg.num_segments, heads, -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < seg.ids.size(); ++e) {
    seg_max.row(seg.ids[e]) = seg_max.row(seg.ids[e]).cwiseMax(x.row(e));
  }
  Matrix out(x.rows(), heads);
  Matrix denom = Matrix::Zero(seg.num_segments, heads);
  for (std::size_t e = 0; e < seg.ids.size(); ++e) {
    out.row(e) = (x.row(e) - seg_max.row(seg.ids[e])).array().exp().matrix();
    denom.row(seg.ids[e]) += out.row(e);
  }
  for (std::size_t e = 0; e < seg.ids.size(); ++e) {
    out.row(e) = out.row(e).cwiseQuotient(denom.row(seg.ids[e]));
  }
  return Tensor::make(std::move(out), {scores}, [ids = seg.ids, nseg = seg.num_segments](Node& n) {
    // dx_e = y_e * (g_e - sum_{e' in seg} y_e' g_e')
    const auto& y = n.value;
    Matrix dot = Matrix::Zero(nseg, y.cols());
    for (std::size_t e = 0; e < ids.size(); ++e) dot.row(ids[e]) += y.row(e).cwiseProduct(n.grad.row(e));
    Matrix dx(y.rows(), y.cols());
    for (std::size_t e = 0; e < ids.size(); ++e) {
      dx.row(e) = y.row(e).cwiseProduct(n.grad.row(e) - dot.row(ids[e]));
    }
    parent(n, 0).accumulate(dx);
  });
}

Tensor segment_sum(const Tensor& rows, const Tensor& weights, const SegmentIndex& seg) {
  if (rows.rows() != weights.rows() || weights.cols() == 0 || rows.cols() % weights.cols() != 0) {
    shape_fail("segment_sum", rows, weights);
  }
  if (static_cast<std::size_t>(rows.rows()) != seg.ids.size()) {
    throw ShapeError("segment_sum: " + std::to_string(seg.ids.size()) + " segment ids for rows " +
                     rows.shape_str());
  }
  const Eigen::Index blocks = weights.cols();
  const Eigen::Index width = rows.cols() / blocks;
  const auto& r = rows.value();
  const auto& w = weights.value();
  Matrix out = Matrix::Zero(seg.num_segments, rows.cols());
  for (std::size_t e = 0; e < seg.ids.size(); ++e) {
    for (Eigen::Index b = 0; b < blocks; ++b) {
      out.row(seg.ids[e]).segment(b * width, width) += w(e, b) * r.row(e).segment(b * width, width);
    }
  }
  return Tensor::make(std::move(out), {rows, weights}, [ids = seg.ids, blocks, width](Node& n) {
    Node& pr = parent(n, 0);
    Node& pw = parent(n, 1);
    if (pr.requires_grad) {
      Matrix dr(pr.value.rows(), pr.value.cols());
      for (std::size_t e = 0; e < ids.size(); ++e) {
        for (Eigen::Index b = 0; b < blocks; ++b) {
          dr.row(e).segment(b * width, width) = pw.value(e, b) * n.grad.row(ids[e]).segment(b * width, width);
        }
      }
      pr.accumulate(dr);
    }
    if (pw.requires_grad) {
      Matrix dw(pw.value.rows(), blocks);
      for (std::size_t e = 0; e < ids.size(); ++e) {
        for (Eigen::Index b = 0; b < blocks; ++b) {
          dw(e, b) = pr.value.row(e).segment(b * width, width).dot(n.grad.row(ids[e]).segment(b * width, width));
        }
      }
      pw.accumulate(dw);
    }
  });
}

}  // namespace kgalign::ad
