#pragma once

#include "kgalign/common.hpp"

namespace kgalign {

// Manhattan distance between row i of `a` and row j of `b`.
inline double l1_distance(const EmbeddingMatrix& a, EntityId i, const EmbeddingMatrix& b,
                          EntityId j) {
  if (a.cols() != b.cols()) throw ShapeError("l1_distance: embedding dimensions differ");
  return (a.row(i) - b.row(j)).cwiseAbs().sum();
}

}  // namespace kgalign
