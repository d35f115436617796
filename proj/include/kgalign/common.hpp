#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace kgalign {

// Dense per-KG indices, contiguous from 0.
using EntityId = std::int32_t;
using RelationId = std::int32_t;
using PathId = std::int32_t;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row-per-entity real matrix (name embeddings, encoder outputs).
using EmbeddingMatrix = Matrix;

using AlignedPair = std::pair<EntityId, EntityId>;

// Malformed or inconsistent input data (files, ids, dimensions).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments on the command line or in a config file.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values during training.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shape mismatch in the numeric backend.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace kgalign
