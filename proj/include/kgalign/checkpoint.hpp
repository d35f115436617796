#pragma once

#include "kgalign/common.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace kgalign {

using NamedMatrix = std::pair<std::string, Matrix>;

// Flat named-tensor file, one tensor per line:
//   name<TAB>rows<TAB>cols<TAB>base64(little-endian float64, row-major)
void save_checkpoint(const std::filesystem::path& file, const std::vector<NamedMatrix>& tensors);
std::vector<NamedMatrix> load_checkpoint(const std::filesystem::path& file);

std::string encode_float64(const Matrix& m);
Matrix decode_float64(const std::string& text, Eigen::Index rows, Eigen::Index cols);

}  // namespace kgalign
