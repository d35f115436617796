#include "kgalign/checkpoint.hpp"

#include "kgalign/loaders.hpp"

#include <algorithm>
#include <bit>
#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <cstring>
#include <fstream>

namespace kgalign {

namespace {

namespace bai = boost::archive::iterators;
using ToBase64 = bai::base64_from_binary<bai::transform_width<const char*, 6, 8>>;
using FromBase64 = bai::transform_width<bai::binary_from_base64<std::string::const_iterator>, 8, 6>;

void to_little_endian(char* bytes, std::size_t n_values) {
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < n_values; ++i) std::reverse(bytes + 8 * i, bytes + 8 * (i + 1));
  }
}

}  // namespace

std::string encode_float64(const Matrix& m) {
  std::string bytes(static_cast<std::size_t>(m.size()) * sizeof(double), '\0');
  std::memcpy(bytes.data(), m.data(), bytes.size());
  to_little_endian(bytes.data(), static_cast<std::size_t>(m.size()));
  std::string out(ToBase64(bytes.data()), ToBase64(bytes.data() + bytes.size()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

Matrix decode_float64(const std::string& text, Eigen::Index rows, Eigen::Index cols) {
  std::string padded = text;
  const auto pad = static_cast<std::size_t>(
      std::distance(padded.rbegin(), std::find_if(padded.rbegin(), padded.rend(),
                                                  [](char c) { return c != '='; })));
  std::replace(padded.end() - static_cast<std::ptrdiff_t>(pad), padded.end(), '=', 'A');
  std::string bytes;
  try {
    bytes.assign(FromBase64(padded.cbegin()), FromBase64(padded.cend()));
  } catch (const std::exception&) {
    throw DataError("invalid base64 tensor payload");
  }
  if (pad > bytes.size()) throw DataError("invalid base64 tensor payload");
  bytes.resize(bytes.size() - pad);
  if (bytes.size() != static_cast<std::size_t>(rows * cols) * sizeof(double)) {
    throw DataError("tensor payload has " + std::to_string(bytes.size()) + " bytes, expected " +
                    std::to_string(rows * cols * 8));
  }
  to_little_endian(bytes.data(), static_cast<std::size_t>(rows * cols));
  Matrix m(rows, cols);
  std::memcpy(m.data(), bytes.data(), bytes.size());
  return m;
}

void save_checkpoint(const std::filesystem::path& file, const std::vector<NamedMatrix>& tensors) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write " + file.string());
  for (const auto& [name, m] : tensors) {
    out << name << '\t' << m.rows() << '\t' << m.cols() << '\t' << encode_float64(m) << '\n';
  }
}

std::vector<NamedMatrix> load_checkpoint(const std::filesystem::path& file) {
  std::vector<NamedMatrix> out;
  const auto lines = read_lines(file);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto f = split(lines[i], '\t');
    if (f.size() != 4) {
      throw DataError(file.string() + ":" + std::to_string(i + 1) + ": expected 4 fields");
    }
    Eigen::Index rows = 0, cols = 0;
    try {
      rows = std::stol(std::string(f[1]));
      cols = std::stol(std::string(f[2]));
    } catch (const std::exception&) {
      throw DataError(file.string() + ":" + std::to_string(i + 1) + ": bad shape");
    }
    out.emplace_back(std::string(f[0]), decode_float64(std::string(f[3]), rows, cols));
  }
  return out;
}

}  // namespace kgalign
