#pragma once

#include "kgalign/evaluator.hpp"
#include "kgalign/kg.hpp"
#include "kgalign/rpr.hpp"
#include "kgalign/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace kgalign {

// Every tunable of the pipeline, addressable by a flat key.
struct RunConfig {
  RunConfig() { train.encoder.dim = 0; }

  std::uint64_t seed = 42;
  unsigned threads = 0;  // 0: all hardware threads
  SplitRatio split;
  std::string data;
  std::string paths;  // mined path directory, or "none"

  rpr::MineOptions mine;
  // encoder.dim 0 ("auto") takes the name embedding dimension.
  train::TrainConfig train;

  std::optional<double> theta_inf;  // defaults to the training theta
  eval::CandidateSet candidates = eval::CandidateSet::all;
  std::size_t top_k = 1;

  // Throws UsageError for unknown keys and unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  // Resolved key -> value for every key.
  std::map<std::string, std::string> to_map() const;
  unsigned effective_threads() const;
};

// "key = value" lines; '#' starts a comment; surrounding quotes are stripped.
std::map<std::string, std::string> parse_config_text(const std::string& text,
                                                     const std::string& origin);
std::map<std::string, std::string> read_config_file(const std::filesystem::path& file);
void write_config_file(const std::filesystem::path& file, const RunConfig& config);

// Layers are applied in order; later layers win.
RunConfig resolve_config(const std::vector<std::map<std::string, std::string>>& layers);

SplitRatio parse_split(const std::string& text);
std::string format_split(const SplitRatio& split);

}  // namespace kgalign
