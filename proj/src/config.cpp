#include "kgalign/config.hpp"

#include "kgalign/loaders.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <thread>

namespace kgalign {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw UsageError("invalid value '" + value + "' for " + key + ": expected " + expected);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value, "an integer");
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) bad_value(key, value, "a finite number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value, "true or false");
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field integer_field(T RunConfig::*outer) {
  return {[outer](RunConfig& c, const std::string& k, const std::string& v) { c.*outer = parse_integer<T>(k, v); },
          [outer](const RunConfig& c) { return std::to_string(c.*outer); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["seed"] = integer_field(&RunConfig::seed);
    t["threads"] = integer_field(&RunConfig::threads);
    t["top_k"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                    c.top_k = parse_integer<std::size_t>(k, v);
                    if (c.top_k < 1) bad_value(k, v, "a positive integer");
                  },
                  [](const RunConfig& c) { return std::to_string(c.top_k); }};
    t["split"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.split = parse_split(v); },
                  [](const RunConfig& c) { return format_split(c.split); }};
    t["data"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.data = v; },
                 [](const RunConfig& c) { return c.data; }};
    t["paths"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.paths = v; },
                  [](const RunConfig& c) { return c.paths; }};

    t["tau_sim"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.mine.tau_sim = parse_real(k, v); },
                    [](const RunConfig& c) { return format_real(c.mine.tau_sim); }};
    t["tau_path"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                       if (v == "inf" || v == "infinity") {
                         c.mine.tau_path.reset();
                       } else {
                         c.mine.tau_path = parse_integer<std::uint64_t>(k, v);
                       }
                     },
                     [](const RunConfig& c) {
                       return c.mine.tau_path ? std::to_string(*c.mine.tau_path) : std::string("inf");
                     }};
    t["max_fanout"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         c.mine.max_fanout = parse_integer<std::size_t>(k, v);
                       },
                       [](const RunConfig& c) { return std::to_string(c.mine.max_fanout); }};
    t["inverse_hops"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.mine.inverse_hops = parse_bool(k, v); },
                         [](const RunConfig& c) { return std::string(c.mine.inverse_hops ? "true" : "false"); }};

    auto real = [](double train::TrainConfig::*m) {
      return Field{[m](RunConfig& c, const std::string& k, const std::string& v) { c.train.*m = parse_real(k, v); },
                   [m](const RunConfig& c) { return format_real(c.train.*m); }};
    };
    auto integer = [](int train::TrainConfig::*m) {
      return Field{[m](RunConfig& c, const std::string& k, const std::string& v) { c.train.*m = parse_integer<int>(k, v); },
                   [m](const RunConfig& c) { return std::to_string(c.train.*m); }};
    };
    auto flag = [](bool train::TrainConfig::*m) {
      return Field{[m](RunConfig& c, const std::string& k, const std::string& v) { c.train.*m = parse_bool(k, v); },
                   [m](const RunConfig& c) { return std::string(c.train.*m ? "true" : "false"); }};
    };
    t["dim"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                  c.train.encoder.dim = v == "auto" ? 0 : parse_integer<int>(k, v);
                },
                [](const RunConfig& c) {
                  return c.train.encoder.dim == 0 ? std::string("auto") : std::to_string(c.train.encoder.dim);
                }};
    auto encoder = [](int rhgt::EncoderConfig::*m) {
      return Field{[m](RunConfig& c, const std::string& k, const std::string& v) { c.train.encoder.*m = parse_integer<int>(k, v); },
                   [m](const RunConfig& c) { return std::to_string(c.train.encoder.*m); }};
    };
    t["margin_rel"] = real(&train::TrainConfig::margin_rel);
    t["margin_path"] = real(&train::TrainConfig::margin_path);
    t["theta"] = real(&train::TrainConfig::theta);
    t["lr"] = real(&train::TrainConfig::lr);
    t["negatives"] = integer(&train::TrainConfig::negatives);
    t["resample_every"] = integer(&train::TrainConfig::resample_every);
    t["epochs"] = integer(&train::TrainConfig::epochs);
    t["eval_every"] = integer(&train::TrainConfig::eval_every);
    t["patience"] = integer(&train::TrainConfig::patience);
    t["use_paths"] = flag(&train::TrainConfig::use_paths);
    t["symmetrize"] = flag(&train::TrainConfig::symmetrize);
    t["strategy"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.train.strategy = train::parse_strategy(v); },
                     [](const RunConfig& c) { return std::string(train::to_string(c.train.strategy)); }};
    t["layers"] = encoder(&rhgt::EncoderConfig::layers);
    t["heads"] = encoder(&rhgt::EncoderConfig::heads);

    t["theta_inf"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                        if (v.empty()) {
                          c.theta_inf.reset();
                          return;
                        }
                        const double x = parse_real(k, v);
                        if (x < 0.0) bad_value(k, v, "a number >= 0");
                        c.theta_inf = x;
                      },
                      [](const RunConfig& c) { return c.theta_inf ? format_real(*c.theta_inf) : std::string(); }};
    t["candidates"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         if (v == "all") {
                           c.candidates = eval::CandidateSet::all;
                         } else if (v == "test") {
                           c.candidates = eval::CandidateSet::test;
                         } else {
                           bad_value(k, v, "all or test");
                         }
                       },
                       [](const RunConfig& c) {
                         return std::string(c.candidates == eval::CandidateSet::all ? "all" : "test");
                       }};
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& f = fields();
  auto it = f.find(key);
  if (it == f.end()) throw UsageError("unknown configuration key '" + key + "'");
  it->second.set(*this, key, value);
}

std::string RunConfig::get(const std::string& key) const {
  const auto& f = fields();
  auto it = f.find(key);
  if (it == f.end()) throw UsageError("unknown configuration key '" + key + "'");
  return it->second.get(*this);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [k, f] : fields()) out.push_back(k);
    return out;
  }();
  return names;
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& [k, f] : fields()) out[k] = f.get(*this);
  return out;
}

unsigned RunConfig::effective_threads() const {
  if (threads > 0) return threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line(text, start, end - start);
    start = end + 1;
    ++line_no;
    // '#' outside quotes starts a comment.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    const auto body = trim(line);
    if (body.empty()) continue;
    if (body.front() == '[') {
      throw UsageError(origin + ":" + std::to_string(line_no) + ": sections are not supported");
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw UsageError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = trim(std::string_view(body).substr(0, eq));
    auto value = trim(std::string_view(body).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty()) throw UsageError(origin + ":" + std::to_string(line_no) + ": empty key");
    out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw UsageError("cannot read config file " + file.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text, file.string());
}

void write_config_file(const std::filesystem::path& file, const RunConfig& config) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write " + file.string());
  for (const auto& [k, v] : config.to_map()) out << k << " = \"" << v << "\"\n";
}

RunConfig resolve_config(const std::vector<std::map<std::string, std::string>>& layers) {
  RunConfig c;
  for (const auto& layer : layers) {
    for (const auto& [k, v] : layer) c.set(k, v);
  }
  return c;
}

SplitRatio parse_split(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 3) throw UsageError("split must be 'train,valid,test' percentages, got '" + text + "'");
  int v[3];
  for (int i = 0; i < 3; ++i) {
    v[i] = parse_integer<int>("split", trim(parts[i]));
    if (v[i] < 0) throw UsageError("split percentages must be >= 0");
  }
  if (v[0] + v[1] + v[2] != 100) throw UsageError("split percentages must sum to 100, got '" + text + "'");
  return {v[0], v[1], v[2]};
}

std::string format_split(const SplitRatio& s) {
  return std::to_string(s.train) + "," + std::to_string(s.valid) + "," + std::to_string(s.test);
}

}  // namespace kgalign
