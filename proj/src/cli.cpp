#include "kgalign/cli.hpp"

#include "kgalign/checkpoint.hpp"
#include "kgalign/config.hpp"
#include "kgalign/evaluator.hpp"
#include "kgalign/loaders.hpp"
#include "kgalign/rpr.hpp"
#include "kgalign/synthetic.hpp"
#include "kgalign/trainer.hpp"

#include <CLI11.hpp>
#include <boost/crc.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#ifndef KGALIGN_VERSION
#define KGALIGN_VERSION "0.0.0"
#endif

namespace kgalign::cli {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kParamsFile = "params.ckpt";
constexpr const char* kConfigFile = "config.cfg";

// A command-line option bound to a configuration key.
struct KeyOption {
  std::string key;
  std::string value;
  CLI::Option* option = nullptr;
};

struct Command {
  CLI::App* app = nullptr;
  std::vector<std::unique_ptr<KeyOption>> keys;
  std::string config_file;
  bool dry_run = false;

  void bind(const std::string& key, const std::string& help, bool is_flag = false) {
    auto k = std::make_unique<KeyOption>();
    k->key = key;
    std::string name = "--" + key;
    std::replace(name.begin(), name.end(), '_', '-');
    if (is_flag) {
      k->option = app->add_flag_callback(name, [p = k.get()] { p->value = "true"; }, help);
    } else {
      k->option = app->add_option(name, k->value, help);
    }
    keys.push_back(std::move(k));
  }

  std::map<std::string, std::string> flag_layer() const {
    std::map<std::string, std::string> out;
    for (const auto& k : keys) {
      if (k->option->count() > 0) out[k->key] = k->value;
    }
    return out;
  }
};

Command& add_command(CLI::App& app, std::vector<std::unique_ptr<Command>>& cmds, const std::string& name,
                     const std::string& help) {
  auto c = std::make_unique<Command>();
  c->app = app.add_subcommand(name, help);
  c->app->add_option("--config", c->config_file, "flat 'key = value' configuration file");
  c->app->add_flag("--dry-run", c->dry_run, "validate inputs and write only the run manifest");
  c->bind("seed", "master seed (KGALIGN_SEED overrides the config file)");
  c->bind("threads", "worker threads, 0 for all cores");
  c->bind("split", "train,valid,test percentages of ent_links");
  cmds.push_back(std::move(c));
  return *cmds.back();
}

// default < checkpoint config < config file < KGALIGN_SEED < flags
RunConfig resolve(const Command& cmd, const std::optional<std::filesystem::path>& ckpt_config) {
  std::vector<std::map<std::string, std::string>> layers;
  if (ckpt_config) layers.push_back(read_config_file(*ckpt_config));
  if (!cmd.config_file.empty()) layers.push_back(read_config_file(cmd.config_file));
  if (const char* env = std::getenv("KGALIGN_SEED"); env != nullptr && *env != '\0') {
    layers.push_back({{"seed", env}});
  }
  layers.push_back(cmd.flag_layer());
  return resolve_config(layers);
}

std::string crc32_of(const std::filesystem::path& file, std::uintmax_t& bytes) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot read " + file.string());
  boost::crc_32_type crc;
  std::vector<char> buf(1 << 16);
  bytes = 0;
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = in.gcount();
    crc.process_bytes(buf.data(), static_cast<std::size_t>(got));
    bytes += static_cast<std::uintmax_t>(got);
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(8) << std::setfill('0') << crc.checksum();
  return hex.str();
}

// Regular files of `p` (itself if a file), sorted by path.
std::vector<std::filesystem::path> input_files(const std::filesystem::path& p) {
  std::vector<std::filesystem::path> out;
  if (std::filesystem::is_regular_file(p)) {
    out.push_back(p);
  } else if (std::filesystem::is_directory(p)) {
    for (const auto& e : std::filesystem::directory_iterator(p)) {
      if (e.is_regular_file()) out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write " + file.string());
  out << text;
}

void write_manifest(const std::filesystem::path& file, const std::string& command,
                    const std::vector<std::string>& args, const RunConfig& config,
                    const std::vector<std::filesystem::path>& inputs, bool dry_run) {
  json m;
  m["tool"] = "kgalign";
  m["version"] = KGALIGN_VERSION;
  m["command"] = command;
  m["argv"] = args;
  m["seed"] = config.seed;
  m["threads"] = config.effective_threads();
  m["dry_run"] = dry_run;
  m["started"] = timestamp();
  json cfg = json::object();
  for (const auto& [k, v] : config.to_map()) cfg[k] = v;
  m["config"] = cfg;
  json files = json::array();
  for (const auto& root : inputs) {
    for (const auto& f : input_files(root)) {
      std::uintmax_t bytes = 0;
      const auto crc = crc32_of(f, bytes);
      files.push_back({{"path", f.string()}, {"bytes", bytes}, {"crc32", crc}});
    }
  }
  m["inputs"] = files;
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  write_text(file, m.dump(2) + "\n");
}

std::filesystem::path require_dir(const std::string& p, const char* what) {
  if (p.empty()) throw UsageError(std::string(what) + " is required");
  if (!std::filesystem::is_directory(p)) throw DataError(std::string(what) + " directory " + p + " does not exist");
  return std::filesystem::absolute(p);
}

SeedSplit split_links(const Dataset& data, const RunConfig& config) {
  return split_seeds(data.links, config.split, config.seed);
}

bool paths_disabled(const std::string& paths) { return paths.empty() || paths == "none"; }

// Attaches mined path triples to both graphs.
void attach_paths(Dataset& data, const std::filesystem::path& dir) {
  for (const char* f : {"path_triples_1.tsv", "path_triples_2.tsv"}) {
    if (!std::filesystem::exists(dir / f)) throw DataError("missing path file " + (dir / f).string());
  }
  data.kg1 = read_path_triples(dir / "path_triples_1.tsv", data.kg1);
  data.kg2 = read_path_triples(dir / "path_triples_2.tsv", data.kg2);
}

train::GraphInputs graph_inputs(Dataset& data, const RunConfig& config) {
  const bool with_paths = config.train.use_paths;
  if (with_paths) attach_paths(data, require_dir(config.paths, "--paths"));
  return train::GraphInputs::build(data.kg1, data.kg2, data.names1, data.names2, with_paths,
                                   config.train.symmetrize);
}

struct Loaded {
  RunConfig config;
  Dataset data;
  train::GraphInputs inputs;
  train::Model model;
  SeedSplit split;
};

// Restores a trained model and re-encodes both graphs from its inputs.
Loaded load_checkpoint_dir(const Command& cmd, const std::string& ckpt, const std::string& data_flag) {
  const auto dir = require_dir(ckpt, "--ckpt");
  if (!std::filesystem::exists(dir / kConfigFile) || !std::filesystem::exists(dir / kParamsFile)) {
    throw DataError("checkpoint " + dir.string() + " lacks " + kConfigFile + " or " + kParamsFile);
  }
  Loaded l;
  l.config = resolve(cmd, dir / kConfigFile);
  if (!data_flag.empty()) l.config.data = data_flag;
  l.data = load_dataset(require_dir(l.config.data, "--data"));
  l.split = split_links(l.data, l.config);
  if (l.config.train.encoder.dim == 0) l.config.train.encoder.dim = static_cast<int>(l.data.names1.cols());
  l.inputs = graph_inputs(l.data, l.config);
  l.model = train::Model::init(l.config.train);
  l.model.assign(load_checkpoint(dir / kParamsFile));
  return l;
}

int cmd_mine(const Command& cmd, const std::string& out_dir, const std::vector<std::string>& args,
             std::ostream& out) {
  auto config = resolve(cmd, std::nullopt);
  if (out_dir.empty()) throw UsageError("--out is required");
  const auto data_dir = require_dir(config.data, "--data");
  config.data = data_dir.string();
  auto data = load_dataset(data_dir);
  write_manifest(std::filesystem::path(out_dir) / "manifest.json", "mine-paths", args, config, {data_dir},
                 cmd.dry_run);
  if (cmd.dry_run) return kOk;

  const auto split = split_links(data, config);
  auto options = config.mine;
  options.threads = config.effective_threads();
  const auto result = rpr::mine(data.kg1, data.kg2, split.train, data.names1, data.names2, options);
  const std::filesystem::path dir(out_dir);
  rpr::write_path_vocab(dir / "path_vocab.tsv", data.kg1, data.kg2, result.reliable);
  write_path_triples(dir / "path_triples_1.tsv", result.kg1);
  write_path_triples(dir / "path_triples_2.tsv", result.kg2);

  json stats;
  stats["seed_pairs"] = result.stats.seed_pairs;
  stats["skipped_hubs"] = result.stats.skipped_hubs;
  stats["matched_neighbors"] = result.stats.matched_neighbors;
  stats["candidate_pairs"] = result.stats.candidate_pairs;
  stats["reliable_pairs"] = result.reliable.kept.size();
  stats["paths_kg1"] = result.kg1.path_vocab().size();
  stats["paths_kg2"] = result.kg2.path_vocab().size();
  stats["path_triples_kg1"] = result.kg1.path_triples().size();
  stats["path_triples_kg2"] = result.kg2.path_triples().size();
  stats["rel_triples_kg1"] = result.kg1.rel_triples().size();
  stats["rel_triples_kg2"] = result.kg2.rel_triples().size();
  write_text(dir / "stats.json", stats.dump(2) + "\n");
  out << "reliable path pairs: " << result.reliable.kept.size() << " (KG1 paths "
      << result.kg1.path_vocab().size() << ", KG2 paths " << result.kg2.path_vocab().size() << ")\n"
      << "path triples: " << result.kg1.path_triples().size() << " / " << result.kg2.path_triples().size()
      << "\n";
  return kOk;
}

int cmd_train(const Command& cmd, const std::string& out_dir, const std::vector<std::string>& args,
              std::ostream& out) {
  auto config = resolve(cmd, std::nullopt);
  if (out_dir.empty()) throw UsageError("--out is required");
  const auto data_dir = require_dir(config.data, "--data");
  config.data = data_dir.string();
  config.train.use_paths = !paths_disabled(config.paths);
  if (config.train.use_paths) {
    config.paths = require_dir(config.paths, "--paths").string();
  } else {
    config.paths = "none";
  }
  config.train.seed = config.seed;
  auto data = load_dataset(data_dir);
  if (config.train.encoder.dim == 0) config.train.encoder.dim = static_cast<int>(data.names1.cols());
  config.train.validate();
  std::vector<std::filesystem::path> inputs{data_dir};
  if (config.train.use_paths) inputs.emplace_back(config.paths);
  const std::filesystem::path dir(out_dir);
  write_manifest(dir / "manifest.json", "train", args, config, inputs, cmd.dry_run);
  if (cmd.dry_run) return kOk;

  const auto split = split_links(data, config);
  const auto graph = graph_inputs(data, config);
  const auto result = train::train(graph, split.train, split.valid, config.train);

  save_checkpoint(dir / kParamsFile, result.model.to_named_matrices());
  write_config_file(dir / kConfigFile, config);
  write_text(dir / "history.csv", train::history_csv(result.history));
  json summary;
  summary["epochs_run"] = result.history.empty() ? 0 : result.history.back().epoch;
  summary["best_epoch"] = result.best_epoch;
  summary["best_val_hits1"] = result.best_val_hits1;
  summary["stopped_early"] = result.stopped_early;
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  out << "trained " << summary["epochs_run"] << " epochs, best validation Hits@1 " << result.best_val_hits1
      << " at epoch " << result.best_epoch << "\n";
  return kOk;
}

int cmd_align(const Command& cmd, const std::string& ckpt, const std::string& out_file,
              const std::vector<std::string>& args) {
  if (out_file.empty()) throw UsageError("--out is required");
  auto l = load_checkpoint_dir(cmd, ckpt, cmd.flag_layer().count("data") ? cmd.flag_layer().at("data") : "");
  write_manifest(out_file + ".manifest.json", "align", args, l.config,
                 {std::filesystem::path(l.config.data), std::filesystem::absolute(ckpt)}, cmd.dry_run);
  if (cmd.dry_run) return kOk;

  const auto emb = train::embed(l.model, l.inputs);
  const double theta = l.config.theta_inf.value_or(l.model.theta);
  std::set<EntityId> seeded;
  for (const auto& [a, b] : l.split.train.pairs) seeded.insert(a);
  std::vector<EntityId> sources;
  for (EntityId e = 0; e < static_cast<EntityId>(l.data.kg1.num_entities()); ++e) {
    if (!seeded.contains(e)) sources.push_back(e);
  }
  std::sort(sources.begin(), sources.end(), [&](EntityId a, EntityId b) {
    return l.data.kg1.entity_uri(a) < l.data.kg1.entity_uri(b);
  });
  const auto preds = eval::predict(sources, emb, theta, l.config.top_k, l.config.effective_threads());
  std::ofstream f(out_file, std::ios::binary);
  if (!f) throw DataError("cannot write " + out_file);
  f << std::setprecision(17);
  for (const auto& p : preds) {
    f << l.data.kg1.entity_uri(p.source) << '\t' << l.data.kg2.entity_uri(p.target) << '\t' << p.distance
      << '\t' << p.rank << '\n';
  }
  return kOk;
}

int cmd_eval(const Command& cmd, const std::string& ckpt, std::optional<double> harder, bool as_json,
             const std::string& out_dir, const std::vector<std::string>& args, std::ostream& out) {
  auto l = load_checkpoint_dir(cmd, ckpt, cmd.flag_layer().count("data") ? cmd.flag_layer().at("data") : "");
  const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path(ckpt) : std::filesystem::path(out_dir);
  write_manifest(dir / "eval_manifest.json", "eval", args, l.config,
                 {std::filesystem::path(l.config.data), std::filesystem::absolute(ckpt)}, cmd.dry_run);
  if (cmd.dry_run) return kOk;

  AlignmentSeeds test = l.split.test;
  if (harder) {
    const auto hard = eval::make_harder_split(l.data.links, l.data.names1, l.data.names2, *harder);
    const std::set<AlignedPair> keep(hard.begin(), hard.end());
    std::erase_if(test.pairs, [&](const AlignedPair& p) { return !keep.contains(p); });
  }
  if (test.empty()) throw DataError("the test split is empty");
  const auto emb = train::embed(l.model, l.inputs);
  const double theta = l.config.theta_inf.value_or(l.model.theta);
  const auto result = eval::evaluate(test, emb, theta, l.config.candidates, l.config.effective_threads());
  const auto metrics = eval::to_json(result);
  if (!out_dir.empty()) write_text(dir / "metrics.json", metrics + "\n");
  if (as_json) {
    out << metrics << "\n";
  } else {
    out << eval::to_table(result);
  }
  return kOk;
}

int cmd_harder(const Command& cmd, double fraction, const std::string& out_dir,
               const std::vector<std::string>& args, std::ostream& out) {
  auto config = resolve(cmd, std::nullopt);
  if (out_dir.empty()) throw UsageError("--out is required");
  const auto data_dir = require_dir(config.data, "--data");
  config.data = data_dir.string();
  auto data = load_dataset(data_dir);
  const auto hard = eval::make_harder_split(data.links, data.names1, data.names2, fraction);
  const std::filesystem::path dir(out_dir);
  write_manifest(dir / "manifest.json", "harder-split", args, config, {data_dir}, cmd.dry_run);
  if (cmd.dry_run) return kOk;
  for (const auto& f : input_files(data_dir)) {
    if (f.filename() == "ent_links") continue;
    std::filesystem::copy_file(f, dir / f.filename(), std::filesystem::copy_options::overwrite_existing);
  }
  write_links(dir / "ent_links", data.kg1, data.kg2, hard);
  out << "kept " << hard.size() << " of " << data.links.size() << " links\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entity alignment with reliable relation paths and a relation-aware graph transformer", "kgalign"};
  app.set_version_flag("--version", KGALIGN_VERSION);
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Command>> cmds;

  std::string out_path, ckpt;
  std::optional<double> harder;
  double fraction = 0.5;
  bool as_json = false;

  auto& mine = add_command(app, cmds, "mine-paths", "mine reliable relation paths from the training seeds");
  mine.bind("data", "dataset directory");
  mine.bind("tau_sim", "name similarity threshold for matching neighbors");
  mine.bind("tau_path", "path pairs must occur more than this many times ('inf' keeps none)");
  mine.bind("max_fanout", "skip seed entities with more two-hop neighbors than this");
  mine.bind("inverse_hops", "also walk relations against their direction", true);
  mine.app->add_option("--out", out_path, "output directory");

  auto& tr = add_command(app, cmds, "train", "train the encoders on the training seeds");
  tr.bind("data", "dataset directory");
  tr.bind("paths", "mined path directory, or 'none' to train without paths");
  for (const char* k : {"epochs", "lr", "theta", "margin_rel", "margin_path", "negatives", "strategy",
                        "resample_every", "eval_every", "patience", "layers", "heads", "dim", "symmetrize"}) {
    tr.bind(k, "see README");
  }
  tr.app->add_option("--out", out_path, "checkpoint directory");

  auto& al = add_command(app, cmds, "align", "predict counterparts for every non-seed KG1 entity");
  al.app->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  al.bind("data", "dataset directory (defaults to the checkpoint's)");
  al.bind("top_k", "candidates per source entity");
  al.bind("theta_inf", "weight of the path distance at inference");
  al.app->add_option("--out", out_path, "output TSV file");

  auto& ev = add_command(app, cmds, "eval", "report Hits@k and MRR on the test split");
  ev.app->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  ev.bind("data", "dataset directory (defaults to the checkpoint's)");
  ev.bind("theta_inf", "weight of the path distance at inference");
  ev.bind("candidates", "rank against all KG2 entities or only test counterparts");
  ev.app->add_option("--harder", harder, "restrict the test split to the least name-similar fraction of links");
  ev.app->add_flag("--json", as_json, "print metrics as JSON");
  ev.app->add_option("--out", out_path, "directory for metrics.json and the manifest");

  auto& hs = add_command(app, cmds, "harder-split", "keep the links with the least similar names");
  hs.bind("data", "dataset directory");
  hs.app->add_option("--fraction", fraction, "fraction of links to keep")->required();
  hs.app->add_option("--out", out_path, "output dataset directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << KGALIGN_VERSION << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kUsage;
  }

  std::vector<std::string> full{"kgalign"};
  full.insert(full.end(), args.begin(), args.end());
  try {
    if (mine.app->parsed()) return cmd_mine(mine, out_path, full, out);
    if (tr.app->parsed()) return cmd_train(tr, out_path, full, out);
    if (al.app->parsed()) return cmd_align(al, ckpt, out_path, full);
    if (ev.app->parsed()) return cmd_eval(ev, ckpt, harder, as_json, out_path, full, out);
    if (hs.app->parsed()) return cmd_harder(hs, fraction, out_path, full, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace kgalign::cli
