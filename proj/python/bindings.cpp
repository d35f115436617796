#include "kgalign/cli.hpp"
#include "kgalign/evaluator.hpp"
#include "kgalign/loaders.hpp"
#include "kgalign/rpr.hpp"
#include "kgalign/synthetic.hpp"
#include "kgalign/tensor.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace kgalign;

namespace {

py::dict kg_summary(const KnowledgeGraph& kg) {
  py::dict d;
  d["entities"] = kg.entity_uris();
  d["relations"] = kg.relation_uris();
  std::vector<std::tuple<int, int, int>> triples;
  for (const auto& t : kg.rel_triples()) triples.emplace_back(t.head, t.relation, t.tail);
  d["triples"] = triples;
  return d;
}

eval::CandidateSet parse_candidates(const std::string& s) {
  if (s == "all") return eval::CandidateSet::all;
  if (s == "test") return eval::CandidateSet::test;
  throw UsageError("candidates must be 'all' or 'test'");
}

}  // namespace

PYBIND11_MODULE(_kgalign, m) {
  m.doc() = "Knowledge graph entity alignment: path mining, graph encoding, evaluation";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

  m.def(
      "load_kg",
      [](const std::filesystem::path& triples) { return kg_summary(load_kg(triples)); },
      py::arg("rel_triples"), "Load a triple file; returns entities, relations and id triples.");

  m.def(
      "make_twin_dataset",
      [](const std::filesystem::path& out, std::size_t entities, std::size_t relations, std::size_t triples,
         int dim, std::uint64_t seed, std::size_t name_clusters, double name_spread, double name_noise,
         double rewire, std::size_t chains) {
        SyntheticOptions o;
        o.entities = entities;
        o.relations = relations;
        o.triples = triples;
        o.dim = dim;
        o.seed = seed;
        o.name_clusters = name_clusters;
        o.name_spread = name_spread;
        o.name_noise = name_noise;
        o.rewire = rewire;
        o.chains = chains;
        write_dataset(make_twin_dataset(o), out);
      },
      py::arg("out"), py::arg("entities") = 200, py::arg("relations") = 8, py::arg("triples") = 800,
      py::arg("dim") = 32, py::arg("seed") = 7, py::arg("name_clusters") = 0, py::arg("name_spread") = 0.0,
      py::arg("name_noise") = 0.0, py::arg("rewire") = 0.0, py::arg("chains") = 0,
      "Write a synthetic pair of isomorphic graphs with links and name embeddings.");

  m.def(
      "mine_paths",
      [](const std::filesystem::path& data_dir, double tau_sim, std::optional<std::uint64_t> tau_path,
         std::tuple<int, int, int> split, std::uint64_t seed) {
        const auto data = load_dataset(data_dir);
        const auto [tr, va, te] = split;
        const auto seeds = split_seeds(data.links, SplitRatio{tr, va, te}, seed);
        rpr::MineOptions o;
        o.tau_sim = tau_sim;
        o.tau_path = tau_path;
        const auto r = rpr::mine(data.kg1, data.kg2, seeds.train, data.names1, data.names2, o);
        py::list kept;
        for (const auto& [pair, count] : r.reliable.kept) {
          kept.append(py::make_tuple(path_label(data.kg1, pair.first), path_label(data.kg2, pair.second), count));
        }
        py::dict d;
        d["reliable"] = kept;
        d["candidate_pairs"] = r.reliable.counts.size();
        d["path_triples_1"] = r.kg1.path_triples().size();
        d["path_triples_2"] = r.kg2.path_triples().size();
        return d;
      },
      py::arg("data_dir"), py::arg("tau_sim") = 0.5, py::arg("tau_path") = std::optional<std::uint64_t>(20),
      py::arg("split") = std::make_tuple(20, 10, 70), py::arg("seed") = 42,
      "Mine reliable relation-path pairs from the training split; tau_path=None keeps none.");

  m.def(
      "segment_softmax",
      [](const Matrix& scores, const std::vector<std::int64_t>& segments, std::size_t num_segments) {
        ad::NoGradGuard guard;
        return ad::segment_softmax(ad::Tensor::constant(scores), ad::SegmentIndex(segments, num_segments)).value();
      },
      py::arg("scores"), py::arg("segments"), py::arg("num_segments"),
      "Softmax of each column within each segment of rows.");

  m.def(
      "evaluate",
      [](const Matrix& rel1, const Matrix& rel2, const std::vector<AlignedPair>& pairs,
         std::optional<Matrix> path1, std::optional<Matrix> path2, double theta, const std::string& candidates) {
        eval::AlignmentEmbeddings emb{rel1, rel2, std::move(path1), std::move(path2)};
        const auto r = eval::evaluate(AlignmentSeeds{SeedRole::test, pairs}, emb, theta, parse_candidates(candidates));
        py::dict d;
        d["hits1"] = r.hits_at(1);
        d["hits5"] = r.hits_at(5);
        d["hits10"] = r.hits_at(10);
        d["mrr"] = r.mrr;
        d["ranks"] = r.ranks;
        return d;
      },
      py::arg("rel1"), py::arg("rel2"), py::arg("pairs"), py::arg("path1") = py::none(),
      py::arg("path2") = py::none(), py::arg("theta") = 0.0, py::arg("candidates") = "all",
      "Rank KG2 candidates by fused L1 distance and report Hits@{1,5,10} and MRR.");

  m.def(
      "main",
      [](const std::vector<std::string>& argv) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(argv, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("argv"), "Run the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
