#include "support.hpp"

#include "kgalign/loaders.hpp"

#include <doctest.h>

#include <fstream>

using namespace kgalign;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

KnowledgeGraph chain_kg() {
  // a -r1-> b -r2-> c -r3-> d
  return KnowledgeGraph({"a", "b", "c", "d"}, {"r1", "r2", "r3"}, {{0, 0, 1}, {1, 1, 2}, {2, 2, 3}});
}

}  // namespace

TEST_SUITE("kg-core") {
  TEST_CASE("load_kg on a single triple") {
    const auto dir = kgtest::scratch_dir("kg_single");
    write_file(dir / "t", "a\tr\tb\n");
    const auto kg = load_kg(dir / "t");
    CHECK(kg.num_entities() == 2);
    CHECK(kg.num_relations() == 1);
    CHECK(kg.rel_triples().size() == 1);
    CHECK(kg.entity_uri(0) == "a");
    CHECK(kg.entity_uri(1) == "b");
  }

  TEST_CASE("duplicate triple lines collapse") {
    const auto dir = kgtest::scratch_dir("kg_dup");
    write_file(dir / "t", "a\tr\tb\na\tr\tb\n");
    const auto kg = load_kg(dir / "t");
    CHECK(kg.rel_triples().size() == 1);
    CHECK(kg.duplicates_dropped() == 1);
  }

  TEST_CASE("malformed lines and empty files are rejected") {
    const auto dir = kgtest::scratch_dir("kg_bad");
    write_file(dir / "t", "a\tr\tb\na\tr\n");
    try {
      load_kg(dir / "t");
      FAIL("expected a parse error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
    write_file(dir / "empty", "");
    CHECK_THROWS_AS(load_kg(dir / "empty"), DataError);
    CHECK_THROWS_AS(load_kg(dir / "missing"), DataError);
  }

  TEST_CASE("ids follow first appearance and the adjacency mirrors the triples") {
    const auto dir = kgtest::scratch_dir("kg_order");
    write_file(dir / "t", "x\tp\ty\ny\tq\tz\nz\tp\tx\n");
    const auto kg = load_kg(dir / "t");
    CHECK(kg.entity_uris() == std::vector<std::string>{"x", "y", "z"});
    CHECK(kg.relation_uris() == std::vector<std::string>{"p", "q"});
    std::size_t out_total = 0, in_total = 0;
    for (EntityId e = 0; e < 3; ++e) {
      for (const auto& h : kg.out_edges(e)) {
        CHECK(std::binary_search(kg.rel_triples().begin(), kg.rel_triples().end(), RelationTriple{e, h.type, h.target}));
        ++out_total;
      }
      for (const auto& h : kg.in_edges(e)) {
        CHECK(std::binary_search(kg.rel_triples().begin(), kg.rel_triples().end(), RelationTriple{h.target, h.type, e}));
        ++in_total;
      }
    }
    CHECK(out_total == 3);
    CHECK(in_total == 3);
  }

  TEST_CASE("save and reload keeps ids and triples") {
    const auto dir = kgtest::scratch_dir("kg_roundtrip");
    SyntheticOptions o;
    o.entities = 40;
    o.triples = 120;
    const auto d = make_twin_dataset(o);
    save_kg(d.kg2, dir / "t", dir / "e", dir / "r");
    const auto back = load_kg(dir / "t", dir / "e", dir / "r");
    CHECK(back.entity_uris() == d.kg2.entity_uris());
    CHECK(back.relation_uris() == d.kg2.relation_uris());
    CHECK(std::equal(back.rel_triples().begin(), back.rel_triples().end(), d.kg2.rel_triples().begin(),
                     d.kg2.rel_triples().end()));
  }

  TEST_CASE("id files must be contiguous") {
    const auto dir = kgtest::scratch_dir("kg_ids");
    write_file(dir / "t", "a\tr\tb\n");
    write_file(dir / "e", "0\ta\n2\tb\n");
    CHECK_THROWS_AS(load_kg(dir / "t", dir / "e"), DataError);
  }

  TEST_CASE("seed splits: sizes, disjointness, determinism") {
    std::vector<AlignedPair> links;
    for (int i = 0; i < 10; ++i) links.emplace_back(i, 9 - i);
    const auto s = split_seeds(links, {20, 10, 70}, 7);
    CHECK(s.train.size() == 2);
    CHECK(s.valid.size() == 1);
    CHECK(s.test.size() == 7);
    CHECK(s.train.role == SeedRole::train);
    CHECK(s.test.role == SeedRole::test);
    std::set<AlignedPair> all;
    for (const auto* part : {&s.train, &s.valid, &s.test}) all.insert(part->pairs.begin(), part->pairs.end());
    CHECK(all.size() == 10);
    const auto again = split_seeds(links, {20, 10, 70}, 7);
    CHECK(again.train.pairs == s.train.pairs);
    CHECK(again.test.pairs == s.test.pairs);

    std::vector<AlignedPair> big;
    for (int i = 0; i < 15000; ++i) big.emplace_back(i, i);
    const auto b = split_seeds(big, {20, 10, 70}, 1);
    CHECK(b.train.size() == 3000);
    CHECK(b.valid.size() == 1500);
    CHECK(b.test.size() == 10500);

    CHECK_THROWS_AS(split_seeds(links, {20, 10, 60}, 7), UsageError);
    links.emplace_back(0, 5);
    CHECK_THROWS_AS(split_seeds(links, {20, 10, 70}, 7), DataError);
  }

  TEST_CASE("load_seeds names unresolvable URIs") {
    const auto dir = kgtest::scratch_dir("kg_links");
    write_file(dir / "t1", "a\tr\tb\n");
    write_file(dir / "t2", "A\tR\tB\n");
    write_file(dir / "links", "a\tA\nb\tC\n");
    const auto kg1 = load_kg(dir / "t1");
    const auto kg2 = load_kg(dir / "t2");
    try {
      load_seeds(dir / "links", kg1, kg2, {50, 0, 50}, 1);
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("C") != std::string::npos);
    }
  }

  TEST_CASE("load_embeddings: row order, ragged rows, missing entities") {
    const auto dir = kgtest::scratch_dir("kg_emb");
    write_file(dir / "t", "a\tr\tb\n");
    const auto kg = load_kg(dir / "t");
    write_file(dir / "fwd", "a\t1 2 3\nb\t4 5 6\n");
    write_file(dir / "rev", "b\t4 5 6\na\t1 2 3\nother\t0 0 0\n");
    const auto m = load_embeddings(dir / "fwd", kg);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    CHECK(m(1, 0) == 4.0);
    CHECK(load_embeddings(dir / "rev", kg) == m);
    write_file(dir / "ragged", "a\t1 2 3\nb\t4 5\n");
    CHECK_THROWS_AS(load_embeddings(dir / "ragged", kg), DataError);
    write_file(dir / "missing", "a\t1 2 3\n");
    try {
      load_embeddings(dir / "missing", kg);
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("b") != std::string::npos);
    }
    write_file(dir / "nan", "a\t1 nan 3\nb\t4 5 6\n");
    CHECK_THROWS_AS(load_embeddings(dir / "nan", kg), DataError);
  }

  TEST_CASE("embedding files written by the preparation step reload exactly") {
    const auto dir = kgtest::scratch_dir("kg_emb_rt");
    SyntheticOptions o;
    o.entities = 30;
    const auto d = make_twin_dataset(o);
    write_embeddings(dir / "ent_name_emb_1.tsv", d.kg1, d.names1);
    CHECK(load_embeddings(dir / "ent_name_emb_1.tsv", d.kg1) == d.names1);
  }

  TEST_CASE("build_path_triples examples") {
    const KnowledgeGraph kg({"a", "b", "c"}, {"r1", "r2"}, {{0, 0, 1}, {1, 1, 2}});
    const std::vector<RelationPath> vocab{{0, 1}};
    const auto t = build_path_triples(kg, vocab);
    REQUIRE(t.size() == 1);
    CHECK(t[0] == PathTriple{0, 0, 2});
    CHECK(build_path_triples(kg, std::vector<RelationPath>{}).empty());
    CHECK_THROWS_AS(build_path_triples(kg, std::vector<RelationPath>{{0, 7}}), DataError);

    const auto chain = chain_kg();
    CHECK(build_path_triples(chain, std::vector<RelationPath>{{0, 1}, {1, 2}}).size() == 2);
  }

  TEST_CASE("path triples: midpoints collapse, self-loops stay") {
    // a -r-> m1 -s-> b, a -r-> m2 -s-> b, b -r-> a -s-> ... self loop a->b->a
    const KnowledgeGraph kg({"a", "m1", "m2", "b"}, {"r", "s"},
                            {{0, 0, 1}, {0, 0, 2}, {1, 1, 3}, {2, 1, 3}, {3, 0, 0}, {0, 1, 3}});
    const auto t = build_path_triples(kg, std::vector<RelationPath>{{0, 1}});
    std::set<PathTriple> s(t.begin(), t.end());
    CHECK(s.size() == t.size());
    CHECK(s.contains(PathTriple{0, 0, 3}));
    CHECK(s.contains(PathTriple{3, 0, 3}));  // b -r-> a -s-> b
  }

  TEST_CASE("build_path_triples equals a naive join on random graphs") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(seed);
      SyntheticOptions o;
      o.entities = 30 + seed * 5;
      o.relations = 4;
      o.triples = 100 + seed * 20;
      o.seed = seed;
      const auto d = make_twin_dataset(o);
      std::vector<RelationPath> vocab;
      std::set<std::pair<int, int>> vset;
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          if (rng() % 3 == 0) {
            vocab.push_back({a, b});
            vset.insert({a, b});
          }
        }
      }
      const auto fast = build_path_triples(d.kg1, vocab);
      std::set<std::tuple<int, int, int, int>> got;
      for (const auto& t : fast) {
        got.insert({t.head, vocab[t.path].first, vocab[t.path].second, t.tail});
        CHECK(has_path_witness(d.kg1, vocab, t));
      }
      std::set<std::tuple<int, int, int, int>> want;
      for (const auto& t1 : d.kg1.rel_triples()) {
        for (const auto& t2 : d.kg1.rel_triples()) {
          if (t1.tail == t2.head && vset.contains({t1.relation, t2.relation})) {
            want.insert({t1.head, t1.relation, t2.relation, t2.tail});
          }
        }
      }
      CHECK(got == want);
      CHECK(got.size() == fast.size());
    }
  }

  TEST_CASE("path triples with a missing witness are rejected") {
    const auto kg = chain_kg();
    CHECK_THROWS_AS(kg.with_path_triples({{0, 1}}, {{0, 0, 3}}), DataError);
    CHECK_NOTHROW(kg.with_path_triples({{0, 1}}, {{0, 0, 2}}));
    CHECK_THROWS_AS(kg.with_paths({{0, 1}, {0, 1}}), DataError);
  }

  TEST_CASE("path labels survive commas inside relation URIs") {
    const KnowledgeGraph kg({"a", "b", "c"}, {"http://x/r,1", "s"}, {{0, 0, 1}, {1, 1, 2}});
    const RelationPath p{0, 1};
    const auto label = path_label(kg, p);
    CHECK(label == "http://x/r,1,s");
    CHECK(parse_path_label(kg, label) == p);
    CHECK_THROWS_AS(parse_path_label(kg, "nope,s"), DataError);
  }

  TEST_CASE("path triple files round trip") {
    const auto dir = kgtest::scratch_dir("kg_paths");
    const auto kg = chain_kg().with_paths({{0, 1}, {1, 2}});
    write_path_triples(dir / "p.tsv", kg);
    const auto back = read_path_triples(dir / "p.tsv", chain_kg());
    CHECK(kgtest::path_triple_set(back) == kgtest::path_triple_set(kg));
  }
}
