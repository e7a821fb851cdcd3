#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "deltaenum/errors.hpp"
#include "deltaenum/kdata.hpp"
#include "deltaenum/tuple_table.hpp"

using namespace deltaenum;

namespace {

Value nat(std::uint64_t n) { return Value::natural(n); }

Vocabulary vocab(std::map<std::string, std::size_t> rels, std::map<std::string, Datum> consts = {}) {
  Vocabulary v;
  v.relations = std::move(rels);
  v.constants = std::move(consts);
  v.constants["1"] = 1;
  return v;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("deltaenum_kdata_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("db_size") {
  auto n = builtin_semiring("natural");
  Database a(vocab({{"R", 2}}, {{"c", 4}}), n);
  for (Datum i = 1; i <= 3; ++i) a.relation("R").set(Tuple{i, i}, nat(1));
  CHECK(db_size(a) == 11);

  Database b(vocab({{"R", 2}}), n);
  CHECK(db_size(b) == 1);

  Database c(vocab({{"U", 1}}), n);
  for (Datum i = 1; i <= 4; ++i) c.relation("U").set(Tuple{i}, nat(2));
  CHECK(db_size(c) == 9);

  // doubling tuple counts doubles the relation term
  for (Datum i = 5; i <= 8; ++i) c.relation("U").set(Tuple{i}, nat(2));
  CHECK(db_size(c) - 1 == 2 * 8);
}

TEST_CASE("apply_update") {
  auto n = builtin_semiring("natural");
  Database db(vocab({{"R", 2}}), n);
  db.relation("R").set(Tuple{1, 2}, nat(2));
  CHECK(apply_update(db, SingleTupleUpdate::insert("R", {1, 2}, nat(5))) == nat(2));
  CHECK(db.relation("R").get(Tuple{1, 2}) == nat(7));
  apply_update(db, SingleTupleUpdate::erase("R", {1, 2}));
  CHECK_FALSE(db.relation("R").contains(Tuple{1, 2}));

  auto r = builtin_semiring("real");
  Database rd(vocab({{"R", 2}}), r);
  rd.relation("R").set(Tuple{1, 1}, Value::real(2.0));
  apply_update(rd, SingleTupleUpdate::insert("R", {1, 1}, Value::real(-2.0)));
  CHECK(rd.relation("R").empty());

  CHECK_THROWS_AS(apply_update(db, SingleTupleUpdate::insert("S", {1}, nat(1))), VocabularyError);
  CHECK_THROWS_AS(apply_update(db, SingleTupleUpdate::insert("R", {1}, nat(1))), SchemaError);
  CHECK_THROWS_AS(apply_update(db, SingleTupleUpdate::insert("R", {0, 1}, nat(1))), SchemaError);
}

TEST_CASE("insert then delete equals delete") {
  auto n = builtin_semiring("natural");
  Database a(vocab({{"R", 1}}), n), b(vocab({{"R", 1}}), n);
  a.relation("R").set(Tuple{3}, nat(1));
  b.relation("R").set(Tuple{3}, nat(1));
  apply_update(a, SingleTupleUpdate::insert("R", {3}, nat(4)));
  apply_update(a, SingleTupleUpdate::erase("R", {3}));
  apply_update(b, SingleTupleUpdate::erase("R", {3}));
  CHECK(a.relation("R").sorted_entries() == b.relation("R").sorted_entries());
}

TEST_CASE("random updates never store zeros and keep prefix indices exact") {
  auto r = builtin_semiring("real");
  Database db(vocab({{"R", 3}}), r);
  std::mt19937_64 rng(3);
  auto& rel = db.relation("R");
  rel.prefix_lookup(1, Tuple{1});
  rel.prefix_lookup(2, Tuple{1, 1});
  for (int i = 0; i < 3000; ++i) {
    Tuple t{rng() % 3 + 1, rng() % 3 + 1, rng() % 3 + 1};
    if (rng() % 4 == 0)
      apply_update(db, SingleTupleUpdate::erase("R", t));
    else
      apply_update(db, SingleTupleUpdate::insert("R", t, Value::real(static_cast<double>(rng() % 5) - 2.0)));
    rel.for_each([&](std::span<const Datum>, Value v) { REQUIRE_FALSE(r.is_zero(v)); });
  }
  for (std::size_t k : {1u, 2u}) {
    CHECK(rel.has_prefix_index(k));
    std::map<Tuple, std::size_t> expect;
    rel.for_each([&](std::span<const Datum> t, Value) { ++expect[Tuple(t.begin(), t.begin() + k)]; });
    for (Datum a = 1; a <= 3; ++a)
      for (Datum b = 1; b <= 3; ++b) {
        Tuple p = k == 1 ? Tuple{a} : Tuple{a, b};
        const auto& ids = rel.prefix_lookup(k, p);
        CHECK(ids.size() == (expect.count(p) ? expect[p] : 0));
        for (auto id : ids) {
          auto t = rel.table().tuple(id);
          CHECK(Tuple(t.begin(), t.begin() + k) == p);
        }
      }
  }
}

TEST_CASE("csv loading") {
  auto n = builtin_semiring("natural");
  AnnotatedRelation rel(2, n);
  load_relation_csv(rel, "a,b,ann\n1,2,7\n1,3,0\n", "R.csv");
  CHECK(rel.size() == 1);
  CHECK(rel.get(Tuple{1, 2}) == nat(7));

  AnnotatedRelation bad(2, n);
  try {
    load_relation_csv(bad, "1,2,7\n0,2,7\n", "R.csv");
    FAIL("expected an ingestion error");
  } catch (const IngestionError& e) {
    CHECK(std::string(e.what()).find("R.csv:2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_relation_csv(bad, "1,2\n", "R.csv"), IngestionError);
  CHECK_THROWS_AS(load_relation_csv(bad, "1,2,1\n1,2,3\n", "R.csv"), IngestionError);
  CHECK_THROWS_AS(load_relation_csv(bad, "1,x,1\n", "R.csv"), IngestionError);

  AnnotatedRelation b(1, builtin_semiring("boolean"));
  load_relation_csv(b, "4,t\n5,f\n", "U.csv");
  CHECK(b.size() == 1);
}

TEST_CASE("database directory and update scripts") {
  auto dir = scratch_dir("db");
  write(dir / "vocab.json", R"({"relations": {"R": 2, "U": 1}, "constants": {"alpha": 3}})");
  write(dir / "R.csv", "1,2,2\n1,3,1\n");
  auto v = load_vocabulary(dir / "vocab.json");
  CHECK(v.constants.at("1") == 1);
  CHECK(v.constants.at("alpha") == 3);
  auto db = load_database(v, dir, builtin_semiring("natural"));
  CHECK(db.relation("R").size() == 2);
  CHECK(db.relation("U").empty());
  CHECK(db.constant("alpha") == 3);

  auto ups = parse_updates("# comment\n+ R 1 2 5\n- U 4\n", db);
  REQUIRE(ups.size() == 2);
  CHECK(ups[0].kind == SingleTupleUpdate::Kind::Insert);
  CHECK(ups[0].value == nat(5));
  CHECK(ups[1].kind == SingleTupleUpdate::Kind::Delete);
  CHECK_THROWS_AS(parse_updates("+ R 1 5\n", db), IngestionError);
  CHECK_THROWS_AS(parse_updates("+ Z 1 5\n", db), Error);

  CHECK(relation_to_csv(db.relation("R")) == "1,2,2\n1,3,1\n");
  std::filesystem::remove_all(dir);
}

TEST_CASE("tuple table agrees with std::map under churn") {
  std::mt19937_64 rng(11);
  for (std::size_t width : {1u, 2u, 3u}) {
    TupleTable t(width);
    std::map<Tuple, std::uint32_t> ref;
    for (int i = 0; i < 20000; ++i) {
      Tuple k(width);
      for (auto& d : k) d = rng() % 12 + 1;
      if (rng() % 3 == 0) {
        auto it = ref.find(k);
        if (it != ref.end()) {
          t.erase(it->second);
          ref.erase(it);
        }
      } else {
        auto [id, fresh] = t.insert(k);
        CHECK(fresh == !ref.count(k));
        if (!fresh) CHECK(ref[k] == id);
        ref[k] = id;
      }
      if (i % 500 == 0) {
        REQUIRE(t.size() == ref.size());
        for (const auto& [key, id] : ref) {
          REQUIRE(t.find(key) == id);
          CHECK(Tuple(t.tuple(id).begin(), t.tuple(id).end()) == key);
        }
      }
    }
  }
}
