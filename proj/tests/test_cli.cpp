#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "deltaenum/generators.hpp"
#include "deltaenum/kdata.hpp"

using namespace deltaenum;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

struct Scratch {
  fs::path dir = fs::temp_directory_path() / ("deltaenum_cli_" + std::to_string(::getpid()));
  Scratch() { fs::create_directories(dir); }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

fs::path scratch() {
  static Scratch s;
  return s.dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

Run cli(const std::string& args) {
  fs::path err = scratch() / "stderr.txt";
  std::string cmd = std::string(DELTAENUM_CLI) + " " + args + " 2>" + err.string();
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

std::string data(const std::string& rel) { return std::string(DELTAENUM_DATA) + "/" + rel; }

bool has(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

// writes vocab.json and one CSV per relation
void save_db(const Database& db, const fs::path& dir) {
  fs::create_directories(dir);
  json v = {{"relations", json::object()}, {"constants", json::object()}};
  for (const auto& [name, rel] : db.relations()) {
    v["relations"][name] = rel.arity();
    write(dir / (name + ".csv"), relation_to_csv(rel));
  }
  for (const auto& [name, value] : db.vocabulary().constants)
    if (name != "1") v["constants"][name] = value;
  write(dir / "vocab.json", v.dump());
}

}  // namespace

TEST_CASE("classify reports the named examples") {
  struct Expect {
    const char* file;
    const char* fc;
    const char* qh;
  };
  for (const auto& e : {Expect{"join_not_free_connex.cq", "false", "false"},
                        Expect{"q_hierarchical.cq", "true", "true"},
                        Expect{"fc_violates_second.cq", "true", "false"},
                        Expect{"fc_violates_first.cq", "true", "false"}}) {
    auto r = cli("classify " + data("queries/") + e.file + " --verify");
    CHECK(r.code == 0);
    CHECK_MESSAGE(has(r.out, std::string("free-connex: ") + e.fc + "\n"), e.file);
    CHECK_MESSAGE(has(r.out, std::string("q-hierarchical: ") + e.qh + "\n"), e.file);
  }
  auto j = json::parse(cli("classify --json " + data("queries/fc_violates_first.cq")).out);
  CHECK(j["classification"]["free_connex"] == true);
  CHECK(j["classification"]["q_hierarchical"] == false);
}

TEST_CASE("eval output formats and routes") {
  auto r = cli("eval --query " + data("queries/full_join.cq") + " --db " + data("db") + " --verify");
  CHECK(r.code == 0);
  CHECK(r.out == "1,2,3,1\n2,2,3,4\n");

  auto g = cli("eval " + data("queries/join_not_free_connex.cq") + " --db " + data("db") + " --out jsonl --verify");
  CHECK(g.code == 0);
  CHECK(has(g.err, "not free-connex"));
  CHECK(has(g.out, R"({"annotation":11,"tuple":[1,4]})"));

  auto d = cli("eval " + data("queries/disjunction.cq") + " --db " + data("db") + " --verify");
  CHECK(d.code == 0);
  CHECK(has(d.err, "oracle"));

  auto lim = cli("enumerate " + data("queries/identity.cq") + " --db " + data("db") + " --limit 2");
  CHECK(lim.out == "1,1,1\n2,2,1\n");

  auto b = cli("eval " + data("queries/q_hierarchical.cq") + " --db " + data("db") + " --semiring tropical-min --verify");
  CHECK(b.code == 0);
  CHECK(b.out == "1,5\n3,3\n");
}

TEST_CASE("json reports are stable apart from timing") {
  auto once = [] {
    auto j = json::parse(cli("eval --json " + data("queries/full_join.cq") + " --db " + data("db")).out);
    CHECK(j.contains("timing"));
    j.erase("timing");
    return j.dump();
  };
  CHECK(once() == once());
}

TEST_CASE("user errors exit with 1") {
  auto unknown = cli("eval " + data("queries/full_join.cq") + " --db " + data("db") + " --bogus");
  CHECK(unknown.code == 1);
  CHECK(has(unknown.err, "Usage"));

  auto bad = cli("classify " + data("queries/malformed.cq"));
  CHECK(bad.code == 1);
  CHECK(has(bad.err, "malformed.cq:1:17"));

  CHECK(cli("eval " + data("queries/q_hierarchical.cq") + " --db " + data("db") + " --semiring fancy").code == 1);
  CHECK(cli("enumerate " + data("queries/join_not_free_connex.cq") + " --db " + data("db")).code == 1);
  CHECK(cli("").code == 1);

  fs::path dir = scratch() / "zero_value";
  fs::create_directories(dir);
  write(dir / "vocab.json", R"({"relations": {"A": 2, "U": 1}})");
  write(dir / "A.csv", "1,2,3\n0,2,7\n");
  auto ing = cli("eval " + data("queries/q_hierarchical.cq") + " --db " + dir.string());
  CHECK(ing.code == 1);
  CHECK(has(ing.err, "A.csv:2"));

  auto upd = cli("dyn " + data("queries/q_hierarchical.cq") + " --db " + data("db") + " --updates " +
                 data("queries/bad_relation.ups"));
  CHECK(upd.code == 1);
  CHECK(has(upd.err, "bad_relation.ups:1"));

  auto typ = cli("matlang classify " + data("matlang/ill_typed.ml"));
  CHECK(typ.code == 1);
  CHECK(has(typ.err, "ill_typed.ml"));
}

TEST_CASE("dyn applies an update script") {
  auto r = cli("dyn " + data("queries/q_hierarchical.cq") + " --db " + data("db") + " --updates " +
               data("queries/updates.ups") + " --verify");
  CHECK(r.code == 0);
  CHECK(r.out == "# final\n2,18\n3,2\n");

  auto each = cli("dyn " + data("queries/q_hierarchical.cq") + " --db " + data("db") + " --updates " +
                  data("queries/updates.ups") + " --enumerate-after-each --json");
  auto j = json::parse(each.out);
  REQUIRE(j["steps"].size() == 4);
  CHECK(j["steps"][0]["update"] == "+ A 1 5 1");
  CHECK(j["steps"][0]["results"][0] == json{{"tuple", {1}}, {"annotation", 16}});

  CHECK(cli("dyn " + data("queries/fc_violates_second.cq") + " --db " + data("db") + " --updates " +
            data("queries/updates.ups"))
            .code == 1);
}

TEST_CASE("matlang subcommands") {
  auto r = cli("matlang eval " + data("matlang/hadamard.ml") + " --verify");
  CHECK(r.code == 0);
  CHECK(r.out == "1 1 30\n3 2 14\n");

  auto c = cli("matlang compile --dump-cq " + data("matlang/product.ml"));
  CHECK(c.out == "H(x,y) :- A(x,w1), B(w1,y).\n");

  auto k = json::parse(cli("matlang classify --json " + data("matlang/hadamard.ml")).out);
  CHECK(k["fragments"]["fc_matlang"] == true);

  auto sum = cli("matlang eval " + data("matlang/sum.ml") + " --schema " + data("matlang/schema.json") + " --verify");
  CHECK(sum.code == 0);
  CHECK(has(sum.err, "addition"));
  CHECK(has(sum.out, "3 2 14\n"));
}

TEST_CASE("plan and bench emit JSON") {
  auto p = json::parse(cli("plan --verify " + data("queries/full_join.cq")).out);
  CHECK(p["verified"] == true);
  CHECK(p.contains("ghd"));
  auto dot = cli("plan --guarded --dot " + data("queries/q_hierarchical.cq"));
  CHECK(has(dot.out, "digraph"));

  auto b = cli("bench --sizes 1e3,2e3 --verify");
  CHECK(b.code == 0);
  auto j = json::parse(b.out);
  CHECK(j["runs"].size() == 2);
  CHECK(j["verified"] == true);
  CHECK(j["runs"][0]["timing"].contains("gap_histogram_log2_ns"));
}

TEST_CASE("eval --verify on a random corpus") {
  Rng rng(seed_from_env(515));
  QueryGenOptions o;
  int n = 0;
  for (const char* sname : {"boolean", "natural", "real"}) {
    auto s = builtin_semiring(sname);
    for (int i = 0; i < 8; ++i) {
      auto v = random_vocabulary(rng, o, 5);
      auto q = i % 2 ? random_free_connex_cq(rng, v, o) : random_cq(rng, v, o);
      auto db = random_database(rng, v, s, {5, 20});
      fs::path dir = scratch() / ("corpus_" + std::to_string(n++));
      save_db(db, dir);
      write(dir / "q.cq", to_string(q) + "\n");
      auto r = cli("eval " + (dir / "q.cq").string() + " --db " + dir.string() + " --semiring " + sname + " --verify");
      CHECK_MESSAGE(r.code == 0, to_string(q), " ", r.err);
    }
  }
}
