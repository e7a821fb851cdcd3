#include "deltaenum/matlang.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "deltaenum/engine_static.hpp"
#include "deltaenum/errors.hpp"
#include "deltaenum/oracle.hpp"
#include "deltaenum/planner.hpp"

namespace deltaenum {

namespace {

ExprPtr make(Expr::Kind k, std::vector<ExprPtr> kids, std::string name = {}, std::string size = {}) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  e->kids = std::move(kids);
  e->name = std::move(name);
  e->size = std::move(size);
  return e;
}

const std::set<std::string>& keywords() {
  static const std::set<std::string> k{"sum", "smul", "ones", "eye"};
  return k;
}

bool is_identifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

}  // namespace

ExprPtr Expr::symbol(std::string name) { return make(Kind::Symbol, {}, std::move(name)); }
ExprPtr Expr::transpose(ExprPtr e) { return make(Kind::Transpose, {std::move(e)}); }
ExprPtr Expr::product(ExprPtr a, ExprPtr b) { return make(Kind::Product, {std::move(a), std::move(b)}); }
ExprPtr Expr::hadamard(ExprPtr a, ExprPtr b) { return make(Kind::Hadamard, {std::move(a), std::move(b)}); }
ExprPtr Expr::add(ExprPtr a, ExprPtr b) { return make(Kind::Add, {std::move(a), std::move(b)}); }
ExprPtr Expr::scalar_mul(ExprPtr a, ExprPtr b) { return make(Kind::ScalarMul, {std::move(a), std::move(b)}); }
ExprPtr Expr::ones(std::string size) { return make(Kind::Ones, {}, {}, std::move(size)); }
ExprPtr Expr::eye(std::string size) { return make(Kind::Eye, {}, {}, std::move(size)); }
ExprPtr Expr::sum(std::string var, std::string size, ExprPtr body) {
  return make(Kind::Sum, {std::move(body)}, std::move(var), std::move(size));
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Tok {
  enum Kind { Ident, One, LParen, RParen, Comma, Star, DotStar, Plus, Quote, Assign, Colon, Dot, End } kind;
  std::string text;
  std::size_t pos;
};

std::vector<Tok> lex_matlang(const std::string& s) {
  std::vector<Tok> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '#') {
      while (i < s.size() && s[i] != '\n') ++i;
      continue;
    }
    std::size_t start = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
      out.push_back({Tok::Ident, s.substr(start, i - start), start});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
      std::string num = s.substr(start, i - start);
      if (num != "1") throw ParseError(start, "numeric literal '" + num + "' (only the size 1 is allowed)");
      out.push_back({Tok::One, num, start});
      continue;
    }
    auto two = s.substr(i, 2);
    if (two == ".*") {
      out.push_back({Tok::DotStar, two, start});
      i += 2;
      continue;
    }
    if (two == ":=") {
      out.push_back({Tok::Assign, two, start});
      i += 2;
      continue;
    }
    Tok::Kind k;
    switch (c) {
      case '(': k = Tok::LParen; break;
      case ')': k = Tok::RParen; break;
      case ',': k = Tok::Comma; break;
      case '*': k = Tok::Star; break;
      case '+': k = Tok::Plus; break;
      case '\'': k = Tok::Quote; break;
      case ':': k = Tok::Colon; break;
      case '.': k = Tok::Dot; break;
      default: throw ParseError(start, std::string("unexpected character '") + c + "'");
    }
    out.push_back({k, std::string(1, c), start});
    ++i;
  }
  out.push_back({Tok::End, "", s.size()});
  return out;
}

class MatParser {
 public:
  explicit MatParser(const std::string& s) : toks_(lex_matlang(s)) {}

  MatlangProgram program() {
    MatlangProgram p;
    if (peek().kind == Tok::Ident && toks_[i_ + 1].kind == Tok::Assign) {
      p.output = take().text;
      if (keywords().count(p.output)) throw ParseError(toks_[i_ - 1].pos, "keyword used as output name");
      take();
    }
    p.expr = expr();
    expect(Tok::End, "end of input");
    return p;
  }

 private:
  const Tok& peek() const { return toks_[i_]; }
  Tok take() { return toks_[i_++]; }
  Tok expect(Tok::Kind k, const char* what) {
    if (peek().kind != k)
      throw ParseError(peek().pos, std::string("expected ") + what + ", found '" + peek().text + "'");
    return take();
  }

  ExprPtr expr() {
    ExprPtr e = term();
    while (peek().kind == Tok::Plus) {
      take();
      e = Expr::add(e, term());
    }
    return e;
  }

  ExprPtr term() {
    ExprPtr e = postfix();
    for (;;) {
      if (peek().kind == Tok::Star) {
        take();
        e = Expr::product(e, postfix());
      } else if (peek().kind == Tok::DotStar) {
        take();
        e = Expr::hadamard(e, postfix());
      } else {
        return e;
      }
    }
  }

  ExprPtr postfix() {
    ExprPtr e = primary();
    while (peek().kind == Tok::Quote) {
      take();
      e = Expr::transpose(e);
    }
    return e;
  }

  std::string size() {
    if (peek().kind == Tok::One) return take().text;
    Tok t = expect(Tok::Ident, "size symbol");
    if (keywords().count(t.text)) throw ParseError(t.pos, "keyword used as size symbol");
    return t.text;
  }

  ExprPtr primary() {
    const Tok& t = peek();
    if (t.kind == Tok::LParen) {
      take();
      ExprPtr e = expr();
      expect(Tok::RParen, "')'");
      return e;
    }
    if (t.kind != Tok::Ident) throw ParseError(t.pos, "expected an expression, found '" + t.text + "'");
    Tok id = take();
    if (id.text == "ones" || id.text == "eye") {
      expect(Tok::LParen, "'('");
      std::string a = size();
      expect(Tok::RParen, "')'");
      return id.text == "ones" ? Expr::ones(a) : Expr::eye(a);
    }
    if (id.text == "smul") {
      expect(Tok::LParen, "'('");
      ExprPtr a = expr();
      expect(Tok::Comma, "','");
      ExprPtr b = expr();
      expect(Tok::RParen, "')'");
      return Expr::scalar_mul(a, b);
    }
    if (id.text == "sum") {
      Tok v = expect(Tok::Ident, "vector variable");
      if (keywords().count(v.text)) throw ParseError(v.pos, "keyword used as vector variable");
      expect(Tok::Colon, "':'");
      std::string a = size();
      expect(Tok::Dot, "'.'");
      return Expr::sum(v.text, a, expr());
    }
    return Expr::symbol(id.text);
  }

  std::vector<Tok> toks_;
  std::size_t i_ = 0;
};

int precedence(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Sum: return 0;
    case Expr::Kind::Add: return 1;
    case Expr::Kind::Product:
    case Expr::Kind::Hadamard: return 2;
    case Expr::Kind::Transpose: return 3;
    default: return 4;
  }
}

std::string print(const Expr& e, int ctx) {
  std::string s;
  switch (e.kind) {
    case Expr::Kind::Symbol: s = e.name; break;
    case Expr::Kind::Ones: s = "ones(" + e.size + ")"; break;
    case Expr::Kind::Eye: s = "eye(" + e.size + ")"; break;
    case Expr::Kind::ScalarMul: s = "smul(" + print(*e.kids[0], 1) + ", " + print(*e.kids[1], 1) + ")"; break;
    case Expr::Kind::Transpose: s = print(*e.kids[0], 3) + "'"; break;
    case Expr::Kind::Product: s = print(*e.kids[0], 2) + " * " + print(*e.kids[1], 3); break;
    case Expr::Kind::Hadamard: s = print(*e.kids[0], 2) + " .* " + print(*e.kids[1], 3); break;
    case Expr::Kind::Add: s = print(*e.kids[0], 1) + " + " + print(*e.kids[1], 2); break;
    case Expr::Kind::Sum: s = "sum " + e.name + ":" + e.size + ". " + print(*e.kids[0], 0); break;
  }
  return precedence(e) < ctx ? "(" + s + ")" : s;
}

}  // namespace

MatlangProgram parse_matlang(const std::string& text) { return MatParser(text).program(); }

std::string to_string(const Expr& e) { return print(e, 0); }
std::string to_string(const MatlangProgram& p) { return p.output + " := " + to_string(*p.expr); }

// ---------------------------------------------------------------------------
// Schema

std::string encoding_name(Encoding e) {
  switch (e) {
    case Encoding::Binary: return "binary";
    case Encoding::Unary: return "unary";
    case Encoding::Nullary: return "nullary";
  }
  return "binary";
}

namespace {

Encoding parse_encoding(const std::string& s) {
  if (s == "binary") return Encoding::Binary;
  if (s == "unary") return Encoding::Unary;
  if (s == "nullary") return Encoding::Nullary;
  throw SchemaError("unknown encoding '" + s + "' (expected binary, unary or nullary)");
}

void check_shape(const std::string& name, const MatType& t, Encoding enc) {
  if (enc == Encoding::Unary && t.rows != "1" && t.cols != "1")
    throw SchemaError("matrix " + name + ": unary encoding needs a vector type");
  if (enc == Encoding::Nullary && (t.rows != "1" || t.cols != "1"))
    throw SchemaError("matrix " + name + ": nullary encoding needs type (1,1)");
}

}  // namespace

Datum MatrixSchema::dim(const std::string& size) const {
  if (size == "1") return 1;
  auto it = sizes.find(size);
  if (it == sizes.end()) throw TypeError("unknown size symbol '" + size + "'");
  return it->second;
}

MatrixSchema parse_matrix_schema(const nlohmann::json& j) {
  MatrixSchema s;
  s.sizes["1"] = 1;
  try {
    if (!j.is_object()) throw SchemaError("schema must be a JSON object");
    if (j.contains("sizes")) {
      for (const auto& [name, v] : j.at("sizes").items()) {
        if (name == "1") continue;
        if (!is_identifier(name) || keywords().count(name)) throw SchemaError("invalid size symbol '" + name + "'");
        if (!v.is_number_integer() || v.get<long long>() < 1)
          throw SchemaError("size " + name + " must be a positive integer");
        s.sizes[name] = v.get<Datum>();
      }
    }
    for (const auto& [name, m] : j.at("matrices").items()) {
      if (!is_identifier(name) || keywords().count(name)) throw SchemaError("invalid matrix symbol '" + name + "'");
      if (s.sizes.count(name)) throw SchemaError("symbol '" + name + "' is both a size and a matrix");
      MatrixDecl d;
      const auto& ty = m.at("type");
      if (!ty.is_array() || ty.size() != 2) throw SchemaError("matrix " + name + ": type must be [rows, cols]");
      auto dimname = [&](const nlohmann::json& x) {
        std::string n = x.is_number_integer() ? std::to_string(x.get<long long>()) : x.get<std::string>();
        if (!s.sizes.count(n)) throw SchemaError("matrix " + name + ": unknown size symbol '" + n + "'");
        return n;
      };
      d.type = {dimname(ty[0]), dimname(ty[1])};
      if (m.contains("encoding")) d.encoding = parse_encoding(m.at("encoding").get<std::string>());
      check_shape(name, d.type, d.encoding);
      s.matrices[name] = d;
    }
    if (j.contains("output") && j.at("output").contains("encoding"))
      s.output_encoding = parse_encoding(j.at("output").at("encoding").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
  return s;
}

MatrixSchema load_matrix_schema(const std::filesystem::path& file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(file.string() + ": " + e.what());
  }
  return parse_matrix_schema(j);
}

nlohmann::json schema_to_json(const MatrixSchema& s) {
  nlohmann::json j;
  j["sizes"] = nlohmann::json::object();
  for (const auto& [n, v] : s.sizes)
    if (n != "1") j["sizes"][n] = v;
  j["matrices"] = nlohmann::json::object();
  for (const auto& [n, d] : s.matrices)
    j["matrices"][n] = {{"type", {d.type.rows, d.type.cols}}, {"encoding", encoding_name(d.encoding)}};
  j["output"] = {{"encoding", encoding_name(s.output_encoding)}};
  return j;
}

// ---------------------------------------------------------------------------
// Typing and fragments

namespace {

std::string tstr(const MatType& t) { return "(" + t.rows + "," + t.cols + ")"; }

MatType type_of(const Expr& e, const MatrixSchema& schema, std::map<std::string, std::string>& vectors,
                const std::string& path) {
  auto fail = [&](const std::string& msg) -> MatType { throw TypeError("at " + path + ": " + msg); };
  auto check_size = [&](const std::string& a) {
    if (a != "1" && !schema.sizes.count(a)) fail("unknown size symbol '" + a + "'");
  };
  switch (e.kind) {
    case Expr::Kind::Symbol: {
      auto v = vectors.find(e.name);
      if (v != vectors.end()) return {v->second, "1"};
      auto m = schema.matrices.find(e.name);
      if (m == schema.matrices.end()) return fail("unknown symbol '" + e.name + "'");
      return m->second.type;
    }
    case Expr::Kind::Transpose: {
      MatType t = type_of(*e.kids[0], schema, vectors, path + ".arg");
      return {t.cols, t.rows};
    }
    case Expr::Kind::Product: {
      MatType a = type_of(*e.kids[0], schema, vectors, path + ".lhs");
      MatType b = type_of(*e.kids[1], schema, vectors, path + ".rhs");
      if (a.cols != b.rows) return fail("cannot multiply " + tstr(a) + " by " + tstr(b));
      return {a.rows, b.cols};
    }
    case Expr::Kind::Hadamard:
    case Expr::Kind::Add: {
      MatType a = type_of(*e.kids[0], schema, vectors, path + ".lhs");
      MatType b = type_of(*e.kids[1], schema, vectors, path + ".rhs");
      if (!(a == b))
        return fail(std::string(e.kind == Expr::Kind::Add ? "addition" : "Hadamard product") + " of " + tstr(a) +
                    " and " + tstr(b));
      return a;
    }
    case Expr::Kind::ScalarMul: {
      MatType a = type_of(*e.kids[0], schema, vectors, path + ".scalar");
      MatType b = type_of(*e.kids[1], schema, vectors, path + ".matrix");
      if (a.rows != "1" || a.cols != "1") return fail("scalar operand has type " + tstr(a));
      return b;
    }
    case Expr::Kind::Ones: check_size(e.size); return {e.size, "1"};
    case Expr::Kind::Eye: check_size(e.size); return {e.size, e.size};
    case Expr::Kind::Sum: {
      check_size(e.size);
      if (schema.matrices.count(e.name)) fail("vector variable '" + e.name + "' shadows a matrix symbol");
      auto saved = vectors.find(e.name) != vectors.end() ? std::optional(vectors[e.name]) : std::nullopt;
      vectors[e.name] = e.size;
      MatType t = type_of(*e.kids[0], schema, vectors, path + ".body");
      if (saved)
        vectors[e.name] = *saved;
      else
        vectors.erase(e.name);
      return t;
    }
  }
  return fail("unknown node");
}

bool is_vector_type(const MatType& t) { return t.rows == "1" || t.cols == "1"; }

bool has_kind(const Expr& e, Expr::Kind k) {
  if (e.kind == k) return true;
  return std::any_of(e.kids.begin(), e.kids.end(), [&](const ExprPtr& c) { return has_kind(*c, k); });
}

bool has_vector_var(const Expr& e, std::set<std::string>& bound) {
  if (e.kind == Expr::Kind::Symbol) return bound.count(e.name) > 0;
  if (e.kind == Expr::Kind::Sum) {
    bool had = bound.count(e.name) > 0;
    bound.insert(e.name);
    bool r = has_vector_var(*e.kids[0], bound);
    if (!had) bound.erase(e.name);
    return r;
  }
  return std::any_of(e.kids.begin(), e.kids.end(), [&](const ExprPtr& c) { return has_vector_var(*c, bound); });
}

bool no_sum_or_add(const Expr& e) { return !has_kind(e, Expr::Kind::Sum) && !has_kind(e, Expr::Kind::Add); }

bool fc_rec(const Expr& e, const MatrixSchema& schema) {
  switch (e.kind) {
    case Expr::Kind::Symbol:
    case Expr::Kind::Ones:
    case Expr::Kind::Eye: return true;
    case Expr::Kind::Transpose: return fc_rec(*e.kids[0], schema);
    case Expr::Kind::ScalarMul:
    case Expr::Kind::Hadamard: return fc_rec(*e.kids[0], schema) && fc_rec(*e.kids[1], schema);
    case Expr::Kind::Product: {
      if (!fc_rec(*e.kids[0], schema) || !fc_rec(*e.kids[1], schema)) return false;
      return is_vector_type(typecheck(*e.kids[0], schema)) || is_vector_type(typecheck(*e.kids[1], schema));
    }
    default: return false;
  }
}

bool is_ones(const Expr& e) { return e.kind == Expr::Kind::Ones; }

bool simple_rec(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Symbol:
    case Expr::Kind::Ones:
    case Expr::Kind::Eye: return true;
    case Expr::Kind::Transpose: return simple_rec(*e.kids[0]);
    case Expr::Kind::ScalarMul:
    case Expr::Kind::Hadamard: return simple_rec(*e.kids[0]) && simple_rec(*e.kids[1]);
    case Expr::Kind::Product: return is_ones(*e.kids[1]) && simple_rec(*e.kids[0]);
    default: return false;
  }
}

/** e2 * ones(a)' with e2 simple. */
bool right_layer(const Expr& e) {
  return e.kind == Expr::Kind::Product && e.kids[1]->kind == Expr::Kind::Transpose && is_ones(*e.kids[1]->kids[0]) &&
         simple_rec(*e.kids[0]);
}

/** ones(a) * e1 with e1 simple. */
bool left_layer(const Expr& e) {
  return e.kind == Expr::Kind::Product && is_ones(*e.kids[0]) && simple_rec(*e.kids[1]);
}

bool qh_rec(const Expr& e) {
  if (simple_rec(e)) return true;
  if (e.kind != Expr::Kind::Hadamard) return false;
  const Expr& a = *e.kids[0];
  const Expr& b = *e.kids[1];
  if (simple_rec(a) && right_layer(b)) return true;
  if (left_layer(a) && simple_rec(b)) return true;
  return left_layer(a) && right_layer(b);
}

}  // namespace

MatType typecheck(const Expr& e, const MatrixSchema& schema, const std::map<std::string, std::string>& vectors) {
  std::map<std::string, std::string> env = vectors;
  return type_of(e, schema, env, "root");
}

bool uses_addition(const Expr& e) { return has_kind(e, Expr::Kind::Add); }

FragmentFlags classify_fragment(const Expr& e, const MatrixSchema& schema) {
  typecheck(e, schema);
  FragmentFlags f;
  std::set<std::string> bound;
  f.matlang = !has_kind(e, Expr::Kind::Sum) && !has_vector_var(e, bound);
  f.conj_matlang = !uses_addition(e);
  f.fc_matlang = no_sum_or_add(e) && fc_rec(e, schema);
  f.simple_matlang = no_sum_or_add(e) && simple_rec(e);
  f.qh_matlang = no_sum_or_add(e) && qh_rec(e);
  return f;
}

// ---------------------------------------------------------------------------
// Instances

MatrixInstance empty_instance(const MatrixSchema& schema, const Semiring& s) {
  MatrixInstance inst{schema, s, {}};
  for (const auto& [name, d] : schema.matrices) {
    SparseMatrix m;
    m.rows = schema.dim(d.type.rows);
    m.cols = schema.dim(d.type.cols);
    inst.matrices[name] = m;
  }
  return inst;
}

void parse_coo(SparseMatrix& m, const Semiring& s, const std::string& text, const std::string& file) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() != 3) throw IngestionError(file, lineno, "expected `i j value`");
    Datum ij[2];
    for (int k = 0; k < 2; ++k) {
      const std::string& t = tok[k];
      auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), ij[k]);
      if (ec != std::errc() || p != t.data() + t.size() || ij[k] < 1)
        throw IngestionError(file, lineno, "index '" + t + "' is not a positive integer");
    }
    if (ij[0] > m.rows || ij[1] > m.cols)
      throw IngestionError(file, lineno,
                           "entry (" + tok[0] + "," + tok[1] + ") outside " + std::to_string(m.rows) + "x" +
                               std::to_string(m.cols));
    Value v;
    try {
      v = s.parse(tok[2]);
    } catch (const Error& e) {
      throw IngestionError(file, lineno, e.what());
    }
    if (m.entries.count({ij[0], ij[1]})) throw IngestionError(file, lineno, "duplicate entry");
    if (!s.is_zero(v)) m.entries[{ij[0], ij[1]}] = v;
  }
}

std::string matrix_to_coo(const SparseMatrix& m, const Semiring& s) {
  std::string out;
  for (const auto& [ij, v] : m.entries)
    out += std::to_string(ij.first) + " " + std::to_string(ij.second) + " " + s.format(v) + "\n";
  return out;
}

MatrixInstance load_matrix_instance(const MatrixSchema& schema, const std::filesystem::path& dir, const Semiring& s) {
  MatrixInstance inst = empty_instance(schema, s);
  for (auto& [name, m] : inst.matrices) {
    auto p = dir / (name + ".coo");
    if (!std::filesystem::exists(p)) continue;
    parse_coo(m, s, read_file(p), p.string());
  }
  return inst;
}

namespace {

std::size_t arity_of(Encoding e) { return e == Encoding::Binary ? 2 : e == Encoding::Unary ? 1 : 0; }

Tuple encode_entry(const MatType& t, Encoding enc, Datum i, Datum j) {
  switch (enc) {
    case Encoding::Binary: return {i, j};
    case Encoding::Unary: return t.cols == "1" ? Tuple{i} : Tuple{j};
    case Encoding::Nullary: return {};
  }
  return {};
}

}  // namespace

Vocabulary encode_vocabulary(const MatrixSchema& schema) {
  Vocabulary v;
  for (const auto& [n, d] : schema.matrices) v.relations[n] = arity_of(d.encoding);
  for (const auto& [n, val] : schema.sizes) v.constants[n] = val;
  return v;
}

Database encode_instance(const MatrixInstance& inst) {
  Database db(encode_vocabulary(inst.schema), inst.semiring);
  for (const auto& [name, m] : inst.matrices) {
    const MatrixDecl& d = inst.schema.matrices.at(name);
    AnnotatedRelation& rel = db.relation(name);
    for (const auto& [ij, v] : m.entries) rel.set(encode_entry(d.type, d.encoding, ij.first, ij.second), v);
  }
  return db;
}

SparseMatrix decode_matrix(const AnnotatedRelation& rel, const MatType& type, Encoding enc, const MatrixSchema& schema,
                           const std::string& name) {
  SparseMatrix m;
  m.rows = schema.dim(type.rows);
  m.cols = schema.dim(type.cols);
  if (rel.arity() != arity_of(enc))
    throw ConsistencyError("relation " + name + " has arity " + std::to_string(rel.arity()) + ", " +
                           encoding_name(enc) + " encoding needs " + std::to_string(arity_of(enc)));
  auto fmt = [](std::span<const Datum> t) {
    std::string s = "(";
    for (std::size_t i = 0; i < t.size(); ++i) s += (i ? "," : "") + std::to_string(t[i]);
    return s + ")";
  };
  rel.for_each([&](std::span<const Datum> t, Value v) {
    Datum i = 1, j = 1;
    if (enc == Encoding::Binary) {
      i = t[0];
      j = t[1];
    } else if (enc == Encoding::Unary) {
      (type.cols == "1" ? i : j) = t[0];
    }
    if (i > m.rows)
      throw ConsistencyError("relation " + name + ": tuple " + fmt(t) + " exceeds dimension " + type.rows + "=" +
                             std::to_string(m.rows));
    if (j > m.cols)
      throw ConsistencyError("relation " + name + ": tuple " + fmt(t) + " exceeds dimension " + type.cols + "=" +
                             std::to_string(m.cols));
    m.entries[{i, j}] = v;
  });
  return m;
}

MatrixInstance decode_instance(const Database& db, const MatrixSchema& schema) {
  MatrixSchema sch = schema;
  for (auto& [n, v] : sch.sizes) v = db.constant(n);
  MatrixInstance inst{sch, db.semiring(), {}};
  for (const auto& [name, d] : sch.matrices)
    inst.matrices[name] = decode_matrix(db.relation(name), d.type, d.encoding, sch, name);
  return inst;
}

// ---------------------------------------------------------------------------
// Translation

namespace {

class Translator {
 public:
  explicit Translator(const MatrixSchema& schema) : schema_(schema) {}

  std::vector<RelAtom> atoms;
  std::vector<IneqAtom> ineqs;
  std::vector<std::pair<std::string, std::string>> eqs;

  std::string fresh() { return "w" + std::to_string(++counter_); }

  void tr(const Expr& e, const std::string& r, const std::string& c) {
    switch (e.kind) {
      case Expr::Kind::Symbol: {
        auto v = vectors_.find(e.name);
        if (v != vectors_.end()) {
          ineqs.push_back({r, v->second.second});
          ineqs.push_back({c, "1"});
          eqs.emplace_back(r, v->second.first);
          return;
        }
        const MatrixDecl& d = schema_.matrices.at(e.name);
        switch (d.encoding) {
          case Encoding::Binary: atoms.push_back({e.name, {r, c}}); break;
          case Encoding::Unary:
            if (d.type.cols == "1") {
              atoms.push_back({e.name, {r}});
              ineqs.push_back({c, "1"});
            } else {
              atoms.push_back({e.name, {c}});
              ineqs.push_back({r, "1"});
            }
            break;
          case Encoding::Nullary:
            atoms.push_back({e.name, {}});
            ineqs.push_back({r, "1"});
            ineqs.push_back({c, "1"});
            break;
        }
        return;
      }
      case Expr::Kind::Transpose: tr(*e.kids[0], c, r); return;
      case Expr::Kind::Product: {
        std::string z = fresh();
        tr(*e.kids[0], r, z);
        tr(*e.kids[1], z, c);
        return;
      }
      case Expr::Kind::Hadamard:
        tr(*e.kids[0], r, c);
        tr(*e.kids[1], r, c);
        return;
      case Expr::Kind::ScalarMul: {
        std::string r1 = fresh(), c1 = fresh();
        tr(*e.kids[0], r1, c1);
        tr(*e.kids[1], r, c);
        return;
      }
      case Expr::Kind::Ones:
        ineqs.push_back({r, e.size});
        ineqs.push_back({c, "1"});
        return;
      case Expr::Kind::Eye:
        ineqs.push_back({r, e.size});
        eqs.emplace_back(r, c);
        return;
      case Expr::Kind::Sum: {
        std::string w = fresh();
        ineqs.push_back({w, e.size});
        auto saved = vectors_.find(e.name) != vectors_.end() ? std::optional(vectors_[e.name]) : std::nullopt;
        vectors_[e.name] = {w, e.size};
        tr(*e.kids[0], r, c);
        if (saved)
          vectors_[e.name] = *saved;
        else
          vectors_.erase(e.name);
        return;
      }
      case Expr::Kind::Add: throw FragmentError("addition cannot be translated to a conjunctive query");
    }
  }

 private:
  const MatrixSchema& schema_;
  int counter_ = 0;
  std::map<std::string, std::pair<std::string, std::string>> vectors_;  // vector var -> (variable, size)
};

}  // namespace

ConjunctiveQuery translate_to_cq(const MatlangProgram& p, const MatrixSchema& schema) {
  MatType type = typecheck(*p.expr, schema);
  if (uses_addition(*p.expr)) throw FragmentError("expression uses addition; not in conj-MATLANG");
  Translator t(schema);
  t.tr(*p.expr, "x", "y");

  // equality elimination
  std::map<std::string, std::string> parent;
  std::function<std::string(const std::string&)> find = [&](const std::string& v) -> std::string {
    auto it = parent.find(v);
    if (it == parent.end() || it->second == v) return v;
    return it->second = find(it->second);
  };
  std::set<std::string> in_atom;
  for (const auto& a : t.atoms) in_atom.insert(a.vars.begin(), a.vars.end());
  for (const auto& c : t.ineqs) in_atom.insert(c.var);
  std::set<std::string> all = in_atom;
  all.insert("x");
  all.insert("y");
  for (const auto& [a, b] : t.eqs) {
    all.insert(a);
    all.insert(b);
    std::string ra = find(a), rb = find(b);
    if (ra != rb) parent[ra] = rb;
  }
  std::map<std::string, std::vector<std::string>> classes;
  for (const auto& v : all) classes[find(v)].push_back(v);
  std::map<std::string, std::string> rep;
  for (const auto& [root, members] : classes) {
    std::vector<std::string> cand;
    for (const auto& m : members)
      if (in_atom.count(m)) cand.push_back(m);
    if (cand.empty()) throw InternalError("equality class without an atom occurrence");
    std::string best;
    for (const char* h : {"x", "y"})
      if (best.empty() && std::find(cand.begin(), cand.end(), h) != cand.end()) best = h;
    if (best.empty()) best = *std::min_element(cand.begin(), cand.end());
    for (const auto& m : members) rep[m] = best;
  }

  ConjunctiveQuery q;
  q.head = p.output;
  for (auto a : t.atoms) {
    for (auto& v : a.vars) v = rep.at(v);
    q.atoms.push_back(a);
  }
  std::string hx = rep.at("x"), hy = rep.at("y");
  switch (schema.output_encoding) {
    case Encoding::Binary: q.head_vars = {hx, hy}; break;
    case Encoding::Unary:
      if (type.cols == "1")
        q.head_vars = {hx};
      else if (type.rows == "1")
        q.head_vars = {hy};
      else
        throw SchemaError("unary output encoding needs a vector-typed expression, got " + tstr(type));
      break;
    case Encoding::Nullary:
      if (type.rows != "1" || type.cols != "1")
        throw SchemaError("nullary output encoding needs type (1,1), got " + tstr(type));
      break;
  }

  // comparisons: dedupe, keep only `<= 1` when present, drop bound variables fixed to 1
  std::map<std::string, std::set<std::string>> bounds;
  std::vector<std::string> order;
  for (const auto& c : t.ineqs) {
    std::string v = rep.at(c.var);
    if (!bounds.count(v)) order.push_back(v);
    bounds[v].insert(c.constant);
  }
  std::set<std::string> rel_vars;
  for (const auto& a : q.atoms) rel_vars.insert(a.vars.begin(), a.vars.end());
  auto is_head = [&](const std::string& v) {
    return std::find(q.head_vars.begin(), q.head_vars.end(), v) != q.head_vars.end();
  };
  for (const auto& v : order) {
    const auto& cs = bounds[v];
    if (cs.count("1")) {
      if (!is_head(v) && !rel_vars.count(v)) continue;
      q.ineqs.push_back({v, "1"});
      continue;
    }
    for (const auto& c : cs) q.ineqs.push_back({v, c});
  }
  q.normalize_bound();
  q.validate();
  return q;
}

MatlangResult eval_matlang(const MatlangProgram& p, const MatrixInstance& inst) {
  MatlangResult r;
  r.type = typecheck(*p.expr, inst.schema);
  if (uses_addition(*p.expr)) {
    r.warnings.push_back("expression uses addition; evaluated by the dense reference evaluator");
    r.matrix = to_sparse(oracle_eval_matlang(*p.expr, inst), inst.semiring);
    return r;
  }
  ConjunctiveQuery q = translate_to_cq(p, inst.schema);
  Database db = encode_instance(inst);
  Classification c = classify(q);
  r.free_connex = c.free_connex;
  r.q_hierarchical = c.q_hierarchical;
  AnnotatedRelation rel(q.head_vars.size(), inst.semiring);
  if (c.free_connex) {
    rel = eval_materialized(q, db);
  } else {
    r.warnings.push_back("translated query is not free-connex; evaluated by a generic join");
    rel = eval_general(q, db);
  }
  r.matrix = decode_matrix(rel, r.type, inst.schema.output_encoding, inst.schema, p.output);
  r.cq = std::move(q);
  return r;
}

std::vector<SingleTupleUpdate> matrix_update_to_relational(const MatrixUpdate& u, const MatrixSchema& schema) {
  auto it = schema.matrices.find(u.matrix);
  if (it == schema.matrices.end()) throw VocabularyError("unknown matrix symbol '" + u.matrix + "'");
  const MatrixDecl& d = it->second;
  Datum rows = schema.dim(d.type.rows), cols = schema.dim(d.type.cols);
  if (u.row < 1 || u.row > rows)
    throw ConsistencyError("matrix " + u.matrix + ": row " + std::to_string(u.row) + " outside 1.." +
                           std::to_string(rows) + " (" + d.type.rows + ")");
  if (u.col < 1 || u.col > cols)
    throw ConsistencyError("matrix " + u.matrix + ": column " + std::to_string(u.col) + " outside 1.." +
                           std::to_string(cols) + " (" + d.type.cols + ")");
  Tuple t = encode_entry(d.type, d.encoding, u.row, u.col);
  if (u.delta) return {SingleTupleUpdate::insert(u.matrix, t, *u.delta)};
  return {SingleTupleUpdate::erase(u.matrix, t)};
}

}  // namespace deltaenum
