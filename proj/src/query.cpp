#include "deltaenum/query.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "deltaenum/errors.hpp"

namespace deltaenum {

FoFormula FoFormula::atom(RelAtom a) {
  FoFormula f;
  f.kind = Kind::Rel;
  f.rel = std::move(a);
  return f;
}

FoFormula FoFormula::comparison(IneqAtom a) {
  FoFormula f;
  f.kind = Kind::Ineq;
  f.ineq = std::move(a);
  return f;
}

FoFormula FoFormula::conj(std::vector<FoFormula> parts) {
  if (parts.size() == 1) return std::move(parts[0]);
  FoFormula f;
  f.kind = Kind::And;
  f.children = std::move(parts);
  return f;
}

FoFormula FoFormula::disj(std::vector<FoFormula> parts) {
  if (parts.size() == 1) return std::move(parts[0]);
  FoFormula f;
  f.kind = Kind::Or;
  f.children = std::move(parts);
  return f;
}

FoFormula FoFormula::exists(std::vector<std::string> vars, FoFormula body) {
  if (vars.empty()) return body;
  FoFormula f;
  f.kind = Kind::Exists;
  f.vars = std::move(vars);
  f.children.push_back(std::move(body));
  return f;
}

namespace {

void push_unique(std::vector<std::string>& out, const std::string& v) {
  if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
}

void collect_free(const FoFormula& f, std::set<std::string>& bound, std::vector<std::string>& out) {
  switch (f.kind) {
    case FoFormula::Kind::Rel:
      for (const auto& v : f.rel.vars)
        if (!bound.count(v)) push_unique(out, v);
      break;
    case FoFormula::Kind::Ineq:
      if (!bound.count(f.ineq.var)) push_unique(out, f.ineq.var);
      break;
    case FoFormula::Kind::And:
    case FoFormula::Kind::Or:
      for (const auto& c : f.children) collect_free(c, bound, out);
      break;
    case FoFormula::Kind::Exists: {
      std::vector<std::string> added;
      for (const auto& v : f.vars)
        if (bound.insert(v).second) added.push_back(v);
      collect_free(f.children[0], bound, out);
      for (const auto& v : added) bound.erase(v);
      break;
    }
  }
}

}  // namespace

std::vector<std::string> FoFormula::free_vars() const {
  std::set<std::string> bound;
  std::vector<std::string> out;
  collect_free(*this, bound, out);
  return out;
}

bool FoFormula::has_disjunction() const {
  if (kind == Kind::Or) return true;
  return std::any_of(children.begin(), children.end(), [](const FoFormula& c) { return c.has_disjunction(); });
}

std::vector<std::string> ConjunctiveQuery::free_vars() const {
  std::vector<std::string> out;
  for (const auto& v : head_vars) push_unique(out, v);
  return out;
}

std::vector<std::string> ConjunctiveQuery::all_vars() const {
  std::vector<std::string> out = free_vars();
  for (const auto& v : bound_vars) push_unique(out, v);
  return out;
}

bool ConjunctiveQuery::is_free(const std::string& v) const {
  return std::find(head_vars.begin(), head_vars.end(), v) != head_vars.end();
}

void ConjunctiveQuery::normalize_bound() {
  bound_vars.clear();
  for (const auto& a : atoms)
    for (const auto& v : a.vars)
      if (!is_free(v)) push_unique(bound_vars, v);
  for (const auto& c : ineqs)
    if (!is_free(c.var)) push_unique(bound_vars, c.var);
}

void ConjunctiveQuery::validate() const {
  std::set<std::string> body;
  for (const auto& a : atoms) {
    if (a.relation == head) throw Error("head symbol '" + head + "' occurs in the body");
    body.insert(a.vars.begin(), a.vars.end());
  }
  for (const auto& c : ineqs) body.insert(c.var);
  for (const auto& v : head_vars)
    if (!body.count(v)) throw Error("head variable '" + v + "' is not free in the body");
  for (const auto& v : bound_vars) {
    if (is_free(v)) throw Error("variable '" + v + "' is both free and bound");
    if (!body.count(v)) throw Error("bound variable '" + v + "' does not occur in the body");
  }
  for (const auto& v : body)
    if (!is_free(v) && std::find(bound_vars.begin(), bound_vars.end(), v) == bound_vars.end())
      throw Error("variable '" + v + "' is neither free nor bound");
}

FoQuery ConjunctiveQuery::to_fo() const {
  std::vector<FoFormula> parts;
  for (const auto& a : atoms) parts.push_back(FoFormula::atom(a));
  for (const auto& c : ineqs) parts.push_back(FoFormula::comparison(c));
  FoFormula body = parts.empty() ? FoFormula::conj({}) : FoFormula::conj(std::move(parts));
  return FoQuery{head, head_vars, FoFormula::exists(bound_vars, std::move(body))};
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

enum class Tok { Ident, One, LParen, RParen, Comma, Semi, Dot, Arrow, Le, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t pos;
};

std::vector<Token> lex(const std::string& s) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto ident_start = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
  auto ident_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\''; };
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '#') {
      while (i < s.size() && s[i] != '\n') ++i;
    } else if (ident_start(c)) {
      std::size_t j = i;
      while (j < s.size() && ident_char(s[j])) ++j;
      out.push_back({Tok::Ident, s.substr(i, j - i), i});
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      if (s.substr(i, j - i) != "1") throw ParseError(i, "numeric constants other than 1 are not allowed");
      out.push_back({Tok::One, "1", i});
      i = j;
    } else if (c == '(') {
      out.push_back({Tok::LParen, "(", i++});
    } else if (c == ')') {
      out.push_back({Tok::RParen, ")", i++});
    } else if (c == ',') {
      out.push_back({Tok::Comma, ",", i++});
    } else if (c == ';') {
      out.push_back({Tok::Semi, ";", i++});
    } else if (c == '.') {
      out.push_back({Tok::Dot, ".", i++});
    } else if (c == ':' && i + 1 < s.size() && s[i + 1] == '-') {
      out.push_back({Tok::Arrow, ":-", i});
      i += 2;
    } else if (c == '<' && i + 1 < s.size() && s[i + 1] == '=') {
      out.push_back({Tok::Le, "<=", i});
      i += 2;
    } else {
      throw ParseError(i, std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({Tok::End, "", s.size()});
  return out;
}

/** Raw body tree before variables are quantified. */
struct RawNode {
  FoFormula::Kind kind;
  RelAtom rel;
  IneqAtom ineq;
  std::vector<RawNode> children;
};

class Parser {
 public:
  explicit Parser(const std::string& text) : toks_(lex(text)) {}

  void parse(std::string& head, std::vector<std::string>& head_vars, RawNode& body) {
    const Token& h = expect(Tok::Ident, "head relation name");
    head = h.text;
    head_vars = var_list();
    expect(Tok::Arrow, "':-'");
    body = disj();
    expect(Tok::Dot, "'.' at end of query");
    if (peek().kind != Tok::End) throw ParseError(peek().pos, "unexpected text after '.'");
  }

 private:
  const Token& peek() const { return toks_[i_]; }
  const Token& expect(Tok k, const char* what) {
    if (toks_[i_].kind != k) throw ParseError(toks_[i_].pos, std::string("expected ") + what);
    return toks_[i_++];
  }

  std::vector<std::string> var_list() {
    expect(Tok::LParen, "'('");
    std::vector<std::string> vars;
    if (peek().kind == Tok::RParen) {
      ++i_;
      return vars;
    }
    for (;;) {
      vars.push_back(expect(Tok::Ident, "variable name").text);
      if (peek().kind == Tok::Comma) {
        ++i_;
        continue;
      }
      expect(Tok::RParen, "',' or ')'");
      return vars;
    }
  }

  RawNode disj() {
    RawNode first = conj();
    if (peek().kind != Tok::Semi) return first;
    RawNode n{FoFormula::Kind::Or, {}, {}, {}};
    n.children.push_back(std::move(first));
    while (peek().kind == Tok::Semi) {
      ++i_;
      n.children.push_back(conj());
    }
    return n;
  }

  RawNode conj() {
    RawNode first = item();
    if (peek().kind != Tok::Comma) return first;
    RawNode n{FoFormula::Kind::And, {}, {}, {}};
    n.children.push_back(std::move(first));
    while (peek().kind == Tok::Comma) {
      ++i_;
      n.children.push_back(item());
    }
    return n;
  }

  RawNode item() {
    if (peek().kind == Tok::LParen) {
      ++i_;
      RawNode n = disj();
      expect(Tok::RParen, "')'");
      return n;
    }
    const Token& name = expect(Tok::Ident, "atom or comparison");
    if (peek().kind == Tok::LParen) {
      RawNode n{FoFormula::Kind::Rel, {}, {}, {}};
      n.rel.relation = name.text;
      n.rel.vars = var_list();
      return n;
    }
    if (peek().kind == Tok::Le) {
      ++i_;
      RawNode n{FoFormula::Kind::Ineq, {}, {}, {}};
      n.ineq.var = name.text;
      if (peek().kind == Tok::One || peek().kind == Tok::Ident) {
        n.ineq.constant = toks_[i_++].text;
      } else {
        throw ParseError(peek().pos, "expected constant symbol after '<='");
      }
      return n;
    }
    throw ParseError(peek().pos, "expected '(' or '<=' after '" + name.text + "'");
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

void raw_vars(const RawNode& n, std::set<std::string>& out) {
  switch (n.kind) {
    case FoFormula::Kind::Rel: out.insert(n.rel.vars.begin(), n.rel.vars.end()); break;
    case FoFormula::Kind::Ineq: out.insert(n.ineq.var); break;
    default:
      for (const auto& c : n.children) raw_vars(c, out);
  }
}

void first_occurrence(const RawNode& n, std::vector<std::string>& out) {
  switch (n.kind) {
    case FoFormula::Kind::Rel:
      for (const auto& v : n.rel.vars) push_unique(out, v);
      break;
    case FoFormula::Kind::Ineq: push_unique(out, n.ineq.var); break;
    default:
      for (const auto& c : n.children) first_occurrence(c, out);
  }
}

/** Quantifies each variable in `pending` at the smallest subformula holding all its occurrences. */
FoFormula quantify(const RawNode& n, const std::vector<std::string>& pending) {
  if (n.kind == FoFormula::Kind::Rel) return FoFormula::exists(pending, FoFormula::atom(n.rel));
  if (n.kind == FoFormula::Kind::Ineq) return FoFormula::exists(pending, FoFormula::comparison(n.ineq));
  std::vector<std::set<std::string>> child_vars(n.children.size());
  for (std::size_t i = 0; i < n.children.size(); ++i) raw_vars(n.children[i], child_vars[i]);
  std::vector<std::string> here;
  std::vector<std::vector<std::string>> delegated(n.children.size());
  for (const auto& v : pending) {
    std::size_t count = 0, last = 0;
    for (std::size_t i = 0; i < n.children.size(); ++i)
      if (child_vars[i].count(v)) {
        ++count;
        last = i;
      }
    if (count == 1)
      delegated[last].push_back(v);
    else
      here.push_back(v);
  }
  std::vector<FoFormula> parts;
  for (std::size_t i = 0; i < n.children.size(); ++i) parts.push_back(quantify(n.children[i], delegated[i]));
  if (n.kind == FoFormula::Kind::Or) {
    auto fv0 = parts[0].free_vars();
    std::set<std::string> s0(fv0.begin(), fv0.end());
    for (std::size_t i = 1; i < parts.size(); ++i) {
      auto fv = parts[i].free_vars();
      if (std::set<std::string>(fv.begin(), fv.end()) != s0)
        throw Error("unsafe disjunction: operands have different free variables");
    }
  }
  FoFormula body = n.kind == FoFormula::Kind::Or ? FoFormula::disj(std::move(parts)) : FoFormula::conj(std::move(parts));
  return FoFormula::exists(here, std::move(body));
}

void flatten(const RawNode& n, ConjunctiveQuery& q) {
  switch (n.kind) {
    case FoFormula::Kind::Rel: q.atoms.push_back(n.rel); break;
    case FoFormula::Kind::Ineq: q.ineqs.push_back(n.ineq); break;
    default:
      for (const auto& c : n.children) flatten(c, q);
  }
}

bool raw_has_or(const RawNode& n) {
  if (n.kind == FoFormula::Kind::Or) return true;
  return std::any_of(n.children.begin(), n.children.end(), raw_has_or);
}

void check_head(const std::vector<std::string>& head_vars, const std::set<std::string>& body_vars) {
  for (const auto& v : head_vars)
    if (!body_vars.count(v)) throw Error("head variable '" + v + "' is not free in the body");
}

}  // namespace

FoQuery parse_formula(const std::string& text) {
  Parser p(text);
  FoQuery q;
  RawNode body;
  p.parse(q.head, q.head_vars, body);
  std::set<std::string> vars;
  raw_vars(body, vars);
  check_head(q.head_vars, vars);
  std::vector<std::string> order, pending;
  first_occurrence(body, order);
  for (const auto& v : order)
    if (std::find(q.head_vars.begin(), q.head_vars.end(), v) == q.head_vars.end()) pending.push_back(v);
  q.body = quantify(body, pending);
  auto fv = q.body.free_vars();
  for (const auto& v : fv)
    if (std::find(q.head_vars.begin(), q.head_vars.end(), v) == q.head_vars.end())
      throw InternalError("unquantified variable '" + v + "'");
  return q;
}

ConjunctiveQuery parse_query(const std::string& text) {
  Parser p(text);
  ConjunctiveQuery q;
  RawNode body;
  p.parse(q.head, q.head_vars, body);
  if (raw_has_or(body))
    throw NotConjunctiveError("query uses disjunction and is not a conjunctive query");
  std::set<std::string> vars;
  raw_vars(body, vars);
  check_head(q.head_vars, vars);
  flatten(body, q);
  q.normalize_bound();
  q.validate();
  return q;
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string join(const std::vector<std::string>& xs, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += xs[i];
  }
  return out;
}

std::string atom_str(const RelAtom& a) { return a.relation + "(" + join(a.vars, ",") + ")"; }
std::string ineq_str(const IneqAtom& c) { return c.var + " <= " + c.constant; }

}  // namespace

std::string to_string(const ConjunctiveQuery& q) {
  std::vector<std::string> parts;
  for (const auto& a : q.atoms) parts.push_back(atom_str(a));
  for (const auto& c : q.ineqs) parts.push_back(ineq_str(c));
  return q.head + "(" + join(q.head_vars, ",") + ") :- " + join(parts, ", ") + ".";
}

std::string to_string(const FoFormula& f) {
  switch (f.kind) {
    case FoFormula::Kind::Rel: return atom_str(f.rel);
    case FoFormula::Kind::Ineq: return ineq_str(f.ineq);
    case FoFormula::Kind::And: {
      std::vector<std::string> parts;
      for (const auto& c : f.children)
        parts.push_back(c.kind == FoFormula::Kind::Or ? "(" + to_string(c) + ")" : to_string(c));
      return join(parts, ", ");
    }
    case FoFormula::Kind::Or: {
      std::vector<std::string> parts;
      for (const auto& c : f.children) parts.push_back(to_string(c));
      return join(parts, " ; ");
    }
    case FoFormula::Kind::Exists:
      return "exists " + join(f.vars, ",") + ". (" + to_string(f.children[0]) + ")";
  }
  return {};
}

std::string to_string(const FoQuery& q) {
  return q.head + "(" + join(q.head_vars, ",") + ") <- " + to_string(q.body);
}

// ---------------------------------------------------------------------------
// Split and syntactic classifiers

QuerySplit split(const ConjunctiveQuery& q) {
  QuerySplit s;
  std::set<std::string> rel_vars;
  for (const auto& a : q.atoms) rel_vars.insert(a.vars.begin(), a.vars.end());

  s.rel_part.head = q.head + "_rel";
  s.rel_part.atoms = q.atoms;
  for (const auto& v : q.free_vars())
    if (rel_vars.count(v)) s.rel_part.head_vars.push_back(v);
  s.rel_part.normalize_bound();

  s.covered.assign(q.atoms.size(), {});
  s.ineq_part.head = q.head + "_ineq";
  for (std::size_t i = 0; i < q.ineqs.size(); ++i) {
    const auto& c = q.ineqs[i];
    if (rel_vars.count(c.var)) {
      for (std::size_t a = 0; a < q.atoms.size(); ++a) {
        const auto& av = q.atoms[a].vars;
        if (std::find(av.begin(), av.end(), c.var) != av.end()) s.covered[a].push_back(i);
      }
    } else {
      s.uncovered.push_back(i);
      s.ineq_part.ineqs.push_back(c);
    }
  }
  for (const auto& v : q.free_vars())
    if (!rel_vars.count(v)) s.ineq_part.head_vars.push_back(v);
  if (s.ineq_part.ineqs.empty()) s.ineq_part.ineqs.push_back(IneqAtom{"_t", "1"});
  s.ineq_part.normalize_bound();
  return s;
}

ConstantDisjointness is_constant_disjoint(const ConjunctiveQuery& q) {
  std::set<std::string> rel_vars;
  for (const auto& a : q.atoms) rel_vars.insert(a.vars.begin(), a.vars.end());
  ConstantDisjointness r;
  for (std::size_t i = 0; i < q.ineqs.size(); ++i) {
    if (rel_vars.count(q.ineqs[i].var) && q.ineqs[i].constant == "1") {
      r.ok = false;
      r.reason = "covered inequality " + ineq_str(q.ineqs[i]) + " uses constant 1";
      r.witness = {i};
      return r;
    }
  }
  for (std::size_t i = 0; i < q.ineqs.size(); ++i) {
    if (!rel_vars.count(q.ineqs[i].var)) continue;
    for (std::size_t j = 0; j < q.ineqs.size(); ++j) {
      const auto& u = q.ineqs[j];
      if (rel_vars.count(u.var) || u.constant != q.ineqs[i].constant) continue;
      if (q.is_free(u.var)) {
        r.ok = false;
        r.reason = "constant " + u.constant + " is shared by covered " + ineq_str(q.ineqs[i]) +
                   " and uncovered " + ineq_str(u) + " with free variable " + u.var;
        r.witness = {i, j};
        return r;
      }
    }
  }
  return r;
}

bool has_self_join(const ConjunctiveQuery& q) {
  std::set<std::string> seen;
  for (const auto& a : q.atoms)
    if (!seen.insert(a.relation).second) return true;
  return false;
}

}  // namespace deltaenum
