#include "deltaenum/oracle.hpp"

#include <algorithm>
#include <map>

#include "deltaenum/errors.hpp"

namespace deltaenum {

Datum default_domain_bound(const Database& db) {
  Datum d = 1;
  for (const auto& [name, rel] : db.relations())
    rel.for_each([&](std::span<const Datum> t, Value) {
      for (Datum v : t) d = std::max(d, v);
    });
  for (const auto& [name, v] : db.vocabulary().constants) d = std::max(d, db.constant(name));
  return d;
}

namespace {

class FoEvaluator {
 public:
  FoEvaluator(const Database& db, Datum domain) : db_(db), s_(db.semiring()), domain_(domain) {}

  int slot(const std::string& v) {
    auto [it, fresh] = slots_.emplace(v, static_cast<int>(nu_.size()));
    if (fresh) nu_.push_back(0);
    return it->second;
  }

  void collect(const FoFormula& f) {
    switch (f.kind) {
      case FoFormula::Kind::Rel:
        for (const auto& v : f.rel.vars) slot(v);
        break;
      case FoFormula::Kind::Ineq: slot(f.ineq.var); break;
      case FoFormula::Kind::Exists:
        for (const auto& v : f.vars) slot(v);
        [[fallthrough]];
      default:
        for (const auto& c : f.children) collect(c);
    }
  }

  Value eval(const FoFormula& f) {
    switch (f.kind) {
      case FoFormula::Kind::Rel: {
        const AnnotatedRelation& rel = db_.relation(f.rel.relation);
        if (rel.arity() != f.rel.vars.size())
          throw SchemaError("atom " + f.rel.relation + " has the wrong number of arguments");
        Tuple t;
        for (const auto& v : f.rel.vars) t.push_back(nu_[slots_.at(v)]);
        return rel.get(t);
      }
      case FoFormula::Kind::Ineq:
        return nu_[slots_.at(f.ineq.var)] <= db_.constant(f.ineq.constant) ? s_.one() : s_.zero();
      case FoFormula::Kind::And: {
        Value acc = s_.one();
        for (const auto& c : f.children) {
          acc = s_.mul(acc, eval(c));
          if (s_.is_zero(acc)) break;
        }
        return acc;
      }
      case FoFormula::Kind::Or: {
        Value acc = s_.zero();
        for (const auto& c : f.children) acc = s_.add(acc, eval(c));
        return acc;
      }
      case FoFormula::Kind::Exists: {
        std::vector<int> ids;
        std::vector<Datum> saved;
        for (const auto& v : f.vars) {
          ids.push_back(slots_.at(v));
          saved.push_back(nu_[ids.back()]);
        }
        Value acc = s_.zero();
        for_all(ids, [&] { acc = s_.add(acc, eval(f.children.at(0))); });
        for (std::size_t i = 0; i < ids.size(); ++i) nu_[ids[i]] = saved[i];
        return acc;
      }
    }
    throw InternalError("unknown formula kind");
  }

  /** Calls f once for every assignment of ids over {1..domain}. */
  template <typename F>
  void for_all(const std::vector<int>& ids, F&& f) {
    for (int id : ids) nu_[id] = 1;
    for (;;) {
      f();
      std::size_t i = ids.size();
      for (;;) {
        if (i == 0) return;
        --i;
        if (nu_[ids[i]] < domain_) {
          ++nu_[ids[i]];
          break;
        }
        nu_[ids[i]] = 1;
      }
    }
  }

  Datum value(int id) const { return nu_[id]; }

 private:
  const Database& db_;
  Semiring s_;
  Datum domain_;
  std::map<std::string, int> slots_;
  std::vector<Datum> nu_;
};

std::vector<std::string> distinct(const std::vector<std::string>& vs) {
  std::vector<std::string> out;
  for (const auto& v : vs)
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  return out;
}

}  // namespace

AnnotatedRelation oracle_eval_fo(const FoFormula& phi, const Database& db, Datum domain,
                                 const std::vector<std::string>& order) {
  FoEvaluator ev(db, domain);
  std::vector<int> ids;
  for (const auto& v : order) ids.push_back(ev.slot(v));
  ev.collect(phi);
  AnnotatedRelation out(order.size(), db.semiring());
  Tuple t(order.size());
  ev.for_all(ids, [&] {
    Value v = ev.eval(phi);
    if (db.semiring().is_zero(v)) return;
    for (std::size_t i = 0; i < ids.size(); ++i) t[i] = ev.value(ids[i]);
    out.set(t, v);
  });
  return out;
}

AnnotatedRelation oracle_eval_fo(const FoFormula& phi, const Database& db, std::optional<Datum> domain) {
  return oracle_eval_fo(phi, db, domain.value_or(default_domain_bound(db)), phi.free_vars());
}

AnnotatedRelation oracle_eval_query(const FoQuery& q, const Database& db, std::optional<Datum> domain) {
  std::vector<std::string> order = distinct(q.head_vars);
  AnnotatedRelation vals = oracle_eval_fo(q.body, db, domain.value_or(default_domain_bound(db)), order);
  AnnotatedRelation out(q.head_vars.size(), db.semiring());
  Tuple head(q.head_vars.size());
  vals.for_each([&](std::span<const Datum> t, Value v) {
    for (std::size_t i = 0; i < head.size(); ++i)
      head[i] = t[std::find(order.begin(), order.end(), q.head_vars[i]) - order.begin()];
    out.set(head, v);
  });
  return out;
}

AnnotatedRelation oracle_eval_cq(const ConjunctiveQuery& q, const Database& db, std::optional<Datum> domain) {
  return oracle_eval_query(q.to_fo(), db, domain);
}

// ---------------------------------------------------------------------------

namespace {

class DenseEvaluator {
 public:
  explicit DenseEvaluator(const MatrixInstance& inst) : inst_(inst), s_(inst.semiring) {}

  DenseMatrix eval(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::Symbol: {
        auto v = vectors_.find(e.name);
        if (v != vectors_.end()) {
          DenseMatrix m = zeros(v->second.first, 1);
          m.at(v->second.second, 1) = s_.one();
          return m;
        }
        auto it = inst_.matrices.find(e.name);
        if (it == inst_.matrices.end()) throw TypeError("unknown matrix symbol '" + e.name + "'");
        DenseMatrix m = zeros(it->second.rows, it->second.cols);
        for (const auto& [ij, val] : it->second.entries) m.at(ij.first, ij.second) = val;
        return m;
      }
      case Expr::Kind::Transpose: {
        DenseMatrix a = eval(*e.kids[0]);
        DenseMatrix m = zeros(a.cols, a.rows);
        for (Datum i = 1; i <= a.rows; ++i)
          for (Datum j = 1; j <= a.cols; ++j) m.at(j, i) = a.at(i, j);
        return m;
      }
      case Expr::Kind::Product: {
        DenseMatrix a = eval(*e.kids[0]), b = eval(*e.kids[1]);
        if (a.cols != b.rows) throw TypeError("product dimension mismatch");
        DenseMatrix m = zeros(a.rows, b.cols);
        for (Datum i = 1; i <= a.rows; ++i)
          for (Datum j = 1; j <= b.cols; ++j) {
            Value acc = s_.zero();
            for (Datum k = 1; k <= a.cols; ++k) acc = s_.add(acc, s_.mul(a.at(i, k), b.at(k, j)));
            m.at(i, j) = acc;
          }
        return m;
      }
      case Expr::Kind::Hadamard:
      case Expr::Kind::Add: {
        DenseMatrix a = eval(*e.kids[0]), b = eval(*e.kids[1]);
        if (a.rows != b.rows || a.cols != b.cols) throw TypeError("elementwise dimension mismatch");
        for (std::size_t i = 0; i < a.data.size(); ++i)
          a.data[i] = e.kind == Expr::Kind::Add ? s_.add(a.data[i], b.data[i]) : s_.mul(a.data[i], b.data[i]);
        return a;
      }
      case Expr::Kind::ScalarMul: {
        DenseMatrix a = eval(*e.kids[0]), b = eval(*e.kids[1]);
        if (a.rows != 1 || a.cols != 1) throw TypeError("scalar operand is not 1x1");
        for (auto& x : b.data) x = s_.mul(a.data[0], x);
        return b;
      }
      case Expr::Kind::Ones: {
        DenseMatrix m = zeros(inst_.schema.dim(e.size), 1);
        for (auto& x : m.data) x = s_.one();
        return m;
      }
      case Expr::Kind::Eye: {
        Datum n = inst_.schema.dim(e.size);
        DenseMatrix m = zeros(n, n);
        for (Datum i = 1; i <= n; ++i) m.at(i, i) = s_.one();
        return m;
      }
      case Expr::Kind::Sum: {
        Datum n = inst_.schema.dim(e.size);
        auto saved = vectors_.find(e.name) != vectors_.end() ? std::optional(vectors_[e.name]) : std::nullopt;
        std::optional<DenseMatrix> acc;
        for (Datum k = 1; k <= n; ++k) {
          vectors_[e.name] = {n, k};
          DenseMatrix term = eval(*e.kids[0]);
          if (!acc) {
            acc = std::move(term);
          } else {
            for (std::size_t i = 0; i < term.data.size(); ++i) acc->data[i] = s_.add(acc->data[i], term.data[i]);
          }
        }
        if (saved)
          vectors_[e.name] = *saved;
        else
          vectors_.erase(e.name);
        if (!acc) throw TypeError("sum over an empty size");
        return *acc;
      }
    }
    throw InternalError("unknown expression kind");
  }

 private:
  DenseMatrix zeros(Datum r, Datum c) const {
    DenseMatrix m;
    m.rows = r;
    m.cols = c;
    m.data.assign(static_cast<std::size_t>(r * c), s_.zero());
    return m;
  }

  const MatrixInstance& inst_;
  Semiring s_;
  std::map<std::string, std::pair<Datum, Datum>> vectors_;  // name -> (size, index)
};

}  // namespace

DenseMatrix oracle_eval_matlang(const Expr& e, const MatrixInstance& inst) { return DenseEvaluator(inst).eval(e); }

SparseMatrix to_sparse(const DenseMatrix& m, const Semiring& s) {
  SparseMatrix out;
  out.rows = m.rows;
  out.cols = m.cols;
  for (Datum i = 1; i <= m.rows; ++i)
    for (Datum j = 1; j <= m.cols; ++j)
      if (!s.is_zero(m.at(i, j))) out.entries[{i, j}] = m.at(i, j);
  return out;
}

}  // namespace deltaenum
