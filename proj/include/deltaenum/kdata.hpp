#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "deltaenum/semiring.hpp"
#include "deltaenum/tuple_table.hpp"

namespace deltaenum {

using Tuple = std::vector<Datum>;

/**
 * K-relation: finite map from tuples to nonzero semiring values.
 * Zero annotations are never stored.
 */
class AnnotatedRelation {
 public:
  AnnotatedRelation(std::size_t arity, Semiring semiring);
  /** Copies contents; prefix indices are rebuilt on demand. */
  AnnotatedRelation(const AnnotatedRelation& other);
  AnnotatedRelation& operator=(const AnnotatedRelation& other);
  AnnotatedRelation(AnnotatedRelation&&) = default;
  AnnotatedRelation& operator=(AnnotatedRelation&&) = default;

  std::size_t arity() const { return table_.width(); }
  std::size_t size() const { return table_.size(); }
  bool empty() const { return table_.empty(); }
  const Semiring& semiring() const { return semiring_; }

  /** Annotation of t, zero when absent. */
  Value get(std::span<const Datum> t) const;
  bool contains(std::span<const Datum> t) const { return table_.find(t) != TupleTable::npos; }
  /** Sets t to v; v == 0 removes the tuple. */
  void set(std::span<const Datum> t, Value v);
  /** t := t + v, removing the tuple if the sum is zero. Returns the new value. */
  Value add(std::span<const Datum> t, Value v);
  void erase(std::span<const Datum> t) { set(t, semiring_.zero()); }
  void clear();

  const TupleTable& table() const { return table_; }
  Value value(std::uint32_t id) const { return values_[id]; }

  template <typename F>
  void for_each(F&& f) const {
    for (std::uint32_t id : table_.live()) f(table_.tuple(id), values_[id]);
  }

  /** Entries in lexicographic tuple order. */
  std::vector<std::pair<Tuple, Value>> sorted_entries() const;

  /**
   * Ids of the stored tuples whose first k components equal prefix.
   * The index for k is built on first use and maintained by later writes.
   */
  const std::vector<std::uint32_t>& prefix_lookup(std::size_t k, std::span<const Datum> prefix) const;
  bool has_prefix_index(std::size_t k) const;

 private:
  struct PrefixIndex {
    TupleTable keys;
    std::vector<std::vector<std::uint32_t>> lists;
    std::vector<std::uint32_t> pos;  // tuple id -> position in its list
  };

  void index_insert(PrefixIndex& ix, std::uint32_t id) const;
  void index_erase(PrefixIndex& ix, std::uint32_t id) const;

  Semiring semiring_;
  TupleTable table_;
  std::vector<Value> values_;
  mutable std::map<std::size_t, std::unique_ptr<PrefixIndex>> prefix_;
};

/** Relation symbols with arities and constant symbols with values. */
struct Vocabulary {
  std::map<std::string, std::size_t> relations;
  std::map<std::string, Datum> constants;  // always contains "1" -> 1
};

class Database {
 public:
  Database(Vocabulary vocab, Semiring semiring);

  const Semiring& semiring() const { return semiring_; }
  const Vocabulary& vocabulary() const { return vocab_; }

  bool has_relation(const std::string& name) const { return relations_.count(name) != 0; }
  /** Throws VocabularyError for unknown symbols. */
  const AnnotatedRelation& relation(const std::string& name) const;
  AnnotatedRelation& relation(const std::string& name);
  Datum constant(const std::string& name) const;
  void set_constant(const std::string& name, Datum value);
  /** Adds a relation symbol (no-op if it exists with the same arity). */
  void declare_relation(const std::string& name, std::size_t arity);

  const std::map<std::string, AnnotatedRelation>& relations() const { return relations_; }

 private:
  Vocabulary vocab_;
  Semiring semiring_;
  std::map<std::string, AnnotatedRelation> relations_;
};

struct SingleTupleUpdate {
  enum class Kind { Insert, Delete };
  Kind kind = Kind::Insert;
  std::string relation;
  Tuple tuple;
  Value value;  // insert only

  static SingleTupleUpdate insert(std::string rel, Tuple t, Value v) {
    return {Kind::Insert, std::move(rel), std::move(t), v};
  }
  static SingleTupleUpdate erase(std::string rel, Tuple t) {
    return {Kind::Delete, std::move(rel), std::move(t), Value()};
  }
};

/** Sum over relations of (arity+1)*|R| plus the number of constant symbols. */
std::uint64_t db_size(const Database& db);

/** Applies u; returns the tuple's annotation before the update. */
Value apply_update(Database& db, const SingleTupleUpdate& u);

/** Throws VocabularyError / SchemaError if u does not fit db's vocabulary. */
void check_update(const Database& db, const SingleTupleUpdate& u);

/** Reads the vocabulary JSON: {"relations": {"R": 2}, "constants": {"c": 3}}. */
Vocabulary load_vocabulary(const std::filesystem::path& file);

/**
 * Loads `<dir>/<R>.csv` for every relation R of the vocabulary (missing files
 * mean empty relations). Rows are `v1,...,vk,annotation`; a header row is
 * optional; zero annotations are dropped.
 */
Database load_database(const Vocabulary& vocab, const std::filesystem::path& dir, const Semiring& s);

/** Parses one relation's CSV text into rel. `file` only labels errors. */
void load_relation_csv(AnnotatedRelation& rel, const std::string& text, const std::string& file);

/** Parses an update script (`+ R 1 2 7`, `- R 1 2`, `#` comments). */
std::vector<SingleTupleUpdate> parse_updates(const std::string& text, const Database& db,
                                             const std::string& file = "<updates>");

/** Writes rel as CSV rows in lexicographic order. */
std::string relation_to_csv(const AnnotatedRelation& rel);

std::string read_file(const std::filesystem::path& p);

}  // namespace deltaenum
