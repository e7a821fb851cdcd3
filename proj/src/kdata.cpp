#include "deltaenum/kdata.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "deltaenum/errors.hpp"

namespace deltaenum {

AnnotatedRelation::AnnotatedRelation(std::size_t arity, Semiring semiring)
    : semiring_(semiring), table_(arity) {}

AnnotatedRelation::AnnotatedRelation(const AnnotatedRelation& other)
    : semiring_(other.semiring_), table_(other.table_), values_(other.values_) {}

AnnotatedRelation& AnnotatedRelation::operator=(const AnnotatedRelation& other) {
  if (this != &other) {
    semiring_ = other.semiring_;
    table_ = other.table_;
    values_ = other.values_;
    prefix_.clear();
  }
  return *this;
}

Value AnnotatedRelation::get(std::span<const Datum> t) const {
  std::uint32_t id = table_.find(t);
  return id == TupleTable::npos ? semiring_.zero() : values_[id];
}

void AnnotatedRelation::set(std::span<const Datum> t, Value v) {
  if (semiring_.is_zero(v)) {
    std::uint32_t id = table_.find(t);
    if (id == TupleTable::npos) return;
    for (auto& [k, ix] : prefix_) index_erase(*ix, id);
    table_.erase(id);
    return;
  }
  auto [id, inserted] = table_.insert(t);
  if (values_.size() < table_.id_bound()) values_.resize(table_.id_bound());
  values_[id] = v;
  if (inserted)
    for (auto& [k, ix] : prefix_) index_insert(*ix, id);
}

Value AnnotatedRelation::add(std::span<const Datum> t, Value v) {
  Value next = semiring_.add(get(t), v);
  set(t, next);
  return semiring_.is_zero(next) ? semiring_.zero() : next;
}

void AnnotatedRelation::clear() {
  table_.clear();
  values_.clear();
  prefix_.clear();
}

std::vector<std::pair<Tuple, Value>> AnnotatedRelation::sorted_entries() const {
  std::vector<std::pair<Tuple, Value>> out;
  out.reserve(size());
  for_each([&](std::span<const Datum> t, Value v) { out.emplace_back(Tuple(t.begin(), t.end()), v); });
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

void AnnotatedRelation::index_insert(PrefixIndex& ix, std::uint32_t id) const {
  auto [key, fresh] = ix.keys.insert(table_.tuple(id).data());
  if (ix.lists.size() < ix.keys.id_bound()) ix.lists.resize(ix.keys.id_bound());
  if (ix.pos.size() < table_.id_bound()) ix.pos.resize(table_.id_bound());
  ix.pos[id] = static_cast<std::uint32_t>(ix.lists[key].size());
  ix.lists[key].push_back(id);
}

void AnnotatedRelation::index_erase(PrefixIndex& ix, std::uint32_t id) const {
  std::uint32_t key = ix.keys.find(table_.tuple(id).data());
  auto& list = ix.lists[key];
  std::uint32_t p = ix.pos[id];
  list[p] = list.back();
  ix.pos[list[p]] = p;
  list.pop_back();
  if (list.empty()) ix.keys.erase(key);
}

bool AnnotatedRelation::has_prefix_index(std::size_t k) const { return prefix_.count(k) != 0; }

const std::vector<std::uint32_t>& AnnotatedRelation::prefix_lookup(std::size_t k,
                                                                   std::span<const Datum> prefix) const {
  static const std::vector<std::uint32_t> kNone;
  auto it = prefix_.find(k);
  if (it == prefix_.end()) {
    auto ix = std::make_unique<PrefixIndex>();
    ix->keys = TupleTable(k);
    for (std::uint32_t id : table_.live()) index_insert(*ix, id);
    it = prefix_.emplace(k, std::move(ix)).first;
  }
  std::uint32_t key = it->second->keys.find(prefix.data());
  return key == TupleTable::npos ? kNone : it->second->lists[key];
}

Database::Database(Vocabulary vocab, Semiring semiring) : vocab_(std::move(vocab)), semiring_(semiring) {
  vocab_.constants["1"] = 1;
  for (const auto& [name, arity] : vocab_.relations) relations_.emplace(name, AnnotatedRelation(arity, semiring_));
}

const AnnotatedRelation& Database::relation(const std::string& name) const {
  auto it = relations_.find(name);
  if (it == relations_.end()) throw VocabularyError("unknown relation symbol '" + name + "'");
  return it->second;
}

AnnotatedRelation& Database::relation(const std::string& name) {
  auto it = relations_.find(name);
  if (it == relations_.end()) throw VocabularyError("unknown relation symbol '" + name + "'");
  return it->second;
}

Datum Database::constant(const std::string& name) const {
  auto it = vocab_.constants.find(name);
  if (it == vocab_.constants.end()) throw VocabularyError("unknown constant symbol '" + name + "'");
  return it->second;
}

void Database::set_constant(const std::string& name, Datum value) {
  if (value < 1) throw SchemaError("constant '" + name + "' must be a positive integer");
  if (name == "1" && value != 1) throw SchemaError("constant 1 always denotes 1");
  vocab_.constants[name] = value;
}

void Database::declare_relation(const std::string& name, std::size_t arity) {
  auto it = vocab_.relations.find(name);
  if (it != vocab_.relations.end()) {
    if (it->second != arity)
      throw SchemaError("relation '" + name + "' already declared with arity " + std::to_string(it->second));
    return;
  }
  vocab_.relations[name] = arity;
  relations_.emplace(name, AnnotatedRelation(arity, semiring_));
}

std::uint64_t db_size(const Database& db) {
  std::uint64_t n = db.vocabulary().constants.size();
  for (const auto& [name, rel] : db.relations()) n += (rel.arity() + 1) * rel.size();
  return n;
}

void check_update(const Database& db, const SingleTupleUpdate& u) {
  const AnnotatedRelation& rel = db.relation(u.relation);
  if (u.tuple.size() != rel.arity())
    throw SchemaError("update on '" + u.relation + "' has " + std::to_string(u.tuple.size()) +
                      " components, arity is " + std::to_string(rel.arity()));
  for (Datum d : u.tuple)
    if (d < 1) throw SchemaError("data values must be positive integers");
}

Value apply_update(Database& db, const SingleTupleUpdate& u) {
  check_update(db, u);
  AnnotatedRelation& rel = db.relation(u.relation);
  Value old = rel.get(u.tuple);
  if (u.kind == SingleTupleUpdate::Kind::Insert)
    rel.add(u.tuple, u.value);
  else
    rel.erase(u.tuple);
  return old;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + p.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Vocabulary load_vocabulary(const std::filesystem::path& file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::parse_error& e) {
    throw IngestionError(file.string(), 1, std::string("invalid JSON: ") + e.what());
  }
  Vocabulary v;
  if (j.contains("relations")) {
    for (auto& [name, arity] : j["relations"].items()) {
      if (!arity.is_number_unsigned())
        throw IngestionError(file.string(), 1, "arity of '" + name + "' must be a non-negative integer");
      v.relations[name] = arity.get<std::size_t>();
    }
  }
  if (j.contains("constants")) {
    for (auto& [name, value] : j["constants"].items()) {
      if (!value.is_number_unsigned() || value.get<std::uint64_t>() < 1)
        throw IngestionError(file.string(), 1, "constant '" + name + "' must be a positive integer");
      if (name == "1" && value.get<std::uint64_t>() != 1)
        throw IngestionError(file.string(), 1, "constant 1 always denotes 1");
      v.constants[name] = value.get<Datum>();
    }
  }
  v.constants["1"] = 1;
  return v;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == sep) {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_datum(std::string_view s, Datum& out) {
  if (s.empty() || s[0] == '-' || s[0] == '+') return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

template <typename F>
void for_each_line(const std::string& text, F&& f) {
  std::size_t lineno = 0, start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++lineno;
    f(std::string_view(text).substr(start, end - start), lineno);
    if (end == text.size()) break;
    start = end + 1;
  }
}

}  // namespace

void load_relation_csv(AnnotatedRelation& rel, const std::string& text, const std::string& file) {
  const Semiring& s = rel.semiring();
  Tuple t(rel.arity());
  bool first = true;
  for_each_line(text, [&](std::string_view raw, std::size_t lineno) {
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') return;
    auto fields = split_fields(line, ',');
    bool header = false;
    if (first) {
      first = false;
      Datum d;
      header = !fields.empty() && !fields[0].empty() && !parse_datum(fields[0], d) &&
               !(fields[0][0] >= '0' && fields[0][0] <= '9') && fields[0][0] != '-';
      if (rel.arity() == 0 && fields.size() == 1) {
        // a nullary row is just an annotation; treat it as data if it parses
        try {
          (void)s.parse(fields[0]);
          header = false;
        } catch (const ConfigError&) {
          header = true;
        }
      }
    }
    if (header) return;
    if (fields.size() != rel.arity() + 1)
      throw IngestionError(file, lineno,
                           "expected " + std::to_string(rel.arity()) + " values and an annotation, got " +
                               std::to_string(fields.size()) + " fields");
    for (std::size_t i = 0; i < rel.arity(); ++i) {
      if (!parse_datum(fields[i], t[i]) || t[i] < 1)
        throw IngestionError(file, lineno, "data value '" + std::string(fields[i]) + "' is not a positive integer");
    }
    Value v;
    try {
      v = s.parse(fields.back());
    } catch (const ConfigError& e) {
      throw IngestionError(file, lineno, e.what());
    }
    if (rel.contains(t)) throw IngestionError(file, lineno, "duplicate tuple");
    if (s.is_zero(v)) return;
    rel.set(t, v);
  });
}

Database load_database(const Vocabulary& vocab, const std::filesystem::path& dir, const Semiring& s) {
  Database db(vocab, s);
  for (const auto& [name, arity] : vocab.relations) {
    std::filesystem::path f = dir / (name + ".csv");
    if (!std::filesystem::exists(f)) continue;
    load_relation_csv(db.relation(name), read_file(f), f.string());
  }
  return db;
}

std::vector<SingleTupleUpdate> parse_updates(const std::string& text, const Database& db, const std::string& file) {
  std::vector<SingleTupleUpdate> out;
  const Semiring& s = db.semiring();
  for_each_line(text, [&](std::string_view raw, std::size_t lineno) {
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') return;
    auto tok = split_ws(line);
    if (tok.size() < 2 || (tok[0] != "+" && tok[0] != "-"))
      throw IngestionError(file, lineno, "expected '+ R v1 .. vk value' or '- R v1 .. vk'");
    std::string rel(tok[1]);
    if (!db.has_relation(rel)) throw IngestionError(file, lineno, "unknown relation symbol '" + rel + "'");
    std::size_t arity = db.relation(rel).arity();
    bool insert = tok[0] == "+";
    std::size_t expect = 2 + arity + (insert ? 1 : 0);
    if (tok.size() != expect)
      throw IngestionError(file, lineno,
                           "relation '" + rel + "' has arity " + std::to_string(arity) + ", got " +
                               std::to_string(tok.size() - 2 - (insert ? 1 : 0)) + " values");
    Tuple t(arity);
    for (std::size_t i = 0; i < arity; ++i)
      if (!parse_datum(tok[2 + i], t[i]) || t[i] < 1)
        throw IngestionError(file, lineno, "data value '" + std::string(tok[2 + i]) + "' is not a positive integer");
    if (insert) {
      Value v;
      try {
        v = s.parse(tok.back());
      } catch (const ConfigError& e) {
        throw IngestionError(file, lineno, e.what());
      }
      out.push_back(SingleTupleUpdate::insert(rel, std::move(t), v));
    } else {
      out.push_back(SingleTupleUpdate::erase(rel, std::move(t)));
    }
  });
  return out;
}

std::string relation_to_csv(const AnnotatedRelation& rel) {
  std::string out;
  for (const auto& [t, v] : rel.sorted_entries()) {
    for (Datum d : t) {
      out += std::to_string(d);
      out += ',';
    }
    out += rel.semiring().format(v);
    out += '\n';
  }
  return out;
}

}  // namespace deltaenum
