#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "deltaenum/kdata.hpp"
#include "deltaenum/query.hpp"
#include "deltaenum/semiring.hpp"

namespace deltaenum {

/** Matrix type (rows, cols) over size symbols; "1" is the unit size. */
struct MatType {
  std::string rows;
  std::string cols;
  friend bool operator==(const MatType&, const MatType&) = default;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/**
 * sum-MATLANG expression. Concrete syntax:
 *   A              matrix symbol or vector variable
 *   e'             transpose
 *   e1 * e2        matrix product
 *   e1 .* e2       Hadamard product
 *   e1 + e2        addition
 *   smul(e1, e2)   scalar product (e1 is 1x1)
 *   ones(a) eye(a) ones vector / identity of size a
 *   sum v:a. e     sum over canonical vectors v of size a
 * A program may name its result: `H := e`.
 */
struct Expr {
  enum class Kind { Symbol, Transpose, Product, Hadamard, Add, ScalarMul, Ones, Eye, Sum };
  Kind kind = Kind::Symbol;
  std::string name;  // Symbol: matrix or vector variable; Sum: bound vector variable
  std::string size;  // Ones, Eye, Sum
  std::vector<ExprPtr> kids;

  static ExprPtr symbol(std::string name);
  static ExprPtr transpose(ExprPtr e);
  static ExprPtr product(ExprPtr a, ExprPtr b);
  static ExprPtr hadamard(ExprPtr a, ExprPtr b);
  static ExprPtr add(ExprPtr a, ExprPtr b);
  static ExprPtr scalar_mul(ExprPtr a, ExprPtr b);
  static ExprPtr ones(std::string size);
  static ExprPtr eye(std::string size);
  static ExprPtr sum(std::string var, std::string size, ExprPtr body);
};

struct MatlangProgram {
  std::string output = "H";
  ExprPtr expr;
};

MatlangProgram parse_matlang(const std::string& text);
std::string to_string(const Expr& e);
std::string to_string(const MatlangProgram& p);

enum class Encoding { Binary, Unary, Nullary };
std::string encoding_name(Encoding e);

struct MatrixDecl {
  MatType type;
  Encoding encoding = Encoding::Binary;
};

/** Size symbols with their values, matrix symbols with types and relational shapes. */
struct MatrixSchema {
  std::map<std::string, Datum> sizes;  // always contains "1" -> 1
  std::map<std::string, MatrixDecl> matrices;
  Encoding output_encoding = Encoding::Binary;

  Datum dim(const std::string& size) const;
};

/** Reads `{"sizes": {...}, "matrices": {"A": {"type": [r, c], "encoding": "binary"}}, "output": {...}}`. */
MatrixSchema load_matrix_schema(const std::filesystem::path& file);
MatrixSchema parse_matrix_schema(const nlohmann::json& j);
nlohmann::json schema_to_json(const MatrixSchema& s);

/**
 * Type of e, throwing TypeError with the path of the first offending node.
 * Free vector variables are allowed only when listed in `vectors`.
 */
MatType typecheck(const Expr& e, const MatrixSchema& schema, const std::map<std::string, std::string>& vectors = {});

struct FragmentFlags {
  bool matlang = false;
  bool conj_matlang = false;
  bool fc_matlang = false;
  bool simple_matlang = false;
  bool qh_matlang = false;
};

/** Syntactic fragment membership of a well-typed expression. */
FragmentFlags classify_fragment(const Expr& e, const MatrixSchema& schema);
bool uses_addition(const Expr& e);

/** Sparse K-matrix: only nonzero entries are stored, keyed (row, col). */
struct SparseMatrix {
  Datum rows = 0;
  Datum cols = 0;
  std::map<std::pair<Datum, Datum>, Value> entries;
  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;
};

struct MatrixInstance {
  MatrixSchema schema;
  Semiring semiring;
  std::map<std::string, SparseMatrix> matrices;
};

/** Empty matrices of the declared dimensions. */
MatrixInstance empty_instance(const MatrixSchema& schema, const Semiring& s);

/** Loads `<dir>/<A>.coo` for each matrix symbol (`i j value` per line; missing file = zero matrix). */
MatrixInstance load_matrix_instance(const MatrixSchema& schema, const std::filesystem::path& dir, const Semiring& s);
void parse_coo(SparseMatrix& m, const Semiring& s, const std::string& text, const std::string& file);
std::string matrix_to_coo(const SparseMatrix& m, const Semiring& s);

/** Relation name, vocabulary and constants for the schema encoding. */
Vocabulary encode_vocabulary(const MatrixSchema& schema);
Database encode_instance(const MatrixInstance& inst);
/** Inverse encoding; throws ConsistencyError on tuples outside the declared dimensions. */
MatrixInstance decode_instance(const Database& db, const MatrixSchema& schema);
/** Decodes one relation holding a matrix of the given type and shape. */
SparseMatrix decode_matrix(const AnnotatedRelation& rel, const MatType& type, Encoding enc, const MatrixSchema& schema,
                           const std::string& name = "H");

/** conj-MATLANG to CQ with equality elimination. Throws FragmentError if e uses addition. */
ConjunctiveQuery translate_to_cq(const MatlangProgram& p, const MatrixSchema& schema);

struct MatlangResult {
  SparseMatrix matrix;
  MatType type;
  std::optional<ConjunctiveQuery> cq;  // absent when evaluated directly
  bool free_connex = false;
  bool q_hierarchical = false;
  std::vector<std::string> warnings;
};

/** Evaluates through the relational engine when possible, otherwise directly. */
MatlangResult eval_matlang(const MatlangProgram& p, const MatrixInstance& inst);

/** Change of one matrix entry: add `delta`, or clear the entry when delta is absent. */
struct MatrixUpdate {
  std::string matrix;
  Datum row = 0;
  Datum col = 0;
  std::optional<Value> delta;
};

std::vector<SingleTupleUpdate> matrix_update_to_relational(const MatrixUpdate& u, const MatrixSchema& schema);

}  // namespace deltaenum
