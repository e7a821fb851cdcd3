#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace deltaenum {

/** Base class for every error raised by the library. */
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/** Unknown semiring name or bad configuration value. */
class ConfigError : public Error {
 public:
  using Error::Error;
};

/** The chosen semiring lacks a capability an operation needs. */
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/** A caller broke an operation's precondition. */
class ContractError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

/** Bad input file contents; carries file name and 1-based line. */
class IngestionError : public Error {
 public:
  IngestionError(std::string file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}
  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

/** Syntax error with 0-based character offset into the source text. */
class ParseError : public Error {
 public:
  ParseError(std::size_t pos, const std::string& what)
      : Error("at offset " + std::to_string(pos) + ": " + what), pos_(pos) {}
  std::size_t position() const { return pos_; }

 private:
  std::size_t pos_;
};

/** Input is valid FO+ but not a conjunctive query (it uses disjunction). */
class NotConjunctiveError : public Error {
 public:
  using Error::Error;
};

/** The query is outside the class an algorithm supports. */
class ClassificationError : public Error {
 public:
  using Error::Error;
};

class TypeError : public Error {
 public:
  using Error::Error;
};

/** Expression is outside the MATLANG fragment an operation accepts. */
class FragmentError : public Error {
 public:
  using Error::Error;
};

/** Relation contents disagree with declared matrix dimensions. */
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace deltaenum
