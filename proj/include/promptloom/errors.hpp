#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace promptloom {

/// Base of every error the engine raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// chain model
// ---------------------------------------------------------------------------

class CycleDetected : public Error {
 public:
  using Error::Error;
};

class OrphanEntry : public Error {
 public:
  OrphanEntry(std::string entry_id, std::string missing_ancestor)
      : Error("entry '" + entry_id + "' references missing ancestor '" +
              missing_ancestor + "'"),
        entry_id_(std::move(entry_id)),
        missing_(std::move(missing_ancestor)) {}
  const std::string& entry_id() const noexcept { return entry_id_; }
  const std::string& missing_ancestor() const noexcept { return missing_; }

 private:
  std::string entry_id_;
  std::string missing_;
};

// ---------------------------------------------------------------------------
// prompt engine / parser
// ---------------------------------------------------------------------------

class MissingLayerName : public Error {
 public:
  using Error::Error;
};

class EmptyGroup : public Error {
 public:
  using Error::Error;
};

class EmptyOutput : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// executor
// ---------------------------------------------------------------------------

class MissingUpstream : public Error {
 public:
  MissingUpstream(std::string step_id, std::string layer_id)
      : Error("step '" + step_id + "' has no entries in input layer '" +
              layer_id + "'"),
        step_id_(std::move(step_id)),
        layer_id_(std::move(layer_id)) {}
  const std::string& step_id() const noexcept { return step_id_; }
  const std::string& layer_id() const noexcept { return layer_id_; }

 private:
  std::string step_id_;
  std::string layer_id_;
};

class UnknownEntry : public Error {
 public:
  explicit UnknownEntry(const std::string& id)
      : Error("unknown entry '" + id + "'") {}
};

class UnknownStep : public Error {
 public:
  explicit UnknownStep(const std::string& id)
      : Error("unknown step '" + id + "'") {}
};

class FreezeStale : public Error {
 public:
  explicit FreezeStale(const std::string& id)
      : Error("entry '" + id + "' is stale and cannot be frozen") {}
};

// ---------------------------------------------------------------------------
// model backends
// ---------------------------------------------------------------------------

class BackendError : public Error {
 public:
  using Error::Error;
};

class TimeoutError : public BackendError {
 public:
  using BackendError::BackendError;
};

class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

class HttpStatusError : public BackendError {
 public:
  HttpStatusError(int status, const std::string& body)
      : BackendError("HTTP status " + std::to_string(status) +
                     (body.empty() ? "" : ": " + body)),
        status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class NoRuleMatched : public BackendError {
 public:
  using BackendError::BackendError;
};

class MissingApiKey : public Error {
 public:
  explicit MissingApiKey(const std::string& var)
      : Error("environment variable '" + var + "' is not set") {}
};

class BadUrl : public Error {
 public:
  explicit BadUrl(const std::string& url) : Error("bad base URL '" + url + "'") {}
};

// ---------------------------------------------------------------------------
// chain library
// ---------------------------------------------------------------------------

class SpecParseError : public Error {
 public:
  SpecParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error("parse error at line " + std::to_string(line) + ", column " +
              std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class SchemaError : public Error {
 public:
  SchemaError(std::string field, const std::string& what)
      : Error("schema error at " + field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class UnknownBuiltin : public Error {
 public:
  explicit UnknownBuiltin(const std::string& name)
      : Error("unknown builtin chain '" + name + "'") {}
};

class IoError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// interaction log
// ---------------------------------------------------------------------------

class NonMonotonicTimestamps : public Error {
 public:
  explicit NonMonotonicTimestamps(std::size_t index)
      : Error("event " + std::to_string(index) +
              " has a timestamp earlier than its predecessor"),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace promptloom
