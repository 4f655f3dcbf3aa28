#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace empathic {

// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// affect-pipeline
class EmptyWindow : public Error {
 public:
  EmptyWindow() : Error("cannot pool an empty window") {}
};

class InvalidSpan : public Error {
 public:
  using Error::Error;
};

// Bad record in an affect-frame stream; line is 1-based.
class AffectParseError : public Error {
 public:
  AffectParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// dialogue-engine
class InvalidScript : public Error {
 public:
  using Error::Error;
};

class ProtocolViolation : public Error {
 public:
  using Error::Error;
};

// grounding-generator
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class BackendUnavailable : public Error {
 public:
  using Error::Error;
};

// session-service
class ScriptLoadError : public Error {
 public:
  using Error::Error;
};

class UnknownSession : public Error {
 public:
  explicit UnknownSession(const std::string& id) : Error("unknown session '" + id + "'") {}
};

// Bad record in a session log; line is 1-based.
class MalformedLog : public Error {
 public:
  MalformedLog(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace empathic
