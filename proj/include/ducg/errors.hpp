#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ducg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed graph document. `line` is 1-based (0 when unknown); `field` is a
// JSON-pointer-like path such as "links[3].matrix".
class ParseError : public Error {
 public:
  ParseError(std::string message, std::size_t line, std::string field)
      : Error(format(message, line, field)), line_(line), field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  static std::string format(const std::string& message, std::size_t line,
                            const std::string& field) {
    std::string out = "parse error";
    if (line > 0) out += " at line " + std::to_string(line);
    if (!field.empty()) out += " in '" + field + "'";
    return out + ": " + message;
  }

  std::size_t line_;
  std::string field_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : Error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = "graph validation failed";
    for (const auto& issue : issues) out += "\n  - " + issue;
    return out;
  }

  std::vector<std::string> issues_;
};

// The hypothesis cannot explain the evidence inside its sub-graph.
class HypothesisError : public Error {
 public:
  using Error::Error;
};

// An exact backend would exceed its configured state-space or term cap.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// A layered formula was requested on a graph that violates its assumptions.
class NotApplicableError : public Error {
 public:
  using Error::Error;
};

}  // namespace ducg
