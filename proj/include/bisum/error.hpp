#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace bisum {

// Precondition violated by caller-supplied data.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed external input (annotation files, score files, reports).
// Carries the 1-based line number when the source is line-delimited.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string source, std::size_t line, std::string field, const std::string& what)
      : std::runtime_error(format(source, line, field, what)),
        source_(std::move(source)),
        line_(line),
        field_(std::move(field)) {}

  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  static std::string format(const std::string& source, std::size_t line, const std::string& field,
                            const std::string& what) {
    std::string msg = source;
    if (line > 0) msg += ":" + std::to_string(line);
    if (!field.empty()) msg += ": field '" + field + "'";
    msg += ": " + what;
    return msg;
  }

  std::string source_;
  std::size_t line_;
  std::string field_;
};

// A file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  enum class Op { read, write };
  IoError(std::string path, Op op, const std::string& what)
      : std::runtime_error((op == Op::read ? "cannot read '" : "cannot write '") + path + "': " + what),
        path_(std::move(path)),
        op_(op) {}

  const std::string& path() const { return path_; }
  Op op() const { return op_; }

 private:
  std::string path_;
  Op op_;
};

// Training produced a non-finite loss.
class TrainingFailure : public std::runtime_error {
 public:
  TrainingFailure(std::size_t epoch, const std::string& what)
      : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": " + what),
        epoch_(epoch) {}

  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace bisum
