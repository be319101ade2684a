#pragma once

#include <stdexcept>
#include <string>

namespace lrisk {

enum class ErrorCode {
  invalid_argument,
  config,       // malformed or unknown configuration
  data,         // unreadable or malformed dataset
  divergence,   // training produced a non-finite loss
  mismatch,     // checkpoint and configuration disagree
  io,           // filesystem failure on an output path
  exists,       // refusing to overwrite a non-empty directory
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Dataset loading failures. `kind` distinguishes the failure; `path` names
/// the offending file and `line` is 1-based (0 when not line-specific).
class DataError : public Error {
 public:
  enum class Kind { missing_file, malformed_row, channel_count, bad_manifest };

  DataError(Kind kind, std::string path, std::size_t line, const std::string& detail)
      : Error(ErrorCode::data, format(kind, path, line, detail)),
        kind_(kind),
        path_(std::move(path)),
        line_(line) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(Kind kind, const std::string& path, std::size_t line,
                            const std::string& detail) {
    std::string s;
    switch (kind) {
      case Kind::missing_file: s = "missing file"; break;
      case Kind::malformed_row: s = "malformed row"; break;
      case Kind::channel_count: s = "channel count mismatch"; break;
      case Kind::bad_manifest: s = "bad manifest"; break;
    }
    s += ": " + path;
    if (line > 0) s += ":" + std::to_string(line);
    if (!detail.empty()) s += ": " + detail;
    return s;
  }

  Kind kind_;
  std::string path_;
  std::size_t line_;
};

[[noreturn]] inline void fail(const std::string& what) {
  throw Error(ErrorCode::invalid_argument, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(what);
}

}  // namespace lrisk
