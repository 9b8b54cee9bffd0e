#pragma once

#include <stdexcept>
#include <string>

namespace vgflow {

// Base of every error raised by the library. `user_error()` separates bad
// input or configuration (CLI exit 2) from internal failures (exit 1).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, bool user_error = true)
      : std::runtime_error(what), user_error_(user_error) {}
  bool user_error() const noexcept { return user_error_; }

 private:
  bool user_error_;
};

class InvalidParameter : public Error {
 public:
  explicit InvalidParameter(const std::string& what) : Error("invalid parameter: " + what) {}
};

class InvalidGeometry : public Error {
 public:
  explicit InvalidGeometry(const std::string& what) : Error("invalid geometry: " + what) {}
};

class DegenerateGraph : public Error {
 public:
  explicit DegenerateGraph(const std::string& what) : Error("degenerate graph: " + what) {}
};

class SingularSystem : public Error {
 public:
  explicit SingularSystem(const std::string& what) : Error("singular system: " + what) {}
};

class Underdetermined : public Error {
 public:
  explicit Underdetermined(const std::string& what) : Error("under-determined: " + what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(what) {}
};

class TrainingDivergence : public Error {
 public:
  explicit TrainingDivergence(const std::string& what)
      : Error("training diverged: " + what, false) {}
};

}  // namespace vgflow
