#pragma once

#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace rqdet {

/// Invalid input: bad parameters, malformed files, violated preconditions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced a value it cannot stand behind (non-finite
/// integrand, failed convergence, reality check broken).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Warning {
  std::string code;
  std::string message;
};

/// Collects advisory warnings from a computation. warn() and merge() may be
/// called from several scan workers at once; read the list after they finish.
class Diagnostics {
 public:
  Diagnostics() = default;
  Diagnostics(const Diagnostics& other);
  Diagnostics& operator=(const Diagnostics& other);

  void warn(std::string code, std::string message);
  void merge(const Diagnostics& other);

  [[nodiscard]] const std::vector<Warning>& warnings() const { return warnings_; }
  [[nodiscard]] bool empty() const { return warnings_.empty(); }
  [[nodiscard]] bool has(const std::string& code) const;

 private:
  std::vector<Warning> warnings_;
  mutable std::mutex mutex_;
};

}  // namespace rqdet
