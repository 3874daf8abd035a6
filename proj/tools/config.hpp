#pragma once

#include <complex>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rqdet/errors.hpp"

namespace rqdet::cli {

using json = nlohmann::json;

/// Schema violations collected while reading a config, each prefixed with
/// the JSON path of the offending value.
class Issues {
 public:
  void add(const std::string& path, const std::string& message) { items_.push_back(path + ": " + message); }
  [[nodiscard]] bool empty() const { return items_.empty(); }
  [[nodiscard]] const std::vector<std::string>& items() const { return items_; }

 private:
  std::vector<std::string> items_;
};

/// Thrown once parsing is over if any issue was recorded.
class ConfigError : public ValidationError {
 public:
  explicit ConfigError(std::vector<std::string> items);
  [[nodiscard]] const std::vector<std::string>& items() const { return items_; }

 private:
  std::vector<std::string> items_;
};

/// A position in the config tree. Accessors never throw: a missing or
/// mistyped value is recorded in Issues and a neutral value returned, so that
/// one pass reports every violation.
class Node {
 public:
  Node(const json* value, std::string path, Issues& issues) : value_(value), path_(std::move(path)), issues_(&issues) {}

  explicit operator bool() const { return value_ != nullptr; }
  [[nodiscard]] const std::string& path() const { return path_; }
  [[nodiscard]] const json& raw() const { return *value_; }
  [[nodiscard]] Issues& issues() const { return *issues_; }
  void fail(const std::string& message) const { issues_->add(path_, message); }

  [[nodiscard]] bool has(const std::string& key) const;
  [[nodiscard]] Node child(const std::string& key) const;           // required
  [[nodiscard]] Node optional_child(const std::string& key) const;  // null node when absent
  [[nodiscard]] std::vector<Node> elements() const;                 // must be an array

  [[nodiscard]] double number(const std::string& key) const;
  [[nodiscard]] double number_or(const std::string& key, double fallback) const;
  [[nodiscard]] int integer(const std::string& key) const;
  [[nodiscard]] std::string text(const std::string& key) const;
  [[nodiscard]] std::string text_or(const std::string& key, const std::string& fallback) const;
  [[nodiscard]] bool flag_or(const std::string& key, bool fallback) const;

  /// The node itself as a value.
  [[nodiscard]] double as_number() const;
  [[nodiscard]] std::complex<double> as_complex() const;  // number or [re, im]
  [[nodiscard]] std::vector<double> as_numbers() const;   // number or array of numbers

  /// Records every key of this object that is not listed.
  void allow_only(std::initializer_list<std::string_view> keys) const;

 private:
  const json* value_;
  std::string path_;
  Issues* issues_;
};

/// Runs `f`, turning a ValidationError into an issue at `at`.
template <class F>
auto guarded(const Node& at, F&& f) -> std::optional<decltype(f())> {
  try {
    return f();
  } catch (const ValidationError& e) {
    at.fail(e.what());
    return std::nullopt;
  }
}

}  // namespace rqdet::cli
