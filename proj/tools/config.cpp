#include "config.hpp"

#include <algorithm>
#include <cmath>

namespace rqdet::cli {

namespace {

std::string joined(const std::vector<std::string>& items) {
  std::string out = "invalid config:";
  for (const auto& s : items) out += "\n  " + s;
  return out;
}

const char* type_name(const json& j) { return j.type_name(); }

}  // namespace

ConfigError::ConfigError(std::vector<std::string> items) : ValidationError(joined(items)), items_(std::move(items)) {}

bool Node::has(const std::string& key) const {
  return value_ && value_->is_object() && value_->contains(key);
}

Node Node::optional_child(const std::string& key) const {
  const std::string path = path_ + "." + key;
  if (!value_) return {nullptr, path, *issues_};
  if (!value_->is_object()) return {nullptr, path, *issues_};
  const auto it = value_->find(key);
  return {it == value_->end() ? nullptr : &*it, path, *issues_};
}

Node Node::child(const std::string& key) const {
  if (value_ && !value_->is_object()) {
    fail(std::string("expected an object, got ") + type_name(*value_));
    return {nullptr, path_ + "." + key, *issues_};
  }
  Node n = optional_child(key);
  if (value_ && !n) n.fail("required");
  return n;
}

std::vector<Node> Node::elements() const {
  std::vector<Node> out;
  if (!value_) return out;
  if (!value_->is_array()) {
    fail(std::string("expected an array, got ") + type_name(*value_));
    return out;
  }
  for (std::size_t i = 0; i < value_->size(); ++i)
    out.emplace_back(&(*value_)[i], path_ + "[" + std::to_string(i) + "]", *issues_);
  return out;
}

double Node::as_number() const {
  if (!value_) return 0.0;
  if (!value_->is_number()) {
    fail(std::string("expected a number, got ") + type_name(*value_));
    return 0.0;
  }
  const double v = value_->get<double>();
  if (!std::isfinite(v)) fail("must be finite");
  return v;
}

std::complex<double> Node::as_complex() const {
  if (!value_) return {};
  if (value_->is_number()) return {as_number(), 0.0};
  if (value_->is_array() && value_->size() == 2) {
    const auto e = elements();
    return {e[0].as_number(), e[1].as_number()};
  }
  fail("expected a number or [re, im]");
  return {};
}

std::vector<double> Node::as_numbers() const {
  if (!value_) return {};
  if (value_->is_number()) return {as_number()};
  std::vector<double> out;
  for (const auto& e : elements()) out.push_back(e.as_number());
  return out;
}

double Node::number(const std::string& key) const { return child(key).as_number(); }

double Node::number_or(const std::string& key, double fallback) const {
  const Node n = optional_child(key);
  return n ? n.as_number() : fallback;
}

int Node::integer(const std::string& key) const {
  const Node n = child(key);
  if (!n) return 0;
  if (!n.raw().is_number_integer()) {
    n.fail(std::string("expected an integer, got ") + type_name(n.raw()));
    return 0;
  }
  return n.raw().get<int>();
}

std::string Node::text(const std::string& key) const {
  const Node n = child(key);
  if (!n) return {};
  if (!n.raw().is_string()) {
    n.fail(std::string("expected a string, got ") + type_name(n.raw()));
    return {};
  }
  return n.raw().get<std::string>();
}

std::string Node::text_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? text(key) : fallback;
}

bool Node::flag_or(const std::string& key, bool fallback) const {
  const Node n = optional_child(key);
  if (!n) return fallback;
  if (!n.raw().is_boolean()) {
    n.fail(std::string("expected a boolean, got ") + type_name(n.raw()));
    return fallback;
  }
  return n.raw().get<bool>();
}

void Node::allow_only(std::initializer_list<std::string_view> keys) const {
  if (!value_ || !value_->is_object()) return;
  for (const auto& [key, _] : value_->items())
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) issues_->add(path_ + "." + key, "unknown key");
}

}  // namespace rqdet::cli
