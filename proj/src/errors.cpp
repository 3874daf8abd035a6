#include "rqdet/errors.hpp"

#include <algorithm>

namespace rqdet {

Diagnostics::Diagnostics(const Diagnostics& other) {
  const std::lock_guard lock(other.mutex_);
  warnings_ = other.warnings_;
}

Diagnostics& Diagnostics::operator=(const Diagnostics& other) {
  if (this == &other) return *this;
  std::vector<Warning> copy;
  {
    const std::lock_guard lock(other.mutex_);
    copy = other.warnings_;
  }
  const std::lock_guard lock(mutex_);
  warnings_ = std::move(copy);
  return *this;
}

void Diagnostics::warn(std::string code, std::string message) {
  const std::lock_guard lock(mutex_);
  // The same condition tends to fire at every scan point; keep one copy.
  for (const auto& w : warnings_)
    if (w.code == code && w.message == message) return;
  warnings_.push_back({std::move(code), std::move(message)});
}

void Diagnostics::merge(const Diagnostics& other) {
  if (this == &other) return;
  std::vector<Warning> copy;
  {
    const std::lock_guard lock(other.mutex_);
    copy = other.warnings_;
  }
  for (auto& w : copy) warn(std::move(w.code), std::move(w.message));
}

bool Diagnostics::has(const std::string& code) const {
  const std::lock_guard lock(mutex_);
  return std::any_of(warnings_.begin(), warnings_.end(),
                     [&](const Warning& w) { return w.code == code; });
}

}  // namespace rqdet
