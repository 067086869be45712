#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace fcauth {

// Why a protocol step refused to proceed. Rejections are ordinary outcomes
// of a run, not exceptional conditions.
enum class Reason {
  kBiometricMismatch,
  kPasswordMismatch,
  kUnknownServer,
  kUnknownIdentity,
  kDuplicateIdentity,
  kInvalidIdentity,
  kStaleTimestamp,
  kHashMismatch,
  kDecryptFailed,
  kResyncRequired,
  kNoPendingSession,
  kNoSession,
  kMalformedMessage,
};

std::string_view reason_name(Reason r);

struct Rejection {
  Reason reason;
  std::string detail;

  std::string to_string() const;
};

// Thrown for contract violations (wrong lengths, bad configuration). Never
// used for protocol-level rejections.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <class T>
class [[nodiscard]] Result {
 public:
  Result(T value) : v_(std::move(value)) {}  // NOLINT(google-explicit-constructor)
  Result(Rejection r) : v_(std::move(r)) {}  // NOLINT(google-explicit-constructor)

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    if (!ok()) throw std::logic_error("Result::value on rejection: " + error().to_string());
    return std::get<T>(v_);
  }
  T& value() & {
    if (!ok()) throw std::logic_error("Result::value on rejection: " + error().to_string());
    return std::get<T>(v_);
  }
  T&& value() && {
    if (!ok()) throw std::logic_error("Result::value on rejection: " + error().to_string());
    return std::get<T>(std::move(v_));
  }

  const Rejection& error() const { return std::get<Rejection>(v_); }
  Reason reason() const { return error().reason; }

  const T* operator->() const { return &value(); }
  T* operator->() { return &value(); }
  const T& operator*() const& { return value(); }
  T& operator*() & { return value(); }

 private:
  std::variant<T, Rejection> v_;
};

inline Rejection reject(Reason r, std::string detail = {}) { return Rejection{r, std::move(detail)}; }

}  // namespace fcauth
