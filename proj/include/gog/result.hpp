#pragma once

#include <stdexcept>
#include <type_traits>
#include <utility>
#include <variant>

namespace gog {

template <class E>
struct Unexpected {
  E error;
};

template <class E>
Unexpected<std::decay_t<E>> unexpected(E&& error) {
  return {std::forward<E>(error)};
}

/// Value-or-error for failures that are part of normal control flow
/// (parse errors, tool failures, rejected transitions).
template <class T, class E>
class Result {
 public:
  using value_type = T;
  using error_type = E;

  Result(T value) : storage_(std::in_place_index<0>, std::move(value)) {}
  Result(Unexpected<E> error) : storage_(std::in_place_index<1>, std::move(error.error)) {}

  bool has_value() const noexcept { return storage_.index() == 0; }
  explicit operator bool() const noexcept { return has_value(); }

  T& value() & {
    check();
    return std::get<0>(storage_);
  }
  const T& value() const& {
    check();
    return std::get<0>(storage_);
  }
  T&& value() && {
    check();
    return std::get<0>(std::move(storage_));
  }

  T& operator*() & { return value(); }
  const T& operator*() const& { return value(); }
  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }

  const E& error() const& {
    if (has_value()) throw std::logic_error("Result holds a value, not an error");
    return std::get<1>(storage_);
  }

 private:
  void check() const {
    if (!has_value()) throw std::logic_error("Result holds an error, not a value");
  }

  std::variant<T, E> storage_;
};

}  // namespace gog
