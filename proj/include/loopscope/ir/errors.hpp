#pragma once

#include <stdexcept>
#include <string>

namespace loopscope {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A spec document failed to parse or validate. `where` is a JSON path,
/// optionally followed by `:column` inside an expression string, or
/// `byte N` for JSON syntax errors.
class SpecError : public Error {
 public:
  SpecError(std::string where, const std::string& what)
      : Error(where.empty() ? what : where + ": " + what), where_(std::move(where)) {}

  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

/// An input or answer lies outside its declared domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The machine reached a configuration it cannot step (e.g. an undefined
/// tape transition that validation could not see).
class MachineError : public Error {
 public:
  using Error::Error;
};

}  // namespace loopscope
