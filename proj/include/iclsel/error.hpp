#pragma once

#include <stdexcept>
#include <string>

namespace iclsel {

// All fatal conditions raised by the library. `code` is a short stable token
// (e.g. "duplicate_id") that the CLI prints so failures are machine-parsable.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace iclsel
