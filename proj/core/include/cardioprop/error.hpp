#pragma once

#include <stdexcept>
#include <string>

namespace cardioprop {

// Every failure surfaced by the library carries a short machine-readable code
// ("shape", "io", "format", ...) next to the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(detail), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace cardioprop
