#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vpsim {

enum class ErrorCode {
  invalid_argument,
  parse_error,
  io_error,
  not_found,
  conflict,
  session_closed,
  session_active,
  adapter_timeout,
  adapter_protocol,
  unsupported_media,
};

std::string_view to_string(ErrorCode code);

// Base exception for everything the library reports. The code is what
// transports (HTTP, CLI exit paths) switch on; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vpsim
