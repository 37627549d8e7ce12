#include "vpsim/error.hpp"

namespace vpsim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::conflict: return "turn_in_flight";
    case ErrorCode::session_closed: return "session_closed";
    case ErrorCode::session_active: return "session_active";
    case ErrorCode::adapter_timeout: return "adapter_timeout";
    case ErrorCode::adapter_protocol: return "adapter_protocol";
    case ErrorCode::unsupported_media: return "unsupported_media";
  }
  return "unknown";
}

}  // namespace vpsim
