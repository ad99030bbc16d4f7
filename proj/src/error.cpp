#include "accelfwd/error.hpp"

namespace accelfwd {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::connect_failed: return "connect_failed";
    case ErrorCode::version_mismatch: return "version_mismatch";
    case ErrorCode::protocol_violation: return "protocol_violation";
    case ErrorCode::disconnected: return "disconnected";
    case ErrorCode::timeout: return "timeout";
    case ErrorCode::session_busy: return "session_busy";
    case ErrorCode::remote_error: return "remote_error";
    case ErrorCode::unknown_model: return "unknown_model";
    case ErrorCode::invalid_model: return "invalid_model";
    case ErrorCode::degenerate_output: return "degenerate_output";
    case ErrorCode::payload_too_large: return "payload_too_large";
    case ErrorCode::run_closed: return "run_closed";
    case ErrorCode::non_positive_time: return "non_positive_time";
    case ErrorCode::bind_failed: return "bind_failed";
    case ErrorCode::server_busy: return "server_busy";
    case ErrorCode::model_too_large: return "model_too_large";
    case ErrorCode::bad_config: return "bad_config";
    case ErrorCode::io_failure: return "io_failure";
    case ErrorCode::invariant_violation: return "invariant_violation";
  }
  return "?";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace accelfwd
