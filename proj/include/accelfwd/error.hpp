#pragma once

#include <stdexcept>
#include <string>

namespace accelfwd {

enum class ErrorCode {
  connect_failed,
  version_mismatch,
  protocol_violation,
  disconnected,
  timeout,
  session_busy,
  remote_error,
  unknown_model,
  invalid_model,
  degenerate_output,
  payload_too_large,
  run_closed,
  non_positive_time,
  bind_failed,
  server_busy,
  model_too_large,
  bad_config,
  io_failure,
  invariant_violation,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& message);

}  // namespace accelfwd
