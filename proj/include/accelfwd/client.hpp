#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "accelfwd/backend.hpp"
#include "accelfwd/channel.hpp"
#include "accelfwd/wire.hpp"

namespace accelfwd::client {

// Per-cycle wall time split from the caller's point of view. gpu_s is the
// destination-reported compute time clamped to the observed response wait;
// communication_s is send time plus the wait minus gpu_s; other_s is the
// residual. gpu_s + communication_s never exceeds the cycle wall time.
struct CycleTiming {
  double communication_s = 0;
  double gpu_s = 0;
  double other_s = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;

  double total_s() const { return communication_s + gpu_s + other_s; }
};

struct SessionConfig {
  double connect_timeout_s = 5.0;
  double cycle_timeout_s = 60.0;
  std::uint32_t version = wire::kProtocolVersion;
};

struct EnsureModelResult {
  bool cache_hit = false;  // destination already had the model
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  double elapsed_s = 0;
};

// One connection to a destination server. Not thread safe by design: a second
// forward while one is in flight fails with Error{session_busy} instead of
// blocking (close() from another thread is allowed and aborts a pending wait).
class Session {
 public:
  static Session connect(const std::string& endpoint,
                         const SessionConfig& config = {});
  static Session over_transport(std::unique_ptr<net::Transport> transport,
                                const SessionConfig& config = {});

  Session(Session&&) noexcept;
  Session& operator=(Session&&) noexcept;
  ~Session();

  EnsureModelResult ensure_model(const wire::ModelDescriptor& model);

  // Requires a prior successful ensure_model.
  std::pair<backend::Heatmap, CycleTiming> forward(const backend::Frame& frame);

  void close() noexcept;  // idempotent
  bool closed() const { return state_ == State::closed; }
  bool model_ready() const { return state_ == State::model_ready; }

  std::uint64_t bytes_sent() const { return ch_ ? ch_->bytes_sent() : 0; }
  std::uint64_t bytes_received() const { return ch_ ? ch_->bytes_received() : 0; }

 private:
  explicit Session(std::unique_ptr<net::Transport> transport,
                   const SessionConfig& config);
  void handshake();
  [[noreturn]] void fail_remote(const wire::ErrorMsg& e);

  enum class State { connected, model_ready, closed };

  std::unique_ptr<net::MessageChannel> ch_;
  SessionConfig config_;
  State state_ = State::closed;
  std::atomic_bool in_flight_{false};
};

struct DispatchConfig {
  enum class Mode { local, remote };
  Mode mode = Mode::local;
  std::string endpoint;  // host:port, remote mode only
  double scale_factor = 0.01;
  double connect_timeout_s = 5.0;
  double cycle_timeout_s = 60.0;
};

// Flat key=value file ('#' comments); every key optional. Environment
// variables override the file: ACCELFWD_MODE, ACCELFWD_ENDPOINT,
// ACCELFWD_SCALE_FACTOR, ACCELFWD_CONNECT_TIMEOUT_S, ACCELFWD_CYCLE_TIMEOUT_S.
// Throws Error{bad_config}. ignore_unknown_keys lets a caller share the file
// with its own key set (the harness does).
DispatchConfig load_dispatch_config(
    const std::optional<std::filesystem::path>& file,
    bool ignore_unknown_keys = false);

// Call-site facade: same two calls whether the forward runs in-process or on a
// remote destination. Frames are checked for NaN/Inf here, before any backend
// or wire cost is paid.
class Dispatcher {
 public:
  static Dispatcher local(std::shared_ptr<backend::Backend> backend);
  static Dispatcher remote(Session session);

  EnsureModelResult ensure_model(const wire::ModelDescriptor& model);
  std::pair<backend::Heatmap, CycleTiming> forward(const backend::Frame& frame);

  DispatchConfig::Mode mode() const {
    return session_ ? DispatchConfig::Mode::remote : DispatchConfig::Mode::local;
  }
  Session* session() { return session_ ? &*session_ : nullptr; }

 private:
  Dispatcher() = default;
  std::optional<Session> session_;
  std::shared_ptr<backend::Backend> backend_;
  std::optional<backend::ModelHandle> handle_;
  std::set<wire::Digest> registered_;
};

}  // namespace accelfwd::client
