#include "accelfwd/client.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "accelfwd/clock.hpp"
#include "accelfwd/error.hpp"

namespace accelfwd::client {

using namespace wire;

Session::Session(std::unique_ptr<net::Transport> transport,
                 const SessionConfig& config)
    : ch_(std::make_unique<net::MessageChannel>(std::move(transport))),
      config_(config),
      state_(State::connected) {}

Session::Session(Session&& o) noexcept
    : ch_(std::move(o.ch_)), config_(o.config_), state_(o.state_) {
  o.state_ = State::closed;
}

Session& Session::operator=(Session&& o) noexcept {
  if (this != &o) {
    close();
    ch_ = std::move(o.ch_);
    config_ = o.config_;
    state_ = o.state_;
    o.state_ = State::closed;
  }
  return *this;
}

Session::~Session() { close(); }

Session Session::connect(const std::string& endpoint,
                         const SessionConfig& config) {
  return over_transport(net::connect_tcp(endpoint, config.connect_timeout_s),
                        config);
}

Session Session::over_transport(std::unique_ptr<net::Transport> transport,
                                const SessionConfig& config) {
  Session s(std::move(transport), config);
  s.handshake();
  return s;
}

void Session::handshake() {
  ch_->set_recv_timeout(config_.connect_timeout_s);
  try {
    ch_->send(Hello{config_.version});
    Message m = ch_->recv();
    if (const auto* ack = std::get_if<HelloAck>(&m)) {
      if (ack->version != config_.version) {
        close();
        raise(ErrorCode::version_mismatch,
              "destination speaks version " + std::to_string(ack->version) +
                  ", this client speaks " + std::to_string(config_.version));
      }
      ch_->set_recv_timeout(config_.cycle_timeout_s);
      return;
    }
    if (const auto* err = std::get_if<ErrorMsg>(&m)) {
      close();
      raise(ErrorCode::connect_failed,
            std::string("destination refused: ") + wire_error_name(err->code) +
                " (" + err->message + ")");
    }
    close();
    raise(ErrorCode::connect_failed, "unexpected handshake reply");
  } catch (const Error& e) {
    close();
    if (e.code() == ErrorCode::disconnected || e.code() == ErrorCode::timeout ||
        e.code() == ErrorCode::protocol_violation)
      raise(ErrorCode::connect_failed,
            std::string("handshake failed: ") + e.what());
    throw;
  }
}

void Session::fail_remote(const ErrorMsg& e) {
  close();
  raise(ErrorCode::remote_error, std::string("destination reported ") +
                                     wire_error_name(e.code) + ": " + e.message);
}

EnsureModelResult Session::ensure_model(const ModelDescriptor& model) {
  if (state_ == State::closed) raise(ErrorCode::disconnected, "session is closed");
  bool expected = false;
  if (!in_flight_.compare_exchange_strong(expected, true))
    raise(ErrorCode::session_busy, "another call is in flight");
  struct Reset {
    std::atomic_bool& f;
    ~Reset() { f = false; }
  } reset{in_flight_};

  Stopwatch watch;
  std::uint64_t sent0 = ch_->bytes_sent(), recv0 = ch_->bytes_received();
  EnsureModelResult result;
  try {
    ch_->send(ModelCheck{model.digest});
    Message m = ch_->recv();
    if (const auto* err = std::get_if<ErrorMsg>(&m)) fail_remote(*err);
    if (const auto* ack = std::get_if<ModelAck>(&m)) {
      if (ack->digest != model.digest) {
        close();
        raise(ErrorCode::protocol_violation, "acknowledged digest differs");
      }
      result.cache_hit = true;
    } else if (std::get_if<ModelNeeded>(&m)) {
      ModelUpload up;
      up.digest = model.digest;
      up.output_divisor = model.output_divisor;
      up.name = model.name;
      up.structure = model.structure;
      up.weights = model.weights;
      ch_->send(Message(std::move(up)));
      Message m2 = ch_->recv();
      if (const auto* err = std::get_if<ErrorMsg>(&m2)) fail_remote(*err);
      const auto* ack = std::get_if<ModelAck>(&m2);
      if (!ack || ack->digest != model.digest) {
        close();
        raise(ErrorCode::protocol_violation, "upload was not acknowledged");
      }
    } else {
      close();
      raise(ErrorCode::protocol_violation, "unexpected reply to ModelCheck");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::disconnected || e.code() == ErrorCode::timeout)
      close();
    throw;
  }
  state_ = State::model_ready;
  result.bytes_sent = ch_->bytes_sent() - sent0;
  result.bytes_received = ch_->bytes_received() - recv0;
  result.elapsed_s = watch.elapsed_s();
  return result;
}

std::pair<backend::Heatmap, CycleTiming> Session::forward(
    const backend::Frame& frame) {
  if (state_ == State::closed) raise(ErrorCode::disconnected, "session is closed");
  if (state_ != State::model_ready)
    raise(ErrorCode::protocol_violation, "no model negotiated on this session");
  if (frame.data.size() != frame.dims.elem_count() || !frame.dims.valid())
    throw std::invalid_argument("frame data size disagrees with dims");

  bool expected = false;
  if (!in_flight_.compare_exchange_strong(expected, true))
    raise(ErrorCode::session_busy, "another call is in flight");
  struct Reset {
    std::atomic_bool& f;
    ~Reset() { f = false; }
  } reset{in_flight_};

  std::uint64_t sent0 = ch_->bytes_sent(), recv0 = ch_->bytes_received();
  CycleTiming t;
  backend::Heatmap heat;
  auto t0 = MonoClock::now();
  try {
    ch_->send_encoded(encode_frame_data(frame.data));
    ch_->send(Resolution{frame.dims.width, frame.dims.height});
    ch_->send(FrameSize{std::uint32_t(frame.data.size())});
    auto sent_at = MonoClock::now();

    Message m = ch_->recv();
    auto recv_at = MonoClock::now();
    if (const auto* err = std::get_if<ErrorMsg>(&m)) fail_remote(*err);
    auto* fr = std::get_if<ForwardResult>(&m);
    if (!fr) {
      close();
      raise(ErrorCode::protocol_violation, "expected ForwardResult");
    }
    heat.data = std::move(fr->data);

    double send_s = seconds_between(t0, sent_at);
    double wait_s = seconds_between(sent_at, recv_at);
    // The destination can start computing before this thread gets scheduled
    // again to stamp sent_at, so the reported compute window may exceed the
    // observed wait. Clamp it so gpu + communication never exceeds the cycle.
    t.gpu_s = std::min(fr->compute_s, wait_s);
    t.communication_s = send_s + (wait_s - t.gpu_s);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::disconnected || e.code() == ErrorCode::timeout)
      close();
    throw;
  }
  t.other_s = std::max(0.0, seconds_between(t0, MonoClock::now()) -
                                t.communication_s - t.gpu_s);
  t.bytes_sent = ch_->bytes_sent() - sent0;
  t.bytes_received = ch_->bytes_received() - recv0;
  return {std::move(heat), t};
}

void Session::close() noexcept {
  if (ch_) ch_->close();
  state_ = State::closed;
}

// ---- dispatch facade ----

Dispatcher Dispatcher::local(std::shared_ptr<backend::Backend> backend) {
  Dispatcher d;
  d.backend_ = std::move(backend);
  return d;
}

Dispatcher Dispatcher::remote(Session session) {
  Dispatcher d;
  d.session_.emplace(std::move(session));
  return d;
}

EnsureModelResult Dispatcher::ensure_model(const ModelDescriptor& model) {
  if (session_) return session_->ensure_model(model);
  Stopwatch watch;
  bool hit = registered_.contains(model.digest);
  handle_ = backend_->register_model(model);
  registered_.insert(model.digest);
  return {hit, 0, 0, watch.elapsed_s()};
}

std::pair<backend::Heatmap, CycleTiming> Dispatcher::forward(
    const backend::Frame& frame) {
  if (frame.data.size() != frame.dims.elem_count() || !frame.dims.valid())
    throw std::invalid_argument("frame data size disagrees with dims");
  if (!backend::all_finite(frame.data))
    throw std::invalid_argument("frame contains NaN or Inf");
  if (session_) return session_->forward(frame);

  if (!handle_) raise(ErrorCode::unknown_model, "ensure_model was never called");
  auto t0 = MonoClock::now();
  backend::Heatmap heat = backend_->forward(*handle_, frame);
  auto t1 = MonoClock::now();
  CycleTiming t;
  t.gpu_s = seconds_between(t0, t1);
  return {std::move(heat), t};
}

// ---- config ----

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_positive(const std::string& key, const std::string& value) {
  double v = 0;
  try {
    std::size_t used = 0;
    v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
  } catch (const std::exception&) {
    raise(ErrorCode::bad_config, key + " is not a number: " + value);
  }
  if (!(v > 0)) raise(ErrorCode::bad_config, key + " must be > 0");
  return v;
}

void apply_kv(DispatchConfig& c, const std::string& key, const std::string& value,
              bool ignore_unknown) {
  if (key == "mode") {
    if (value == "local") c.mode = DispatchConfig::Mode::local;
    else if (value == "remote") c.mode = DispatchConfig::Mode::remote;
    else raise(ErrorCode::bad_config, "mode must be local or remote, got " + value);
  } else if (key == "endpoint") {
    c.endpoint = value;
  } else if (key == "scale_factor") {
    c.scale_factor = parse_positive(key, value);
  } else if (key == "connect_timeout_s") {
    c.connect_timeout_s = parse_positive(key, value);
  } else if (key == "cycle_timeout_s") {
    c.cycle_timeout_s = parse_positive(key, value);
  } else if (!ignore_unknown) {
    raise(ErrorCode::bad_config, "unknown config key: " + key);
  }
}

void apply_env(DispatchConfig& c, const char* name, const std::string& key) {
  if (const char* v = std::getenv(name); v && *v) apply_kv(c, key, v, false);
}

}  // namespace

DispatchConfig load_dispatch_config(
    const std::optional<std::filesystem::path>& file, bool ignore_unknown_keys) {
  DispatchConfig c;
  if (file) {
    std::ifstream in(*file);
    if (!in) raise(ErrorCode::bad_config, "cannot open " + file->string());
    std::string line;
    while (std::getline(in, line)) {
      line = trim(line);
      if (line.empty() || line[0] == '#') continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        raise(ErrorCode::bad_config, "expected key=value, got: " + line);
      apply_kv(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)),
               ignore_unknown_keys);
    }
  }
  apply_env(c, "ACCELFWD_MODE", "mode");
  apply_env(c, "ACCELFWD_ENDPOINT", "endpoint");
  apply_env(c, "ACCELFWD_SCALE_FACTOR", "scale_factor");
  apply_env(c, "ACCELFWD_CONNECT_TIMEOUT_S", "connect_timeout_s");
  apply_env(c, "ACCELFWD_CYCLE_TIMEOUT_S", "cycle_timeout_s");
  if (c.mode == DispatchConfig::Mode::remote && c.endpoint.empty())
    raise(ErrorCode::bad_config, "remote mode needs an endpoint");
  return c;
}

}  // namespace accelfwd::client
