#include "accelfwd/server.hpp"

#include <json.hpp>

#include <fstream>
#include <future>
#include <iostream>

#include "accelfwd/channel.hpp"
#include "accelfwd/clock.hpp"
#include "accelfwd/error.hpp"

namespace accelfwd::server {

using namespace wire;

struct Server::Job {
  std::uint64_t session_id = 0;
  std::uint64_t arrival_seq = 0;
  backend::ModelHandle handle;
  backend::Frame frame;
  std::promise<std::pair<backend::Heatmap, double>> done;
};

Server::Server(std::shared_ptr<backend::Backend> backend, ServerConfig config)
    : backend_(std::move(backend)), config_(std::move(config)) {
  if (!config_.log_path.empty()) {
    auto out = std::make_unique<std::ofstream>(config_.log_path, std::ios::app);
    if (!out->is_open())
      raise(ErrorCode::io_failure, "cannot open log file " + config_.log_path);
    log_ = std::move(out);
  }
  dispatch_thread_ = std::thread([this] { dispatch_loop(); });
}

Server::~Server() { shutdown(); }

void Server::log_event(const std::string& event, std::uint64_t session_id,
                       const std::string& detail) {
  if (!log_) return;
  nlohmann::json j;
  j["event"] = event;
  j["session"] = session_id;
  if (!detail.empty()) j["detail"] = detail;
  std::lock_guard lk(log_m_);
  *log_ << j.dump() << '\n';
  log_->flush();
}

std::uint16_t Server::listen(const std::string& host, std::uint16_t port) {
  listener_.emplace(host, port);
  accept_thread_ = std::thread([this] { accept_loop(); });
  return listener_->port();
}

void Server::accept_loop() {
  while (!stopping_) {
    auto t = listener_->accept();
    if (!t) break;
    std::shared_ptr<net::Transport> transport(std::move(t));
    std::lock_guard lk(sessions_m_);
    if (stopping_) break;
    std::uint64_t id = next_session_++;
    session_transports_[id] = transport;
    session_threads_.emplace_back(
        [this, id, transport] { run_session(id, transport); });
  }
}

std::unique_ptr<net::Transport> Server::connect_in_process() {
  auto pipe = net::make_pipe();
  std::shared_ptr<net::Transport> transport(std::move(pipe.second));
  {
    std::lock_guard lk(sessions_m_);
    if (stopping_) raise(ErrorCode::disconnected, "server is shutting down");
    std::uint64_t id = next_session_++;
    session_transports_[id] = transport;
    session_threads_.emplace_back(
        [this, id, transport] { run_session(id, transport); });
  }
  return std::move(pipe.first);
}

void Server::dispatch_loop() {
  for (;;) {
    std::unique_ptr<Job> job;
    {
      std::unique_lock lk(queue_m_);
      queue_cv_.wait(lk, [&] { return stop_dispatch_ || !queue_.empty(); });
      if (queue_.empty() && stop_dispatch_) return;
      job = std::move(queue_.front());
      queue_.erase(queue_.begin());
    }
    auto t0 = MonoClock::now();
    try {
      backend::Heatmap heat = backend_->forward(job->handle, job->frame);
      double compute_s = seconds_between(t0, MonoClock::now());
      {
        std::lock_guard lk(queue_m_);
        exec_log_.push_back({job->arrival_seq, job->session_id});
      }
      job->done.set_value({std::move(heat), compute_s});
    } catch (...) {
      {
        std::lock_guard lk(queue_m_);
        exec_log_.push_back({job->arrival_seq, job->session_id});
      }
      job->done.set_exception(std::current_exception());
    }
  }
}

namespace {

// per-session cycle assembly: FrameData -> Resolution -> FrameSize -> reply
struct CycleState {
  std::optional<FrameData> frame;
  std::optional<Resolution> resolution;
};

struct SessionError {
  WireError code;
  std::string message;
};

// lets a MessageChannel speak through a transport co-owned by the server's
// shutdown path
class SharedTransport final : public net::Transport {
 public:
  explicit SharedTransport(std::shared_ptr<net::Transport> t) : t_(std::move(t)) {}
  void send_chunk(std::vector<std::uint8_t>&& d) override {
    t_->send_chunk(std::move(d));
  }
  std::vector<std::uint8_t> recv_chunk() override { return t_->recv_chunk(); }
  void set_recv_timeout(double s) override { t_->set_recv_timeout(s); }
  void shutdown_read() override { t_->shutdown_read(); }
  void close() override { t_->close(); }

 private:
  std::shared_ptr<net::Transport> t_;
};

}  // namespace

void Server::run_session(std::uint64_t id,
                         std::shared_ptr<net::Transport> transport) {
  struct Release {
    Server* s;
    std::uint64_t id;
    ~Release() {
      std::lock_guard lk(s->sessions_m_);
      s->session_transports_.erase(id);
    }
  } release{this, id};

  net::MessageChannel ch(std::make_unique<SharedTransport>(transport));

  if (active_.fetch_add(1) >= config_.limits.max_sessions) {
    log_event("rejected_busy", id, "");
    try {
      ch.send(ErrorMsg{std::uint32_t(WireError::busy), "session limit reached"});
    } catch (...) {
    }
    ch.close();
    active_.fetch_sub(1);
    return;
  }
  struct ActiveGuard {
    std::atomic<std::size_t>& a;
    ~ActiveGuard() { a.fetch_sub(1); }
  } active_guard{active_};

  if (config_.session_recv_timeout_s > 0)
    ch.set_recv_timeout(config_.session_recv_timeout_s);
  log_event("session_open", id, "");

  auto finish = [&](const char* why) {
    ch.close();
    log_event("session_close", id, why);
  };

  // handshake
  try {
    Message m = ch.recv();
    const auto* hello = std::get_if<Hello>(&m);
    if (!hello) {
      ch.send(ErrorMsg{std::uint32_t(WireError::protocol), "expected Hello"});
      return finish("no hello");
    }
    ch.send(HelloAck{config_.protocol_version});
    if (hello->version != config_.protocol_version)
      return finish("version mismatch");
  } catch (const Error&) {
    return finish("handshake failed");
  }

  std::optional<backend::ModelHandle> current_model;
  CycleState cycle;

  auto protocol_error = [&](const std::string& msg) -> SessionError {
    return {WireError::protocol, msg};
  };

  for (;;) {
    Message m;
    try {
      m = ch.recv();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::protocol_violation) {
        try {
          ch.send(ErrorMsg{std::uint32_t(WireError::protocol), e.what()});
        } catch (...) {
        }
        return finish("malformed stream");
      }
      return finish(e.code() == ErrorCode::disconnected ? "peer closed"
                                                        : "recv failed");
    }

    try {
      if (const auto* check = std::get_if<ModelCheck>(&m)) {
        if (cycle.frame) throw protocol_error("ModelCheck inside a cycle");
        std::optional<backend::ModelHandle> handle;
        {
          std::lock_guard lk(models_m_);
          auto it = models_.find(check->digest);
          if (it != models_.end()) handle = it->second;
        }
        if (handle) {
          current_model = handle;
          ch.send(ModelAck{check->digest});
          log_event("model_hit", id, hex(check->digest));
        } else {
          ch.send(ModelNeeded{check->digest});
        }
      } else if (auto* up = std::get_if<ModelUpload>(&m)) {
        if (cycle.frame) throw protocol_error("ModelUpload inside a cycle");
        std::uint64_t total =
            up->name.size() + up->structure.size() + up->weights.size();
        if (total > config_.limits.max_model_bytes) {
          ch.send(ErrorMsg{std::uint32_t(WireError::too_large),
                           "model exceeds destination limit"});
          return finish("model too large");
        }
        Digest expect =
            model_digest(up->structure, up->weights, up->output_divisor);
        if (expect != up->digest)
          throw protocol_error("upload digest does not match content");
        ModelDescriptor d;
        d.name = std::move(up->name);
        d.structure = std::move(up->structure);
        d.weights = std::move(up->weights);
        d.output_divisor = up->output_divisor;
        d.digest = up->digest;
        backend::ModelHandle handle;
        try {
          handle = backend_->register_model(d);
        } catch (const Error& e) {
          ch.send(ErrorMsg{std::uint32_t(WireError::invalid_model), e.what()});
          return finish("invalid model");
        }
        {
          std::lock_guard lk(models_m_);
          if (!models_.contains(d.digest)) {
            models_.emplace(d.digest, handle);
            model_order_.push_back(d.digest);
          }
        }
        current_model = handle;
        ch.send(ModelAck{d.digest});
        log_event("model_stored", id, hex(d.digest));
      } else if (auto* fd = std::get_if<FrameData>(&m)) {
        if (!current_model) {
          ch.send(ErrorMsg{std::uint32_t(WireError::unknown_model),
                           "no model negotiated"});
          return finish("frame before model");
        }
        if (cycle.frame) throw protocol_error("FrameData repeated in a cycle");
        cycle.frame = std::move(*fd);
      } else if (const auto* res = std::get_if<Resolution>(&m)) {
        if (!cycle.frame || cycle.resolution)
          throw protocol_error("Resolution out of order");
        if (cycle.frame->elem_count %
                (std::uint64_t(res->width) * res->height) !=
            0)
          throw protocol_error("resolution does not divide the element count");
        cycle.resolution = *res;
      } else if (const auto* fs = std::get_if<FrameSize>(&m)) {
        if (!cycle.frame || !cycle.resolution)
          throw protocol_error("FrameSize out of order");
        if (fs->elem_count != cycle.frame->elem_count)
          throw protocol_error("FrameSize disagrees with FrameData");

        auto job = std::make_unique<Job>();
        job->session_id = id;
        job->handle = *current_model;
        job->frame.dims = Dims{1, 1, cycle.resolution->height,
                               cycle.resolution->width};
        job->frame.dims.channels = std::uint32_t(
            cycle.frame->elem_count /
            (std::uint64_t(cycle.resolution->width) * cycle.resolution->height));
        job->frame.data = std::move(cycle.frame->data);
        auto result_future = job->done.get_future();
        {
          std::lock_guard lk(queue_m_);
          job->arrival_seq = next_arrival_++;
          queue_.push_back(std::move(job));
        }
        queue_cv_.notify_one();
        cycle = {};

        std::pair<backend::Heatmap, double> result;
        try {
          result = result_future.get();
        } catch (const Error& e) {
          ch.send(ErrorMsg{std::uint32_t(WireError::internal), e.what()});
          return finish("forward failed");
        }
        ch.send_encoded(
            encode_forward_result(result.second, result.first.data));
      } else if (const auto* err = std::get_if<ErrorMsg>(&m)) {
        log_event("peer_error", id,
                  std::string(wire_error_name(err->code)) + ": " + err->message);
        return finish("peer error");
      } else {
        throw protocol_error(std::string("unexpected ") + tag_name(tag_of(m)));
      }
    } catch (const SessionError& se) {
      try {
        ch.send(ErrorMsg{std::uint32_t(se.code), se.message});
      } catch (...) {
      }
      return finish(se.message.c_str());
    } catch (const Error& e) {
      return finish(e.what());  // send failed mid-reply
    }
  }
}

std::size_t Server::model_count() const {
  std::lock_guard lk(models_m_);
  return models_.size();
}

std::vector<ForwardLogEntry> Server::forward_log() const {
  std::lock_guard lk(queue_m_);
  return exec_log_;
}

void Server::shutdown() {
  if (stopping_.exchange(true)) return;
  if (listener_) listener_->close();
  if (accept_thread_.joinable()) accept_thread_.join();

  {
    std::lock_guard lk(sessions_m_);
    for (auto& [sid, t] : session_transports_) t->shutdown_read();
  }
  for (auto& th : session_threads_)
    if (th.joinable()) th.join();

  {
    std::lock_guard lk(queue_m_);
    stop_dispatch_ = true;
  }
  queue_cv_.notify_all();
  if (dispatch_thread_.joinable()) dispatch_thread_.join();
  log_event("server_stopped", 0, "");
}

}  // namespace accelfwd::server
