#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "accelfwd/backend.hpp"
#include "accelfwd/transport.hpp"
#include "accelfwd/wire.hpp"

namespace accelfwd::server {

struct ServerLimits {
  std::uint32_t max_sessions = 16;
  // name + structure + weights bytes of one upload
  std::uint64_t max_model_bytes = std::uint64_t(1) << 30;
};

struct ServerConfig {
  ServerLimits limits;
  std::uint32_t protocol_version = wire::kProtocolVersion;
  double session_recv_timeout_s = 0;  // 0: wait forever
  std::string log_path;               // empty: no event log
};

// One line per executed forward, in execution order. arrival_seq numbers
// jobs in queue-arrival order, so FIFO service means the column is 0,1,2,...
struct ForwardLogEntry {
  std::uint64_t arrival_seq = 0;
  std::uint64_t session_id = 0;
};

// Destination node: accepts sessions, negotiates models into a cache keyed by
// digest, and funnels every forward through one dispatch queue so a single
// backend serves requests in arrival order.
class Server {
 public:
  explicit Server(std::shared_ptr<backend::Backend> backend,
                  ServerConfig config = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and starts accepting. Returns the bound port (useful with port 0).
  std::uint16_t listen(const std::string& host, std::uint16_t port);

  // Serves the far end of an in-process pipe; returned transport is the
  // client's end.
  std::unique_ptr<net::Transport> connect_in_process();

  void shutdown();  // idempotent; waits for sessions to drain

  std::size_t active_sessions() const { return active_.load(); }
  std::size_t model_count() const;
  std::vector<ForwardLogEntry> forward_log() const;

 private:
  struct Job;
  struct SessionCtx;

  void accept_loop();
  void run_session(std::uint64_t id, std::shared_ptr<net::Transport> transport);
  void dispatch_loop();
  void log_event(const std::string& event, std::uint64_t session_id,
                 const std::string& detail);

  std::shared_ptr<backend::Backend> backend_;
  ServerConfig config_;

  mutable std::mutex models_m_;
  std::map<wire::Digest, backend::ModelHandle> models_;
  std::vector<wire::Digest> model_order_;

  mutable std::mutex queue_m_;
  std::condition_variable queue_cv_;
  std::vector<std::unique_ptr<Job>> queue_;
  std::uint64_t next_arrival_ = 0;
  bool stop_dispatch_ = false;
  std::vector<ForwardLogEntry> exec_log_;

  std::optional<net::TcpListener> listener_;
  std::thread accept_thread_;
  std::thread dispatch_thread_;

  mutable std::mutex sessions_m_;
  std::map<std::uint64_t, std::shared_ptr<net::Transport>> session_transports_;
  std::vector<std::thread> session_threads_;
  std::uint64_t next_session_ = 1;
  std::atomic<std::size_t> active_{0};
  std::atomic_bool stopping_{false};

  std::mutex log_m_;
  std::unique_ptr<std::ostream> log_;
};

}  // namespace accelfwd::server
