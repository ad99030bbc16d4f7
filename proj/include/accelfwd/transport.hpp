#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace accelfwd::net {

// Ordered byte stream moved in chunks. A chunk has no protocol meaning; framing
// lives one layer up. recv_chunk blocks; an empty return means the peer closed
// the write side cleanly.
class Transport {
 public:
  virtual ~Transport() = default;

  virtual void send_chunk(std::vector<std::uint8_t>&& data) = 0;
  virtual std::vector<std::uint8_t> recv_chunk() = 0;

  // 0 disables the timeout. A timed-out recv_chunk throws Error{timeout}.
  virtual void set_recv_timeout(double seconds) = 0;

  // Unblocks and poisons reads (recv_chunk returns empty); writes unaffected.
  virtual void shutdown_read() = 0;
  virtual void close() = 0;
};

// endpoint is "host:port". Throws Error{connect_failed}.
std::unique_ptr<Transport> connect_tcp(const std::string& endpoint,
                                       double timeout_s);

class TcpListener {
 public:
  // Throws Error{bind_failed}. port 0 picks an ephemeral port.
  TcpListener(const std::string& host, std::uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  // nullptr once close() has been called.
  std::unique_ptr<Transport> accept();
  void close();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// In-process duplex stream; both ends speak the Transport interface. Chunks
// cross by move, so byte ownership transfers without copying.
struct PipePair {
  std::unique_ptr<Transport> first;
  std::unique_ptr<Transport> second;
};
PipePair make_pipe();

}  // namespace accelfwd::net
