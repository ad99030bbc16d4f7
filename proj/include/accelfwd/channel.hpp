#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "accelfwd/transport.hpp"
#include "accelfwd/wire.hpp"

namespace accelfwd::net {

// Framed messages over a Transport, with byte counters for the accounting the
// profiler relies on. Counters include framing headers.
class MessageChannel {
 public:
  explicit MessageChannel(std::unique_ptr<Transport> transport);

  void send(const wire::Message& m);
  void send_encoded(std::vector<std::uint8_t>&& encoded);

  // Blocks for the next complete message.
  // Error{disconnected} on EOF, Error{timeout}, and Error{protocol_violation}
  // on an unknown tag or malformed payload. A protocol_violation poisons the
  // stream: the decode buffer is dropped and further recv calls keep throwing.
  wire::Message recv();

  std::uint64_t bytes_sent() const { return sent_; }
  std::uint64_t bytes_received() const { return received_; }

  void set_recv_timeout(double seconds) { transport_->set_recv_timeout(seconds); }
  void shutdown_read() { transport_->shutdown_read(); }
  void close() { transport_->close(); }

 private:
  std::unique_ptr<Transport> transport_;
  std::vector<std::uint8_t> pending_;
  bool poisoned_ = false;
  std::uint64_t sent_ = 0;
  std::uint64_t received_ = 0;
};

}  // namespace accelfwd::net
