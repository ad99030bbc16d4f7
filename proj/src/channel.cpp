#include "accelfwd/channel.hpp"

#include "accelfwd/error.hpp"

namespace accelfwd::net {

using wire::DecodeStatus;

MessageChannel::MessageChannel(std::unique_ptr<Transport> transport)
    : transport_(std::move(transport)) {}

void MessageChannel::send(const wire::Message& m) {
  send_encoded(wire::encode(m));
}

void MessageChannel::send_encoded(std::vector<std::uint8_t>&& encoded) {
  sent_ += encoded.size();
  transport_->send_chunk(std::move(encoded));
}

wire::Message MessageChannel::recv() {
  if (poisoned_) raise(ErrorCode::protocol_violation, "stream already poisoned");
  for (;;) {
    if (!pending_.empty()) {
      auto r = wire::decode(pending_);
      if (r.status == DecodeStatus::ok) {
        pending_.erase(pending_.begin(), pending_.begin() + long(r.consumed));
        return std::move(*r.message);
      }
      if (r.status != DecodeStatus::incomplete) {
        poisoned_ = true;
        pending_.clear();
        raise(ErrorCode::protocol_violation,
              r.status == DecodeStatus::unknown_tag ? "unknown message tag"
                                                    : "malformed message payload");
      }
    }
    auto chunk = transport_->recv_chunk();
    if (chunk.empty()) {
      poisoned_ = !pending_.empty();  // EOF inside a frame
      raise(ErrorCode::disconnected, "peer closed the connection");
    }
    received_ += chunk.size();
    if (pending_.empty()) {
      // common case: one whole message per chunk, decode in place
      auto r = wire::decode(chunk);
      if (r.status == DecodeStatus::ok && r.consumed == chunk.size())
        return std::move(*r.message);
      pending_ = std::move(chunk);
    } else {
      pending_.insert(pending_.end(), chunk.begin(), chunk.end());
    }
  }
}

}  // namespace accelfwd::net
