#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace accelfwd::wire {

inline constexpr std::uint32_t kProtocolVersion = 1;

// Framing: [length: u32 LE][tag: u8][payload]. length counts the tag byte plus
// the payload, not itself. All integers little-endian, floats IEEE-754 binary32,
// doubles binary64.
inline constexpr std::size_t kHeaderBytes = 4;
inline constexpr std::uint32_t kMaxFrameLen = 0x7fffffffu;

// Fixed wire cost of one forward cycle beyond transfer_size(): four frame
// headers (4+1 bytes each), the FrameData element count, and the ForwardResult
// preamble (compute seconds f64 + element count u32).
inline constexpr std::uint64_t kCycleOverheadBytes = 4 * 5 + 4 + 8 + 4;

inline constexpr std::uint32_t kMaxSide = 65535;  // Resolution width/height cap

struct Dims {
  std::uint32_t batch = 1;
  std::uint32_t channels = 1;
  std::uint32_t height = 1;
  std::uint32_t width = 1;

  std::uint64_t elem_count() const {
    return std::uint64_t(batch) * channels * height * width;
  }
  bool valid() const {
    return batch >= 1 && channels >= 1 && height >= 1 && width >= 1 &&
           height <= kMaxSide && width <= kMaxSide;
  }
  bool operator==(const Dims&) const = default;
};

// round(input / divisor), halves away from zero
std::uint64_t output_elems(std::uint64_t input_elems, double divisor);

// Request payload bytes for one frame at the given dims: resolution (2x4) +
// element count (4) + input floats (4E) + result floats (4*round(E/divisor)).
std::uint64_t transfer_size(const Dims& dims, double divisor);

// ---- digest ----

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> data);
std::string hex(const Digest& d);

class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;
  void update(std::span<const std::uint8_t> data);
  Digest finish();

 private:
  void* ctx_;
};

// ---- model ----

struct ModelDescriptor {
  std::string name;
  std::vector<std::uint8_t> structure;  // serialized network definition
  std::vector<std::uint8_t> weights;
  double output_divisor = 1.0;  // output element count = round(input / this)
  Digest digest{};
};

// sha256(structure || weights || output_divisor as 8-byte LE double)
Digest model_digest(std::span<const std::uint8_t> structure,
                    std::span<const std::uint8_t> weights, double output_divisor);

ModelDescriptor make_model(std::string name, std::vector<std::uint8_t> structure,
                           std::vector<std::uint8_t> weights, double output_divisor);

// ---- messages ----

enum class Tag : std::uint8_t {
  hello = 0x01,
  hello_ack = 0x02,
  frame_size = 0x03,
  resolution = 0x04,
  frame_data = 0x05,
  forward_result = 0x06,
  model_check = 0x07,
  model_needed = 0x08,
  model_upload = 0x09,
  model_ack = 0x0a,
  error = 0x0b,
};

struct Hello {
  std::uint32_t version = kProtocolVersion;
};
struct HelloAck {
  std::uint32_t version = kProtocolVersion;
};
struct FrameSize {
  std::uint32_t elem_count = 0;
};
struct Resolution {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
};
struct FrameData {
  std::uint32_t elem_count = 0;
  std::vector<float> data;
};
struct ForwardResult {
  double compute_s = 0;  // destination-measured seconds around the forward call
  std::uint32_t elem_count = 0;
  std::vector<float> data;
};
struct ModelCheck {
  Digest digest{};
};
struct ModelNeeded {
  Digest digest{};
};
struct ModelUpload {
  Digest digest{};
  double output_divisor = 1.0;
  std::string name;
  std::vector<std::uint8_t> structure;
  std::vector<std::uint8_t> weights;
};
struct ModelAck {
  Digest digest{};
};

// codes carried by Error messages
enum class WireError : std::uint32_t {
  protocol = 1,
  busy = 2,
  too_large = 3,
  version = 4,
  unknown_model = 5,
  invalid_model = 6,
  internal = 7,
};
const char* wire_error_name(std::uint32_t code) noexcept;

struct ErrorMsg {
  std::uint32_t code = 0;
  std::string message;
};

using Message = std::variant<Hello, HelloAck, FrameSize, Resolution, FrameData,
                             ForwardResult, ModelCheck, ModelNeeded, ModelUpload,
                             ModelAck, ErrorMsg>;

Tag tag_of(const Message& m);
const char* tag_name(Tag t) noexcept;

// Throws Error{payload_too_large} if the frame would exceed kMaxFrameLen and
// std::invalid_argument if declared counts disagree with payload sizes.
std::vector<std::uint8_t> encode(const Message& m);

// Single-copy encoders for the two bulk messages on the hot path.
std::vector<std::uint8_t> encode_frame_data(std::span<const float> data);
std::vector<std::uint8_t> encode_forward_result(double compute_s,
                                                std::span<const float> data);

enum class DecodeStatus {
  ok,
  incomplete,        // not enough bytes yet; read more and retry
  unknown_tag,       // stream is poisoned, tear the connection down
  malformed_payload, // likewise
};

struct DecodeResult {
  DecodeStatus status = DecodeStatus::incomplete;
  std::optional<Message> message;  // set iff status == ok
  std::size_t consumed = 0;        // bytes to drop from the front; 0 unless ok
};

DecodeResult decode(std::span<const std::uint8_t> buf);

}  // namespace accelfwd::wire
