#include "accelfwd/wire.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "accelfwd/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "wire codec assumes a little-endian host");
static_assert(sizeof(float) == 4 && sizeof(double) == 8);

namespace accelfwd::wire {

std::uint64_t output_elems(std::uint64_t input_elems, double divisor) {
  if (!(divisor > 0.0)) throw std::invalid_argument("output divisor must be > 0");
  double k = static_cast<double>(input_elems) / divisor;
  return static_cast<std::uint64_t>(std::llround(k));
}

std::uint64_t transfer_size(const Dims& dims, double divisor) {
  std::uint64_t e = dims.elem_count();
  return 8 + 4 + 4 * e + 4 * output_elems(e, divisor);
}

// ---- digest ----

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
  if (!ctx_ || EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(),
                                 nullptr) != 1)
    throw std::runtime_error("sha256 init failed");
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

void Sha256::update(std::span<const std::uint8_t> data) {
  if (EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data.data(), data.size()) != 1)
    throw std::runtime_error("sha256 update failed");
}

Digest Sha256::finish() {
  Digest out{};
  unsigned int n = 0;
  if (EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), out.data(), &n) != 1 ||
      n != out.size())
    throw std::runtime_error("sha256 final failed");
  return out;
}

Digest sha256(std::span<const std::uint8_t> data) {
  Sha256 h;
  h.update(data);
  return h.finish();
}

std::string hex(const Digest& d) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (std::uint8_t b : d) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xf]);
  }
  return s;
}

Digest model_digest(std::span<const std::uint8_t> structure,
                    std::span<const std::uint8_t> weights, double output_divisor) {
  Sha256 h;
  h.update(structure);
  h.update(weights);
  std::uint8_t c[8];
  std::memcpy(c, &output_divisor, 8);
  h.update(c);
  return h.finish();
}

ModelDescriptor make_model(std::string name, std::vector<std::uint8_t> structure,
                           std::vector<std::uint8_t> weights, double output_divisor) {
  if (!(output_divisor > 0.0))
    raise(ErrorCode::invalid_model, "output divisor must be > 0");
  ModelDescriptor d;
  d.digest = model_digest(structure, weights, output_divisor);
  d.name = std::move(name);
  d.structure = std::move(structure);
  d.weights = std::move(weights);
  d.output_divisor = output_divisor;
  return d;
}

// ---- encode ----

namespace {

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void bytes(std::span<const std::uint8_t> b) { raw(b.data(), b.size()); }
  void floats(std::span<const float> f) { raw(f.data(), f.size() * 4); }

 private:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t>& out_;
};

std::uint64_t payload_len(const Message& m) {
  struct V {
    std::uint64_t operator()(const Hello&) { return 4; }
    std::uint64_t operator()(const HelloAck&) { return 4; }
    std::uint64_t operator()(const FrameSize&) { return 4; }
    std::uint64_t operator()(const Resolution&) { return 8; }
    std::uint64_t operator()(const FrameData& m) {
      return 4 + 4 * std::uint64_t(m.elem_count);
    }
    std::uint64_t operator()(const ForwardResult& m) {
      return 8 + 4 + 4 * std::uint64_t(m.elem_count);
    }
    std::uint64_t operator()(const ModelCheck&) { return 32; }
    std::uint64_t operator()(const ModelNeeded&) { return 32; }
    std::uint64_t operator()(const ModelUpload& m) {
      return 32 + 8 + 4 + m.name.size() + 4 + m.structure.size() + 8 +
             m.weights.size();
    }
    std::uint64_t operator()(const ModelAck&) { return 32; }
    std::uint64_t operator()(const ErrorMsg& m) { return 4 + 4 + m.message.size(); }
  };
  return std::visit(V{}, m);
}

void check_consistent(const Message& m) {
  if (const auto* fd = std::get_if<FrameData>(&m)) {
    if (fd->data.size() != fd->elem_count)
      throw std::invalid_argument("FrameData element count mismatch");
    if (fd->elem_count < 1) throw std::invalid_argument("FrameData is empty");
  } else if (const auto* fr = std::get_if<ForwardResult>(&m)) {
    if (fr->data.size() != fr->elem_count)
      throw std::invalid_argument("ForwardResult element count mismatch");
    if (fr->elem_count < 1) throw std::invalid_argument("ForwardResult is empty");
    if (!std::isfinite(fr->compute_s) || fr->compute_s < 0)
      throw std::invalid_argument("ForwardResult compute seconds invalid");
  } else if (const auto* fs = std::get_if<FrameSize>(&m)) {
    if (fs->elem_count < 1) throw std::invalid_argument("FrameSize is zero");
  } else if (const auto* r = std::get_if<Resolution>(&m)) {
    if (r->width < 1 || r->height < 1 || r->width > kMaxSide || r->height > kMaxSide)
      throw std::invalid_argument("Resolution out of range");
  } else if (const auto* u = std::get_if<ModelUpload>(&m)) {
    if (!(u->output_divisor > 0.0) || !std::isfinite(u->output_divisor))
      throw std::invalid_argument("ModelUpload divisor invalid");
  }
}

void write_header(std::vector<std::uint8_t>& out, Tag tag, std::uint64_t payload) {
  std::uint64_t len = 1 + payload;
  if (len > kMaxFrameLen)
    raise(ErrorCode::payload_too_large, "encoded frame would exceed 2^31-1 bytes");
  out.reserve(out.size() + kHeaderBytes + len);
  Writer w(out);
  w.u32(static_cast<std::uint32_t>(len));
  w.u8(static_cast<std::uint8_t>(tag));
}

}  // namespace

std::vector<std::uint8_t> encode(const Message& m) {
  check_consistent(m);
  std::vector<std::uint8_t> out;
  write_header(out, tag_of(m), payload_len(m));
  Writer w(out);
  struct V {
    Writer& w;
    void operator()(const Hello& m) { w.u32(m.version); }
    void operator()(const HelloAck& m) { w.u32(m.version); }
    void operator()(const FrameSize& m) { w.u32(m.elem_count); }
    void operator()(const Resolution& m) {
      w.u32(m.width);
      w.u32(m.height);
    }
    void operator()(const FrameData& m) {
      w.u32(m.elem_count);
      w.floats(m.data);
    }
    void operator()(const ForwardResult& m) {
      w.f64(m.compute_s);
      w.u32(m.elem_count);
      w.floats(m.data);
    }
    void operator()(const ModelCheck& m) { w.bytes(m.digest); }
    void operator()(const ModelNeeded& m) { w.bytes(m.digest); }
    void operator()(const ModelUpload& m) {
      w.bytes(m.digest);
      w.f64(m.output_divisor);
      w.u32(static_cast<std::uint32_t>(m.name.size()));
      w.bytes({reinterpret_cast<const std::uint8_t*>(m.name.data()), m.name.size()});
      w.u32(static_cast<std::uint32_t>(m.structure.size()));
      w.bytes(m.structure);
      w.u64(m.weights.size());
      w.bytes(m.weights);
    }
    void operator()(const ModelAck& m) { w.bytes(m.digest); }
    void operator()(const ErrorMsg& m) {
      w.u32(m.code);
      w.u32(static_cast<std::uint32_t>(m.message.size()));
      w.bytes({reinterpret_cast<const std::uint8_t*>(m.message.data()),
               m.message.size()});
    }
  };
  std::visit(V{w}, m);
  return out;
}

std::vector<std::uint8_t> encode_frame_data(std::span<const float> data) {
  if (data.empty()) throw std::invalid_argument("FrameData is empty");
  std::vector<std::uint8_t> out;
  write_header(out, Tag::frame_data, 4 + 4 * std::uint64_t(data.size()));
  Writer w(out);
  w.u32(static_cast<std::uint32_t>(data.size()));
  w.floats(data);
  return out;
}

std::vector<std::uint8_t> encode_forward_result(double compute_s,
                                                std::span<const float> data) {
  if (data.empty()) throw std::invalid_argument("ForwardResult is empty");
  if (!std::isfinite(compute_s) || compute_s < 0)
    throw std::invalid_argument("ForwardResult compute seconds invalid");
  std::vector<std::uint8_t> out;
  write_header(out, Tag::forward_result, 8 + 4 + 4 * std::uint64_t(data.size()));
  Writer w(out);
  w.f64(compute_s);
  w.u32(static_cast<std::uint32_t>(data.size()));
  w.floats(data);
  return out;
}

// ---- decode ----

namespace {

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> buf) : buf_(buf) {}

  bool u8(std::uint8_t& v) { return raw(&v, 1); }
  bool u32(std::uint32_t& v) { return raw(&v, 4); }
  bool u64(std::uint64_t& v) { return raw(&v, 8); }
  bool f64(double& v) { return raw(&v, 8); }
  bool digest(Digest& d) { return raw(d.data(), 32); }
  bool floats(std::vector<float>& out, std::size_t count) {
    if (remaining() < count * 4) return false;
    out.resize(count);
    std::memcpy(out.data(), buf_.data() + off_, count * 4);
    off_ += count * 4;
    return true;
  }
  bool bytes(std::vector<std::uint8_t>& out, std::size_t count) {
    if (remaining() < count) return false;
    out.assign(buf_.begin() + off_, buf_.begin() + off_ + count);
    off_ += count;
    return true;
  }
  bool str(std::string& out, std::size_t count) {
    if (remaining() < count) return false;
    out.assign(reinterpret_cast<const char*>(buf_.data() + off_), count);
    off_ += count;
    return true;
  }
  std::size_t remaining() const { return buf_.size() - off_; }

 private:
  bool raw(void* p, std::size_t n) {
    if (remaining() < n) return false;
    std::memcpy(p, buf_.data() + off_, n);
    off_ += n;
    return true;
  }
  std::span<const std::uint8_t> buf_;
  std::size_t off_ = 0;
};

DecodeResult malformed() { return {DecodeStatus::malformed_payload, std::nullopt, 0}; }

// payload excludes the tag byte; exact-length checks per tag
DecodeResult parse(Tag tag, std::span<const std::uint8_t> payload,
                   std::size_t consumed) {
  Reader r(payload);
  Message m;
  switch (tag) {
    case Tag::hello: {
      Hello v;
      if (!r.u32(v.version) || r.remaining()) return malformed();
      m = v;
      break;
    }
    case Tag::hello_ack: {
      HelloAck v;
      if (!r.u32(v.version) || r.remaining()) return malformed();
      m = v;
      break;
    }
    case Tag::frame_size: {
      FrameSize v;
      if (!r.u32(v.elem_count) || r.remaining()) return malformed();
      if (v.elem_count < 1) return malformed();
      m = v;
      break;
    }
    case Tag::resolution: {
      Resolution v;
      if (!r.u32(v.width) || !r.u32(v.height) || r.remaining()) return malformed();
      if (v.width < 1 || v.height < 1 || v.width > kMaxSide || v.height > kMaxSide)
        return malformed();
      m = v;
      break;
    }
    case Tag::frame_data: {
      FrameData v;
      if (!r.u32(v.elem_count)) return malformed();
      if (v.elem_count < 1 || !r.floats(v.data, v.elem_count) || r.remaining())
        return malformed();
      m = std::move(v);
      break;
    }
    case Tag::forward_result: {
      ForwardResult v;
      if (!r.f64(v.compute_s) || !r.u32(v.elem_count)) return malformed();
      if (!std::isfinite(v.compute_s) || v.compute_s < 0) return malformed();
      if (v.elem_count < 1 || !r.floats(v.data, v.elem_count) || r.remaining())
        return malformed();
      m = std::move(v);
      break;
    }
    case Tag::model_check: {
      ModelCheck v;
      if (!r.digest(v.digest) || r.remaining()) return malformed();
      m = v;
      break;
    }
    case Tag::model_needed: {
      ModelNeeded v;
      if (!r.digest(v.digest) || r.remaining()) return malformed();
      m = v;
      break;
    }
    case Tag::model_upload: {
      ModelUpload v;
      std::uint32_t name_len = 0, struct_len = 0;
      std::uint64_t weights_len = 0;
      if (!r.digest(v.digest) || !r.f64(v.output_divisor)) return malformed();
      if (!std::isfinite(v.output_divisor) || !(v.output_divisor > 0.0))
        return malformed();
      if (!r.u32(name_len) || !r.str(v.name, name_len)) return malformed();
      if (!r.u32(struct_len) || !r.bytes(v.structure, struct_len)) return malformed();
      if (!r.u64(weights_len) || !r.bytes(v.weights, weights_len) || r.remaining())
        return malformed();
      m = std::move(v);
      break;
    }
    case Tag::model_ack: {
      ModelAck v;
      if (!r.digest(v.digest) || r.remaining()) return malformed();
      m = v;
      break;
    }
    case Tag::error: {
      ErrorMsg v;
      std::uint32_t msg_len = 0;
      if (!r.u32(v.code) || !r.u32(msg_len) || !r.str(v.message, msg_len) ||
          r.remaining())
        return malformed();
      m = std::move(v);
      break;
    }
  }
  return {DecodeStatus::ok, std::move(m), consumed};
}

}  // namespace

DecodeResult decode(std::span<const std::uint8_t> buf) {
  if (buf.size() < kHeaderBytes) return {DecodeStatus::incomplete, std::nullopt, 0};
  std::uint32_t len;
  std::memcpy(&len, buf.data(), 4);
  if (len < 1 || len > kMaxFrameLen) return malformed();
  if (buf.size() < kHeaderBytes + 1) return {DecodeStatus::incomplete, std::nullopt, 0};
  std::uint8_t tag = buf[4];
  if (tag < std::uint8_t(Tag::hello) || tag > std::uint8_t(Tag::error))
    return {DecodeStatus::unknown_tag, std::nullopt, 0};
  if (buf.size() < kHeaderBytes + len)
    return {DecodeStatus::incomplete, std::nullopt, 0};
  return parse(static_cast<Tag>(tag), buf.subspan(kHeaderBytes + 1, len - 1),
               kHeaderBytes + len);
}

Tag tag_of(const Message& m) {
  struct V {
    Tag operator()(const Hello&) { return Tag::hello; }
    Tag operator()(const HelloAck&) { return Tag::hello_ack; }
    Tag operator()(const FrameSize&) { return Tag::frame_size; }
    Tag operator()(const Resolution&) { return Tag::resolution; }
    Tag operator()(const FrameData&) { return Tag::frame_data; }
    Tag operator()(const ForwardResult&) { return Tag::forward_result; }
    Tag operator()(const ModelCheck&) { return Tag::model_check; }
    Tag operator()(const ModelNeeded&) { return Tag::model_needed; }
    Tag operator()(const ModelUpload&) { return Tag::model_upload; }
    Tag operator()(const ModelAck&) { return Tag::model_ack; }
    Tag operator()(const ErrorMsg&) { return Tag::error; }
  };
  return std::visit(V{}, m);
}

const char* tag_name(Tag t) noexcept {
  switch (t) {
    case Tag::hello: return "Hello";
    case Tag::hello_ack: return "HelloAck";
    case Tag::frame_size: return "FrameSize";
    case Tag::resolution: return "Resolution";
    case Tag::frame_data: return "FrameData";
    case Tag::forward_result: return "ForwardResult";
    case Tag::model_check: return "ModelCheck";
    case Tag::model_needed: return "ModelNeeded";
    case Tag::model_upload: return "ModelUpload";
    case Tag::model_ack: return "ModelAck";
    case Tag::error: return "Error";
  }
  return "?";
}

const char* wire_error_name(std::uint32_t code) noexcept {
  switch (static_cast<WireError>(code)) {
    case WireError::protocol: return "protocol";
    case WireError::busy: return "busy";
    case WireError::too_large: return "too_large";
    case WireError::version: return "version";
    case WireError::unknown_model: return "unknown_model";
    case WireError::invalid_model: return "invalid_model";
    case WireError::internal: return "internal";
  }
  return "?";
}

}  // namespace accelfwd::wire
