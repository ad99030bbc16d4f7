#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "accelfwd/wire.hpp"

namespace accelfwd::backend {

using wire::Digest;
using wire::Dims;
using wire::ModelDescriptor;

struct Frame {
  Dims dims;
  std::vector<float> data;  // flattened, batch-major
};

struct Heatmap {
  std::vector<float> data;
  std::uint64_t elem_count() const { return data.size(); }
};

bool all_finite(std::span<const float> data);

struct ModelHandle {
  std::uint64_t id = 0;  // valid ids start at 1
  bool operator==(const ModelHandle&) const = default;
};

// An accelerator admits one forward at a time; callers queue in FIFO order.
class FifoGate {
 public:
  class Pass {
   public:
    Pass(Pass&& o) noexcept : gate_(o.gate_) { o.gate_ = nullptr; }
    Pass(const Pass&) = delete;
    ~Pass();

   private:
    friend class FifoGate;
    explicit Pass(FifoGate* g) : gate_(g) {}
    FifoGate* gate_;
  };

  Pass enter();

 private:
  void leave();
  std::mutex m_;
  std::condition_variable cv_;
  std::uint64_t next_ticket_ = 0;
  std::uint64_t serving_ = 0;
};

class Backend {
 public:
  virtual ~Backend() = default;

  // Idempotent per digest: registering identical bytes again returns the same
  // handle. The model stays resident until shutdown.
  // Throws Error{invalid_model}.
  virtual ModelHandle register_model(const ModelDescriptor& model) = 0;

  // Throws Error{unknown_model} for a handle this backend never issued and
  // Error{degenerate_output} when the model yields no output elements.
  virtual Heatmap forward(ModelHandle model, const Frame& frame) = 0;

  virtual std::string_view label() const = 0;
};

// Deterministic stand-in for a pose network: splits the flattened input into
// K = round(E / divisor) contiguous segments of real width E/K and emits each
// segment's mean. Boundaries are floor(j * width); accumulation is
// left-to-right in double, cast to f32 at the end.
std::vector<double> segment_means(std::span<const float> data, double divisor);
Heatmap mockpose_forward(const Frame& frame, double divisor);

class MockPoseBackend final : public Backend {
 public:
  ModelHandle register_model(const ModelDescriptor& model) override;
  Heatmap forward(ModelHandle model, const Frame& frame) override;
  std::string_view label() const override { return "mockpose"; }

 private:
  FifoGate gate_;
  std::mutex m_;
  std::map<std::uint64_t, double> divisor_by_id_;
  std::map<Digest, std::uint64_t> id_by_digest_;
  std::uint64_t next_id_ = 1;
};

// Compute-time emulation profile, already scaled.
struct BackendProfile {
  double per_frame_compute_s = 0;
  double model_load_s = 0;
  std::string label = "none";

  bool is_zero() const { return per_frame_compute_s <= 0 && model_load_s <= 0; }
};

enum class WorkloadKind { images, video };
WorkloadKind workload_kind_from(std::string_view name);  // "images" | "video"
const char* to_string(WorkloadKind kind) noexcept;

// name: device | edge | cloud | none. Per-frame time depends on the workload
// kind. scale multiplies both times.
BackendProfile preset_profile(std::string_view name, WorkloadKind kind,
                              double scale = 1.0);

// Wraps a backend so each forward takes at least per_frame_compute_s (the
// inner compute is absorbed into that floor, keeping the emulated time the
// observed time) and the first register_model per digest takes model_load_s.
// Serializes callers FIFO like a real single device.
std::shared_ptr<Backend> wrap_delay(std::shared_ptr<Backend> inner,
                                    BackendProfile profile);

}  // namespace accelfwd::backend
