#include "accelfwd/backend.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "accelfwd/clock.hpp"
#include "accelfwd/error.hpp"

namespace accelfwd::backend {

bool all_finite(std::span<const float> data) {
  // exponent-mask compare instead of std::isfinite so the loop vectorizes
  std::uint32_t acc = 0;
  for (float f : data) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
    acc |= std::uint32_t((bits & 0x7f800000u) == 0x7f800000u);
  }
  return acc == 0;
}

FifoGate::Pass::~Pass() {
  if (gate_) gate_->leave();
}

FifoGate::Pass FifoGate::enter() {
  std::unique_lock lk(m_);
  std::uint64_t ticket = next_ticket_++;
  cv_.wait(lk, [&] { return serving_ == ticket; });
  return Pass(this);
}

void FifoGate::leave() {
  std::lock_guard lk(m_);
  ++serving_;
  cv_.notify_all();
}

std::vector<double> segment_means(std::span<const float> data, double divisor) {
  const std::uint64_t e = data.size();
  if (e == 0) throw std::invalid_argument("empty input");
  const std::uint64_t k = wire::output_elems(e, divisor);
  if (k < 1)
    raise(ErrorCode::degenerate_output, "model yields zero output elements");
  if (k > e)
    raise(ErrorCode::degenerate_output,
          "model yields more output elements than inputs");
  const double width = double(e) / double(k);
  std::vector<double> out(k);
  std::uint64_t lo = 0;
  for (std::uint64_t j = 0; j < k; ++j) {
    std::uint64_t hi = (j + 1 == k) ? e : std::uint64_t(double(j + 1) * width);
    double sum = 0.0;
    for (std::uint64_t i = lo; i < hi; ++i) sum += double(data[i]);
    out[j] = sum / double(hi - lo);
    lo = hi;
  }
  return out;
}

Heatmap mockpose_forward(const Frame& frame, double divisor) {
  auto means = segment_means(frame.data, divisor);
  Heatmap h;
  h.data.reserve(means.size());
  for (double m : means) h.data.push_back(float(m));
  return h;
}

ModelHandle MockPoseBackend::register_model(const ModelDescriptor& model) {
  if (!(model.output_divisor > 0.0) || !std::isfinite(model.output_divisor))
    raise(ErrorCode::invalid_model, "output divisor must be positive and finite");
  if (model.structure.empty())
    raise(ErrorCode::invalid_model, "model structure is empty");
  std::lock_guard lk(m_);
  auto it = id_by_digest_.find(model.digest);
  if (it != id_by_digest_.end()) return {it->second};
  std::uint64_t id = next_id_++;
  id_by_digest_.emplace(model.digest, id);
  divisor_by_id_.emplace(id, model.output_divisor);
  return {id};
}

Heatmap MockPoseBackend::forward(ModelHandle model, const Frame& frame) {
  double divisor;
  {
    std::lock_guard lk(m_);
    auto it = divisor_by_id_.find(model.id);
    if (it == divisor_by_id_.end())
      raise(ErrorCode::unknown_model, "handle was never issued by this backend");
    divisor = it->second;
  }
  if (frame.data.size() != frame.dims.elem_count())
    throw std::invalid_argument("frame data size disagrees with dims");
  auto pass = gate_.enter();
  return mockpose_forward(frame, divisor);
}

WorkloadKind workload_kind_from(std::string_view name) {
  if (name == "images") return WorkloadKind::images;
  if (name == "video") return WorkloadKind::video;
  raise(ErrorCode::bad_config, "unknown workload kind: " + std::string(name));
}

const char* to_string(WorkloadKind kind) noexcept {
  return kind == WorkloadKind::images ? "images" : "video";
}

BackendProfile preset_profile(std::string_view name, WorkloadKind kind,
                              double scale) {
  // per-frame seconds {images, video} and one-time model load seconds,
  // matching the measured systems these presets emulate
  struct Row {
    std::string_view name;
    double images, video, load;
  };
  static constexpr Row rows[] = {
      {"device", 2.0, 2.5, 6.43},
      {"edge", 0.91, 1.43, 5.937},
      {"cloud", 0.095, 0.111, 1.757},
      {"none", 0.0, 0.0, 0.0},
  };
  if (!(scale > 0.0)) raise(ErrorCode::bad_config, "scale factor must be > 0");
  for (const Row& r : rows) {
    if (r.name == name) {
      BackendProfile p;
      p.per_frame_compute_s =
          (kind == WorkloadKind::images ? r.images : r.video) * scale;
      p.model_load_s = r.load * scale;
      p.label = std::string(name);
      return p;
    }
  }
  raise(ErrorCode::bad_config, "unknown backend preset: " + std::string(name));
}

namespace {

class DelayBackend final : public Backend {
 public:
  DelayBackend(std::shared_ptr<Backend> inner, BackendProfile profile)
      : inner_(std::move(inner)), profile_(std::move(profile)) {}

  ModelHandle register_model(const ModelDescriptor& model) override {
    auto pass = gate_.enter();
    if (profile_.model_load_s > 0 && !loaded_.contains(model.digest)) {
      precise_sleep_for(profile_.model_load_s);
    }
    loaded_.insert(model.digest);
    return inner_->register_model(model);
  }

  Heatmap forward(ModelHandle model, const Frame& frame) override {
    auto pass = gate_.enter();
    auto deadline = MonoClock::now() + to_duration(profile_.per_frame_compute_s);
    Heatmap out = inner_->forward(model, frame);
    precise_sleep_until(deadline);
    return out;
  }

  std::string_view label() const override { return profile_.label; }

 private:
  std::shared_ptr<Backend> inner_;
  BackendProfile profile_;
  FifoGate gate_;
  std::set<Digest> loaded_;  // guarded by gate_
};

}  // namespace

std::shared_ptr<Backend> wrap_delay(std::shared_ptr<Backend> inner,
                                    BackendProfile profile) {
  return std::make_shared<DelayBackend>(std::move(inner), std::move(profile));
}

}  // namespace accelfwd::backend
