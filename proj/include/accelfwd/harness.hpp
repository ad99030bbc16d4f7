#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "accelfwd/backend.hpp"
#include "accelfwd/profiler.hpp"
#include "accelfwd/transport.hpp"

namespace accelfwd::harness {

using backend::Frame;
using backend::WorkloadKind;

// Synthetic input description. Frame i is a pure function of (seed, i): values
// are mt19937_64 draws mapped to [0, 1) with 24 bits of mantissa, dims
// (1, 3, height, width).
struct Workload {
  WorkloadKind kind = WorkloadKind::images;
  std::uint32_t count = 1;
  std::uint32_t width = 224;
  std::uint32_t height = 224;
  std::uint64_t seed = 1;

  std::string describe() const;  // "images:64:224x224:seed1"
};

Frame gen_frame(const Workload& w, std::uint32_t index);
std::vector<Frame> gen_frames(const Workload& w);

// Binary workload container: header + raw f32 frames.
void write_workload_file(const std::filesystem::path& path, const Workload& w);
struct LoadedWorkload {
  Workload workload;
  std::vector<Frame> frames;
};
LoadedWorkload read_workload_file(const std::filesystem::path& path);

// Virtual link in front of a transport. Each direction owns a serialization
// clock: a message occupies the wire for bytes/bandwidth seconds after the
// previous one leaves, then arrives one_way_delay_s later. Back-to-back
// messages therefore pipeline: a cycle pays two one-way delays plus total
// bytes over bandwidth, not a delay per message.
struct LinkProfile {
  double one_way_delay_s = 0;
  double bandwidth_bytes_per_s = 0;  // 0: unlimited
  std::string label = "ideal";

  bool is_ideal() const {
    return one_way_delay_s <= 0 && bandwidth_bytes_per_s <= 0;
  }

  // label, or one synthesized from the parameters when it was never set
  std::string describe() const;
};

// Identity when the profile is ideal (the same transport comes back).
std::unique_ptr<net::Transport> emulate_link(
    std::unique_ptr<net::Transport> transport, const LinkProfile& profile);

// Deterministic stand-in model: pseudo-random structure/weights of the given
// sizes, digest included.
struct ModelSpec {
  std::string name = "pose-est";
  std::uint32_t structure_bytes = 4096;
  std::uint32_t weights_bytes = 1u << 20;
  double output_divisor = 3.368421;
  std::uint64_t seed = 1;
};
wire::ModelDescriptor synth_model(const ModelSpec& spec);

struct RunConfig {
  prof::RunMode mode = prof::RunMode::native;
  Workload workload;
  std::optional<std::filesystem::path> workload_file;  // overrides `workload`
  ModelSpec model;

  std::string preset = "cloud";     // device | edge | cloud | none
  double gpu_s_override = -1;       // unscaled s/frame; < 0 keeps the preset
  double load_s_override = -1;      // unscaled s; < 0 keeps the preset
  double other_s_per_frame = 0;     // unscaled host-side work emulated per frame
  double scale_factor = 0.01;

  // offload only; "in-process" (or empty) spawns a server inside the run
  std::string endpoint = "in-process";
  LinkProfile link;
  double connect_timeout_s = 5.0;
  double cycle_timeout_s = 60.0;

  bool digest_results = false;  // hash returned heatmaps into the record
  std::string label = "run";
};

// Executes the workload and enforces the run invariants (time decomposition
// within 2%, per-cycle byte account in offload mode, single model transfer).
// Throws Error{invariant_violation} when one fails.
prof::RunRecord run(const RunConfig& config);

struct ReportPaths {
  std::filesystem::path csv;
  std::filesystem::path summary;
};
ReportPaths emit_report(const prof::RunRecord& record,
                        const prof::RunRecord* baseline,
                        const std::filesystem::path& out_dir);

// Builds a RunConfig from a flat key=value file plus the dispatch environment
// overrides (ACCELFWD_*). Unknown keys are rejected.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file);

struct StressConfig {
  std::uint32_t clients = 4;
  std::uint32_t frames_per_client = 50;
  std::uint32_t width = 64;
  std::uint32_t height = 64;
  std::uint64_t seed = 100;
  double per_frame_compute_s = 0.0005;  // destination-side emulated compute
};

struct StressClientOutcome {
  std::uint64_t frames_ok = 0;
  std::uint64_t mismatches = 0;
  std::string error;  // empty when the client finished cleanly
};

struct StressResult {
  bool passed = false;
  bool fifo_ok = false;          // executions followed queue arrival order
  std::uint64_t executed = 0;    // forwards the server performed
  std::size_t models_cached = 0; // distinct models the server ended up holding
  std::vector<StressClientOutcome> clients;
};

// Concurrent sessions against one server, each checking its results against a
// local oracle of its own model.
StressResult run_stress(const StressConfig& config);

}  // namespace accelfwd::harness
