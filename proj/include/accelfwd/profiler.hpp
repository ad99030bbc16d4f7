#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "accelfwd/client.hpp"

namespace accelfwd::prof {

enum class RunMode { native, offload };
const char* to_string(RunMode m) noexcept;

struct RunMeta {
  std::string label = "run";
  RunMode mode = RunMode::native;
  std::string host = "host";
  std::string destination = "local";
  std::string workload;   // e.g. "video:204:656x368:seed1"
  std::string model;
  double output_divisor = 0;
  double scale_factor = 1.0;
  std::string result_digest;  // hex, empty when digests were not kept
};

struct Breakdown {
  double gpu_s = 0;
  double communication_s = 0;
  double other_s = 0;
  double setup_s = 0;   // one-time: connect + model transfer + load
  double total_s = 0;   // wall clock of the whole run, setup included
};

// |gpu + communication + other + setup - total| <= tol_frac * total (with a
// small absolute floor for near-empty runs)
bool decomposition_holds(const Breakdown& b, double tol_frac,
                         double abs_floor_s = 1e-3);

class RunRecord {
 public:
  explicit RunRecord(RunMeta meta);

  void record(const client::CycleTiming& cycle);  // Error{run_closed} if finalized
  void finalize(double setup_s, double total_wall_s);

  bool finalized() const { return finalized_; }
  std::size_t frame_count() const { return cycles_.size(); }
  const std::vector<client::CycleTiming>& cycles() const { return cycles_; }
  const RunMeta& meta() const { return meta_; }
  RunMeta& meta() { return meta_; }

  Breakdown breakdown() const;  // requires finalized
  std::uint64_t bytes_sent() const { return bytes_sent_; }
  std::uint64_t bytes_received() const { return bytes_received_; }
  double setup_s() const { return setup_s_; }
  double total_wall_s() const { return total_wall_s_; }
  // wall minus setup; the denominator for throughput and speedup figures
  double processing_s() const { return total_wall_s_ - setup_s_; }

 private:
  RunMeta meta_;
  std::vector<client::CycleTiming> cycles_;
  double gpu_sum_ = 0, comm_sum_ = 0, other_sum_ = 0;
  std::uint64_t bytes_sent_ = 0, bytes_received_ = 0;
  double setup_s_ = 0, total_wall_s_ = 0;
  bool finalized_ = false;
};

// Exact rational so that chained and inverted comparisons stay consistent:
// speedup(a,b).value() * speedup(b,a).value() == 1.0 exactly, which a bare
// double quotient does not guarantee.
class Ratio {
 public:
  Ratio(double num, double den);
  double num() const { return num_; }
  double den() const { return den_; }
  double value() const { return num_ / den_; }
  Ratio inverse() const { return {den_, num_}; }

 private:
  double num_, den_;
};

// How many times faster candidate is than baseline.
// Throws Error{non_positive_time}.
Ratio speedup(double baseline_s, double candidate_s);
double fps(std::uint64_t frames, double elapsed_s);  // Error{non_positive_time}

// One row per cycle: index,gpu_s,communication_s,other_s,bytes_sent,
// bytes_received, preceded by '# key=value' metadata lines. Deterministic:
// re-emitting an identical record yields identical bytes.
void write_cycle_csv(const RunRecord& record, std::ostream& out);
RunRecord read_cycle_csv(std::istream& in);  // Error{io_failure} on bad input

void write_summary_markdown(const RunRecord& record, const RunRecord* baseline,
                            std::ostream& out);

}  // namespace accelfwd::prof
