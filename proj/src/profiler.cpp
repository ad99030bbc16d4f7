#include "accelfwd/profiler.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "accelfwd/error.hpp"

namespace accelfwd::prof {

const char* to_string(RunMode m) noexcept {
  return m == RunMode::native ? "native" : "offload";
}

bool decomposition_holds(const Breakdown& b, double tol_frac, double abs_floor_s) {
  double parts = b.gpu_s + b.communication_s + b.other_s + b.setup_s;
  double tol = std::max(tol_frac * b.total_s, abs_floor_s);
  return std::abs(parts - b.total_s) <= tol;
}

RunRecord::RunRecord(RunMeta meta) : meta_(std::move(meta)) {}

void RunRecord::record(const client::CycleTiming& cycle) {
  if (finalized_) raise(ErrorCode::run_closed, "record after finalize");
  cycles_.push_back(cycle);
  gpu_sum_ += cycle.gpu_s;
  comm_sum_ += cycle.communication_s;
  other_sum_ += cycle.other_s;
  bytes_sent_ += cycle.bytes_sent;
  bytes_received_ += cycle.bytes_received;
}

void RunRecord::finalize(double setup_s, double total_wall_s) {
  if (finalized_) raise(ErrorCode::run_closed, "finalize called twice");
  if (setup_s < 0 || total_wall_s < 0)
    raise(ErrorCode::non_positive_time, "negative time on finalize");
  setup_s_ = setup_s;
  total_wall_s_ = total_wall_s;
  finalized_ = true;
}

Breakdown RunRecord::breakdown() const {
  if (!finalized_)
    raise(ErrorCode::run_closed, "breakdown before finalize");
  return {gpu_sum_, comm_sum_, other_sum_, setup_s_, total_wall_s_};
}

Ratio::Ratio(double num, double den) : num_(num), den_(den) {
  if (!(num > 0) || !(den > 0))
    raise(ErrorCode::non_positive_time, "ratio terms must be positive");
}

Ratio speedup(double baseline_s, double candidate_s) {
  if (!(baseline_s > 0) || !(candidate_s > 0))
    raise(ErrorCode::non_positive_time, "speedup needs positive times");
  return {baseline_s, candidate_s};
}

double fps(std::uint64_t frames, double elapsed_s) {
  if (!(elapsed_s > 0))
    raise(ErrorCode::non_positive_time, "fps needs a positive duration");
  return double(frames) / elapsed_s;
}

// ---- reports ----

namespace {

std::string fmt_s(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

std::string fmt3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

void meta_line(std::ostream& out, const char* key, const std::string& value) {
  out << "# " << key << "=" << value << "\n";
}

}  // namespace

void write_cycle_csv(const RunRecord& record, std::ostream& out) {
  const RunMeta& m = record.meta();
  meta_line(out, "label", m.label);
  meta_line(out, "mode", to_string(m.mode));
  meta_line(out, "host", m.host);
  meta_line(out, "destination", m.destination);
  meta_line(out, "workload", m.workload);
  meta_line(out, "model", m.model);
  meta_line(out, "output_divisor", fmt_s(m.output_divisor));
  meta_line(out, "scale_factor", fmt_s(m.scale_factor));
  meta_line(out, "frames", std::to_string(record.frame_count()));
  meta_line(out, "setup_s", fmt_s(record.setup_s()));
  meta_line(out, "total_wall_s", fmt_s(record.total_wall_s()));
  meta_line(out, "bytes_sent", std::to_string(record.bytes_sent()));
  meta_line(out, "bytes_received", std::to_string(record.bytes_received()));
  meta_line(out, "result_digest", m.result_digest);
  out << "index,gpu_s,communication_s,other_s,bytes_sent,bytes_received\n";
  std::size_t i = 0;
  for (const auto& c : record.cycles()) {
    out << i++ << ',' << fmt_s(c.gpu_s) << ',' << fmt_s(c.communication_s) << ','
        << fmt_s(c.other_s) << ',' << c.bytes_sent << ',' << c.bytes_received
        << "\n";
  }
}

namespace {

[[noreturn]] void bad_csv(const std::string& why) {
  raise(ErrorCode::io_failure, "cannot parse record: " + why);
}

double parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) bad_csv("trailing junk in number " + s);
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    bad_csv("not a number: " + s);
  }
}

std::uint64_t parse_u64(const std::string& s) {
  try {
    std::size_t used = 0;
    std::uint64_t v = std::stoull(s, &used);
    if (used != s.size()) bad_csv("trailing junk in number " + s);
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    bad_csv("not a count: " + s);
  }
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

RunRecord read_cycle_csv(std::istream& in) {
  RunMeta meta;
  double setup_s = 0, total_wall_s = 0;
  std::string line;
  bool header_seen = false;
  std::vector<client::CycleTiming> cycles;
  std::size_t expect_index = 0;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto body = line.substr(1);
      auto eq = body.find('=');
      if (eq == std::string::npos) continue;
      auto key = body.substr(0, eq);
      key.erase(0, key.find_first_not_of(' '));
      auto value = body.substr(eq + 1);
      if (key == "label") meta.label = value;
      else if (key == "mode")
        meta.mode = value == "offload" ? RunMode::offload : RunMode::native;
      else if (key == "host") meta.host = value;
      else if (key == "destination") meta.destination = value;
      else if (key == "workload") meta.workload = value;
      else if (key == "model") meta.model = value;
      else if (key == "output_divisor") meta.output_divisor = parse_double(value);
      else if (key == "scale_factor") meta.scale_factor = parse_double(value);
      else if (key == "setup_s") setup_s = parse_double(value);
      else if (key == "total_wall_s") total_wall_s = parse_double(value);
      else if (key == "result_digest") meta.result_digest = value;
      // frames / bytes totals are re-derived from the rows
      continue;
    }
    if (!header_seen) {
      if (line != "index,gpu_s,communication_s,other_s,bytes_sent,bytes_received")
        bad_csv("unexpected header: " + line);
      header_seen = true;
      continue;
    }
    auto cols = split(line, ',');
    if (cols.size() != 6) bad_csv("expected 6 columns: " + line);
    if (parse_u64(cols[0]) != expect_index) bad_csv("rows out of order");
    ++expect_index;
    client::CycleTiming c;
    c.gpu_s = parse_double(cols[1]);
    c.communication_s = parse_double(cols[2]);
    c.other_s = parse_double(cols[3]);
    c.bytes_sent = parse_u64(cols[4]);
    c.bytes_received = parse_u64(cols[5]);
    cycles.push_back(c);
  }
  if (!header_seen) bad_csv("missing column header");

  RunRecord rec(meta);
  for (const auto& c : cycles) rec.record(c);
  rec.finalize(setup_s, total_wall_s);
  return rec;
}

void write_summary_markdown(const RunRecord& record, const RunRecord* baseline,
                            std::ostream& out) {
  const RunMeta& m = record.meta();
  Breakdown b = record.breakdown();
  std::size_t n = record.frame_count();
  out << "# Run summary: " << m.label << "\n\n";
  out << "- mode: " << to_string(m.mode) << "\n";
  out << "- host: " << m.host << "\n";
  out << "- destination: " << m.destination << "\n";
  out << "- workload: " << m.workload << "\n";
  out << "- model: " << m.model << " (output divisor " << fmt_s(m.output_divisor)
      << ")\n";
  out << "- scale factor: " << fmt_s(m.scale_factor) << "\n";
  out << "- frames: " << n << "\n";
  if (!m.result_digest.empty()) out << "- result digest: " << m.result_digest << "\n";
  out << "\n";

  out << "| phase | total s | per frame s |\n";
  out << "|---|---|---|\n";
  double nn = n ? double(n) : 1.0;
  out << "| gpu | " << fmt_s(b.gpu_s) << " | " << fmt_s(b.gpu_s / nn) << " |\n";
  out << "| communication | " << fmt_s(b.communication_s) << " | "
      << fmt_s(b.communication_s / nn) << " |\n";
  out << "| other | " << fmt_s(b.other_s) << " | " << fmt_s(b.other_s / nn)
      << " |\n";
  out << "| setup (one-time) | " << fmt_s(b.setup_s) << " | - |\n";
  out << "| total wall | " << fmt_s(b.total_s) << " | - |\n\n";

  out << "- bytes sent: " << record.bytes_sent()
      << ", received: " << record.bytes_received() << "\n";
  if (n > 0 && record.processing_s() > 0) {
    out << "- fps (setup excluded): " << fmt3(fps(n, record.processing_s()))
        << "\n";
  }
  if (baseline && baseline->processing_s() > 0 && record.processing_s() > 0) {
    Ratio s = speedup(baseline->processing_s(), record.processing_s());
    out << "- speedup vs " << baseline->meta().label << ": " << fmt3(s.value())
        << "x\n";
  }
}

}  // namespace accelfwd::prof
