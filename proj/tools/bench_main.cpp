#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "accelfwd/error.hpp"
#include "accelfwd/harness.hpp"

namespace {

using namespace accelfwd;

int cmd_gen(const std::string& out, const harness::Workload& w) {
  harness::write_workload_file(out, w);
  std::cout << "wrote " << w.describe() << " to " << out << "\n";
  return 0;
}

int cmd_run(const harness::RunConfig& config, const std::string& out_dir,
            const std::string& baseline_csv) {
  prof::RunRecord record = harness::run(config);

  std::optional<prof::RunRecord> baseline;
  if (!baseline_csv.empty()) {
    std::ifstream in(baseline_csv);
    if (!in) raise(ErrorCode::io_failure, "cannot open " + baseline_csv);
    baseline.emplace(prof::read_cycle_csv(in));
  }

  prof::write_summary_markdown(record, baseline ? &*baseline : nullptr,
                               std::cout);
  if (!out_dir.empty()) {
    auto paths =
        harness::emit_report(record, baseline ? &*baseline : nullptr, out_dir);
    std::cout << "\nrecord: " << paths.csv.string()
              << "\nsummary: " << paths.summary.string() << "\n";
  }
  return 0;
}

int cmd_compare(const std::string& baseline_csv, const std::string& candidate_csv,
                const std::string& out_path) {
  auto load = [](const std::string& p) {
    std::ifstream in(p);
    if (!in) raise(ErrorCode::io_failure, "cannot open " + p);
    return prof::read_cycle_csv(in);
  };
  prof::RunRecord baseline = load(baseline_csv);
  prof::RunRecord candidate = load(candidate_csv);

  std::ostringstream md;
  prof::write_summary_markdown(candidate, &baseline, md);
  md << "\n---\n\n";
  prof::write_summary_markdown(baseline, nullptr, md);

  if (out_path.empty()) {
    std::cout << md.str();
  } else {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) raise(ErrorCode::io_failure, "cannot open " + out_path);
    out << md.str();
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_stress(const harness::StressConfig& config) {
  harness::StressResult r = harness::run_stress(config);
  std::cout << "clients: " << r.clients.size()
            << ", forwards executed: " << r.executed
            << ", models cached: " << r.models_cached
            << ", fifo order: " << (r.fifo_ok ? "ok" : "VIOLATED") << "\n";
  for (std::size_t i = 0; i < r.clients.size(); ++i) {
    const auto& c = r.clients[i];
    std::cout << "  client " << i << ": " << c.frames_ok << " ok, "
              << c.mismatches << " mismatched"
              << (c.error.empty() ? "" : (", error: " + c.error)) << "\n";
  }
  std::cout << (r.passed ? "PASS" : "FAIL") << "\n";
  return r.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark harness for the forwarding runtime"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Write a deterministic workload file");
  std::string gen_out = "workload.afw";
  std::string gen_kind = "images";
  harness::Workload gen_w;
  gen->add_option("--out", gen_out, "Output path")->capture_default_str();
  gen->add_option("--kind", gen_kind, "images|video")->capture_default_str();
  gen->add_option("--frames", gen_w.count, "Frame count")->capture_default_str();
  gen->add_option("--width", gen_w.width, "Frame width")->capture_default_str();
  gen->add_option("--height", gen_w.height, "Frame height")->capture_default_str();
  gen->add_option("--seed", gen_w.seed, "Generator seed")->capture_default_str();

  // run
  auto* run = app.add_subcommand("run", "Execute a workload and report timings");
  std::string run_config_path;
  std::string run_mode, run_kind, run_endpoint, run_preset, run_label;
  std::string run_workload_file, run_out_dir, run_baseline;
  harness::Workload run_w;
  double run_scale = -1, run_gpu = -2, run_load = -2, run_other = -1;
  double run_delay = -1, run_bw = -1;
  double run_divisor = -1;
  bool run_digest = false;
  run->add_option("--config", run_config_path, "key=value config file");
  run->add_option("--mode", run_mode, "native|offload");
  run->add_option("--endpoint", run_endpoint,
                  "host:port, or in-process to spawn the destination");
  run->add_option("--preset", run_preset, "device|edge|cloud|none");
  run->add_option("--kind", run_kind, "images|video");
  run->add_option("--frames", run_w.count, "Frame count");
  run->add_option("--width", run_w.width, "Frame width");
  run->add_option("--height", run_w.height, "Frame height");
  run->add_option("--seed", run_w.seed, "Generator seed");
  run->add_option("--workload", run_workload_file, "Workload file from gen");
  run->add_option("--scale", run_scale, "Scale factor for emulated times");
  run->add_option("--gpu-s", run_gpu, "Per-frame compute override (unscaled)");
  run->add_option("--load-s", run_load, "Model load override (unscaled)");
  run->add_option("--other-s", run_other, "Host-side per-frame work (unscaled)");
  run->add_option("--link-delay-s", run_delay, "One-way link delay");
  run->add_option("--link-bandwidth", run_bw, "Link bandwidth, bytes/s");
  run->add_option("--divisor", run_divisor, "Model output divisor");
  run->add_option("--label", run_label, "Run label for reports");
  run->add_flag("--digest-results", run_digest,
                "Hash returned heatmaps into the record");
  run->add_option("--out", run_out_dir, "Directory for record + summary files");
  run->add_option("--baseline", run_baseline,
                  "Record CSV to compute speedup against");

  // compare
  auto* cmp = app.add_subcommand("compare", "Compare two record CSVs");
  std::string cmp_a, cmp_b, cmp_out;
  cmp->add_option("baseline", cmp_a, "Baseline record CSV")->required();
  cmp->add_option("candidate", cmp_b, "Candidate record CSV")->required();
  cmp->add_option("--out", cmp_out, "Write markdown here instead of stdout");

  // stress
  auto* stress = app.add_subcommand("stress", "Concurrent-session isolation check");
  harness::StressConfig sc;
  stress->add_option("--clients", sc.clients, "Concurrent sessions")
      ->capture_default_str();
  stress->add_option("--frames", sc.frames_per_client, "Frames per client")
      ->capture_default_str();
  stress->add_option("--width", sc.width, "Frame width")->capture_default_str();
  stress->add_option("--height", sc.height, "Frame height")->capture_default_str();
  stress->add_option("--seed", sc.seed, "Workload seed")->capture_default_str();
  stress->add_option("--compute-s", sc.per_frame_compute_s,
                     "Destination per-frame compute")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      gen_w.kind = backend::workload_kind_from(gen_kind);
      return cmd_gen(gen_out, gen_w);
    }
    if (run->parsed()) {
      harness::RunConfig rc = harness::load_run_config(
          run_config_path.empty()
              ? std::nullopt
              : std::optional<std::filesystem::path>(run_config_path));
      if (!run_mode.empty()) {
        if (run_mode == "native") rc.mode = prof::RunMode::native;
        else if (run_mode == "offload") rc.mode = prof::RunMode::offload;
        else raise(ErrorCode::bad_config, "mode must be native or offload");
      }
      if (!run_endpoint.empty()) rc.endpoint = run_endpoint;
      if (!run_preset.empty()) rc.preset = run_preset;
      if (!run_kind.empty())
        rc.workload.kind = backend::workload_kind_from(run_kind);
      if (run->count("--frames")) rc.workload.count = run_w.count;
      if (run->count("--width")) rc.workload.width = run_w.width;
      if (run->count("--height")) rc.workload.height = run_w.height;
      if (run->count("--seed")) rc.workload.seed = run_w.seed;
      if (!run_workload_file.empty()) rc.workload_file = run_workload_file;
      if (run_scale > 0) rc.scale_factor = run_scale;
      if (run_gpu > -2) rc.gpu_s_override = run_gpu;
      if (run_load > -2) rc.load_s_override = run_load;
      if (run_other >= 0) rc.other_s_per_frame = run_other;
      if (run_delay >= 0) rc.link.one_way_delay_s = run_delay;
      if (run_bw > 0) rc.link.bandwidth_bytes_per_s = run_bw;
      if (run_divisor > 0) rc.model.output_divisor = run_divisor;
      if (!run_label.empty()) rc.label = run_label;
      if (run_digest) rc.digest_results = true;
      return cmd_run(rc, run_out_dir, run_baseline);
    }
    if (cmp->parsed()) return cmd_compare(cmp_a, cmp_b, cmp_out);
    if (stress->parsed()) return cmd_stress(sc);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
