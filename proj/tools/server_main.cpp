#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <memory>
#include <string>

#include "accelfwd/backend.hpp"
#include "accelfwd/error.hpp"
#include "accelfwd/server.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Destination server for forwarded accelerator calls"};

  std::string bind_host = "127.0.0.1";
  std::uint16_t port = 0;
  std::string preset = "none";
  std::string kind = "video";
  double scale = 0.01;
  double gpu_s = -1, load_s = -1;
  std::uint32_t max_sessions = 16;
  std::uint64_t max_model_bytes = std::uint64_t(1) << 30;
  std::string log_path;

  app.add_option("--bind", bind_host, "Address to bind")->capture_default_str();
  app.add_option("--port", port, "Port (0 picks an ephemeral one)")
      ->capture_default_str();
  app.add_option("--preset", preset,
                 "Compute emulation preset: device|edge|cloud|none")
      ->capture_default_str();
  app.add_option("--kind", kind, "Workload kind the preset times: images|video")
      ->capture_default_str();
  app.add_option("--scale", scale, "Scale factor applied to emulated times")
      ->capture_default_str();
  app.add_option("--gpu-s", gpu_s,
                 "Override per-frame compute seconds (unscaled)");
  app.add_option("--load-s", load_s, "Override model load seconds (unscaled)");
  app.add_option("--max-sessions", max_sessions, "Concurrent session limit")
      ->capture_default_str();
  app.add_option("--max-model-bytes", max_model_bytes,
                 "Reject model uploads larger than this")
      ->capture_default_str();
  app.add_option("--log", log_path, "Append JSONL events to this file");

  CLI11_PARSE(app, argc, argv);

  // block before any thread exists so sigwait is the only consumer
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  try {
    auto profile = accelfwd::backend::preset_profile(
        preset, accelfwd::backend::workload_kind_from(kind), scale);
    if (gpu_s >= 0) profile.per_frame_compute_s = gpu_s * scale;
    if (load_s >= 0) profile.model_load_s = load_s * scale;

    std::shared_ptr<accelfwd::backend::Backend> be =
        std::make_shared<accelfwd::backend::MockPoseBackend>();
    if (!profile.is_zero()) be = accelfwd::backend::wrap_delay(be, profile);

    accelfwd::server::ServerConfig config;
    config.limits.max_sessions = max_sessions;
    config.limits.max_model_bytes = max_model_bytes;
    config.log_path = log_path;

    accelfwd::server::Server server(be, config);
    std::uint16_t bound = server.listen(bind_host, port);
    std::printf("listening on %s:%u (backend %s)\n", bind_host.c_str(), bound,
                std::string(be->label()).c_str());
    std::fflush(stdout);

    int sig = 0;
    sigwait(&set, &sig);

    std::printf("shutting down (signal %d)\n", sig);
    std::fflush(stdout);
    server.shutdown();
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
