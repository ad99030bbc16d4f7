#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <thread>

#include "accelfwd/channel.hpp"
#include "accelfwd/clock.hpp"
#include "accelfwd/error.hpp"
#include "accelfwd/harness.hpp"

using namespace accelfwd;
using namespace accelfwd::harness;

namespace {

std::filesystem::path temp_file(const char* name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove(p);
  return p;
}

struct EnvGuard {
  explicit EnvGuard(
      std::initializer_list<std::pair<const char*, const char*>> kv)
      : keys_() {
    for (auto [k, v] : kv) {
      keys_.push_back(k);
      ::setenv(k, v, 1);
    }
  }
  ~EnvGuard() {
    for (const char* k : keys_) ::unsetenv(k);
  }
  std::vector<const char*> keys_;
};

}  // namespace

TEST_CASE("workload frames are pure functions of seed and index") {
  Workload w;
  w.count = 4;
  w.width = 32;
  w.height = 16;
  w.seed = 99;

  auto a = gen_frame(w, 2);
  auto b = gen_frame(w, 2);
  CHECK(a.data == b.data);
  CHECK(a.dims == wire::Dims{1, 3, 16, 32});
  CHECK(a.data.size() == 3u * 16 * 32);

  CHECK(gen_frame(w, 3).data != a.data);
  Workload other = w;
  other.seed = 100;
  CHECK(gen_frame(other, 2).data != a.data);

  for (float v : a.data) {
    CHECK(v >= 0.0f);
    CHECK(v < 1.0f);
  }

  auto frames = gen_frames(w);
  REQUIRE(frames.size() == 4);
  CHECK(frames[2].data == a.data);
}

TEST_CASE("workload description") {
  Workload w;
  w.kind = backend::WorkloadKind::images;
  w.count = 64;
  w.width = 224;
  w.height = 224;
  w.seed = 1;
  CHECK(w.describe() == "images:64:224x224:seed1");
  w.kind = backend::WorkloadKind::video;
  w.count = 204;
  w.width = 656;
  w.height = 368;
  w.seed = 7;
  CHECK(w.describe() == "video:204:656x368:seed7");
}

TEST_CASE("workload files round trip") {
  Workload w;
  w.kind = backend::WorkloadKind::video;
  w.count = 3;
  w.width = 24;
  w.height = 12;
  w.seed = 5;
  auto path = temp_file("accelfwd_workload_rt.bin");
  write_workload_file(path, w);

  auto loaded = read_workload_file(path);
  CHECK(loaded.workload.kind == w.kind);
  CHECK(loaded.workload.count == w.count);
  CHECK(loaded.workload.width == w.width);
  CHECK(loaded.workload.height == w.height);
  CHECK(loaded.workload.seed == w.seed);
  REQUIRE(loaded.frames.size() == 3);
  for (std::uint32_t i = 0; i < 3; ++i)
    CHECK(loaded.frames[i].data == gen_frame(w, i).data);
  std::filesystem::remove(path);
}

TEST_CASE("workload reader rejects foreign and truncated files") {
  auto path = temp_file("accelfwd_workload_bad.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a workload";
  }
  try {
    read_workload_file(path);
    FAIL("expected io_failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io_failure);
  }

  Workload w;
  w.count = 2;
  w.width = 8;
  w.height = 8;
  write_workload_file(path, w);
  auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full - 10);
  try {
    read_workload_file(path);
    FAIL("expected io_failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io_failure);
  }
  std::filesystem::remove(path);
}

TEST_CASE("synthesized models are deterministic in the spec") {
  ModelSpec spec;
  auto a = synth_model(spec);
  auto b = synth_model(spec);
  CHECK(a.digest == b.digest);
  CHECK(a.structure.size() == spec.structure_bytes);
  CHECK(a.weights.size() == spec.weights_bytes);
  CHECK(a.output_divisor == spec.output_divisor);
  CHECK(a.digest ==
        wire::model_digest(a.structure, a.weights, a.output_divisor));

  ModelSpec reseeded = spec;
  reseeded.seed = 2;
  CHECK(synth_model(reseeded).digest != a.digest);
  ModelSpec redivided = spec;
  redivided.output_divisor = 2.0;
  CHECK(synth_model(redivided).digest != a.digest);
}

TEST_CASE("ideal link profiles pass the transport through untouched") {
  LinkProfile ideal;
  CHECK(ideal.is_ideal());
  CHECK(ideal.describe() == "ideal");
  auto pipe = net::make_pipe();
  auto* raw = pipe.first.get();
  auto out = emulate_link(std::move(pipe.first), ideal);
  CHECK(out.get() == raw);
}

TEST_CASE("link profile labels") {
  LinkProfile p;
  p.one_way_delay_s = 0.012;
  CHECK(p.describe() == "12ms");
  p.bandwidth_bytes_per_s = 5e8;
  CHECK(p.describe() == "12ms,500MBps");
  p.one_way_delay_s = 0;
  CHECK(p.describe() == "500MBps");
  p.label = "wan";
  CHECK(p.describe() == "wan");
}

TEST_CASE("emulated one-way delay is charged once per burst") {
  LinkProfile lp;
  lp.one_way_delay_s = 0.05;

  auto pipe = net::make_pipe();
  auto delayed = emulate_link(std::move(pipe.first), lp);
  net::MessageChannel sender(std::move(delayed));
  net::MessageChannel receiver(std::move(pipe.second));
  receiver.set_recv_timeout(5.0);

  Stopwatch watch;
  sender.send(wire::FrameSize{1});
  sender.send(wire::FrameSize{2});
  sender.send(wire::FrameSize{3});
  for (std::uint32_t want = 1; want <= 3; ++want)
    CHECK(std::get<wire::FrameSize>(receiver.recv()).elem_count == want);
  double elapsed = watch.elapsed_s();

  // one delay for the whole back-to-back burst, not one per message
  CHECK(elapsed >= 0.05);
  CHECK(elapsed < 0.15);
}

TEST_CASE("emulated bandwidth serializes large payloads") {
  LinkProfile lp;
  lp.bandwidth_bytes_per_s = 1e6;

  auto pipe = net::make_pipe();
  auto delayed = emulate_link(std::move(pipe.first), lp);
  net::MessageChannel sender(std::move(delayed));
  net::MessageChannel receiver(std::move(pipe.second));
  receiver.set_recv_timeout(5.0);

  wire::FrameData fd;
  fd.data.assign(25000, 1.0f);  // 100 KB of floats -> 0.1 s on the wire
  fd.elem_count = 25000;

  Stopwatch watch;
  sender.send(wire::Message(fd));
  receiver.recv();
  double elapsed = watch.elapsed_s();
  CHECK(elapsed >= 0.1);
  CHECK(elapsed < 0.3);
}

TEST_CASE("delayed transports forward both directions and shut down cleanly") {
  LinkProfile lp;
  lp.one_way_delay_s = 0.01;
  auto pipe = net::make_pipe();
  auto near = emulate_link(std::move(pipe.first), lp);
  auto far = std::move(pipe.second);

  std::thread echo([&] {
    auto chunk = far->recv_chunk();
    far->send_chunk(std::move(chunk));
  });

  near->send_chunk({1, 2, 3});
  auto back = near->recv_chunk();
  echo.join();
  CHECK(back == std::vector<std::uint8_t>{1, 2, 3});
  near->close();  // pumps must join without hanging
}

TEST_CASE("native run matches the emulated compute budget") {
  RunConfig cfg;
  cfg.mode = prof::RunMode::native;
  cfg.preset = "cloud";
  cfg.workload.kind = backend::WorkloadKind::images;
  cfg.workload.count = 10;
  cfg.workload.width = 64;
  cfg.workload.height = 64;
  cfg.scale_factor = 0.01;
  cfg.label = "native-smoke";

  auto rec = run(cfg);
  REQUIRE(rec.frame_count() == 10);
  auto b = rec.breakdown();
  // cloud images: 0.095 s/frame scaled by 0.01
  CHECK(b.gpu_s == doctest::Approx(10 * 0.00095).epsilon(0.25));
  CHECK(rec.setup_s() >= 0.01757);  // model load dominates setup
  CHECK(b.communication_s == 0.0);
  CHECK(rec.bytes_sent() == 0);
  CHECK(rec.meta().destination == "local:cloud");
  CHECK(prof::decomposition_holds(b, 0.02));
}

TEST_CASE("offload run keeps the per-cycle byte account") {
  RunConfig cfg;
  cfg.mode = prof::RunMode::offload;
  cfg.preset = "none";
  cfg.workload.count = 6;
  cfg.workload.width = 100;
  cfg.workload.height = 100;
  cfg.model.output_divisor = 3.368421;
  cfg.label = "offload-smoke";

  auto rec = run(cfg);
  REQUIRE(rec.frame_count() == 6);
  // 30000 elements per frame: the fixed point pinned at the wire level
  CHECK(rec.bytes_sent() + rec.bytes_received() == 6u * (155636 + 36));
  CHECK(rec.meta().destination == "in-process:none");
  CHECK(rec.meta().mode == prof::RunMode::offload);
  for (const auto& c : rec.cycles()) CHECK(c.bytes_sent > 0);
}

TEST_CASE("offload run over an emulated link works end to end") {
  RunConfig cfg;
  cfg.mode = prof::RunMode::offload;
  cfg.preset = "none";
  cfg.workload.count = 4;
  cfg.workload.width = 64;
  cfg.workload.height = 64;
  cfg.link.one_way_delay_s = 0.02;
  cfg.label = "linked";

  auto rec = run(cfg);
  auto b = rec.breakdown();
  // every cycle pays two one-way delays in the communication phase (minus the
  // reported compute clamped off it, which is tiny under the none preset)
  CHECK(b.communication_s >= 4 * 2 * 0.02 - 0.005);
  CHECK(rec.meta().destination == "in-process:none+20ms");
}

TEST_CASE("digest_results produces a stable digest across modes") {
  RunConfig cfg;
  cfg.preset = "none";
  cfg.workload.count = 5;
  cfg.workload.width = 48;
  cfg.workload.height = 24;
  cfg.digest_results = true;

  cfg.mode = prof::RunMode::native;
  auto native = run(cfg);
  cfg.mode = prof::RunMode::offload;
  auto offload = run(cfg);

  REQUIRE_FALSE(native.meta().result_digest.empty());
  CHECK(native.meta().result_digest == offload.meta().result_digest);

  // a different workload seed must change the results
  cfg.workload.seed = 2;
  cfg.mode = prof::RunMode::native;
  CHECK(run(cfg).meta().result_digest != native.meta().result_digest);
}

TEST_CASE("reports land on disk with csv and summary") {
  RunConfig cfg;
  cfg.preset = "none";
  cfg.workload.count = 3;
  cfg.workload.width = 16;
  cfg.workload.height = 16;
  cfg.label = "report-smoke";

  auto rec = run(cfg);
  auto dir = std::filesystem::temp_directory_path() / "accelfwd_report_test";
  std::filesystem::remove_all(dir);
  auto paths = emit_report(rec, nullptr, dir);
  CHECK(paths.csv.filename() == "report-smoke.csv");
  CHECK(paths.summary.filename() == "report-smoke.md");

  std::ifstream csv(paths.csv);
  auto back = prof::read_cycle_csv(csv);
  CHECK(back.frame_count() == 3);
  CHECK(back.meta().label == "report-smoke");

  std::ifstream md(paths.summary);
  std::string text((std::istreambuf_iterator<char>(md)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("| gpu | ") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("run config files parse and reject unknown keys") {
  auto path = temp_file("accelfwd_run_cfg.txt");
  {
    std::ofstream out(path);
    out << "# comment line\n"
        << "mode = remote\n"
        << "endpoint = 10.0.0.2:9000\n"
        << "scale_factor = 0.25\n"
        << "workload_kind = video\n"
        << "frames = 17\n"
        << "width = 320\n"
        << "height = 200\n"
        << "seed = 11\n"
        << "preset = edge\n"
        << "gpu_s = 0.5\n"
        << "other_s = 0.125\n"
        << "link_delay_s = 0.003\n"
        << "link_bandwidth_Bps = 1e9\n"
        << "label = from-file\n"
        << "model_divisor = 2.5\n"
        << "digest_results = true\n";
  }
  auto rc = load_run_config(path);
  CHECK(rc.mode == prof::RunMode::offload);
  CHECK(rc.endpoint == "10.0.0.2:9000");
  CHECK(rc.scale_factor == 0.25);
  CHECK(rc.workload.kind == backend::WorkloadKind::video);
  CHECK(rc.workload.count == 17);
  CHECK(rc.workload.width == 320);
  CHECK(rc.workload.height == 200);
  CHECK(rc.workload.seed == 11);
  CHECK(rc.preset == "edge");
  CHECK(rc.gpu_s_override == 0.5);
  CHECK(rc.other_s_per_frame == 0.125);
  CHECK(rc.link.one_way_delay_s == 0.003);
  CHECK(rc.link.bandwidth_bytes_per_s == 1e9);
  CHECK(rc.label == "from-file");
  CHECK(rc.model.output_divisor == 2.5);
  CHECK(rc.digest_results);

  {
    std::ofstream out(path);
    out << "frmaes = 17\n";
  }
  try {
    load_run_config(path);
    FAIL("expected bad_config");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::bad_config);
  }

  {
    std::ofstream out(path);
    out << "frames = plenty\n";
  }
  CHECK_THROWS_AS(load_run_config(path), Error);
  std::filesystem::remove(path);
}

TEST_CASE("environment overrides beat the config file") {
  auto path = temp_file("accelfwd_env_cfg.txt");
  {
    std::ofstream out(path);
    out << "mode = local\nscale_factor = 0.5\n";
  }
  EnvGuard env({{"ACCELFWD_MODE", "remote"},
                {"ACCELFWD_ENDPOINT", "192.168.1.9:7000"},
                {"ACCELFWD_SCALE_FACTOR", "0.125"}});
  auto rc = load_run_config(path);
  CHECK(rc.mode == prof::RunMode::offload);
  CHECK(rc.endpoint == "192.168.1.9:7000");
  CHECK(rc.scale_factor == 0.125);
  std::filesystem::remove(path);
}

TEST_CASE("dispatch config defaults and validation") {
  auto cfg = client::load_dispatch_config(std::nullopt);
  CHECK(cfg.mode == client::DispatchConfig::Mode::local);
  CHECK(cfg.scale_factor == 0.01);
  CHECK(cfg.connect_timeout_s == 5.0);
  CHECK(cfg.cycle_timeout_s == 60.0);

  EnvGuard env({{"ACCELFWD_MODE", "sideways"}});
  CHECK_THROWS_AS(client::load_dispatch_config(std::nullopt), Error);
}

TEST_CASE("stress run verifies results, fifo order and the model cache") {
  StressConfig cfg;
  cfg.clients = 3;
  cfg.frames_per_client = 12;
  cfg.width = 32;
  cfg.height = 32;
  cfg.per_frame_compute_s = 0.0002;

  auto result = run_stress(cfg);
  CHECK(result.passed);
  CHECK(result.fifo_ok);
  CHECK(result.executed == 36);
  CHECK(result.models_cached == 3);
  REQUIRE(result.clients.size() == 3);
  for (const auto& c : result.clients) {
    CHECK(c.frames_ok == 12);
    CHECK(c.mismatches == 0);
    CHECK(c.error.empty());
  }
}
