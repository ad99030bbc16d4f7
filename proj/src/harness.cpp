#include "accelfwd/harness.hpp"

#include <condition_variable>
#include <cstdio>
#include <cstring>
#include <deque>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include "accelfwd/client.hpp"
#include "accelfwd/clock.hpp"
#include "accelfwd/error.hpp"
#include "accelfwd/server.hpp"

namespace accelfwd::harness {

// ---- workload ----

std::string Workload::describe() const {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s:%u:%ux%u:seed%llu",
                backend::to_string(kind), count, width, height,
                static_cast<unsigned long long>(seed));
  return buf;
}

Frame gen_frame(const Workload& w, std::uint32_t index) {
  if (w.width < 1 || w.height < 1 || w.width > wire::kMaxSide ||
      w.height > wire::kMaxSide)
    raise(ErrorCode::bad_config, "workload resolution out of range");
  Frame f;
  f.dims = wire::Dims{1, 3, w.height, w.width};
  std::seed_seq seq{std::uint32_t(w.seed), std::uint32_t(w.seed >> 32), index};
  std::mt19937_64 rng(seq);
  f.data.resize(f.dims.elem_count());
  // top 24 bits of each draw, exactly representable in f32, uniform on [0,1)
  for (float& v : f.data)
    v = float(double(rng() >> 40) * (1.0 / 16777216.0));
  return f;
}

std::vector<Frame> gen_frames(const Workload& w) {
  std::vector<Frame> frames;
  frames.reserve(w.count);
  for (std::uint32_t i = 0; i < w.count; ++i) frames.push_back(gen_frame(w, i));
  return frames;
}

namespace {
constexpr char kWorkloadMagic[4] = {'A', 'F', 'W', '1'};
}

void write_workload_file(const std::filesystem::path& path, const Workload& w) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::io_failure, "cannot open " + path.string());
  out.write(kWorkloadMagic, 4);
  std::uint8_t kind = w.kind == WorkloadKind::video ? 1 : 0;
  out.write(reinterpret_cast<const char*>(&kind), 1);
  out.write(reinterpret_cast<const char*>(&w.count), 4);
  out.write(reinterpret_cast<const char*>(&w.width), 4);
  out.write(reinterpret_cast<const char*>(&w.height), 4);
  out.write(reinterpret_cast<const char*>(&w.seed), 8);
  for (std::uint32_t i = 0; i < w.count; ++i) {
    Frame f = gen_frame(w, i);
    out.write(reinterpret_cast<const char*>(f.data.data()), f.data.size() * 4);
  }
  if (!out) raise(ErrorCode::io_failure, "write failed: " + path.string());
}

LoadedWorkload read_workload_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::io_failure, "cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kWorkloadMagic, 4) != 0)
    raise(ErrorCode::io_failure, "not a workload file: " + path.string());
  LoadedWorkload out;
  std::uint8_t kind = 0;
  in.read(reinterpret_cast<char*>(&kind), 1);
  in.read(reinterpret_cast<char*>(&out.workload.count), 4);
  in.read(reinterpret_cast<char*>(&out.workload.width), 4);
  in.read(reinterpret_cast<char*>(&out.workload.height), 4);
  in.read(reinterpret_cast<char*>(&out.workload.seed), 8);
  if (!in) raise(ErrorCode::io_failure, "truncated workload header");
  out.workload.kind = kind ? WorkloadKind::video : WorkloadKind::images;
  if (out.workload.width < 1 || out.workload.height < 1 ||
      out.workload.width > wire::kMaxSide || out.workload.height > wire::kMaxSide)
    raise(ErrorCode::io_failure, "workload header out of range");
  std::uint64_t elems =
      3ull * out.workload.width * out.workload.height;
  out.frames.reserve(out.workload.count);
  for (std::uint32_t i = 0; i < out.workload.count; ++i) {
    Frame f;
    f.dims = wire::Dims{1, 3, out.workload.height, out.workload.width};
    f.data.resize(elems);
    in.read(reinterpret_cast<char*>(f.data.data()), std::streamsize(elems * 4));
    if (!in) raise(ErrorCode::io_failure, "truncated workload frame");
    out.frames.push_back(std::move(f));
  }
  return out;
}

// ---- link emulation ----

namespace {

class DelayedTransport final : public net::Transport {
 public:
  DelayedTransport(std::unique_ptr<net::Transport> inner, LinkProfile profile)
      : inner_(std::move(inner)), profile_(profile) {
    tx_thread_ = std::thread([this] { tx_loop(); });
    rx_thread_ = std::thread([this] { rx_loop(); });
  }

  ~DelayedTransport() override { close(); }

  void send_chunk(std::vector<std::uint8_t>&& data) override {
    std::lock_guard lk(tx_m_);
    if (tx_stop_) raise(ErrorCode::disconnected, "link closed");
    auto start = std::max(MonoClock::now(), tx_wire_end_);
    tx_wire_end_ = start + ser_time(data.size());
    tx_q_.push_back({tx_wire_end_ + delay(), std::move(data)});
    tx_cv_.notify_one();
  }

  std::vector<std::uint8_t> recv_chunk() override {
    std::unique_lock lk(rx_m_);
    auto ready = [&] { return rx_shutdown_ || !rx_q_.empty(); };
    if (timeout_s_ > 0) {
      if (!rx_cv_.wait_for(lk, std::chrono::duration<double>(timeout_s_), ready))
        raise(ErrorCode::timeout, "recv timed out");
    } else {
      rx_cv_.wait(lk, ready);
    }
    if (rx_shutdown_) return {};
    Delivery& front = rx_q_.front();
    if (front.error) {
      auto err = front.error;  // sticky: left in the queue
      lk.unlock();
      std::rethrow_exception(err);
    }
    if (front.eof) return {};  // sticky
    Delivery d = std::move(front);
    rx_q_.pop_front();
    lk.unlock();
    precise_sleep_until(d.deliver_at);
    return std::move(d.bytes);
  }

  void set_recv_timeout(double seconds) override {
    std::lock_guard lk(rx_m_);
    timeout_s_ = seconds;
  }

  void shutdown_read() override {
    {
      std::lock_guard lk(rx_m_);
      rx_shutdown_ = true;
      rx_cv_.notify_all();
    }
    inner_->shutdown_read();
  }

  void close() override {
    if (closed_.exchange(true)) return;
    {
      std::lock_guard lk(tx_m_);
      tx_stop_ = true;
      tx_cv_.notify_all();
    }
    if (tx_thread_.joinable()) tx_thread_.join();  // drains queued sends
    inner_->close();
    {
      std::lock_guard lk(rx_m_);
      rx_shutdown_ = true;
      rx_cv_.notify_all();
    }
    if (rx_thread_.joinable()) rx_thread_.join();
  }

 private:
  struct TxItem {
    MonoClock::time_point deliver_at;
    std::vector<std::uint8_t> bytes;
  };
  struct Delivery {
    MonoClock::time_point deliver_at{};
    std::vector<std::uint8_t> bytes;
    bool eof = false;
    std::exception_ptr error;
  };

  MonoClock::duration ser_time(std::size_t bytes) const {
    if (profile_.bandwidth_bytes_per_s <= 0) return {};
    return to_duration(double(bytes) / profile_.bandwidth_bytes_per_s);
  }
  MonoClock::duration delay() const { return to_duration(profile_.one_way_delay_s); }

  void tx_loop() {
    for (;;) {
      TxItem item;
      {
        std::unique_lock lk(tx_m_);
        tx_cv_.wait(lk, [&] { return tx_stop_ || !tx_q_.empty(); });
        if (tx_q_.empty()) return;  // stopped and drained
        item = std::move(tx_q_.front());
        tx_q_.pop_front();
      }
      precise_sleep_until(item.deliver_at);
      try {
        inner_->send_chunk(std::move(item.bytes));
      } catch (...) {
        return;  // peer gone; nothing downstream can be told
      }
    }
  }

  void rx_loop() {
    for (;;) {
      std::vector<std::uint8_t> chunk;
      std::exception_ptr err;
      try {
        chunk = inner_->recv_chunk();
      } catch (...) {
        err = std::current_exception();
      }
      auto available_at = MonoClock::now();
      std::lock_guard lk(rx_m_);
      if (err) {
        rx_q_.push_back({{}, {}, false, err});
        rx_cv_.notify_all();
        return;
      }
      if (chunk.empty()) {
        rx_q_.push_back({{}, {}, true, nullptr});
        rx_cv_.notify_all();
        return;
      }
      auto start = std::max(available_at, rx_wire_end_);
      rx_wire_end_ = start + ser_time(chunk.size());
      rx_q_.push_back({rx_wire_end_ + delay(), std::move(chunk), false, nullptr});
      rx_cv_.notify_all();
    }
  }

  std::unique_ptr<net::Transport> inner_;
  LinkProfile profile_;

  std::mutex tx_m_;
  std::condition_variable tx_cv_;
  std::deque<TxItem> tx_q_;
  MonoClock::time_point tx_wire_end_{};
  bool tx_stop_ = false;
  std::thread tx_thread_;

  std::mutex rx_m_;
  std::condition_variable rx_cv_;
  std::deque<Delivery> rx_q_;
  MonoClock::time_point rx_wire_end_{};
  bool rx_shutdown_ = false;
  double timeout_s_ = 0;
  std::thread rx_thread_;

  std::atomic_bool closed_{false};
};

// Bandwidth-only link. Wire occupancy is charged on the calling thread: the
// sender sleeps until its slot ends, the receiver until the bytes are off the
// wire. No pump threads, so the hot path pays no extra scheduling hops; the
// tradeoff is eager delivery (the peer may see a message during the sender's
// charge), which only a delayed link needs to model precisely.
class ThrottledTransport final : public net::Transport {
 public:
  ThrottledTransport(std::unique_ptr<net::Transport> inner, LinkProfile profile)
      : inner_(std::move(inner)), profile_(profile) {}

  ~ThrottledTransport() override { close(); }

  void send_chunk(std::vector<std::uint8_t>&& data) override {
    MonoClock::time_point wire_end;
    {
      std::lock_guard lk(tx_m_);
      auto start = std::max(MonoClock::now(), tx_wire_end_);
      tx_wire_end_ = start + ser_time(data.size());
      wire_end = tx_wire_end_;
    }
    inner_->send_chunk(std::move(data));
    precise_sleep_until(wire_end);
  }

  std::vector<std::uint8_t> recv_chunk() override {
    auto chunk = inner_->recv_chunk();
    if (chunk.empty()) return chunk;
    MonoClock::time_point wire_end;
    {
      std::lock_guard lk(rx_m_);
      auto start = std::max(MonoClock::now(), rx_wire_end_);
      rx_wire_end_ = start + ser_time(chunk.size());
      wire_end = rx_wire_end_;
    }
    precise_sleep_until(wire_end);
    return chunk;
  }

  void set_recv_timeout(double seconds) override {
    inner_->set_recv_timeout(seconds);
  }
  void shutdown_read() override { inner_->shutdown_read(); }
  void close() override { inner_->close(); }

 private:
  MonoClock::duration ser_time(std::size_t bytes) const {
    return to_duration(double(bytes) / profile_.bandwidth_bytes_per_s);
  }

  std::unique_ptr<net::Transport> inner_;
  LinkProfile profile_;
  std::mutex tx_m_;
  MonoClock::time_point tx_wire_end_{};
  std::mutex rx_m_;
  MonoClock::time_point rx_wire_end_{};
};

}  // namespace

std::string LinkProfile::describe() const {
  if (!label.empty() && label != "ideal") return label;
  if (is_ideal()) return "ideal";
  std::string out;
  char buf[32];
  if (one_way_delay_s > 0) {
    std::snprintf(buf, sizeof buf, "%gms", one_way_delay_s * 1e3);
    out += buf;
  }
  if (bandwidth_bytes_per_s > 0) {
    if (!out.empty()) out += ",";
    std::snprintf(buf, sizeof buf, "%gMBps", bandwidth_bytes_per_s / 1e6);
    out += buf;
  }
  return out;
}

std::unique_ptr<net::Transport> emulate_link(
    std::unique_ptr<net::Transport> transport, const LinkProfile& profile) {
  if (profile.is_ideal()) return transport;
  if (profile.one_way_delay_s <= 0)
    return std::make_unique<ThrottledTransport>(std::move(transport), profile);
  return std::make_unique<DelayedTransport>(std::move(transport), profile);
}

// ---- model synthesis ----

wire::ModelDescriptor synth_model(const ModelSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  auto blob = [&rng](std::size_t n) {
    std::vector<std::uint8_t> v(n);
    std::size_t i = 0;
    while (i < n) {
      std::uint64_t x = rng();
      for (int b = 0; b < 8 && i < n; ++b) v[i++] = std::uint8_t(x >> (8 * b));
    }
    return v;
  };
  auto structure = blob(spec.structure_bytes);
  auto weights = blob(spec.weights_bytes);
  return wire::make_model(spec.name, std::move(structure), std::move(weights),
                          spec.output_divisor);
}

// ---- run ----

namespace {

backend::BackendProfile resolve_profile(const RunConfig& c, WorkloadKind kind) {
  auto p = backend::preset_profile(c.preset, kind, c.scale_factor);
  if (c.gpu_s_override >= 0)
    p.per_frame_compute_s = c.gpu_s_override * c.scale_factor;
  if (c.load_s_override >= 0) p.model_load_s = c.load_s_override * c.scale_factor;
  return p;
}

bool spawns_server(const RunConfig& c) {
  return c.mode == prof::RunMode::offload &&
         (c.endpoint.empty() || c.endpoint == "in-process");
}

}  // namespace

prof::RunRecord run(const RunConfig& config) {
  Workload w = config.workload;
  std::vector<Frame> frames;
  if (config.workload_file) {
    auto loaded = read_workload_file(*config.workload_file);
    w = loaded.workload;
    frames = std::move(loaded.frames);
  } else {
    frames = gen_frames(w);
  }

  wire::ModelDescriptor model = synth_model(config.model);
  backend::BackendProfile profile = resolve_profile(config, w.kind);
  const bool offload = config.mode == prof::RunMode::offload;
  const double other_s = config.other_s_per_frame * config.scale_factor;

  prof::RunMeta meta;
  meta.label = config.label;
  meta.mode = config.mode;
  meta.host = "host";
  meta.workload = w.describe();
  meta.model = model.name;
  meta.output_divisor = model.output_divisor;
  meta.scale_factor = config.scale_factor;

  auto make_backend = [&]() -> std::shared_ptr<backend::Backend> {
    std::shared_ptr<backend::Backend> b =
        std::make_shared<backend::MockPoseBackend>();
    if (!profile.is_zero()) b = backend::wrap_delay(std::move(b), profile);
    return b;
  };

  std::unique_ptr<server::Server> srv;
  std::optional<client::Dispatcher> dispatcher;

  const auto run_t0 = MonoClock::now();
  if (!offload) {
    dispatcher.emplace(client::Dispatcher::local(make_backend()));
    meta.destination = "local:" + profile.label;
  } else {
    client::SessionConfig scfg;
    scfg.connect_timeout_s = config.connect_timeout_s;
    scfg.cycle_timeout_s = config.cycle_timeout_s;
    std::unique_ptr<net::Transport> t;
    if (spawns_server(config)) {
      srv = std::make_unique<server::Server>(make_backend());
      t = srv->connect_in_process();
      meta.destination = "in-process:" + profile.label;
    } else {
      t = net::connect_tcp(config.endpoint, config.connect_timeout_s);
      meta.destination = config.endpoint;
    }
    if (!config.link.is_ideal())
      meta.destination += "+" + config.link.describe();
    t = emulate_link(std::move(t), config.link);
    dispatcher.emplace(client::Dispatcher::remote(
        client::Session::over_transport(std::move(t), scfg)));
  }

  dispatcher->ensure_model(model);
  const double setup_s = seconds_between(run_t0, MonoClock::now());

  prof::RunRecord record(meta);
  std::optional<wire::Sha256> result_hash;
  if (config.digest_results) result_hash.emplace();

  const std::uint64_t expect_cycle_bytes =
      frames.empty() ? 0
                     : wire::transfer_size(frames[0].dims, model.output_divisor) +
                           wire::kCycleOverheadBytes;

  // The configured budgets act as a per-cycle floor. Real pipeline costs
  // (marshalling, copies, scheduling) count toward the budget rather than
  // stacking on top of it, so a run reproduces the configured regime on any
  // host fast enough to fit inside it and degrades honestly otherwise.
  double cycle_floor_s = profile.per_frame_compute_s + other_s;
  if (offload) {
    cycle_floor_s += 2 * config.link.one_way_delay_s;
    if (config.link.bandwidth_bytes_per_s > 0)
      cycle_floor_s +=
          double(expect_cycle_bytes) / config.link.bandwidth_bytes_per_s;
  }

  for (const Frame& frame : frames) {
    const auto cycle_t0 = MonoClock::now();
    auto [heat, timing] = dispatcher->forward(frame);
    if (cycle_floor_s > 0) precise_sleep_until(cycle_t0 + to_duration(cycle_floor_s));
    if (result_hash)
      result_hash->update(
          {reinterpret_cast<const std::uint8_t*>(heat.data.data()),
           heat.data.size() * 4});
    double cycle_total = seconds_between(cycle_t0, MonoClock::now());
    timing.other_s =
        std::max(0.0, cycle_total - timing.communication_s - timing.gpu_s);
    if (offload &&
        timing.bytes_sent + timing.bytes_received != expect_cycle_bytes)
      raise(ErrorCode::invariant_violation,
            "cycle moved " +
                std::to_string(timing.bytes_sent + timing.bytes_received) +
                " bytes, expected " + std::to_string(expect_cycle_bytes));
    record.record(timing);
  }

  const double wall_s = seconds_between(run_t0, MonoClock::now());
  if (result_hash) record.meta().result_digest = wire::hex(result_hash->finish());
  record.finalize(setup_s, wall_s);

  if (dispatcher->session()) dispatcher->session()->close();
  if (srv) {
    if (srv->model_count() != 1)
      raise(ErrorCode::invariant_violation,
            "expected exactly one model on the destination, found " +
                std::to_string(srv->model_count()));
    srv->shutdown();
  }

  if (auto b = record.breakdown(); !prof::decomposition_holds(b, 0.02)) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "time decomposition drifted beyond 2%%: gpu %.6f + comm %.6f "
                  "+ other %.6f + setup %.6f vs wall %.6f",
                  b.gpu_s, b.communication_s, b.other_s, b.setup_s, b.total_s);
    raise(ErrorCode::invariant_violation, msg);
  }

  return record;
}

ReportPaths emit_report(const prof::RunRecord& record,
                        const prof::RunRecord* baseline,
                        const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) raise(ErrorCode::io_failure, "cannot create " + out_dir.string());
  ReportPaths paths{out_dir / (record.meta().label + ".csv"),
                    out_dir / (record.meta().label + ".md")};
  {
    std::ofstream out(paths.csv, std::ios::trunc);
    if (!out) raise(ErrorCode::io_failure, "cannot open " + paths.csv.string());
    prof::write_cycle_csv(record, out);
    if (!out.flush()) raise(ErrorCode::io_failure, "write failed: " + paths.csv.string());
  }
  {
    std::ofstream out(paths.summary, std::ios::trunc);
    if (!out) raise(ErrorCode::io_failure, "cannot open " + paths.summary.string());
    prof::write_summary_markdown(record, baseline, out);
    if (!out.flush())
      raise(ErrorCode::io_failure, "write failed: " + paths.summary.string());
  }
  return paths;
}

// ---- config file ----

RunConfig load_run_config(const std::optional<std::filesystem::path>& file) {
  client::DispatchConfig dc = client::load_dispatch_config(file, true);
  RunConfig rc;
  rc.mode = dc.mode == client::DispatchConfig::Mode::remote
                ? prof::RunMode::offload
                : prof::RunMode::native;
  if (!dc.endpoint.empty()) rc.endpoint = dc.endpoint;
  rc.scale_factor = dc.scale_factor;
  rc.connect_timeout_s = dc.connect_timeout_s;
  rc.cycle_timeout_s = dc.cycle_timeout_s;
  if (!file) return rc;

  std::ifstream in(*file);
  if (!in) raise(ErrorCode::bad_config, "cannot open " + file->string());
  std::string line;
  auto trim = [](std::string s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return std::string();
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  };
  auto num = [](const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      raise(ErrorCode::bad_config, key + " is not a number: " + v);
    }
  };
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      raise(ErrorCode::bad_config, "expected key=value, got: " + line);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "mode" || key == "endpoint" || key == "scale_factor" ||
        key == "connect_timeout_s" || key == "cycle_timeout_s")
      continue;  // dispatch keys, already applied
    if (key == "workload_kind") rc.workload.kind = backend::workload_kind_from(value);
    else if (key == "frames") rc.workload.count = std::uint32_t(num(key, value));
    else if (key == "width") rc.workload.width = std::uint32_t(num(key, value));
    else if (key == "height") rc.workload.height = std::uint32_t(num(key, value));
    else if (key == "seed") rc.workload.seed = std::uint64_t(num(key, value));
    else if (key == "workload_file") rc.workload_file = value;
    else if (key == "preset") rc.preset = value;
    else if (key == "gpu_s") rc.gpu_s_override = num(key, value);
    else if (key == "load_s") rc.load_s_override = num(key, value);
    else if (key == "other_s") rc.other_s_per_frame = num(key, value);
    else if (key == "link_delay_s") rc.link.one_way_delay_s = num(key, value);
    else if (key == "link_bandwidth_Bps") rc.link.bandwidth_bytes_per_s = num(key, value);
    else if (key == "label") rc.label = value;
    else if (key == "model_name") rc.model.name = value;
    else if (key == "model_divisor") rc.model.output_divisor = num(key, value);
    else if (key == "model_structure_bytes") rc.model.structure_bytes = std::uint32_t(num(key, value));
    else if (key == "model_weights_bytes") rc.model.weights_bytes = std::uint32_t(num(key, value));
    else if (key == "model_seed") rc.model.seed = std::uint64_t(num(key, value));
    else if (key == "digest_results") {
      if (value == "true" || value == "1") rc.digest_results = true;
      else if (value == "false" || value == "0") rc.digest_results = false;
      else raise(ErrorCode::bad_config, "digest_results must be true or false");
    } else {
      raise(ErrorCode::bad_config, "unknown config key: " + key);
    }
  }
  return rc;
}

// ---- stress ----

StressResult run_stress(const StressConfig& config) {
  auto base = std::make_shared<backend::MockPoseBackend>();
  std::shared_ptr<backend::Backend> be = base;
  if (config.per_frame_compute_s > 0) {
    backend::BackendProfile p;
    p.per_frame_compute_s = config.per_frame_compute_s;
    p.label = "stress";
    be = backend::wrap_delay(be, p);
  }
  server::Server srv(be);
  std::uint16_t port = srv.listen("127.0.0.1", 0);
  std::string endpoint = "127.0.0.1:" + std::to_string(port);

  StressResult result;
  result.clients.resize(config.clients);
  std::vector<std::thread> threads;
  threads.reserve(config.clients);
  for (std::uint32_t k = 0; k < config.clients; ++k) {
    threads.emplace_back([&, k] {
      StressClientOutcome& out = result.clients[k];
      try {
        ModelSpec ms;
        ms.name = "stress-" + std::to_string(k);
        ms.output_divisor = 1.5 + 0.5 * k;
        ms.weights_bytes = 32 * 1024;
        ms.seed = 7000 + k;
        wire::ModelDescriptor model = synth_model(ms);

        client::Session session = client::Session::connect(endpoint);
        session.ensure_model(model);
        Workload w;
        w.kind = WorkloadKind::images;
        w.count = config.frames_per_client;
        w.width = config.width;
        w.height = config.height;
        w.seed = config.seed + 1000ull * k;
        for (std::uint32_t i = 0; i < config.frames_per_client; ++i) {
          Frame frame = gen_frame(w, i);
          auto [heat, timing] = session.forward(frame);
          backend::Heatmap oracle =
              backend::mockpose_forward(frame, ms.output_divisor);
          bool same = heat.data.size() == oracle.data.size() &&
                      std::memcmp(heat.data.data(), oracle.data.data(),
                                  heat.data.size() * 4) == 0;
          if (same) ++out.frames_ok;
          else ++out.mismatches;
        }
        session.close();
      } catch (const std::exception& e) {
        out.error = e.what();
      }
    });
  }
  for (auto& t : threads) t.join();

  auto log = srv.forward_log();
  result.executed = log.size();
  result.fifo_ok = true;
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (log[i].arrival_seq != i) {
      result.fifo_ok = false;
      break;
    }
  }
  result.models_cached = srv.model_count();
  srv.shutdown();

  result.passed = result.fifo_ok && result.models_cached == config.clients &&
                  result.executed ==
                      std::uint64_t(config.clients) * config.frames_per_client;
  for (const auto& c : result.clients)
    result.passed = result.passed && c.error.empty() && c.mismatches == 0 &&
                    c.frames_ok == config.frames_per_client;
  return result;
}

}  // namespace accelfwd::harness
