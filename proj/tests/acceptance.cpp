// End-to-end acceptance checks. Each criterion prints one line:
//   [PASS] <n> <name>: <measured values and the pinned band>
// Tolerances are pinned here, not configurable.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "accelfwd/backend.hpp"
#include "accelfwd/client.hpp"
#include "accelfwd/harness.hpp"
#include "accelfwd/profiler.hpp"
#include "accelfwd/server.hpp"
#include "accelfwd/wire.hpp"

using namespace accelfwd;

namespace {

void report(int id, const char* title, bool ok, const std::string& detail) {
  std::printf("[%s] %2d %s: %s\n", ok ? "PASS" : "FAIL", id, title,
              detail.c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(ok, "criterion ", id, " (", title, "): ", detail);
}

template <class Fn>
void criterion(int id, const char* title, Fn&& fn) {
  bool ok = false;
  std::string detail;
  try {
    std::tie(ok, detail) = fn();
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  report(id, title, ok, detail);
}

bool within(double got, double center, double frac) {
  return std::abs(got - center) <= frac * center;
}

std::uint64_t upload_frame_bytes(const wire::ModelDescriptor& m) {
  return 5 + 32 + 8 + 4 + m.name.size() + 4 + m.structure.size() + 8 +
         m.weights.size();
}

// random valid message for a tag index (order of the Tag enum)
wire::Message random_message(int tag_index, std::mt19937_64& rng) {
  auto u32 = [&](std::uint32_t lo, std::uint32_t hi) {
    return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng);
  };
  auto floats = [&](std::size_t n) {
    std::uniform_real_distribution<float> d(-1e6f, 1e6f);
    std::vector<float> v(n);
    for (auto& x : v) x = d(rng);
    return v;
  };
  auto bytes = [&](std::size_t n) {
    std::vector<std::uint8_t> v(n);
    for (auto& b : v) b = std::uint8_t(rng());
    return v;
  };
  auto digest = [&] {
    wire::Digest d;
    for (auto& b : d) b = std::uint8_t(rng());
    return d;
  };
  auto text = [&](std::size_t n) {
    std::string s(n, ' ');
    for (auto& c : s) c = char('a' + rng() % 26);
    return s;
  };
  switch (tag_index) {
    case 0: return wire::Hello{u32(0, ~0u)};
    case 1: return wire::HelloAck{u32(0, ~0u)};
    case 2: return wire::FrameSize{u32(1, ~0u)};
    case 3: return wire::Resolution{u32(1, 65535), u32(1, 65535)};
    case 4: {
      auto v = floats(u32(1, 64));
      return wire::FrameData{std::uint32_t(v.size()), std::move(v)};
    }
    case 5: {
      auto v = floats(u32(1, 64));
      double c = std::uniform_real_distribution<double>(0.0, 100.0)(rng);
      return wire::ForwardResult{c, std::uint32_t(v.size()), std::move(v)};
    }
    case 6: return wire::ModelCheck{digest()};
    case 7: return wire::ModelNeeded{digest()};
    case 8: {
      wire::ModelUpload u;
      u.digest = digest();
      u.output_divisor =
          std::uniform_real_distribution<double>(0.125, 16.0)(rng);
      u.name = text(u32(0, 16));
      u.structure = bytes(u32(1, 32));
      u.weights = bytes(u32(0, 64));
      return u;
    }
    case 9: return wire::ModelAck{digest()};
    default: return wire::ErrorMsg{u32(0, ~0u), text(u32(0, 32))};
  }
}

}  // namespace

TEST_CASE("acceptance criteria") {
  // 1: per-frame transfer volume law at the reference video resolution
  criterion(1, "transfer size law", [] {
    wire::Dims d{1, 3, 368, 656};
    const std::uint64_t got = wire::transfer_size(d, 3.368421);
    const double rel = std::abs(double(got) - 3.75e6) / 3.75e6;
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "got %llu bytes (expect 3756924 exactly; %.3f%% from 3.75 MB, "
                  "cap 0.2%%)",
                  (unsigned long long)got, rel * 100);
    return std::pair{got == 3756924ull && rel <= 0.002, std::string(buf)};
  });

  // 2: forwarding is invisible to the caller: remote == local bit for bit
  criterion(2, "transparency over loopback", [] {
    auto shared = std::make_shared<backend::MockPoseBackend>();
    server::Server srv(shared);
    std::uint16_t port = srv.listen("127.0.0.1", 0);
    const std::string endpoint = "127.0.0.1:" + std::to_string(port);

    harness::Workload w{backend::WorkloadKind::images, 100, 96, 64, 42};
    auto frames = harness::gen_frames(w);

    const double divisors[] = {2.0, 3.368421, 1.5};
    std::uint64_t checked = 0, mismatched = 0;
    for (int mi = 0; mi < 3; ++mi) {
      harness::ModelSpec spec;
      spec.name = "acc-model-" + std::to_string(mi);
      spec.output_divisor = divisors[mi];
      spec.seed = 100 + mi;
      auto model = harness::synth_model(spec);

      auto local = client::Dispatcher::local(
          std::make_shared<backend::MockPoseBackend>());
      auto remote =
          client::Dispatcher::remote(client::Session::connect(endpoint));
      local.ensure_model(model);
      remote.ensure_model(model);
      for (const auto& f : frames) {
        auto [lh, lt] = local.forward(f);
        auto [rh, rt] = remote.forward(f);
        ++checked;
        if (lh.data.size() != rh.data.size() ||
            std::memcmp(lh.data.data(), rh.data.data(),
                        lh.data.size() * sizeof(float)) != 0)
          ++mismatched;
      }
      remote.session()->close();
    }
    bool models_ok = srv.model_count() == 3;
    srv.shutdown();
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "%llu/%llu heatmaps bit-identical across 3 models via tcp "
                  "(%llu mismatched)",
                  (unsigned long long)(checked - mismatched),
                  (unsigned long long)checked, (unsigned long long)mismatched);
    return std::pair{checked == 300 && mismatched == 0 && models_ok,
                     std::string(buf)};
  });

  // 3: model negotiation byte counts, asserted exactly from the framing
  criterion(3, "model cache efficiency", [] {
    server::Server srv(std::make_shared<backend::MockPoseBackend>());
    harness::ModelSpec spec;
    spec.weights_bytes = 1u << 20;
    auto model = harness::synth_model(spec);

    auto s1 = client::Session::over_transport(srv.connect_in_process());
    auto cold = s1.ensure_model(model);
    const std::uint64_t cold_sent = 37 + upload_frame_bytes(model);

    auto s2 = client::Session::over_transport(srv.connect_in_process());
    auto warm = s2.ensure_model(model);

    bool ok = !cold.cache_hit && cold.bytes_sent == cold_sent &&
              cold.bytes_sent >= (1u << 20) && cold.bytes_received == 74 &&
              warm.cache_hit && warm.bytes_sent == 37 &&
              warm.bytes_received == 37 && srv.model_count() == 1;
    s1.close();
    s2.close();
    srv.shutdown();
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "cold sent %llu (expect %llu, >= 1 MiB), warm sent %llu "
                  "(expect 37, payload 32 <= 64)",
                  (unsigned long long)cold.bytes_sent,
                  (unsigned long long)cold_sent,
                  (unsigned long long)warm.bytes_sent);
    return std::pair{ok, std::string(buf)};
  });

  // 4: codec round trips and rejection classes
  criterion(4, "codec soundness", [] {
    std::mt19937_64 rng(0x5eedc0dec);
    std::uint64_t trips = 0, bad = 0;
    for (int tag = 0; tag < 11; ++tag) {
      for (int i = 0; i < 1000; ++i) {
        auto m = random_message(tag, rng);
        auto enc = wire::encode(m);
        auto dec = wire::decode(enc);
        ++trips;
        if (dec.status != wire::DecodeStatus::ok ||
            dec.consumed != enc.size() || wire::encode(*dec.message) != enc) {
          ++bad;
          continue;
        }
      }
      // rejection classes on one representative frame per tag
      auto enc = wire::encode(random_message(tag, rng));
      for (std::size_t cut = 0; cut < enc.size(); ++cut) {
        auto r = wire::decode({enc.data(), cut});
        if (r.status != wire::DecodeStatus::incomplete) ++bad;
      }
      for (std::uint8_t t : {std::uint8_t(0x00), std::uint8_t(0x0c),
                             std::uint8_t(0xff)}) {
        auto corrupt = enc;
        corrupt[4] = t;
        if (wire::decode(corrupt).status != wire::DecodeStatus::unknown_tag)
          ++bad;
      }
      {
        // shrink the declared length without shrinking the payload
        auto corrupt = enc;
        std::uint32_t len;
        std::memcpy(&len, corrupt.data(), 4);
        len -= 1;
        if (len >= 1) {
          std::memcpy(corrupt.data(), &len, 4);
          corrupt.pop_back();
          auto st = wire::decode(corrupt).status;
          if (st != wire::DecodeStatus::malformed_payload) ++bad;
        }
      }
    }
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "%llu round trips bit-exact, prefixes incomplete, corrupt "
                  "tag/length rejected (%llu failures)",
                  (unsigned long long)trips, (unsigned long long)bad);
    return std::pair{trips == 11000 && bad == 0, std::string(buf)};
  });

  // 5: emulated device-to-cloud speedup on the 204-frame video workload
  criterion(5, "offload speedup", [] {
    harness::RunConfig native;
    native.mode = prof::RunMode::native;
    native.preset = "device";
    native.workload = {backend::WorkloadKind::video, 204, 656, 368, 7};
    native.scale_factor = 0.01;
    native.label = "native-device";
    auto nrec = harness::run(native);

    harness::RunConfig off = native;
    off.mode = prof::RunMode::offload;
    off.preset = "none";
    off.gpu_s_override = 0.10;        // scaled: 1.0 ms/frame
    off.other_s_per_frame = 0.18;     // scaled: 1.8 ms/frame
    const std::uint64_t cycle_bytes =
        wire::transfer_size({1, 3, 368, 656}, off.model.output_divisor) +
        wire::kCycleOverheadBytes;
    // serialization budget 0.5 ms/cycle at scale 0.01
    off.link.bandwidth_bytes_per_s = double(cycle_bytes) / 0.0005;
    off.label = "offload-cloud";
    auto orec = harness::run(off);

    const double sp =
        prof::speedup(nrec.processing_s(), orec.processing_s()).value();
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "measured %.2fx (native %.2f ms/f, offload %.2f ms/f; band "
                  "7.58 +- 10%% = 6.82..8.34)",
                  sp, 1e3 * nrec.processing_s() / 204,
                  1e3 * orec.processing_s() / 204);
    return std::pair{within(sp, 7.58, 0.10), std::string(buf)};
  });

  // 6: the three-way split plus setup accounts for the whole wall clock
  criterion(6, "time decomposition", [] {
    auto check = [](harness::RunConfig c) {
      auto rec = harness::run(c);  // run() itself enforces the 2% invariant
      return prof::decomposition_holds(rec.breakdown(), 0.02);
    };
    harness::RunConfig a;
    a.preset = "device";
    a.workload = {backend::WorkloadKind::images, 16, 224, 224, 5};
    a.label = "decomp-native";

    harness::RunConfig b;
    b.mode = prof::RunMode::offload;
    b.preset = "none";
    b.workload = {backend::WorkloadKind::images, 10, 64, 64, 5};
    b.label = "decomp-offload";

    harness::RunConfig c = b;
    c.link.one_way_delay_s = 0.005;
    c.label = "decomp-linked";

    harness::RunConfig d = b;
    d.gpu_s_override = 0.05;
    d.other_s_per_frame = 0.03;
    d.label = "decomp-budgeted";

    int ok = int(check(a)) + int(check(b)) + int(check(c)) + int(check(d));
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "%d/4 representative runs within 2%% (native, offload, "
                  "delayed link, budgeted); enforced on every run",
                  ok);
    return std::pair{ok == 4, std::string(buf)};
  });

  // 7: throughput bands for the device and cloud presets
  criterion(7, "fps bands", [] {
    harness::RunConfig dev;
    dev.preset = "device";
    // small frames: per-frame validation and copy cost must stay well inside
    // the 0.95 ms cloud floor for the band to measure emulation, not the host
    dev.workload = {backend::WorkloadKind::images, 64, 96, 96, 11};
    dev.label = "fps-device";
    auto drec = harness::run(dev);
    double dfps = prof::fps(64, drec.processing_s());

    // cloud cycles are sub-millisecond, so one host stall skews a short run;
    // measure longer runs and take the median of three
    double samples[3];
    for (auto& s : samples) {
      harness::RunConfig cloud = dev;
      cloud.preset = "cloud";
      cloud.workload.count = 256;
      cloud.label = "fps-cloud";
      s = prof::fps(256, harness::run(cloud).processing_s());
    }
    std::sort(samples, samples + 3);
    double cfps = samples[1];

    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "device %.1f fps (band 45..55), cloud median %.1f of "
                  "[%.0f %.0f %.0f] (band 945..1155)",
                  dfps, cfps, samples[0], samples[1], samples[2]);
    return std::pair{within(dfps, 50.0, 0.10) && within(cfps, 1050.0, 0.10),
                     std::string(buf)};
  });

  // 8: concurrent clients share one destination without cross-talk
  criterion(8, "concurrency isolation", [] {
    harness::StressConfig sc;  // 4 clients x 50 frames over tcp
    auto r = harness::run_stress(sc);
    std::uint64_t ok_frames = 0, mismatches = 0;
    bool clean = true;
    for (const auto& c : r.clients) {
      ok_frames += c.frames_ok;
      mismatches += c.mismatches;
      if (!c.error.empty()) clean = false;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "%llu/200 frames oracle-exact, %llu contaminated, fifo %s, "
                  "%zu models cached",
                  (unsigned long long)ok_frames,
                  (unsigned long long)mismatches,
                  r.fifo_ok ? "preserved" : "VIOLATED", r.models_cached);
    return std::pair{r.passed && r.fifo_ok && clean && r.executed == 200 &&
                         ok_frames == 200 && mismatches == 0 &&
                         r.models_cached == 4,
                     std::string(buf)};
  });

  // 9: segment means against an independent brute-force oracle
  criterion(9, "mockpose oracle equivalence", [] {
    std::mt19937_64 rng(0x0bace1e5);
    int exact = 0;
    for (int i = 0; i < 500; ++i) {
      std::uint64_t e =
          std::uniform_int_distribution<std::uint64_t>(1, 1000)(rng);
      double c = e == 1 ? 1.0
                        : std::uniform_real_distribution<double>(
                              1.0, double(e))(rng);
      std::vector<float> data(e);
      std::uniform_real_distribution<float> df(-8.0f, 8.0f);
      for (auto& x : data) x = df(rng);

      auto got = backend::segment_means(data, c);
      const std::uint64_t k = wire::output_elems(e, c);
      if (got.size() != k) continue;
      const double width = double(e) / double(k);
      bool all_eq = true;
      std::uint64_t lo = 0;
      for (std::uint64_t j = 0; j < k; ++j) {
        std::uint64_t hi =
            (j + 1 == k) ? e : std::uint64_t(double(j + 1) * width);
        double sum = 0.0;
        for (std::uint64_t x = lo; x < hi; ++x) sum += double(data[x]);
        double want = sum / double(hi - lo);
        if (got[j] != want) all_eq = false;  // exact, pre-cast doubles
        lo = hi;
      }
      if (all_eq && lo == e) ++exact;
    }
    char buf[96];
    std::snprintf(buf, sizeof buf,
                  "%d/500 random (E, c) instances match exactly in double",
                  exact);
    return std::pair{exact == 500, std::string(buf)};
  });

  // 10: native wall time doubles with the batch
  criterion(10, "batch scaling", [] {
    double wall[3];
    std::uint32_t counts[3] = {64, 128, 256};
    for (int i = 0; i < 3; ++i) {
      harness::RunConfig c;
      c.preset = "device";
      c.workload = {backend::WorkloadKind::images, counts[i], 656, 368, 21};
      c.label = "batch-" + std::to_string(counts[i]);
      wall[i] = harness::run(c).breakdown().total_s;
    }
    double r1 = wall[1] / wall[0], r2 = wall[2] / wall[1];
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "64->128 ratio %.3f, 128->256 ratio %.3f (band 1.8..2.2)",
                  r1, r2);
    return std::pair{within(r1, 2.0, 0.10) && within(r2, 2.0, 0.10),
                     std::string(buf)};
  });
}
