#pragma once

#include <chrono>

namespace accelfwd {

using MonoClock = std::chrono::steady_clock;

inline double seconds_between(MonoClock::time_point from, MonoClock::time_point to) {
  return std::chrono::duration<double>(to - from).count();
}

inline MonoClock::duration to_duration(double seconds) {
  return std::chrono::duration_cast<MonoClock::duration>(
      std::chrono::duration<double>(seconds));
}

// sleep_until with a short spin tail; plain sleep_until overshoots by up to
// ~0.5 ms on this class of kernel, which is the same order as the emulated
// per-frame times the harness works with.
void precise_sleep_until(MonoClock::time_point target);
void precise_sleep_for(double seconds);

class Stopwatch {
 public:
  Stopwatch() : start_(MonoClock::now()) {}
  double elapsed_s() const { return seconds_between(start_, MonoClock::now()); }
  void reset() { start_ = MonoClock::now(); }

 private:
  MonoClock::time_point start_;
};

}  // namespace accelfwd
