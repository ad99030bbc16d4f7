#include "accelfwd/clock.hpp"

#include <thread>

namespace accelfwd {

namespace {
constexpr auto kSpinWindow = std::chrono::microseconds(250);
}

void precise_sleep_until(MonoClock::time_point target) {
  auto now = MonoClock::now();
  if (target - now > kSpinWindow) {
    std::this_thread::sleep_until(target - kSpinWindow);
    now = MonoClock::now();
  }
  while (now < target) {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_ia32_pause();
#endif
    now = MonoClock::now();
  }
}

void precise_sleep_for(double seconds) {
  if (seconds <= 0) return;
  precise_sleep_until(MonoClock::now() + to_duration(seconds));
}

}  // namespace accelfwd
