#include "mqud/backend/throttle.hpp"

#include <algorithm>
#include <thread>

#include "mqud/util/error.hpp"

namespace mqud::backend {

Throttle::Throttle(int max_in_flight, double rate_per_sec, double burst)
    : max_in_flight_(max_in_flight),
      rate_(rate_per_sec),
      burst_(std::max(1.0, burst)),
      tokens_(std::max(1.0, burst)),
      refilled_(std::chrono::steady_clock::now()) {
  if (max_in_flight < 1) throw Error(ErrorKind::ConfigError, "max_in_flight must be >= 1");
}

Throttle::Slot Throttle::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
  ++in_flight_;
  peak_ = std::max(peak_, in_flight_);
  if (rate_ > 0) {
    for (;;) {
      const auto now = std::chrono::steady_clock::now();
      const double dt = std::chrono::duration<double>(now - refilled_).count();
      tokens_ = std::min(burst_, tokens_ + dt * rate_);
      refilled_ = now;
      if (tokens_ >= 1.0) break;
      const auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
      lock.unlock();
      std::this_thread::sleep_for(wait);
      lock.lock();
    }
    tokens_ -= 1.0;
  }
  return Slot(this);
}

void Throttle::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

int Throttle::in_flight() const {
  std::lock_guard lock(mu_);
  return in_flight_;
}

int Throttle::peak_in_flight() const {
  std::lock_guard lock(mu_);
  return peak_;
}

}  // namespace mqud::backend
