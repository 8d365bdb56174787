#pragma once

#include <chrono>
#include <condition_variable>
#include <mutex>

namespace mqud::backend {

/// Bounds concurrent backend calls and their rate. A slot is held for the
/// duration of a call; calls start no faster than `rate_per_sec` on average
/// with bursts up to `burst` (token bucket). rate_per_sec <= 0 disables the
/// bucket.
class Throttle {
 public:
  Throttle(int max_in_flight, double rate_per_sec, double burst);

  class Slot {
   public:
    explicit Slot(Throttle* t) : t_(t) {}
    Slot(Slot&& o) noexcept : t_(o.t_) { o.t_ = nullptr; }
    Slot(const Slot&) = delete;
    ~Slot() {
      if (t_) t_->release();
    }

   private:
    Throttle* t_;
  };

  Slot acquire();
  int in_flight() const;
  int peak_in_flight() const;

 private:
  void release();

  const int max_in_flight_;
  const double rate_;
  const double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point refilled_;
  int in_flight_ = 0;
  int peak_ = 0;
  mutable std::mutex mu_;
  std::condition_variable cv_;
};

}  // namespace mqud::backend
