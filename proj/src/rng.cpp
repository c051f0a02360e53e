#include "hybridlv/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace hybridlv {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RngStream::RngStream(std::uint64_t stream_id)
    : id_(stream_id), engine_(splitmix64(stream_id)) {}

std::uint64_t RngStream::raw() { return engine_(); }

double RngStream::uniform01() {
  // 53-bit mantissa, shifted into (0, 1].
  return static_cast<double>((raw() >> 11) + 1) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform01();
  const double u2 = uniform01();
  const double mag = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * std::numbers::pi * u2;
  spare_ = mag * std::sin(ang);
  has_spare_ = true;
  return mag * std::cos(ang);
}

double RngStream::exponential(double rate) {
  if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
  return -std::log(uniform01()) / rate;
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) return 0;
  // Rejection keeps the draw unbiased for any n.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r = raw();
  while (r >= limit) r = raw();
  return r % n;
}

RngStream RngStream::substream(std::uint64_t tag) const {
  const std::uint64_t child =
      splitmix64(id_ ^ (0x632BE59BD9B4E019ULL * (tag + 1)));
  return RngStream(child);
}

}  // namespace hybridlv
