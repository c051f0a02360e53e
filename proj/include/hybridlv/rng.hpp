#pragma once

#include <cstdint>
#include <random>

namespace hybridlv {

// Finalizer from the splitmix64 generator; bijective on 64-bit words.
std::uint64_t splitmix64(std::uint64_t z);

// Deterministic random stream with explicit identity. Streams are addressed
// by a 64-bit id; the id is scrambled before seeding so that related ids
// (seed ^ 0, seed ^ 1, ...) give decorrelated engines. Normal deviates use
// Box-Muller rather than std::normal_distribution, whose output sequence is
// implementation-defined; every draw here is reproducible across platforms.
class RngStream {
 public:
  explicit RngStream(std::uint64_t stream_id);

  std::uint64_t id() const { return id_; }

  // Next engine word.
  std::uint64_t raw();

  // Uniform on (0, 1]; never returns 0, so log(u) is always finite.
  double uniform01();

  // Standard normal deviate.
  double normal();

  // Exponential with the given rate; rate <= 0 yields +infinity.
  double exponential(double rate);

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  // Child stream derived from this stream's identity (not its current
  // state), so the same (id, tag) pair always names the same stream.
  RngStream substream(std::uint64_t tag) const;

 private:
  std::uint64_t id_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hybridlv
