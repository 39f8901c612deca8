#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace rotdiff {

/// Deterministic random source. Every random choice in the library flows
/// through this type so that seeded runs are bit-reproducible: mt19937_64
/// output is pinned by the standard, and the uniform/normal transforms below
/// avoid library-specific distribution internals.
class RngState {
 public:
  explicit RngState(uint64_t seed) : gen_(seed) {}

  /// Independent stream derived from (seed, stream). The pair is scrambled
  /// through splitmix64 so nearby stream ids start decorrelated engines.
  static RngState derive(uint64_t seed, uint64_t stream);

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller. Consumes exactly two uniforms per call;
  /// no cached spare, so the draw count per call is fixed.
  double normal();

  double normal(double mean, double std) { return mean + std * normal(); }

  /// Uniform integer in [lo, hi] inclusive. Modulo reduction; the bias is
  /// below 2^-40 for any range used here.
  int uniform_int(int lo, int hi);

  /// Engine state as text (standard-defined format), for checkpoint resume.
  std::string state_string() const;
  void set_state_string(const std::string& s);

 private:
  std::mt19937_64 gen_;
};

}  // namespace rotdiff
