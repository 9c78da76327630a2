#pragma once

#include <array>
#include <cstdint>

namespace egm {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The stream is a pure function of (key, counter): block i of a stream with
/// seed s is philox(counter = i, key = s). Doubles are built from the top 53
/// bits of a 64-bit word, and normals use the Marsaglia polar method, so a
/// given seed yields the same sequence on any IEEE-754 platform whose libm
/// `log` is correctly rounded.
class Philox {
 public:
  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  /// Raw 4x32 block for an explicit counter; does not touch generator state.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key) noexcept;

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  /// Uniform on (lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal draw.
  double normal() noexcept;
  /// Gamma(shape, 1) by Marsaglia-Tsang.
  double gamma(double shape) noexcept;
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) noexcept;

 private:
  void refill() noexcept;

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derive an independent child seed from a root seed and a task index.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) noexcept;

}  // namespace egm
