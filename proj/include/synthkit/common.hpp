#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace synthkit {

using Real = double;

// Error taxonomy; the CLI maps these onto exit codes (config 2, data 3,
// filter exhaustion 4, numerical 5).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown by filter_generate when the attempt budget runs out before the
/// per-class quota is met. Carries acceptance diagnostics.
struct MaxAttemptsExceeded : std::runtime_error {
  int label = -1;
  long attempts = 0;
  long accepted = 0;
  long shortfall = 0;

  MaxAttemptsExceeded(int label_, long attempts_, long accepted_, long shortfall_)
      : std::runtime_error(format_message(label_, attempts_, accepted_, shortfall_)),
        label(label_),
        attempts(attempts_),
        accepted(accepted_),
        shortfall(shortfall_) {}

  double acceptance_rate() const {
    return attempts == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(attempts);
  }

 private:
  static std::string format_message(int label, long attempts, long accepted, long shortfall) {
    char buf[192];
    double rate = attempts == 0 ? 0.0 : 100.0 * static_cast<double>(accepted) / static_cast<double>(attempts);
    std::snprintf(buf, sizeof(buf),
                  "realism filter exhausted for class %d: accepted %ld of %ld candidates "
                  "(%.2f%%), %ld short of quota",
                  label, accepted, attempts, rate, shortfall);
    return buf;
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic child seed from a base seed and up to three stream tags.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t s = splitmix64(base ^ 0x243f6a8885a308d3ULL);
  s = splitmix64(s ^ a);
  s = splitmix64(s ^ b);
  s = splitmix64(s ^ c);
  return s;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Shortest text form that round-trips a double exactly (17 significant digits).
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string to_hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace synthkit
