#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bullysense {

// Error taxonomy. Each maps to one failure category from the public
// contracts; callers catch by type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct RowError : Error { using Error::Error; };
struct ArgumentError : Error { using Error::Error; };
struct StratificationError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct AssetError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };
struct DivergenceError : Error { using Error::Error; };
struct ArtifactError : Error { using Error::Error; };
struct ServiceError : Error { using Error::Error; };

enum class Label : int { kNeutral = 0, kInsulting = 1 };

inline int label_to_int(Label l) { return static_cast<int>(l); }

inline Label label_from_int(int v) {
  if (v != 0 && v != 1) throw ArgumentError("label must be 0 or 1, got " + std::to_string(v));
  return static_cast<Label>(v);
}

inline const char* label_name(Label l) {
  return l == Label::kNeutral ? "neutral" : "insulting";
}

// Deterministic RNG. All draws go through explicit arithmetic on
// mt19937_64 output so results are identical across standard libraries
// (std::uniform_* distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  uint64_t next_u64() {
    // splitmix64
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  uint64_t bounded(uint64_t n) {
    if (n == 0) throw ArgumentError("bounded(0)");
    uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Box-Muller; spare value cached.
  double normal(double mean, double stddev) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_double() - 1.0;
      v = 2.0 * next_double() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return mean + stddev * u * m;
  }

  // In-place Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<size_t> permutation(size_t n) {
    std::vector<size_t> p(n);
    for (size_t i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
  }

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// --- UTF-8 helpers -------------------------------------------------------

// Decodes the codepoint starting at s[i]; advances i. Invalid bytes are
// interpreted as Latin-1 so arbitrary input never throws.
uint32_t utf8_next(std::string_view s, size_t& i);
void utf8_append(std::string& out, uint32_t cp);
std::vector<uint32_t> utf8_decode(std::string_view s);
size_t utf8_length(std::string_view s);

// --- misc ----------------------------------------------------------------

std::string to_hex(const unsigned char* data, size_t n);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

// Current time as ISO-8601 UTC, e.g. "2024-05-01T12:00:00Z".
std::string now_utc_iso8601();

// Compact UTC stamp "YYYYMMDDhhmmssZ" <-> unix seconds.
std::string format_compact_utc(int64_t unix_seconds);
std::optional<int64_t> parse_compact_utc(std::string_view s);

inline constexpr const char* kToolVersion = "bullysense 0.1.0";

}  // namespace bullysense
