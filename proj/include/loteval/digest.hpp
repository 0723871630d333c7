#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace loteval {

// SHA-256 of a byte string, lowercase hex.
std::string sha256_hex(std::string_view bytes);

// SHA-256 of a file's contents, lowercase hex. Throws std::runtime_error if unreadable.
std::string sha256_file_hex(const std::string& path);

// FNV-1a 64-bit. Used wherever a cross-platform stable string hash is needed;
// std::hash is implementation-defined and must not leak into any persisted value.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// SplitMix64 stream, the project's only RNG. Output sequence is fixed by the
// reference algorithm, so shuffles are identical on every platform.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept;

  // Uniform-ish draw in [0, n); n must be > 0.
  std::uint64_t next_below(std::uint64_t n) noexcept { return next() % n; }

 private:
  std::uint64_t state_;
};

// Length-prefixed field encoder for digest inputs. Every field is emitted as
// "<name>\n<len>:<bytes>\n" in the order the call site fixes, so the resulting
// byte string (and any hash of it) is stable across platforms and versions.
class CanonicalEncoder {
 public:
  CanonicalEncoder& field(std::string_view name, std::string_view value);
  CanonicalEncoder& field(std::string_view name, long long value);
  CanonicalEncoder& field(std::string_view name, double value);
  CanonicalEncoder& field_list(std::string_view name, const std::vector<std::string>& values);

  const std::string& bytes() const noexcept { return buf_; }
  std::string sha256() const { return sha256_hex(buf_); }

 private:
  std::string buf_;
};

// Shortest round-trip decimal form of a double ("0", "0.5", "1e-07", ...).
std::string canonical_double(double value);

}  // namespace loteval
