#include "loteval/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <fstream>
#include <stdexcept>

namespace loteval {

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
  unsigned int out_len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &out_len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: EVP_Digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string s;
  s.reserve(out_len * 2);
  for (unsigned int i = 0; i < out_len; ++i) {
    s.push_back(hex[out[i] >> 4]);
    s.push_back(hex[out[i] & 0x0f]);
  }
  return s;
}

std::string sha256_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("sha256: cannot open " + path);
  }
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("sha256: EVP_MD_CTX_new failed");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = in.gcount();
    if (got > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<size_t>(got));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
  unsigned int out_len = 0;
  EVP_DigestFinal_ex(ctx, out.data(), &out_len);
  EVP_MD_CTX_free(ctx);
  static constexpr char hex[] = "0123456789abcdef";
  std::string s;
  s.reserve(out_len * 2);
  for (unsigned int i = 0; i < out_len; ++i) {
    s.push_back(hex[out[i] >> 4]);
    s.push_back(hex[out[i] & 0x0f]);
  }
  return s;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t SplitMix64::next() noexcept {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

void append_sized(std::string& buf, std::string_view value) {
  buf += std::to_string(value.size());
  buf += ':';
  buf += value;
  buf += '\n';
}

}  // namespace

CanonicalEncoder& CanonicalEncoder::field(std::string_view name, std::string_view value) {
  buf_ += name;
  buf_ += '\n';
  append_sized(buf_, value);
  return *this;
}

CanonicalEncoder& CanonicalEncoder::field(std::string_view name, long long value) {
  return field(name, std::string_view(std::to_string(value)));
}

CanonicalEncoder& CanonicalEncoder::field(std::string_view name, double value) {
  return field(name, std::string_view(canonical_double(value)));
}

CanonicalEncoder& CanonicalEncoder::field_list(std::string_view name,
                                               const std::vector<std::string>& values) {
  buf_ += name;
  buf_ += '\n';
  buf_ += std::to_string(values.size());
  buf_ += '\n';
  for (const auto& v : values) append_sized(buf_, v);
  return *this;
}

std::string canonical_double(double value) {
  std::array<char, 64> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw std::runtime_error("canonical_double: to_chars failed");
  return std::string(buf.data(), ptr);
}

}  // namespace loteval
