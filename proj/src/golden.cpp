#include "moelab/golden.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "moelab/errors.hpp"

namespace moelab {

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const std::string& in, std::size_t offset) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_golden(std::span<const double> values) {
  std::string out;
  out.reserve(8 * (values.size() + 1));
  put_u64(out, values.size());
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

std::vector<double> decode_golden(const std::string& bytes) {
  if (bytes.size() < 8) throw IoError("golden file shorter than its header");
  const std::uint64_t count = get_u64(bytes, 0);
  if (bytes.size() != 8 + 8 * count)
    throw IoError("golden file declares " + std::to_string(count) + " values but holds " +
                  std::to_string(bytes.size()) + " bytes");
  std::vector<double> values(count);
  for (std::uint64_t i = 0; i < count; ++i)
    values[i] = std::bit_cast<double>(get_u64(bytes, 8 + 8 * i));
  return values;
}

void write_golden(const std::string& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  const auto bytes = encode_golden(values);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path + "'");
}

std::vector<double> read_golden(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_golden(ss.str());
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 failed");
  static const char* const kHex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace moelab
