/*
 * golden.hpp
 *
 * Golden-vector files: an 8-byte little-endian uint64 element count followed
 * by that many little-endian IEEE-754 doubles.
 */
#pragma once

#include <span>
#include <string>
#include <vector>

namespace moelab {

std::string encode_golden(std::span<const double> values);
std::vector<double> decode_golden(const std::string& bytes);

void write_golden(const std::string& path, std::span<const double> values);
std::vector<double> read_golden(const std::string& path);

/// Lower-case hex SHA-256 of `bytes`.
std::string sha256_hex(const std::string& bytes);

}  // namespace moelab
