/*
 * invariant_suite.hpp
 *
 * The self-check run by `moelab check`: a reduced version of the acceptance
 * criteria plus the golden-vector comparison.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace moelab::check {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteOptions {
  std::string fixtures_dir;                    // holds golden/ reference files
  std::optional<std::uint64_t> gradcheck_seed;  // run gradcheck on this seed only
};

/// Golden reference for 16BT-2BA, seed 0, 3 tokens, relative to fixtures_dir.
inline constexpr const char* kGoldenFile = "golden/16BT-2BA_seed0_tokens3.bin";
inline constexpr std::uint64_t kGoldenSeed = 0;
inline constexpr std::size_t kGoldenTokens = 3;

/// Fixture directory: $MOELAB_FIXTURES_DIR when set, else the source tree's.
std::string default_fixtures_dir();

std::vector<CheckResult> run_invariant_suite(const SuiteOptions& options);

}  // namespace moelab::check
