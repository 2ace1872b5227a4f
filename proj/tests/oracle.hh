#pragma once

#include <cstdint>
#include <random>

#include "m3dsim/config.hh"
#include "m3dsim/trace.hh"

namespace m3dsim::testing {

inline constexpr std::size_t kOracleMaxOps = 200;

// Reference cycle count for a single-thread trace without branches or sync
// ops under perfect_memory (memoization off). Every op gets its fetch,
// dispatch, issue and retire cycle in program order, each the earliest cycle
// that satisfies its ordering bounds and still has room in that stage's
// per-cycle table. Throws DomainError outside those preconditions.
std::int64_t oracle_cycles(const Trace& trace, const SystemConfig& config);

struct OracleCase {
  Trace trace;
  SystemConfig config;
};

// A random in-scope case: 1..200 ops of int/fp/complex/load/store with random
// registers, on a random core shape derived from preset m3d.
OracleCase random_oracle_case(std::mt19937_64& rng);

}  // namespace m3dsim::testing
