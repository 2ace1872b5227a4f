#pragma once

#include <vector>

#include "doctest.h"
#include "m3dsim/core.hh"

namespace m3dsim::testing {

// Every simulation in the tests goes through here so slot conservation is
// checked on all of them.
inline SimResult checked_simulate(const std::vector<Trace>& traces, const SystemConfig& config,
                                  const SimOptions& options = {}) {
  SimResult r = simulate(traces, config, options);
  const std::int64_t expected = r.cycles * r.width * r.cores;
  CHECK(r.slots.total() == expected);
  SlotTallies sum;
  for (const auto& core : r.per_core) {
    CHECK(core.slots.total() == r.cycles * r.width);
    sum += core.slots;
  }
  CHECK(sum == r.slots);
  return r;
}

inline SimResult checked_simulate(const Trace& trace, const SystemConfig& config,
                                  const SimOptions& options = {}) {
  return checked_simulate(std::vector<Trace>{trace}, config, options);
}

}  // namespace m3dsim::testing
