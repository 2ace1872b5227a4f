#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "m3dsim/config.hh"
#include "m3dsim/memhier.hh"
#include "m3dsim/memo.hh"
#include "m3dsim/sync.hh"
#include "m3dsim/trace.hh"

namespace m3dsim {

enum class Slot : std::uint8_t {
  retiring,
  frontend,
  bad_speculation,
  backend_core,
  backend_mem_latency,
  backend_mem_bandwidth
};
inline constexpr int kNumSlots = 6;

std::string to_string(Slot s);

struct SlotTallies {
  std::array<std::int64_t, kNumSlots> count{};

  std::int64_t& operator[](Slot s) { return count[static_cast<std::size_t>(s)]; }
  std::int64_t operator[](Slot s) const { return count[static_cast<std::size_t>(s)]; }
  std::int64_t total() const;
  SlotTallies& operator+=(const SlotTallies& o);
  bool operator==(const SlotTallies&) const = default;
};

struct BranchStats {
  std::int64_t executed = 0;
  std::int64_t mispredicted = 0;

  BranchStats& operator+=(const BranchStats& o) {
    executed += o.executed;
    mispredicted += o.mispredicted;
    return *this;
  }
  bool operator==(const BranchStats&) const = default;
};

struct SyncStats {
  std::int64_t sync_ops = 0;
  std::int64_t sync_stall_cycles = 0;  // core-cycles with a sync op blocked on another thread

  bool operator==(const SyncStats&) const = default;
};

struct CoreResult {
  std::int64_t retired = 0;
  std::int64_t finish_cycle = 0;
  SlotTallies slots;
  BranchStats branches;
  MemoStats memo;
  std::int64_t sync_stall_cycles = 0;
};

struct SimResult {
  std::int64_t cycles = 0;
  int width = 0;
  int cores = 0;  // active threads; idle cores contribute no slots
  double frequency_GHz = 0.0;
  std::vector<CoreResult> per_core;
  SlotTallies slots;
  MemHierStats memory;
  BranchStats branches;
  MemoStats memo;
  SyncStats sync;
  SyncMode sync_mode = SyncMode::base;
  std::vector<SyncEvent> sync_log;

  std::int64_t retired() const;
  double gated_fraction() const;
  double seconds() const { return static_cast<double>(cycles) / (frequency_GHz * 1e9); }
};

struct SimOptions {
  // Overrides the mode implied by features.rf_sync.
  std::optional<SyncMode> sync_mode;
  // Skip cycles in which a core provably does nothing. Results are identical
  // either way; turning it off exists for testing.
  bool fast_forward = true;
  bool record_sync_log = true;
  std::uint64_t seed = 1;
};

// Effective frontend delivery delay in cycles (fetch to dispatchable).
int frontend_delay(const SystemConfig& config);

// Cycles between a memoized op leaving the MU buffer and dispatch.
inline constexpr int kMemoFrontendCycles = 2;

// Cycle-stepped simulation of one trace per thread, thread i on core i.
// Throws ConfigError when there are more threads than cores and TraceError
// on an empty trace.
SimResult simulate(const std::vector<Trace>& traces, const SystemConfig& config,
                   const SimOptions& options = {});

}  // namespace m3dsim
