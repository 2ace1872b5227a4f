#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "m3dsim/config.hh"
#include "m3dsim/trace.hh"

namespace m3dsim {

class MemoryHierarchy;

struct MemoStats {
  std::int64_t memoized_regions = 0;
  std::int64_t memoized_paths = 0;
  std::int64_t gated_instructions = 0;
  std::int64_t buffer_hits = 0;
  std::int64_t buffer_misses = 0;
  std::int64_t prefetch_stall_cycles = 0;
  std::int64_t renaming_stall_cycles = 0;
  std::int64_t invalidations = 0;
  std::int64_t ec_bytes_written = 0;
  std::int64_t ec_bytes_read = 0;

  MemoStats& operator+=(const MemoStats& o);
};

// Static memoization decisions for one thread's trace.
//
// A region iteration is a run of ops sharing a region_id, closed by a
// predictable taken branch (the back-edge) or by a region change. Its path
// signature covers op kinds, registers, and branch directions, not addresses.
// A path seen twice is memoized (its records are written to the execution
// cache) and every later iteration on that path executes gated. Each region
// holds at most `ports` paths; a further distinct path drops the region's
// records wholesale. Regions containing sync ops are never memoized.
struct MemoPlan {
  std::vector<bool> gated;                 // per op
  std::vector<std::int32_t> stream_pos;    // per op; -1 unless gated
  std::vector<std::uint64_t> line_stream;  // EC lines in fetch order, runs collapsed
  std::vector<std::pair<std::size_t, std::int64_t>> ec_writes;  // (op index, bytes)
  std::int64_t memoized_regions = 0;
  std::int64_t memoized_paths = 0;
  std::int64_t invalidations = 0;
  std::uint64_t ec_base = 0;

  std::int64_t gated_count() const;
};

// Reserved execution-cache address range for `core`, above every workload address.
std::uint64_t ec_base_address(int core);

MemoPlan observe(const Trace& trace, const MemoUnitConfig& config, int core, int line_bytes = 64);

// Per-core buffer plus stride prefetcher serving memoized records.
class MemoUnit {
 public:
  MemoUnit(const MemoPlan& plan, const MemoUnitConfig& config, int line_bytes);

  // Issues up to prefetch_degree execution-cache reads; true if any went out.
  bool prefetch(std::int64_t cycle, MemoryHierarchy& hier);

  // Cycle the record for stream position `pos` is in the buffer, or nullopt
  // when the prefetcher has not reached it yet.
  std::optional<std::int64_t> ready_at(std::int32_t pos) const;

  // The fetch stage consumed position `pos`.
  void advance(std::int32_t pos) { fetch_pos_ = pos; }

  bool prefetch_pending() const;
  std::int64_t capacity_lines() const { return capacity_; }

 private:
  struct Slot {
    std::int64_t arrival;
    std::int64_t last_use;
  };

  const MemoPlan& plan_;
  std::int64_t capacity_;
  int degree_;
  std::int64_t cursor_ = 0;     // next stream position to prefetch
  std::int64_t fetch_pos_ = 0;  // oldest position still needed
  std::unordered_map<std::uint64_t, Slot> resident_;
};

// Energy per instruction with a main-memory execution cache serving a
// fraction `gated` of instructions.
double epi_with_memo(const SystemConfig& config, double gated);

// Same with a 100 KB on-core SRAM execution cache: 11% below the
// main-memory variant.
double epi_with_onchip_ec(const SystemConfig& config, double gated);
inline constexpr double kOnchipEcEpiAdvantage = 0.11;

}  // namespace m3dsim
