#pragma once

#include <bitset>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "m3dsim/config.hh"

namespace m3dsim {

inline constexpr int kMaxCores = 256;

enum class AccessKind : std::uint8_t { read, write };
enum class ServedBy : std::uint8_t { l1, l2, l3, memory };

struct AccessCounter {
  std::int64_t accesses = 0;
  std::int64_t hits = 0;
  std::int64_t misses = 0;

  void record(bool hit) {
    ++accesses;
    (hit ? hits : misses) += 1;
  }
  AccessCounter& operator+=(const AccessCounter& o) {
    accesses += o.accesses;
    hits += o.hits;
    misses += o.misses;
    return *this;
  }
  bool operator==(const AccessCounter&) const = default;
};

struct LevelStats {
  AccessCounter demand_read;
  AccessCounter demand_write;
  AccessCounter writeback_in;    // dirty lines arriving from the level above
  std::int64_t writebacks_out = 0;

  std::int64_t accesses() const {
    return demand_read.accesses + demand_write.accesses + writeback_in.accesses;
  }
  std::int64_t hits() const { return demand_read.hits + demand_write.hits + writeback_in.hits; }
  std::int64_t misses() const {
    return demand_read.misses + demand_write.misses + writeback_in.misses;
  }
  std::int64_t demand_misses() const { return demand_read.misses + demand_write.misses; }
  LevelStats& operator+=(const LevelStats& o);
  bool operator==(const LevelStats&) const = default;
};

struct MemHierStats {
  LevelStats l1;
  LevelStats l2;
  LevelStats l3;
  std::vector<LevelStats> l1_per_core;
  bool l2_present = false;
  bool l3_present = false;
  std::int64_t demand_accesses = 0;
  std::int64_t demand_latency_cycles = 0;
  std::int64_t memory_reads = 0;
  std::int64_t memory_writes = 0;
  std::int64_t memory_bytes_read = 0;
  std::int64_t memory_bytes_written = 0;
  std::int64_t bandwidth_stall_cycles = 0;
  std::int64_t invalidations = 0;
  // Execution-cache traffic from the memoization units, kept apart from demand.
  std::int64_t ec_bytes_read = 0;
  std::int64_t ec_bytes_written = 0;

  MemHierStats& operator+=(const MemHierStats& o);
};

struct MemRequest {
  int thread_id = 0;
  std::uint64_t address = 0;
  AccessKind kind = AccessKind::read;
  std::int64_t issue_cycle = 0;
  std::int64_t completion_cycle = 0;
  ServedBy served_by = ServedBy::l1;
  std::int64_t bandwidth_delay = 0;
};

// Average demand latency. Throws DomainError with zero accesses.
double amat(const MemHierStats& stats);

// Last-level misses over L1 misses; 1.0 without an L2/L3. Throws DomainError
// ("LFMR undefined") with zero L1 misses.
double lfmr(const MemHierStats& stats);

// FCFS token bucket over main-memory bytes. Capacity is one cycle of budget
// but never less than one line.
class BandwidthBucket {
 public:
  BandwidthBucket(double bytes_per_cycle, double line_bytes);
  // Extra cycles the request waits; tokens may go negative (queued debt).
  std::int64_t consume(double bytes, std::int64_t cycle);

 private:
  double rate_;
  double capacity_;
  double level_;
  std::int64_t last_cycle_ = 0;
};

// Set-associative LRU cache holding line numbers; sets materialize lazily so
// very large configurations cost memory only for touched sets.
class Cache {
 public:
  struct Victim {
    std::uint64_t line;
    bool dirty;
  };

  Cache(std::int64_t size_bytes, int associativity, int line_bytes);

  bool contains(std::uint64_t line) const;
  // Hit refreshes LRU (and sets dirty when asked).
  bool touch(std::uint64_t line, bool make_dirty);
  std::optional<Victim> insert(std::uint64_t line, bool dirty);
  // Returns whether the removed copy was dirty.
  std::optional<bool> invalidate(std::uint64_t line);
  void clean(std::uint64_t line);
  std::uint64_t sets() const { return sets_; }

 private:
  struct Way {
    std::uint64_t line;
    std::uint64_t stamp;
    bool dirty;
  };
  std::vector<Way>& set_for(std::uint64_t line);
  const std::vector<Way>* find_set(std::uint64_t line) const;

  std::uint64_t sets_;
  int ways_;
  std::uint64_t clock_ = 0;
  std::unordered_map<std::uint64_t, std::vector<Way>> store_;
};

class MemoryHierarchy {
 public:
  explicit MemoryHierarchy(const SystemConfig& config);

  // Demand access from `thread` (pinned to the core of the same index).
  // Throws DomainError when the access straddles a line.
  MemRequest access(int thread, std::uint64_t address, AccessKind kind, std::int64_t cycle,
                    std::uint32_t bytes = 1);

  // Main-memory token bucket; always 0 under perfect_memory.
  std::int64_t bandwidth_delay(double bytes, std::int64_t cycle);

  // Execution-cache traffic: reads bypass the caches, writes are posted.
  std::int64_t ec_read(std::uint64_t address, std::int64_t cycle, bool* bandwidth_stalled = nullptr);
  void ec_write(std::int64_t bytes, std::int64_t cycle);

  const MemHierStats& stats() const { return stats_; }
  const DerivedTiming& timing() const { return timing_; }
  int line_bytes() const { return line_bytes_; }

 private:
  struct DirEntry {
    std::bitset<kMaxCores> sharers;
    int owner = -1;  // core holding the line dirty
  };

  Cache* l2_for(int core);
  std::int64_t memory_read(std::int64_t cycle, std::int64_t* bw_delay);
  void memory_write(std::int64_t cycle);
  // Dirty data leaving `core`'s L1 for the level below.
  void writeback_from_l1(int core, std::uint64_t line, std::int64_t cycle);
  void writeback_into_l2(int core, std::uint64_t line, std::int64_t cycle);
  void writeback_into_l3(std::uint64_t line, std::int64_t cycle);
  void fill_l1(int core, std::uint64_t line, bool dirty, std::int64_t cycle);
  void fill_l2(int core, std::uint64_t line, std::int64_t cycle);
  void fill_l3(std::uint64_t line, std::int64_t cycle);
  std::int64_t l2_port_delay(std::uint64_t line, std::int64_t arrival);

  SystemConfig config_;
  DerivedTiming timing_;
  int line_bytes_;
  int hops_;
  std::vector<Cache> l1_;
  std::vector<Cache> l2_;  // one shared instance or one per core
  std::optional<Cache> l3_;
  std::vector<std::int64_t> l2_port_free_;
  std::unordered_map<std::uint64_t, DirEntry> directory_;
  BandwidthBucket bucket_;
  MemHierStats stats_;
};

}  // namespace m3dsim
