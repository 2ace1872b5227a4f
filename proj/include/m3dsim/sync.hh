#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "m3dsim/config.hh"
#include "m3dsim/trace.hh"

namespace m3dsim {

class MemoryHierarchy;

enum class SyncMode : std::uint8_t { base, opt, rf };

std::string to_string(SyncMode m);
SyncMode parse_sync_mode(std::string_view s);

// Inter-core delivery latency for register-file synchronization.
std::int64_t rf_latency_cycles(int cores);

enum class SyncRole : std::uint8_t { none, acquire, release, barrier, atomic };

// Role of every op in a thread's trace: lock ops alternate acquire/release
// per (primitive, variable); non-sync ops get `none`.
std::vector<SyncRole> sync_roles(const Trace& trace);

struct SyncEvent {
  int thread = 0;
  std::uint32_t var = 0;
  SyncPrimitive primitive = SyncPrimitive::tas_lock;
  SyncRole role = SyncRole::acquire;
  std::int64_t issue = 0;
  std::int64_t done = 0;
};

// Simulated lock / barrier / counter state shared by every core of one run.
//
// base: atomic read-modify-write through the cache hierarchy (the directory
//       invalidates other holders). Waiters spin on the lock line, so every
//       release is followed by their re-reads.
// opt:  planar wire delay only: the op itself plus noc_hop_cycles.
// rf:   rf_latency_cycles(cores) through the home core's extra register-file
//       port, one op per cycle, FCFS. Variables beyond rf_slots fall back to
//       base unless the config is strict.
class SyncController {
 public:
  struct Completion {
    int thread;
    std::size_t op_index;
    std::int64_t done;
  };

  struct Outcome {
    bool issued = false;
    std::optional<std::int64_t> done;    // nullopt while a barrier is still filling
    std::vector<Completion> released;    // barrier waiters completed by this arrival
    std::optional<std::int64_t> retry_at;  // known cycle the blocking lock frees
  };

  SyncController(const SystemConfig& config, SyncMode mode, int participants,
                 MemoryHierarchy* hier, bool record_log = true);

  // Latency of one sync access issued at `cycle`, charging the hierarchy or
  // the rf port as the mode dictates.
  std::int64_t access_latency(int thread, const MicroOp& op, std::int64_t cycle);

  Outcome try_issue(int thread, std::size_t op_index, const MicroOp& op, SyncRole role,
                    std::int64_t cycle);

  // True when the last try_issue changed state other cores may be blocked on.
  bool take_state_changed();

  const std::vector<SyncEvent>& log() const { return log_; }
  std::int64_t ops() const { return ops_; }
  SyncMode mode() const { return mode_; }

 private:
  struct Lock {
    int holder = -1;
    std::int64_t free_at = 0;
    std::uint64_t next_ticket = 0;
    std::uint64_t now_serving = 0;
    std::uint64_t epoch = 0;  // releases so far
  };
  struct Barrier {
    int arrived = 0;
    std::int64_t last_arrival = 0;
    std::vector<Completion> waiting;
  };
  struct Counter {
    std::int64_t busy_until = 0;
  };
  using Key = std::pair<int, std::uint32_t>;  // (primitive, var)

  bool through_hierarchy(std::uint32_t var) const;
  // A blocked waiter re-reads the lock line once after every release.
  void spin_read(int thread, const Key& key, const Lock& lock, std::int64_t cycle);
  // Earliest cycle `thread` can observe the lock's latest state.
  std::int64_t observed_at(int thread, const Key& key, const Lock& lock) const;

  SystemConfig config_;
  SyncMode mode_;
  int participants_;
  MemoryHierarchy* hier_;
  std::map<Key, Lock> locks_;
  std::map<Key, Barrier> barriers_;
  std::map<Key, Counter> counters_;
  std::map<std::uint32_t, std::int64_t> rf_port_free_;
  std::map<std::pair<int, Key>, std::uint64_t> tickets_;      // ticket held while waiting
  struct Spin {
    std::uint64_t epoch;
    std::int64_t seen_at;  // the re-read returns, and the waiter sees the new value
  };
  std::map<std::pair<int, Key>, Spin> spins_;
  std::vector<SyncEvent> log_;
  std::int64_t ops_ = 0;
  bool changed_ = false;
  bool record_log_ = true;
};

struct SyncBenchSpec {
  SyncPrimitive primitive = SyncPrimitive::tas_lock;
  int threads = 16;
  int critical_section_ops = 4;
  int iterations = 32;
  int work_ops = 200;  // serial non-critical ops between sync operations
  std::uint64_t seed = 1;
};

struct SyncBenchRow {
  SyncPrimitive primitive;
  int threads;
  SyncMode mode;
  std::int64_t cycles;
  double speedup_vs_base;
};

// Traces for one microbenchmark: every thread loops over work, then the primitive.
std::vector<Trace> sync_bench_traces(const SyncBenchSpec& spec);

// Cycles in `mode` plus the speedup over base mode on the same traces.
SyncBenchRow run_sync_bench(const SyncBenchSpec& spec, const SystemConfig& config, SyncMode mode);

// All three modes.
std::vector<SyncBenchRow> run_sync_bench_table(const SyncBenchSpec& spec, const SystemConfig& config);

std::string sync_bench_csv(const std::vector<SyncBenchRow>& rows);

}  // namespace m3dsim
