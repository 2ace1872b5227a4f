#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace m3dsim {

enum class MemoryTechnology { m3d_rram, tsv3d_hbm, ddr4, m3d_sttmram };
enum class PredictorKind { two_level_gas, tage_lite, perfect, static_taken };

struct MemoryConfig {
  double read_latency_ns = 5.0;
  double write_latency_ns = 13.0;
  double bandwidth_GBps = 16000.0;
  double energy_read_pJ_per_bit = 0.8;
  double energy_write_pJ_per_bit = 0.11;
  MemoryTechnology technology = MemoryTechnology::m3d_rram;

  bool operator==(const MemoryConfig&) const = default;
};

// size_bytes is the capacity per core for L1 and L2 (a shared L2 aggregates
// size_bytes * cores); for L3 it is the total capacity.
struct CacheLevelConfig {
  bool present = true;
  bool shared = false;
  std::int64_t size_bytes = 32 * 1024;
  int associativity = 8;
  int latency_cycles = 4;
  double energy_hit_pJ = 15.0;
  double energy_miss_pJ = 33.0;
  int line_bytes = 64;

  bool operator==(const CacheLevelConfig&) const = default;
};

struct CoreConfig {
  int cores = 1;
  double frequency_GHz = 4.0;
  int width = 4;
  int rob_entries = 128;
  int lq_entries = 32;
  int sq_entries = 32;
  int int_alus = 6;
  int fpus = 1;
  int complex_alus = 1;
  int frontend_depth_cycles = 6;
  int dispatch_depth_cycles = 6;
  PredictorKind predictor = PredictorKind::two_level_gas;
  double epi_core_nJ = 0.48;
  double frontend_energy_fraction = 0.48;
  // Execution latencies in cycles; all collapse to 1 under uops_one_cycle.
  int int_latency = 1;
  int fp_latency = 4;
  int complex_latency = 12;

  bool operator==(const CoreConfig&) const = default;
};

struct FeatureToggles {
  bool memoization = false;
  bool rf_sync = false;
  bool ideal_frontend = false;
  bool shallow_pipeline = false;
  bool perfect_memory = false;
  bool uops_one_cycle = false;
  double mem_latency_multiplier = 1.0;

  bool operator==(const FeatureToggles&) const = default;
};

struct MemoUnitConfig {
  std::int64_t buffer_bytes = 1280;
  int uop_record_bytes = 8;
  // Line requests the stride prefetcher may issue per cycle; lookahead is
  // bounded by the buffer capacity.
  int prefetch_degree = 4;
  double renaming_penalty = 0.065;
  int ports = 2;
  double buffer_access_nJ = 0.001;

  bool operator==(const MemoUnitConfig&) const = default;
};

struct SyncConfig {
  int rf_slots = 4;
  // Reject rf-mode accesses to variables beyond rf_slots instead of falling
  // back to the coherence path.
  bool strict = false;

  bool operator==(const SyncConfig&) const = default;
};

struct SystemConfig {
  std::string preset = "m3d";
  CoreConfig core;
  CacheLevelConfig l1;
  CacheLevelConfig l2;
  CacheLevelConfig l3;
  MemoryConfig memory;
  // nullopt derives ceil(log2(cores)).
  std::optional<int> noc_hop_cycles;
  FeatureToggles features;
  MemoUnitConfig memo;
  SyncConfig sync;

  int hop_cycles() const;
  bool operator==(const SystemConfig&) const = default;
};

struct DerivedTiming {
  std::int64_t read_latency_cycles = 0;
  std::int64_t write_latency_cycles = 0;
  double bytes_per_cycle = 0.0;
};

const std::vector<std::string>& preset_names();
SystemConfig preset(std::string_view name);

// Throws ConfigError naming the field and the violated constraint.
void validate(const SystemConfig& config);

DerivedTiming derive_cycles(const SystemConfig& config);

// Returns a copy running on `cores` cores.
SystemConfig with_cores(SystemConfig config, int cores);

// Doubles width, functional units, and (optionally) ROB/LSQ capacity.
SystemConfig widen_pipeline(SystemConfig config, bool double_queues);

nlohmann::json to_json(const SystemConfig& config);
SystemConfig config_from_json(const nlohmann::json& document);
SystemConfig load_config(std::string_view text);
SystemConfig load_config_file(const std::string& path);
std::string serialize(const SystemConfig& config);

std::string to_string(MemoryTechnology t);
std::string to_string(PredictorKind p);
PredictorKind parse_predictor(std::string_view s);

}  // namespace m3dsim
