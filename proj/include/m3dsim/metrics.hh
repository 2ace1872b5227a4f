#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "m3dsim/config.hh"
#include "m3dsim/core.hh"

namespace m3dsim {

// Percent of all slots (cycles x width x active cores) per category.
struct TopDownBreakdown {
  double retiring = 0.0;
  double frontend = 0.0;
  double bad_speculation = 0.0;
  double backend_core = 0.0;
  double backend_mem_latency = 0.0;
  double backend_mem_bandwidth = 0.0;

  double backend() const { return backend_core + memory(); }
  double memory() const { return backend_mem_latency + backend_mem_bandwidth; }
  // Bandwidth share of the memory-backend slots, in percent; 0 when there are none.
  double bandwidth_share() const;
};

// Throws DomainError on a zero-cycle result.
TopDownBreakdown topdown(const SimResult& result);

enum class Boundedness { bandwidth_bound, latency_bound, compute_bound };

std::string to_string(Boundedness b);

Boundedness classify(const TopDownBreakdown& breakdown);
// The same thresholds applied to (BE%, Mem%, BW%) directly.
Boundedness classify(double backend, double memory, double bandwidth);

struct EnergyReport {
  double core_nJ = 0.0;
  double l1_nJ = 0.0;
  double l2_nJ = 0.0;
  double l3_nJ = 0.0;
  double memory_nJ = 0.0;
  double mu_nJ = 0.0;
  double total_nJ = 0.0;

  // Component share of the total, in percent.
  double percent(double component_nJ) const;
};

EnergyReport energy(const SimResult& result, const SystemConfig& config);

// Energy of `n_bytes` read from main memory, in pJ.
double memory_read_energy_pJ(const SystemConfig& config, double n_bytes);

enum class AreaOption { noL2, wide_pipeline, ec_buffer, rf_ports };

struct AreaEntry {
  std::string name;
  double delta_percent;
};

struct AreaLedger {
  std::vector<AreaEntry> entries;
  double total_percent = 0.0;
};

std::string to_string(AreaOption o);
AreaOption parse_area_option(std::string_view s);
AreaLedger area_ledger(const std::vector<AreaOption>& options);

nlohmann::json to_json(const TopDownBreakdown& b);
nlohmann::json to_json(const EnergyReport& e);
nlohmann::json to_json(const SimResult& r);

}  // namespace m3dsim
