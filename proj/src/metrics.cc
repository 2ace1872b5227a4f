#include "m3dsim/metrics.hh"

#include <algorithm>

#include "m3dsim/error.hh"

namespace m3dsim {

double TopDownBreakdown::bandwidth_share() const {
  const double m = memory();
  return m > 0.0 ? backend_mem_bandwidth / m * 100.0 : 0.0;
}

TopDownBreakdown topdown(const SimResult& r) {
  if (r.cycles <= 0) throw DomainError("topdown undefined: zero cycles");
  const double slots = static_cast<double>(r.slots.total());
  if (slots <= 0) throw DomainError("topdown undefined: zero slots");
  auto pct = [&](Slot s) { return static_cast<double>(r.slots[s]) / slots * 100.0; };
  TopDownBreakdown b;
  b.retiring = pct(Slot::retiring);
  b.frontend = pct(Slot::frontend);
  b.bad_speculation = pct(Slot::bad_speculation);
  b.backend_core = pct(Slot::backend_core);
  b.backend_mem_latency = pct(Slot::backend_mem_latency);
  b.backend_mem_bandwidth = pct(Slot::backend_mem_bandwidth);
  return b;
}

std::string to_string(Boundedness b) {
  switch (b) {
    case Boundedness::bandwidth_bound: return "bandwidth_bound";
    case Boundedness::latency_bound: return "latency_bound";
    case Boundedness::compute_bound: return "compute_bound";
  }
  return "?";
}

Boundedness classify(double backend, double memory, double bandwidth) {
  if (backend > 40.0 && memory > 40.0)
    return bandwidth > 50.0 ? Boundedness::bandwidth_bound : Boundedness::latency_bound;
  return Boundedness::compute_bound;
}

Boundedness classify(const TopDownBreakdown& b) {
  return classify(b.backend(), b.memory(), b.bandwidth_share());
}

double EnergyReport::percent(double component_nJ) const {
  return total_nJ > 0.0 ? component_nJ / total_nJ * 100.0 : 0.0;
}

double memory_read_energy_pJ(const SystemConfig& config, double n_bytes) {
  return n_bytes * 8.0 * config.memory.energy_read_pJ_per_bit;
}

EnergyReport energy(const SimResult& r, const SystemConfig& config) {
  EnergyReport e;
  e.core_nJ = static_cast<double>(r.retired()) * config.core.epi_core_nJ *
              (1.0 - config.core.frontend_energy_fraction * r.gated_fraction());
  auto level = [](const LevelStats& s, const CacheLevelConfig& c) {
    return (static_cast<double>(s.hits()) * c.energy_hit_pJ +
            static_cast<double>(s.misses()) * c.energy_miss_pJ) / 1000.0;
  };
  e.l1_nJ = level(r.memory.l1, config.l1);
  if (r.memory.l2_present) e.l2_nJ = level(r.memory.l2, config.l2);
  if (r.memory.l3_present) e.l3_nJ = level(r.memory.l3, config.l3);
  e.memory_nJ = (memory_read_energy_pJ(config, static_cast<double>(r.memory.memory_bytes_read)) +
                 static_cast<double>(r.memory.memory_bytes_written) * 8.0 *
                     config.memory.energy_write_pJ_per_bit) / 1000.0;
  e.mu_nJ = (memory_read_energy_pJ(config, static_cast<double>(r.memo.ec_bytes_read)) +
             static_cast<double>(r.memo.ec_bytes_written) * 8.0 * config.memory.energy_write_pJ_per_bit) /
                1000.0 +
            static_cast<double>(r.memo.gated_instructions) * config.memo.buffer_access_nJ;
  e.total_nJ = e.core_nJ + e.l1_nJ + e.l2_nJ + e.l3_nJ + e.memory_nJ + e.mu_nJ;
  return e;
}

std::string to_string(AreaOption o) {
  switch (o) {
    case AreaOption::noL2: return "noL2";
    case AreaOption::wide_pipeline: return "wide_pipeline";
    case AreaOption::ec_buffer: return "ec_buffer";
    case AreaOption::rf_ports: return "rf_ports";
  }
  return "?";
}

AreaOption parse_area_option(std::string_view s) {
  for (auto o : {AreaOption::noL2, AreaOption::wide_pipeline, AreaOption::ec_buffer, AreaOption::rf_ports})
    if (to_string(o) == s) return o;
  throw ConfigError("unknown area option '" + std::string(s) +
                    "' (valid: noL2, wide_pipeline, ec_buffer, rf_ports)");
}

AreaLedger area_ledger(const std::vector<AreaOption>& options) {
  static constexpr std::pair<AreaOption, double> kDeltas[] = {
      {AreaOption::noL2, -32.0},
      {AreaOption::wide_pipeline, 19.0},
      {AreaOption::ec_buffer, 0.7},
      {AreaOption::rf_ports, 0.001},
  };
  AreaLedger ledger;
  // Fixed order, duplicates collapsed.
  for (const auto& [opt, delta] : kDeltas) {
    if (std::find(options.begin(), options.end(), opt) == options.end()) continue;
    ledger.entries.push_back(AreaEntry{to_string(opt), delta});
    ledger.total_percent += delta;
  }
  return ledger;
}

nlohmann::json to_json(const TopDownBreakdown& b) {
  return {{"retiring", b.retiring},
          {"frontend", b.frontend},
          {"bad_speculation", b.bad_speculation},
          {"backend_core", b.backend_core},
          {"backend_mem_latency", b.backend_mem_latency},
          {"backend_mem_bandwidth", b.backend_mem_bandwidth},
          {"BE", b.backend()},
          {"Mem", b.memory()},
          {"BW", b.bandwidth_share()},
          {"class", to_string(classify(b))}};
}

nlohmann::json to_json(const EnergyReport& e) {
  nlohmann::json j = {{"core_nJ", e.core_nJ}, {"l1_nJ", e.l1_nJ},         {"l2_nJ", e.l2_nJ},
                      {"l3_nJ", e.l3_nJ},     {"memory_nJ", e.memory_nJ}, {"mu_nJ", e.mu_nJ},
                      {"total_nJ", e.total_nJ}};
  j["percent"] = {{"core", e.percent(e.core_nJ)},     {"l1", e.percent(e.l1_nJ)},
                  {"l2", e.percent(e.l2_nJ)},         {"l3", e.percent(e.l3_nJ)},
                  {"memory", e.percent(e.memory_nJ)}, {"mu", e.percent(e.mu_nJ)}};
  return j;
}

namespace {

nlohmann::json slots_json(const SlotTallies& t) {
  nlohmann::json j;
  for (int i = 0; i < kNumSlots; ++i) j[to_string(static_cast<Slot>(i))] = t.count[static_cast<std::size_t>(i)];
  return j;
}

nlohmann::json level_json(const LevelStats& s) {
  auto counter = [](const AccessCounter& c) {
    return nlohmann::json{{"accesses", c.accesses}, {"hits", c.hits}, {"misses", c.misses}};
  };
  return {{"demand_read", counter(s.demand_read)},
          {"demand_write", counter(s.demand_write)},
          {"writeback_in", counter(s.writeback_in)},
          {"writebacks_out", s.writebacks_out},
          {"hits", s.hits()},
          {"misses", s.misses()}};
}

nlohmann::json memo_json(const MemoStats& m) {
  return {{"memoized_regions", m.memoized_regions},
          {"memoized_paths", m.memoized_paths},
          {"gated_instructions", m.gated_instructions},
          {"buffer_hits", m.buffer_hits},
          {"buffer_misses", m.buffer_misses},
          {"prefetch_stall_cycles", m.prefetch_stall_cycles},
          {"renaming_stall_cycles", m.renaming_stall_cycles},
          {"invalidations", m.invalidations},
          {"ec_bytes_written", m.ec_bytes_written},
          {"ec_bytes_read", m.ec_bytes_read}};
}

}  // namespace

nlohmann::json to_json(const SimResult& r) {
  nlohmann::json j;
  j["cycles"] = r.cycles;
  j["width"] = r.width;
  j["cores"] = r.cores;
  j["frequency_GHz"] = r.frequency_GHz;
  j["retired"] = r.retired();
  j["slots"] = slots_json(r.slots);
  const auto& m = r.memory;
  nlohmann::json mem = {{"l1", level_json(m.l1)},
                        {"demand_accesses", m.demand_accesses},
                        {"demand_latency_cycles", m.demand_latency_cycles},
                        {"memory_reads", m.memory_reads},
                        {"memory_writes", m.memory_writes},
                        {"memory_bytes_read", m.memory_bytes_read},
                        {"memory_bytes_written", m.memory_bytes_written},
                        {"bandwidth_stall_cycles", m.bandwidth_stall_cycles},
                        {"invalidations", m.invalidations},
                        {"ec_bytes_read", m.ec_bytes_read},
                        {"ec_bytes_written", m.ec_bytes_written}};
  if (m.l2_present) mem["l2"] = level_json(m.l2);
  if (m.l3_present) mem["l3"] = level_json(m.l3);
  if (m.demand_accesses > 0) mem["amat"] = amat(m);
  if (m.l1.demand_misses() > 0) mem["lfmr"] = lfmr(m);
  j["memory"] = mem;
  j["branches"] = {{"executed", r.branches.executed}, {"mispredicted", r.branches.mispredicted}};
  j["memo"] = memo_json(r.memo);
  j["memo"]["gated_fraction"] = r.gated_fraction();
  j["sync"] = {{"mode", to_string(r.sync_mode)},
               {"sync_ops", r.sync.sync_ops},
               {"sync_stall_cycles", r.sync.sync_stall_cycles}};
  auto& cores = j["per_core"] = nlohmann::json::array();
  for (std::size_t i = 0; i < r.per_core.size(); ++i) {
    const auto& c = r.per_core[i];
    cores.push_back({{"core", i},
                     {"retired", c.retired},
                     {"finish_cycle", c.finish_cycle},
                     {"slots", slots_json(c.slots)},
                     {"branches_executed", c.branches.executed},
                     {"branches_mispredicted", c.branches.mispredicted},
                     {"gated_instructions", c.memo.gated_instructions},
                     {"sync_stall_cycles", c.sync_stall_cycles}});
  }
  return j;
}

}  // namespace m3dsim
