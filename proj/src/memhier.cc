#include "m3dsim/memhier.hh"

#include <algorithm>
#include <cmath>

#include "m3dsim/error.hh"

namespace m3dsim {

LevelStats& LevelStats::operator+=(const LevelStats& o) {
  demand_read += o.demand_read;
  demand_write += o.demand_write;
  writeback_in += o.writeback_in;
  writebacks_out += o.writebacks_out;
  return *this;
}

MemHierStats& MemHierStats::operator+=(const MemHierStats& o) {
  l1 += o.l1;
  l2 += o.l2;
  l3 += o.l3;
  if (l1_per_core.size() < o.l1_per_core.size()) l1_per_core.resize(o.l1_per_core.size());
  for (std::size_t i = 0; i < o.l1_per_core.size(); ++i) l1_per_core[i] += o.l1_per_core[i];
  l2_present = l2_present || o.l2_present;
  l3_present = l3_present || o.l3_present;
  demand_accesses += o.demand_accesses;
  demand_latency_cycles += o.demand_latency_cycles;
  memory_reads += o.memory_reads;
  memory_writes += o.memory_writes;
  memory_bytes_read += o.memory_bytes_read;
  memory_bytes_written += o.memory_bytes_written;
  bandwidth_stall_cycles += o.bandwidth_stall_cycles;
  invalidations += o.invalidations;
  ec_bytes_read += o.ec_bytes_read;
  ec_bytes_written += o.ec_bytes_written;
  return *this;
}

double amat(const MemHierStats& s) {
  if (s.demand_accesses == 0) throw DomainError("AMAT undefined: no demand accesses");
  return static_cast<double>(s.demand_latency_cycles) / static_cast<double>(s.demand_accesses);
}

double lfmr(const MemHierStats& s) {
  const std::int64_t l1_misses = s.l1.demand_misses();
  if (l1_misses == 0) throw DomainError("LFMR undefined: zero L1 misses");
  if (s.l3_present) return static_cast<double>(s.l3.demand_misses()) / static_cast<double>(l1_misses);
  if (s.l2_present) return static_cast<double>(s.l2.demand_misses()) / static_cast<double>(l1_misses);
  return 1.0;
}

// --- BandwidthBucket ---------------------------------------------------------

BandwidthBucket::BandwidthBucket(double bytes_per_cycle, double line_bytes)
    : rate_(bytes_per_cycle),
      capacity_(std::max(bytes_per_cycle, line_bytes)),
      level_(capacity_) {}

std::int64_t BandwidthBucket::consume(double bytes, std::int64_t cycle) {
  if (cycle > last_cycle_) {
    level_ = std::min(capacity_, level_ + static_cast<double>(cycle - last_cycle_) * rate_);
    last_cycle_ = cycle;
  }
  level_ -= bytes;
  if (level_ >= 0) return 0;
  return static_cast<std::int64_t>(std::ceil(-level_ / rate_ - 1e-9));
}

// --- Cache -------------------------------------------------------------------

Cache::Cache(std::int64_t size_bytes, int associativity, int line_bytes)
    : sets_(static_cast<std::uint64_t>(size_bytes / (static_cast<std::int64_t>(line_bytes) * associativity))),
      ways_(associativity) {
  if (sets_ == 0) sets_ = 1;
}

std::vector<Cache::Way>& Cache::set_for(std::uint64_t line) {
  auto& set = store_[line % sets_];
  if (set.capacity() == 0) set.reserve(static_cast<std::size_t>(ways_));
  return set;
}

const std::vector<Cache::Way>* Cache::find_set(std::uint64_t line) const {
  auto it = store_.find(line % sets_);
  return it == store_.end() ? nullptr : &it->second;
}

bool Cache::contains(std::uint64_t line) const {
  const auto* set = find_set(line);
  if (!set) return false;
  return std::any_of(set->begin(), set->end(), [line](const Way& w) { return w.line == line; });
}

bool Cache::touch(std::uint64_t line, bool make_dirty) {
  auto it = store_.find(line % sets_);
  if (it == store_.end()) return false;
  for (auto& w : it->second) {
    if (w.line == line) {
      w.stamp = ++clock_;
      w.dirty = w.dirty || make_dirty;
      return true;
    }
  }
  return false;
}

std::optional<Cache::Victim> Cache::insert(std::uint64_t line, bool dirty) {
  auto& set = set_for(line);
  for (auto& w : set) {
    if (w.line == line) {
      w.stamp = ++clock_;
      w.dirty = w.dirty || dirty;
      return std::nullopt;
    }
  }
  if (set.size() < static_cast<std::size_t>(ways_)) {
    set.push_back(Way{line, ++clock_, dirty});
    return std::nullopt;
  }
  auto lru = std::min_element(set.begin(), set.end(),
                              [](const Way& a, const Way& b) { return a.stamp < b.stamp; });
  Victim v{lru->line, lru->dirty};
  *lru = Way{line, ++clock_, dirty};
  return v;
}

std::optional<bool> Cache::invalidate(std::uint64_t line) {
  auto it = store_.find(line % sets_);
  if (it == store_.end()) return std::nullopt;
  auto& set = it->second;
  for (auto w = set.begin(); w != set.end(); ++w) {
    if (w->line == line) {
      const bool dirty = w->dirty;
      set.erase(w);
      return dirty;
    }
  }
  return std::nullopt;
}

void Cache::clean(std::uint64_t line) {
  auto it = store_.find(line % sets_);
  if (it == store_.end()) return;
  for (auto& w : it->second)
    if (w.line == line) w.dirty = false;
}

// --- MemoryHierarchy ---------------------------------------------------------

MemoryHierarchy::MemoryHierarchy(const SystemConfig& config)
    : config_(config),
      timing_(derive_cycles(config)),
      line_bytes_(config.l1.line_bytes),
      hops_(config.hop_cycles()),
      bucket_(timing_.bytes_per_cycle, config.l1.line_bytes) {
  validate(config_);
  const int cores = config_.core.cores;
  if (cores > kMaxCores) throw ConfigError("invalid config: core.cores violates 'cores <= 256'");
  for (int c = 0; c < cores; ++c)
    l1_.emplace_back(config_.l1.size_bytes, config_.l1.associativity, config_.l1.line_bytes);
  if (config_.l2.present) {
    if (config_.l2.shared) {
      l2_.emplace_back(config_.l2.size_bytes * cores, config_.l2.associativity, line_bytes_);
      l2_port_free_.assign(static_cast<std::size_t>(std::max(1, cores / 4)), 0);
    } else {
      for (int c = 0; c < cores; ++c)
        l2_.emplace_back(config_.l2.size_bytes, config_.l2.associativity, line_bytes_);
    }
  }
  if (config_.l3.present) l3_.emplace(config_.l3.size_bytes, config_.l3.associativity, line_bytes_);
  stats_.l1_per_core.resize(static_cast<std::size_t>(cores));
  stats_.l2_present = config_.l2.present;
  stats_.l3_present = config_.l3.present;
}

Cache* MemoryHierarchy::l2_for(int core) {
  if (l2_.empty()) return nullptr;
  return config_.l2.shared ? &l2_.front() : &l2_[static_cast<std::size_t>(core)];
}

std::int64_t MemoryHierarchy::bandwidth_delay(double bytes, std::int64_t cycle) {
  if (config_.features.perfect_memory) return 0;
  const std::int64_t delay = bucket_.consume(bytes, cycle);
  stats_.bandwidth_stall_cycles += delay;
  return delay;
}

std::int64_t MemoryHierarchy::memory_read(std::int64_t cycle, std::int64_t* bw_delay) {
  ++stats_.memory_reads;
  stats_.memory_bytes_read += line_bytes_;
  const std::int64_t delay = bandwidth_delay(line_bytes_, cycle);
  if (bw_delay) *bw_delay = delay;
  return timing_.read_latency_cycles + delay;
}

void MemoryHierarchy::memory_write(std::int64_t cycle) {
  ++stats_.memory_writes;
  stats_.memory_bytes_written += line_bytes_;
  // Posted write: consumes bandwidth, stalls nobody directly.
  if (!config_.features.perfect_memory) bucket_.consume(line_bytes_, cycle);
}

std::int64_t MemoryHierarchy::ec_read(std::uint64_t, std::int64_t cycle, bool* bandwidth_stalled) {
  stats_.ec_bytes_read += line_bytes_;
  const std::int64_t delay = bandwidth_delay(line_bytes_, cycle);
  if (bandwidth_stalled) *bandwidth_stalled = delay > 0;
  return cycle + hops_ + timing_.read_latency_cycles + delay;
}

void MemoryHierarchy::ec_write(std::int64_t bytes, std::int64_t cycle) {
  stats_.ec_bytes_written += bytes;
  if (!config_.features.perfect_memory) bucket_.consume(static_cast<double>(bytes), cycle);
}

std::int64_t MemoryHierarchy::l2_port_delay(std::uint64_t line, std::int64_t arrival) {
  if (l2_port_free_.empty()) return 0;
  auto& free_at = l2_port_free_[line % l2_port_free_.size()];
  const std::int64_t start = std::max(arrival, free_at);
  free_at = start + 1;
  return start - arrival;
}

void MemoryHierarchy::writeback_into_l3(std::uint64_t line, std::int64_t cycle) {
  const bool hit = l3_->touch(line, true);
  stats_.l3.writeback_in.record(hit);
  if (hit) return;
  if (auto v = l3_->insert(line, true); v && v->dirty) {
    ++stats_.l3.writebacks_out;
    memory_write(cycle);
  }
}

void MemoryHierarchy::writeback_into_l2(int core, std::uint64_t line, std::int64_t cycle) {
  Cache* l2 = l2_for(core);
  const bool hit = l2->touch(line, true);
  stats_.l2.writeback_in.record(hit);
  if (hit) return;
  if (auto v = l2->insert(line, true); v && v->dirty) {
    ++stats_.l2.writebacks_out;
    if (l3_)
      writeback_into_l3(v->line, cycle);
    else
      memory_write(cycle);
  }
}

void MemoryHierarchy::writeback_from_l1(int core, std::uint64_t line, std::int64_t cycle) {
  ++stats_.l1.writebacks_out;
  ++stats_.l1_per_core[static_cast<std::size_t>(core)].writebacks_out;
  if (l2_for(core))
    writeback_into_l2(core, line, cycle);
  else
    memory_write(cycle);
}

void MemoryHierarchy::fill_l3(std::uint64_t line, std::int64_t cycle) {
  if (auto v = l3_->insert(line, false); v && v->dirty) {
    ++stats_.l3.writebacks_out;
    memory_write(cycle);
  }
}

void MemoryHierarchy::fill_l2(int core, std::uint64_t line, std::int64_t cycle) {
  if (auto v = l2_for(core)->insert(line, false); v && v->dirty) {
    ++stats_.l2.writebacks_out;
    if (l3_)
      writeback_into_l3(v->line, cycle);
    else
      memory_write(cycle);
  }
}

void MemoryHierarchy::fill_l1(int core, std::uint64_t line, bool dirty, std::int64_t cycle) {
  auto v = l1_[static_cast<std::size_t>(core)].insert(line, dirty);
  if (!v) return;
  auto it = directory_.find(v->line);
  if (it != directory_.end()) {
    it->second.sharers.reset(static_cast<std::size_t>(core));
    if (it->second.owner == core) it->second.owner = -1;
    if (it->second.sharers.none()) directory_.erase(it);
  }
  if (v->dirty) writeback_from_l1(core, v->line, cycle);
}

MemRequest MemoryHierarchy::access(int core, std::uint64_t address, AccessKind kind,
                                   std::int64_t cycle, std::uint32_t bytes) {
  if (core < 0 || core >= config_.core.cores)
    throw DomainError("access from core " + std::to_string(core) + " outside the configured cores");
  const auto lb = static_cast<std::uint64_t>(line_bytes_);
  if (bytes == 0 || (address % lb) + bytes > lb)
    throw DomainError("access at " + std::to_string(address) + " of " + std::to_string(bytes) +
                      " bytes is not line-alignable");
  const std::uint64_t line = address / lb;
  const bool write = kind == AccessKind::write;
  const auto ucore = static_cast<std::size_t>(core);

  MemRequest req{core, address, kind, cycle, cycle, ServedBy::l1, 0};
  std::int64_t lat = config_.l1.latency_cycles;
  auto& per_core = stats_.l1_per_core[ucore];
  auto record = [write](LevelStats& s, bool hit) {
    (write ? s.demand_write : s.demand_read).record(hit);
  };

  DirEntry& dir = directory_[line];
  auto invalidate_others = [&]() {
    bool any = false;
    for (int s = 0; s < config_.core.cores; ++s) {
      if (s == core || !dir.sharers.test(static_cast<std::size_t>(s))) continue;
      any = true;
      ++stats_.invalidations;
      dir.sharers.reset(static_cast<std::size_t>(s));
      if (auto dirty = l1_[static_cast<std::size_t>(s)].invalidate(line); dirty && *dirty)
        writeback_from_l1(s, line, cycle);
    }
    dir.owner = dir.owner == core ? core : -1;
    return any;
  };

  if (l1_[ucore].touch(line, write)) {
    record(stats_.l1, true);
    record(per_core, true);
    if (write) {
      if (dir.sharers.count() > 1 && invalidate_others()) lat += hops_;
      dir.owner = core;
    }
  } else {
    record(stats_.l1, false);
    record(per_core, false);
    bool coherence = false;
    if (dir.owner >= 0 && dir.owner != core) {
      const int owner = dir.owner;
      if (!write) {
        l1_[static_cast<std::size_t>(owner)].clean(line);
        writeback_from_l1(owner, line, cycle);
      }
      dir.owner = -1;
      coherence = true;
    }
    if (write && invalidate_others()) coherence = true;
    if (coherence) lat += hops_;

    req.served_by = ServedBy::memory;
    if (Cache* l2 = l2_for(core)) {
      if (config_.l2.shared) lat += l2_port_delay(line, cycle + lat);
      lat += config_.l2.latency_cycles;
      const bool hit2 = l2->touch(line, false);
      record(stats_.l2, hit2);
      if (hit2) {
        req.served_by = ServedBy::l2;
      } else if (l3_) {
        lat += config_.l3.latency_cycles;
        const bool hit3 = l3_->touch(line, false);
        record(stats_.l3, hit3);
        if (hit3) req.served_by = ServedBy::l3;
      }
    }
    if (req.served_by == ServedBy::memory) {
      lat += hops_ + memory_read(cycle, &req.bandwidth_delay);
      if (l3_) fill_l3(line, cycle);
    }
    if ((req.served_by == ServedBy::memory || req.served_by == ServedBy::l3) && l2_for(core))
      fill_l2(core, line, cycle);
    // Node-based map: `dir` stays valid while fills erase other entries.
    fill_l1(core, line, write, cycle);
    dir.sharers.set(ucore);
    if (write) dir.owner = core;
  }

  ++stats_.demand_accesses;
  stats_.demand_latency_cycles += lat;
  req.completion_cycle = cycle + lat;
  return req;
}

}  // namespace m3dsim
