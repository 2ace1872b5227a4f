#include "m3dsim/memo.hh"

#include <algorithm>
#include <limits>

#include "m3dsim/error.hh"
#include "m3dsim/memhier.hh"

namespace m3dsim {

MemoStats& MemoStats::operator+=(const MemoStats& o) {
  memoized_regions += o.memoized_regions;
  memoized_paths += o.memoized_paths;
  gated_instructions += o.gated_instructions;
  buffer_hits += o.buffer_hits;
  buffer_misses += o.buffer_misses;
  prefetch_stall_cycles += o.prefetch_stall_cycles;
  renaming_stall_cycles += o.renaming_stall_cycles;
  invalidations += o.invalidations;
  ec_bytes_written += o.ec_bytes_written;
  ec_bytes_read += o.ec_bytes_read;
  return *this;
}

std::int64_t MemoPlan::gated_count() const {
  return std::count(gated.begin(), gated.end(), true);
}

std::uint64_t ec_base_address(int core) {
  return (std::uint64_t{1} << 56) + (static_cast<std::uint64_t>(core) << 44);
}

namespace {

std::uint64_t signature(const Trace& trace, std::size_t begin, std::size_t end) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  for (std::size_t i = begin; i < end; ++i) {
    const auto& op = trace[i];
    mix(static_cast<std::uint64_t>(op.kind));
    mix(op.dst ? *op.dst + 1u : 0u);
    mix(op.src[0] ? *op.src[0] + 1u : 0u);
    mix(op.src[1] ? *op.src[1] + 1u : 0u);
    mix(op.branch_taken ? (*op.branch_taken ? 2u : 1u) : 0u);
  }
  mix(end - begin);
  return h;
}

struct PathState {
  std::uint64_t sig;
  int seen;
  bool memoized;
  std::uint64_t ec_offset;
};

struct RegionState {
  std::vector<PathState> paths;
  bool excluded = false;
  bool ever_memoized = false;
};

}  // namespace

MemoPlan observe(const Trace& trace, const MemoUnitConfig& config, int core, int line_bytes) {
  MemoPlan plan;
  plan.gated.assign(trace.size(), false);
  plan.stream_pos.assign(trace.size(), -1);
  plan.ec_base = ec_base_address(core);
  const auto record_bytes = static_cast<std::uint64_t>(config.uop_record_bytes);
  std::unordered_map<std::uint32_t, RegionState> regions;
  std::uint64_t ec_top = 0;

  auto close_segment = [&](std::size_t begin, std::size_t end) {
    const std::uint32_t region = *trace[begin].region_id;
    RegionState& rs = regions[region];
    if (rs.excluded) return;
    for (std::size_t i = begin; i < end; ++i) {
      if (trace[i].kind == OpKind::sync) {
        rs.excluded = true;
        rs.paths.clear();
        return;
      }
    }
    const std::uint64_t sig = signature(trace, begin, end);
    auto path = std::find_if(rs.paths.begin(), rs.paths.end(),
                             [sig](const PathState& p) { return p.sig == sig; });
    if (path == rs.paths.end()) {
      if (rs.paths.size() >= static_cast<std::size_t>(config.ports)) {
        rs.paths.clear();
        ++plan.invalidations;
      }
      rs.paths.push_back(PathState{sig, 1, false, 0});
      return;
    }
    if (path->memoized) {
      for (std::size_t i = begin; i < end; ++i) {
        plan.gated[i] = true;
        const std::uint64_t addr = plan.ec_base + path->ec_offset + (i - begin) * record_bytes;
        const std::uint64_t line = addr / static_cast<std::uint64_t>(line_bytes);
        if (plan.line_stream.empty() || plan.line_stream.back() != line)
          plan.line_stream.push_back(line);
        plan.stream_pos[i] = static_cast<std::int32_t>(plan.line_stream.size() - 1);
      }
      return;
    }
    if (++path->seen >= 2) {
      path->memoized = true;
      path->ec_offset = ec_top;
      const std::uint64_t bytes = (end - begin) * record_bytes;
      // Keep each path line-aligned in the execution cache.
      ec_top += (bytes + static_cast<std::uint64_t>(line_bytes) - 1) /
                static_cast<std::uint64_t>(line_bytes) * static_cast<std::uint64_t>(line_bytes);
      plan.ec_writes.emplace_back(end - 1, static_cast<std::int64_t>(bytes));
      ++plan.memoized_paths;
      if (!rs.ever_memoized) {
        rs.ever_memoized = true;
        ++plan.memoized_regions;
      }
    }
  };

  std::size_t begin = 0;
  bool open = false;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& op = trace[i];
    if (open && (!op.region_id || *op.region_id != *trace[begin].region_id)) {
      close_segment(begin, i);
      open = false;
    }
    if (!op.region_id) continue;
    if (!open) {
      begin = i;
      open = true;
    }
    const bool back_edge = op.kind == OpKind::branch && op.branch_taken.value_or(false) &&
                           op.branch_predictable.value_or(true);
    if (back_edge) {
      close_segment(begin, i + 1);
      open = false;
    }
  }
  if (open) close_segment(begin, trace.size());
  return plan;
}

// --- MemoUnit ----------------------------------------------------------------

MemoUnit::MemoUnit(const MemoPlan& plan, const MemoUnitConfig& config, int line_bytes)
    : plan_(plan),
      capacity_(std::max<std::int64_t>(1, config.buffer_bytes / line_bytes)),
      degree_(config.prefetch_degree) {}

bool MemoUnit::prefetch_pending() const {
  return cursor_ < static_cast<std::int64_t>(plan_.line_stream.size()) &&
         cursor_ - fetch_pos_ < capacity_;
}

bool MemoUnit::prefetch(std::int64_t cycle, MemoryHierarchy& hier) {
  int issued = 0;
  bool advanced = false;
  while (issued < degree_ && prefetch_pending()) {
    const std::uint64_t line = plan_.line_stream[static_cast<std::size_t>(cursor_)];
    auto it = resident_.find(line);
    if (it != resident_.end()) {
      it->second.last_use = cursor_;
    } else {
      if (static_cast<std::int64_t>(resident_.size()) >= capacity_) {
        // Evict the least recently referenced line outside the live window.
        auto victim = resident_.end();
        for (auto r = resident_.begin(); r != resident_.end(); ++r) {
          if (r->second.last_use >= fetch_pos_) continue;
          if (victim == resident_.end() || r->second.last_use < victim->second.last_use)
            victim = r;
        }
        if (victim == resident_.end()) break;
        resident_.erase(victim);
      }
      const std::int64_t arrival =
          hier.ec_read(line * static_cast<std::uint64_t>(hier.line_bytes()), cycle);
      resident_.emplace(line, Slot{arrival, cursor_});
      ++issued;
    }
    ++cursor_;
    advanced = true;
  }
  return advanced;
}

std::optional<std::int64_t> MemoUnit::ready_at(std::int32_t pos) const {
  if (pos >= cursor_) return std::nullopt;
  auto it = resident_.find(plan_.line_stream[static_cast<std::size_t>(pos)]);
  if (it == resident_.end()) return std::nullopt;
  return it->second.arrival;
}

// --- energy --------------------------------------------------------------------

double epi_with_memo(const SystemConfig& config, double gated) {
  if (!(gated >= 0.0 && gated <= 1.0)) throw DomainError("gated fraction must be in [0,1]");
  const double core = config.core.epi_core_nJ * (1.0 - config.core.frontend_energy_fraction * gated);
  const double record_nJ =
      config.memo.uop_record_bytes * 8.0 * config.memory.energy_read_pJ_per_bit / 1000.0;
  return core + gated * record_nJ + gated * config.memo.buffer_access_nJ;
}

double epi_with_onchip_ec(const SystemConfig& config, double gated) {
  return epi_with_memo(config, gated) * (1.0 - kOnchipEcEpiAdvantage * gated);
}

}  // namespace m3dsim
