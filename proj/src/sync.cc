#include "m3dsim/sync.hh"

#include <cmath>
#include <sstream>

#include "m3dsim/core.hh"
#include "m3dsim/error.hh"
#include "m3dsim/memhier.hh"

namespace m3dsim {

std::string to_string(SyncMode m) {
  switch (m) {
    case SyncMode::base: return "base";
    case SyncMode::opt: return "opt";
    case SyncMode::rf: return "rf";
  }
  return "?";
}

SyncMode parse_sync_mode(std::string_view s) {
  if (s == "base") return SyncMode::base;
  if (s == "opt") return SyncMode::opt;
  if (s == "rf") return SyncMode::rf;
  throw ConfigError("unknown sync mode '" + std::string(s) + "' (valid: base, opt, rf)");
}

std::int64_t rf_latency_cycles(int cores) {
  return 2 + static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<double>(std::max(1, cores))) - 1e-9));
}

std::vector<SyncRole> sync_roles(const Trace& trace) {
  std::vector<SyncRole> roles(trace.size(), SyncRole::none);
  std::map<std::pair<int, std::uint32_t>, std::uint64_t> seen;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& op = trace[i];
    if (op.kind != OpKind::sync) continue;
    const auto prim = op.sync_primitive.value_or(SyncPrimitive::tas_lock);
    switch (prim) {
      case SyncPrimitive::barrier: roles[i] = SyncRole::barrier; break;
      case SyncPrimitive::atomic_counter: roles[i] = SyncRole::atomic; break;
      default: {
        auto& n = seen[{static_cast<int>(prim), op.sync_var.value_or(0)}];
        roles[i] = (n++ % 2 == 0) ? SyncRole::acquire : SyncRole::release;
      }
    }
  }
  return roles;
}

SyncController::SyncController(const SystemConfig& config, SyncMode mode, int participants,
                               MemoryHierarchy* hier, bool record_log)
    : config_(config),
      mode_(mode),
      participants_(participants),
      hier_(hier),
      record_log_(record_log) {}

bool SyncController::through_hierarchy(std::uint32_t var) const {
  if (hier_ == nullptr || config_.features.perfect_memory) return false;
  if (mode_ == SyncMode::base) return true;
  return mode_ == SyncMode::rf && var >= static_cast<std::uint32_t>(config_.sync.rf_slots);
}

void SyncController::spin_read(int thread, const Key& key, const Lock& lock, std::int64_t cycle) {
  if (!through_hierarchy(key.second)) return;
  auto it = spins_.find({thread, key});
  if (it != spins_.end() && it->second.epoch == lock.epoch) return;
  const MemRequest r = hier_->access(thread, sync_var_address(key.second), AccessKind::read, cycle);
  spins_[{thread, key}] = Spin{lock.epoch, r.completion_cycle};
}

std::int64_t SyncController::observed_at(int thread, const Key& key, const Lock& lock) const {
  auto it = spins_.find({thread, key});
  if (it == spins_.end() || it->second.epoch != lock.epoch) return lock.free_at;
  return std::max(lock.free_at, it->second.seen_at);
}

std::int64_t SyncController::access_latency(int thread, const MicroOp& op, std::int64_t cycle) {
  const std::uint32_t var = op.sync_var.value_or(0);
  SyncMode mode = mode_;
  if (mode == SyncMode::rf && var >= static_cast<std::uint32_t>(config_.sync.rf_slots)) {
    if (config_.sync.strict)
      throw ConfigError("rf sync: variable " + std::to_string(var) + " exceeds rf_slots " +
                        std::to_string(config_.sync.rf_slots));
    mode = SyncMode::base;
  }
  switch (mode) {
    case SyncMode::opt: return 1 + config_.hop_cycles();
    case SyncMode::rf: {
      auto& port = rf_port_free_[var];
      const std::int64_t start = std::max(cycle, port);
      port = start + 1;
      return (start - cycle) + rf_latency_cycles(config_.core.cores);
    }
    case SyncMode::base: break;
  }
  if (config_.features.perfect_memory || hier_ == nullptr) return 1;
  const MemRequest r = hier_->access(thread, sync_var_address(var), AccessKind::write, cycle);
  return r.completion_cycle - cycle;
}

SyncController::Outcome SyncController::try_issue(int thread, std::size_t op_index,
                                                  const MicroOp& op, SyncRole role,
                                                  std::int64_t cycle) {
  Outcome out;
  const auto prim = op.sync_primitive.value_or(SyncPrimitive::tas_lock);
  const Key key{static_cast<int>(prim), op.sync_var.value_or(0)};

  auto issue = [&](std::int64_t done) {
    out.issued = true;
    out.done = done;
    ++ops_;
    if (record_log_) log_.push_back(SyncEvent{thread, key.second, prim, role, cycle, done});
  };

  switch (role) {
    case SyncRole::acquire: {
      Lock& lock = locks_[key];
      if (prim == SyncPrimitive::ticket_lock) {
        auto t = tickets_.find({thread, key});
        if (t == tickets_.end()) t = tickets_.emplace(std::pair{thread, key}, lock.next_ticket++).first;
        const bool blocked = t->second != lock.now_serving || lock.holder != -1;
        if (blocked || cycle < observed_at(thread, key, lock)) {
          spin_read(thread, key, lock, cycle);
          if (!blocked) out.retry_at = observed_at(thread, key, lock);
          return out;
        }
        tickets_.erase(t);
      } else if (lock.holder != -1 || cycle < observed_at(thread, key, lock)) {
        spin_read(thread, key, lock, cycle);
        if (lock.holder == -1) out.retry_at = observed_at(thread, key, lock);
        return out;
      }
      spins_.erase({thread, key});
      lock.holder = thread;
      issue(cycle + access_latency(thread, op, cycle));
      return out;
    }
    case SyncRole::release: {
      Lock& lock = locks_[key];
      if (lock.holder != thread)
        throw TraceError("thread " + std::to_string(thread) + " releases lock " +
                         std::to_string(key.second) + " it does not hold");
      const std::int64_t done = cycle + access_latency(thread, op, cycle);
      lock.holder = -1;
      lock.free_at = done;
      ++lock.epoch;
      if (prim == SyncPrimitive::ticket_lock) ++lock.now_serving;
      changed_ = true;
      issue(done);
      return out;
    }
    case SyncRole::barrier: {
      Barrier& b = barriers_[key];
      const std::int64_t lat = access_latency(thread, op, cycle);
      ++b.arrived;
      b.last_arrival = std::max(b.last_arrival, cycle);
      if (b.arrived < participants_) {
        out.issued = true;
        ++ops_;
        b.waiting.push_back(Completion{thread, op_index, 0});
        if (record_log_) log_.push_back(SyncEvent{thread, key.second, prim, role, cycle, -1});
        return out;
      }
      const std::int64_t release = b.last_arrival + lat;
      for (auto& w : b.waiting) {
        w.done = release;
        out.released.push_back(w);
      }
      if (record_log_) {
        for (auto& e : log_)
          if (e.primitive == prim && e.var == key.second && e.role == SyncRole::barrier && e.done < 0)
            e.done = release;
      }
      b = Barrier{};
      changed_ = true;
      issue(release);
      return out;
    }
    case SyncRole::atomic: {
      Counter& c = counters_[key];
      const std::int64_t start = std::max(cycle, c.busy_until);
      const std::int64_t done = start + access_latency(thread, op, start);
      c.busy_until = done;
      issue(done);
      return out;
    }
    case SyncRole::none: break;
  }
  throw DomainError("try_issue on a non-sync op");
}

bool SyncController::take_state_changed() {
  const bool c = changed_;
  changed_ = false;
  return c;
}

// --- microbenchmarks -------------------------------------------------------------

std::vector<Trace> sync_bench_traces(const SyncBenchSpec& spec) {
  if (spec.threads < 1) throw ConfigError("invalid sync bench: threads violates 'threads >= 1'");
  if (spec.iterations < 1)
    throw ConfigError("invalid sync bench: iterations violates 'iterations >= 1'");
  if (spec.critical_section_ops < 0 || spec.work_ops < 0)
    throw ConfigError("invalid sync bench: op counts violate '>= 0'");
  std::vector<Trace> traces(static_cast<std::size_t>(spec.threads));
  for (int t = 0; t < spec.threads; ++t) {
    Trace& tr = traces[static_cast<std::size_t>(t)];
    auto alu = [&](std::uint8_t dst, std::uint8_t src) {
      MicroOp op;
      op.thread_id = t;
      op.kind = OpKind::int_alu;
      op.dst = dst;
      op.src[0] = src;
      tr.push_back(op);
    };
    auto sync = [&] {
      MicroOp op;
      op.thread_id = t;
      op.kind = OpKind::sync;
      op.sync_primitive = spec.primitive;
      op.sync_var = 0;
      tr.push_back(op);
    };
    // Work and critical section are serial chains, so timing does not
    // depend on the seed beyond the register it picks.
    const auto r = static_cast<std::uint8_t>(1 + spec.seed % 8);
    for (int it = 0; it < spec.iterations; ++it) {
      for (int w = 0; w < spec.work_ops; ++w) alu(r, r);
      const bool lock = spec.primitive == SyncPrimitive::tas_lock ||
                        spec.primitive == SyncPrimitive::ticket_lock;
      sync();
      if (lock) {
        for (int k = 0; k < spec.critical_section_ops; ++k) alu(10, 10);
        sync();
      }
    }
  }
  return traces;
}

namespace {

SystemConfig bench_config(const SyncBenchSpec& spec, SystemConfig config) {
  if (config.core.cores < spec.threads) config = with_cores(std::move(config), spec.threads);
  return config;
}

}  // namespace

SyncBenchRow run_sync_bench(const SyncBenchSpec& spec, const SystemConfig& config, SyncMode mode) {
  const SystemConfig cfg = bench_config(spec, config);
  const auto traces = sync_bench_traces(spec);
  SimOptions opt;
  opt.record_sync_log = false;
  opt.seed = spec.seed;
  opt.sync_mode = SyncMode::base;
  const std::int64_t base = simulate(traces, cfg, opt).cycles;
  std::int64_t cycles = base;
  if (mode != SyncMode::base) {
    opt.sync_mode = mode;
    cycles = simulate(traces, cfg, opt).cycles;
  }
  return SyncBenchRow{spec.primitive, spec.threads, mode, cycles,
                      static_cast<double>(base) / static_cast<double>(cycles)};
}

std::vector<SyncBenchRow> run_sync_bench_table(const SyncBenchSpec& spec, const SystemConfig& config) {
  const SystemConfig cfg = bench_config(spec, config);
  const auto traces = sync_bench_traces(spec);
  SimOptions opt;
  opt.record_sync_log = false;
  opt.seed = spec.seed;
  std::vector<SyncBenchRow> rows;
  std::int64_t base = 0;
  for (SyncMode m : {SyncMode::base, SyncMode::opt, SyncMode::rf}) {
    opt.sync_mode = m;
    const std::int64_t cycles = simulate(traces, cfg, opt).cycles;
    if (m == SyncMode::base) base = cycles;
    rows.push_back(SyncBenchRow{spec.primitive, spec.threads, m, cycles,
                                static_cast<double>(base) / static_cast<double>(cycles)});
  }
  return rows;
}

std::string sync_bench_csv(const std::vector<SyncBenchRow>& rows) {
  std::ostringstream os;
  os << "primitive,threads,mode,cycles,speedup_vs_base\n";
  for (const auto& r : rows)
    os << to_string(r.primitive) << ',' << r.threads << ',' << to_string(r.mode) << ',' << r.cycles
       << ',' << r.speedup_vs_base << '\n';
  return os.str();
}

}  // namespace m3dsim
