#include "m3dsim/core.hh"

#include <algorithm>
#include <cmath>
#include <limits>

#include "m3dsim/error.hh"
#include "m3dsim/predictor.hh"

namespace m3dsim {

std::string to_string(Slot s) {
  switch (s) {
    case Slot::retiring: return "retiring";
    case Slot::frontend: return "frontend";
    case Slot::bad_speculation: return "bad_speculation";
    case Slot::backend_core: return "backend_core";
    case Slot::backend_mem_latency: return "backend_mem_latency";
    case Slot::backend_mem_bandwidth: return "backend_mem_bandwidth";
  }
  return "?";
}

std::int64_t SlotTallies::total() const {
  std::int64_t t = 0;
  for (auto v : count) t += v;
  return t;
}

SlotTallies& SlotTallies::operator+=(const SlotTallies& o) {
  for (std::size_t i = 0; i < count.size(); ++i) count[i] += o.count[i];
  return *this;
}

std::int64_t SimResult::retired() const {
  std::int64_t n = 0;
  for (const auto& c : per_core) n += c.retired;
  return n;
}

double SimResult::gated_fraction() const {
  const std::int64_t n = retired();
  return n == 0 ? 0.0 : static_cast<double>(memo.gated_instructions) / static_cast<double>(n);
}

int frontend_delay(const SystemConfig& config) {
  if (config.features.ideal_frontend) return 1;
  int dispatch = config.core.dispatch_depth_cycles;
  if (config.features.shallow_pipeline) dispatch = (dispatch + 1) / 2;
  return std::max(1, config.core.frontend_depth_cycles + dispatch);
}

namespace {

constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

enum class FuClass : std::uint8_t { none, int_alu, fp, complex };

FuClass fu_class(OpKind k) {
  switch (k) {
    case OpKind::int_alu:
    case OpKind::branch: return FuClass::int_alu;
    case OpKind::fp: return FuClass::fp;
    case OpKind::complex: return FuClass::complex;
    default: return FuClass::none;
  }
}

struct CoreState {
  const Trace* trace = nullptr;
  std::vector<SyncRole> roles;
  std::vector<std::int64_t> done;   // kNever until known
  std::vector<std::int64_t> ready;  // cycle the op may dispatch
  std::vector<std::int32_t> prod0, prod1;
  std::vector<std::int32_t> fence;  // acquire or barrier this op must wait for
  std::vector<std::uint8_t> issued;
  std::vector<std::uint8_t> bw_stalled;
  std::vector<std::int32_t> unissued;

  // ROB is the index range [rob_begin, rob_end); the frontend queue is
  // [rob_end, fetch_idx).
  std::size_t rob_begin = 0, rob_end = 0, fetch_idx = 0;
  int lq = 0, sq = 0;
  std::array<std::int32_t, kNumRegisters> last_writer{};
  std::int32_t open_fence = -1;

  std::int64_t mispredicted_branch = -1;  // fetch waits for this op to resolve
  bool recovering = false;                // from resolution until the redirected path dispatches
  std::int64_t recovery_branch = -1;

  std::optional<BranchPredictor> predictor;
  std::optional<MemoPlan> plan;
  std::optional<MemoUnit> mu;
  std::size_t next_ec_write = 0;
  std::int64_t gated_first_try = -1;  // op index whose buffer miss was counted
  double penalty_acc = 0.0;

  // Fast-forward bookkeeping.
  std::int64_t wake = 0;
  std::int64_t tallied_through = 0;
  Slot sleep_cause = Slot::frontend;
  bool sleep_sync_blocked = false;
  bool sleep_prefetch_stall = false;
  bool sync_blocked_now = false;
  bool prefetch_stall_now = false;
  std::optional<std::int64_t> sync_retry;
  std::optional<std::int64_t> mu_wait;
  bool finished = false;

  CoreResult result;
};

class Simulator {
 public:
  Simulator(const std::vector<Trace>& traces, const SystemConfig& config, const SimOptions& options)
      : config_(config),
        options_(options),
        hier_(config),
        width_(config.core.width),
        delay_(frontend_delay(config)),
        fq_capacity_(static_cast<std::size_t>(config.core.width) *
                     static_cast<std::size_t>(std::max(2, frontend_delay(config)))),
        sync_(config,
              options.sync_mode.value_or(config.features.rf_sync ? SyncMode::rf : SyncMode::base),
              static_cast<int>(traces.size()), &hier_, options.record_sync_log) {
    const bool one = config.features.uops_one_cycle;
    lat_int_ = one ? 1 : config.core.int_latency;
    lat_fp_ = one ? 1 : config.core.fp_latency;
    lat_complex_ = one ? 1 : config.core.complex_latency;
    cores_.resize(traces.size());
    for (std::size_t i = 0; i < traces.size(); ++i) init_core(cores_[i], traces[i], static_cast<int>(i));
  }

  SimResult run();

 private:
  void init_core(CoreState& s, const Trace& trace, int core);
  bool step(CoreState& s, int core, std::int64_t c);
  Slot stall_cause(const CoreState& s, std::int64_t c) const;
  std::int64_t next_event(const CoreState& s, std::int64_t c) const;
  void tally(CoreState& s, std::int64_t c, int retired, Slot cause);
  void flush_sleep(CoreState& s, std::int64_t upto);
  // Wakes a sleeping core as soon as it could have observed a change made by
  // `by` at cycle c: later this cycle if it steps after `by`, else next cycle.
  void wake_at(CoreState& s, int index, int by, std::int64_t c) const {
    const std::int64_t w = index > by ? c : c + 1;
    if (s.wake > w) s.wake = w;
  }
  std::int64_t exec_latency(OpKind k) const;

  SystemConfig config_;
  SimOptions options_;
  MemoryHierarchy hier_;
  int width_;
  int delay_;
  std::size_t fq_capacity_;
  SyncController sync_;
  std::int64_t lat_int_ = 1, lat_fp_ = 4, lat_complex_ = 12;
  std::vector<CoreState> cores_;
};

void Simulator::init_core(CoreState& s, const Trace& trace, int core) {
  const std::size_t n = trace.size();
  s.trace = &trace;
  s.roles = sync_roles(trace);
  s.done.assign(n, kNever);
  s.ready.assign(n, kNever);
  s.prod0.assign(n, -1);
  s.prod1.assign(n, -1);
  s.fence.assign(n, -1);
  s.issued.assign(n, 0);
  s.bw_stalled.assign(n, 0);
  s.unissued.reserve(static_cast<std::size_t>(config_.core.rob_entries));
  s.last_writer.fill(-1);
  s.predictor.emplace(config_.core.predictor,
                      options_.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(core));
  if (config_.features.memoization) {
    s.plan.emplace(observe(trace, config_.memo, core, hier_.line_bytes()));
    s.mu.emplace(*s.plan, config_.memo, hier_.line_bytes());
    s.result.memo.memoized_regions = s.plan->memoized_regions;
    s.result.memo.memoized_paths = s.plan->memoized_paths;
    s.result.memo.invalidations = s.plan->invalidations;
  }
}

std::int64_t Simulator::exec_latency(OpKind k) const {
  switch (k) {
    case OpKind::fp: return lat_fp_;
    case OpKind::complex: return lat_complex_;
    default: return lat_int_;
  }
}

Slot Simulator::stall_cause(const CoreState& s, std::int64_t c) const {
  const bool empty = s.rob_begin == s.rob_end;
  if (!empty) {
    const std::size_t head = s.rob_begin;
    if (s.issued[head] && (*s.trace)[head].is_memory() && s.done[head] > c)
      return s.bw_stalled[head] ? Slot::backend_mem_bandwidth : Slot::backend_mem_latency;
  }
  // Refill bubble after a mispredicted branch resolves.
  if (s.recovering) return Slot::bad_speculation;
  return empty ? Slot::frontend : Slot::backend_core;
}

void Simulator::tally(CoreState& s, std::int64_t c, int retired, Slot cause) {
  if (c < 1) return;
  SlotTallies& t = s.result.slots;
  t[Slot::retiring] += retired;
  const int unused = width_ - retired;
  if (unused > 0) t[cause] += unused;
  if (s.sync_blocked_now) ++s.result.sync_stall_cycles;
  if (s.prefetch_stall_now) ++s.result.memo.prefetch_stall_cycles;
  s.tallied_through = c;
}

void Simulator::flush_sleep(CoreState& s, std::int64_t upto) {
  // Cycles (tallied_through, upto] passed with nothing happening.
  const std::int64_t from = std::max<std::int64_t>(s.tallied_through, 0);
  if (upto <= from) return;
  const std::int64_t n = upto - from;
  s.result.slots[s.sleep_cause] += n * width_;
  if (s.sleep_sync_blocked) s.result.sync_stall_cycles += n;
  if (s.sleep_prefetch_stall) s.result.memo.prefetch_stall_cycles += n;
  s.tallied_through = upto;
}

std::int64_t Simulator::next_event(const CoreState& s, std::int64_t c) const {
  std::int64_t e = kNever;
  for (std::size_t i = s.rob_begin; i < s.rob_end; ++i)
    if (s.done[i] > c && s.done[i] < e) e = s.done[i];
  if (s.rob_end < s.fetch_idx && s.ready[s.rob_end] > c) e = std::min(e, s.ready[s.rob_end]);
  if (s.sync_retry && *s.sync_retry > c) e = std::min(e, *s.sync_retry);
  if (s.mu_wait && *s.mu_wait > c) e = std::min(e, *s.mu_wait);
  return e;
}

bool Simulator::step(CoreState& s, int core, std::int64_t c) {
  const Trace& tr = *s.trace;
  const auto& cc = config_.core;
  bool active = false;
  s.sync_blocked_now = false;
  s.prefetch_stall_now = false;
  s.sync_retry.reset();
  s.mu_wait.reset();

  // Retire.
  int retired = 0;
  bool renaming_stall = false;
  if (s.rob_begin < s.rob_end && s.done[s.rob_begin] <= c && s.plan &&
      s.plan->gated[s.rob_begin]) {
    s.penalty_acc += config_.memo.renaming_penalty;
    if (s.penalty_acc >= 1.0) {
      s.penalty_acc -= 1.0;
      renaming_stall = true;
      ++s.result.memo.renaming_stall_cycles;
      active = true;
    }
  }
  while (!renaming_stall && retired < width_ && s.rob_begin < s.rob_end &&
         s.done[s.rob_begin] <= c) {
    const OpKind k = tr[s.rob_begin].kind;
    if (k == OpKind::load) --s.lq;
    if (k == OpKind::store) --s.sq;
    ++s.rob_begin;
    ++retired;
  }
  if (retired > 0) {
    s.result.retired += retired;
    s.result.finish_cycle = c;
    active = true;
  }
  // Slot cause is judged on the post-retire state of this cycle.
  const Slot cause = renaming_stall ? Slot::backend_core : stall_cause(s, c);
  if (renaming_stall) {
    // The fixed memoized schedule costs a whole cycle: nothing advances.
    tally(s, c, 0, cause);
    return true;
  }

  // Dispatch.
  int dispatched = 0;
  while (dispatched < width_ && s.rob_end < s.fetch_idx && s.ready[s.rob_end] <= c &&
         s.rob_end - s.rob_begin < static_cast<std::size_t>(cc.rob_entries)) {
    const std::size_t i = s.rob_end;
    const MicroOp& op = tr[i];
    if (op.kind == OpKind::load && s.lq >= cc.lq_entries) break;
    if (op.kind == OpKind::store && s.sq >= cc.sq_entries) break;
    if (op.kind == OpKind::load) ++s.lq;
    if (op.kind == OpKind::store) ++s.sq;
    if (op.src[0]) s.prod0[i] = s.last_writer[*op.src[0]];
    if (op.src[1]) s.prod1[i] = s.last_writer[*op.src[1]];
    if (op.dst) s.last_writer[*op.dst] = static_cast<std::int32_t>(i);
    s.fence[i] = s.open_fence;
    // A spinning acquire and a barrier hold back every younger op.
    if (s.roles[i] == SyncRole::acquire || s.roles[i] == SyncRole::barrier)
      s.open_fence = static_cast<std::int32_t>(i);
    s.unissued.push_back(static_cast<std::int32_t>(i));
    if (static_cast<std::int64_t>(i) > s.recovery_branch) s.recovering = false;
    ++s.rob_end;
    ++dispatched;
  }
  if (dispatched > 0) active = true;

  // Issue, oldest first.
  int issued_n = 0;
  int fu_int = 0, fu_fp = 0, fu_complex = 0;
  bool sync_order_blocked = false;
  bool any_issued = false;
  for (std::int32_t& slot : s.unissued) {
    if (issued_n >= width_) break;
    const auto i = static_cast<std::size_t>(slot);
    if (s.fence[i] >= 0 && s.done[static_cast<std::size_t>(s.fence[i])] > c) continue;
    const MicroOp& op = tr[i];
    if (op.kind == OpKind::sync) {
      if (sync_order_blocked) continue;
      const SyncRole role = s.roles[i];
      if (role != SyncRole::atomic) {
        bool older_done = true;
        for (std::size_t j = s.rob_begin; j < i; ++j)
          if (s.done[j] > c) {
            older_done = false;
            break;
          }
        if (!older_done) {
          sync_order_blocked = true;
          continue;
        }
      }
      auto out = sync_.try_issue(core, i, op, role, c);
      if (!out.issued) {
        sync_order_blocked = true;
        s.sync_blocked_now = true;
        s.sync_retry = out.retry_at;
        continue;
      }
      s.done[i] = out.done.value_or(kNever);
      for (const auto& r : out.released) {
        CoreState& w = cores_[static_cast<std::size_t>(r.thread)];
        w.done[r.op_index] = r.done;
        wake_at(w, r.thread, core, c);
      }
      s.issued[i] = 1;
      slot = -1;
      ++issued_n;
      any_issued = true;
      continue;
    }
    if (s.prod0[i] >= 0 && s.done[static_cast<std::size_t>(s.prod0[i])] > c) continue;
    if (s.prod1[i] >= 0 && s.done[static_cast<std::size_t>(s.prod1[i])] > c) continue;
    switch (fu_class(op.kind)) {
      case FuClass::int_alu:
        if (fu_int >= cc.int_alus) continue;
        ++fu_int;
        break;
      case FuClass::fp:
        if (fu_fp >= cc.fpus) continue;
        ++fu_fp;
        break;
      case FuClass::complex:
        if (fu_complex >= cc.complex_alus) continue;
        ++fu_complex;
        break;
      case FuClass::none: break;
    }
    if (op.is_memory()) {
      if (config_.features.perfect_memory) {
        s.done[i] = c + 1;
      } else {
        const bool write = op.kind == OpKind::store;
        const MemRequest r = hier_.access(core, op.mem_addr.value_or(0),
                                          write ? AccessKind::write : AccessKind::read, c,
                                          op.mem_bytes.value_or(1));
        if (write) {
          s.done[i] = c + config_.l1.latency_cycles;
        } else {
          s.done[i] = r.completion_cycle;
          s.bw_stalled[i] = r.bandwidth_delay > 0 ? 1 : 0;
        }
      }
    } else {
      s.done[i] = c + exec_latency(op.kind);
    }
    s.issued[i] = 1;
    slot = -1;
    ++issued_n;
    any_issued = true;
  }
  if (any_issued) {
    s.unissued.erase(std::remove(s.unissued.begin(), s.unissued.end(), -1), s.unissued.end());
    active = true;
  }
  if (sync_.take_state_changed()) {
    for (std::size_t k = 0; k < cores_.size(); ++k)
      if (static_cast<int>(k) != core && !cores_[k].finished) wake_at(cores_[k], static_cast<int>(k), core, c);
  }

  // Fetch.
  if (s.mu && s.mu->prefetch(c, hier_)) active = true;
  if (s.mispredicted_branch >= 0 && s.done[static_cast<std::size_t>(s.mispredicted_branch)] <= c) {
    s.mispredicted_branch = -1;
    s.recovering = true;
  }
  if (s.mispredicted_branch < 0) {
    int fetched = 0;
    while (fetched < width_ && s.fetch_idx < tr.size() && s.fetch_idx - s.rob_end < fq_capacity_) {
      const std::size_t i = s.fetch_idx;
      const MicroOp& op = tr[i];
      std::int64_t ready = c + delay_;
      if (s.plan && s.plan->gated[i]) {
        const std::int32_t pos = s.plan->stream_pos[i];
        const auto at = s.mu->ready_at(pos);
        const bool first_try = s.gated_first_try != static_cast<std::int64_t>(i);
        if (!at || *at > c) {
          if (first_try) {
            ++s.result.memo.buffer_misses;
            s.gated_first_try = static_cast<std::int64_t>(i);
          }
          s.prefetch_stall_now = true;
          if (at) s.mu_wait = *at;
          break;
        }
        if (first_try) ++s.result.memo.buffer_hits;
        ++s.result.memo.gated_instructions;
        s.mu->advance(pos);
        ready = c + std::min(delay_, kMemoFrontendCycles);
      }
      s.ready[i] = ready;
      while (s.plan && s.next_ec_write < s.plan->ec_writes.size() &&
             s.plan->ec_writes[s.next_ec_write].first == i) {
        const std::int64_t bytes = s.plan->ec_writes[s.next_ec_write].second;
        if (!config_.features.perfect_memory) hier_.ec_write(bytes, c);
        s.result.memo.ec_bytes_written += bytes;
        ++s.next_ec_write;
      }
      ++s.fetch_idx;
      ++fetched;
      if (op.kind == OpKind::branch) {
        ++s.result.branches.executed;
        if (s.predictor->mispredicts(op)) {
          ++s.result.branches.mispredicted;
          s.mispredicted_branch = static_cast<std::int64_t>(i);
          s.recovery_branch = static_cast<std::int64_t>(i);
          break;
        }
      }
    }
    if (fetched > 0) active = true;
  }

  tally(s, c, retired, cause);
  return active;
}

SimResult Simulator::run() {
  std::int64_t c = 0;
  std::size_t remaining = cores_.size();
  while (remaining > 0) {
    for (std::size_t k = 0; k < cores_.size(); ++k) {
      CoreState& s = cores_[k];
      if (s.finished || s.wake > c) continue;
      flush_sleep(s, c - 1);
      const bool active = step(s, static_cast<int>(k), c);
      if (s.rob_begin == s.trace->size()) {
        s.finished = true;
        --remaining;
        continue;
      }
      if (active || !options_.fast_forward) {
        s.wake = c + 1;
      } else {
        s.wake = next_event(s, c);
        s.sleep_cause = stall_cause(s, c);
        s.sleep_sync_blocked = s.sync_blocked_now;
        s.sleep_prefetch_stall = s.prefetch_stall_now;
      }
    }
    if (remaining == 0) break;
    std::int64_t next = kNever;
    for (const auto& s : cores_)
      if (!s.finished) next = std::min(next, s.wake);
    if (next == kNever) throw Error("simulation deadlock: every unfinished core waits on another");
    c = std::max(next, c + 1);
  }

  SimResult r;
  r.width = width_;
  r.cores = static_cast<int>(cores_.size());
  r.frequency_GHz = config_.core.frequency_GHz;
  for (const auto& s : cores_) r.cycles = std::max(r.cycles, s.result.finish_cycle);
  for (auto& s : cores_) {
    // A finished core has nothing left to supply.
    s.result.slots[Slot::frontend] += (r.cycles - s.tallied_through) * width_;
    r.slots += s.result.slots;
    r.branches += s.result.branches;
    r.memo += s.result.memo;
    r.sync.sync_stall_cycles += s.result.sync_stall_cycles;
    r.per_core.push_back(s.result);
  }
  r.memory = hier_.stats();
  r.memo.ec_bytes_read = r.memory.ec_bytes_read;
  r.sync.sync_ops = sync_.ops();
  r.sync_mode = sync_.mode();
  r.sync_log = sync_.log();
  return r;
}

}  // namespace

SimResult simulate(const std::vector<Trace>& traces, const SystemConfig& config,
                   const SimOptions& options) {
  validate(config);
  if (traces.empty()) throw TraceError("simulate: no traces");
  if (static_cast<int>(traces.size()) > config.core.cores)
    throw ConfigError("invalid config: cores violates 'threads <= cores' (" +
                      std::to_string(traces.size()) + " threads, " +
                      std::to_string(config.core.cores) + " cores)");
  for (std::size_t t = 0; t < traces.size(); ++t) {
    if (traces[t].empty()) throw TraceError("simulate: trace for thread " + std::to_string(t) + " is empty");
    for (const auto& op : traces[t]) check_op(op);
  }
  Simulator sim(traces, config, options);
  return sim.run();
}

}  // namespace m3dsim
