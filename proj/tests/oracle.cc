#include "oracle.hh"

#include <algorithm>
#include <array>
#include <map>
#include <vector>

#include "m3dsim/error.hh"

namespace m3dsim::testing {

namespace {

// Cycle -> uses of one resource.
class Table {
 public:
  explicit Table(int capacity) : capacity_(capacity) {}

  bool full(std::int64_t c) const {
    auto it = used_.find(c);
    return it != used_.end() && it->second >= capacity_;
  }
  void take(std::int64_t c) { ++used_[c]; }

  // Earliest cycle >= lower bound with a free entry; takes it.
  std::int64_t claim(std::int64_t lower) {
    while (full(lower)) ++lower;
    take(lower);
    return lower;
  }

 private:
  int capacity_;
  std::map<std::int64_t, int> used_;
};

}  // namespace

std::int64_t oracle_cycles(const Trace& trace, const SystemConfig& config) {
  if (trace.empty() || trace.size() > kOracleMaxOps)
    throw DomainError("oracle: trace must hold 1.." + std::to_string(kOracleMaxOps) + " ops");
  if (!config.features.perfect_memory || config.features.memoization)
    throw DomainError("oracle: needs perfect_memory and no memoization");
  const auto& k = config.core;
  const int width = k.width;

  int delay = 0;
  if (config.features.ideal_frontend) {
    delay = 1;
  } else {
    const int dispatch = config.features.shallow_pipeline ? (k.dispatch_depth_cycles + 1) / 2
                                                          : k.dispatch_depth_cycles;
    delay = std::max(1, k.frontend_depth_cycles + dispatch);
  }
  const std::size_t fq = static_cast<std::size_t>(width) * static_cast<std::size_t>(std::max(2, delay));

  auto latency = [&](OpKind kind) -> std::int64_t {
    if (config.features.uops_one_cycle) return 1;
    switch (kind) {
      case OpKind::int_alu: return k.int_latency;
      case OpKind::fp: return k.fp_latency;
      case OpKind::complex: return k.complex_latency;
      case OpKind::load:
      case OpKind::store: return 1;
      default: throw DomainError("oracle: branches and sync ops are out of scope");
    }
  };

  const std::size_t n = trace.size();
  std::vector<std::int64_t> fetch(n), dispatch(n), issue(n), done(n), retire(n);
  Table fetch_t(width), dispatch_t(width), issue_t(width), retire_t(width);
  Table int_t(k.int_alus), fp_t(k.fpus), complex_t(k.complex_alus);
  std::array<std::int64_t, kNumRegisters> writer;
  writer.fill(-1);
  std::vector<std::size_t> loads, stores;

  for (std::size_t i = 0; i < n; ++i) {
    const MicroOp& op = trace[i];
    const std::int64_t lat = latency(op.kind);

    // Fetch: in order, and the frontend queue holds at most fq undispatched ops
    // after the dispatch stage of the fetch cycle.
    std::int64_t lo = i > 0 ? fetch[i - 1] : 0;
    if (i >= fq) lo = std::max(lo, dispatch[i - fq]);
    fetch[i] = fetch_t.claim(lo);

    // Dispatch: in order, after the frontend delay, with ROB/LQ/SQ room freed
    // by retirements in the same cycle (retire runs first).
    lo = fetch[i] + delay;
    if (i > 0) lo = std::max(lo, dispatch[i - 1]);
    if (i >= static_cast<std::size_t>(k.rob_entries)) lo = std::max(lo, retire[i - static_cast<std::size_t>(k.rob_entries)]);
    if (op.kind == OpKind::load && loads.size() >= static_cast<std::size_t>(k.lq_entries))
      lo = std::max(lo, retire[loads[loads.size() - static_cast<std::size_t>(k.lq_entries)]]);
    if (op.kind == OpKind::store && stores.size() >= static_cast<std::size_t>(k.sq_entries))
      lo = std::max(lo, retire[stores[stores.size() - static_cast<std::size_t>(k.sq_entries)]]);
    dispatch[i] = dispatch_t.claim(lo);
    if (op.kind == OpKind::load) loads.push_back(i);
    if (op.kind == OpKind::store) stores.push_back(i);

    // Issue: sources produced, an issue slot and a unit of the right class
    // free in the same cycle. Older ops claimed their slots first.
    lo = dispatch[i];
    for (const auto& src : op.src)
      if (src && writer[*src] >= 0) lo = std::max(lo, done[static_cast<std::size_t>(writer[*src])]);
    Table* unit = nullptr;
    if (op.kind == OpKind::int_alu) unit = &int_t;
    if (op.kind == OpKind::fp) unit = &fp_t;
    if (op.kind == OpKind::complex) unit = &complex_t;
    while (issue_t.full(lo) || (unit != nullptr && unit->full(lo))) ++lo;
    issue_t.take(lo);
    if (unit != nullptr) unit->take(lo);
    issue[i] = lo;
    done[i] = lo + lat;
    if (op.dst) writer[*op.dst] = static_cast<std::int64_t>(i);

    // Retire: in order, once done.
    lo = done[i];
    if (i > 0) lo = std::max(lo, retire[i - 1]);
    retire[i] = retire_t.claim(lo);
  }
  return retire[n - 1];
}

OracleCase random_oracle_case(std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  OracleCase out;
  SystemConfig& c = out.config;
  c = preset("m3d");
  c.features.perfect_memory = true;
  auto& k = c.core;
  k.width = pick(1, 8);
  k.rob_entries = pick(k.width, 64);
  k.lq_entries = pick(1, 8);
  k.sq_entries = pick(1, 8);
  k.int_alus = pick(1, 6);
  k.fpus = pick(1, 2);
  k.complex_alus = pick(1, 2);
  k.frontend_depth_cycles = pick(0, 6);
  k.dispatch_depth_cycles = pick(k.frontend_depth_cycles == 0 ? 1 : 0, 6);
  k.int_latency = pick(1, 3);
  k.fp_latency = pick(1, 6);
  k.complex_latency = pick(1, 15);
  c.features.ideal_frontend = pick(0, 4) == 0;
  c.features.shallow_pipeline = pick(0, 3) == 0;
  c.features.uops_one_cycle = pick(0, 4) == 0;

  const int n = pick(1, static_cast<int>(kOracleMaxOps));
  const int regs = pick(2, kNumRegisters);
  constexpr OpKind kinds[] = {OpKind::int_alu, OpKind::fp, OpKind::complex, OpKind::load, OpKind::store};
  for (int i = 0; i < n; ++i) {
    MicroOp op;
    op.kind = kinds[pick(0, 4)];
    auto reg = [&] { return static_cast<std::uint8_t>(pick(0, regs - 1)); };
    if (op.kind != OpKind::store) op.dst = reg();
    if (pick(0, 2) > 0) op.src[0] = reg();
    if (pick(0, 2) == 0) op.src[1] = reg();
    if (op.is_memory()) {
      op.mem_addr = 0x1000 + 8 * static_cast<std::uint64_t>(pick(0, 4095));
      op.mem_bytes = 8;
    }
    out.trace.push_back(op);
  }
  return out;
}

}  // namespace m3dsim::testing
