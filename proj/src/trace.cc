#include "m3dsim/trace.hh"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <random>
#include <unordered_set>

#include "m3dsim/error.hh"

namespace m3dsim {

// --- names -----------------------------------------------------------------

std::string to_string(OpKind k) {
  switch (k) {
    case OpKind::int_alu: return "int_alu";
    case OpKind::fp: return "fp";
    case OpKind::complex: return "complex";
    case OpKind::load: return "load";
    case OpKind::store: return "store";
    case OpKind::branch: return "branch";
    case OpKind::sync: return "sync";
  }
  return "?";
}

std::string to_string(SyncPrimitive p) {
  switch (p) {
    case SyncPrimitive::tas_lock: return "tas_lock";
    case SyncPrimitive::ticket_lock: return "ticket_lock";
    case SyncPrimitive::barrier: return "barrier";
    case SyncPrimitive::atomic_counter: return "atomic_counter";
  }
  return "?";
}

std::string to_string(WorkloadClass c) {
  switch (c) {
    case WorkloadClass::streaming: return "streaming";
    case WorkloadClass::strided: return "strided";
    case WorkloadClass::pointer_chase: return "pointer_chase";
    case WorkloadClass::random_access: return "random_access";
    case WorkloadClass::compute_loop: return "compute_loop";
    case WorkloadClass::branchy: return "branchy";
    case WorkloadClass::sync_heavy: return "sync_heavy";
  }
  return "?";
}

OpKind parse_op_kind(std::string_view s) {
  for (int i = 0; i < kNumOpKinds; ++i)
    if (to_string(static_cast<OpKind>(i)) == s) return static_cast<OpKind>(i);
  throw TraceError("unknown op kind '" + std::string(s) + "'");
}

SyncPrimitive parse_sync_primitive(std::string_view s) {
  for (int i = 0; i < 4; ++i)
    if (to_string(static_cast<SyncPrimitive>(i)) == s) return static_cast<SyncPrimitive>(i);
  throw TraceError("unknown sync primitive '" + std::string(s) + "'");
}

WorkloadClass parse_workload_class(std::string_view s) {
  for (int i = 0; i < 7; ++i)
    if (to_string(static_cast<WorkloadClass>(i)) == s) return static_cast<WorkloadClass>(i);
  throw ConfigError("unknown workload class '" + std::string(s) + "'");
}

void check_op(const MicroOp& op) {
  if (op.is_memory() && (!op.mem_addr || !op.mem_bytes))
    throw TraceError(to_string(op.kind) + " op without mem_addr/mem_bytes");
  if (op.kind == OpKind::branch && !op.branch_taken)
    throw TraceError("branch op without branch_taken");
  if (op.kind == OpKind::sync && (!op.sync_primitive || !op.sync_var))
    throw TraceError("sync op without sync_primitive/sync_var");
  if (op.dst && *op.dst >= kNumRegisters) throw TraceError("register id out of range");
  for (const auto& s : op.src)
    if (s && *s >= kNumRegisters) throw TraceError("register id out of range");
}

// --- generation ------------------------------------------------------------

void validate(const WorkloadProfile& p) {
  auto fraction = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0))
      throw ConfigError(std::string("invalid profile: ") + name + " must be in [0,1]");
  };
  fraction(p.memory_op_fraction, "memory_op_fraction");
  fraction(p.branch_fraction, "branch_fraction");
  fraction(p.mispredictable_branch_fraction, "mispredictable_branch_fraction");
  fraction(p.store_fraction, "store_fraction");
  fraction(p.fp_fraction, "fp_fraction");
  fraction(p.complex_fraction, "complex_fraction");
  if (p.instruction_count <= 0) throw ConfigError("invalid profile: instruction_count must be > 0");
  if (p.threads <= 0) throw ConfigError("invalid profile: threads must be > 0");
  if (p.dependency_chain_length <= 0)
    throw ConfigError("invalid profile: dependency_chain_length must be > 0");
  if (p.loop_body_length <= 0) throw ConfigError("invalid profile: loop_body_length must be > 0");
  if (p.working_set_bytes < static_cast<std::int64_t>(kLineBytes))
    throw ConfigError("invalid profile: working_set_bytes smaller than one 64-byte line");
  if (p.stride_bytes <= 0) throw ConfigError("invalid profile: stride_bytes must be > 0");
  if (p.sync_ops_per_thread < 0)
    throw ConfigError("invalid profile: sync_ops_per_thread must be >= 0");
  if (p.critical_section_ops < 0)
    throw ConfigError("invalid profile: critical_section_ops must be >= 0");
  if (p.sync_vars <= 0) throw ConfigError("invalid profile: sync_vars must be > 0");
  if (p.branch_blocks <= 0) throw ConfigError("invalid profile: branch_blocks must be > 0");
}

namespace {

class ThreadGenerator {
 public:
  ThreadGenerator(const WorkloadProfile& p, int tid)
      : p_(p), tid_(tid), rng_(p.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(tid)) {
    depth_ = std::min(p.dependency_chain_length, kNumRegisters / 2);
    lines_ = static_cast<std::uint64_t>(p.working_set_bytes) / kLineBytes;
    data_base_ = p.shared_data ? kSharedDataBase : thread_base(tid);
  }

  Trace run() {
    out_.reserve(static_cast<std::size_t>(p_.instruction_count));
    switch (p_.workload_class) {
      case WorkloadClass::streaming:
      case WorkloadClass::strided:
      case WorkloadClass::random_access:
      case WorkloadClass::pointer_chase: gen_memory_stream(); break;
      case WorkloadClass::compute_loop: gen_compute_loop(); break;
      case WorkloadClass::branchy: gen_branchy(); break;
      case WorkloadClass::sync_heavy: gen_sync_heavy(); break;
    }
    return std::move(out_);
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  std::uint64_t below(std::uint64_t n) { return rng_() % n; }
  bool full() const { return static_cast<std::int64_t>(out_.size()) >= p_.instruction_count; }

  std::uint8_t fresh_dst() {
    auto r = static_cast<std::uint8_t>(next_reg_);
    next_reg_ = (next_reg_ + 1) % kNumRegisters;
    history_.push_back(r);
    if (history_.size() > kNumRegisters) history_.erase(history_.begin());
    return r;
  }

  std::optional<std::uint8_t> producer(int distance) const {
    if (distance <= 0 || static_cast<std::size_t>(distance) > history_.size()) return std::nullopt;
    return history_[history_.size() - static_cast<std::size_t>(distance)];
  }

  OpKind compute_kind() {
    const double u = uniform();
    if (u < p_.fp_fraction) return OpKind::fp;
    if (u < p_.fp_fraction + p_.complex_fraction) return OpKind::complex;
    return OpKind::int_alu;
  }

  MicroOp base_op(OpKind kind) {
    MicroOp op;
    op.thread_id = tid_;
    op.kind = kind;
    return op;
  }

  void emit_compute(OpKind kind) {
    MicroOp op = base_op(kind);
    op.src[0] = producer(depth_);
    op.src[1] = producer(2 * depth_);
    op.dst = fresh_dst();
    out_.push_back(op);
  }

  void emit_memory(OpKind kind, std::uint64_t addr, std::optional<std::uint8_t> addr_src) {
    MicroOp op = base_op(kind);
    op.mem_addr = addr;
    op.mem_bytes = 8;
    if (kind == OpKind::load) {
      op.src[0] = addr_src;
      op.dst = fresh_dst();
    } else {
      op.src[0] = producer(1);
      op.src[1] = addr_src;
    }
    out_.push_back(op);
  }

  void emit_branch(bool predictable, bool taken, std::optional<std::uint8_t> src) {
    MicroOp op = base_op(OpKind::branch);
    op.src[0] = src;
    op.branch_taken = taken;
    op.branch_predictable = predictable;
    out_.push_back(op);
  }

  std::uint64_t line_address(std::uint64_t line) const {
    return data_base_ + (line % lines_) * kLineBytes;
  }

  // streaming / strided / random_access / pointer_chase
  void gen_memory_stream() {
    const std::uint64_t stride_lines =
        p_.workload_class == WorkloadClass::strided
            ? std::max<std::uint64_t>(1, static_cast<std::uint64_t>(p_.stride_bytes) / kLineBytes)
            : 1;
    std::uint64_t cursor = 0;
    std::optional<std::uint8_t> chain;
    while (!full()) {
      const double u = uniform();
      if (u < p_.memory_op_fraction) {
        std::uint64_t line = 0;
        switch (p_.workload_class) {
          case WorkloadClass::random_access:
          case WorkloadClass::pointer_chase: line = below(lines_); break;
          case WorkloadClass::streaming:
            // Consecutive 8-byte elements: eight accesses per line.
            line = cursor / (kLineBytes / 8);
            ++cursor;
            break;
          default:
            line = cursor;
            cursor += stride_lines;
            break;
        }
        if (p_.workload_class == WorkloadClass::pointer_chase) {
          emit_memory(OpKind::load, line_address(line), chain);
          chain = out_.back().dst;
        } else {
          const std::uint64_t offset =
              p_.workload_class == WorkloadClass::streaming ? (cursor - 1) % (kLineBytes / 8) * 8 : 0;
          const bool store = uniform() < p_.store_fraction;
          emit_memory(store ? OpKind::store : OpKind::load, line_address(line) + offset, std::nullopt);
        }
      } else if (u < p_.memory_op_fraction + p_.branch_fraction) {
        const bool hard = uniform() < p_.mispredictable_branch_fraction;
        emit_branch(!hard, hard ? (rng_() & 1) != 0 : true, producer(1));
      } else {
        emit_compute(compute_kind());
      }
    }
  }

  // One loop body replayed until the trace is full; only addresses vary.
  void gen_compute_loop() {
    const int body = p_.loop_body_length;
    struct Slot {
      OpKind kind;
      int distance;
    };
    std::vector<Slot> slots;
    slots.reserve(static_cast<std::size_t>(body));
    for (int j = 0; j < body; ++j) {
      if (j == body - 1 && body > 1) {
        slots.push_back({OpKind::branch, 1});
        continue;
      }
      const int distance = depth_ + static_cast<int>(rng_() & 1);
      if (uniform() < p_.memory_op_fraction)
        slots.push_back({uniform() < p_.store_fraction ? OpKind::store : OpKind::load, distance});
      else
        slots.push_back({compute_kind(), distance});
    }
    std::uint64_t cursor = 0;
    // Registers are positional so every iteration is the same op sequence.
    std::vector<std::uint8_t> reg(static_cast<std::size_t>(body));
    for (int j = 0; j < body; ++j) reg[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(j % kNumRegisters);
    auto produces = [&](int j) {
      const OpKind k = slots[static_cast<std::size_t>(j)].kind;
      return k != OpKind::branch && k != OpKind::store;
    };
    auto source = [&](int j, int distance) -> std::optional<std::uint8_t> {
      for (int k = distance; k < distance + body; ++k) {
        const int pos = ((j - k) % body + body) % body;
        if (produces(pos)) return reg[static_cast<std::size_t>(pos)];
      }
      return std::nullopt;
    };
    while (!full()) {
      for (int j = 0; j < body && !full(); ++j) {
        const Slot& s = slots[static_cast<std::size_t>(j)];
        MicroOp op = base_op(s.kind);
        op.region_id = 1;
        switch (s.kind) {
          case OpKind::branch:
            op.src[0] = source(j, 1);
            op.branch_taken = true;
            op.branch_predictable = true;
            break;
          case OpKind::load:
            op.mem_addr = line_address(cursor++);
            op.mem_bytes = 8;
            op.dst = reg[static_cast<std::size_t>(j)];
            break;
          case OpKind::store:
            op.mem_addr = line_address(cursor++);
            op.mem_bytes = 8;
            op.src[0] = source(j, s.distance);
            break;
          default:
            op.src[0] = source(j, s.distance);
            op.src[1] = source(j, s.distance + 1);
            op.dst = reg[static_cast<std::size_t>(j)];
            break;
        }
        out_.push_back(op);
      }
    }
  }

  // Several short loop regions, each closed by a predictable back-edge and
  // carrying at most a few hard-to-predict forward branches. A taken hard
  // branch skips the two ops that follow it.
  void gen_branchy() {
    const int body = std::max(3, p_.loop_body_length);
    enum class Role { compute, load, easy_branch, hard_branch, back_edge };
    std::vector<std::vector<Role>> blocks;
    for (int b = 0; b < p_.branch_blocks; ++b) {
      std::vector<Role> roles(static_cast<std::size_t>(body), Role::compute);
      roles.back() = Role::back_edge;
      const int branches =
          std::max(1, static_cast<int>(std::lround(body * p_.branch_fraction)));
      int hard = static_cast<int>(std::lround((branches) * p_.mispredictable_branch_fraction));
      if (p_.mispredictable_branch_fraction > 0 && hard == 0) hard = 1;
      // Mid-block branches sit at evenly spaced positions, hard ones first.
      const int mid = branches - 1;
      for (int i = 0; i < mid; ++i) {
        const int pos = (i + 1) * (body - 1) / (mid + 1);
        roles[static_cast<std::size_t>(pos)] = i < hard ? Role::hard_branch : Role::easy_branch;
      }
      if (mid == 0 && hard > 0) roles[static_cast<std::size_t>(body / 2)] = Role::hard_branch;
      for (auto& r : roles)
        if (r == Role::compute && uniform() < p_.memory_op_fraction) r = Role::load;
      blocks.push_back(std::move(roles));
    }
    std::optional<std::uint8_t> last_compute;
    while (!full()) {
      for (int b = 0; b < p_.branch_blocks && !full(); ++b) {
        const auto& roles = blocks[static_cast<std::size_t>(b)];
        // Each iteration starts from the same register state, so a path
        // repeats exactly.
        next_reg_ = 0;
        history_.clear();
        last_compute.reset();
        int skip = 0;
        for (std::size_t j = 0; j < roles.size() && !full(); ++j) {
          if (skip > 0 && roles[j] != Role::back_edge) {
            --skip;
            continue;
          }
          switch (roles[j]) {
            case Role::compute:
              emit_compute(compute_kind());
              last_compute = out_.back().dst;
              break;
            case Role::load: emit_memory(OpKind::load, line_address(below(lines_)), std::nullopt); break;
            case Role::easy_branch: emit_branch(true, false, last_compute); break;
            case Role::hard_branch: {
              const bool taken = (rng_() & 1) != 0;
              emit_branch(false, taken, last_compute);
              if (taken) skip = 2;
              break;
            }
            case Role::back_edge: emit_branch(true, true, last_compute); break;
          }
          out_.back().region_id = static_cast<std::uint32_t>(100 + b);
        }
      }
    }
  }

  void gen_sync_heavy() {
    const std::int64_t n = p_.instruction_count;
    const std::int64_t iterations = p_.sync_ops_per_thread;
    const bool lock = p_.sync_primitive == SyncPrimitive::tas_lock ||
                      p_.sync_primitive == SyncPrimitive::ticket_lock;
    const std::int64_t per_sync = lock ? p_.critical_section_ops + 2 : 1;
    if (iterations * per_sync > n)
      throw ConfigError("invalid profile: instruction_count too small for sync_ops_per_thread");
    const std::int64_t work = iterations > 0 ? (n - iterations * per_sync) / iterations : 0;
    const std::uint64_t private_lines = lines_;
    std::uint64_t cursor = 0;
    auto emit_work = [&](std::int64_t count) {
      for (std::int64_t i = 0; i < count; ++i) {
        if (uniform() < p_.memory_op_fraction)
          emit_memory(OpKind::load,
                      thread_base(tid_) + (cursor++ % private_lines) * kLineBytes, std::nullopt);
        else
          emit_compute(compute_kind());
      }
    };
    auto emit_sync = [&](std::uint32_t var) {
      MicroOp op = base_op(OpKind::sync);
      op.sync_primitive = p_.sync_primitive;
      op.sync_var = var;
      out_.push_back(op);
    };
    for (std::int64_t it = 0; it < iterations; ++it) {
      emit_work(work);
      const auto var = static_cast<std::uint32_t>(it % p_.sync_vars);
      emit_sync(var);
      if (lock) {
        const std::uint64_t shared_line = kSharedDataBase + var * 64 * kLineBytes;
        for (int k = 0; k < p_.critical_section_ops; ++k) {
          if (k % 2 == 0)
            emit_memory(OpKind::load, shared_line, std::nullopt);
          else if (k % 4 == 3)
            emit_memory(OpKind::store, shared_line, std::nullopt);
          else
            emit_compute(OpKind::int_alu);
        }
        emit_sync(var);
      }
    }
    emit_work(n - static_cast<std::int64_t>(out_.size()));
  }

  const WorkloadProfile& p_;
  int tid_;
  std::mt19937_64 rng_;
  int depth_ = 1;
  std::uint64_t lines_ = 1;
  std::uint64_t data_base_ = 0;
  int next_reg_ = 0;
  std::vector<std::uint8_t> history_;
  Trace out_;
};

}  // namespace

std::vector<Trace> generate(const WorkloadProfile& profile) {
  validate(profile);
  std::vector<Trace> traces;
  traces.reserve(static_cast<std::size_t>(profile.threads));
  for (int t = 0; t < profile.threads; ++t) traces.push_back(ThreadGenerator(profile, t).run());
  return traces;
}

TraceStats measure(const Trace& trace) {
  if (trace.empty()) throw DomainError("cannot measure an empty trace");
  TraceStats s;
  std::array<std::int64_t, kNumRegisters> depth{};
  std::unordered_set<std::uint64_t> lines;
  for (const auto& op : trace) {
    ++s.kind_counts[static_cast<std::size_t>(op.kind)];
    std::int64_t d = 0;
    for (const auto& r : op.src)
      if (r) d = std::max(d, depth[*r]);
    ++d;
    if (op.dst) depth[*op.dst] = d;
    s.critical_path = std::max(s.critical_path, d);
    if (op.mem_addr) lines.insert(*op.mem_addr / kLineBytes);
  }
  s.instruction_count = static_cast<std::int64_t>(trace.size());
  s.footprint_lines = static_cast<std::int64_t>(lines.size());
  s.ilp = static_cast<double>(s.instruction_count) / static_cast<double>(s.critical_path);
  s.branch_fraction = static_cast<double>(s.kind_counts[static_cast<std::size_t>(OpKind::branch)]) /
                      static_cast<double>(s.instruction_count);
  return s;
}

std::vector<Trace> split_by_thread(const Trace& trace) {
  std::vector<Trace> out;
  for (const auto& op : trace) {
    if (op.thread_id < 0) throw TraceError("negative thread id");
    if (static_cast<std::size_t>(op.thread_id) >= out.size())
      out.resize(static_cast<std::size_t>(op.thread_id) + 1);
    out[static_cast<std::size_t>(op.thread_id)].push_back(op);
  }
  return out;
}

Trace merge_threads(const std::vector<Trace>& traces) {
  Trace out;
  for (const auto& t : traces) out.insert(out.end(), t.begin(), t.end());
  return out;
}

// --- file I/O ----------------------------------------------------------------

namespace {

constexpr std::string_view kHeader = "#m3dsim-trace v1";

bool is_gzip(const std::string& path) {
  return path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

template <typename T>
void put_opt(std::string& s, const std::optional<T>& v) {
  s += '\t';
  if (!v)
    s += '-';
  else if constexpr (std::is_same_v<T, bool>)
    s += *v ? '1' : '0';
  else
    s += std::to_string(*v);
}

std::string format_op(const MicroOp& op) {
  std::string s = std::to_string(op.thread_id);
  s += '\t';
  s += to_string(op.kind);
  put_opt(s, op.dst);
  put_opt(s, op.src[0]);
  put_opt(s, op.src[1]);
  put_opt(s, op.mem_addr);
  put_opt(s, op.mem_bytes);
  put_opt(s, op.branch_taken);
  put_opt(s, op.branch_predictable);
  put_opt(s, op.region_id);
  s += '\t';
  s += op.sync_primitive ? to_string(*op.sync_primitive) : "-";
  put_opt(s, op.sync_var);
  s += '\n';
  return s;
}

class LineSink {
 public:
  explicit LineSink(const std::string& path) : path_(path) {
    if (is_gzip(path)) {
      gz_ = gzopen(path.c_str(), "wb");
      if (!gz_) throw TraceError("cannot open '" + path + "' for writing");
    } else {
      file_.open(path, std::ios::binary);
      if (!file_) throw TraceError("cannot open '" + path + "' for writing");
    }
  }
  ~LineSink() {
    if (gz_) gzclose(gz_);
  }
  LineSink(const LineSink&) = delete;
  LineSink& operator=(const LineSink&) = delete;

  void write(std::string_view s) {
    if (gz_) {
      if (gzwrite(gz_, s.data(), static_cast<unsigned>(s.size())) != static_cast<int>(s.size()))
        throw TraceError("write failed on '" + path_ + "'");
    } else {
      file_.write(s.data(), static_cast<std::streamsize>(s.size()));
      if (!file_) throw TraceError("write failed on '" + path_ + "'");
    }
  }

  void close() {
    if (gz_) {
      const int rc = gzclose(gz_);
      gz_ = nullptr;
      if (rc != Z_OK) throw TraceError("close failed on '" + path_ + "'");
    } else {
      file_.close();
      if (!file_) throw TraceError("close failed on '" + path_ + "'");
    }
  }

 private:
  std::string path_;
  gzFile gz_ = nullptr;
  std::ofstream file_;
};

class LineSource {
 public:
  explicit LineSource(const std::string& path) : path_(path) {
    // gzopen reads plain files transparently.
    gz_ = gzopen(path.c_str(), "rb");
    if (!gz_) throw TraceError("cannot open '" + path + "' for reading");
    gzbuffer(gz_, 1 << 17);
  }
  ~LineSource() { gzclose(gz_); }
  LineSource(const LineSource&) = delete;
  LineSource& operator=(const LineSource&) = delete;

  bool next(std::string& line) {
    line.clear();
    char buf[512];
    while (gzgets(gz_, buf, sizeof buf)) {
      line += buf;
      if (!line.empty() && line.back() == '\n') {
        line.pop_back();
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
      }
    }
    int err = 0;
    gzerror(gz_, &err);
    if (err != Z_OK && err != Z_STREAM_END) throw TraceError("read failed on '" + path_ + "'");
    return !line.empty();
  }

 private:
  std::string path_;
  gzFile gz_ = nullptr;
};

template <typename T>
std::optional<T> parse_field(std::string_view tok, std::size_t line_no, const char* name) {
  if (tok == "-") return std::nullopt;
  if constexpr (std::is_same_v<T, bool>) {
    if (tok == "1") return true;
    if (tok == "0") return false;
  } else {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec == std::errc{} && p == tok.data() + tok.size() && v <= std::numeric_limits<T>::max())
      return static_cast<T>(v);
  }
  throw TraceError("line " + std::to_string(line_no) + ": malformed " + name + " field '" +
                   std::string(tok) + "'");
}

MicroOp parse_op(std::string_view line, std::size_t line_no) {
  std::array<std::string_view, 12> tok;
  std::size_t n = 0;
  while (n < tok.size()) {
    const auto tab = line.find('\t');
    tok[n++] = line.substr(0, tab);
    if (tab == std::string_view::npos) break;
    line.remove_prefix(tab + 1);
  }
  if (n != tok.size() || line.find('\t') != std::string_view::npos)
    throw TraceError("line " + std::to_string(line_no) + ": expected 12 tab-separated fields");
  MicroOp op;
  auto tid = parse_field<std::uint32_t>(tok[0], line_no, "tid");
  if (!tid) throw TraceError("line " + std::to_string(line_no) + ": missing tid");
  op.thread_id = static_cast<int>(*tid);
  try {
    op.kind = parse_op_kind(tok[1]);
  } catch (const TraceError&) {
    throw TraceError("line " + std::to_string(line_no) + ": unknown kind token '" +
                     std::string(tok[1]) + "'");
  }
  op.dst = parse_field<std::uint8_t>(tok[2], line_no, "dst");
  op.src[0] = parse_field<std::uint8_t>(tok[3], line_no, "src1");
  op.src[1] = parse_field<std::uint8_t>(tok[4], line_no, "src2");
  op.mem_addr = parse_field<std::uint64_t>(tok[5], line_no, "addr");
  op.mem_bytes = parse_field<std::uint32_t>(tok[6], line_no, "bytes");
  op.branch_taken = parse_field<bool>(tok[7], line_no, "taken");
  op.branch_predictable = parse_field<bool>(tok[8], line_no, "pred");
  op.region_id = parse_field<std::uint32_t>(tok[9], line_no, "region");
  if (tok[10] != "-") {
    try {
      op.sync_primitive = parse_sync_primitive(tok[10]);
    } catch (const TraceError&) {
      throw TraceError("line " + std::to_string(line_no) + ": unknown sync primitive '" +
                       std::string(tok[10]) + "'");
    }
  }
  op.sync_var = parse_field<std::uint32_t>(tok[11], line_no, "sync_var");
  try {
    check_op(op);
  } catch (const TraceError& e) {
    throw TraceError("line " + std::to_string(line_no) + ": " + e.what());
  }
  return op;
}

}  // namespace

void write_trace(const Trace& trace, const std::string& path) {
  LineSink sink(path);
  sink.write(std::string(kHeader) + "\n");
  std::string chunk;
  for (const auto& op : trace) {
    chunk += format_op(op);
    if (chunk.size() > (1 << 16)) {
      sink.write(chunk);
      chunk.clear();
    }
  }
  sink.write(chunk);
  sink.close();
}

Trace read_trace(const std::string& path) {
  LineSource src(path);
  std::string line;
  if (!src.next(line) || line != kHeader)
    throw TraceError("line 1: missing '" + std::string(kHeader) + "' header in '" + path + "'");
  Trace trace;
  std::size_t line_no = 1;
  while (src.next(line)) {
    ++line_no;
    if (line.empty()) continue;
    trace.push_back(parse_op(line, line_no));
  }
  return trace;
}

}  // namespace m3dsim
