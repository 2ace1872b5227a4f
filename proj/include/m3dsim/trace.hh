#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace m3dsim {

enum class OpKind : std::uint8_t { int_alu, fp, complex, load, store, branch, sync };
enum class SyncPrimitive : std::uint8_t { tas_lock, ticket_lock, barrier, atomic_counter };

inline constexpr int kNumRegisters = 64;
inline constexpr int kNumOpKinds = 7;

// One dynamic micro-op. Lock primitives carry no acquire/release bit: per
// thread and lock variable, odd occurrences acquire and even ones release.
struct MicroOp {
  int thread_id = 0;
  OpKind kind = OpKind::int_alu;
  std::optional<std::uint8_t> dst;
  std::array<std::optional<std::uint8_t>, 2> src{};
  std::optional<std::uint64_t> mem_addr;
  std::optional<std::uint32_t> mem_bytes;
  std::optional<bool> branch_taken;
  std::optional<bool> branch_predictable;
  std::optional<SyncPrimitive> sync_primitive;
  std::optional<std::uint32_t> sync_var;
  std::optional<std::uint32_t> region_id;

  bool is_memory() const { return kind == OpKind::load || kind == OpKind::store; }
  bool operator==(const MicroOp&) const = default;
};

using Trace = std::vector<MicroOp>;

// Throws TraceError when the kind-specific fields are missing.
void check_op(const MicroOp& op);

enum class WorkloadClass : std::uint8_t {
  streaming,
  strided,
  pointer_chase,
  random_access,
  compute_loop,
  branchy,
  sync_heavy
};

struct WorkloadProfile {
  WorkloadClass workload_class = WorkloadClass::streaming;
  std::int64_t instruction_count = 10000;  // per thread
  std::int64_t working_set_bytes = 1 << 20;
  double memory_op_fraction = 0.3;
  int dependency_chain_length = 2;
  double branch_fraction = 0.0;
  double mispredictable_branch_fraction = 0.0;
  int threads = 1;
  int sync_ops_per_thread = 0;
  int loop_body_length = 32;
  std::uint64_t seed = 1;

  // Knobs beyond the core profile fields.
  double store_fraction = 0.0;         // share of memory ops that are stores
  double fp_fraction = 0.0;            // share of compute ops that are fp
  double complex_fraction = 0.0;       // share of compute ops that are complex
  std::int64_t stride_bytes = 256;     // strided class
  bool shared_data = false;            // threads read one shared array
  SyncPrimitive sync_primitive = SyncPrimitive::tas_lock;
  int critical_section_ops = 4;
  int sync_vars = 1;
  int branch_blocks = 4;               // distinct loop regions in branchy traces
};

struct TraceStats {
  std::array<std::int64_t, kNumOpKinds> kind_counts{};
  std::int64_t instruction_count = 0;
  std::int64_t footprint_lines = 0;
  std::int64_t critical_path = 0;
  double ilp = 0.0;
  double branch_fraction = 0.0;
};

inline constexpr std::uint64_t kLineBytes = 64;
inline constexpr std::uint64_t kSharedBase = std::uint64_t{1} << 50;
inline constexpr std::uint64_t kSharedDataBase = kSharedBase + (std::uint64_t{1} << 32);

inline std::uint64_t thread_base(int thread) {
  return static_cast<std::uint64_t>(thread + 1) << 40;
}
inline std::uint64_t sync_var_address(std::uint32_t var) { return kSharedBase + var * kLineBytes; }

void validate(const WorkloadProfile& profile);

// One trace per thread, each exactly instruction_count long.
std::vector<Trace> generate(const WorkloadProfile& profile);

TraceStats measure(const Trace& trace);

void write_trace(const Trace& trace, const std::string& path);
Trace read_trace(const std::string& path);
std::vector<Trace> split_by_thread(const Trace& trace);
Trace merge_threads(const std::vector<Trace>& traces);

std::string to_string(OpKind k);
std::string to_string(SyncPrimitive p);
std::string to_string(WorkloadClass c);
OpKind parse_op_kind(std::string_view s);
SyncPrimitive parse_sync_primitive(std::string_view s);
WorkloadClass parse_workload_class(std::string_view s);

}  // namespace m3dsim
