#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "m3dsim/config.hh"
#include "m3dsim/core.hh"
#include "m3dsim/metrics.hh"
#include "m3dsim/sync.hh"
#include "m3dsim/trace.hh"

namespace m3dsim {

// --- workload suite ----------------------------------------------------------------

// The seven class names plus "mix".
const std::vector<std::string>& suite_workloads();

// Per-thread op count used at a given core count: 64000 / cores, clamped
// to [2000, 16000], so the largest cells stay around 256k ops.
std::int64_t suite_ops_per_thread(int cores);

// The suite's profile for one class.
WorkloadProfile suite_profile(WorkloadClass c, int threads, std::uint64_t seed,
                              std::int64_t ops_per_thread);

// One trace per core. "mix" runs one independent single-thread program per
// core, cycling through the non-sync classes, each in its own address range.
std::vector<Trace> suite_traces(const std::string& workload, int cores, std::uint64_t seed,
                                std::int64_t ops_per_thread);

// --- experiments -------------------------------------------------------------------

using ConfigTransform = std::function<SystemConfig(SystemConfig)>;

struct AxisPoint {
  std::string label;
  double value = 0.0;
  ConfigTransform apply;                // runs after the core count is set
  std::optional<SyncMode> sync_mode;    // forced sync mode for this point
};

struct Variant {
  std::string name;
  std::string preset;
  ConfigTransform apply;  // optional
};

struct Experiment {
  std::string name;
  std::string description;
  std::string axis;                     // parameter the points vary
  std::vector<std::string> axis_fields; // config paths the axis owns, e.g. "/l2/present"
  std::vector<AxisPoint> points;
  std::vector<Variant> variants;
  std::vector<std::string> workloads;
  std::vector<int> core_counts{1, 16, 64, 128};
  // Baseline selector: an empty field means "the cell's own" point/variant.
  std::string baseline_point;
  std::string baseline_variant;
  std::string representative;           // workload marked in reports
  bool sync_bench = false;              // workloads are sync primitives
};

const std::vector<std::string>& experiment_names();
// Throws ConfigError on an unknown name.
Experiment experiment(const std::string& name);

// Manifest: names the workloads, seeds, axis values and config overrides.
struct Manifest {
  std::string experiment;
  std::optional<std::vector<std::string>> workloads;
  std::optional<std::vector<int>> core_counts;
  std::optional<std::vector<std::string>> axis;  // subset of point labels
  std::vector<std::uint64_t> seeds{1};
  std::optional<std::int64_t> ops_per_thread;    // fixed instead of the scaled default
  nlohmann::json overrides = nlohmann::json::object();  // partial config document
  int jobs = 1;
};

Manifest manifest_from_json(const nlohmann::json& document);
Manifest load_manifest_file(const std::string& path);
nlohmann::json to_json(const Manifest& m);

struct ResultRow {
  std::string workload;
  int cores = 0;
  std::string axis_label;
  double axis_value = 0.0;
  std::string variant;
  std::uint64_t seed = 0;
  std::int64_t cycles = 0;
  double speedup = 0.0;
  double ipc = 0.0;
  std::optional<double> amat;
  std::optional<double> lfmr;
  double gated_fraction = 0.0;
  TopDownBreakdown breakdown;
  EnergyReport energy;
  double seconds = 0.0;
  std::vector<std::int64_t> program_cycles;  // per core, used to normalize mixes
  std::string status = "ok";

  bool ok() const { return status == "ok"; }
  double power_W() const { return seconds > 0 ? energy.total_nJ * 1e-9 / seconds : 0.0; }
};

struct ResultTable {
  std::string experiment;
  std::string axis;
  std::string baseline_point;
  std::string baseline_variant;
  std::string representative;
  nlohmann::json provenance;  // seeds, manifest, resolved configs
  std::vector<ResultRow> rows;

  const ResultRow* find(const std::string& workload, int cores, const std::string& axis_label,
                        const std::string& variant, std::uint64_t seed) const;
};

// Runs every (workload, cores, axis point, variant, seed) cell. Cell
// failures are recorded in the row status and the run continues. Throws
// ConfigError on an unknown experiment, unknown axis label or workload, or
// an override that touches a field the axis or variants own.
ResultTable run_experiment(const Manifest& manifest);
ResultTable run_experiment(const std::string& name, const nlohmann::json& overrides = nlohmann::json::object());

// Fills row.speedup = baseline cycles / row cycles, with the baseline chosen
// per row by the selector. Mix rows use the geometric mean of per-program
// ratios. Throws DomainError when a baseline row is missing or failed.
void speedup(ResultTable& table, const std::string& baseline_point, const std::string& baseline_variant);

// Largest f <= 1 with variant power * f <= baseline power (power linear in
// frequency). Throws DomainError when the baseline power is not positive.
double iso_power_scale(double baseline_power_W, double variant_power_W);
// Scaled run time: only the non-memory share of the cycles slows with f.
double iso_power_seconds(const ResultRow& row, double f);
// Frequency scale for `variant` against `baseline`, from total energy over
// total time across the ok rows present in both.
double iso_power_point(const ResultTable& table, const std::string& baseline_variant,
                       const std::string& variant);

std::string to_csv(const ResultTable& table);
nlohmann::json to_json(const ResultTable& table);
// Inverse of to_json; throws ConfigError on a malformed document.
ResultTable table_from_json(const nlohmann::json& document);
// One SVG per experiment: geometric-mean speedup bars grouped by core count.
std::string speedup_svg(const ResultTable& table);
// Plain-text summary of a table.
std::string report(const ResultTable& table);

}  // namespace m3dsim
