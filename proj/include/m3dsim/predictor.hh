#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "m3dsim/config.hh"
#include "m3dsim/trace.hh"

namespace m3dsim {

// Direction predictor driven by the trace's recorded outcomes. The trace has
// no PCs, so tables are indexed purely by global history.
//
//  two_level_gas: 12-bit global history -> 4096 2-bit counters.
//  tage_lite:     two_level_gas plus a 1024-entry tagged table over 16 bits of
//                 history with 2-bit useful counters.
//  Branches flagged branch_predictable=false miss with probability 0.5 under
//  both table-based modes, whatever the tables say.
class BranchPredictor {
 public:
  BranchPredictor(PredictorKind kind, std::uint64_t seed);

  // Predicted direction for `op`; call resolve() afterwards with the same op.
  bool predict(const MicroOp& op);
  void resolve(const MicroOp& op);

  // predict + resolve; true when the prediction was wrong.
  bool mispredicts(const MicroOp& op);

  PredictorKind kind() const { return kind_; }

 private:
  struct TaggedEntry {
    std::uint16_t tag = 0;
    std::uint8_t counter = 0;
    std::uint8_t useful = 0;
    bool valid = false;
  };

  std::size_t base_index() const { return history_ & 0xFFF; }
  std::size_t tagged_index() const;
  std::uint16_t tag() const;

  PredictorKind kind_;
  std::mt19937_64 rng_;
  std::uint64_t history_ = 0;
  std::vector<std::uint8_t> base_;
  std::vector<TaggedEntry> tagged_;
  bool last_forced_ = false;
  bool last_prediction_ = false;
};

}  // namespace m3dsim
