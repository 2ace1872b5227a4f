#include "m3dsim/predictor.hh"

namespace m3dsim {

BranchPredictor::BranchPredictor(PredictorKind kind, std::uint64_t seed)
    : kind_(kind), rng_(seed), base_(4096, 2) {
  if (kind_ == PredictorKind::tage_lite) tagged_.resize(1024);
}

std::size_t BranchPredictor::tagged_index() const {
  const std::uint64_t h = history_ & 0xFFFF;
  return static_cast<std::size_t>((h ^ (h >> 10) ^ (h << 3)) & 0x3FF);
}

std::uint16_t BranchPredictor::tag() const {
  const std::uint64_t h = history_ & 0xFFFF;
  return static_cast<std::uint16_t>(((h >> 6) ^ (h * 0x9E37)) & 0xFF);
}

bool BranchPredictor::predict(const MicroOp& op) {
  const bool taken = op.branch_taken.value_or(false);
  last_forced_ = false;
  switch (kind_) {
    case PredictorKind::perfect: return last_prediction_ = taken;
    case PredictorKind::static_taken: return last_prediction_ = true;
    default: break;
  }
  if (op.branch_predictable.has_value() && !*op.branch_predictable) {
    last_forced_ = true;
    const bool miss = (rng_() & 1) != 0;
    return last_prediction_ = miss ? !taken : taken;
  }
  bool pred = base_[base_index()] >= 2;
  if (kind_ == PredictorKind::tage_lite) {
    const auto& e = tagged_[tagged_index()];
    if (e.valid && e.tag == tag()) pred = e.counter >= 2;
  }
  return last_prediction_ = pred;
}

void BranchPredictor::resolve(const MicroOp& op) {
  if (kind_ == PredictorKind::perfect || kind_ == PredictorKind::static_taken) return;
  const bool taken = op.branch_taken.value_or(false);
  auto bump = [taken](std::uint8_t& c) {
    if (taken && c < 3) ++c;
    if (!taken && c > 0) --c;
  };
  auto& base = base_[base_index()];
  const bool base_pred = base >= 2;
  if (kind_ == PredictorKind::tage_lite && !last_forced_) {
    auto& e = tagged_[tagged_index()];
    const bool hit = e.valid && e.tag == tag();
    if (hit) {
      const bool tagged_pred = e.counter >= 2;
      if (tagged_pred != base_pred) {
        if (tagged_pred == taken && e.useful < 3) ++e.useful;
        if (tagged_pred != taken && e.useful > 0) --e.useful;
      }
      bump(e.counter);
    } else if (base_pred != taken) {
      if (!e.valid || e.useful == 0)
        e = TaggedEntry{tag(), static_cast<std::uint8_t>(taken ? 2 : 1), 0, true};
      else
        --e.useful;
    }
  }
  bump(base);
  history_ = (history_ << 1) | (taken ? 1 : 0);
}

bool BranchPredictor::mispredicts(const MicroOp& op) {
  const bool pred = predict(op);
  resolve(op);
  return pred != op.branch_taken.value_or(false);
}

}  // namespace m3dsim
