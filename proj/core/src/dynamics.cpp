#include "unipool/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace unipool {

void Thresholds::validate() const {
  if (!(eps_low > 0.0) || !(eps_low < eps_high)) {
    throw std::invalid_argument("thresholds: need 0 < eps_low < eps_high");
  }
  if (!(horizon_s > 0.0)) {
    throw std::invalid_argument("thresholds: horizon_s must be positive");
  }
  if (!(lf_freq_hz > 0.0) || !(lf_freq_hz < hf_freq_hz)) {
    throw std::invalid_argument("thresholds: need 0 < lf_freq_hz < hf_freq_hz");
  }
}

bool DynamicsProfile::update(std::int64_t timestamp_us, const FieldValue& value) {
  if (!window_.empty() && timestamp_us <= window_.back().t_us) {
    return false;
  }
  window_.push_back({timestamp_us, value});
  if (window_.size() > kWindowCapacity) window_.pop_front();
  recompute();
  return true;
}

void DynamicsProfile::recompute() {
  if (window_.size() < 2) {
    rate_estimate_ = 0.0;
    sample_freq_hz_ = 0.0;
    return;
  }
  const double duration_s =
      static_cast<double>(window_.back().t_us - window_.front().t_us) / 1e6;
  sample_freq_hz_ = static_cast<double>(window_.size() - 1) / duration_s;

  bool all_numeric = true;
  for (const auto& s : window_) {
    if (!s.value.is_number()) {
      all_numeric = false;
      break;
    }
  }

  if (all_numeric) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& s : window_) {
      lo = std::min(lo, s.value.number);
      hi = std::max(hi, s.value.number);
    }
    const double span = hi - lo;
    if (span <= 0.0) {
      rate_estimate_ = 0.0;
      return;
    }
    double sum = 0.0;
    for (std::size_t i = 1; i < window_.size(); ++i) {
      const double dv =
          std::abs(window_[i].value.number - window_[i - 1].value.number) / span;
      const double dt =
          static_cast<double>(window_[i].t_us - window_[i - 1].t_us) / 1e6;
      sum += dv / dt;
    }
    rate_estimate_ = sum / static_cast<double>(window_.size() - 1);
  } else {
    // symbolic content: discrete change frequency stands in for |dD/dt|
    std::size_t changes = 0;
    for (std::size_t i = 1; i < window_.size(); ++i) {
      if (!(window_[i].value == window_[i - 1].value)) ++changes;
    }
    rate_estimate_ = static_cast<double>(changes) / duration_s;
  }
}

Partition classify(const DynamicsProfile& profile, const Thresholds& th) {
  if (profile.sample_count() < 2) {
    return profile.last_partition().value_or(Partition::Static);
  }
  const double rate = profile.rate_estimate();
  if (rate >= th.eps_high && profile.sample_freq_hz() >= th.hf_freq_hz) {
    return Partition::HF;
  }
  if (rate < th.eps_low) {
    return Partition::Static;
  }
  return Partition::SF;
}

ClassifierState::ClassifierState(Thresholds th) : thresholds_(th) {
  thresholds_.validate();
}

KnowledgeEntry ClassifierState::route(KnowledgeEntry entry) {
  std::lock_guard lock(mu_);
  Partition best = Partition::Static;
  auto rank = [](Partition p) {
    switch (p) {
      case Partition::HF: return 2;
      case Partition::SF: return 1;
      case Partition::Static: return 0;
    }
    return 0;
  };
  for (const auto& [key, value] : entry.fields) {
    auto& profile = profiles_[{entry.anchor.intersection_id, key}];
    profile.update(entry.timestamp_us, value);
    const Partition p = classify(profile, thresholds_);
    profile.set_last_partition(p);
    if (rank(p) > rank(best)) best = p;
  }
  entry.partition = best;
  return entry;
}

Partition ClassifierState::classify_key(const std::string& intersection_id,
                                        const std::string& field_key) const {
  std::lock_guard lock(mu_);
  auto it = profiles_.find({intersection_id, field_key});
  if (it == profiles_.end()) return Partition::Static;
  return classify(it->second, thresholds_);
}

}  // namespace unipool
