#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "unipool/types.hpp"

namespace unipool {

// Partition thresholds. eps values are change-per-second on normalized
// signals; frequencies in Hz.
struct Thresholds {
  double eps_low = 0.05;
  double eps_high = 0.5;
  double horizon_s = 4.5;
  double hf_freq_hz = 10.0;
  double lf_freq_hz = 1.0;

  void validate() const;
};

// Per (anchor, field-key) running change-rate estimate.
class DynamicsProfile {
 public:
  static constexpr std::size_t kWindowCapacity = 64;

  // Appends a sample and refreshes the estimates. Returns false (profile
  // unchanged) when timestamp_us does not increase.
  bool update(std::int64_t timestamp_us, const FieldValue& value);

  // change-per-second: numeric values use mean |dv| over the window's
  // min-max span per second; text values use discrete changes per second.
  double rate_estimate() const { return rate_estimate_; }
  double sample_freq_hz() const { return sample_freq_hz_; }
  std::size_t sample_count() const { return window_.size(); }
  std::optional<Partition> last_partition() const { return last_partition_; }
  void set_last_partition(Partition p) { last_partition_ = p; }

 private:
  struct Sample {
    std::int64_t t_us;
    FieldValue value;
  };
  std::deque<Sample> window_;
  double rate_estimate_ = 0.0;
  double sample_freq_hz_ = 0.0;
  std::optional<Partition> last_partition_;

  void recompute();
};

// Eq-style routing:
//   HF     rate >= eps_high and sample_freq >= hf_freq_hz
//   Static rate < eps_low
//   SF     everything else (the dynamic band, and fast-changing content
//          sampled too slowly to support high-frequency planning)
// With < 2 samples the last known partition is returned, or Static on a
// cold start.
Partition classify(const DynamicsProfile& profile, const Thresholds& th);

// Profiles keyed by (intersection_id, field_key). Same-key updates are
// serialized internally.
class ClassifierState {
 public:
  explicit ClassifierState(Thresholds th = {});

  // Updates the profile of every entry field and tags the entry with the
  // most dynamic per-field class (HF > SF > Static). Duplicate timestamps
  // for a key leave that profile untouched but still count its class.
  KnowledgeEntry route(KnowledgeEntry entry);

  Partition classify_key(const std::string& intersection_id,
                         const std::string& field_key) const;

  const Thresholds& thresholds() const { return thresholds_; }

 private:
  Thresholds thresholds_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, DynamicsProfile> profiles_;
};

}  // namespace unipool
