#include "unipool/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "unipool/dynamics.hpp"
#include "unipool/pool_store.hpp"

namespace unipool {

void RigidTransform2D::apply(double& x, double& y) const {
  const double c = std::cos(theta_rad);
  const double s = std::sin(theta_rad);
  const double xr = c * x - s * y;
  const double yr = s * x + c * y;
  x = xr + tx_m;
  y = yr + ty_m;
}

RigidTransform2D compose(const RigidTransform2D& a, const RigidTransform2D& b) {
  RigidTransform2D out;
  out.theta_rad = a.theta_rad + b.theta_rad;
  double tx = b.tx_m;
  double ty = b.ty_m;
  const double c = std::cos(a.theta_rad);
  const double s = std::sin(a.theta_rad);
  out.tx_m = c * tx - s * ty + a.tx_m;
  out.ty_m = s * tx + c * ty + a.ty_m;
  return out;
}

SyncResult synchronize(std::vector<RawRecord> records, std::int64_t window_us) {
  if (window_us <= 0) {
    throw std::invalid_argument("synchronize: window_us must be positive");
  }
  SyncResult out;
  std::map<std::int64_t, std::vector<RawRecord>> buckets;
  for (auto& r : records) {
    if (r.timestamp_us <= 0) {
      out.rejected.push_back(
          {r.source_id, r.timestamp_us, "non-positive timestamp"});
      continue;
    }
    const std::int64_t aligned = (r.timestamp_us / window_us) * window_us;
    buckets[aligned].push_back(std::move(r));
  }
  out.batches.reserve(buckets.size());
  for (auto& [aligned, recs] : buckets) {
    std::sort(recs.begin(), recs.end(),
              [](const RawRecord& a, const RawRecord& b) {
                if (a.source_id != b.source_id) return a.source_id < b.source_id;
                return a.timestamp_us < b.timestamp_us;
              });
    out.batches.push_back({aligned, std::move(recs)});
  }
  return out;
}

RawRecord calibrate(const RawRecord& record, const TransformMap& transforms) {
  auto it = transforms.find(record.calibration_frame);
  if (it == transforms.end()) {
    throw std::out_of_range("calibrate: no transform for frame '" +
                            record.calibration_frame + "'");
  }
  RawRecord out = record;
  it->second.apply(out.anchor.x_m, out.anchor.y_m);
  out.calibration_frame = "unified";
  return out;
}

NormalizeResult normalize_structured(const RawRecord& record,
                                     const NormalizationSchema& schema) {
  if (record.modality != Modality::Structured) {
    throw std::invalid_argument("normalize_structured: record is not structured");
  }
  NormalizeResult out;
  out.record = record;
  for (const auto& [key, spec] : schema) {
    auto it = out.record.payload.find(key);
    if (it == out.record.payload.end()) {
      out.record.payload.emplace(key, spec.default_value);
      continue;
    }
    FieldValue& v = it->second;
    if (!v.is_number()) continue;
    const double range = spec.max - spec.min;
    if (v.number < spec.min - 10.0 * range || v.number > spec.max + 10.0 * range) {
      ++out.anomalies;
    }
    v.number = std::clamp(v.number, spec.min, spec.max);
    if (spec.scalable && range > 0.0) {
      v.number = (v.number - spec.min) / range;
      v.unit.clear();
    }
  }
  return out;
}

void interpolate_missing(std::vector<RawRecord>& records,
                         const NormalizationSchema& schema,
                         std::int64_t max_gap_us) {
  for (const auto& [key, spec] : schema) {
    // text-valued keys are default-filled, never interpolated
    if (!spec.default_value.is_number()) continue;
    for (std::size_t i = 0; i < records.size(); ++i) {
      RawRecord& r = records[i];
      if (r.modality != Modality::Structured) continue;
      if (r.payload.count(key)) continue;
      // find same-source numeric neighbors
      const RawRecord* prev = nullptr;
      const RawRecord* next = nullptr;
      for (std::size_t j = i; j-- > 0;) {
        if (records[j].source_id != r.source_id) continue;
        auto it = records[j].payload.find(key);
        if (it != records[j].payload.end() && it->second.is_number()) {
          prev = &records[j];
          break;
        }
      }
      for (std::size_t j = i + 1; j < records.size(); ++j) {
        if (records[j].source_id != r.source_id) continue;
        auto it = records[j].payload.find(key);
        if (it != records[j].payload.end() && it->second.is_number()) {
          next = &records[j];
          break;
        }
      }
      if (!prev || !next) continue;
      if (r.timestamp_us - prev->timestamp_us > max_gap_us) continue;
      if (next->timestamp_us - r.timestamp_us > max_gap_us) continue;
      const double v0 = prev->payload.at(key).number;
      const double v1 = next->payload.at(key).number;
      const double span =
          static_cast<double>(next->timestamp_us - prev->timestamp_us);
      double v = v0;
      if (span > 0) {
        const double a =
            static_cast<double>(r.timestamp_us - prev->timestamp_us) / span;
        v = v0 + a * (v1 - v0);
      }
      r.payload.emplace(key, FieldValue::num(v, prev->payload.at(key).unit));
    }
  }
}

namespace {

std::string value_text(const FieldValue& v) {
  if (v.is_text()) return v.text;
  std::ostringstream os;
  os << v.number;
  if (!v.unit.empty()) os << " " << v.unit;
  return os.str();
}

std::string vocab_key(const std::string& key) {
  return is_valid_field_key(key) ? key : "x_" + key;
}

}  // namespace

CaptionResult TemplateCaptioner::caption(const RawRecord& record) {
  if (record.payload.empty()) {
    throw std::runtime_error("caption: empty payload from " + record.source_id);
  }
  CaptionResult out;
  std::ostringstream reason;
  reason << "observed";
  bool first = true;
  std::string lead_text;
  for (const auto& [key, value] : record.payload) {
    out.fields.emplace(vocab_key(key), value);
    if (!value.is_text()) continue;
    if (lead_text.empty()) lead_text = value.text;
    reason << (first ? " " : "; ") << key << ": " << value.text;
    first = false;
  }
  if (first) {
    // numeric-only payload: fall back to describing every value
    for (const auto& [key, value] : record.payload) {
      reason << (first ? " " : "; ") << key << ": " << value_text(value);
      first = false;
    }
    lead_text = "scene";
  }
  out.reason = reason.str();
  out.prediction = lead_text + " expected to persist over the next second";
  return out;
}

SemanticizeResult semanticize(const Batch& batch, Captioner& captioner) {
  SemanticizeResult out;
  for (const RawRecord& r : batch.records) {
    KnowledgeEntry e;
    e.anchor = r.anchor;
    e.timestamp_us = batch.aligned_us;
    if (r.modality == Modality::Structured) {
      for (const auto& [key, value] : r.payload) {
        e.fields.emplace(vocab_key(key), value);
      }
      e.reason = "sensor report";
      e.prediction = "";
    } else {
      try {
        CaptionResult c = captioner.caption(r);
        e.fields = std::move(c.fields);
        e.reason = std::move(c.reason);
        e.prediction = std::move(c.prediction);
      } catch (const std::exception& ex) {
        out.errors.push_back({r.source_id, r.timestamp_us, ex.what()});
        continue;
      }
    }
    out.entries.push_back(std::move(e));
  }
  return out;
}

std::vector<IngestReceipt> ingest_batch(std::vector<KnowledgeEntry> entries,
                                        PoolStore& store,
                                        ClassifierState& classifier) {
  std::vector<IngestReceipt> receipts;
  receipts.reserve(entries.size());
  for (auto& e : entries) {
    if (e.entry_id == 0) e.entry_id = store.next_entry_id();
    KnowledgeEntry routed = classifier.route(std::move(e));
    IngestReceipt rec;
    rec.entry_id = routed.entry_id;
    rec.partition = routed.partition;
    try {
      store.insert(routed);
    } catch (const std::exception& ex) {
      rec.ok = false;
      rec.error = ex.what();
    }
    receipts.push_back(std::move(rec));
  }
  return receipts;
}

}  // namespace unipool
