#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "unipool/types.hpp"

namespace unipool {

// Planar rigid motion: rotate by theta_rad, then translate.
struct RigidTransform2D {
  double theta_rad = 0.0;
  double tx_m = 0.0;
  double ty_m = 0.0;

  void apply(double& x, double& y) const;
};

// compose(a, b) maps p -> a(b(p)).
RigidTransform2D compose(const RigidTransform2D& a, const RigidTransform2D& b);

using TransformMap = std::map<std::string, RigidTransform2D>;

// Records sharing one alignment timestamp (floor(t / window) * window).
struct Batch {
  std::int64_t aligned_us = 0;
  std::vector<RawRecord> records;
};

struct SyncResult {
  std::vector<Batch> batches;
  std::vector<RecordError> rejected;
};

// Buckets records by alignment window. Records with timestamp_us <= 0 are
// rejected per record; processing continues. Batches come out sorted
// ascending, records within a batch sorted by (source_id, timestamp_us).
SyncResult synchronize(std::vector<RawRecord> records, std::int64_t window_us);

// Maps the record anchor into the unified frame. Throws std::out_of_range
// naming the frame when transforms lacks record.calibration_frame.
RawRecord calibrate(const RawRecord& record, const TransformMap& transforms);

struct FieldSpec {
  FieldValue default_value;
  double min = 0.0;
  double max = 1.0;
  bool scalable = false;
};

using NormalizationSchema = std::map<std::string, FieldSpec>;

struct NormalizeResult {
  RawRecord record;
  // Values outside [min, max] by more than 10x the range; clamped, never dropped.
  std::uint32_t anomalies = 0;
};

// Fills missing schema keys with defaults, clamps numeric values to
// [min, max], min-max scales scalable keys to [0, 1]. Non-schema keys pass
// through verbatim. Requires record.modality == Structured.
NormalizeResult normalize_structured(const RawRecord& record,
                                     const NormalizationSchema& schema);

// Fills numeric schema fields missing from a record by linear interpolation
// when the same source provides the field in both temporal neighbors within
// max_gap_us; otherwise normalize_structured's default fill applies later.
// Records must be time-sorted per source.
void interpolate_missing(std::vector<RawRecord>& records,
                         const NormalizationSchema& schema,
                         std::int64_t max_gap_us = 1'000'000);

struct CaptionResult {
  FieldMap fields;
  std::string reason;
  std::string prediction;
};

// Turns one unstructured-derived record into pool fields plus reason and
// prediction text. Implementations may throw; semanticize surfaces the
// failure and keeps going.
class Captioner {
 public:
  virtual ~Captioner() = default;
  virtual CaptionResult caption(const RawRecord& record) = 0;
};

// Deterministic captioner: fixed templates over the payload keys, so the
// pipeline is reproducible without an external vision-language model.
class TemplateCaptioner : public Captioner {
 public:
  CaptionResult caption(const RawRecord& record) override;
};

struct SemanticizeResult {
  std::vector<KnowledgeEntry> entries;
  std::vector<RecordError> errors;
};

// One entry per (anchor, field-group); entry timestamps take the batch
// alignment timestamp. Structured payloads map directly with
// reason = "sensor report"; unstructured payloads go through the captioner.
// entry_id is left 0 for the store-facing caller to assign.
SemanticizeResult semanticize(const Batch& batch, Captioner& captioner);

struct IngestReceipt {
  std::uint64_t entry_id = 0;
  Partition partition = Partition::Static;
  bool ok = true;
  std::string error;
};

class PoolStore;
class ClassifierState;

// Routes entries through the classifier, then inserts. Receipts preserve
// input order; a failed insert yields an error receipt and the batch
// continues (no batch atomicity).
std::vector<IngestReceipt> ingest_batch(std::vector<KnowledgeEntry> entries,
                                        PoolStore& store,
                                        ClassifierState& classifier);

}  // namespace unipool
