#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "unipool/config.hpp"
#include "unipool/dynamics.hpp"
#include "unipool/ingest.hpp"
#include "unipool/pool_store.hpp"

namespace unipool {

struct PipelineResult {
  std::vector<IngestReceipt> receipts;
  std::vector<RecordError> errors;
  std::uint32_t anomalies = 0;
};

// End-to-end ingestion: synchronize -> calibrate -> interpolate/normalize ->
// semanticize -> classify -> insert. Per-record and per-entry failures are
// collected; the stream keeps flowing.
class IngestPipeline {
 public:
  IngestPipeline(PoolStore& store, ClassifierState& classifier, Config cfg,
                 std::shared_ptr<Captioner> captioner = nullptr);

  PipelineResult ingest(std::vector<RawRecord> records);

  ClassifierState& classifier() { return classifier_; }

 private:
  PoolStore& store_;
  ClassifierState& classifier_;
  Config cfg_;
  std::shared_ptr<Captioner> captioner_;
};

}  // namespace unipool
