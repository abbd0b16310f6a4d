#include "unipool/pipeline.hpp"

namespace unipool {

IngestPipeline::IngestPipeline(PoolStore& store, ClassifierState& classifier,
                               Config cfg, std::shared_ptr<Captioner> captioner)
    : store_(store),
      classifier_(classifier),
      cfg_(std::move(cfg)),
      captioner_(std::move(captioner)) {
  cfg_.validate();
  if (!captioner_) captioner_ = std::make_shared<TemplateCaptioner>();
}

PipelineResult IngestPipeline::ingest(std::vector<RawRecord> records) {
  PipelineResult out;
  SyncResult sync = synchronize(std::move(records), cfg_.window_us);
  out.errors = std::move(sync.rejected);

  for (Batch& batch : sync.batches) {
    std::vector<RawRecord> prepared;
    prepared.reserve(batch.records.size());
    for (RawRecord& r : batch.records) {
      try {
        prepared.push_back(calibrate(r, cfg_.transforms));
      } catch (const std::exception& ex) {
        out.errors.push_back({r.source_id, r.timestamp_us, ex.what()});
      }
    }
    interpolate_missing(prepared, cfg_.schema);
    for (RawRecord& r : prepared) {
      if (r.modality != Modality::Structured) continue;
      NormalizeResult n = normalize_structured(r, cfg_.schema);
      out.anomalies += n.anomalies;
      r = std::move(n.record);
    }
    Batch ready{batch.aligned_us, std::move(prepared)};
    SemanticizeResult sem = semanticize(ready, *captioner_);
    for (auto& err : sem.errors) out.errors.push_back(std::move(err));
    auto receipts = ingest_batch(std::move(sem.entries), store_, classifier_);
    for (auto& rec : receipts) out.receipts.push_back(std::move(rec));
  }
  return out;
}

}  // namespace unipool
