#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "unipool/pool_store.hpp"
#include "unipool/types.hpp"

namespace unipool {

// Vehicle-side requirement: what the planner wants to know, and from where.
struct QueryRequirement {
  GeoAnchor ego_anchor;
  std::string intent;
  std::string perception_summary;
  std::int64_t t_now_us = 0;
  double horizon_s = 4.5;

  void validate() const;  // intent+perception jointly non-empty, horizon > 0
};

// Unit-norm latent query (zero vector when the text tokenizes to nothing).
struct QueryVector {
  std::vector<double> values;

  double norm() const;
};

struct ScoredEntry {
  KnowledgeEntry entry;
  double score = 0.0;  // cosine * temporal decay * spatial gate, in [0, 1]
};

// Byte-budgeted payload. payload_bytes is the exact UTF-8 length of the
// canonical serialization and is the transmission-cost unit of account.
struct FusedContext {
  std::vector<ScoredEntry> static_section;
  std::vector<ScoredEntry> low_freq_section;
  std::vector<ScoredEntry> high_freq_section;
  std::int64_t t_us = 0;
  bool truncated = false;
  std::size_t payload_bytes = 0;

  std::size_t total_entries() const {
    return static_section.size() + low_freq_section.size() +
           high_freq_section.size();
  }
};

// Canonical payload serialization, bit-exact: one UTF-8 JSON object, keys
// sorted lexicographically at every level, no insignificant whitespace,
// numbers with up to 6 significant digits and no trailing zeros. Top-level
// keys: high_freq, low_freq, static, t_us, truncated. Section elements carry
// fields, prediction, reason, t_us only.
std::string canonical_payload(const FusedContext& ctx);

// Canonical rendering for one double (shared with the wire/service layer).
std::string canonical_number(double v);

struct RetrievalConfig {
  int dim = 256;
  int k_static = 4;
  int k_sf = 4;
  int k_hf = 8;
  double tau_hf_s = 0.5;
  double tau_sf_s = 5.0;
  double rho_m = 100.0;
  double lookback_hf_s = 2.0;
  double lookback_sf_s = 60.0;  // static lookback is unbounded
  std::size_t budget_bytes = 4096;
  std::size_t max_candidates = 10000;
};

// Deterministic feature-hash bridge encoder plus dual-query retrieval over
// the three partitions. A learned encoder can replace encode()/embed_entry()
// behind the same signatures.
class QueryEngine {
 public:
  explicit QueryEngine(const PoolStore& store, RetrievalConfig cfg = {});

  // Tokenize (lowercase, split on non-alphanumeric, drop tokens shorter
  // than 2), feature-hash into cfg.dim signed buckets, L2-normalize.
  QueryVector encode(const QueryRequirement& r) const;

  // Same hashing over field keys, text values, reason and prediction.
  // Cached on the entry; re-embedding is idempotent.
  const std::vector<double>& embed_entry(const KnowledgeEntry& e) const;

  // Window-filtered exhaustive scoring; top-k by score desc, ties to the
  // newer timestamp then the smaller entry_id. Zero scores are dropped.
  std::vector<ScoredEntry> search(const QueryVector& q, Partition partition,
                                  const QueryRequirement& r, int k) const;

  // Dedup by entry_id (highest score wins), order sections
  // static -> SF -> HF, drop lowest-score entries globally until the
  // canonical serialization fits budget_bytes.
  static FusedContext fuse(std::vector<ScoredEntry> e_static,
                           std::vector<ScoredEntry> e_hf,
                           std::vector<ScoredEntry> e_sf,
                           std::size_t budget_bytes, std::int64_t t_now_us);

  // encode -> three searches -> fuse with the configured k values.
  FusedContext retrieve(const QueryRequirement& r) const;

  const RetrievalConfig& config() const { return cfg_; }

 private:
  const PoolStore& store_;
  RetrievalConfig cfg_;
  mutable std::mutex cache_mu_;
  mutable std::unordered_map<std::uint64_t, std::vector<double>> embed_cache_;

  std::vector<double> embed_text_features(const std::vector<std::string>& parts) const;
};

// Tokenization used by the encoder; exposed for oracle tests.
std::vector<std::string> tokenize_for_encoding(const std::string& text);

// Fixed 64-bit FNV-1a; bucket and sign source for the feature hash.
std::uint64_t fnv1a64(const std::string& token);

}  // namespace unipool
