#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include "unipool/types.hpp"

namespace unipool {

struct WindowQuery {
  Partition partition = Partition::HF;
  std::string intersection_id;
  std::int64_t t0_us = 0;
  std::int64_t t1_us = 0;
  std::optional<std::set<std::string>> field_filter;
  std::size_t limit = 1;

  void validate() const;  // t0 <= t1, limit >= 1
};

struct InsertReceipt {
  std::uint64_t entry_id = 0;
  Partition partition = Partition::Static;
  std::uint64_t seq = 0;
};

// Three logically partitioned tables with a (intersection_id, timestamp_us)
// ordered index and sliding-window queries. Backed by one append-only
// JSON-lines log per partition; the in-memory index is rebuilt on open.
// One writer per partition, any number of readers; queries return
// materialized snapshots.
class PoolStore {
 public:
  struct Options {
    std::filesystem::path dir;
    bool in_memory = false;  // skip the log, e.g. for throwaway eval stores
    bool fsync_writes = false;
    double hf_retention_s = 60.0;
    double sf_retention_s = 3600.0;
  };

  explicit PoolStore(Options opts);
  ~PoolStore();

  PoolStore(const PoolStore&) = delete;
  PoolStore& operator=(const PoolStore&) = delete;

  // Durable once returned. Rejects duplicate entry_id and malformed anchors.
  InsertReceipt insert(const KnowledgeEntry& entry);

  // Rows with matching intersection and t0 <= t <= t1 (inclusive), keeping
  // rows with at least one field_filter key, newest first (ties: higher
  // sequence number first), truncated to limit.
  std::vector<KnowledgeEntry> query_window(const WindowQuery& q) const;

  // Newest row at or before t_us containing field_key.
  std::optional<KnowledgeEntry> latest(Partition partition,
                                       const std::string& intersection_id,
                                       const std::string& field_key,
                                       std::int64_t t_us) const;

  // Atomically replaces every Static row of the intersection. Readers see
  // the old set or the new set, never a mix.
  void refresh_static(const std::string& intersection_id,
                      const std::vector<KnowledgeEntry>& new_entries);

  // Drops HF/SF rows older than now_us - retention. Static never compacts.
  std::size_t compact(Partition partition, std::int64_t now_us);

  std::size_t row_count(Partition partition) const;
  std::size_t total_rows() const;
  std::vector<KnowledgeEntry> scan(Partition partition) const;  // index order
  std::uint64_t max_entry_id() const;
  std::uint64_t next_entry_id() { return ++id_counter_; }

  double retention_s(Partition p) const;

 private:
  struct Row {
    KnowledgeEntry entry;
    std::uint64_t seq = 0;
  };
  // (intersection_id, timestamp_us, seq) -> row
  using Index = std::map<std::tuple<std::string, std::int64_t, std::uint64_t>, Row>;

  struct Table {
    mutable std::shared_mutex mu;
    Index index;
    std::atomic<std::uint64_t> seq_counter{0};
    int log_fd = -1;
    std::filesystem::path log_path;
  };

  Options opts_;
  Table tables_[3];
  mutable std::mutex ids_mu_;
  std::set<std::uint64_t> ids_;
  std::atomic<std::uint64_t> id_counter_{0};

  Table& table(Partition p) { return tables_[static_cast<int>(p)]; }
  const Table& table(Partition p) const { return tables_[static_cast<int>(p)]; }

  void replay_log(Partition p);
  void append_log(Table& t, const std::string& line);
  void rewrite_log(Partition p, const Index& index);
};

}  // namespace unipool
