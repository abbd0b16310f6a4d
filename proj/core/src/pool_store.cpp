#include "unipool/pool_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "unipool/json_codec.hpp"

namespace unipool {

using nlohmann::json;

void WindowQuery::validate() const {
  if (t0_us > t1_us) {
    throw std::invalid_argument("query window: t0_us > t1_us");
  }
  if (limit < 1) {
    throw std::invalid_argument("query window: limit must be >= 1");
  }
}

namespace {
const char* log_name(Partition p) {
  switch (p) {
    case Partition::Static: return "static.log";
    case Partition::HF: return "hf.log";
    case Partition::SF: return "sf.log";
  }
  return "static.log";
}
}  // namespace

PoolStore::PoolStore(Options opts) : opts_(std::move(opts)) {
  if (!opts_.in_memory) {
    if (opts_.dir.empty()) {
      throw std::invalid_argument("pool store needs a directory (or in_memory)");
    }
    std::filesystem::create_directories(opts_.dir);
    for (Partition p : {Partition::Static, Partition::HF, Partition::SF}) {
      Table& t = table(p);
      t.log_path = opts_.dir / log_name(p);
      replay_log(p);
      t.log_fd = ::open(t.log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
      if (t.log_fd < 0) {
        throw std::runtime_error("cannot open log " + t.log_path.string() + ": " +
                                 std::strerror(errno));
      }
    }
  }
}

PoolStore::~PoolStore() {
  for (auto& t : tables_) {
    if (t.log_fd >= 0) ::close(t.log_fd);
  }
}

void PoolStore::replay_log(Partition p) {
  Table& t = table(p);
  std::ifstream in(t.log_path);
  if (!in) return;  // fresh store
  std::string line;
  std::uint64_t max_seq = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) continue;  // torn tail write
    const std::string op = j.value("op", std::string{});
    if (op == "insert") {
      KnowledgeEntry e = knowledge_entry_from_json(j.at("entry").dump());
      const std::uint64_t seq = j.at("seq").get<std::uint64_t>();
      max_seq = std::max(max_seq, seq);
      t.index[{e.anchor.intersection_id, e.timestamp_us, seq}] = {e, seq};
      ids_.insert(e.entry_id);
      id_counter_ = std::max(id_counter_.load(), e.entry_id);
    } else if (op == "refresh") {
      const std::string iid = j.at("intersection_id").get<std::string>();
      auto lo = t.index.lower_bound({iid, 0, 0});
      auto hi = t.index.upper_bound(
          {iid, std::numeric_limits<std::int64_t>::max(),
           std::numeric_limits<std::uint64_t>::max()});
      for (auto it = lo; it != hi; ++it) ids_.erase(it->second.entry.entry_id);
      t.index.erase(lo, hi);
      for (const auto& je : j.at("entries")) {
        KnowledgeEntry e = knowledge_entry_from_json(je.dump());
        const std::uint64_t seq = ++max_seq;
        t.index[{e.anchor.intersection_id, e.timestamp_us, seq}] = {e, seq};
        ids_.insert(e.entry_id);
        id_counter_ = std::max(id_counter_.load(), e.entry_id);
      }
    }
  }
  t.seq_counter = max_seq;
}

void PoolStore::append_log(Table& t, const std::string& line) {
  if (t.log_fd < 0) return;
  std::string buf = line;
  buf.push_back('\n');
  const char* p = buf.data();
  std::size_t left = buf.size();
  while (left > 0) {
    const ssize_t n = ::write(t.log_fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("log write failed: ") +
                               std::strerror(errno));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (opts_.fsync_writes) ::fsync(t.log_fd);
}

InsertReceipt PoolStore::insert(const KnowledgeEntry& entry) {
  if (!entry.anchor.valid()) {
    throw std::invalid_argument("insert: malformed anchor");
  }
  {
    std::lock_guard lock(ids_mu_);
    if (!ids_.insert(entry.entry_id).second) {
      throw std::invalid_argument("insert: duplicate entry_id " +
                                  std::to_string(entry.entry_id));
    }
  }
  Table& t = table(entry.partition);
  std::unique_lock lock(t.mu);
  const std::uint64_t seq = ++t.seq_counter;
  json line;
  line["op"] = "insert";
  line["seq"] = seq;
  line["entry"] = json::parse(knowledge_entry_to_json(entry));
  try {
    append_log(t, line.dump());
  } catch (...) {
    std::lock_guard idlock(ids_mu_);
    ids_.erase(entry.entry_id);
    throw;
  }
  t.index[{entry.anchor.intersection_id, entry.timestamp_us, seq}] = {entry, seq};
  return {entry.entry_id, entry.partition, seq};
}

std::vector<KnowledgeEntry> PoolStore::query_window(const WindowQuery& q) const {
  q.validate();
  const Table& t = table(q.partition);
  std::shared_lock lock(t.mu);
  std::vector<const Row*> hits;
  auto lo = t.index.lower_bound({q.intersection_id, q.t0_us, 0});
  auto hi = t.index.upper_bound({q.intersection_id, q.t1_us,
                                 std::numeric_limits<std::uint64_t>::max()});
  for (auto it = lo; it != hi; ++it) {
    const Row& row = it->second;
    if (q.field_filter) {
      bool any = false;
      for (const auto& key : *q.field_filter) {
        if (row.entry.fields.count(key)) {
          any = true;
          break;
        }
      }
      if (!any) continue;
    }
    hits.push_back(&row);
  }
  std::sort(hits.begin(), hits.end(), [](const Row* a, const Row* b) {
    if (a->entry.timestamp_us != b->entry.timestamp_us) {
      return a->entry.timestamp_us > b->entry.timestamp_us;
    }
    return a->seq > b->seq;
  });
  if (hits.size() > q.limit) hits.resize(q.limit);
  std::vector<KnowledgeEntry> out;
  out.reserve(hits.size());
  for (const Row* r : hits) out.push_back(r->entry);
  return out;
}

std::optional<KnowledgeEntry> PoolStore::latest(Partition partition,
                                                const std::string& intersection_id,
                                                const std::string& field_key,
                                                std::int64_t t_us) const {
  if (t_us <= 0) throw std::invalid_argument("latest: t_us must be positive");
  const Table& t = table(partition);
  std::shared_lock lock(t.mu);
  auto it = t.index.upper_bound(
      {intersection_id, t_us, std::numeric_limits<std::uint64_t>::max()});
  while (it != t.index.begin()) {
    --it;
    if (std::get<0>(it->first) != intersection_id) break;
    if (it->second.entry.fields.count(field_key)) return it->second.entry;
  }
  return std::nullopt;
}

void PoolStore::refresh_static(const std::string& intersection_id,
                               const std::vector<KnowledgeEntry>& new_entries) {
  for (const auto& e : new_entries) {
    if (e.partition != Partition::Static) {
      throw std::invalid_argument("refresh_static: entry " +
                                  std::to_string(e.entry_id) + " is not Static");
    }
    if (e.anchor.intersection_id != intersection_id) {
      throw std::invalid_argument(
          "refresh_static: mixed intersection ids (expected " + intersection_id +
          ", got " + e.anchor.intersection_id + ")");
    }
    if (!e.anchor.valid()) {
      throw std::invalid_argument("refresh_static: malformed anchor");
    }
  }
  Table& t = table(Partition::Static);
  std::unique_lock lock(t.mu);

  auto lo = t.index.lower_bound({intersection_id, 0, 0});
  auto hi = t.index.upper_bound({intersection_id,
                                 std::numeric_limits<std::int64_t>::max(),
                                 std::numeric_limits<std::uint64_t>::max()});

  // validate ids before any mutation; ids of the replaced rows may be reused
  std::set<std::uint64_t> replaced_ids;
  for (auto it = lo; it != hi; ++it) replaced_ids.insert(it->second.entry.entry_id);
  {
    std::lock_guard idlock(ids_mu_);
    std::set<std::uint64_t> seen;
    for (const auto& e : new_entries) {
      if (!seen.insert(e.entry_id).second) {
        throw std::invalid_argument("refresh_static: duplicate entry_id " +
                                    std::to_string(e.entry_id));
      }
      if (!replaced_ids.count(e.entry_id) && ids_.count(e.entry_id)) {
        throw std::invalid_argument("refresh_static: entry_id " +
                                    std::to_string(e.entry_id) +
                                    " already exists elsewhere in the store");
      }
    }
  }

  json line;
  line["op"] = "refresh";
  line["intersection_id"] = intersection_id;
  json arr = json::array();
  for (const auto& e : new_entries) {
    arr.push_back(json::parse(knowledge_entry_to_json(e)));
  }
  line["entries"] = std::move(arr);
  append_log(t, line.dump());

  {
    std::lock_guard idlock(ids_mu_);
    for (std::uint64_t id : replaced_ids) ids_.erase(id);
    for (const auto& e : new_entries) ids_.insert(e.entry_id);
  }
  t.index.erase(lo, hi);
  for (const auto& e : new_entries) {
    const std::uint64_t seq = ++t.seq_counter;
    t.index[{e.anchor.intersection_id, e.timestamp_us, seq}] = {e, seq};
    id_counter_ = std::max(id_counter_.load(), e.entry_id);
  }
}

std::size_t PoolStore::compact(Partition partition, std::int64_t now_us) {
  if (partition == Partition::Static) {
    throw std::invalid_argument("compact: Static partition is never compacted");
  }
  const double retention =
      partition == Partition::HF ? opts_.hf_retention_s : opts_.sf_retention_s;
  const std::int64_t cutoff =
      now_us - static_cast<std::int64_t>(retention * 1e6);
  Table& t = table(partition);
  std::unique_lock lock(t.mu);
  std::vector<std::uint64_t> removed_ids;
  for (auto it = t.index.begin(); it != t.index.end();) {
    if (it->second.entry.timestamp_us < cutoff) {
      removed_ids.push_back(it->second.entry.entry_id);
      it = t.index.erase(it);
    } else {
      ++it;
    }
  }
  if (!removed_ids.empty()) {
    std::lock_guard idlock(ids_mu_);
    for (std::uint64_t id : removed_ids) ids_.erase(id);
  }
  if (!removed_ids.empty()) rewrite_log(partition, t.index);
  return removed_ids.size();
}

void PoolStore::rewrite_log(Partition p, const Index& index) {
  Table& t = table(p);
  if (t.log_fd < 0) return;
  const std::filesystem::path tmp = t.log_path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& [key, row] : index) {
      json line;
      line["op"] = "insert";
      line["seq"] = row.seq;
      line["entry"] = json::parse(knowledge_entry_to_json(row.entry));
      out << line.dump() << "\n";
    }
  }
  ::close(t.log_fd);
  std::filesystem::rename(tmp, t.log_path);
  t.log_fd = ::open(t.log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (t.log_fd < 0) {
    throw std::runtime_error("cannot reopen log after compaction");
  }
}

std::size_t PoolStore::row_count(Partition partition) const {
  const Table& t = table(partition);
  std::shared_lock lock(t.mu);
  return t.index.size();
}

std::size_t PoolStore::total_rows() const {
  return row_count(Partition::Static) + row_count(Partition::HF) +
         row_count(Partition::SF);
}

std::vector<KnowledgeEntry> PoolStore::scan(Partition partition) const {
  const Table& t = table(partition);
  std::shared_lock lock(t.mu);
  std::vector<KnowledgeEntry> out;
  out.reserve(t.index.size());
  for (const auto& [key, row] : t.index) out.push_back(row.entry);
  return out;
}

std::uint64_t PoolStore::max_entry_id() const {
  std::lock_guard lock(ids_mu_);
  return ids_.empty() ? 0 : *ids_.rbegin();
}

double PoolStore::retention_s(Partition p) const {
  switch (p) {
    case Partition::HF: return opts_.hf_retention_s;
    case Partition::SF: return opts_.sf_retention_s;
    case Partition::Static: return std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

}  // namespace unipool
